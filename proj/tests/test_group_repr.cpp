#include <catch2/catch_amalgamated.hpp>

#include "equibound/group_repr.hpp"

using namespace equibound;
using namespace equibound::repr;

namespace {

RepSpec freq1_rep(std::optional<GroupSpec> g = GroupSpec::so2()) {
  return RepSpec::make({{Irrep::rotation(1), 1}}, g);
}

bool matrix_close(const Matrix& a, const Matrix& b, double tol = 1e-12) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a - b).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

TEST_CASE("irrep matrices for rotation harmonics") {
  const Irrep trivial = Irrep::rotation(0);
  CHECK(matrix_close(irrep_matrix(trivial, 1.234), Matrix::Identity(1, 1)));

  const Irrep f1 = Irrep::rotation(1);
  Matrix quarter(2, 2);
  quarter << 0, -1, 1, 0;
  CHECK(matrix_close(irrep_matrix(f1, kTwoPi / 4), quarter, 1e-15));

  // harmonic 2 at a quarter turn is a half turn
  const Irrep f2 = Irrep::rotation(2);
  Matrix half(2, 2);
  half << -1, 0, 0, -1;
  CHECK(matrix_close(irrep_matrix(f2, kTwoPi / 4), half, 1e-15));

  SECTION("inconsistent shape or type is rejected") {
    Irrep bad = f1;
    bad.dim = 1;
    bad.c = 1;
    bad.field_type = FieldType::Real;
    CHECK_THROWS_AS(irrep_matrix(bad, 0.1), std::invalid_argument);
    Irrep quat{"q", 0, 4, FieldType::Quaternionic, 4};
    CHECK_THROWS_AS(irrep_matrix(quat, 0.1), std::invalid_argument);
  }

  SECTION("matrices are orthogonal") {
    for (double theta : {0.3, 1.7, 5.9}) {
      Matrix r = irrep_matrix(Irrep::rotation(3), theta);
      CHECK(matrix_close(r * r.transpose(), Matrix::Identity(2, 2), 1e-14));
    }
  }
}

TEST_CASE("homomorphism property over cyclic groups") {
  Rng rng(41);
  for (int order : {5, 8, 12}) {
    const auto group = GroupSpec::cyclic(order);
    std::vector<std::pair<Irrep, int>> parts{{Irrep::rotation(0), 2}};
    for (int k = 1; 2 * k < order && k <= 3; ++k)
      parts.push_back({Irrep::rotation(k), 1 + static_cast<int>(rng.integer(2))});
    const auto rep = RepSpec::make(parts, group);
    for (int trial = 0; trial < 20; ++trial) {
      const int g = static_cast<int>(rng.integer(static_cast<std::uint64_t>(order)));
      const int h = static_cast<int>(rng.integer(static_cast<std::uint64_t>(order)));
      const Matrix lhs = rep_matrix(rep, (g + h) % order);
      const Matrix rhs = rep_matrix(rep, g) * rep_matrix(rep, h);
      CHECK((lhs - rhs).norm() <= 1e-10);
    }
  }
}

TEST_CASE("rep matrices") {
  SECTION("sum of trivial irreps is the identity") {
    const auto rep = RepSpec::make({{Irrep::rotation(0), 2}}, GroupSpec::so2());
    CHECK(matrix_close(rep_matrix(rep, 2.1), Matrix::Identity(2, 2)));
  }
  SECTION("two copies of the harmonic-1 irrep at a half turn") {
    const auto rep = RepSpec::make({{Irrep::rotation(1), 2}}, GroupSpec::so2());
    CHECK(matrix_close(rep_matrix(rep, kTwoPi / 2), -Matrix::Identity(4, 4), 1e-14));
  }
  SECTION("non-identity basis at the group identity") {
    Rng rng(7);
    const Matrix q = random_orthogonal(4, rng);
    const auto rep =
        RepSpec::make({{Irrep::rotation(0), 2}, {Irrep::rotation(1), 1}}, GroupSpec::so2(), q);
    CHECK(matrix_close(rep_matrix(rep, 0.0), Matrix::Identity(4, 4), 1e-13));
  }
  SECTION("dimension identity holds for every constructed rep") {
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<std::pair<Irrep, int>> parts;
      int expected = 0;
      for (int k = 0; k <= 3; ++k) {
        if (rng.bernoulli(0.5)) continue;
        const int m = 1 + static_cast<int>(rng.integer(3));
        parts.push_back({Irrep::rotation(k), m});
        expected += m * Irrep::rotation(k).dim;
      }
      if (parts.empty()) continue;
      CHECK(RepSpec::make(parts, GroupSpec::so2()).total_dim == expected);
    }
  }
  SECTION("validation failures") {
    CHECK_THROWS_AS(RepSpec::make({{Irrep::rotation(1), 1}, {Irrep::rotation(1), 2}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(RepSpec::make({{Irrep::rotation(4), 1}}, GroupSpec::cyclic(8)),
                    std::invalid_argument);
    Matrix not_orth = Matrix::Identity(2, 2) * 2.0;
    CHECK_THROWS_AS(RepSpec::make({{Irrep::rotation(1), 1}}, GroupSpec::so2(), not_orth),
                    std::invalid_argument);
  }
}

TEST_CASE("schur block forms") {
  SECTION("real block") {
    SchurBlock b{Irrep{"r", 0, 3, FieldType::Real, 1}, Vector::Constant(1, 2.0)};
    CHECK(matrix_close(schur_block_matrix(b), 2.0 * Matrix::Identity(3, 3)));
  }
  SECTION("complex block") {
    Vector p(2);
    p << 0, 1;
    SchurBlock b{Irrep::rotation(1), p};
    Matrix expected(2, 2);
    expected << 0, -1, 1, 0;
    CHECK(matrix_close(schur_block_matrix(b), expected));
  }
  SECTION("quaternionic identity block") {
    Vector p(4);
    p << 1, 0, 0, 0;
    SchurBlock b{Irrep{"q", 0, 4, FieldType::Quaternionic, 4}, p};
    CHECK(matrix_close(schur_block_matrix(b), Matrix::Identity(4, 4)));
  }
  SECTION("columns are orthogonal and carry every free parameter once") {
    Rng rng(3);
    for (auto [type, dim] : {std::pair{FieldType::Real, 3}, std::pair{FieldType::Complex, 4},
                             std::pair{FieldType::Quaternionic, 8}}) {
      Irrep ir{"x", 0, dim, type, field_param_count(type)};
      Vector p = rng.gaussian_matrix(ir.c, 1).col(0);
      const Matrix w = schur_block_matrix(SchurBlock{ir, p});
      const Matrix gram = w.transpose() * w;
      CHECK(matrix_close(gram, p.squaredNorm() * Matrix::Identity(dim, dim), 1e-12));
      // hence ||W||_F = sqrt(dim) * ||params||
      CHECK(w.norm() == Catch::Approx(std::sqrt(double(dim)) * p.norm()).margin(1e-12));
    }
  }
  SECTION("param count is enforced") {
    SchurBlock b{Irrep::rotation(1), Vector::Zero(1)};
    CHECK_THROWS_AS(schur_block_matrix(b), std::invalid_argument);
  }
}

TEST_CASE("assembled equivariant weights") {
  const auto g = GroupSpec::cyclic(8);
  const auto rep2 = RepSpec::make({{Irrep::rotation(1), 1}}, g);

  SECTION("all parameters zero gives the zero matrix") {
    auto s = EquivariantWeightStructure::make(rep2, rep2);
    CHECK(assemble_weight(s).isZero(0.0));
  }
  SECTION("unit (a,b)=(1,0) block is the identity") {
    auto s = EquivariantWeightStructure::make(rep2, rep2);
    Vector p(2);
    p << 1, 0;
    s.set_params(p);
    CHECK(matrix_close(assemble_weight(s), Matrix::Identity(2, 2)));
  }
  SECTION("(a,b)=(0,1) commutes with every rotation") {
    auto s = EquivariantWeightStructure::make(rep2, rep2);
    Vector p(2);
    p << 0, 1;
    s.set_params(p);
    const Matrix w = assemble_weight(s);
    for (double theta : {0.4, 1.9, 4.4}) {
      const Matrix r = irrep_matrix(Irrep::rotation(1), theta);
      CHECK((w * r - r * w).norm() <= 1e-13);
    }
  }
  SECTION("random mixed structures are exactly equivariant over C_8") {
    Rng rng(17);
    const auto angles = g.element_angles();
    for (int trial = 0; trial < 20; ++trial) {
      auto rep_in = RepSpec::make({{Irrep::rotation(0), 2}, {Irrep::rotation(1), 2}, {Irrep::rotation(3), 1}}, g);
      auto rep_out = RepSpec::make({{Irrep::rotation(0), 1}, {Irrep::rotation(1), 3}, {Irrep::rotation(2), 1}}, g);
      auto s = EquivariantWeightStructure::make(rep_in, rep_out);
      s.set_params(rng.gaussian_matrix(s.free_param_count(), 1).col(0));
      const Matrix w = assemble_weight(s);
      CHECK(equivariance_residual(w, rep_in, rep_out, angles) <= 1e-10);
    }
  }
  SECTION("norm transport through orthogonal bases") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
      auto rep_in = RepSpec::make({{Irrep::rotation(0), 1}, {Irrep::rotation(1), 2}},
                                  GroupSpec::so2(), random_orthogonal(5, rng));
      auto rep_out = RepSpec::make({{Irrep::rotation(1), 1}, {Irrep::rotation(2), 1}},
                                   GroupSpec::so2(), random_orthogonal(4, rng));
      auto s = EquivariantWeightStructure::make(rep_in, rep_out);
      s.set_params(rng.gaussian_matrix(s.free_param_count(), 1).col(0));
      CHECK(assemble_weight(s).norm() ==
            Catch::Approx(assemble_aligned(s).norm()).margin(1e-12));
    }
  }
}

TEST_CASE("equivariance residual") {
  const auto rep = freq1_rep();
  SECTION("identity weight between identical reps") {
    CHECK(equivariance_residual(Matrix::Identity(2, 2), rep, rep, {0.3, 1.1}) <= 1e-15);
  }
  SECTION("shear against a quarter turn") {
    Matrix w(2, 2);
    w << 1, 1, 0, 1;
    // commutator works out to [[1,0],[0,-1]], Frobenius norm sqrt(2)
    CHECK(equivariance_residual(w, rep, rep, {kTwoPi / 4}) ==
          Catch::Approx(std::sqrt(2.0)).margin(1e-14));
  }
  SECTION("empty element list is rejected") {
    CHECK_THROWS_AS(equivariance_residual(Matrix::Identity(2, 2), rep, rep, {}),
                    std::invalid_argument);
  }
}

TEST_CASE("projection onto the commutant") {
  const auto g = GroupSpec::cyclic(12);
  const auto rep = RepSpec::make({{Irrep::rotation(1), 1}}, g);

  SECTION("equivariant inputs are fixed points") {
    auto s = EquivariantWeightStructure::make(rep, rep);
    Vector p(2);
    p << 0.7, -0.4;
    s.set_params(p);
    const Matrix w = assemble_weight(s);
    CHECK(matrix_close(project_to_commutant(w, rep, rep), w, 1e-12));
  }
  SECTION("general 2x2 matrix projects onto span{I, J}") {
    Matrix w(2, 2);
    w << 1.2, -0.3, 2.5, 0.9;
    const double a = w(0, 0), b = w(0, 1), c = w(1, 0), d = w(1, 1);
    Matrix expected(2, 2);
    expected << (a + d) / 2, (b - c) / 2, (c - b) / 2, (a + d) / 2;
    CHECK(matrix_close(project_to_commutant(w, rep, rep), expected, 1e-12));
  }
  SECTION("no shared irreps projects to zero") {
    const auto rep2 = RepSpec::make({{Irrep::rotation(2), 1}}, g);
    Matrix w(2, 2);
    w << 1, 2, 3, 4;
    CHECK(project_to_commutant(w, rep, rep2).cwiseAbs().maxCoeff() <= 1e-13);
  }
  SECTION("projection is idempotent") {
    Rng rng(29);
    const auto rep_in = RepSpec::make({{Irrep::rotation(0), 1}, {Irrep::rotation(1), 2}}, g);
    const auto rep_out = RepSpec::make({{Irrep::rotation(1), 1}, {Irrep::rotation(2), 1}}, g);
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix w = rng.gaussian_matrix(rep_out.total_dim, rep_in.total_dim);
      const Matrix p1 = project_to_commutant(w, rep_in, rep_out);
      const Matrix p2 = project_to_commutant(p1, rep_in, rep_out);
      CHECK(matrix_close(p1, p2, 1e-10));
    }
  }
  SECTION("so2 grid average matches the cyclic projection") {
    const auto rs = RepSpec::make({{Irrep::rotation(1), 1}}, GroupSpec::so2());
    Matrix w(2, 2);
    w << 0.3, 0.8, -0.1, 0.5;
    Matrix expected(2, 2);
    expected << 0.4, 0.45, -0.45, 0.4;
    CHECK(matrix_close(project_to_commutant(w, rs, rs), expected, 1e-10));
  }
}

TEST_CASE("free parameter and structure counts") {
  const auto g = GroupSpec::cyclic(8);
  SECTION("one complex irrep with unit multiplicities") {
    auto s = EquivariantWeightStructure::make(freq1_rep(g), freq1_rep(g));
    auto [params, d] = count_free_params(s);
    CHECK(params == 2);
    CHECK(d == 4);
  }
  SECTION("real irrep with multiplicities 3 and 2") {
    auto rin = RepSpec::make({{Irrep::rotation(0), 2}}, g);
    auto rout = RepSpec::make({{Irrep::rotation(0), 3}}, g);
    auto [params, d] = count_free_params(EquivariantWeightStructure::make(rin, rout));
    CHECK(params == 6);
    CHECK(d == 6);
  }
  SECTION("no shared irreps") {
    auto rin = RepSpec::make({{Irrep::rotation(1), 2}}, g);
    auto rout = RepSpec::make({{Irrep::rotation(2), 2}}, g);
    auto [params, d] = count_free_params(EquivariantWeightStructure::make(rin, rout));
    CHECK(params == 0);
    CHECK(d == 0);
  }
  SECTION("D never exceeds the ambient parameter count") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::pair<Irrep, int>> pin, pout;
      for (int k = 0; k <= 3; ++k) {
        if (rng.bernoulli(0.4)) pin.push_back({Irrep::rotation(k), 1 + int(rng.integer(3))});
        if (rng.bernoulli(0.4)) pout.push_back({Irrep::rotation(k), 1 + int(rng.integer(3))});
      }
      if (pin.empty() || pout.empty()) continue;
      auto s = EquivariantWeightStructure::make(RepSpec::make(pin, g), RepSpec::make(pout, g));
      CHECK(s.structure_dim() <=
            static_cast<long long>(s.rep_out.total_dim) * s.rep_in.total_dim);
    }
  }
}

TEST_CASE("commutant rank equals the free parameter count") {
  const auto g = GroupSpec::cyclic(8);
  Rng rng(37);
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<std::pair<Irrep, int>> pin, pout;
    for (int k = 0; k <= 3; ++k) {
      if (rng.bernoulli(0.6)) pin.push_back({Irrep::rotation(k), 1 + int(rng.integer(2))});
      if (rng.bernoulli(0.6)) pout.push_back({Irrep::rotation(k), 1 + int(rng.integer(2))});
    }
    if (pin.empty()) pin.push_back({Irrep::rotation(0), 1});
    if (pout.empty()) pout.push_back({Irrep::rotation(1), 1});
    const auto rin = RepSpec::make(pin, g);
    const auto rout = RepSpec::make(pout, g);
    const auto s = EquivariantWeightStructure::make(rin, rout);
    CHECK(commutant_rank(rin, rout) == s.free_param_count());
  }
}

TEST_CASE("parameter round trip and gradient transport") {
  const auto g = GroupSpec::so2();
  Rng rng(43);
  auto rin = RepSpec::make({{Irrep::rotation(0), 2}, {Irrep::rotation(1), 1}}, g,
                           random_orthogonal(4, rng));
  auto rout = RepSpec::make({{Irrep::rotation(0), 1}, {Irrep::rotation(1), 2}}, g,
                            random_orthogonal(5, rng));
  auto s = EquivariantWeightStructure::make(rin, rout);
  const Vector p = rng.gaussian_matrix(s.free_param_count(), 1).col(0);
  s.set_params(p);
  CHECK((s.get_params() - p).cwiseAbs().maxCoeff() == 0.0);

  // directional derivative of <G, W(theta)> matches the transported gradient
  const Matrix ambient = rng.gaussian_matrix(rout.total_dim, rin.total_dim);
  const Vector grad = weight_gradient_to_params(s, ambient);
  const Vector dir = rng.gaussian_matrix(s.free_param_count(), 1).col(0);
  auto value_at = [&](double t) {
    auto st = s;
    st.set_params(p + t * dir);
    return (ambient.array() * assemble_weight(st).array()).sum();
  };
  const double h = 1e-6;
  const double fd = (value_at(h) - value_at(-h)) / (2 * h);
  CHECK(fd == Catch::Approx(grad.dot(dir)).epsilon(1e-7));
}
