#pragma once

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include "equibound/common.hpp"

namespace equibound::repr {

// ---------------------------------------------------------------------------
// Irreducible representations of the rotation groups C_N and SO(2).
//
// Every irrep is one of three field types; the type determines the number of
// free parameters c in an equivariant block between two copies of the irrep:
//   real type        c = 1   block = lambda * I
//   complex type     c = 2   block = [[a,-b],[b,a]] (x) I_{dim/2}
//   quaternionic     c = 4   block = 4x4 quaternion form (x) I_{dim/4}
// ---------------------------------------------------------------------------

enum class FieldType { Real, Complex, Quaternionic };

inline int field_param_count(FieldType t) {
  switch (t) {
    case FieldType::Real: return 1;
    case FieldType::Complex: return 2;
    case FieldType::Quaternionic: return 4;
  }
  fail("unknown field type");
}

inline const char* field_name(FieldType t) {
  switch (t) {
    case FieldType::Real: return "real";
    case FieldType::Complex: return "complex";
    case FieldType::Quaternionic: return "quaternionic";
  }
  return "?";
}

struct Irrep {
  std::string id;
  int frequency = 0;  // rotation harmonic
  int dim = 1;
  FieldType field_type = FieldType::Real;
  int c = 1;  // free parameters per equivariant block

  void validate() const {
    if (c != field_param_count(field_type))
      fail("irrep '" + id + "': c=" + std::to_string(c) + " does not match " +
           field_name(field_type) + " type");
    if (dim < 1 || dim % c != 0)
      fail("irrep '" + id + "': dim must be a positive multiple of c");
    if (frequency < 0) fail("irrep '" + id + "': frequency must be >= 0");
  }

  /// The rotation-group irrep of a given harmonic: frequency 0 is the
  /// 1-dimensional trivial (real) irrep, frequency k >= 1 the 2-dimensional
  /// complex-type rotation block.
  static Irrep rotation(int frequency) {
    if (frequency < 0) fail("rotation irrep frequency must be >= 0");
    if (frequency == 0) return Irrep{"rot0", 0, 1, FieldType::Real, 1};
    return Irrep{"rot" + std::to_string(frequency), frequency, 2, FieldType::Complex, 2};
  }
};

inline bool same_irrep(const Irrep& a, const Irrep& b) {
  return a.frequency == b.frequency && a.dim == b.dim && a.field_type == b.field_type;
}

struct GroupSpec {
  enum class Kind { Cyclic, SO2 };
  Kind kind = Kind::SO2;
  int order = 0;  // Cyclic only

  static GroupSpec cyclic(int n) {
    if (n < 1) fail("cyclic group order must be >= 1");
    return GroupSpec{Kind::Cyclic, n};
  }
  static GroupSpec so2() { return GroupSpec{Kind::SO2, 0}; }

  bool operator==(const GroupSpec& other) const = default;

  double angle_of(int element) const {
    if (kind != Kind::Cyclic) fail("element indices address cyclic groups only");
    if (element < 0 || element >= order)
      fail("cyclic element index " + std::to_string(element) + " out of range [0," +
           std::to_string(order) + ")");
    return kTwoPi * element / order;
  }

  /// For C_N the full element list; for SO(2) a uniform angle grid.
  std::vector<double> element_angles(int so2_grid = 360) const {
    int n = (kind == Kind::Cyclic) ? order : so2_grid;
    if (n < 1) fail("angle grid must be nonempty");
    std::vector<double> angles(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) angles[static_cast<std::size_t>(i)] = kTwoPi * i / n;
    return angles;
  }

  /// Rejects irreps this group cannot realize. Over C_N a frequency-k block
  /// is irreducible only when 2k < N (k = N/2 splits into sign characters,
  /// k > N/2 aliases N-k).
  void validate_irrep(const Irrep& ir) const {
    ir.validate();
    if (ir.field_type == FieldType::Quaternionic)
      fail("irrep '" + ir.id + "': rotation groups have no quaternionic irreps");
    if (ir.frequency == 0) {
      if (ir.dim != 1 || ir.field_type != FieldType::Real)
        fail("irrep '" + ir.id + "': frequency 0 requires (dim 1, real)");
    } else {
      if (ir.dim != 2 || ir.field_type != FieldType::Complex)
        fail("irrep '" + ir.id + "': frequency >= 1 requires (dim 2, complex)");
      if (kind == Kind::Cyclic && 2 * ir.frequency >= order)
        fail("irrep '" + ir.id + "': frequency " + std::to_string(ir.frequency) +
             " is not irreducible over C_" + std::to_string(order) +
             " (needs 2*frequency < order)");
    }
  }
};

inline Matrix irrep_matrix(const Irrep& ir, double theta) {
  ir.validate();
  if (ir.field_type == FieldType::Quaternionic)
    fail("irrep '" + ir.id + "': rotation groups have no quaternionic irreps");
  if (ir.frequency == 0) {
    if (ir.dim != 1 || ir.field_type != FieldType::Real)
      fail("irrep '" + ir.id + "': frequency 0 requires (dim 1, real)");
    return Matrix::Identity(1, 1);
  }
  if (ir.dim != 2 || ir.field_type != FieldType::Complex)
    fail("irrep '" + ir.id + "': frequency >= 1 requires (dim 2, complex)");
  const double a = ir.frequency * theta;
  Matrix m(2, 2);
  m << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return m;
}

inline Matrix irrep_matrix(const Irrep& ir, const GroupSpec& group, int element) {
  return irrep_matrix(ir, group.angle_of(element));
}

// ---------------------------------------------------------------------------
// RepSpec: a layer representation as an ordered list of (irrep, multiplicity)
// plus an orthogonal change of basis Q. In the aligned basis the rep is the
// block-diagonal direct sum; rho(g) = Q^T [direct sum] Q.
// ---------------------------------------------------------------------------

struct RepSpec {
  std::vector<std::pair<Irrep, int>> irreps;  // ascending frequency
  int total_dim = 0;
  Matrix basis_change;  // Q, orthogonal total_dim x total_dim
  std::optional<GroupSpec> group;
  bool identity_basis = true;

  static RepSpec make(std::vector<std::pair<Irrep, int>> parts,
                      std::optional<GroupSpec> group = std::nullopt,
                      Matrix q = Matrix()) {
    if (parts.empty()) fail("representation needs at least one irrep");
    RepSpec rep;
    std::stable_sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) {
      return a.first.frequency < b.first.frequency;
    });
    int dim = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& [ir, mult] = parts[i];
      if (group)
        group->validate_irrep(ir);
      else
        ir.validate();
      if (mult < 1) fail("irrep '" + ir.id + "': multiplicity must be >= 1");
      if (i > 0 && parts[i - 1].first.frequency == ir.frequency)
        fail("duplicate irrep frequency " + std::to_string(ir.frequency) +
             "; merge multiplicities instead");
      dim += mult * ir.dim;
    }
    rep.irreps = std::move(parts);
    rep.total_dim = dim;
    rep.group = group;
    if (q.size() == 0) {
      rep.basis_change = Matrix::Identity(dim, dim);
      rep.identity_basis = true;
    } else {
      if (q.rows() != dim || q.cols() != dim)
        fail("basis change must be " + std::to_string(dim) + "x" + std::to_string(dim));
      if (((q * q.transpose()) - Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff() > 1e-12)
        fail("basis change must be orthogonal (Q Q^T = I within 1e-12)");
      rep.basis_change = std::move(q);
      rep.identity_basis = rep.basis_change.isIdentity(0.0);
    }
    return rep;
  }

  struct Slot {
    const Irrep* irrep;
    int mult;
    int offset;  // first aligned-basis coordinate of this irrep's copies
  };
  std::vector<Slot> layout() const {
    std::vector<Slot> slots;
    slots.reserve(irreps.size());
    int off = 0;
    for (const auto& [ir, mult] : irreps) {
      slots.push_back(Slot{&ir, mult, off});
      off += mult * ir.dim;
    }
    return slots;
  }
};

/// rho(g) = Q^T [direct sum of irrep blocks] Q.
inline Matrix rep_matrix(const RepSpec& rep, double theta) {
  Matrix d = Matrix::Zero(rep.total_dim, rep.total_dim);
  int off = 0;
  for (const auto& [ir, mult] : rep.irreps) {
    const Matrix blk = irrep_matrix(ir, theta);
    for (int i = 0; i < mult; ++i) {
      d.block(off, off, ir.dim, ir.dim) = blk;
      off += ir.dim;
    }
  }
  if (rep.identity_basis) return d;
  return rep.basis_change.transpose() * d * rep.basis_change;
}

inline Matrix rep_matrix(const RepSpec& rep, int element) {
  if (!rep.group) fail("rep_matrix(element): representation has no group attached");
  return rep_matrix(rep, rep.group->angle_of(element));
}

// ---------------------------------------------------------------------------
// Schur blocks: the c-parameter matrix forms an equivariant map may take
// between two copies of one irrep.
// ---------------------------------------------------------------------------

/// The c pattern matrices P_1..P_c with block = sum_p params[p] * P_p.
/// Patterns are pairwise Frobenius-orthogonal with ||P_p||_F^2 = dim.
inline std::vector<Matrix> schur_basis(FieldType type, int dim) {
  const int c = field_param_count(type);
  if (dim < 1 || dim % c != 0) fail("schur basis: dim must be a positive multiple of c");
  const int reps = dim / c;
  auto expand = [&](const Matrix& cell) {  // cell (x) I_reps
    Matrix out = Matrix::Zero(dim, dim);
    for (int i = 0; i < cell.rows(); ++i)
      for (int j = 0; j < cell.cols(); ++j)
        if (cell(i, j) != 0.0)
          out.block(i * reps, j * reps, reps, reps) =
              cell(i, j) * Matrix::Identity(reps, reps);
    return out;
  };
  switch (type) {
    case FieldType::Real:
      return {Matrix::Identity(dim, dim)};
    case FieldType::Complex: {
      Matrix pa(2, 2), pb(2, 2);
      pa << 1, 0, 0, 1;
      pb << 0, -1, 1, 0;
      return {expand(pa), expand(pb)};
    }
    case FieldType::Quaternionic: {
      Matrix pa = Matrix::Identity(4, 4);
      Matrix pb = Matrix::Zero(4, 4), pc = Matrix::Zero(4, 4), pd = Matrix::Zero(4, 4);
      pb(0, 2) = -1; pb(1, 3) = -1; pb(2, 0) = 1; pb(3, 1) = 1;
      pc(0, 1) = -1; pc(1, 0) = 1; pc(2, 3) = 1; pc(3, 2) = -1;
      pd(0, 3) = -1; pd(1, 2) = 1; pd(2, 1) = -1; pd(3, 0) = 1;
      return {expand(pa), expand(pb), expand(pc), expand(pd)};
    }
  }
  fail("unknown field type");
}

struct SchurBlock {
  Irrep irrep;
  Vector params;  // length c
};

inline Matrix schur_block_matrix(const SchurBlock& block) {
  block.irrep.validate();
  if (block.params.size() != block.irrep.c)
    fail("schur block for '" + block.irrep.id + "': expected " +
         std::to_string(block.irrep.c) + " params, got " +
         std::to_string(block.params.size()));
  const auto basis = schur_basis(block.irrep.field_type, block.irrep.dim);
  Matrix m = Matrix::Zero(block.irrep.dim, block.irrep.dim);
  for (std::size_t p = 0; p < basis.size(); ++p)
    m += block.params(static_cast<Eigen::Index>(p)) * basis[p];
  return m;
}

// ---------------------------------------------------------------------------
// EquivariantWeightStructure: the free parameters of one equivariant weight
// matrix between two representations. Blocks exist only for irreps present
// in both reps; non-isomorphic pairs contribute zero.
// ---------------------------------------------------------------------------

struct EquivariantWeightStructure {
  RepSpec rep_in, rep_out;

  struct Grid {
    Irrep irrep;
    int m_out = 0, m_in = 0;
    int out_offset = 0, in_offset = 0;
    std::vector<SchurBlock> blocks;  // row-major, blocks[j * m_in + i]
  };
  std::vector<Grid> grids;

  static EquivariantWeightStructure make(RepSpec in, RepSpec out) {
    if (in.group.has_value() != out.group.has_value() ||
        (in.group && !(*in.group == *out.group)))
      fail("equivariant structure: input and output reps must share a group");
    EquivariantWeightStructure s;
    const auto in_slots = in.layout();
    const auto out_slots = out.layout();
    for (const auto& os : out_slots) {
      for (const auto& is : in_slots) {
        if (!same_irrep(*os.irrep, *is.irrep)) continue;
        Grid g;
        g.irrep = *os.irrep;
        g.m_out = os.mult;
        g.m_in = is.mult;
        g.out_offset = os.offset;
        g.in_offset = is.offset;
        g.blocks.reserve(static_cast<std::size_t>(g.m_out) * g.m_in);
        for (int j = 0; j < g.m_out; ++j)
          for (int i = 0; i < g.m_in; ++i)
            g.blocks.push_back(SchurBlock{g.irrep, Vector::Zero(g.irrep.c)});
        s.grids.push_back(std::move(g));
      }
    }
    s.rep_in = std::move(in);
    s.rep_out = std::move(out);
    return s;
  }

  int free_param_count() const {
    int total = 0;
    for (const auto& g : grids) total += g.irrep.c * g.m_out * g.m_in;
    return total;
  }

  /// D = sum_k c_k * m_out_k * m_in_k * dim_k.
  long long structure_dim() const {
    long long total = 0;
    for (const auto& g : grids)
      total += static_cast<long long>(g.irrep.c) * g.m_out * g.m_in * g.irrep.dim;
    return total;
  }

  Vector get_params() const {
    Vector flat(free_param_count());
    Eigen::Index pos = 0;
    for (const auto& g : grids)
      for (const auto& b : g.blocks) {
        flat.segment(pos, b.params.size()) = b.params;
        pos += b.params.size();
      }
    return flat;
  }

  void set_params(const Vector& flat) {
    if (flat.size() != free_param_count())
      fail("set_params: expected " + std::to_string(free_param_count()) +
           " values, got " + std::to_string(flat.size()));
    Eigen::Index pos = 0;
    for (auto& g : grids)
      for (auto& b : g.blocks) {
        b.params = flat.segment(pos, g.irrep.c);
        pos += g.irrep.c;
      }
  }
};

inline std::pair<long long, long long> count_free_params(
    const EquivariantWeightStructure& s) {
  return {static_cast<long long>(s.free_param_count()), s.structure_dim()};
}

/// The block-diagonal weight in the irrep-aligned bases of both reps.
inline Matrix assemble_aligned(const EquivariantWeightStructure& s) {
  Matrix w = Matrix::Zero(s.rep_out.total_dim, s.rep_in.total_dim);
  for (const auto& g : s.grids) {
    const int dim = g.irrep.dim;
    for (int j = 0; j < g.m_out; ++j)
      for (int i = 0; i < g.m_in; ++i)
        w.block(g.out_offset + j * dim, g.in_offset + i * dim, dim, dim) =
            schur_block_matrix(g.blocks[static_cast<std::size_t>(j) * g.m_in + i]);
  }
  return w;
}

/// W = Q_out^T [aligned blocks] Q_in; satisfies W rho_in(g) = rho_out(g) W.
inline Matrix assemble_weight(const EquivariantWeightStructure& s) {
  Matrix aligned = assemble_aligned(s);
  if (s.rep_out.identity_basis && s.rep_in.identity_basis) return aligned;
  return s.rep_out.basis_change.transpose() * aligned * s.rep_in.basis_change;
}

/// max_g ||W rho_in(g) - rho_out(g) W||_F over the given angles.
inline double equivariance_residual(const Matrix& w, const RepSpec& rep_in,
                                    const RepSpec& rep_out,
                                    const std::vector<double>& angles) {
  if (angles.empty()) fail("equivariance_residual: empty element list");
  if (w.rows() != rep_out.total_dim || w.cols() != rep_in.total_dim)
    fail("equivariance_residual: weight is " + std::to_string(w.rows()) + "x" +
         std::to_string(w.cols()) + ", reps are " + std::to_string(rep_out.total_dim) +
         "/" + std::to_string(rep_in.total_dim));
  double worst = 0.0;
  for (double theta : angles) {
    const Matrix lhs = w * rep_matrix(rep_in, theta);
    const Matrix rhs = rep_matrix(rep_out, theta) * w;
    worst = std::max(worst, (lhs - rhs).norm());
  }
  return worst;
}

/// Group-averaged projection onto the equivariant maps:
///   (1/|G|) sum_g rho_out(g)^-1 W rho_in(g),
/// exact over C_N, angle-grid average over SO(2). Orthogonal reps make the
/// inverse a transpose.
inline Matrix project_to_commutant(const Matrix& w, const RepSpec& rep_in,
                                   const RepSpec& rep_out, int so2_grid = 360) {
  if (!rep_in.group || !rep_out.group) fail("project_to_commutant: reps need a group");
  if (!(*rep_in.group == *rep_out.group))
    fail("project_to_commutant: reps belong to different groups");
  if (w.rows() != rep_out.total_dim || w.cols() != rep_in.total_dim)
    fail("project_to_commutant: shape mismatch");
  const auto angles = rep_in.group->element_angles(so2_grid);
  Matrix acc = Matrix::Zero(w.rows(), w.cols());
  for (double theta : angles)
    acc += rep_matrix(rep_out, theta).transpose() * w * rep_matrix(rep_in, theta);
  return acc / static_cast<double>(angles.size());
}

/// Chain rule through assemble_weight: maps an ambient gradient dL/dW to the
/// gradient with respect to the flat block parameters.
inline Vector weight_gradient_to_params(const EquivariantWeightStructure& s,
                                        const Matrix& ambient_grad) {
  if (ambient_grad.rows() != s.rep_out.total_dim ||
      ambient_grad.cols() != s.rep_in.total_dim)
    fail("weight_gradient_to_params: shape mismatch");
  Matrix aligned = ambient_grad;
  if (!s.rep_out.identity_basis || !s.rep_in.identity_basis)
    aligned = s.rep_out.basis_change * ambient_grad * s.rep_in.basis_change.transpose();
  Vector grad(s.free_param_count());
  Eigen::Index pos = 0;
  for (const auto& g : s.grids) {
    const int dim = g.irrep.dim;
    const auto basis = schur_basis(g.irrep.field_type, dim);
    for (int j = 0; j < g.m_out; ++j)
      for (int i = 0; i < g.m_in; ++i) {
        const Matrix sub = aligned.block(g.out_offset + j * dim, g.in_offset + i * dim, dim, dim);
        for (const auto& pat : basis) grad(pos++) = (sub.array() * pat.array()).sum();
      }
  }
  return grad;
}

/// Rank of the linear map W -> project_to_commutant(W), estimated by
/// projecting the full elementary-matrix basis. Equals the number of free
/// equivariant parameters between the two reps.
inline int commutant_rank(const RepSpec& rep_in, const RepSpec& rep_out,
                          int so2_grid = 360, double rel_threshold = 1e-8) {
  const int di = rep_in.total_dim, dout = rep_out.total_dim;
  Matrix stacked(dout * di, dout * di);
  int col = 0;
  for (int r = 0; r < dout; ++r)
    for (int c = 0; c < di; ++c) {
      Matrix e = Matrix::Zero(dout, di);
      e(r, c) = 1.0;
      const Matrix p = project_to_commutant(e, rep_in, rep_out, so2_grid);
      stacked.col(col++) = Eigen::Map<const Vector>(p.data(), p.size());
    }
  return matrix_rank(stacked, rel_threshold);
}

}  // namespace equibound::repr
