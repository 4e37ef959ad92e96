#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace equibound {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

[[noreturn]] inline void fail(const std::string& msg) { throw std::invalid_argument(msg); }

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Derives an independent sub-seed from a master seed and a purpose tag,
/// so that distinct random streams never alias.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
  for (char ch : purpose) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  return splitmix64(base ^ h);
}

/// Seeded random source. Distribution objects are constructed per call so a
/// stream's output depends only on the seed and the call sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double stddev) {
    return std::normal_distribution<double>(0.0, stddev)(engine_);
  }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
  std::uint64_t integer(std::uint64_t n) {  // in [0, n)
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

  Matrix gaussian_matrix(int rows, int cols, double stddev = 1.0) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = normal(stddev);
    return m;
  }

 private:
  std::mt19937_64 engine_;
};

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// R-diagonal sign fix).
inline Matrix random_orthogonal(int d, Rng& rng) {
  Matrix g = rng.gaussian_matrix(d, d);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

inline double frobenius(const Matrix& m) { return m.norm(); }

inline int matrix_rank(const Matrix& m, double rel_threshold = 1e-8,
                       double abs_threshold = 1e-10) {
  Eigen::BDCSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cutoff = std::max(abs_threshold, rel_threshold * sv(0));
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return rank;
}

inline double wrap_angle(double theta) {
  double w = theta - kTwoPi * std::floor(theta / kTwoPi);
  if (w >= kTwoPi) w -= kTwoPi;
  if (w < 0) w = 0;
  return w;
}

/// Labeled sample matrix: columns of `X` are points, `labels[i]` is the class
/// of column i.
struct Dataset {
  Matrix X;                 // feature_dim x n
  std::vector<int> labels;  // size n

  int n() const { return static_cast<int>(X.cols()); }
  int feature_dim() const { return static_cast<int>(X.rows()); }

  Dataset slice(const std::vector<int>& idx) const {
    Dataset out;
    out.X.resize(X.rows(), static_cast<Eigen::Index>(idx.size()));
    out.labels.resize(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out.X.col(static_cast<Eigen::Index>(j)) = X.col(idx[j]);
      out.labels[j] = labels[static_cast<std::size_t>(idx[j])];
    }
    return out;
  }
};

}  // namespace equibound
