#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "equibound/common.hpp"
#include "equibound/group_repr.hpp"

namespace equibound::net {

// ---------------------------------------------------------------------------
// Feed-forward networks with per-layer dense or Schur-block-constrained
// weights. Activations are pointwise, 1-Lipschitz, and fix zero, so layer
// composition keeps the usual norm chain ||F(X)||_F <= ||X||_F prod c_l s_l.
// ---------------------------------------------------------------------------

enum class ActivationKind { ReLU, Identity, LeakyReLU };

struct Activation {
  ActivationKind kind = ActivationKind::ReLU;
  double alpha = 0.01;  // LeakyReLU slope

  double lipschitz() const {
    if (kind == ActivationKind::LeakyReLU) return std::max(1.0, std::abs(alpha));
    return 1.0;
  }
  double apply(double x) const {
    switch (kind) {
      case ActivationKind::ReLU: return x > 0 ? x : 0.0;
      case ActivationKind::Identity: return x;
      case ActivationKind::LeakyReLU: return x > 0 ? x : alpha * x;
    }
    return x;
  }
  double derivative(double x) const {
    switch (kind) {
      case ActivationKind::ReLU: return x > 0 ? 1.0 : 0.0;
      case ActivationKind::Identity: return 1.0;
      case ActivationKind::LeakyReLU: return x > 0 ? 1.0 : alpha;
    }
    return 1.0;
  }
  Matrix apply(const Matrix& m) const {
    if (kind == ActivationKind::Identity) return m;
    return m.unaryExpr([this](double x) { return apply(x); });
  }
  Matrix derivative(const Matrix& m) const {
    if (kind == ActivationKind::Identity) return Matrix::Ones(m.rows(), m.cols());
    return m.unaryExpr([this](double x) { return derivative(x); });
  }
};

struct LayerSpec {
  int in_dim = 0, out_dim = 0;
  Activation activation;
  std::optional<repr::EquivariantWeightStructure> structure;  // set => equivariant
  std::optional<double> spectral_cap;

  bool equivariant() const { return structure.has_value(); }
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  int output_classes = 2;

  void validate() const {
    if (layers.empty()) fail("network needs at least one layer");
    if (output_classes < 2) fail("output_classes must be >= 2");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      if (layer.in_dim < 1 || layer.out_dim < 1)
        fail("layer " + std::to_string(l) + ": dimensions must be positive");
      if (l > 0 && layers[l - 1].out_dim != layer.in_dim)
        fail("layer " + std::to_string(l) + ": input dim " + std::to_string(layer.in_dim) +
             " does not chain from previous output " + std::to_string(layers[l - 1].out_dim));
      if (layer.structure) {
        if (layer.structure->rep_in.total_dim != layer.in_dim ||
            layer.structure->rep_out.total_dim != layer.out_dim)
          fail("layer " + std::to_string(l) + ": representation dims do not match layer dims");
      }
      if (layer.spectral_cap && *layer.spectral_cap <= 0)
        fail("layer " + std::to_string(l) + ": spectral cap must be positive");
    }
    if (layers.back().out_dim != output_classes)
      fail("final layer width must equal output_classes");
  }

  std::vector<int> layer_dims() const {
    std::vector<int> dims{layers.front().in_dim};
    for (const auto& l : layers) dims.push_back(l.out_dim);
    return dims;
  }
};

struct LayerParams {
  Matrix weight;        // dense layers
  Vector block_params;  // equivariant layers
};

struct NetworkParams {
  std::vector<LayerParams> layers;
};

/// Entrywise (dense) or per-free-parameter (equivariant) uniform
/// initialization on [-1/sqrt(d_in), 1/sqrt(d_in)].
inline NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkParams params;
  params.layers.resize(spec.layers.size());
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& layer = spec.layers[l];
    Rng rng(derive_seed(seed, "init-layer-" + std::to_string(l)));
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
    if (layer.equivariant()) {
      Vector p(layer.structure->free_param_count());
      for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = rng.uniform(-bound, bound);
      params.layers[l].block_params = std::move(p);
    } else {
      Matrix w(layer.out_dim, layer.in_dim);
      for (int i = 0; i < layer.out_dim; ++i)
        for (int j = 0; j < layer.in_dim; ++j) w(i, j) = rng.uniform(-bound, bound);
      params.layers[l].weight = std::move(w);
    }
  }
  return params;
}

inline Matrix materialize(const NetworkSpec& spec, const NetworkParams& params,
                          std::size_t l) {
  const auto& layer = spec.layers.at(l);
  const auto& lp = params.layers.at(l);
  if (layer.equivariant()) {
    auto s = *layer.structure;
    s.set_params(lp.block_params);
    return repr::assemble_weight(s);
  }
  if (lp.weight.rows() != layer.out_dim || lp.weight.cols() != layer.in_dim)
    fail("layer " + std::to_string(l) + ": weight shape mismatch");
  return lp.weight;
}

struct ForwardCache {
  std::vector<Matrix> weights;  // materialized W_l
  std::vector<Matrix> pre;      // W_l z_{l-1}
  std::vector<Matrix> post;     // sigma_l(pre), post[0] aliases the input
};

inline Matrix forward_cached(const NetworkSpec& spec, const NetworkParams& params,
                             const Matrix& x, ForwardCache& cache) {
  spec.validate();
  if (x.rows() != spec.layers.front().in_dim)
    fail("forward: input has " + std::to_string(x.rows()) + " rows, expected " +
         std::to_string(spec.layers.front().in_dim));
  if (!x.allFinite()) fail("forward: non-finite input");
  cache.weights.clear();
  cache.pre.clear();
  cache.post.assign(1, x);
  Matrix z = x;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const Matrix w = materialize(spec, params, l);
    Matrix a = w * z;
    if (!a.allFinite())
      throw std::runtime_error("forward: non-finite intermediate at layer " + std::to_string(l));
    z = spec.layers[l].activation.apply(a);
    cache.weights.push_back(w);
    cache.pre.push_back(std::move(a));
    cache.post.push_back(z);
  }
  return z;
}

inline Matrix forward(const NetworkSpec& spec, const NetworkParams& params, const Matrix& x) {
  ForwardCache cache;
  return forward_cached(spec, params, x, cache);
}

// ---------------------------------------------------------------------------
// Margin machinery.
// ---------------------------------------------------------------------------

/// f(x)_y - max_{i != y} f(x)_i.
inline double margin(const Vector& scores, int y) {
  if (scores.size() < 2) fail("margin: needs at least two classes");
  if (y < 0 || y >= scores.size()) fail("margin: label out of range");
  double best_other = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (i != y) best_other = std::max(best_other, scores(i));
  return scores(y) - best_other;
}

/// 1 below 0, linear on (0, gamma), 0 above gamma; 1/gamma-Lipschitz.
inline double ramp_loss(double t, double gamma) {
  if (gamma <= 0) fail("ramp_loss: gamma must be positive");
  if (t <= 0) return 1.0;
  if (t >= gamma) return 0.0;
  return 1.0 - t / gamma;
}

inline int argmax_class(const Vector& scores) {
  int best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores(i) > scores(best)) best = static_cast<int>(i);  // ties keep smallest index
  return best;
}

struct EvalMetrics {
  double margin_risk = 0.0;
  double zero_one_error = 0.0;
};

inline EvalMetrics eval_scores(const Matrix& scores, const std::vector<int>& labels,
                               double gamma) {
  if (scores.cols() == 0) fail("empirical margin risk: empty dataset");
  if (static_cast<std::size_t>(scores.cols()) != labels.size())
    fail("empirical margin risk: label count mismatch");
  double risk = 0.0, err = 0.0;
  for (Eigen::Index i = 0; i < scores.cols(); ++i) {
    const Vector col = scores.col(i);
    risk += ramp_loss(margin(col, labels[static_cast<std::size_t>(i)]), gamma);
    if (argmax_class(col) != labels[static_cast<std::size_t>(i)]) err += 1.0;
  }
  risk /= static_cast<double>(scores.cols());
  err /= static_cast<double>(scores.cols());
  if (err > risk + 1e-12)
    throw std::logic_error("0-1 error exceeded the margin risk; ramp loss is broken");
  return EvalMetrics{risk, err};
}

inline EvalMetrics empirical_margin_risk(const NetworkSpec& spec, const NetworkParams& params,
                                         const Dataset& data, double gamma) {
  return eval_scores(forward(spec, params, data.X), data.labels, gamma);
}

// ---------------------------------------------------------------------------
// Gradients and training.
// ---------------------------------------------------------------------------

enum class Surrogate { CrossEntropy, Ramp };

/// Backpropagates an output-score gradient dL/dF through the cached forward
/// pass. Equivariant layers receive the chain rule through assemble_weight,
/// so their gradient lives in block-parameter space.
inline NetworkParams backward_from_output_grad(const NetworkSpec& spec,
                                               const ForwardCache& cache,
                                               const Matrix& output_grad) {
  NetworkParams grad;
  grad.layers.resize(spec.layers.size());
  const auto layer_count = spec.layers.size();
  Matrix g = output_grad.cwiseProduct(
      spec.layers[layer_count - 1].activation.derivative(cache.pre[layer_count - 1]));
  for (std::size_t l = layer_count; l-- > 0;) {
    const Matrix dw = g * cache.post[l].transpose();
    if (spec.layers[l].equivariant())
      grad.layers[l].block_params =
          repr::weight_gradient_to_params(*spec.layers[l].structure, dw);
    else
      grad.layers[l].weight = dw;
    if (l > 0)
      g = (cache.weights[l].transpose() * g)
              .cwiseProduct(spec.layers[l - 1].activation.derivative(cache.pre[l - 1]));
  }
  return grad;
}

struct GradientResult {
  NetworkParams grad;
  double loss = 0.0;
};

inline GradientResult loss_gradient(const NetworkSpec& spec, const NetworkParams& params,
                                    const Dataset& batch, Surrogate surrogate,
                                    double gamma = 1.0) {
  if (batch.n() == 0) fail("loss_gradient: empty batch");
  ForwardCache cache;
  const Matrix scores = forward_cached(spec, params, batch.X, cache);
  const int k = spec.output_classes;
  const double n = static_cast<double>(batch.n());
  Matrix dscores = Matrix::Zero(k, batch.n());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < scores.cols(); ++i) {
    const int y = batch.labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) fail("loss_gradient: label out of range");
    if (surrogate == Surrogate::CrossEntropy) {
      const Vector col = scores.col(i);
      const double m = col.maxCoeff();
      Vector ex = (col.array() - m).exp();
      const double z = ex.sum();
      loss += -std::log(ex(y) / z);
      dscores.col(i) = (ex / z) / n;
      dscores(y, i) -= 1.0 / n;
    } else {
      const Vector col = scores.col(i);
      const double t = margin(col, y);
      loss += ramp_loss(t, gamma);
      if (t > 0 && t < gamma) {
        int runner_up = y == 0 ? 1 : 0;
        for (int j = 0; j < k; ++j)
          if (j != y && col(j) > col(runner_up)) runner_up = j;
        dscores(y, i) -= 1.0 / (gamma * n);
        dscores(runner_up, i) += 1.0 / (gamma * n);
      }
    }
  }
  loss /= n;
  if (!std::isfinite(loss)) throw std::runtime_error("loss_gradient: non-finite loss");
  return GradientResult{backward_from_output_grad(spec, cache, dscores), loss};
}

// ---------------------------------------------------------------------------
// Spectral norm via power iteration on W^T W.
// ---------------------------------------------------------------------------

struct SpectralNormResult {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
};

inline SpectralNormResult spectral_norm(const Matrix& w, double tol = 1e-12,
                                        int max_iter = 2000) {
  if (!w.allFinite()) fail("spectral_norm: non-finite matrix");
  if (w.size() == 0) return {0.0, true, 0};
  const double scale = w.cwiseAbs().maxCoeff();
  if (scale == 0.0) return {0.0, true, 0};
  Rng rng(0x5eedf00dULL);
  Vector v = rng.gaussian_matrix(static_cast<int>(w.cols()), 1).col(0);
  v.normalize();
  double sigma = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Vector u = w * v;
    const double s = u.norm();
    if (s == 0.0) {  // landed in the null space; restart deterministically
      v = rng.gaussian_matrix(static_cast<int>(w.cols()), 1).col(0);
      v.normalize();
      continue;
    }
    v = w.transpose() * u;
    v /= v.norm();
    if (std::abs(s - sigma) <= tol * std::max(1.0, s)) return {s, true, it};
    sigma = s;
  }
  return {sigma, false, max_iter};
}

/// Scales W down to spectral norm s when it exceeds the cap; commutes with
/// the group action, so equivariant weights stay equivariant.
inline Matrix project_spectral_cap(const Matrix& w, double s) {
  if (s <= 0) fail("project_spectral_cap: cap must be positive");
  const double sigma = spectral_norm(w).value;
  if (sigma <= s) return w;
  return w * (s / sigma);
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

enum class Optimizer { SGD, Adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;  // L2 added to the gradient
  int epochs = 200;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double gamma = 0.1;  // margin used for the recorded risks
  Surrogate surrogate = Surrogate::CrossEntropy;

  void validate() const {
    if (gamma <= 0) fail("gamma must be positive");
    if (epochs < 0) fail("epochs must be >= 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (learning_rate <= 0) fail("learning_rate must be positive");
    if (weight_decay < 0) fail("weight_decay must be >= 0");
  }
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_margin_risk = 0.0;
  double train_error = 0.0;
  double test_margin_risk = std::numeric_limits<double>::quiet_NaN();
  double test_error = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  NetworkParams params;
  std::vector<EpochMetrics> history;
};

namespace detail {

template <typename F>
void for_each_param_array(const NetworkSpec& spec, NetworkParams& p, F&& f) {
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    if (spec.layers[l].equivariant()) {
      auto& v = p.layers[l].block_params;
      f(l, v.data(), v.size());
    } else {
      auto& w = p.layers[l].weight;
      f(l, w.data(), w.size());
    }
  }
}

inline NetworkParams zeros_like(const NetworkSpec& spec) {
  NetworkParams z;
  z.layers.resize(spec.layers.size());
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    if (spec.layers[l].equivariant())
      z.layers[l].block_params = Vector::Zero(spec.layers[l].structure->free_param_count());
    else
      z.layers[l].weight = Matrix::Zero(spec.layers[l].out_dim, spec.layers[l].in_dim);
  }
  return z;
}

}  // namespace detail

inline TrainResult train(const NetworkSpec& spec, NetworkParams params,
                         const Dataset& train_data, const TrainConfig& cfg,
                         const Dataset* test_data = nullptr) {
  spec.validate();
  cfg.validate();
  if (train_data.n() == 0) fail("train: empty dataset");

  NetworkParams adam_m = detail::zeros_like(spec);
  NetworkParams adam_v = detail::zeros_like(spec);
  long long step = 0;

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  std::vector<int> order(static_cast<std::size_t>(train_data.n()));
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::vector<int> idx(order.begin() + static_cast<long>(start),
                                 order.begin() + static_cast<long>(stop));
      const Dataset batch = train_data.slice(idx);
      GradientResult g;
      try {
        g = loss_gradient(spec, params, batch, cfg.surrogate, cfg.gamma);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                 ": " + e.what());
      }
      loss_sum += g.loss * static_cast<double>(idx.size());
      ++step;

      detail::for_each_param_array(spec, params, [&](std::size_t l, double* theta,
                                                     Eigen::Index count) {
        const double* grad = spec.layers[l].equivariant()
                                 ? g.grad.layers[l].block_params.data()
                                 : g.grad.layers[l].weight.data();
        double* m = spec.layers[l].equivariant() ? adam_m.layers[l].block_params.data()
                                                 : adam_m.layers[l].weight.data();
        double* v = spec.layers[l].equivariant() ? adam_v.layers[l].block_params.data()
                                                 : adam_v.layers[l].weight.data();
        for (Eigen::Index i = 0; i < count; ++i) {
          const double gi = grad[i] + cfg.weight_decay * theta[i];
          if (cfg.optimizer == Optimizer::SGD) {
            theta[i] -= cfg.learning_rate * gi;
          } else {
            m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * gi * gi;
            const double mhat = m[i] / (1 - std::pow(cfg.beta1, static_cast<double>(step)));
            const double vhat = v[i] / (1 - std::pow(cfg.beta2, static_cast<double>(step)));
            theta[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
          }
        }
      });

      for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        if (!spec.layers[l].spectral_cap) continue;
        const double cap = *spec.layers[l].spectral_cap;
        const Matrix w = materialize(spec, params, l);
        const double sigma = spectral_norm(w).value;
        if (sigma > cap) {
          const double scale = cap / sigma;
          if (spec.layers[l].equivariant())
            params.layers[l].block_params *= scale;
          else
            params.layers[l].weight *= scale;
        }
      }
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(train_data.n());
    const auto train_eval = empirical_margin_risk(spec, params, train_data, cfg.gamma);
    em.train_margin_risk = train_eval.margin_risk;
    em.train_error = train_eval.zero_one_error;
    if (test_data) {
      const auto test_eval = empirical_margin_risk(spec, params, *test_data, cfg.gamma);
      em.test_margin_risk = test_eval.margin_risk;
      em.test_error = test_eval.zero_one_error;
    }
    result.history.push_back(em);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace equibound::net
