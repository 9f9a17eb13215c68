#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "socialpec/rng.hpp"
#include "socialpec/tape.hpp"
#include "socialpec/trajectory.hpp"

namespace socialpec {

// Location extrapolator: an MLP over the flattened target and context
// embeddings, emitting the raw parameters of a bivariate Gaussian (K = 1) or
// a K-component Gaussian mixture over the one-step future location.
struct MlpConfig {
  std::vector<std::size_t> hidden{300, 120, 80};
  double leaky_slope = 0.01;

  // Raw output width: 5 for the first component (x,y,a,b,c), then 6 per
  // additional component (its block plus a mixture logit). The first
  // component's logit is pinned to 0, so K-1 logits are free.
  static std::size_t raw_dim(std::size_t k) {
    if (k < 1) throw ShapeError("mlp: mixture count must be >= 1");
    return 5 + 6 * (k - 1);
  }
};

struct MlpParams {
  std::vector<Var> weights;
  std::vector<Var> biases;

  static MlpParams bind(Tape& tape, ParamStore& store, const std::string& prefix,
                        std::size_t n_layers) {
    MlpParams p;
    for (std::size_t i = 1; i <= n_layers; ++i) {
      p.weights.push_back(tape.param(store, prefix + ".w" + std::to_string(i)));
      p.biases.push_back(tape.param(store, prefix + ".b" + std::to_string(i)));
    }
    return p;
  }
};

inline void init_mlp_params(ParamStore& store, const std::string& prefix,
                            std::size_t input_dim, const MlpConfig& cfg,
                            std::size_t output_dim, RandomSource& rng) {
  std::vector<std::size_t> widths;
  widths.push_back(input_dim);
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(output_dim);
  for (std::size_t i = 1; i < widths.size(); ++i) {
    const std::size_t fan_in = widths[i - 1], fan_out = widths[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w(Shape{fan_out, fan_in});
    for (std::size_t j = 0; j < w.numel(); ++j) w[j] = rng.uniform(-bound, bound);
    store.add(prefix + ".w" + std::to_string(i), std::move(w));
    store.add(prefix + ".b" + std::to_string(i), Tensor(Shape{fan_out, 1}, 0.0));
  }
}

// Column-vector MLP. Leaky ReLU after every hidden layer; the final layer is
// linear so the raw outputs span all reals.
inline Var mlp_forward(Var x, const MlpParams& params, double leaky_slope = 0.01) {
  if (params.weights.empty()) throw ShapeError("mlp: no layers bound");
  Var h = x;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    h = add(matmul(params.weights[i], h), params.biases[i]);
    if (i + 1 < params.weights.size()) h = leaky_relu(h, leaky_slope);
  }
  return h;
}

// One mixture component in ego-frame meters. exp(a), exp(b) from the raw
// block are standard deviations and tanh(c) is the correlation, so the
// covariance is positive definite for every finite raw vector.
struct GaussianComponent {
  double weight = 1.0;
  State mean;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double rho = 0.0;

  double cov_xx() const { return sigma_x * sigma_x; }
  double cov_xy() const { return rho * sigma_x * sigma_y; }
  double cov_yy() const { return sigma_y * sigma_y; }

  double log_density(const State& s) const {
    const double dx = (s.x - mean.x) / sigma_x;
    const double dy = (s.y - mean.y) / sigma_y;
    const double t = 1.0 - rho * rho;
    const double z = dx * dx - 2.0 * rho * dx * dy + dy * dy;
    return -std::log(2.0 * M_PI * sigma_x * sigma_y * std::sqrt(t)) - 0.5 * z / t;
  }

  State sample(RandomSource& rng) const {
    // Cholesky factor of [[sx^2, rho sx sy], [rho sx sy, sy^2]]
    const double z0 = rng.normal(), z1 = rng.normal();
    return State{mean.x + sigma_x * z0,
                 mean.y + sigma_y * (rho * z0 + std::sqrt(1.0 - rho * rho) * z1)};
  }
};

class LocationDistribution {
 public:
  explicit LocationDistribution(std::vector<GaussianComponent> components)
      : components_(std::move(components)) {
    if (components_.empty())
      throw ShapeError("location distribution: needs at least one component");
    double total = 0.0;
    for (const auto& c : components_) {
      if (!(c.weight > 0.0) || !is_finite(c.weight))
        throw NumericError("location distribution: weights must be positive");
      if (!(c.sigma_x > 0.0) || !(c.sigma_y > 0.0) || std::abs(c.rho) >= 1.0)
        throw NumericError("location distribution: covariance not positive definite");
      if (!is_finite(c.mean.x) || !is_finite(c.mean.y) || !is_finite(c.sigma_x) ||
          !is_finite(c.sigma_y))
        throw NumericError("location distribution: non-finite parameters");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw NumericError("location distribution: weights must sum to 1");
  }

  // Convenience for fixed-covariance stand-ins (tests, diagnostics).
  static LocationDistribution single(State mean, double cov_xx, double cov_xy,
                                     double cov_yy) {
    GaussianComponent c;
    c.mean = mean;
    c.sigma_x = std::sqrt(cov_xx);
    c.sigma_y = std::sqrt(cov_yy);
    c.rho = cov_xy / (c.sigma_x * c.sigma_y);
    return LocationDistribution({c});
  }

  std::size_t mixture_size() const { return components_.size(); }
  const std::vector<GaussianComponent>& components() const { return components_; }

  double log_density(const State& s) const {
    double max_term = -1e300;
    std::vector<double> terms;
    terms.reserve(components_.size());
    for (const auto& c : components_) {
      terms.push_back(std::log(c.weight) + c.log_density(s));
      max_term = std::max(max_term, terms.back());
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - max_term);
    return max_term + std::log(sum);
  }

  State sample(RandomSource& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& c : components_) {
      acc += c.weight;
      if (u < acc) return c.sample(rng);
    }
    return components_.back().sample(rng);
  }

 private:
  std::vector<GaussianComponent> components_;
};

// tanh rounds to exactly +-1.0 for |c| > ~19 in doubles; the clamp keeps the
// covariance strictly positive definite for every finite raw vector.
inline constexpr double kMaxCorrelation = 1.0 - 1e-12;

namespace detail {
inline GaussianComponent component_from_block(const double* block) {
  GaussianComponent c;
  c.mean = State{block[0], block[1]};
  c.sigma_x = std::exp(block[2]);
  c.sigma_y = std::exp(block[3]);
  c.rho = std::clamp(std::tanh(block[4]), -kMaxCorrelation, kMaxCorrelation);
  return c;
}
}  // namespace detail

inline LocationDistribution build_gaussian(const std::vector<double>& raw) {
  if (raw.size() != 5)
    throw ShapeError("build_gaussian: expected 5 raw values, got " +
                     std::to_string(raw.size()));
  return LocationDistribution({detail::component_from_block(raw.data())});
}

// Raw layout: [x1,y1,a1,b1,c1, x2,y2,a2,b2,c2,beta2, ..., xK,...,betaK].
// Weights are exp(beta)/sum with beta1 pinned to 0.
inline LocationDistribution build_gmm(const std::vector<double>& raw, std::size_t k) {
  if (raw.size() != MlpConfig::raw_dim(k))
    throw ShapeError("build_gmm: expected " + std::to_string(MlpConfig::raw_dim(k)) +
                     " raw values for K=" + std::to_string(k) + ", got " +
                     std::to_string(raw.size()));
  std::vector<GaussianComponent> comps;
  std::vector<double> betas{0.0};
  comps.push_back(detail::component_from_block(raw.data()));
  for (std::size_t i = 1; i < k; ++i) {
    const double* block = raw.data() + 5 + 6 * (i - 1);
    comps.push_back(detail::component_from_block(block));
    betas.push_back(block[5]);
  }
  double max_beta = 0.0;
  for (double b : betas) max_beta = std::max(max_beta, b);
  double denom = 0.0;
  for (double b : betas) denom += std::exp(b - max_beta);
  for (std::size_t i = 0; i < k; ++i)
    comps[i].weight = std::exp(betas[i] - max_beta) / denom;
  return LocationDistribution(std::move(comps));
}

// ---------------------------------------------------------------------------
// Tape-level negative log likelihood, for training. Mirrors the value-level
// construction above exactly (the unit tests pin the two routes together).

namespace detail {

// log N(target; block) for one raw component block (5,1); returns shape (1).
inline Var block_log_density(Var block, Var target) {
  Var mx = slice(block, 0, 0, 1), my = slice(block, 0, 1, 2);
  Var a = slice(block, 0, 2, 3), b = slice(block, 0, 3, 4), c = slice(block, 0, 4, 5);
  Var dx = sub(slice(target, 0, 0, 1), mx);
  Var dy = sub(slice(target, 0, 1, 2), my);
  Var rho = tanh(c);
  // the 1e-15 keeps log(1 - rho^2) finite when tanh saturates to +-1.0
  Var one_minus_r2 = add_scalar(scale(mul(rho, rho), -1.0), 1.0 + 1e-15);
  Var log_t = log(one_minus_r2);
  Var inv_t = exp(scale(log_t, -1.0));
  Var z = add(sub(mul(mul(dx, dx), exp(scale(a, -2.0))),
                  scale(mul(mul(rho, mul(dx, dy)), exp(scale(add(a, b), -1.0))), 2.0)),
              mul(mul(dy, dy), exp(scale(b, -2.0))));
  Var penalty = add(add(a, b), add(scale(log_t, 0.5), scale(mul(inv_t, z), 0.5)));
  return reshape(add_scalar(scale(penalty, -1.0), -std::log(2.0 * M_PI)), {1});
}

}  // namespace detail

// -log p(target) for a raw head output (raw_dim(k), 1) and an ego-frame
// target location (2,1). Differentiable w.r.t. the raw vector (and target).
inline Var head_nll(Var raw, Var target, std::size_t k) {
  if (raw.shape() != Shape{MlpConfig::raw_dim(k), 1})
    throw ShapeError("head_nll: raw shape " + shape_str(raw.shape()) +
                     " does not match K=" + std::to_string(k));
  if (target.shape() != Shape{2, 1})
    throw ShapeError("head_nll: target must be (2,1)");
  if (k == 1) {
    return scale(detail::block_log_density(raw, target), -1.0);
  }
  std::vector<Var> log_ns, betas;
  log_ns.push_back(detail::block_log_density(slice(raw, 0, 0, 5), target));
  betas.push_back(raw.tape->constant(0.0));
  for (std::size_t i = 1; i < k; ++i) {
    const std::size_t off = 5 + 6 * (i - 1);
    log_ns.push_back(detail::block_log_density(slice(raw, 0, off, off + 5), target));
    betas.push_back(reshape(slice(raw, 0, off + 5, off + 6), {1}));
  }
  Var beta_vec = concat(betas, 0);                     // (K)
  Var log_w = sub(beta_vec, logsumexp(beta_vec));      // (K)
  Var log_p = logsumexp(add(concat(log_ns, 0), log_w));  // (1)
  return scale(log_p, -1.0);
}

}  // namespace socialpec
