#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "socialpec/rng.hpp"
#include "socialpec/tape.hpp"

namespace socialpec {

// Guard inside the log: the raw score is log of a sum of L2 distances, which
// is -inf when a segment matches a pattern exactly.
inline constexpr double kPecEpsilon = 1e-8;

// Learnable pattern set of a PEC layer: N patterns of L waypoints in
// ego-frame meters, with per-pattern scale and bias.
struct MotionPatternBank {
  Tensor patterns;  // (N, L, 2)
  Tensor scale;     // (N)
  Tensor bias;      // (N)

  std::size_t n_patterns() const { return patterns.dim(0); }
  std::size_t pattern_len() const { return patterns.dim(1); }

  void validate() const {
    if (patterns.rank() != 3 || patterns.dim(2) != 2)
      throw ShapeError("pattern bank: patterns must be (N,L,2), got " +
                       shape_str(patterns.shape()));
    if (patterns.dim(0) < 1 || patterns.dim(1) < 1)
      throw ShapeError("pattern bank: N and L must be >= 1");
    if (scale.shape() != Shape{patterns.dim(0)} ||
        bias.shape() != Shape{patterns.dim(0)})
      throw ShapeError("pattern bank: scale/bias must be (N)");
    if (!patterns.all_finite() || !scale.all_finite() || !bias.all_finite())
      throw NumericError("pattern bank: non-finite parameters");
  }
};

enum class PatternInit {
  kRadial,      // straight segments starting on a 4 m disc around the origin
  kUniformBox,  // waypoints i.i.d. uniform in [-4,4]^2
};

inline PatternInit pattern_init_from_string(const std::string& s) {
  if (s == "radial") return PatternInit::kRadial;
  if (s == "uniform-box") return PatternInit::kUniformBox;
  throw DataError("unknown pattern init scheme '" + s + "'");
}

inline MotionPatternBank init_bank(std::size_t n, std::size_t l, RandomSource& rng,
                                   PatternInit scheme = PatternInit::kRadial) {
  if (n < 1 || l < 1) throw ShapeError("init_bank: N and L must be >= 1");
  MotionPatternBank bank;
  bank.patterns = Tensor(Shape{n, l, 2});
  // negative scale start: closer segments respond more strongly from step one
  bank.scale = Tensor(Shape{n}, -1.0);
  bank.bias = Tensor(Shape{n}, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (scheme == PatternInit::kRadial) {
      const double r = 4.0 * std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double dir = rng.uniform(0.0, 2.0 * M_PI);
      const double step = rng.uniform(0.1, 0.6);  // plausible stride per 0.4 s
      const double x0 = r * std::cos(phi), y0 = r * std::sin(phi);
      for (std::size_t k = 0; k < l; ++k) {
        bank.patterns.at({j, k, 0}) = x0 + static_cast<double>(k) * step * std::cos(dir);
        bank.patterns.at({j, k, 1}) = y0 + static_cast<double>(k) * step * std::sin(dir);
      }
    } else {
      for (std::size_t k = 0; k < l; ++k) {
        bank.patterns.at({j, k, 0}) = rng.uniform(-4.0, 4.0);
        bank.patterns.at({j, k, 1}) = rng.uniform(-4.0, 4.0);
      }
    }
  }
  return bank;
}

// Pattern-similarity scores in channel-major layout (N, T-L+1):
//   score[j,t] = scale[j] * log(eps + sum_k ||traj[t+k] - P[j,k]||) + bias[j].
// Built from tape primitives, so it is differentiable w.r.t. the trajectory
// and all bank parameters.
inline Var pec_scores_cm(Var traj, Var patterns, Var lambda, Var bias) {
  const Shape st = traj.shape(), sp = patterns.shape();
  if (st.size() != 2 || st[1] != 2)
    throw ShapeError("pec: trajectory must be (T,2), got " + shape_str(st));
  if (sp.size() != 3 || sp[2] != 2)
    throw ShapeError("pec: patterns must be (N,L,2), got " + shape_str(sp));
  const std::size_t t_h = st[0], n = sp[0], l = sp[1];
  if (t_h < l)
    throw ShapeError("pec: trajectory shorter than pattern length (T=" +
                     std::to_string(t_h) + ", L=" + std::to_string(l) + ")");
  const std::size_t t_out = t_h - l + 1;

  Var summed;  // (N, T_out) sum over k of segment-to-waypoint distances
  for (std::size_t k = 0; k < l; ++k) {
    Var p_k = reshape(slice(patterns, 1, k, k + 1), {n, 1, 2});
    Var x_k = reshape(slice(traj, 0, k, k + t_out), {1, t_out, 2});
    Var dist_k = l2norm(add(p_k, scale(x_k, -1.0)), 2);  // (N, T_out)
    summed = k == 0 ? dist_k : add(summed, dist_k);
  }
  Var logged = socialpec::log(add_scalar(summed, kPecEpsilon));
  Var scaled = mul(reshape(lambda, {n, 1}), logged);
  return add(scaled, reshape(bias, {n, 1}));
}

// The encoded trajectory psi with shape (T-L+1, N), matching the layout of
// the bank scores used everywhere downstream of the encoder.
inline Var pec_forward(Var traj, Var patterns, Var lambda, Var bias) {
  return transpose(pec_scores_cm(traj, patterns, lambda, bias));
}

// Value-level forward for callers that only need scores (plot coloring etc).
inline Tensor pec_encode(const Tensor& traj, const MotionPatternBank& bank) {
  bank.validate();
  Tape tape;
  Var out = pec_forward(tape.leaf(traj), tape.leaf(bank.patterns),
                        tape.leaf(bank.scale), tape.leaf(bank.bias));
  return out.value();
}

inline void register_bank(ParamStore& store, const std::string& prefix,
                          const MotionPatternBank& bank) {
  store.add(prefix + ".P", bank.patterns);
  store.add(prefix + ".lambda", bank.scale);
  store.add(prefix + ".b", bank.bias);
}

inline MotionPatternBank bank_from_store(const ParamStore& store,
                                         const std::string& prefix) {
  MotionPatternBank bank{store.value(prefix + ".P"), store.value(prefix + ".lambda"),
                         store.value(prefix + ".b")};
  bank.validate();
  return bank;
}

// CSV rows: pattern_id, step_index, x, y, lambda, bias.
inline void write_pattern_csv(std::ostream& os, const MotionPatternBank& bank) {
  bank.validate();
  os << "pattern_id,step_index,x,y,lambda,bias\n";
  os.precision(17);
  for (std::size_t j = 0; j < bank.n_patterns(); ++j)
    for (std::size_t k = 0; k < bank.pattern_len(); ++k)
      os << j << ',' << k << ',' << bank.patterns.at({j, k, 0}) << ','
         << bank.patterns.at({j, k, 1}) << ',' << bank.scale[j] << ','
         << bank.bias[j] << '\n';
}

}  // namespace socialpec
