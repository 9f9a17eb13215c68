#pragma once

#include <string>
#include <vector>

#include "socialpec/pec.hpp"
#include "socialpec/tape.hpp"

namespace socialpec {

// Trajectory encoder: pattern scores -> tanh -> max pool -> 1-D conv -> tanh.
struct EncoderConfig {
  std::size_t n_patterns = 100;
  std::size_t pattern_len = 2;
  std::size_t n_conv_kernels = 160;
  std::size_t conv_len = 2;
  std::size_t pool_stride = 2;

  static EncoderConfig context_default() { return {100, 2, 160, 2, 2}; }
  static EncoderConfig target_default() { return {50, 2, 80, 2, 2}; }

  void validate() const {
    if (n_patterns < 1 || pattern_len < 1 || n_conv_kernels < 1 || conv_len < 1 ||
        pool_stride < 1)
      throw ShapeError("encoder config: all fields must be >= 1");
  }
};

// Intermediate (channels, time) shapes: pattern scores, pooled, conv, output.
// Fails at configuration time instead of mid-training. The pool uses ceiling
// semantics, so a trailing partial window survives; that is what makes an
// 8-step history come out as length 3 after a length-2 valid conv.
inline std::vector<Shape> shape_plan(const EncoderConfig& cfg, std::size_t t_h) {
  cfg.validate();
  if (t_h < cfg.pattern_len)
    throw ShapeError("encoder: history length " + std::to_string(t_h) +
                     " shorter than pattern length " +
                     std::to_string(cfg.pattern_len));
  const std::size_t scores_len = t_h - cfg.pattern_len + 1;
  const std::size_t pooled_len = (scores_len + cfg.pool_stride - 1) / cfg.pool_stride;
  if (pooled_len < cfg.conv_len)
    throw ShapeError("encoder: pooled length " + std::to_string(pooled_len) +
                     " shorter than conv kernel length " +
                     std::to_string(cfg.conv_len));
  const std::size_t out_len = pooled_len - cfg.conv_len + 1;
  return {Shape{cfg.n_patterns, scores_len}, Shape{cfg.n_patterns, pooled_len},
          Shape{cfg.n_conv_kernels, out_len}, Shape{cfg.n_conv_kernels, out_len}};
}

inline Shape embedding_shape(const EncoderConfig& cfg, std::size_t t_h) {
  return shape_plan(cfg, t_h).back();
}

// Parameter leaves of one encoder, bound to a tape once per forward pass.
struct EncoderParams {
  Var patterns;  // (N, L, 2)
  Var lambda;    // (N)
  Var bias;      // (N)
  Var conv_w;    // (C_out, N, conv_len)
  Var conv_b;    // (C_out)

  static EncoderParams bind(Tape& tape, ParamStore& store, const std::string& prefix) {
    return {tape.param(store, prefix + ".pec.P"),
            tape.param(store, prefix + ".pec.lambda"),
            tape.param(store, prefix + ".pec.b"),
            tape.param(store, prefix + ".conv.w"),
            tape.param(store, prefix + ".conv.b")};
  }
};

inline void init_encoder_params(ParamStore& store, const std::string& prefix,
                                const EncoderConfig& cfg, RandomSource& rng,
                                PatternInit scheme = PatternInit::kRadial) {
  cfg.validate();
  MotionPatternBank bank = init_bank(cfg.n_patterns, cfg.pattern_len, rng, scheme);
  register_bank(store, prefix + ".pec", bank);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.n_patterns * cfg.conv_len));
  Tensor w(Shape{cfg.n_conv_kernels, cfg.n_patterns, cfg.conv_len});
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
  store.add(prefix + ".conv.w", std::move(w));
  store.add(prefix + ".conv.b", Tensor(Shape{cfg.n_conv_kernels}, 0.0));
}

// Valid (no padding), unit-stride 1-D convolution over the time axis,
// expressed as one matmul per kernel offset.
inline Var conv1d_valid(Var x, Var w, Var b) {
  const Shape sx = x.shape(), sw = w.shape();
  if (sx.size() != 2 || sw.size() != 3 || sw[1] != sx[0])
    throw ShapeError("conv1d: input " + shape_str(sx) + " incompatible with kernels " +
                     shape_str(sw));
  const std::size_t c_in = sx[0], t_in = sx[1];
  const std::size_t c_out = sw[0], k_len = sw[2];
  if (t_in < k_len)
    throw ShapeError("conv1d: input length " + std::to_string(t_in) +
                     " shorter than kernel length " + std::to_string(k_len));
  const std::size_t t_out = t_in - k_len + 1;
  Var acc;
  for (std::size_t k = 0; k < k_len; ++k) {
    Var w_k = reshape(slice(w, 2, k, k + 1), {c_out, c_in});
    Var x_k = slice(x, 1, k, k + t_out);
    Var term = matmul(w_k, x_k);  // (C_out, T_out)
    acc = k == 0 ? term : add(acc, term);
  }
  return add(acc, reshape(b, {c_out, 1}));
}

// Full encoder on a (2, T_h) channel-major trajectory; returns the embedding
// omega of shape (n_conv_kernels, T_out). Differentiable end to end.
inline Var encode(Var input, const EncoderParams& params, const EncoderConfig& cfg) {
  const Shape si = input.shape();
  if (si.size() != 2 || si[0] != 2)
    throw ShapeError("encode: input must be (2, T_h), got " + shape_str(si));
  const auto plan = shape_plan(cfg, si[1]);  // validates lengths

  Var traj = transpose(input);  // (T_h, 2) time-major for the pattern scores
  Var scores = pec_scores_cm(traj, params.patterns, params.lambda, params.bias);
  Var activated = tanh(scores);
  Var pooled = maxpool1d(activated, cfg.pool_stride);
  Var conv = conv1d_valid(pooled, params.conv_w, params.conv_b);
  Var omega = tanh(conv);
  if (omega.shape() != plan.back())
    throw ShapeError("encode: produced " + shape_str(omega.shape()) +
                     ", planned " + shape_str(plan.back()));
  return omega;
}

}  // namespace socialpec
