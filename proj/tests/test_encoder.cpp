#include <catch2/catch_amalgamated.hpp>

#include "socialpec/encoder.hpp"

#include "testutil.hpp"

using namespace socialpec;
using testutil::grad_check;
using testutil::rand_tensor;

namespace {

// All parameters of one encoder as loose tensors, for gradient checking.
std::vector<Tensor> random_encoder_tensors(const EncoderConfig& cfg, std::size_t t_h,
                                           RandomSource& rng) {
  return {rand_tensor({2, t_h}, rng, -3, 3),
          rand_tensor({cfg.n_patterns, cfg.pattern_len, 2}, rng, -3, 3),
          rand_tensor({cfg.n_patterns}, rng, -2, 2),
          rand_tensor({cfg.n_patterns}, rng),
          rand_tensor({cfg.n_conv_kernels, cfg.n_patterns, cfg.conv_len}, rng),
          rand_tensor({cfg.n_conv_kernels}, rng)};
}

Var encode_from_vars(const std::vector<Var>& v, const EncoderConfig& cfg) {
  EncoderParams p{v[1], v[2], v[3], v[4], v[5]};
  return encode(v[0], p, cfg);
}

}  // namespace

TEST_CASE("context encoder maps (2,8) to (160,3)", "[encoder]") {
  RandomSource rng(21);
  ParamStore store;
  const EncoderConfig cfg = EncoderConfig::context_default();
  init_encoder_params(store, "ctx", cfg, rng);

  Tape tape;
  auto params = EncoderParams::bind(tape, store, "ctx");
  Var omega = encode(tape.leaf(rand_tensor({2, 8}, rng, -4, 4)), params, cfg);
  REQUIRE(omega.shape() == Shape{160, 3});
}

TEST_CASE("target encoder maps (2,8) to (80,3)", "[encoder]") {
  RandomSource rng(22);
  ParamStore store;
  const EncoderConfig cfg = EncoderConfig::target_default();
  init_encoder_params(store, "tgt", cfg, rng);

  Tape tape;
  auto params = EncoderParams::bind(tape, store, "tgt");
  Var omega = encode(tape.leaf(rand_tensor({2, 8}, rng)), params, cfg);
  REQUIRE(omega.shape() == Shape{80, 3});
}

TEST_CASE("shape plan walks the context pipeline", "[encoder]") {
  const auto plan = shape_plan(EncoderConfig::context_default(), 8);
  REQUIRE(plan == std::vector<Shape>{{100, 7}, {100, 4}, {160, 3}, {160, 3}});
}

TEST_CASE("shape plan rejects histories shorter than the pattern", "[encoder]") {
  EncoderConfig cfg = EncoderConfig::context_default();
  cfg.pattern_len = 9;
  REQUIRE_THROWS_AS(shape_plan(cfg, 8), ShapeError);
}

TEST_CASE("pool stride 1 keeps the score length", "[encoder]") {
  EncoderConfig cfg{10, 2, 4, 2, 1};
  const auto plan = shape_plan(cfg, 8);
  REQUIRE(plan[1] == Shape{10, 7});
  REQUIRE(plan[2] == Shape{4, 6});
}

TEST_CASE("all-zero parameters give an all-zero embedding", "[encoder]") {
  const EncoderConfig cfg{5, 2, 6, 2, 2};
  Tape tape;
  EncoderParams p{tape.leaf(Tensor(Shape{5, 2, 2})), tape.leaf(Tensor(Shape{5})),
                  tape.leaf(Tensor(Shape{5})), tape.leaf(Tensor(Shape{6, 5, 2})),
                  tape.leaf(Tensor(Shape{6}))};
  RandomSource rng(23);
  Var omega = encode(tape.leaf(rand_tensor({2, 8}, rng)), p, cfg);
  for (double v : omega.value().vec()) REQUIRE(v == 0.0);
}

TEST_CASE("embedding entries stay inside the tanh range", "[encoder]") {
  RandomSource rng(24);
  ParamStore store;
  const EncoderConfig cfg{8, 2, 7, 2, 2};
  init_encoder_params(store, "e", cfg, rng);
  Tape tape;
  Var omega = encode(tape.leaf(rand_tensor({2, 8}, rng, -5, 5)),
                     EncoderParams::bind(tape, store, "e"), cfg);
  for (double v : omega.value().vec()) {
    REQUIRE(v > -1.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("input length mismatching the config is rejected", "[encoder]") {
  EncoderConfig cfg{4, 6, 3, 2, 2};
  Tape tape;
  EncoderParams p{tape.leaf(Tensor(Shape{4, 6, 2})), tape.leaf(Tensor(Shape{4})),
                  tape.leaf(Tensor(Shape{4})), tape.leaf(Tensor(Shape{3, 4, 2})),
                  tape.leaf(Tensor(Shape{3}))};
  REQUIRE_THROWS_AS(encode(tape.leaf(Tensor(Shape{2, 5})), p, cfg), ShapeError);
  REQUIRE_THROWS_AS(encode(tape.leaf(Tensor(Shape{3, 8})), p, cfg), ShapeError);
}

TEST_CASE("encoder gradient matches finite differences end to end", "[encoder]") {
  RandomSource rng(25);
  const EncoderConfig cfg{4, 2, 3, 2, 2};
  for (int rep = 0; rep < 5; ++rep) {
    auto stats = grad_check(random_encoder_tensors(cfg, 6, rng),
                            [&cfg](Tape&, const std::vector<Var>& v) {
                              return reduce_sum(encode_from_vars(v, cfg));
                            });
    INFO("max_rel=" << stats.max_rel << " skipped=" << stats.skipped);
    REQUIRE(stats.ok);
  }
}

TEST_CASE("relabeling patterns and conv input channels together is a no-op",
          "[encoder]") {
  RandomSource rng(26);
  const EncoderConfig cfg{6, 2, 5, 2, 2};
  auto tensors = random_encoder_tensors(cfg, 8, rng);

  // permute pattern index j in P, lambda, b, and conv_w's input-channel axis
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  auto permuted = tensors;
  for (std::size_t j = 0; j < 6; ++j) {
    for (std::size_t k = 0; k < cfg.pattern_len; ++k)
      for (std::size_t d = 0; d < 2; ++d)
        permuted[1].at({j, k, d}) = tensors[1].at({perm[j], k, d});
    permuted[2][j] = tensors[2][perm[j]];
    permuted[3][j] = tensors[3][perm[j]];
    for (std::size_t c = 0; c < cfg.n_conv_kernels; ++c)
      for (std::size_t k = 0; k < cfg.conv_len; ++k)
        permuted[4].at({c, j, k}) = tensors[4].at({c, perm[j], k});
  }

  const auto run = [&](const std::vector<Tensor>& ts) {
    Tape tape;
    std::vector<Var> v;
    for (const auto& t : ts) v.push_back(tape.leaf(t));
    return encode_from_vars(v, cfg).value();
  };
  Tensor a = run(tensors), b = run(permuted);
  for (std::size_t i = 0; i < a.numel(); ++i)
    REQUIRE(b[i] == Catch::Approx(a[i]).margin(1e-9));
}
