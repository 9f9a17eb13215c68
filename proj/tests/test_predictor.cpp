#include <catch2/catch_amalgamated.hpp>

#include "socialpec/predictor.hpp"

#include "testutil.hpp"

using namespace socialpec;
using testutil::rand_tensor;

namespace {

// Small but structurally complete model for fast tests.
ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.context = EncoderConfig{6, 2, 5, 2, 2};
  cfg.target = EncoderConfig{4, 2, 3, 2, 2};
  cfg.mlp.hidden = {12, 8};
  return cfg;
}

Scene random_scene(std::size_t m, std::size_t len, RandomSource& rng) {
  std::vector<Trajectory> trajs;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<State> states;
    State p{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    for (std::size_t t = 0; t < len; ++t) {
      p.x += rng.uniform(-0.5, 0.5);
      p.y += rng.uniform(-0.5, 0.5);
      states.push_back(p);
    }
    trajs.emplace_back(std::move(states));
  }
  return Scene(std::move(trajs));
}

}  // namespace

TEST_CASE("context pooling", "[predictor]") {
  Tape tape;
  RandomSource rng(51);
  const Shape shape{3, 2};

  SECTION("single pedestrian passes through") {
    Var e = tape.leaf(rand_tensor(shape, rng));
    Var pooled = context_pool(tape, {e}, shape);
    REQUIRE(pooled.value().vec() == e.value().vec());
  }
  SECTION("empty context pools to all -1") {
    Var pooled = context_pool(tape, {}, shape);
    REQUIRE(pooled.shape() == shape);
    for (double v : pooled.value().vec()) REQUIRE(v == -1.0);
  }
  SECTION("permutation leaves the pool bit-identical") {
    std::vector<Var> es;
    for (int i = 0; i < 4; ++i) es.push_back(tape.leaf(rand_tensor(shape, rng)));
    Var a = context_pool(tape, {es[0], es[1], es[2], es[3]}, shape);
    Var b = context_pool(tape, {es[3], es[1], es[0], es[2]}, shape);
    REQUIRE(a.value().vec() == b.value().vec());
  }
  SECTION("elementwise-dominant embedding wins everywhere") {
    Tensor lo = rand_tensor(shape, rng, -1, 0);
    Tensor hi = lo;
    for (auto& v : hi.vec()) v += 0.5;
    Var pooled = context_pool(tape, {tape.leaf(lo), tape.leaf(hi)}, shape);
    REQUIRE(pooled.value().vec() == hi.vec());
  }
  SECTION("mixed shapes are rejected") {
    Var a = tape.leaf(Tensor(Shape{3, 2}));
    Var b = tape.leaf(Tensor(Shape{2, 3}));
    REQUIRE_THROWS_AS(context_pool(tape, {a, b}, shape), ShapeError);
  }
}

TEST_CASE("loc_predict returns a valid ego-frame distribution", "[predictor]") {
  const ModelConfig cfg = tiny_model();
  RandomSource rng(52);
  ParamStore store;
  init_model_params(store, cfg, rng);

  SECTION("lone pedestrian uses the empty-pool default") {
    Scene scene = random_scene(1, cfg.t_h, rng);
    Scene ego = convert(scene, 0);
    auto dist = loc_predict(ego, 0, store, cfg);
    REQUIRE(dist.mixture_size() == 1);
    REQUIRE(std::isfinite(dist.log_density({0.3, 0.1})));
  }
  SECTION("duplicating a context pedestrian changes nothing") {
    Scene scene = random_scene(3, cfg.t_h, rng);
    Scene ego = convert(scene, 0);
    auto base = loc_predict(ego, 0, store, cfg);

    std::vector<Trajectory> trajs = ego.trajectories();
    trajs.push_back(trajs[1]);  // exact duplicate of one context pedestrian
    auto dup = loc_predict(Scene(std::move(trajs)), 0, store, cfg);

    REQUIRE(dup.components().front().mean.x == base.components().front().mean.x);
    REQUIRE(dup.components().front().mean.y == base.components().front().mean.y);
    REQUIRE(dup.components().front().sigma_x == base.components().front().sigma_x);
  }
  SECTION("context permutation leaves the output bit-identical") {
    Scene scene = random_scene(4, cfg.t_h, rng);
    Scene ego = convert(scene, 0);
    auto base = loc_predict(ego, 0, store, cfg);

    std::vector<Trajectory> trajs{ego.at(0), ego.at(3), ego.at(1), ego.at(2)};
    auto permuted = loc_predict(Scene(std::move(trajs)), 0, store, cfg);
    REQUIRE(permuted.components().front().mean.x == base.components().front().mean.x);
    REQUIRE(permuted.components().front().mean.y == base.components().front().mean.y);
    REQUIRE(permuted.components().front().rho == base.components().front().rho);
  }
  SECTION("wrong window length is rejected") {
    Scene scene = random_scene(2, cfg.t_h + 1, rng);
    REQUIRE_THROWS_AS(loc_predict(convert(scene, 0), 0, store, cfg), ShapeError);
  }
}

TEST_CASE("mixture head produces K components end to end", "[predictor]") {
  ModelConfig cfg = tiny_model();
  cfg.mixture_components = 3;
  RandomSource rng(53);
  ParamStore store;
  init_model_params(store, cfg, rng);
  Scene ego = convert(random_scene(2, cfg.t_h, rng), 0);
  auto dist = loc_predict(ego, 0, store, cfg);
  REQUIRE(dist.mixture_size() == 3);
  double total = 0.0;
  for (const auto& c : dist.components()) total += c.weight;
  REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("rollout has t_pred steps for every pedestrian", "[predictor]") {
  const ModelConfig cfg = tiny_model();
  RandomSource rng(54);
  ParamStore store;
  init_model_params(store, cfg, rng);
  Scene scene = random_scene(3, 10, rng);  // longer than t_h: tail window is used

  RandomSource sample_rng(1);
  auto rollouts = traj_predict(scene, store, cfg, sample_rng, 4);
  REQUIRE(rollouts.size() == 4);
  for (const auto& r : rollouts) {
    REQUIRE(r.predicted.size() == 3);
    for (const auto& track : r.predicted) {
      REQUIRE(track.size() == cfg.t_pred);
      for (const auto& s : track) {
        REQUIRE(std::isfinite(s.x));
        REQUIRE(std::isfinite(s.y));
      }
    }
  }
}

TEST_CASE("rollout is deterministic under a fixed seed", "[predictor]") {
  const ModelConfig cfg = tiny_model();
  RandomSource rng(55);
  ParamStore store;
  init_model_params(store, cfg, rng);
  Scene scene = random_scene(2, cfg.t_h, rng);

  RandomSource a(9), b(9);
  auto ra = traj_predict(scene, store, cfg, a, 20);
  auto rb = traj_predict(scene, store, cfg, b, 20);
  for (std::size_t s = 0; s < 20; ++s)
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t t = 0; t < cfg.t_pred; ++t) {
        REQUIRE(ra[s].predicted[m][t].x == rb[s].predicted[m][t].x);
        REQUIRE(ra[s].predicted[m][t].y == rb[s].predicted[m][t].y);
      }
}

TEST_CASE("scene shorter than the window is rejected", "[predictor]") {
  const ModelConfig cfg = tiny_model();
  RandomSource rng(56);
  ParamStore store;
  init_model_params(store, cfg, rng);
  Scene scene = random_scene(2, cfg.t_h - 1, rng);
  RandomSource sample_rng(1);
  REQUIRE_THROWS_AS(traj_predict(scene, store, cfg, sample_rng, 1), ShapeError);
}

TEST_CASE("zero-covariance linear stub rolls out exact linear extrapolation",
          "[predictor]") {
  // stub head: next ego location continues the target's last step exactly
  const LocPredictFn stub = [](const Scene& ego, std::size_t m) {
    const auto& t = ego.at(m);
    const double step =
        distance(t.at(t.length() - 1), t.at(t.length() - 2));
    return LocationDistribution::single({step, 0.0}, 1e-30, 0.0, 1e-30);
  };

  std::vector<State> walker;
  for (int i = 0; i < 8; ++i)
    walker.push_back({0.3 * i, 0.4 * i});  // constant velocity, speed 0.5/step
  Scene scene({Trajectory(walker)});

  RandomSource rng(57);
  auto rollouts = traj_predict(scene, stub, rng, 1, 8, 12);
  for (std::size_t t = 0; t < 12; ++t) {
    const State& s = rollouts[0].predicted[0][t];
    REQUIRE(s.x == Catch::Approx(0.3 * (8 + t)).margin(1e-6));
    REQUIRE(s.y == Catch::Approx(0.4 * (8 + t)).margin(1e-6));
  }
}

TEST_CASE("single-step rollout is one loc_predict and sample per pedestrian",
          "[predictor]") {
  const ModelConfig cfg = tiny_model();
  RandomSource rng(58);
  ParamStore store;
  init_model_params(store, cfg, rng);
  Scene scene = random_scene(2, cfg.t_h, rng);

  RandomSource a(3);
  auto rollouts =
      traj_predict(scene, store, cfg, a, 1, /*keep_distributions=*/true);
  REQUIRE(rollouts.size() == 1);
  REQUIRE(rollouts[0].distributions[0].size() == cfg.t_pred);

  // first step must equal loc_predict on the converted observation window
  const EgoFrame frame = ego_frame_of(scene.at(0));
  auto dist = loc_predict(to_ego(scene, frame), 0, store, cfg);
  const auto& kept = rollouts[0].distributions[0][0];
  REQUIRE(kept.components().front().mean.x == dist.components().front().mean.x);
  REQUIRE(kept.components().front().sigma_y == dist.components().front().sigma_y);
}

TEST_CASE("relabeling pedestrians permutes rollouts correspondingly", "[predictor]") {
  const ModelConfig cfg = tiny_model();
  RandomSource rng(59);
  ParamStore store;
  init_model_params(store, cfg, rng);
  Scene scene = random_scene(3, cfg.t_h, rng);
  Scene relabeled({scene.at(2), scene.at(0), scene.at(1)});

  // deterministic stub so the sampling stream cannot mask the permutation
  const LocPredictFn stub = [&store, &cfg](const Scene& ego, std::size_t m) {
    auto d = loc_predict(ego, m, store, cfg);
    const auto& c = d.components().front();
    return LocationDistribution::single(c.mean, 1e-30, 0.0, 1e-30);
  };
  RandomSource ra(1), rb(1);
  auto base = traj_predict(scene, stub, ra, 1, cfg.t_h, cfg.t_pred);
  auto perm = traj_predict(relabeled, stub, rb, 1, cfg.t_h, cfg.t_pred);
  for (std::size_t t = 0; t < cfg.t_pred; ++t) {
    REQUIRE(perm[0].predicted[0][t].x == Catch::Approx(base[0].predicted[2][t].x));
    REQUIRE(perm[0].predicted[1][t].x == Catch::Approx(base[0].predicted[0][t].x));
    REQUIRE(perm[0].predicted[2][t].x == Catch::Approx(base[0].predicted[1][t].x));
  }
}

TEST_CASE("rollout csv has the contracted row count", "[predictor]") {
  const ModelConfig cfg = tiny_model();
  RandomSource rng(60);
  ParamStore store;
  init_model_params(store, cfg, rng);
  Scene scene = random_scene(2, cfg.t_h, rng);
  RandomSource sample_rng(4);
  const std::size_t n_samples = 5;
  auto rollouts = traj_predict(scene, store, cfg, sample_rng, n_samples);

  std::ostringstream os;
  write_rollout_csv(os, 0, scene, rollouts, cfg.t_h);
  const std::string csv = os.str();
  const auto rows = std::count(csv.begin(), csv.end(), '\n') - 1;  // minus header
  REQUIRE(rows == static_cast<long>(2 * (cfg.t_h + n_samples * cfg.t_pred)));
}
