#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "socialpec/eval.hpp"

#include "testutil.hpp"

using namespace socialpec;

namespace {

// straight-line walker window: obs 8 + pred 12 steps of (vx, vy) per step
Window linear_window(double vx, double vy, State start = {0, 0}) {
  std::vector<State> states;
  for (int t = 0; t < 20; ++t)
    states.push_back({start.x + vx * t, start.y + vy * t});
  return Window{Scene({Trajectory(states)}), "t", 0, {0}};
}

PredictionRollout truth_rollout(const Scene& truth, std::size_t t_h) {
  PredictionRollout r;
  r.predicted.resize(truth.size());
  for (std::size_t m = 0; m < truth.size(); ++m)
    for (std::size_t t = t_h; t < truth.length(); ++t)
      r.predicted[m].push_back(truth.at(m).at(t));
  return r;
}

PredictionRollout offset_rollout(const PredictionRollout& base, double dx, double dy,
                                 std::size_t only_last = SIZE_MAX) {
  PredictionRollout r = base;
  for (auto& track : r.predicted)
    for (std::size_t t = 0; t < track.size(); ++t) {
      if (only_last != SIZE_MAX && t + 1 != track.size()) continue;
      track[t].x += dx;
      track[t].y += dy;
    }
  return r;
}

}  // namespace

TEST_CASE("ade basics", "[eval]") {
  Window w = linear_window(0.3, 0.0);
  auto exact = truth_rollout(w.scene, 8);
  REQUIRE(ade(exact, w.scene, 8) == 0.0);

  auto shifted = offset_rollout(exact, 0.6, 0.8);  // constant 1 m offset
  REQUIRE(ade(shifted, w.scene, 8) == Catch::Approx(1.0));
}

TEST_CASE("ade averages per-step errors", "[eval]") {
  // 1 pedestrian, 2 steps, errors 3 and 4 -> 3.5
  std::vector<State> states;
  for (int t = 0; t < 10; ++t) states.push_back({0.0, 0.0});
  Scene truth({Trajectory(states)});
  PredictionRollout pred;
  pred.predicted = {{{3.0, 0.0}, {0.0, 4.0}}};
  REQUIRE(ade(pred, truth, 8) == Catch::Approx(3.5));
  REQUIRE(fde(pred, truth, 8) == Catch::Approx(4.0));
}

TEST_CASE("fde depends only on the final step", "[eval]") {
  Window w = linear_window(0.2, 0.1);
  auto exact = truth_rollout(w.scene, 8);
  REQUIRE(fde(exact, w.scene, 8) == 0.0);

  // perturbing non-final steps changes ADE but not FDE
  auto mid = exact;
  mid.predicted[0][3].x += 5.0;
  REQUIRE(fde(mid, w.scene, 8) == 0.0);
  REQUIRE(ade(mid, w.scene, 8) > 0.0);

  auto last = offset_rollout(exact, 1.5, 0.0, /*only_last=*/0);
  REQUIRE(fde(last, w.scene, 8) == Catch::Approx(1.5));
}

TEST_CASE("fde is the per-pedestrian mean of final errors", "[eval]") {
  std::vector<State> zeros(20, State{0, 0});
  Scene truth({Trajectory(zeros), Trajectory(zeros)});
  PredictionRollout pred;
  pred.predicted = {std::vector<State>(12, State{0, 0}),
                    std::vector<State>(12, State{0, 0})};
  pred.predicted[0].back() = {1.0, 0.0};
  pred.predicted[1].back() = {0.0, 3.0};
  REQUIRE(fde(pred, truth, 8) == Catch::Approx(2.0));
}

TEST_CASE("best_of_n selection", "[eval]") {
  Window w = linear_window(0.25, -0.1);
  auto exact = truth_rollout(w.scene, 8);
  auto worse = offset_rollout(exact, 0.5, 0.0);
  auto worst = offset_rollout(exact, 2.0, 0.0);

  SECTION("singleton equals plain ade/fde") {
    auto [a, f] = best_of_n({worse}, w.scene, 8);
    REQUIRE(a == Catch::Approx(ade(worse, w.scene, 8)));
    REQUIRE(f == Catch::Approx(fde(worse, w.scene, 8)));
  }
  SECTION("adding a worse sample never increases the result") {
    auto [a1, f1] = best_of_n({worse}, w.scene, 8);
    auto [a2, f2] = best_of_n({worse, worst}, w.scene, 8);
    REQUIRE(a2 <= a1);
    REQUIRE(f2 <= f1);
  }
  SECTION("a perfect sample among 20 gives (0,0)") {
    std::vector<PredictionRollout> samples(19, worse);
    samples.push_back(exact);
    auto [a, f] = best_of_n(samples, w.scene, 8);
    REQUIRE(a == 0.0);
    REQUIRE(f == 0.0);
  }
  SECTION("reported fde follows the min-ade sample unless independent") {
    // sample A: small ade, bad fde; sample B: big ade, perfect fde
    auto a_sample = offset_rollout(exact, 0.0, 0.0, /*only_last=*/0);
    a_sample.predicted[0].back().x += 1.0;  // ade = 1/12, fde = 1
    auto b_sample = offset_rollout(exact, 0.7, 0.0);
    b_sample.predicted[0].back() = w.scene.at(0).back();  // fde 0, big ade
    auto [a, f] = best_of_n({a_sample, b_sample}, w.scene, 8);
    REQUIRE(a == Catch::Approx(1.0 / 12.0));
    REQUIRE(f == Catch::Approx(1.0));
    auto [ai, fi] = best_of_n({a_sample, b_sample}, w.scene, 8, true);
    REQUIRE(ai == Catch::Approx(1.0 / 12.0));
    REQUIRE(fi == 0.0);
  }
}

TEST_CASE("linear baseline", "[eval]") {
  SECTION("constant-velocity truth gives zero error") {
    Window w = linear_window(0.3, -0.2, {1, 5});
    auto pred = linear_baseline(w.scene, 8, 12);
    REQUIRE(ade(pred, w.scene, 8) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(fde(pred, w.scene, 8) == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("pedestrian at rest stays at rest") {
    Window w = linear_window(0.0, 0.0, {2, 3});
    auto pred = linear_baseline(w.scene, 8, 12);
    for (const auto& s : pred.predicted[0]) {
      REQUIRE(s.x == 2.0);
      REQUIRE(s.y == 3.0);
    }
  }
  SECTION("velocity is the mean observed displacement") {
    // zig-zag: displacements alternate 0.4 and 0.2 in x; mean 0.3
    std::vector<State> states{{0, 0}};
    for (int i = 0; i < 19; ++i) {
      const double dx = i % 2 == 0 ? 0.4 : 0.2;
      states.push_back({states.back().x + dx, 0.0});
    }
    Scene scene({Trajectory(states)});
    auto pred = linear_baseline(scene, 8, 12);
    const double mean_v = (states[7].x - states[0].x) / 7.0;
    REQUIRE(pred.predicted[0][0].x == Catch::Approx(states[7].x + mean_v));
  }
}

TEST_CASE("metrics are invariant under rigid motion of pred and truth", "[eval]") {
  RandomSource rng(81);
  Window w = linear_window(0.2, 0.3);
  auto pred = offset_rollout(truth_rollout(w.scene, 8), 0.4, -0.3);
  const double base_ade = ade(pred, w.scene, 8);
  const double base_fde = fde(pred, w.scene, 8);

  const EgoFrame frame{{rng.uniform(-5, 5), rng.uniform(-5, 5)},
                       rng.uniform(-3, 3)};
  Scene truth_moved = to_ego(w.scene, frame);
  PredictionRollout pred_moved = pred;
  for (auto& track : pred_moved.predicted)
    for (auto& s : track) s = to_ego(s, frame);
  REQUIRE(ade(pred_moved, truth_moved, 8) == Catch::Approx(base_ade).margin(1e-9));
  REQUIRE(fde(pred_moved, truth_moved, 8) == Catch::Approx(base_fde).margin(1e-9));
}

TEST_CASE("window evaluation pools by pedestrian count", "[eval]") {
  // two windows with different M; a predictor with constant 1 m offset
  std::vector<Window> windows{linear_window(0.3, 0.0), linear_window(0.0, 0.25)};
  {
    std::vector<Trajectory> trajs = windows[1].scene.trajectories();
    trajs.push_back(windows[0].scene.at(0));
    windows[1] = Window{Scene(trajs), "t", 0, {0, 1}};
  }
  const WindowPredictor unit_off = [](const Window& w, std::size_t) {
    PredictionRollout r;
    r.predicted.resize(w.scene.size());
    for (std::size_t m = 0; m < w.scene.size(); ++m)
      for (std::size_t t = 8; t < 20; ++t) {
        State s = w.scene.at(m).at(t);
        r.predicted[m].push_back({s.x + 1.0, s.y});
      }
    return std::vector<PredictionRollout>{r};
  };
  auto row = evaluate_windows("synthetic", windows, unit_off, 8);
  REQUIRE(row.ade == Catch::Approx(1.0));
  REQUIRE(row.fde == Catch::Approx(1.0));
  REQUIRE(row.n_windows == 2);
  REQUIRE(row.n_pedestrians == 3);
}

TEST_CASE("threaded evaluation matches sequential exactly", "[eval]") {
  RandomSource rng(82);
  auto windows = synthetic_walkers(12, 3, 0.05, rng);
  auto seq = evaluate_linear("s", windows, 8, 12, 1);
  auto par = evaluate_linear("s", windows, 8, 12, 4);
  REQUIRE(seq.ade == par.ade);
  REQUIRE(seq.fde == par.fde);
}

TEST_CASE("metric report rendering", "[eval]") {
  MetricReport report;
  report.samples = 20;
  report.protocol = "best-of-20";
  report.rows = {{"ETH", 0.61, 1.11, 70, 250}, {"Hotel", 0.31, 0.52, 30, 100}};

  std::ostringstream csv;
  write_metric_csv(csv, report);
  const std::string csv_text = csv.str();
  REQUIRE(csv_text.rfind("dataset,ade,fde,n_windows,n_pedestrians,protocol,samples\n",
                         0) == 0);
  REQUIRE(csv_text.find("ETH,0.6") != std::string::npos);
  REQUIRE(csv_text.find("best-of-20,20") != std::string::npos);

  std::ostringstream table;
  render_metric_table(table, report, true);
  const std::string text = table.str();
  REQUIRE(text.find("ETH") != std::string::npos);
  REQUIRE(text.find("S-STGCNN (reported)") != std::string::npos);
  REQUIRE(text.find("Social-PEC (reported)") != std::string::npos);
  REQUIRE(report.average_ade() == Catch::Approx(0.46));
}
