#include <catch2/catch_amalgamated.hpp>

#include "socialpec/head.hpp"

#include "testutil.hpp"

using namespace socialpec;
using testutil::grad_check;
using testutil::rand_tensor;

namespace {

// Random raw head vector whose mixture mass stays well inside [-20,20]^2.
std::vector<double> random_raw(std::size_t k, RandomSource& rng) {
  std::vector<double> raw;
  for (std::size_t i = 0; i < k; ++i) {
    raw.push_back(rng.uniform(-3, 3));    // x
    raw.push_back(rng.uniform(-3, 3));    // y
    raw.push_back(rng.uniform(-1, 0.8));  // a
    raw.push_back(rng.uniform(-1, 0.8));  // b
    raw.push_back(rng.uniform(-2, 2));    // c
    if (i > 0) raw.push_back(rng.uniform(-1.5, 1.5));  // beta
  }
  return raw;
}

}  // namespace

TEST_CASE("raw output widths per mixture size", "[head]") {
  REQUIRE(MlpConfig::raw_dim(1) == 5);
  REQUIRE(MlpConfig::raw_dim(2) == 11);
  REQUIRE(MlpConfig::raw_dim(3) == 17);
  REQUIRE_THROWS_AS(MlpConfig::raw_dim(0), ShapeError);
}

TEST_CASE("zero-parameter mlp emits a zero raw vector", "[head]") {
  ParamStore store;
  store.add("mlp.w1", Tensor(Shape{4, 6}));
  store.add("mlp.b1", Tensor(Shape{4, 1}));
  store.add("mlp.w2", Tensor(Shape{5, 4}));
  store.add("mlp.b2", Tensor(Shape{5, 1}));
  Tape tape;
  auto params = MlpParams::bind(tape, store, "mlp", 2);
  RandomSource rng(31);
  Var out = mlp_forward(tape.leaf(rand_tensor({6, 1}, rng)), params);
  REQUIRE(out.shape() == Shape{5, 1});
  for (double v : out.value().vec()) REQUIRE(v == 0.0);
}

TEST_CASE("mlp init wires the configured layer widths", "[head]") {
  ParamStore store;
  RandomSource rng(32);
  init_mlp_params(store, "mlp", 720, MlpConfig{}, 5, rng);
  REQUIRE(store.value("mlp.w1").shape() == Shape{300, 720});
  REQUIRE(store.value("mlp.w2").shape() == Shape{120, 300});
  REQUIRE(store.value("mlp.w3").shape() == Shape{80, 120});
  REQUIRE(store.value("mlp.w4").shape() == Shape{5, 80});
  REQUIRE(store.value("mlp.b4").shape() == Shape{5, 1});
}

TEST_CASE("zero raw vector builds a standard bivariate gaussian", "[head]") {
  auto dist = build_gaussian({0, 0, 0, 0, 0});
  const auto& c = dist.components().front();
  REQUIRE(c.mean.x == 0.0);
  REQUIRE(c.mean.y == 0.0);
  REQUIRE(c.cov_xx() == Catch::Approx(1.0));
  REQUIRE(c.cov_yy() == Catch::Approx(1.0));
  REQUIRE(c.cov_xy() == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(dist.log_density({0, 0}) ==
          Catch::Approx(-std::log(2.0 * M_PI)).margin(1e-9));
}

TEST_CASE("covariance stays positive definite for extreme correlations", "[head]") {
  for (double c : {-50.0, -5.0, 0.0, 5.0, 50.0}) {
    auto dist = build_gaussian({1, 2, 0, 0, c});
    const auto& g = dist.components().front();
    const double det = g.cov_xx() * g.cov_yy() - g.cov_xy() * g.cov_xy();
    REQUIRE(det > 0.0);
    REQUIRE(std::abs(g.rho) < 1.0);
  }
}

TEST_CASE("determinant matches the closed form on random raws", "[head]") {
  RandomSource rng(33);
  for (int rep = 0; rep < 100; ++rep) {
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2), c = rng.uniform(-3, 3);
    auto dist = build_gaussian({rng.uniform(-5, 5), rng.uniform(-5, 5), a, b, c});
    const auto& g = dist.components().front();
    const double det = g.cov_xx() * g.cov_yy() - g.cov_xy() * g.cov_xy();
    const double expected =
        std::exp(2 * a) * std::exp(2 * b) * (1.0 - std::pow(std::tanh(c), 2));
    REQUIRE(det == Catch::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("gmm weight normalization", "[head]") {
  SECTION("K=1 equals the plain gaussian") {
    auto a = build_gmm({1, 2, 0.1, -0.2, 0.3}, 1);
    auto b = build_gaussian({1, 2, 0.1, -0.2, 0.3});
    REQUIRE(a.components().front().weight == 1.0);
    REQUIRE(a.log_density({0.5, 0.5}) == Catch::Approx(b.log_density({0.5, 0.5})));
  }
  SECTION("K=2 with beta2=0 gives equal weights") {
    auto dist = build_gmm({0, 0, 0, 0, 0, 3, 3, 0, 0, 0, 0}, 2);
    REQUIRE(dist.components()[0].weight == Catch::Approx(0.5));
    REQUIRE(dist.components()[1].weight == Catch::Approx(0.5));
  }
  SECTION("K=3 with beta2=ln2, beta3=ln4 gives 1/7, 2/7, 4/7") {
    std::vector<double> raw{0, 0, 0, 0, 0,
                            1, 1, 0, 0, 0, std::log(2.0),
                            2, 2, 0, 0, 0, std::log(4.0)};
    auto dist = build_gmm(raw, 3);
    REQUIRE(dist.components()[0].weight == Catch::Approx(1.0 / 7));
    REQUIRE(dist.components()[1].weight == Catch::Approx(2.0 / 7));
    REQUIRE(dist.components()[2].weight == Catch::Approx(4.0 / 7));
  }
  SECTION("weights always sum to one") {
    RandomSource rng(34);
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t k = 1 + rng.index(3);
      auto dist = build_gmm(random_raw(k, rng), k);
      double total = 0.0;
      for (const auto& c : dist.components()) {
        REQUIRE(c.weight > 0.0);
        total += c.weight;
      }
      REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("density integrates to one on a grid", "[head]") {
  RandomSource rng(35);
  for (int rep = 0; rep < 12; ++rep) {
    const std::size_t k = 1 + rng.index(3);
    auto dist = build_gmm(random_raw(k, rng), k);
    REQUIRE(testutil::integrate_density(dist) == Catch::Approx(1.0).margin(1e-3));
  }
}

TEST_CASE("far-separated equal mixture halves the peak density", "[head]") {
  std::vector<double> raw{0, 0, 0.2, -0.1, 0.4,
                          1000, 1000, 0, 0, 0, 0.0};
  auto dist = build_gmm(raw, 2);
  auto solo = build_gaussian({0, 0, 0.2, -0.1, 0.4});
  const State at{0, 0};
  REQUIRE(dist.log_density(at) ==
          Catch::Approx(std::log(0.5) + solo.log_density(at)).margin(1e-9));
}

TEST_CASE("sampling follows the distribution", "[head]") {
  SECTION("vanishing covariance collapses to the mean") {
    auto dist = build_gaussian({1.5, -2.5, -40, -40, 0});
    RandomSource rng(36);
    for (int i = 0; i < 10; ++i) {
      State s = dist.sample(rng);
      REQUIRE(s.x == Catch::Approx(1.5).margin(1e-10));
      REQUIRE(s.y == Catch::Approx(-2.5).margin(1e-10));
    }
  }
  SECTION("identity gaussian moments from 1e5 samples") {
    auto dist = build_gaussian({0.5, -0.5, 0, 0, 0});
    RandomSource rng(37);
    const int n = 100000;
    double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
    std::vector<State> samples(n);
    for (auto& s : samples) s = dist.sample(rng);
    for (const auto& s : samples) {
      mx += s.x;
      my += s.y;
    }
    mx /= n;
    my /= n;
    for (const auto& s : samples) {
      sxx += (s.x - mx) * (s.x - mx);
      syy += (s.y - my) * (s.y - my);
      sxy += (s.x - mx) * (s.y - my);
    }
    sxx /= n;
    syy /= n;
    sxy /= n;
    REQUIRE(std::abs(mx - 0.5) < 0.02);
    REQUIRE(std::abs(my + 0.5) < 0.02);
    REQUIRE(std::abs(sxx - 1.0) < 0.05);
    REQUIRE(std::abs(syy - 1.0) < 0.05);
    REQUIRE(std::abs(sxy) < 0.05);
  }
  SECTION("component choice follows the weights") {
    // means far apart; count draws landing near the heavy component
    std::vector<double> raw{0, 0, -2, -2, 0, 100, 0, -2, -2, 0, std::log(3.0)};
    auto dist = build_gmm(raw, 2);  // weights 0.25 / 0.75
    RandomSource rng(38);
    int heavy = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i)
      if (dist.sample(rng).x > 50.0) ++heavy;
    REQUIRE(std::abs(heavy / static_cast<double>(n) - 0.75) < 0.02);
  }
  SECTION("fixed seed reproduces the sample sequence") {
    RandomSource raw_rng(39);
    auto dist = build_gmm(random_raw(2, raw_rng), 2);
    RandomSource a(40), b(40);
    for (int i = 0; i < 20; ++i) {
      State sa = dist.sample(a), sb = dist.sample(b);
      REQUIRE(sa.x == sb.x);
      REQUIRE(sa.y == sb.y);
    }
  }
}

TEST_CASE("tape nll agrees with the value-level log density", "[head]") {
  RandomSource rng(41);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t k = 1 + rng.index(3);
    auto raw = random_raw(k, rng);
    const State target{rng.uniform(-4, 4), rng.uniform(-4, 4)};

    Tape tape;
    Var raw_v = tape.leaf(Tensor(Shape{raw.size(), 1}, raw));
    Var target_v = tape.leaf(Tensor(Shape{2, 1}, std::vector<double>{target.x, target.y}));
    const double tape_nll = head_nll(raw_v, target_v, k).value()[0];

    const double value_nll = -build_gmm(raw, k).log_density(target);
    REQUIRE(tape_nll == Catch::Approx(value_nll).margin(1e-12));
  }
}

TEST_CASE("nll gradient w.r.t. raw outputs matches finite differences", "[head]") {
  RandomSource rng(42);
  for (std::size_t k : {1u, 2u, 3u}) {
    for (int rep = 0; rep < 10; ++rep) {
      auto raw = random_raw(k, rng);
      Tensor raw_t(Shape{raw.size(), 1}, raw);
      Tensor target(Shape{2, 1},
                    std::vector<double>{rng.uniform(-3, 3), rng.uniform(-3, 3)});
      auto stats = grad_check({raw_t, target},
                              [k](Tape&, const std::vector<Var>& v) {
                                return head_nll(v[0], v[1], k);
                              });
      INFO("K=" << k << " max_rel=" << stats.max_rel);
      REQUIRE(stats.ok);
    }
  }
}

TEST_CASE("distribution invariants are enforced", "[head]") {
  GaussianComponent bad;
  bad.sigma_x = -1.0;
  REQUIRE_THROWS_AS(LocationDistribution({bad}), NumericError);

  GaussianComponent half;
  half.weight = 0.5;
  REQUIRE_THROWS_AS(LocationDistribution({half}), NumericError);

  REQUIRE_THROWS_AS(build_gaussian({0, 0, 0}), ShapeError);
  REQUIRE_THROWS_AS(build_gmm({0, 0, 0, 0, 0}, 2), ShapeError);
}
