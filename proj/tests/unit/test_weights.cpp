#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"
#include "tvmsm/propensity.hpp"
#include "tvmsm/rng.hpp"
#include "tvmsm/simgen.hpp"
#include "tvmsm/weights.hpp"

using namespace tvmsm;
using tvmsm::testing::random_raw;
using tvmsm::testing::raw_panel;

namespace {

Eigen::MatrixXd random_propensity(std::size_t n, std::size_t D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  Eigen::MatrixXd e(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index t = 0; t < e.cols(); ++t) e(i, t) = u(rng);
  }
  return e;
}

}  // namespace

TEST_CASE("constant propensity 0.5") {
  const PanelDataset ds = validate(random_raw(30, 3, 1, 1, 2));
  const Eigen::MatrixXd e = Eigen::MatrixXd::Constant(30, 3, 0.5);
  const WeightSet w_ipw = ipw(e, ds);
  const WeightSet w_ow = overlap(e, ds);
  for (Eigen::Index i = 0; i < 30; ++i) {
    CHECK(w_ipw.values(i) == 8.0);
    CHECK(w_ow.values(i) == 0.125);
  }
  CHECK(w_ipw.scheme == Scheme::ipw);
  CHECK(*w_ipw.propensity == e);
}

TEST_CASE("single-period and two-period hand products") {
  const PanelDataset one = validate(raw_panel({{1}, {0}}, {0, 0}));
  Eigen::MatrixXd e1(2, 1);
  e1 << 0.8, 0.8;
  CHECK(ipw(e1, one).values(0) == doctest::Approx(1.25));
  CHECK(overlap(e1, one).values(0) == doctest::Approx(0.2));
  CHECK(ipw(e1, one).values(1) == doctest::Approx(5.0));
  CHECK(overlap(e1, one).values(1) == doctest::Approx(0.8));

  const PanelDataset two = validate(raw_panel({{1, 0}}, {0}));
  Eigen::MatrixXd e2(1, 2);
  e2 << 0.9, 0.1;
  CHECK(ipw(e2, two).values(0) == doctest::Approx((1 / 0.9) * (1 / 0.9)));
  CHECK(ipw(e2, two).values(0) == doctest::Approx(1.2346).epsilon(1e-4));
  CHECK(overlap(e2, two).values(0) == doctest::Approx(0.01));
}

TEST_CASE("stabilized weights") {
  SUBCASE("identical numerator and denominator give unit weights") {
    const PanelDataset ds = validate(random_raw(200, 3, 1, 1, 6));
    const Eigen::MatrixXd num = stabilizing_numerator(ds);
    const WeightSet sw = stabilized(num, ds);
    CHECK((sw.values.array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("single period: marginal over individual probability") {
    std::vector<std::vector<int>> t(10, std::vector<int>{0});
    t[0][0] = t[1][0] = t[2][0] = 1;
    const PanelDataset ds = validate(raw_panel(t, std::vector<double>(10, 0.0)));
    Eigen::MatrixXd e = Eigen::MatrixXd::Constant(10, 1, 0.3);
    e(0, 0) = 0.6;
    CHECK(stabilized(e, ds).values(0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(stabilized(e, ds).values(5) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("numerator matches empirical frequencies") {
    const PanelDataset ds = validate(random_raw(500, 2, 1, 1, 12));
    const Eigen::MatrixXd num = stabilizing_numerator(ds);
    // Period 1 is intercept-only; period 2 is saturated in T_1.
    const double mean = ds.exposure().col(0).cast<double>().mean();
    CHECK((num.col(0).array() - mean).abs().maxCoeff() < 1e-9);
    double treated[2] = {0, 0}, total[2] = {0, 0};
    for (std::size_t i = 0; i < ds.n(); ++i) {
      total[ds.exposed(i, 0)] += 1;
      treated[ds.exposed(i, 0)] += ds.exposed(i, 1);
    }
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const int prev = ds.exposed(i, 0);
      CHECK(num(static_cast<Eigen::Index>(i), 1) == doctest::Approx(treated[prev] / total[prev]).epsilon(1e-8));
    }
  }
}

TEST_CASE("stabilized weights average to one on simulated data") {
  double truth_mean = 0.0;
  const int datasets = 10;
  for (int seed = 1; seed <= datasets; ++seed) {
    SimConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const SimulatedDataset sim = generate(cfg);
    const SequentialPS ps = fit_sequential(sim.panel, MleMode{});
    const double fitted = stabilized(ps, sim.panel).values.mean();
    CHECK(fitted >= 0.9);
    CHECK(fitted <= 1.1);
    truth_mean += stabilized(sim.e_true, sim.panel).values.mean() / datasets;
  }
  CHECK(std::abs(truth_mean - 1.0) <= 0.05);
}

TEST_CASE("weights match a direct product and respect their bounds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t D = 1 + seed % 5;
    const PanelDataset ds = validate(random_raw(40, D, 1, 1, seed));
    const Eigen::MatrixXd e = random_propensity(40, D, seed + 100);
    const WeightSet w_ipw = ipw(e, ds);
    const WeightSet w_ow = overlap(e, ds);
    for (Eigen::Index i = 0; i < 40; ++i) {
      double observed = 1.0, opposite = 1.0, bound = 1.0;
      for (Eigen::Index t = 0; t < e.cols(); ++t) {
        const bool a = ds.exposure()(i, t) != 0;
        observed *= a ? e(i, t) : 1.0 - e(i, t);
        opposite *= a ? 1.0 - e(i, t) : e(i, t);
        bound *= std::max(e(i, t), 1.0 - e(i, t));
      }
      CHECK(w_ipw.values(i) == doctest::Approx(1.0 / observed).epsilon(1e-12));
      CHECK(w_ow.values(i) == doctest::Approx(opposite).epsilon(1e-12));
      CHECK(w_ipw.values(i) >= 1.0);
      CHECK(w_ow.values(i) > 0.0);
      CHECK(w_ow.values(i) < 1.0);
      CHECK(w_ow.values(i) <= bound * (1 + 1e-12));
    }
  }
}

TEST_CASE("overlap tilt is largest at e = 0.5 in each factor") {
  // OW / IPW = ∏ e(1 − e) does not depend on the observed arm.
  const PanelDataset ds = validate(random_raw(8, 3, 1, 1, 21));
  const Eigen::MatrixXd centre = Eigen::MatrixXd::Constant(8, 3, 0.5);
  auto tilt = [&](const Eigen::MatrixXd& e) {
    return Eigen::VectorXd(overlap(e, ds).values.array() / ipw(e, ds).values.array());
  };
  const Eigen::VectorXd base = tilt(centre);
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(base(i) == doctest::Approx(1.0 / 64.0));
  for (Eigen::Index t = 0; t < 3; ++t) {
    for (double h : {-0.2, -0.01, 0.01, 0.2}) {
      Eigen::MatrixXd moved = centre;
      moved.col(t).array() += h;
      const Eigen::VectorXd w = tilt(moved);
      for (Eigen::Index i = 0; i < 8; ++i) CHECK(w(i) < base(i));
    }
  }
}

TEST_CASE("permuting units permutes weights") {
  const RawPanel raw = random_raw(25, 3, 1, 1, 4);
  const PanelDataset ds = validate(raw);
  const Eigen::MatrixXd e = random_propensity(25, 3, 44);
  std::vector<std::size_t> perm(25);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  const PanelDataset shuffled = ds.gather(perm);
  Eigen::MatrixXd e_perm(25, 3);
  for (Eigen::Index k = 0; k < 25; ++k) e_perm.row(k) = e.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(k)]));
  const Eigen::VectorXd a = ipw(e, ds).values;
  const Eigen::VectorXd b = ipw(e_perm, shuffled).values;
  const Eigen::VectorXd c = overlap(e, ds).values;
  const Eigen::VectorXd d = overlap(e_perm, shuffled).values;
  for (Eigen::Index k = 0; k < 25; ++k) {
    const auto i = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(k)]);
    CHECK(b(k) == a(i));
    CHECK(d(k) == c(i));
  }
}

TEST_CASE("nearest-rank summaries") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  std::shuffle(v.begin(), v.end(), std::mt19937_64(3));
  const WeightSummary s = summarize(v);
  CHECK(s.p75 == 75.0);
  CHECK(s.p95 == 95.0);
  CHECK(s.p99 == 99.0);
  CHECK(s.max == 100.0);
  CHECK(s.data_used == 1.0);
  CHECK(s.top1_share == doctest::Approx(100.0 / 5050.0));

  const std::vector<double> flat(37, 2.5);
  const WeightSummary f = summarize(flat);
  CHECK(f.p75 == 2.5);
  CHECK(f.p95 == 2.5);
  CHECK(f.p99 == 2.5);
  CHECK(f.max == 2.5);

  CHECK(nearest_rank(std::vector<double>{3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(nearest_rank(std::vector<double>{3.0, 1.0, 2.0}, 1.0) == 3.0);
  const std::vector<double> some_zero{0.0, 0.0, 0.5, 1.0};
  CHECK(summarize(some_zero).data_used == 0.5);
}

TEST_CASE("heavy IPW tail on heterogeneous five-period data") {
  std::size_t heavy = 0;
  const std::size_t reps = 50;
  for (std::size_t r = 0; r < reps; ++r) {
    SimConfig cfg;
    cfg.periods = 5;
    cfg.mode = EffectMode::heterogeneous;
    cfg.seed = derive_seed(77, {r});
    const SimulatedDataset sim = generate(cfg);
    const WeightSummary s = weight_summary(ipw(fit_sequential(sim.panel, MleMode{}), sim.panel));
    if (s.max >= 5.0 * s.p99) ++heavy;
  }
  CHECK(heavy * 2 > reps);
}
