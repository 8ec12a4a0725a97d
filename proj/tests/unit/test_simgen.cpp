#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tvmsm/msm.hpp"
#include "tvmsm/simgen.hpp"
#include "tvmsm/weights.hpp"

using namespace tvmsm;

namespace {

// Straight re-derivation of the binning rule: sort by e (index breaks ties),
// cut into 20 consecutive groups of ⌊rank·20/n⌋, compare both shares to 10%.
ExposureMatrix bins_oracle(const Eigen::MatrixXd& e, const ExposureMatrix& exposure) {
  const auto n = static_cast<std::size_t>(e.rows());
  ExposureMatrix out(e.rows(), e.cols());
  for (Eigen::Index t = 0; t < e.cols(); ++t) {
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t i = 0; i < n; ++i) keyed.emplace_back(e(static_cast<Eigen::Index>(i), t), i);
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::vector<std::size_t>> groups(20);
    for (std::size_t r = 0; r < n; ++r) groups[r * 20 / n].push_back(keyed[r].second);
    for (const auto& g : groups) {
      double treated = 0.0;
      for (std::size_t i : g) treated += exposure(static_cast<Eigen::Index>(i), t);
      const double share = treated / static_cast<double>(g.size());
      const bool mixed = share >= 0.1 - 1e-12 && (1.0 - share) >= 0.1 - 1e-12;
      for (std::size_t i : g) out(static_cast<Eigen::Index>(i), t) = mixed;
    }
  }
  return out;
}

SimConfig null_config(std::size_t n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.alpha = TrueExposureModel{0, 0, 0, 0, 0, 0};
  return cfg;
}

}  // namespace

TEST_CASE("null exposure model gives constant one-half") {
  const SimulatedDataset sim = generate(null_config(500, 1));
  CHECK((sim.e_true.array() == 0.5).all());
}

TEST_CASE("first-period exposure is balanced") {
  SimConfig cfg;
  cfg.n = 20000;
  cfg.seed = 2;
  const SimulatedDataset sim = generate(cfg);
  const double mean = sim.panel.exposure().col(0).cast<double>().mean();
  CHECK(std::abs(mean - 0.5) < 0.02);
  CHECK(sim.panel.n() == 20000);
  CHECK(sim.panel.periods() == 3);
  CHECK(sim.panel.baseline_dim() == 3);
  CHECK(sim.panel.covariate_dim() == 3);
}

TEST_CASE("true scores match the exposure model") {
  SimConfig cfg;
  cfg.n = 50;
  cfg.seed = 3;
  const SimulatedDataset sim = generate(cfg);
  const auto& ds = sim.panel;
  const auto& a = cfg.alpha;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t t = 0; t < 3; ++t) {
      double eta = a.intercept;
      for (std::size_t j = 0; j < 3; ++j) eta += a.baseline * ds.baseline()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      for (std::size_t r = 0; r < 3; ++r) {
        eta += a.current * ds.covariate(i, t, r);
        if (t >= 1) eta += a.lagged * ds.covariate(i, t - 1, r);
      }
      if (t >= 1) eta += a.lag1_exposure * ds.exposed(i, t - 1);
      if (t >= 2) eta += a.lag2_exposure * ds.exposed(i, t - 2);
      CHECK(sim.e_true(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) ==
            doctest::Approx(1.0 / (1.0 + std::exp(-eta))).epsilon(1e-12));
    }
  }
}

TEST_CASE("effect is recovered without feedback") {
  SUBCASE("randomized exposure, unweighted fit") {
    SimConfig cfg = null_config(100000, 4);
    cfg.tau = CovariateDynamics{0, 0, 0, 0};
    const SimulatedDataset sim = generate(cfg);
    const EffectEstimate e = fit_weighted(sim.panel, Eigen::VectorXd::Ones(100000), MsmSpec{});
    CHECK(std::abs(e.delta - 0.5) < 0.02);
  }
  SUBCASE("confounded exposure, overlap weights from the true scores") {
    SimConfig cfg;
    cfg.n = 200000;
    cfg.seed = 5;
    // Without exposure feedback the overlap tilt depends on covariates only,
    // and those are independent of the exposure path.
    cfg.tau = CovariateDynamics{0, 0, 0, 0};
    cfg.alpha.lag1_exposure = 0.0;
    cfg.alpha.lag2_exposure = 0.0;
    const SimulatedDataset sim = generate(cfg);
    const EffectEstimate e = fit_weighted(sim.panel, overlap(sim.e_true, sim.panel).values, MsmSpec{});
    CHECK(std::abs(e.delta - 0.5) < 0.02);
    const EffectEstimate naive = fit_weighted(sim.panel, Eigen::VectorXd::Ones(200000), MsmSpec{});
    CHECK(std::abs(naive.delta - 0.5) > 0.05);
  }
}

TEST_CASE("regeneration is bit-exact") {
  SimConfig cfg;
  cfg.n = 300;
  cfg.seed = 42;
  cfg.mode = EffectMode::heterogeneous;
  const SimulatedDataset a = generate(cfg);
  const SimulatedDataset b = generate(cfg);
  CHECK(a.panel.outcome() == b.panel.outcome());
  CHECK(a.panel.timevarying() == b.panel.timevarying());
  CHECK(a.panel.exposure() == b.panel.exposure());
  CHECK(a.e_true == b.e_true);
  CHECK(*a.dgcop == *b.dgcop);
  cfg.seed = 43;
  CHECK(generate(cfg).panel.outcome() != a.panel.outcome());
}

TEST_CASE("membership indicator only in heterogeneous mode") {
  SimConfig cfg;
  cfg.n = 400;
  CHECK_FALSE(generate(cfg).dgcop.has_value());
  cfg.mode = EffectMode::heterogeneous;
  const SimulatedDataset sim = generate(cfg);
  REQUIRE(sim.dgcop);
  CHECK(*sim.dgcop == compute_dgcop(sim.e_true, sim.panel.exposure()));
  for (std::size_t i = 0; i < 400; ++i) CHECK(((*sim.dgcop)[i] == 1) == (sim.dgcop_periods[i] == 3));
}

TEST_CASE("heterogeneous outcomes differ only through members' effect") {
  SimConfig cfg;
  cfg.n = 500;
  cfg.seed = 8;
  const SimulatedDataset homo = generate(cfg);
  cfg.mode = EffectMode::heterogeneous;
  const SimulatedDataset het = generate(cfg);
  for (std::size_t i = 0; i < 500; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double expected = (*het.dgcop)[i] ? 0.0 : 0.5 * homo.panel.exposure_total()(r);
    CHECK(homo.panel.outcome()(r) - het.panel.outcome()(r) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("overlap bins agree with a direct re-derivation") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (std::size_t n : {20u, 57u, 1000u}) {
      SimConfig cfg;
      cfg.n = n;
      cfg.seed = seed;
      const SimulatedDataset sim = generate(cfg);
      CHECK(overlap_bins(sim.e_true, sim.panel.exposure()) == bins_oracle(sim.e_true, sim.panel.exposure()));
    }
  }
}

TEST_CASE("bins hold n/20 units and the 10% boundary is inclusive") {
  const std::size_t n = 1013;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  Eigen::MatrixXd e(n, 1);
  for (std::size_t i = 0; i < n; ++i) e(static_cast<Eigen::Index>(i), 0) = u(rng);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](auto l, auto r) { return e(static_cast<Eigen::Index>(l), 0) < e(static_cast<Eigen::Index>(r), 0); });
  std::vector<std::vector<std::size_t>> bins(20);
  for (std::size_t r = 0; r < n; ++r) bins[r * 20 / n].push_back(order[r]);
  // Five treated per bin: exactly 10% of a 50-unit bin, short of it in a 51-unit bin.
  ExposureMatrix t = ExposureMatrix::Zero(n, 1);
  for (const auto& bin : bins) {
    CHECK(bin.size() >= n / 20);
    CHECK(bin.size() <= n / 20 + 1);
    for (std::size_t k = 0; k < 5; ++k) t(static_cast<Eigen::Index>(bin[k]), 0) = 1;
  }
  const ExposureMatrix o = overlap_bins(e, t);
  for (const auto& bin : bins) {
    for (std::size_t i : bin) CHECK(o(static_cast<Eigen::Index>(i), 0) == (bin.size() == 50 ? 1 : 0));
  }
  t.setZero();
  CHECK(overlap_bins(e, t).cast<int>().sum() == 0);
}

TEST_CASE("all one-half scores with balanced exposure keep everyone") {
  const std::size_t n = 2000;
  Eigen::MatrixXd e = Eigen::MatrixXd::Constant(n, 3, 0.5);
  ExposureMatrix t(n, 3);
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = coin(rng);
  const auto o = compute_dgcop(e, t);
  CHECK(std::all_of(o.begin(), o.end(), [](auto v) { return v == 1; }));
}

TEST_CASE("perfectly separated exposure empties the extreme bins") {
  const std::size_t n = 1000;
  Eigen::MatrixXd e(n, 1);
  ExposureMatrix t(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    e(static_cast<Eigen::Index>(i), 0) = (static_cast<double>(i) + 0.5) / n;
    t(static_cast<Eigen::Index>(i), 0) = e(static_cast<Eigen::Index>(i), 0) > 0.5;
  }
  const auto o = compute_dgcop(e, t);
  CHECK(std::accumulate(o.begin(), o.end(), 0) == 0);
  for (std::size_t i = 0; i < 50; ++i) CHECK(o[i] == 0);
  for (std::size_t i = 950; i < n; ++i) CHECK(o[i] == 0);
}

TEST_CASE("homogeneous truth equals the structural effect") {
  SimConfig cfg;
  const TrueEstimands t = true_estimands(cfg, 20000, 1);
  CHECK(t.ate == 0.5);
  CHECK(t.ato == 0.5);
  CHECK(t.dgcop_share == 1.0);
  cfg.mode = EffectMode::heterogeneous;
  const TrueEstimands h = true_estimands(cfg, 20000, 1);
  CHECK(h.ate == doctest::Approx(0.5 * h.dgcop_share));
  CHECK(h.ato == h.ow_oracle);
  CHECK(h.dgcop_share > 0.0);
  CHECK(h.dgcop_share < 1.0);
}

TEST_CASE("mode names") {
  CHECK(effect_mode_from_string("heterogeneous") == EffectMode::heterogeneous);
  CHECK(std::string(to_string(EffectMode::homogeneous)) == "homogeneous");
}
