#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tvmsm/error.hpp"
#include "tvmsm/propensity.hpp"
#include "tvmsm/simgen.hpp"

using namespace tvmsm;
using tvmsm::testing::random_raw;

namespace {

// Scalar Bernoulli log-likelihood, written independently of the library.
double oracle_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double a0, double a1) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double eta = a0 * x(i, 0) + a1 * x(i, 1);
    const double p = 1.0 / (1.0 + std::exp(-eta));
    ll += y(i) > 0.5 ? std::log(p) : std::log1p(-p);
  }
  return ll;
}

Errc code_of_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  try {
    fit_logistic(x, y);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected fit_logistic to throw");
  return Errc::config;
}

}  // namespace

TEST_CASE("design widths and column order") {
  const PanelDataset ds = validate(random_raw(20, 3, 3, 3, 1));
  CHECK(build_design(ds, 0).cols() == 7);
  CHECK(build_design(ds, 1).cols() == 11);
  CHECK(build_design(ds, 2).cols() == 12);
  for (std::size_t t = 0; t < 3; ++t) CHECK(design_width(3, 3, t) == build_design(ds, t).cols());

  const PSDesign d3 = build_design(ds, 2);
  const std::vector<std::string> names{"intercept", "w_1", "w_2", "w_3", "x_3_1", "x_3_2",
                                       "x_3_3",     "x_2_1", "x_2_2", "x_2_3", "t_2", "t_1"};
  CHECK(d3.columns == names);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const auto u = static_cast<std::size_t>(i);
    CHECK(d3.x(i, 0) == 1.0);
    CHECK(d3.x(i, 1) == ds.baseline()(i, 0));
    CHECK(d3.x(i, 4) == ds.covariate(u, 2, 0));
    CHECK(d3.x(i, 9) == ds.covariate(u, 1, 2));
    CHECK(d3.x(i, 10) == ds.exposed(u, 1));
    CHECK(d3.x(i, 11) == ds.exposed(u, 0));
    CHECK(d3.response(i) == ds.exposed(u, 2));
  }
  CHECK_THROWS_AS(build_design(ds, 3), Error);
}

TEST_CASE("single-class response has no MLE") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(10, 1);
  CHECK(code_of_fit(x, Eigen::VectorXd::Zero(10)) == Errc::no_mle);
  CHECK(code_of_fit(x, Eigen::VectorXd::Ones(10)) == Errc::no_mle);
}

TEST_CASE("intercept-only MLE is the logit of the sample mean") {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
  y.head(30).setOnes();
  const PSFit fit = fit_logistic(Eigen::MatrixXd::Ones(100, 1), y);
  const double expected = std::log(30.0 / 70.0);
  CHECK(fit.alpha_mle(0) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(expected == doctest::Approx(-0.8473).epsilon(1e-4));
  // Inverse information for a Bernoulli mean: 1/(n p (1 − p)).
  CHECK(fit.fisher_cov(0, 0) == doctest::Approx(1.0 / (100 * 0.3 * 0.7)).epsilon(1e-8));
}

TEST_CASE("two-parameter MLE matches a grid-search oracle") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> u;
  const Eigen::Index n = 200;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = normal(rng);
    const double p = 1.0 / (1.0 + std::exp(-(-0.4 + 1.1 * x(i, 1))));
    y(i) = u(rng) < p ? 1.0 : 0.0;
  }
  const PSFit fit = fit_logistic(x, y);

  // Successively refined grid search over a coefficient box.
  double c0 = 0.0, c1 = 0.0, half = 4.0;
  for (int level = 0; level < 14; ++level) {
    double best = -INFINITY, b0 = c0, b1 = c1;
    const int steps = 20;
    for (int i = -steps; i <= steps; ++i) {
      for (int j = -steps; j <= steps; ++j) {
        const double a0 = c0 + half * i / steps;
        const double a1 = c1 + half * j / steps;
        const double ll = oracle_loglik(x, y, a0, a1);
        if (ll > best) {
          best = ll;
          b0 = a0;
          b1 = a1;
        }
      }
    }
    c0 = b0;
    c1 = b1;
    half *= 0.25;
  }
  CHECK(std::abs(fit.alpha_mle(0) - c0) < 1e-4);
  CHECK(std::abs(fit.alpha_mle(1) - c1) < 1e-4);
  CHECK(fit.loglik == doctest::Approx(oracle_loglik(x, y, fit.alpha_mle(0), fit.alpha_mle(1))).epsilon(1e-10));
}

TEST_CASE("score vanishes at the MLE and the likelihood never decreases") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimConfig cfg;
    cfg.n = 800;
    cfg.seed = seed;
    const SimulatedDataset sim = generate(cfg);
    for (std::size_t t = 0; t < 3; ++t) {
      const PSDesign d = build_design(sim.panel, t);
      const PSFit fit = fit_mle(d);
      const Eigen::VectorXd score = d.x.transpose() * (d.response - fit.e_mle);
      CHECK(score.cwiseAbs().maxCoeff() < 1e-7);
      for (std::size_t k = 1; k < fit.loglik_trace.size(); ++k) {
        CHECK(fit.loglik_trace[k] >= fit.loglik_trace[k - 1] - 1e-9);
      }
      for (Eigen::Index i = 0; i < fit.e_mle.size(); ++i) {
        CHECK(fit.e_mle(i) > 0.0);
        CHECK(fit.e_mle(i) < 1.0);
      }
      const Eigen::MatrixXd asym = fit.fisher_cov - fit.fisher_cov.transpose();
      CHECK(asym.cwiseAbs().maxCoeff() < 1e-12);
      CHECK(Eigen::LLT<Eigen::MatrixXd>(fit.fisher_cov).info() == Eigen::Success);
    }
  }
}

TEST_CASE("separated and rank-deficient designs are rejected") {
  Eigen::MatrixXd x(40, 2);
  Eigen::VectorXd y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = static_cast<double>(i) - 19.5;
    y(i) = i >= 20 ? 1.0 : 0.0;
  }
  CHECK(code_of_fit(x, y) == Errc::separation);

  Eigen::MatrixXd dup(40, 3);
  dup << x, x.col(1) * 2.0;
  y(0) = 1.0;
  CHECK(code_of_fit(dup, y) == Errc::rank_deficient);
}

TEST_CASE("predicted probabilities") {
  Eigen::MatrixXd x(3, 2);
  x << 1, 0.3, 1, -2.0, 1, 5.0;
  const Eigen::VectorXd half = predict_ps(Eigen::VectorXd::Zero(2), x);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(half(i) == 0.5);

  Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  CHECK(predict_ps(Eigen::VectorXd::Constant(1, 0.8473), one)(0) == doctest::Approx(0.7).epsilon(1e-4));
  CHECK(predict_ps(Eigen::VectorXd::Constant(1, -50.0), one)(0) == kProbabilityFloor);
  CHECK(predict_ps(Eigen::VectorXd::Constant(1, 50.0), one)(0) == 1.0 - kProbabilityFloor);
  CHECK_THROWS_AS(predict_ps(Eigen::VectorXd::Zero(3), x), Error);
}

TEST_CASE("shifting the linear predictor by c and back leaves predictions unchanged") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(50, 3);
  for (Eigen::Index i = 0; i < 50; ++i) x.row(i) << 1.0, normal(rng), normal(rng);
  const Eigen::Vector3d alpha(0.2, -0.7, 1.3);
  for (double c : {-3.0, 0.5, 10.0}) {
    Eigen::MatrixXd xc(50, 4);
    xc << x, Eigen::VectorXd::Ones(50);
    Eigen::Vector4d ac(alpha(0) + c, alpha(1), alpha(2), -c);
    const Eigen::VectorXd diff = predict_ps(ac, xc) - predict_ps(alpha, x);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("posterior sampling") {
  SimConfig cfg;
  cfg.n = 600;
  cfg.seed = 4;
  const SimulatedDataset sim = generate(cfg);
  const PSDesign d = build_design(sim.panel, 1);

  SUBCASE("one draw gives valid probabilities") {
    const PSFit fit = sample_posterior(d, 1, 99);
    REQUIRE(fit.posterior_draws->rows() == 1);
    const Eigen::VectorXd e = predict_ps(fit.posterior_draws->row(0).transpose(), d);
    CHECK(e.minCoeff() > 0.0);
    CHECK(e.maxCoeff() < 1.0);
  }
  SUBCASE("same seed, same draws") {
    const PSFit a = sample_posterior(d, 50, 7);
    const PSFit b = sample_posterior(d, 50, 7);
    const PSFit c = sample_posterior(d, 50, 8);
    CHECK(*a.posterior_draws == *b.posterior_draws);
    CHECK(*a.posterior_draws != *c.posterior_draws);
    CHECK(*a.acceptance_rate > 0.0);
    CHECK(*a.acceptance_rate < 1.0);
  }
}

TEST_CASE("flat-prior posterior mean matches the MLE at large n") {
  const Eigen::Index n = 10000;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; i += 2) y(i) = 1.0;
  PSDesign d;
  d.x = Eigen::MatrixXd::Ones(n, 1);
  d.response = y;
  const std::size_t K = 6000;
  const PSFit fit = sample_posterior(d, K, 31);
  const Eigen::VectorXd draws = fit.posterior_draws->col(0);

  // Batch-means Monte Carlo SE.
  const std::size_t batches = 30;
  const std::size_t size = K / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t k = 0; k < size; ++k) means[b] += draws(static_cast<Eigen::Index>(b * size + k));
    means[b] /= static_cast<double>(size);
  }
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= batches;
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  const double mc_se = std::sqrt(ss / (batches - 1) / batches);
  CHECK(std::abs(grand - 0.0) < 3.0 * mc_se);
  // Posterior SD ≈ 1/sqrt(n p (1 − p)) = 0.02.
  double var = 0.0;
  for (Eigen::Index k = 0; k < draws.size(); ++k) var += (draws(k) - grand) * (draws(k) - grand);
  CHECK(std::sqrt(var / static_cast<double>(K - 1)) == doctest::Approx(0.02).epsilon(0.15));
}

TEST_CASE("sequential fits") {
  SUBCASE("one period reduces to a single fit") {
    SimConfig cfg;
    cfg.n = 500;
    cfg.periods = 1;
    const SimulatedDataset sim = generate(cfg);
    const SequentialPS ps = fit_sequential(sim.panel, MleMode{});
    REQUIRE(ps.periods() == 1);
    const PSFit direct = fit_mle(build_design(sim.panel, 0));
    CHECK(ps.fits[0].alpha_mle == direct.alpha_mle);
    CHECK(ps.propensity().col(0) == direct.e_mle);
  }
  SUBCASE("posterior mode carries a K × p draw matrix per time point") {
    SimConfig cfg;
    cfg.n = 500;
    const SimulatedDataset sim = generate(cfg);
    const SequentialPS ps = fit_sequential(sim.panel, PosteriorMode{10, 3, {}});
    CHECK(ps.has_posterior());
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(ps.fits[t].posterior_draws->rows() == 10);
      CHECK(static_cast<std::size_t>(ps.fits[t].posterior_draws->cols()) == design_width(3, 3, t));
    }
  }
  SUBCASE("results do not depend on the thread count") {
    SimConfig cfg;
    cfg.n = 400;
    const SimulatedDataset sim = generate(cfg);
    const SequentialPS a = fit_sequential(sim.panel, PosteriorMode{30, 9, {}}, {}, 1);
    const SequentialPS b = fit_sequential(sim.panel, PosteriorMode{30, 9, {}}, {}, 3);
    for (std::size_t t = 0; t < 3; ++t) CHECK(*a.fits[t].posterior_draws == *b.fits[t].posterior_draws);
  }
  SUBCASE("failures name the time point") {
    RawPanel raw = random_raw(30, 2, 1, 1, 5);
    for (std::size_t i = 0; i < 30; ++i) raw.exposure[i * 2 + 1] = 1.0;
    try {
      fit_sequential(validate(raw), MleMode{});
      FAIL("expected a failure");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::no_mle);
      CHECK(e.message().rfind("time 2:", 0) == 0);
    }
  }
}

TEST_CASE("refitting simulated data recovers the generating coefficients") {
  SimConfig cfg;
  cfg.n = 5000;
  cfg.seed = 17;
  const SimulatedDataset sim = generate(cfg);
  const SequentialPS ps = fit_sequential(sim.panel, MleMode{});
  const auto& a = cfg.alpha;
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<double> truth{a.intercept, a.baseline, a.baseline, a.baseline, a.current, a.current, a.current};
    if (t >= 1) truth.insert(truth.end(), {a.lagged, a.lagged, a.lagged, a.lag1_exposure});
    if (t >= 2) truth.push_back(a.lag2_exposure);
    const PSFit& fit = ps.fits[t];
    REQUIRE(static_cast<std::size_t>(fit.alpha_mle.size()) == truth.size());
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const auto k = static_cast<Eigen::Index>(j);
      const double z = (fit.alpha_mle(k) - truth[j]) / std::sqrt(fit.fisher_cov(k, k));
      CAPTURE(t);
      CAPTURE(j);
      CHECK(std::abs(z) < 3.0);
    }
  }
}
