#include "tvmsm/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tvmsm/error.hpp"
#include "tvmsm/msm.hpp"
#include "tvmsm/rng.hpp"
#include "tvmsm/weights.hpp"

namespace tvmsm {

namespace {

const char* kModule = "simgen";

}  // namespace

const char* to_string(EffectMode mode) noexcept {
  return mode == EffectMode::heterogeneous ? "heterogeneous" : "homogeneous";
}

EffectMode effect_mode_from_string(const std::string& name) {
  if (name == "homogeneous") return EffectMode::homogeneous;
  if (name == "heterogeneous") return EffectMode::heterogeneous;
  throw Error(Errc::config, kModule, "unknown effect mode '" + name + "'");
}

SimulatedDataset generate(const SimConfig& cfg) {
  if (cfg.n < 1 || cfg.periods < 1) throw Error(Errc::config, kModule, "n and D must be positive");
  const std::size_t n = cfg.n;
  const std::size_t D = cfg.periods;
  const std::size_t pw = cfg.baseline_dim;
  const std::size_t px = cfg.covariate_dim;

  Rng rng(cfg.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  RawPanel raw;
  raw.n = n;
  raw.periods = D;
  raw.baseline_dim = pw;
  raw.covariate_dim = px;
  raw.kind = OutcomeKind::continuous;
  raw.baseline.resize(n * pw);
  raw.timevarying.assign(n * D * px, 0.0);
  raw.exposure.assign(n * D, 0.0);
  raw.outcome.resize(n);

  auto x_at = [&](std::size_t i, std::size_t t, std::size_t r) -> double& {
    return raw.timevarying[(i * D + t) * px + r];
  };
  auto t_at = [&](std::size_t i, std::size_t t) -> double& { return raw.exposure[i * D + t]; };

  for (auto& w : raw.baseline) w = normal(rng);

  Eigen::MatrixXd e_true(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
  const auto& tau = cfg.tau;
  const auto& a = cfg.alpha;
  for (std::size_t t = 0; t < D; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      double eta = a.intercept;
      for (std::size_t j = 0; j < pw; ++j) eta += a.baseline * raw.baseline[i * pw + j];
      for (std::size_t r = 0; r < px; ++r) {
        double mu = 0.0;
        if (t >= 1) mu += tau.tau_t1 * t_at(i, t - 1) + tau.tau_x1 * x_at(i, t - 1, r);
        if (t >= 2) mu += tau.tau_t2 * t_at(i, t - 2) + tau.tau_x2 * x_at(i, t - 2, r);
        const double x = mu + normal(rng);
        x_at(i, t, r) = x;
        eta += a.current * x;
        if (t >= 1) eta += a.lagged * x_at(i, t - 1, r);
      }
      if (t >= 1) eta += a.lag1_exposure * t_at(i, t - 1);
      if (t >= 2) eta += a.lag2_exposure * t_at(i, t - 2);
      const double e = 1.0 / (1.0 + std::exp(-eta));
      e_true(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = e;
      t_at(i, t) = uniform(rng) < e ? 1.0 : 0.0;
    }
  }

  ExposureMatrix exposure(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(D));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < D; ++t) {
      exposure(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
          static_cast<std::uint8_t>(t_at(i, t));
    }
  }
  const ExposureMatrix bins = overlap_bins(e_true, exposure);

  std::vector<std::uint8_t> periods_mixed(n);
  std::vector<std::uint8_t> dgcop(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = bins.row(static_cast<Eigen::Index>(i));
    periods_mixed[i] = static_cast<std::uint8_t>(row.cast<int>().sum());
    dgcop[i] = periods_mixed[i] == D ? 1 : 0;
  }

  const auto& b = cfg.beta;
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t t = 0; t < D; ++t) total += t_at(i, t);
    const double effect = cfg.mode == EffectMode::heterogeneous ? total * dgcop[i] : total;
    double y = b.intercept + b.delta_star * effect;
    for (std::size_t j = 0; j < pw; ++j) y += b.baseline * raw.baseline[i * pw + j];
    for (std::size_t t = 0; t < D; ++t) {
      const double coef = b.covariate_scale / static_cast<double>(D - t);
      for (std::size_t r = 0; r < px; ++r) y += coef * x_at(i, t, r);
    }
    raw.outcome[i] = y + b.noise_sd * normal(rng);
  }

  std::optional<std::vector<std::uint8_t>> membership;
  if (cfg.mode == EffectMode::heterogeneous) membership = std::move(dgcop);
  return SimulatedDataset{validate(std::move(raw)), std::move(e_true), std::move(membership),
                          std::move(periods_mixed)};
}

ExposureMatrix overlap_bins(const Eigen::MatrixXd& e_true, const ExposureMatrix& exposure) {
  const auto n = static_cast<std::size_t>(e_true.rows());
  const Eigen::Index D = e_true.cols();
  ExposureMatrix out(e_true.rows(), D);
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> bin_of(n);
  for (Eigen::Index t = 0; t < D; ++t) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
      const double el = e_true(static_cast<Eigen::Index>(l), t);
      const double er = e_true(static_cast<Eigen::Index>(r), t);
      return el < er || (el == er && l < r);
    });
    std::vector<std::size_t> size(kDgcopBins, 0), treated(kDgcopBins, 0);
    for (std::size_t rank = 0; rank < n; ++rank) {
      const std::size_t unit = order[rank];
      const std::size_t bin = rank * kDgcopBins / n;
      bin_of[unit] = bin;
      ++size[bin];
      treated[bin] += exposure(static_cast<Eigen::Index>(unit), t);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t bin = bin_of[i];
      // Integer form of share ≥ 10%, exact at the boundary for either arm.
      const std::size_t untreated = size[bin] - treated[bin];
      out(static_cast<Eigen::Index>(i), t) =
          treated[bin] * kDgcopShareDenominator >= size[bin] &&
          untreated * kDgcopShareDenominator >= size[bin];
    }
  }
  return out;
}

std::vector<std::uint8_t> compute_dgcop(const Eigen::MatrixXd& e_true, const ExposureMatrix& exposure) {
  const ExposureMatrix bins = overlap_bins(e_true, exposure);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(bins.rows()));
  for (Eigen::Index i = 0; i < bins.rows(); ++i) out[static_cast<std::size_t>(i)] = bins.row(i).minCoeff();
  return out;
}

TrueEstimands true_estimands(const SimConfig& cfg, std::size_t n_oracle, std::uint64_t seed) {
  SimConfig big = cfg;
  big.n = n_oracle;
  big.seed = derive_seed(seed, {stream::oracle});
  const SimulatedDataset sim = generate(big);

  TrueEstimands truth;
  const WeightSet ow = overlap(sim.e_true, sim.panel);
  truth.ow_oracle = fit_weighted(sim.panel, ow.values, MsmSpec{}, Method::ow).beta;
  const double delta_star = cfg.beta.delta_star;
  if (cfg.mode == EffectMode::homogeneous) {
    truth.ate = delta_star;
    truth.ato = delta_star;
    truth.dgcop_share = 1.0;
  } else {
    double members = 0.0;
    for (auto o : *sim.dgcop) members += o;
    truth.dgcop_share = members / static_cast<double>(n_oracle);
    truth.ate = delta_star * truth.dgcop_share;
    truth.ato = truth.ow_oracle;
  }
  return truth;
}

}  // namespace tvmsm
