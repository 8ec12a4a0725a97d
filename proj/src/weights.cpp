#include "tvmsm/weights.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "tvmsm/error.hpp"

namespace tvmsm {

namespace {

const char* kModule = "weights";

void check_shape(const Eigen::MatrixXd& e, const PanelDataset& ds) {
  if (static_cast<std::size_t>(e.rows()) != ds.n() ||
      static_cast<std::size_t>(e.cols()) != ds.periods()) {
    throw Error(Errc::config, kModule, "propensity matrix shape does not match the panel");
  }
}

// Probability of the observed arm at (i, t).
inline double observed_arm(double e, int exposed) { return exposed ? e : 1.0 - e; }

double rank_value(const std::vector<double>& sorted, double q) {
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
  return sorted[std::clamp<std::size_t>(rank, 1, n) - 1];
}

}  // namespace

const char* to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::ipw: return "IPW";
    case Scheme::sw: return "SW";
    case Scheme::ow: return "OW";
  }
  return "?";
}

WeightSet ipw(const Eigen::MatrixXd& propensity, const PanelDataset& ds) {
  check_shape(propensity, ds);
  WeightSet ws{Scheme::ipw, Eigen::VectorXd::Ones(propensity.rows()),
               std::make_shared<const Eigen::MatrixXd>(propensity)};
  for (Eigen::Index i = 0; i < propensity.rows(); ++i) {
    for (Eigen::Index t = 0; t < propensity.cols(); ++t) {
      ws.values(i) /= observed_arm(propensity(i, t), ds.exposure()(i, t));
    }
  }
  return ws;
}

WeightSet ipw(const SequentialPS& ps, const PanelDataset& ds) { return ipw(ps.propensity(), ds); }

Eigen::MatrixXd stabilizing_numerator(const PanelDataset& ds, const MleOptions& mle) {
  const auto n = static_cast<Eigen::Index>(ds.n());
  Eigen::MatrixXd numerator(n, static_cast<Eigen::Index>(ds.periods()));
  for (std::size_t t = 0; t < ds.periods(); ++t) {
    const auto lags = static_cast<Eigen::Index>(std::min<std::size_t>(t, 2));
    Eigen::MatrixXd x(n, 1 + lags);
    x.col(0).setOnes();
    for (Eigen::Index l = 1; l <= lags; ++l) {
      x.col(l) = ds.exposure().col(static_cast<Eigen::Index>(t) - l).cast<double>();
    }
    const Eigen::VectorXd y = ds.exposure().col(static_cast<Eigen::Index>(t)).cast<double>();
    try {
      numerator.col(static_cast<Eigen::Index>(t)) = fit_logistic(x, y, mle).e_mle;
    } catch (const Error& e) {
      throw Error(e.code(), kModule,
                  "stabilizing numerator at time " + std::to_string(t + 1) + ": " + e.message());
    }
  }
  return numerator;
}

WeightSet stabilized(const Eigen::MatrixXd& propensity, const PanelDataset& ds,
                     const MleOptions& mle) {
  check_shape(propensity, ds);
  const Eigen::MatrixXd numerator = stabilizing_numerator(ds, mle);
  WeightSet ws{Scheme::sw, Eigen::VectorXd::Ones(propensity.rows()),
               std::make_shared<const Eigen::MatrixXd>(propensity)};
  for (Eigen::Index i = 0; i < propensity.rows(); ++i) {
    for (Eigen::Index t = 0; t < propensity.cols(); ++t) {
      const int a = ds.exposure()(i, t);
      ws.values(i) *= observed_arm(numerator(i, t), a) / observed_arm(propensity(i, t), a);
    }
  }
  return ws;
}

WeightSet stabilized(const SequentialPS& ps, const PanelDataset& ds, const MleOptions& mle) {
  return stabilized(ps.propensity(), ds, mle);
}

WeightSet overlap(const Eigen::MatrixXd& propensity, const PanelDataset& ds) {
  check_shape(propensity, ds);
  WeightSet ws{Scheme::ow, Eigen::VectorXd::Ones(propensity.rows()),
               std::make_shared<const Eigen::MatrixXd>(propensity)};
  for (Eigen::Index i = 0; i < propensity.rows(); ++i) {
    for (Eigen::Index t = 0; t < propensity.cols(); ++t) {
      ws.values(i) *= 1.0 - observed_arm(propensity(i, t), ds.exposure()(i, t));
    }
  }
  return ws;
}

WeightSet overlap(const SequentialPS& ps, const PanelDataset& ds) {
  return overlap(ps.propensity(), ds);
}

double nearest_rank(std::span<const double> values, double q) {
  if (values.empty()) throw Error(Errc::config, kModule, "percentile of an empty vector");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return rank_value(sorted, q);
}

WeightSummary summarize(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::config, kModule, "summary of an empty weight vector");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  WeightSummary s;
  s.p75 = rank_value(sorted, 0.75);
  s.p95 = rank_value(sorted, 0.95);
  s.p99 = rank_value(sorted, 0.99);
  s.max = sorted.back();
  s.data_used = static_cast<double>(std::count_if(sorted.begin(), sorted.end(),
                                                  [](double v) { return v > 0.0; })) /
                static_cast<double>(n);
  const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  const std::size_t top = std::max<std::size_t>(1, n / 100);
  const double top_total = std::accumulate(sorted.end() - static_cast<std::ptrdiff_t>(top), sorted.end(), 0.0);
  s.top1_share = total > 0.0 ? top_total / total : 0.0;
  return s;
}

WeightSummary weight_summary(const WeightSet& ws) {
  return summarize(std::span<const double>(ws.values.data(), static_cast<std::size_t>(ws.values.size())));
}

}  // namespace tvmsm
