#pragma once

#include <memory>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "tvmsm/panel.hpp"
#include "tvmsm/propensity.hpp"

namespace tvmsm {

enum class Scheme { ipw, sw, ow };

const char* to_string(Scheme scheme) noexcept;

struct WeightSet {
  Scheme scheme = Scheme::ipw;
  Eigen::VectorXd values;
  // n × D propensity matrix the weights were built from.
  std::shared_ptr<const Eigen::MatrixXd> propensity;
};

// ∏_t 1/P(observed arm).
WeightSet ipw(const Eigen::MatrixXd& propensity, const PanelDataset& ds);
WeightSet ipw(const SequentialPS& ps, const PanelDataset& ds);

// ∏_t P(observed arm | treatment history) / P(observed arm | full history).
// The numerator model is a logistic regression of T_t on an intercept,
// T_{t-1} and T_{t-2}, with undefined lags dropped.
WeightSet stabilized(const Eigen::MatrixXd& propensity, const PanelDataset& ds,
                     const MleOptions& mle = {});
WeightSet stabilized(const SequentialPS& ps, const PanelDataset& ds, const MleOptions& mle = {});

// n × D numerator probabilities P(T_t = 1 | T_{t-1}, T_{t-2}).
Eigen::MatrixXd stabilizing_numerator(const PanelDataset& ds, const MleOptions& mle = {});

// ∏_t P(opposite arm).
WeightSet overlap(const Eigen::MatrixXd& propensity, const PanelDataset& ds);
WeightSet overlap(const SequentialPS& ps, const PanelDataset& ds);

struct WeightSummary {
  double p75 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
  // Share of units with a positive value: 1 for every weighting scheme, the
  // ever-used fraction for PPTA inclusion probabilities.
  double data_used = 0.0;
  // Share of the total held by the largest 1% of units (at least one unit).
  double top1_share = 0.0;
};

// Nearest-rank percentile: the ⌈q·n⌉-th smallest value, q in (0, 1].
double nearest_rank(std::span<const double> values, double q);

WeightSummary summarize(std::span<const double> values);
WeightSummary weight_summary(const WeightSet& ws);

}  // namespace tvmsm
