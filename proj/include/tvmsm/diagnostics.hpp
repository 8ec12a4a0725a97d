#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tvmsm/msm.hpp"
#include "tvmsm/panel.hpp"
#include "tvmsm/ppta.hpp"
#include "tvmsm/weights.hpp"

namespace tvmsm {

// id,weight
void write_weights_csv(std::ostream& out, const WeightSet& ws, const PanelDataset& ds);

struct WeightComparisonRow {
  std::string id;
  double log_ipw = 0.0;
  double ow = 0.0;
  std::optional<int> dgcop_count;  // time points spent in a mixed bin
};

std::vector<WeightComparisonRow> weight_comparison(const PanelDataset& ds, const Eigen::MatrixXd& propensity,
                                                   std::span<const std::uint8_t> dgcop_periods = {});

// id,log_ipw,ow,dgcop_count (NA when unknown)
void export_weight_comparison(std::ostream& out, std::span<const WeightComparisonRow> rows);

struct WeightTable {
  std::vector<std::string> columns;
  std::vector<WeightSummary> summaries;
};

// Weight distribution table with one column per scheme; PPTA contributes its
// marginal inclusion probabilities.
WeightTable weight_table(std::span<const WeightSet> sets, const PptaRun* ppta = nullptr);

// statistic,<column>... with rows p75, p95, p99, max, data_used, top1_share.
void write_weight_table_csv(std::ostream& out, const WeightTable& table);

// "1.07 [0.98, 1.22]"; the interval is omitted when absent.
std::string format_effect(const EffectEstimate& estimate, int decimals = 2);

// method,estimate
void write_effect_table_csv(std::ostream& out, std::span<const EffectEstimate> estimates);

struct PositivityRow {
  std::size_t time = 0;  // 1-based
  double min = 0.0;
  double max = 0.0;
  double below_005 = 0.0;  // share of units with e < 0.05
  double above_095 = 0.0;  // share with e > 0.95
  double treated = 0.0;    // share exposed
};

std::vector<PositivityRow> positivity(const Eigen::MatrixXd& propensity, const PanelDataset& ds);
void write_positivity_csv(std::ostream& out, std::span<const PositivityRow> rows);

// pattern,sum,count
void write_pattern_census_csv(std::ostream& out, const PanelDataset& ds);

// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace tvmsm
