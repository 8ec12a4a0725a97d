#include "tvmsm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "tvmsm/error.hpp"

namespace tvmsm {

namespace {

const char* kModule = "diagnostics";

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

void write_weights_csv(std::ostream& out, const WeightSet& ws, const PanelDataset& ds) {
  if (static_cast<std::size_t>(ws.values.size()) != ds.n()) {
    throw Error(Errc::config, kModule, "weight vector length does not match the panel");
  }
  out << "id,weight\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out << ds.ids()[i] << ',' << format_double(ws.values(static_cast<Eigen::Index>(i))) << '\n';
  }
}

std::vector<WeightComparisonRow> weight_comparison(const PanelDataset& ds, const Eigen::MatrixXd& propensity,
                                                   std::span<const std::uint8_t> dgcop_periods) {
  if (!dgcop_periods.empty() && dgcop_periods.size() != ds.n()) {
    throw Error(Errc::config, kModule, "DGCOP counts do not match the panel");
  }
  const WeightSet w_ipw = ipw(propensity, ds);
  const WeightSet w_ow = overlap(propensity, ds);
  std::vector<WeightComparisonRow> rows(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    rows[i].id = ds.ids()[i];
    rows[i].log_ipw = std::log(w_ipw.values(r));
    rows[i].ow = w_ow.values(r);
    if (!dgcop_periods.empty()) rows[i].dgcop_count = dgcop_periods[i];
  }
  return rows;
}

void export_weight_comparison(std::ostream& out, std::span<const WeightComparisonRow> rows) {
  out << "id,log_ipw,ow,dgcop_count\n";
  for (const auto& r : rows) {
    out << r.id << ',' << format_double(r.log_ipw) << ',' << format_double(r.ow) << ','
        << (r.dgcop_count ? std::to_string(*r.dgcop_count) : std::string("NA")) << '\n';
  }
}

WeightTable weight_table(std::span<const WeightSet> sets, const PptaRun* ppta) {
  WeightTable table;
  for (const auto& ws : sets) {
    table.columns.emplace_back(to_string(ws.scheme));
    table.summaries.push_back(weight_summary(ws));
  }
  if (ppta) {
    table.columns.emplace_back("PPTA");
    const auto& p = ppta->marginal_inclusion;
    table.summaries.push_back(summarize(std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))));
  }
  return table;
}

void write_weight_table_csv(std::ostream& out, const WeightTable& table) {
  out << "statistic";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  const std::pair<const char*, double WeightSummary::*> rows[] = {
      {"p75", &WeightSummary::p75},           {"p95", &WeightSummary::p95},
      {"p99", &WeightSummary::p99},           {"max", &WeightSummary::max},
      {"data_used", &WeightSummary::data_used}, {"top1_share", &WeightSummary::top1_share}};
  for (const auto& [name, field] : rows) {
    out << name;
    for (const auto& s : table.summaries) out << ',' << format_double(s.*field);
    out << '\n';
  }
}

std::string format_effect(const EffectEstimate& estimate, int decimals) {
  std::string s = fixed(estimate.delta, decimals);
  if (estimate.ci95) {
    s += " [" + fixed(estimate.ci95->low, decimals) + ", " + fixed(estimate.ci95->high, decimals) + "]";
  }
  return s;
}

void write_effect_table_csv(std::ostream& out, std::span<const EffectEstimate> estimates) {
  out << "method,estimate\n";
  for (const auto& e : estimates) out << to_string(e.method) << ",\"" << format_effect(e) << "\"\n";
}

std::vector<PositivityRow> positivity(const Eigen::MatrixXd& propensity, const PanelDataset& ds) {
  if (static_cast<std::size_t>(propensity.rows()) != ds.n() ||
      static_cast<std::size_t>(propensity.cols()) != ds.periods()) {
    throw Error(Errc::config, kModule, "propensity matrix shape does not match the panel");
  }
  std::vector<PositivityRow> rows;
  const double n = static_cast<double>(ds.n());
  for (Eigen::Index t = 0; t < propensity.cols(); ++t) {
    const auto col = propensity.col(t).array();
    PositivityRow row;
    row.time = static_cast<std::size_t>(t) + 1;
    row.min = col.minCoeff();
    row.max = col.maxCoeff();
    row.below_005 = static_cast<double>((col < 0.05).count()) / n;
    row.above_095 = static_cast<double>((col > 0.95).count()) / n;
    row.treated = ds.exposure().col(t).cast<double>().sum() / n;
    rows.push_back(row);
  }
  return rows;
}

void write_positivity_csv(std::ostream& out, std::span<const PositivityRow> rows) {
  out << "time,min_ps,max_ps,share_below_0.05,share_above_0.95,share_exposed\n";
  for (const auto& r : rows) {
    out << r.time << ',' << format_double(r.min) << ',' << format_double(r.max) << ',' << format_double(r.below_005)
        << ',' << format_double(r.above_095) << ',' << format_double(r.treated) << '\n';
  }
}

void write_pattern_census_csv(std::ostream& out, const PanelDataset& ds) {
  out << "pattern,sum,count\n";
  for (const auto& row : pattern_census(ds)) {
    for (auto b : row.pattern.bits) out << static_cast<int>(b);
    out << ',' << row.pattern.sum << ',' << row.units << '\n';
  }
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(Errc::config, kModule, "rank correlation needs two equal-length vectors of length ≥ 2");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = 0.5 * static_cast<double>(x.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace tvmsm
