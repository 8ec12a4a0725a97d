#include "tvmsm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <spdlog/spdlog.h>

#include "tvmsm/bootstrap.hpp"
#include "tvmsm/error.hpp"
#include "tvmsm/parallel.hpp"
#include "tvmsm/pipeline.hpp"
#include "tvmsm/rng.hpp"

namespace tvmsm {

namespace {

const char* kModule = "harness";

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = v.size();
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

std::optional<std::size_t> position(const std::vector<Method>& methods, Method m) {
  const auto it = std::find(methods.begin(), methods.end(), m);
  if (it == methods.end()) return std::nullopt;
  return static_cast<std::size_t>(it - methods.begin());
}

SimConfig sim_config(const StudyConfig& study) {
  SimConfig cfg;
  cfg.n = study.n;
  cfg.periods = study.periods;
  cfg.mode = study.mode;
  return cfg;
}

}  // namespace

StudyConfig StudyConfig::full_scale(EffectMode mode, std::size_t periods) {
  StudyConfig s;
  s.mode = mode;
  s.periods = periods;
  s.replicates = 250;
  s.draws = 1500;
  s.resamples = 100;
  return s;
}

const MethodCell* ReplicationReport::cell(Method method) const {
  for (const auto& c : cells) {
    if (c.method == method) return &c;
  }
  return nullptr;
}

double target_of(const TrueEstimands& truth, Method method) noexcept {
  return estimand_of(method) == Estimand::ato ? truth.ato : truth.ate;
}

ReplicateRecord run_replicate(const StudyConfig& study, std::size_t r) {
  ReplicateRecord rec;
  rec.index = r;
  rec.estimates.resize(study.methods.size());
  const std::uint64_t rep_seed = derive_seed(study.seed, {stream::replicate, r});
  try {
    SimConfig cfg = sim_config(study);
    cfg.seed = rep_seed;
    const SimulatedDataset sim = generate(cfg);
    if (sim.dgcop) {
      double members = 0.0;
      for (auto o : *sim.dgcop) members += o;
      rec.dgcop_share = members / static_cast<double>(study.n);
    }

    EstimatorOptions opts;
    opts.ppta.draws = study.draws;
    opts.ppta.min_cos = study.min_cos;
    const PipelineResult result = run_pipeline(sim.panel, study.methods, opts, derive_seed(rep_seed, {stream::pipeline}));
    for (std::size_t m = 0; m < study.methods.size(); ++m) {
      if (!result.estimates[m]) {
        const Error& err = *result.failures[m];
        throw Error(err.code(), err.module(), std::string(to_string(study.methods[m])) + ": " + err.message());
      }
      rec.estimates[m] = result.estimates[m];
    }
    if (result.ppta) {
      rec.cos_size_mean = result.ppta->cos_size_mean;
      rec.cos_size_sd = result.ppta->cos_size_sd;
      rec.ever_used_fraction = result.ppta->ever_used_fraction;
      rec.ppta_skipped = result.ppta->skipped;
    }

    if (study.resamples > 0) {
      const auto& wanted = study.bootstrap_methods.empty() ? study.methods : study.bootstrap_methods;
      std::vector<EffectEstimate> points;
      std::vector<std::size_t> slots;
      for (Method m : wanted) {
        const auto slot = position(study.methods, m);
        if (!slot) throw Error(Errc::config, kModule, std::string("bootstrap method ") + to_string(m) + " is not analyzed");
        points.push_back(*rec.estimates[*slot]);
        slots.push_back(*slot);
      }
      BootstrapOptions boot;
      boot.resamples = study.resamples;
      const auto results = bootstrap_effects(sim.panel, points, opts, boot, derive_seed(rep_seed, {stream::resample}));
      for (std::size_t j = 0; j < results.size(); ++j) {
        rec.estimates[slots[j]] = apply_bootstrap(*rec.estimates[slots[j]], results[j]);
      }
    }
  } catch (const Error& err) {
    rec.failure = err.what();
    for (auto& e : rec.estimates) e.reset();
    rec.cos_size_mean.reset();
    rec.cos_size_sd.reset();
    rec.ever_used_fraction.reset();
  }
  return rec;
}

TrueEstimands study_truth(const StudyConfig& study, std::optional<double>* oracle_gap) {
  const SimConfig cfg = sim_config(study);
  if (study.mode == EffectMode::homogeneous) {
    TrueEstimands truth;
    truth.ate = truth.ato = cfg.beta.delta_star;
    truth.dgcop_share = 1.0;
    truth.ow_oracle = std::numeric_limits<double>::quiet_NaN();
    return truth;
  }
  const TrueEstimands truth = true_estimands(cfg, study.n_oracle, derive_seed(study.seed, {stream::oracle, 0}));
  if (oracle_gap) {
    const TrueEstimands check = true_estimands(cfg, study.n_oracle, derive_seed(study.seed, {stream::oracle, 1}));
    *oracle_gap = std::abs(truth.ato - check.ato);
  }
  return truth;
}

ReplicationReport summarize_replicates(const StudyConfig& study, const TrueEstimands& truth,
                                       std::vector<ReplicateRecord> records) {
  ReplicationReport report;
  report.study = study;
  report.truth = truth;

  std::vector<const ReplicateRecord*> kept;
  for (const auto& rec : records) {
    if (rec.failure) {
      ++report.dropped;
    } else {
      kept.push_back(&rec);
    }
  }
  report.completed = kept.size();

  for (std::size_t m = 0; m < study.methods.size(); ++m) {
    MethodCell cell;
    cell.method = study.methods[m];
    cell.true_delta = target_of(truth, cell.method);
    std::vector<double> deltas, ses, covered;
    for (const auto* rec : kept) {
      const EffectEstimate& e = *rec->estimates[m];
      deltas.push_back(e.delta);
      if (e.se && e.ci95) {
        ses.push_back(*e.se);
        covered.push_back(e.ci95->low <= cell.true_delta && cell.true_delta <= e.ci95->high ? 1.0 : 0.0);
      }
    }
    const Moments d = moments(deltas);
    cell.count = d.n;
    if (d.n > 0) {
      const double rn = static_cast<double>(d.n);
      cell.mean_estimate = d.mean;
      cell.bias = d.mean - cell.true_delta;
      cell.bias_mc_se = d.sd / std::sqrt(rn);
      cell.emp_sd = d.sd;
      cell.emp_sd_mc_se = d.n > 1 ? d.sd / std::sqrt(2.0 * (rn - 1.0)) : 0.0;
    }
    if (!ses.empty()) {
      const Moments s = moments(ses);
      const Moments c = moments(covered);
      cell.boot_se = s.mean;
      cell.boot_se_mc_se = s.sd / std::sqrt(static_cast<double>(s.n));
      cell.coverage = c.mean;
      cell.coverage_mc_se = std::sqrt(c.mean * (1.0 - c.mean) / static_cast<double>(c.n));
    }
    report.cells.push_back(cell);
  }

  std::vector<double> sizes, size_sds, ever, dgcop;
  for (const auto* rec : kept) {
    dgcop.push_back(rec->dgcop_share);
    if (rec->cos_size_mean) {
      sizes.push_back(*rec->cos_size_mean);
      size_sds.push_back(*rec->cos_size_sd);
      ever.push_back(*rec->ever_used_fraction);
    }
  }
  report.dgcop_share_mean = dgcop.empty() ? std::numeric_limits<double>::quiet_NaN() : moments(dgcop).mean;
  if (!sizes.empty()) {
    CosStats cos;
    const Moments s = moments(sizes);
    const Moments e = moments(ever);
    cos.count = s.n;
    cos.size_mean = s.mean;
    cos.size_mean_mc_se = s.sd / std::sqrt(static_cast<double>(s.n));
    cos.size_sd = moments(size_sds).mean;
    cos.ever_used = e.mean;
    cos.ever_used_sd = e.sd;
    cos.ever_used_mc_se = e.sd / std::sqrt(static_cast<double>(e.n));
    report.cos = cos;
  }

  const auto ow = position(study.methods, Method::ow);
  const auto ppta = position(study.methods, Method::ppta);
  if (ow && ppta && !kept.empty()) {
    double gap = 0.0;
    for (const auto* rec : kept) gap += std::abs(rec->estimates[*ppta]->delta - rec->estimates[*ow]->delta);
    report.ppta_ow_gap = gap / static_cast<double>(kept.size());
  }
  report.records = std::move(records);
  return report;
}

ReplicationReport replicate(const StudyConfig& study) {
  if (study.replicates < 2) throw Error(Errc::config, kModule, "R must be at least 2");
  if (study.methods.empty()) throw Error(Errc::config, kModule, "method list is empty");
  std::optional<double> gap;
  const TrueEstimands truth = study_truth(study, &gap);
  std::vector<ReplicateRecord> records(study.replicates);
  parallel_for(study.replicates, study.threads, [&](std::size_t r) {
    records[r] = run_replicate(study, r);
    if (records[r].failure) spdlog::warn("harness: replicate {} dropped: {}", r, *records[r].failure);
  });
  ReplicationReport report = summarize_replicates(study, truth, std::move(records));
  report.oracle_gap = gap;
  return report;
}

const char* to_string(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::info: return "info";
    case Verdict::missing: return "missing";
  }
  return "?";
}

namespace {

struct ReferenceRow {
  Method method;
  std::size_t periods;
  double true_delta, bias, emp_sd, boot_se, coverage;
};

const ReferenceRow kTable1[] = {
    {Method::ipw, 3, 0.5, 0.034, 0.132, 0.078, 0.763},   {Method::sw, 3, 0.5, 0.036, 0.113, 0.066, 0.747},
    {Method::ow, 3, 0.5, -0.019, 0.042, 0.041, 0.907},   {Method::ppta, 3, 0.5, -0.019, 0.042, 0.041, 0.899},
    {Method::ipw, 5, 0.5, 0.062, 0.177, 0.106, 0.700},   {Method::sw, 5, 0.5, 0.065, 0.116, 0.063, 0.490},
    {Method::ow, 5, 0.5, -0.020, 0.064, 0.059, 0.921},   {Method::ppta, 5, 0.5, -0.019, 0.066, 0.062, 0.907},
};

const ReferenceRow kTable2[] = {
    {Method::ipw, 3, 0.185, 0.035, 0.118, 0.081, 0.747}, {Method::sw, 3, 0.195, 0.045, 0.108, 0.069, 0.664},
    {Method::ow, 3, 0.370, -0.000, 0.048, 0.043, 0.898}, {Method::ppta, 3, 0.369, -0.001, 0.048, 0.043, 0.906},
    {Method::ipw, 5, 0.141, 0.081, 0.138, 0.095, 0.614}, {Method::sw, 5, 0.142, 0.082, 0.093, 0.059, 0.466},
    {Method::ow, 5, 0.315, -0.015, 0.070, 0.070, 0.936}, {Method::ppta, 5, 0.319, -0.011, 0.072, 0.072, 0.940},
};

struct ReferenceCos {
  std::size_t periods;
  double size_mean, size_sd, ever_used, ever_used_sd;
};

const ReferenceCos kTable3[] = {{3, 125.3, 11.6, 0.671, 0.013}, {5, 9.2, 3.0, 0.179, 0.018}};

// Share of units in the data-generated common overlap population.
const std::pair<std::size_t, double> kDgcopShare[] = {{3, 0.31}, {5, 0.12}};

std::span<const ReferenceRow> reference_rows(int table) {
  if (table == 1) return kTable1;
  if (table == 2) return kTable2;
  return {};
}

EffectMode table_mode(int table) { return table == 2 ? EffectMode::heterogeneous : EffectMode::homogeneous; }

// Acceptance ranges pinned for the headline cells; everything else is informational.
std::optional<Interval> acceptance(int table, std::size_t periods, Method method, const std::string& metric,
                                   double reference) {
  if (periods != 3) return std::nullopt;
  if (table == 1) {
    if (method == Method::ow && metric == "bias") return Interval{reference - 0.015, reference + 0.015};
    if (method == Method::ow && metric == "emp_sd") return Interval{reference - 0.015, reference + 0.015};
    if (method == Method::ipw && metric == "emp_sd") return Interval{reference - 0.05, reference + 0.05};
    if (method == Method::ow && metric == "coverage") return Interval{0.85, 0.97};
  }
  if (table == 2) {
    if (method == Method::ow && metric == "true_delta") return Interval{reference - 0.02, reference + 0.02};
    if ((method == Method::ow || method == Method::ppta) && metric == "bias") return Interval{-0.015, 0.015};
  }
  return std::nullopt;
}

std::optional<Interval> cos_acceptance(std::size_t periods, const std::string& metric) {
  if (periods != 3) return std::nullopt;
  if (metric == "cos_size_mean") return Interval{110.0, 140.0};
  if (metric == "ever_used") return Interval{0.63, 0.71};
  return std::nullopt;
}

const ReplicationReport* find_report(std::span<const ReplicationReport> reports, std::size_t periods,
                                     std::optional<EffectMode> mode) {
  for (const auto& r : reports) {
    if (r.study.periods == periods && (!mode || r.study.mode == *mode)) return &r;
  }
  return nullptr;
}

ComparisonRow make_row(int table, std::size_t periods, std::string method, std::string metric, double reference,
                       std::optional<double> ours, std::optional<double> mc_se, std::optional<Interval> accept) {
  ComparisonRow row;
  row.table = table;
  row.periods = periods;
  row.method = std::move(method);
  row.metric = std::move(metric);
  row.reference = reference;
  row.ours = ours;
  row.mc_se = mc_se;
  row.accept = accept;
  if (!ours || !std::isfinite(*ours)) {
    row.ours.reset();
    row.verdict = Verdict::missing;
  } else {
    row.diff = *ours - reference;
    if (accept) {
      row.verdict = accept->low <= *ours && *ours <= accept->high ? Verdict::pass : Verdict::fail;
    } else {
      row.verdict = Verdict::info;
    }
  }
  return row;
}

}  // namespace

std::vector<ReplicationReport> reference_report(int table) {
  std::vector<ReplicationReport> out;
  if (table == 3) {
    for (const auto& c : kTable3) {
      ReplicationReport r;
      r.study.periods = c.periods;
      r.study.methods = {Method::ppta};
      r.cos = CosStats{c.size_mean, 0.0, c.size_sd, c.ever_used, c.ever_used_sd, 0.0, 0};
      out.push_back(std::move(r));
    }
    return out;
  }
  for (std::size_t periods : {std::size_t{3}, std::size_t{5}}) {
    ReplicationReport r;
    r.study.mode = table_mode(table);
    r.study.periods = periods;
    r.study.methods.clear();
    for (const auto& p : reference_rows(table)) {
      if (p.periods != periods) continue;
      r.study.methods.push_back(p.method);
      MethodCell cell;
      cell.method = p.method;
      cell.true_delta = p.true_delta;
      cell.bias = p.bias;
      cell.emp_sd = p.emp_sd;
      cell.boot_se = p.boot_se;
      cell.coverage = p.coverage;
      r.cells.push_back(cell);
    }
    if (table == 2) {
      for (const auto& [d, share] : kDgcopShare) {
        if (d == periods) r.truth.dgcop_share = share;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ComparisonRow> score_against_reference(std::span<const ReplicationReport> reports, int table) {
  if (table < 1 || table > 3) throw Error(Errc::config, kModule, "table must be 1, 2 or 3");
  std::vector<ComparisonRow> rows;
  if (table == 3) {
    for (const auto& c : kTable3) {
      const ReplicationReport* rep = find_report(reports, c.periods, std::nullopt);
      const CosStats* cos = rep && rep->cos ? &*rep->cos : nullptr;
      auto val = [&](double CosStats::*field) -> std::optional<double> {
        if (!cos) return std::nullopt;
        return (*cos).*field;
      };
      auto se = [&](double CosStats::*field) -> std::optional<double> {
        if (!cos || cos->count == 0) return std::nullopt;
        return (*cos).*field;
      };
      rows.push_back(make_row(3, c.periods, "ppta", "cos_size_mean", c.size_mean, val(&CosStats::size_mean),
                              se(&CosStats::size_mean_mc_se), cos_acceptance(c.periods, "cos_size_mean")));
      rows.push_back(make_row(3, c.periods, "ppta", "cos_size_sd", c.size_sd, val(&CosStats::size_sd),
                              std::nullopt, std::nullopt));
      rows.push_back(make_row(3, c.periods, "ppta", "ever_used", c.ever_used, val(&CosStats::ever_used),
                              se(&CosStats::ever_used_mc_se), cos_acceptance(c.periods, "ever_used")));
      rows.push_back(make_row(3, c.periods, "ppta", "ever_used_sd", c.ever_used_sd, val(&CosStats::ever_used_sd),
                              std::nullopt, std::nullopt));
    }
    return rows;
  }

  const EffectMode mode = table_mode(table);
  for (const auto& p : reference_rows(table)) {
    const ReplicationReport* rep = find_report(reports, p.periods, mode);
    const MethodCell* cell = rep ? rep->cell(p.method) : nullptr;
    const std::string name = to_string(p.method);
    auto add = [&](const std::string& metric, double reference, std::optional<double> ours, std::optional<double> se) {
      rows.push_back(make_row(table, p.periods, name, metric, reference, ours, se,
                              acceptance(table, p.periods, p.method, metric, reference)));
    };
    auto opt = [&](double v) { return cell ? std::optional<double>(v) : std::nullopt; };
    auto mc = [&](double v) { return cell && cell->count > 0 ? std::optional<double>(v) : std::nullopt; };
    add("true_delta", p.true_delta, opt(cell ? cell->true_delta : 0.0), std::nullopt);
    add("bias", p.bias, opt(cell ? cell->bias : 0.0), mc(cell ? cell->bias_mc_se : 0.0));
    add("emp_sd", p.emp_sd, opt(cell ? cell->emp_sd : 0.0), mc(cell ? cell->emp_sd_mc_se : 0.0));
    add("boot_se", p.boot_se, cell ? cell->boot_se : std::nullopt, cell && cell->count ? cell->boot_se_mc_se : std::nullopt);
    add("coverage", p.coverage, cell ? cell->coverage : std::nullopt,
        cell && cell->count ? cell->coverage_mc_se : std::nullopt);
  }
  if (table == 2) {
    for (const auto& [periods, share] : kDgcopShare) {
      const ReplicationReport* rep = find_report(reports, periods, mode);
      std::optional<double> ours;
      if (rep && rep->truth.dgcop_share < 1.0) ours = rep->truth.dgcop_share;
      std::optional<Interval> accept;
      if (periods == 3) accept = Interval{share - 0.03, share + 0.03};
      rows.push_back(make_row(2, periods, "-", "dgcop_share", share, ours, std::nullopt, accept));
    }
  }
  return rows;
}

void write_table_csv(std::ostream& out, std::span<const ReplicationReport> reports, int table) {
  auto num = [](std::optional<double> v) { return v && std::isfinite(*v) ? format_double(*v) : std::string("NA"); };
  if (table == 3) {
    out << "D,cos_size_mean,cos_size_sd,ever_used,ever_used_sd,cos_size_mean_mc_se,ever_used_mc_se,R\n";
    for (const auto& r : reports) {
      if (!r.cos) continue;
      out << r.study.periods << ',' << num(r.cos->size_mean) << ',' << num(r.cos->size_sd) << ','
          << num(r.cos->ever_used) << ',' << num(r.cos->ever_used_sd) << ',' << num(r.cos->size_mean_mc_se) << ','
          << num(r.cos->ever_used_mc_se) << ',' << r.cos->count << '\n';
    }
    return;
  }
  out << "method,D,true_delta,bias,emp_sd,boot_se,coverage,bias_mc_se,emp_sd_mc_se,boot_se_mc_se,coverage_mc_se,R\n";
  for (const auto& r : reports) {
    if (r.study.mode != table_mode(table)) continue;
    for (const auto& c : r.cells) {
      out << to_string(c.method) << ',' << r.study.periods << ',' << num(c.true_delta) << ',' << num(c.bias) << ','
          << num(c.emp_sd) << ',' << num(c.boot_se) << ',' << num(c.coverage) << ',' << num(c.bias_mc_se) << ','
          << num(c.emp_sd_mc_se) << ',' << num(c.boot_se_mc_se) << ',' << num(c.coverage_mc_se) << ',' << c.count
          << '\n';
    }
  }
}

nlohmann::json to_json(std::span<const ComparisonRow> rows) {
  auto opt = [](std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"table", r.table},
                 {"D", r.periods},
                 {"method", r.method},
                 {"metric", r.metric},
                 {"ours", opt(r.ours)},
                 {"reference", r.reference},
                 {"diff", opt(r.diff)},
                 {"abs_diff", r.diff ? nlohmann::json(std::abs(*r.diff)) : nlohmann::json(nullptr)},
                 {"mc_se", opt(r.mc_se)},
                 {"accept_low", r.accept ? nlohmann::json(r.accept->low) : nlohmann::json(nullptr)},
                 {"accept_high", r.accept ? nlohmann::json(r.accept->high) : nlohmann::json(nullptr)},
                 {"verdict", to_string(r.verdict)}});
  }
  return j;
}

nlohmann::json to_json(const ReplicationReport& report) {
  auto opt = [](std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  auto finite = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  const auto& s = report.study;
  j["study"] = {{"mode", to_string(s.mode)}, {"D", s.periods}, {"R", s.replicates}, {"n", s.n},
                {"K", s.draws},              {"B", s.resamples}, {"seed", s.seed}, {"min_cos", s.min_cos},
                {"n_oracle", s.n_oracle}};
  j["truth"] = {{"ate", report.truth.ate},
                {"ato", report.truth.ato},
                {"dgcop_share", report.truth.dgcop_share},
                {"ow_oracle", finite(report.truth.ow_oracle)},
                {"oracle_gap", opt(report.oracle_gap)}};
  j["completed"] = report.completed;
  j["dropped"] = report.dropped;
  j["dgcop_share_mean"] = finite(report.dgcop_share_mean);
  j["ppta_ow_gap"] = opt(report.ppta_ow_gap);
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"method", to_string(c.method)},
                     {"true_delta", c.true_delta},
                     {"count", c.count},
                     {"mean_estimate", c.mean_estimate},
                     {"bias", c.bias},
                     {"bias_mc_se", c.bias_mc_se},
                     {"emp_sd", c.emp_sd},
                     {"emp_sd_mc_se", c.emp_sd_mc_se},
                     {"boot_se", opt(c.boot_se)},
                     {"boot_se_mc_se", opt(c.boot_se_mc_se)},
                     {"coverage", opt(c.coverage)},
                     {"coverage_mc_se", opt(c.coverage_mc_se)}});
  }
  if (report.cos) {
    j["cos"] = {{"size_mean", report.cos->size_mean}, {"size_sd", report.cos->size_sd},
                {"ever_used", report.cos->ever_used}, {"ever_used_sd", report.cos->ever_used_sd},
                {"count", report.cos->count}};
  } else {
    j["cos"] = nullptr;
  }
  auto& failures = j["failures"] = nlohmann::json::array();
  for (const auto& rec : report.records) {
    if (rec.failure) failures.push_back({{"replicate", rec.index}, {"error", *rec.failure}});
  }
  return j;
}

}  // namespace tvmsm
