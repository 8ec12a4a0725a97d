#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvmsm/msm.hpp"
#include "tvmsm/simgen.hpp"

namespace tvmsm {

struct StudyConfig {
  EffectMode mode = EffectMode::homogeneous;
  std::size_t periods = 3;       // D
  std::size_t replicates = 100;  // R
  std::size_t n = 5000;
  std::size_t draws = 500;       // K
  std::size_t resamples = 50;    // B; 0 skips the bootstrap
  std::uint64_t seed = 1;
  std::size_t min_cos = 3;
  unsigned threads = 1;          // replicates run in parallel
  std::size_t n_oracle = 2'000'000;
  std::vector<Method> methods{Method::ipw, Method::sw, Method::ow, Method::ppta};
  // Methods that get bootstrap intervals; empty means all of `methods`.
  std::vector<Method> bootstrap_methods;

  // R=250, K=1500, B=100.
  static StudyConfig full_scale(EffectMode mode, std::size_t periods);
};

struct ReplicateRecord {
  std::size_t index = 0;
  std::vector<std::optional<EffectEstimate>> estimates;  // aligned with StudyConfig::methods
  std::optional<double> cos_size_mean;
  std::optional<double> cos_size_sd;
  std::optional<double> ever_used_fraction;
  std::size_t ppta_skipped = 0;
  double dgcop_share = 1.0;
  std::optional<std::string> failure;  // set when the replicate was dropped
};

// One (method, D) cell. Each statistic carries its Monte Carlo SE.
struct MethodCell {
  Method method = Method::ipw;
  double true_delta = 0.0;
  std::size_t count = 0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double bias_mc_se = 0.0;
  double emp_sd = 0.0;
  double emp_sd_mc_se = 0.0;
  std::optional<double> boot_se;
  std::optional<double> boot_se_mc_se;
  std::optional<double> coverage;
  std::optional<double> coverage_mc_se;
};

struct CosStats {
  double size_mean = 0.0;     // mean over replicates of the per-run mean |COS|
  double size_mean_mc_se = 0.0;
  double size_sd = 0.0;       // mean over replicates of the per-run SD of |COS|
  double ever_used = 0.0;
  double ever_used_sd = 0.0;  // across replicates
  double ever_used_mc_se = 0.0;
  std::size_t count = 0;
};

struct ReplicationReport {
  StudyConfig study;
  TrueEstimands truth;
  std::optional<double> oracle_gap;  // |ATO oracle(seed a) − ATO oracle(seed b)|, heterogeneous only
  std::vector<MethodCell> cells;
  std::optional<CosStats> cos;
  std::optional<double> ppta_ow_gap;  // mean |Δ_PPTA − Δ_OW| over replicates
  double dgcop_share_mean = 1.0;      // mean over replicates
  std::size_t completed = 0;
  std::size_t dropped = 0;
  std::vector<ReplicateRecord> records;

  const MethodCell* cell(Method method) const;
};

// Truth the harness scores each method against: ATE for IPW/SW/unweighted,
// ATO for OW/PPTA.
double target_of(const TrueEstimands& truth, Method method) noexcept;

// Analyzes one generated replicate. Failures inside the replicate are caught
// and recorded in `failure`.
ReplicateRecord run_replicate(const StudyConfig& study, std::size_t r);

ReplicationReport summarize_replicates(const StudyConfig& study, const TrueEstimands& truth,
                                       std::vector<ReplicateRecord> records);

// Truth for a study: (Δ*, Δ*) when homogeneous; oracle values otherwise.
TrueEstimands study_truth(const StudyConfig& study, std::optional<double>* oracle_gap = nullptr);

ReplicationReport replicate(const StudyConfig& study);

enum class Verdict { pass, fail, info, missing };
const char* to_string(Verdict verdict) noexcept;

struct ComparisonRow {
  int table = 1;
  std::size_t periods = 3;
  std::string method;  // "-" for dataset-level cells
  std::string metric;
  std::optional<double> ours;
  double reference = 0.0;
  std::optional<double> diff;   // ours − reference
  std::optional<double> mc_se;
  std::optional<Interval> accept;  // acceptance range on `ours`, when pinned
  Verdict verdict = Verdict::info;
};

// Reports holding the published numbers for table 1, 2 or 3.
std::vector<ReplicationReport> reference_report(int table);

// One row per published cell of `table`; cells absent from `reports` are
// flagged missing.
std::vector<ComparisonRow> score_against_reference(std::span<const ReplicationReport> reports, int table);

void write_table_csv(std::ostream& out, std::span<const ReplicationReport> reports, int table);
nlohmann::json to_json(std::span<const ComparisonRow> rows);
nlohmann::json to_json(const ReplicationReport& report);

}  // namespace tvmsm
