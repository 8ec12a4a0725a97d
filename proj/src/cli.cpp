#include "tvmsm/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tvmsm/bootstrap.hpp"
#include "tvmsm/diagnostics.hpp"
#include "tvmsm/error.hpp"
#include "tvmsm/harness.hpp"
#include "tvmsm/pipeline.hpp"
#include "tvmsm/simgen.hpp"

namespace tvmsm {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const char* kModule = "cli";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = std::make_shared<spdlog::logger>("tvmsm", std::make_shared<spdlog::sinks::stderr_color_sink_mt>());
    spdlog::set_default_logger(std::move(logger));
  });
}

std::string config_scalar(const std::string& key, const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw UsageError("config key '" + key + "' must be a string, number, boolean or array of those");
}

// Fills options the command line left unset from a flat JSON object whose
// keys are long option names.
void apply_config(CLI::App& cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, kModule, "cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
  for (const auto& [raw_key, value] : j.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") throw UsageError("config files cannot nest");
    CLI::Option* opt = nullptr;
    try {
      opt = cmd.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw UsageError("unknown config key '" + raw_key + "' for command " + cmd.get_name());
    }
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(config_scalar(raw_key, v));
    } else {
      opt->add_result(config_scalar(raw_key, value));
    }
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw UsageError("config key '" + raw_key + "': " + e.what());
    }
  }
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& name : names) {
    if (name == "all") {
      for (Method m : {Method::ipw, Method::sw, Method::ow, Method::ppta}) out.push_back(m);
      continue;
    }
    try {
      out.push_back(method_from_string(name));
    } catch (const Error& e) {
      throw UsageError(e.message());
    }
  }
  std::vector<Method> unique;
  for (Method m : out) {
    if (std::find(unique.begin(), unique.end(), m) == unique.end()) unique.push_back(m);
  }
  if (unique.empty()) throw Error(Errc::config, kModule, "method list is empty");
  return unique;
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed) {
  if (!seed) throw UsageError("--seed is required for randomized commands");
  return *seed;
}

fs::path require_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, kModule, "cannot create directory " + dir + ": " + ec.message());
  return dir;
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, kModule, "cannot write " + path.string());
  writer(out);
  if (!out) throw Error(Errc::io, kModule, "write failed for " + path.string());
}

struct PanelFlags {
  std::string input;
  std::optional<std::size_t> pw, px, periods;
  std::string outcome = "auto";

  void attach(CLI::App& cmd) {
    cmd.add_option("--input", input, "Wide panel CSV");
    cmd.add_option("--pw", pw, "Declared baseline covariate count");
    cmd.add_option("--px", px, "Declared time-varying covariate count");
    cmd.add_option("--d", periods, "Declared number of time points");
    cmd.add_option("--outcome", outcome, "Outcome kind")
        ->check(CLI::IsMember({"auto", "continuous", "count"}))
        ->capture_default_str();
  }

  PanelDataset load() const {
    if (input.empty()) throw UsageError("--input is required");
    std::ifstream in(input);
    if (!in) throw Error(Errc::io, "panel", "cannot open " + input);
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, ',');) header.push_back(field);
    PanelSchema schema = schema_from_header(header);
    auto check = [](const char* what, std::optional<std::size_t> declared, std::size_t actual) {
      if (declared && *declared != actual) {
        throw Error(Errc::config, "panel",
                    std::string("declared ") + what + "=" + std::to_string(*declared) + " but the header has " +
                        std::to_string(actual));
      }
    };
    check("pW", pw, schema.baseline_dim);
    check("pX", px, schema.covariate_dim);
    check("D", periods, schema.periods);
    std::optional<OutcomeKind> kind;
    if (outcome == "continuous") kind = OutcomeKind::continuous;
    if (outcome == "count") kind = OutcomeKind::count;
    in.clear();
    in.seekg(0);
    return read_panel_csv(in, schema, kind);
  }
};

json ppta_summary(const PptaRun& run) {
  return {{"K", run.K},
          {"delta_hat", run.delta_hat},
          {"cos_size_mean", run.cos_size_mean},
          {"cos_size_sd", run.cos_size_sd},
          {"ever_used_fraction", run.ever_used_fraction},
          {"skipped", run.skipped},
          {"insufficient_overlap", run.insufficient_overlap},
          {"acceptance_rates", run.acceptance_rates}};
}

// ---- simulate ----

struct SimulateCmd {
  SimConfig cfg;
  std::string mode = "homogeneous";
  std::string out_dir;
  bool side_files = false;
  std::optional<std::uint64_t> seed;
  std::string config;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("simulate", "Generate a simulated panel");
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--n", cfg.n, "Units")->capture_default_str();
    cmd->add_option("--d", cfg.periods, "Time points")->capture_default_str();
    cmd->add_option("--pw", cfg.baseline_dim, "Baseline covariates")->capture_default_str();
    cmd->add_option("--px", cfg.covariate_dim, "Time-varying covariates")->capture_default_str();
    cmd->add_option("--mode", mode, "Effect mode")
        ->check(CLI::IsMember({"homogeneous", "heterogeneous"}))
        ->capture_default_str();
    cmd->add_flag("--side-files", side_files, "Also write e_true.csv and dgcop.csv");
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--config", config, "JSON file of option values");
  }

  int run(std::ostream& out) {
    cfg.seed = require_seed(seed);
    cfg.mode = effect_mode_from_string(mode);
    const fs::path dir = require_dir(out_dir);
    const SimulatedDataset sim = generate(cfg);
    write_file(dir / "panel.csv", [&](std::ostream& o) { write_panel_csv(o, sim.panel); });

    const std::size_t D = cfg.periods;
    const auto n = static_cast<double>(cfg.n);
    double share = 0.0;
    for (auto c : sim.dgcop_periods) share += c == D ? 1.0 : 0.0;
    share /= n;
    if (side_files) {
      write_file(dir / "e_true.csv", [&](std::ostream& o) {
        o << "id";
        for (std::size_t t = 0; t < D; ++t) o << ",e_" << t + 1;
        o << '\n';
        for (std::size_t i = 0; i < cfg.n; ++i) {
          o << sim.panel.ids()[i];
          for (std::size_t t = 0; t < D; ++t) {
            o << ',' << format_double(sim.e_true(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
          }
          o << '\n';
        }
      });
      write_file(dir / "dgcop.csv", [&](std::ostream& o) {
        o << "id,dgcop,dgcop_count\n";
        for (std::size_t i = 0; i < cfg.n; ++i) {
          const int count = sim.dgcop_periods[i];
          o << sim.panel.ids()[i] << ',' << (static_cast<std::size_t>(count) == D ? 1 : 0) << ',' << count << '\n';
        }
      });
    }

    out << "simulated n=" << cfg.n << " D=" << D << " mode=" << mode << " seed=" << cfg.seed << '\n';
    for (std::size_t t = 0; t < D; ++t) {
      const double mean = sim.panel.exposure().col(static_cast<Eigen::Index>(t)).cast<double>().sum() / n;
      out << "mean T_" << t + 1 << " = " << std::fixed << std::setprecision(4) << mean << '\n';
    }
    out << "DGCOP share = " << std::fixed << std::setprecision(4) << share << '\n';
    out.unsetf(std::ios::fixed);
    return kExitOk;
  }
};

// ---- analyze ----

struct AnalyzeCmd {
  PanelFlags panel;
  std::string out_dir;
  std::vector<std::string> methods{"all"};
  std::string link = "auto";
  std::size_t draws = 1500;
  std::size_t resamples = 100;
  std::size_t min_cos = 10;
  bool percentile = false;
  bool no_offset = false;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  std::string config;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("analyze", "Estimate effects on a panel CSV");
    panel.attach(*cmd);
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--methods", methods, "ipw, sw, ow, ppta, unweighted or all")->delimiter(',');
    cmd->add_option("--link", link, "MSM link")->check(CLI::IsMember({"auto", "identity", "log"}))->capture_default_str();
    cmd->add_option("--draws,-K", draws, "PPTA posterior draws")->capture_default_str();
    cmd->add_option("--resamples,-B", resamples, "Bootstrap resamples (0 for point estimates only)")
        ->capture_default_str();
    cmd->add_option("--min-cos", min_cos, "Smallest COS that is analyzed")->capture_default_str();
    cmd->add_flag("--percentile", percentile, "Also report percentile bootstrap intervals");
    cmd->add_flag("--no-offset", no_offset, "Ignore the offset column under the log link");
    cmd->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--config", config, "JSON file of option values");
  }

  int run(std::ostream& out) {
    const std::uint64_t master = require_seed(seed);
    const std::vector<Method> chosen = parse_methods(methods);
    if (resamples == 1) throw UsageError("--resamples must be 0 or at least 2");
    const fs::path dir = require_dir(out_dir);
    const PanelDataset ds = panel.load();

    EstimatorOptions opts;
    if (link == "auto") {
      opts.spec.link = ds.outcome_kind() == OutcomeKind::count ? Link::log : Link::identity;
    } else {
      opts.spec.link = link_from_string(link);
    }
    opts.spec.offset_used = !no_offset;
    opts.ppta.draws = draws;
    opts.ppta.min_cos = min_cos;
    opts.ppta.threads = threads;

    const PipelineResult result = run_pipeline(ds, chosen, opts, derive_seed(master, {stream::pipeline}));
    std::vector<EffectEstimate> estimates;
    for (std::size_t m = 0; m < chosen.size(); ++m) {
      if (!result.estimates[m]) {
        const Error& err = *result.failures[m];
        throw Error(err.code(), err.module(), std::string(to_string(chosen[m])) + ": " + err.message());
      }
      estimates.push_back(*result.estimates[m]);
    }

    std::vector<BootstrapResult> boot;
    if (resamples > 0) {
      BootstrapOptions bo;
      bo.resamples = resamples;
      bo.threads = threads;
      bo.percentile = percentile;
      EstimatorOptions inner = opts;
      inner.ppta.threads = 1;
      boot = bootstrap_effects(ds, estimates, inner, bo, master);
      for (std::size_t m = 0; m < estimates.size(); ++m) estimates[m] = apply_bootstrap(estimates[m], boot[m]);
      write_file(dir / "bootstrap.csv", [&](std::ostream& o) { write_bootstrap_csv(o, boot); });
    }

    json records = json::array();
    for (std::size_t m = 0; m < estimates.size(); ++m) {
      json rec = to_json(estimates[m]);
      if (!boot.empty()) {
        rec["B"] = boot[m].B;
        rec["bootstrap_failed"] = boot[m].failed;
        if (boot[m].percentile_ci95) {
          rec["percentile_low"] = boot[m].percentile_ci95->low;
          rec["percentile_high"] = boot[m].percentile_ci95->high;
        }
      }
      records.push_back(std::move(rec));
    }
    json doc{{"n", ds.n()}, {"D", ds.periods()}, {"seed", master}, {"estimates", records}};
    if (result.ppta) doc["ppta"] = ppta_summary(*result.ppta);
    write_file(dir / "estimates.json", [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
    write_file(dir / "effects.csv", [&](std::ostream& o) { write_effect_table_csv(o, estimates); });

    std::vector<WeightSet> sets;
    for (const auto* ws : {&result.ipw, &result.sw, &result.ow}) {
      if (!*ws) continue;
      sets.push_back(**ws);
      write_file(dir / (std::string("weights_") + to_string((*ws)->scheme) + ".csv"),
                 [&](std::ostream& o) { write_weights_csv(o, **ws, ds); });
    }
    const PptaRun* ppta = result.ppta ? &*result.ppta : nullptr;
    if (!sets.empty() || ppta) {
      const WeightTable table = weight_table(sets, ppta);
      write_file(dir / "weight_summary.csv", [&](std::ostream& o) { write_weight_table_csv(o, table); });
    }
    if (ppta) {
      write_file(dir / "inclusion.csv", [&](std::ostream& o) { write_inclusion_csv(o, *ppta, ds); });
      write_file(dir / "ppta_deltas.csv", [&](std::ostream& o) { write_deltas_csv(o, *ppta); });
    }

    out << (opts.spec.link == Link::log ? "rate ratio" : "effect") << " [95% interval]\n";
    for (const auto& e : estimates) out << std::left << std::setw(6) << to_string(e.method) << format_effect(e) << '\n';
    return kExitOk;
  }
};

// ---- replicate ----

struct ReplicateCmd {
  std::string mode = "homogeneous";
  std::vector<std::size_t> periods{3};
  std::size_t replicates = 100;
  std::size_t n = 5000;
  std::size_t draws = 500;
  std::size_t resamples = 50;
  std::size_t min_cos = 3;
  std::size_t n_oracle = 2'000'000;
  std::vector<std::string> methods{"all"};
  std::vector<std::string> bootstrap_methods;
  bool full = false;
  unsigned threads = 0;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string config;
  CLI::App* cmd = nullptr;

  void attach(CLI::App& app) {
    cmd = app.add_subcommand("replicate", "Run the simulation study and score it against the published tables");
    cmd->add_option("--mode", mode, "Effect mode")
        ->check(CLI::IsMember({"homogeneous", "heterogeneous"}))
        ->capture_default_str();
    cmd->add_option("--d", periods, "Time points (repeatable)")->delimiter(',')->capture_default_str();
    cmd->add_option("--r", replicates, "Replicates")->capture_default_str();
    cmd->add_option("--n", n, "Units per replicate")->capture_default_str();
    cmd->add_option("--draws,-K", draws, "PPTA posterior draws")->capture_default_str();
    cmd->add_option("--resamples,-B", resamples, "Bootstrap resamples (0 skips the bootstrap)")->capture_default_str();
    cmd->add_option("--min-cos", min_cos, "Smallest COS that is analyzed")->capture_default_str();
    cmd->add_option("--n-oracle", n_oracle, "Oracle sample size for the heterogeneous truth")->capture_default_str();
    cmd->add_option("--methods", methods, "Methods to analyze")->delimiter(',');
    cmd->add_option("--bootstrap-methods", bootstrap_methods, "Methods to bootstrap (default: all analyzed)")
        ->delimiter(',');
    cmd->add_flag("--full", full, "R=250, K=1500, B=100 unless given explicitly");
    cmd->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--config", config, "JSON file of option values");
  }

  int run(std::ostream& out) {
    const std::uint64_t master = require_seed(seed);
    const fs::path dir = require_dir(out_dir);
    if (full) {
      if (cmd->get_option("--r")->count() == 0) replicates = 250;
      if (cmd->get_option("--draws")->count() == 0) draws = 1500;
      if (cmd->get_option("--resamples")->count() == 0) resamples = 100;
    }
    if (resamples == 1) throw UsageError("--resamples must be 0 or at least 2");

    std::vector<ReplicationReport> reports;
    for (std::size_t d : periods) {
      StudyConfig study;
      study.mode = effect_mode_from_string(mode);
      study.periods = d;
      study.replicates = replicates;
      study.n = n;
      study.draws = draws;
      study.resamples = resamples;
      study.seed = derive_seed(master, {d});
      study.min_cos = min_cos;
      study.threads = threads;
      study.n_oracle = n_oracle;
      study.methods = parse_methods(methods);
      if (!bootstrap_methods.empty()) study.bootstrap_methods = parse_methods(bootstrap_methods);
      spdlog::info("replicate: mode={} D={} R={} n={} K={} B={}", mode, d, replicates, n, draws, resamples);
      reports.push_back(replicate(study));
    }

    const int table = mode == "heterogeneous" ? 2 : 1;
    std::vector<ComparisonRow> rows = score_against_reference(reports, table);
    const bool has_cos = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.cos.has_value(); });
    if (has_cos) {
      auto cos_rows = score_against_reference(reports, 3);
      rows.insert(rows.end(), cos_rows.begin(), cos_rows.end());
    }
    write_file(dir / ("table" + std::to_string(table) + ".csv"),
               [&](std::ostream& o) { write_table_csv(o, reports, table); });
    if (has_cos) write_file(dir / "table3.csv", [&](std::ostream& o) { write_table_csv(o, reports, 3); });
    json doc;
    doc["rows"] = to_json(rows);
    doc["reports"] = json::array();
    for (const auto& r : reports) doc["reports"].push_back(to_json(r));
    write_file(dir / "comparison.json", [&](std::ostream& o) { o << doc.dump(2) << '\n'; });

    for (const auto& row : rows) {
      if (row.verdict == Verdict::missing) continue;
      out << "table" << row.table << " D=" << row.periods << ' ' << std::left << std::setw(5) << row.method << ' '
          << std::setw(14) << row.metric << " ours=" << std::setw(10) << format_double(*row.ours)
          << " reference=" << std::setw(8) << format_double(row.reference) << ' ' << to_string(row.verdict) << '\n';
    }
    for (const auto& r : reports) {
      if (r.dropped > 0) out << "D=" << r.study.periods << ": " << r.dropped << " replicate(s) dropped\n";
    }
    return kExitOk;
  }
};

// ---- diagnose ----

struct DiagnoseCmd {
  PanelFlags panel;
  std::string out_dir;
  std::string dgcop_path;
  std::string config;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("diagnose", "Weight and positivity diagnostics at the ML propensity fit");
    panel.attach(*cmd);
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--dgcop", dgcop_path, "dgcop.csv written by simulate --side-files");
    cmd->add_option("--config", config, "JSON file of option values");
  }

  std::vector<std::uint8_t> load_dgcop(const PanelDataset& ds) const {
    std::ifstream in(dgcop_path);
    if (!in) throw Error(Errc::io, kModule, "cannot open " + dgcop_path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("id,dgcop,dgcop_count", 0) != 0) {
      throw Error(Errc::invalid_data, kModule, dgcop_path + ": expected header id,dgcop,dgcop_count");
    }
    std::vector<std::uint8_t> counts;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto last = line.rfind(',');
      const std::size_t idx = counts.size();
      if (idx >= ds.n() || line.substr(0, line.find(',')) != ds.ids()[idx]) {
        throw Error(Errc::invalid_data, kModule, dgcop_path + ": row " + std::to_string(idx + 1) + " does not match the panel");
      }
      counts.push_back(static_cast<std::uint8_t>(std::stoi(line.substr(last + 1))));
    }
    if (counts.size() != ds.n()) throw Error(Errc::invalid_data, kModule, dgcop_path + ": row count differs from the panel");
    return counts;
  }

  int run(std::ostream& out) {
    const fs::path dir = require_dir(out_dir);
    const PanelDataset ds = panel.load();
    const SequentialPS ps = fit_sequential(ds, MleMode{});
    const Eigen::MatrixXd e = ps.propensity();

    std::vector<std::uint8_t> dgcop;
    if (!dgcop_path.empty()) dgcop = load_dgcop(ds);

    const auto rows = positivity(e, ds);
    write_file(dir / "positivity.csv", [&](std::ostream& o) { write_positivity_csv(o, rows); });
    write_file(dir / "patterns.csv", [&](std::ostream& o) { write_pattern_census_csv(o, ds); });
    const std::vector<WeightSet> sets{ipw(e, ds), stabilized(e, ds), overlap(e, ds)};
    for (const auto& ws : sets) {
      write_file(dir / (std::string("weights_") + to_string(ws.scheme) + ".csv"),
                 [&](std::ostream& o) { write_weights_csv(o, ws, ds); });
    }
    write_file(dir / "weight_summary.csv", [&](std::ostream& o) { write_weight_table_csv(o, weight_table(sets)); });
    const auto comparison = weight_comparison(ds, e, dgcop);
    write_file(dir / "weight_comparison.csv", [&](std::ostream& o) { export_weight_comparison(o, comparison); });

    std::vector<double> ow, inv_ipw;
    for (const auto& r : comparison) {
      ow.push_back(r.ow);
      inv_ipw.push_back(-r.log_ipw);
    }
    for (const auto& r : rows) {
      out << "time " << r.time << ": ps in [" << format_double(r.min) << ", " << format_double(r.max)
          << "], exposed " << format_double(r.treated) << '\n';
    }
    out << "spearman(ow, 1/ipw) = " << format_double(spearman(ow, inv_ipw)) << '\n';
    return kExitOk;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  init_logging();
  CLI::App app{"Marginal structural models with time-varying exposures: IPW, SW, OW and PPTA", "tvmsm"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  SimulateCmd simulate;
  AnalyzeCmd analyze;
  ReplicateCmd replicate_cmd;
  DiagnoseCmd diagnose;
  simulate.attach(app);
  analyze.attach(app);
  replicate_cmd.attach(app);
  diagnose.attach(app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    const std::string* config = name == "simulate"  ? &simulate.config
                                : name == "analyze" ? &analyze.config
                                : name == "replicate" ? &replicate_cmd.config
                                                      : &diagnose.config;
    if (!config->empty()) apply_config(*cmd, *config);
    if (name == "simulate") return simulate.run(out);
    if (name == "analyze") return analyze.run(out);
    if (name == "replicate") return replicate_cmd.run(out);
    return diagnose.run(out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == Errc::config ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace tvmsm
