#include "tvmsm/ppta.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <spdlog/spdlog.h>

#include "tvmsm/error.hpp"
#include "tvmsm/parallel.hpp"

namespace tvmsm {

namespace {

const char* kModule = "ppta";

// Bernoulli draws without materializing T̃ and S; returns the COS only.
std::vector<std::size_t> draw_cos(const Eigen::MatrixXd& e, const ExposureMatrix& exposure, Rng& rng) {
  std::uniform_real_distribution<double> uniform;
  std::vector<std::size_t> cos;
  const Eigen::Index n = e.rows();
  const Eigen::Index periods = e.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    bool member = true;
    // Every draw is consumed even after a unit drops out, so the stream
    // position matches draw_overlap_states.
    for (Eigen::Index t = 0; t < periods; ++t) {
      const bool assigned = uniform(rng) < e(i, t);
      member = member && (assigned != (exposure(i, t) != 0));
    }
    if (member) cos.push_back(static_cast<std::size_t>(i));
  }
  return cos;
}

}  // namespace

OverlapDraw draw_overlap_states(const Eigen::MatrixXd& e, const ExposureMatrix& exposure, Rng& rng) {
  if (e.rows() != exposure.rows() || e.cols() != exposure.cols()) {
    throw Error(Errc::config, kModule, "propensity and exposure shapes differ");
  }
  std::uniform_real_distribution<double> uniform;
  OverlapDraw draw;
  draw.assigned.resize(e.rows(), e.cols());
  draw.states.resize(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    bool member = true;
    for (Eigen::Index t = 0; t < e.cols(); ++t) {
      const bool assigned = uniform(rng) < e(i, t);
      const bool state = assigned != (exposure(i, t) != 0);
      draw.assigned(i, t) = assigned;
      draw.states(i, t) = state;
      member = member && state;
    }
    if (member) draw.cos.push_back(static_cast<std::size_t>(i));
  }
  return draw;
}

PptaRun run_with_propensities(const PanelDataset& ds, std::size_t iterations,
                              const PropensitySource& source, const MsmSpec& spec,
                              std::uint64_t seed, const PptaOptions& options) {
  if (iterations < 1) throw Error(Errc::config, kModule, "K must be at least 1");
  if (options.min_cos < 3) throw Error(Errc::config, kModule, "min_cos must be at least 3");

  PptaRun run;
  run.K = iterations;
  run.draws.resize(iterations);

  parallel_for(iterations, options.threads, [&](std::size_t k) {
    Eigen::MatrixXd e(static_cast<Eigen::Index>(ds.n()), static_cast<Eigen::Index>(ds.periods()));
    source(k, e);
    Rng rng = make_rng(seed, {stream::overlap, k});
    OverlapDraw draw;
    if (options.keep_states) {
      draw = draw_overlap_states(e, ds.exposure(), rng);
    } else {
      draw.cos = draw_cos(e, ds.exposure(), rng);
    }
    draw.k = k;
    if (draw.cos.size() >= options.min_cos) {
      try {
        const EffectEstimate fit = fit_on_subset(ds, draw.cos, spec, Method::ppta);
        draw.beta0 = fit.beta0;
        draw.beta = fit.beta;
        draw.delta = fit.delta;
        draw.feasible = true;
      } catch (const Error& err) {
        if (err.code() != Errc::infeasible_subset) throw;
      }
    }
    run.draws[k] = std::move(draw);
  });

  run.marginal_inclusion = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.n()));
  double sum_delta = 0.0, sum_beta = 0.0, sum_beta0 = 0.0, sum_size = 0.0;
  std::size_t feasible = 0;
  for (const auto& draw : run.draws) {
    for (std::size_t i : draw.cos) run.marginal_inclusion(static_cast<Eigen::Index>(i)) += 1.0;
    sum_size += static_cast<double>(draw.cos.size());
    if (draw.feasible) {
      ++feasible;
      sum_delta += *draw.delta;
      sum_beta += *draw.beta;
      sum_beta0 += *draw.beta0;
    }
  }
  const double K = static_cast<double>(iterations);
  run.marginal_inclusion /= K;
  run.cos_size_mean = sum_size / K;
  double ss = 0.0;
  for (const auto& draw : run.draws) {
    const double dev = static_cast<double>(draw.cos.size()) - run.cos_size_mean;
    ss += dev * dev;
  }
  run.cos_size_sd = iterations > 1 ? std::sqrt(ss / (K - 1.0)) : 0.0;
  run.ever_used_fraction =
      static_cast<double>((run.marginal_inclusion.array() > 0.0).count()) / static_cast<double>(ds.n());
  run.skipped = iterations - feasible;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  run.delta_hat = feasible ? sum_delta / static_cast<double>(feasible) : nan;
  run.beta_hat = feasible ? sum_beta / static_cast<double>(feasible) : nan;
  run.beta0_hat = feasible ? sum_beta0 / static_cast<double>(feasible) : nan;
  run.insufficient_overlap = static_cast<double>(run.skipped) > options.insufficient_fraction * K;
  if (run.insufficient_overlap) {
    spdlog::warn("ppta: {} of {} iterations had an infeasible COS (min_cos={}); insufficient overlap",
                 run.skipped, iterations, options.min_cos);
  }
  return run;
}

PptaRun run_with_posterior(const PanelDataset& ds, const SequentialPS& ps, const MsmSpec& spec,
                           std::uint64_t seed, const PptaOptions& options) {
  if (!ps.has_posterior() || ps.periods() != ds.periods()) {
    throw Error(Errc::config, kModule, "every time point needs posterior draws");
  }
  const auto iterations = static_cast<std::size_t>(ps.fits.front().posterior_draws->rows());
  std::vector<PSDesign> designs;
  designs.reserve(ds.periods());
  for (std::size_t t = 0; t < ds.periods(); ++t) {
    designs.push_back(build_design(ds, t));
    if (static_cast<std::size_t>(ps.fits[t].posterior_draws->rows()) != iterations) {
      throw Error(Errc::config, kModule, "posterior draw counts differ across time points");
    }
  }
  auto source = [&](std::size_t k, Eigen::MatrixXd& e) {
    for (std::size_t t = 0; t < designs.size(); ++t) {
      const Eigen::VectorXd alpha =
          ps.fits[t].posterior_draws->row(static_cast<Eigen::Index>(k)).transpose();
      e.col(static_cast<Eigen::Index>(t)) = predict_ps(alpha, designs[t]);
    }
  };
  PptaRun run = run_with_propensities(ds, iterations, source, spec, seed, options);
  for (const auto& fit : ps.fits) run.acceptance_rates.push_back(fit.acceptance_rate.value_or(0.0));
  return run;
}

PptaRun run(const PanelDataset& ds, const MsmSpec& spec, std::uint64_t seed,
            const PptaOptions& options) {
  const SequentialPS ps =
      fit_sequential(ds, PosteriorMode{options.draws, derive_seed(seed, {stream::posterior}), options.mcmc},
                     options.mle, options.threads);
  return run_with_posterior(ds, ps, spec, seed, options);
}

std::pair<double, double> point_and_spread(const PptaRun& run) {
  std::vector<double> deltas;
  for (const auto& d : run.draws) {
    if (d.feasible) deltas.push_back(*d.delta);
  }
  if (deltas.size() < 2) {
    throw Error(Errc::insufficient_feasible, kModule,
                std::to_string(deltas.size()) + " feasible iterations; need at least 2");
  }
  double mean = 0.0;
  for (double v : deltas) mean += v;
  mean /= static_cast<double>(deltas.size());
  double ss = 0.0;
  for (double v : deltas) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(deltas.size() - 1))};
}

EffectEstimate to_estimate(const PptaRun& run, const MsmSpec& spec) {
  if (run.skipped == run.K) {
    throw Error(Errc::insufficient_feasible, kModule, "no feasible iterations; the data cannot support the ATO");
  }
  EffectEstimate est;
  est.beta0 = run.beta0_hat;
  est.beta = run.beta_hat;
  est.delta = to_delta(spec.link, run.beta_hat);
  est.link = spec.link;
  est.method = Method::ppta;
  est.estimand = Estimand::ato;
  return est;
}

nlohmann::json to_json(const PptaRun& run) {
  nlohmann::json j;
  j["K"] = run.K;
  j["delta_hat"] = run.delta_hat;
  j["beta0_hat"] = run.beta0_hat;
  j["beta_hat"] = run.beta_hat;
  j["cos_size_mean"] = run.cos_size_mean;
  j["cos_size_sd"] = run.cos_size_sd;
  j["ever_used_fraction"] = run.ever_used_fraction;
  j["skipped"] = run.skipped;
  j["insufficient_overlap"] = run.insufficient_overlap;
  j["acceptance_rates"] = run.acceptance_rates;
  auto& draws = j["draws"] = nlohmann::json::array();
  for (const auto& d : run.draws) {
    draws.push_back({{"k", d.k},
                     {"feasible", d.feasible},
                     {"cos", d.cos},
                     {"delta", d.delta ? nlohmann::json(*d.delta) : nlohmann::json(nullptr)}});
  }
  j["marginal_inclusion"] =
      std::vector<double>(run.marginal_inclusion.data(),
                          run.marginal_inclusion.data() + run.marginal_inclusion.size());
  return j;
}

void write_deltas_csv(std::ostream& out, const PptaRun& run) {
  out << "k,feasible,cos_size,delta\n";
  for (const auto& d : run.draws) {
    out << d.k + 1 << ',' << (d.feasible ? 1 : 0) << ',' << d.cos.size() << ','
        << (d.delta ? format_double(*d.delta) : std::string("NA")) << '\n';
  }
}

void write_inclusion_csv(std::ostream& out, const PptaRun& run, const PanelDataset& ds) {
  out << "id,marginal_inclusion,ever_in_cos\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double p = run.marginal_inclusion(static_cast<Eigen::Index>(i));
    out << ds.ids()[i] << ',' << format_double(p) << ',' << (p > 0.0 ? 1 : 0) << '\n';
  }
}

}  // namespace tvmsm
