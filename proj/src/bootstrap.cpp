#include "tvmsm/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "tvmsm/error.hpp"
#include "tvmsm/parallel.hpp"

namespace tvmsm {

namespace {

const char* kModule = "bootstrap";

double sample_sd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Linear interpolation between order statistics.
double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::vector<std::size_t> resample_indices(std::size_t n, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = pick(rng);
  return rows;
}

PanelDataset resample(const PanelDataset& ds, Rng& rng) {
  const auto rows = resample_indices(ds.n(), rng);
  return ds.gather(rows);
}

std::vector<BootstrapResult> bootstrap_effects(const PanelDataset& ds,
                                               std::span<const EffectEstimate> points,
                                               const EstimatorOptions& options,
                                               const BootstrapOptions& boot, std::uint64_t seed) {
  if (boot.resamples < 2) throw Error(Errc::config, kModule, "need at least 2 resamples");
  const std::size_t B = boot.resamples;
  std::vector<Method> methods;
  for (const auto& p : points) methods.push_back(p.method);

  struct Outcome {
    std::vector<std::optional<double>> beta;
    std::optional<double> ps_intercept;
  };
  std::vector<Outcome> outcomes(B);

  parallel_for(B, boot.threads, [&](std::size_t b) {
    Outcome& out = outcomes[b];
    out.beta.resize(methods.size());
    Rng rng = make_rng(seed, {stream::resample, b});
    const PanelDataset sample = resample(ds, rng);
    try {
      const PipelineResult r = run_pipeline(sample, methods, options, derive_seed(seed, {stream::pipeline, b}));
      for (std::size_t m = 0; m < methods.size(); ++m) {
        if (r.estimates[m]) out.beta[m] = r.estimates[m]->beta;
      }
      out.ps_intercept = r.ps.fits.front().alpha_mle(0);
    } catch (const Error&) {
      // The shared propensity fit failed: every method loses this resample.
    }
  });

  std::vector<BootstrapResult> results;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    BootstrapResult res;
    res.method = methods[m];
    res.B = B;
    res.point = points[m].beta;
    for (const auto& o : outcomes) {
      if (o.beta[m]) {
        res.estimates.push_back(*o.beta[m]);
        if (o.ps_intercept) res.ps_intercepts.push_back(*o.ps_intercept);
      } else {
        ++res.failed;
      }
    }
    const double failure = static_cast<double>(res.failed) / static_cast<double>(B);
    if (failure > boot.max_failure_fraction || res.estimates.size() < 2) {
      throw Error(Errc::bootstrap_unstable, kModule,
                  std::string("bootstrap unstable: ") + to_string(methods[m]) + " failed on " +
                      std::to_string(res.failed) + " of " + std::to_string(B) + " resamples");
    }
    res.se = sample_sd(res.estimates);
    const Link link = points[m].link;
    res.ci95 = {to_delta(link, res.point - 1.96 * res.se), to_delta(link, res.point + 1.96 * res.se)};
    if (boot.percentile) {
      res.percentile_ci95 = Interval{to_delta(link, quantile(res.estimates, 0.025)),
                                     to_delta(link, quantile(res.estimates, 0.975))};
    }
    results.push_back(std::move(res));
  }
  return results;
}

BootstrapResult bootstrap_effect(const PanelDataset& ds, Method method,
                                 const EstimatorOptions& options, const BootstrapOptions& boot,
                                 std::uint64_t seed) {
  const EffectEstimate point = estimate(ds, method, options, derive_seed(seed, {stream::pipeline}));
  return bootstrap_effects(ds, std::span<const EffectEstimate>(&point, 1), options, boot, seed).front();
}

EffectEstimate apply_bootstrap(EffectEstimate estimate, const BootstrapResult& result) {
  estimate = with_standard_error(std::move(estimate), result.se);
  return estimate;
}

void write_bootstrap_csv(std::ostream& out, std::span<const BootstrapResult> results) {
  out << "method,b,estimate\n";
  for (const auto& r : results) {
    for (std::size_t b = 0; b < r.estimates.size(); ++b) {
      out << to_string(r.method) << ',' << b + 1 << ',' << format_double(r.estimates[b]) << '\n';
    }
  }
}

}  // namespace tvmsm
