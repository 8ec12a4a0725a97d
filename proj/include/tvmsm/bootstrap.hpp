#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "tvmsm/msm.hpp"
#include "tvmsm/panel.hpp"
#include "tvmsm/pipeline.hpp"
#include "tvmsm/rng.hpp"

namespace tvmsm {

std::vector<std::size_t> resample_indices(std::size_t n, Rng& rng);

// n whole units drawn with replacement.
PanelDataset resample(const PanelDataset& ds, Rng& rng);

struct BootstrapOptions {
  std::size_t resamples = 100;  // B
  unsigned threads = 1;
  double max_failure_fraction = 0.2;
  bool percentile = false;
};

struct BootstrapResult {
  Method method = Method::unweighted;
  std::size_t B = 0;
  std::vector<double> estimates;  // β scale (equals Δ for the identity link)
  std::size_t failed = 0;
  double point = 0.0;  // β of the original-data estimate
  double se = 0.0;
  Interval ci95;       // Δ scale
  std::optional<Interval> percentile_ci95;
  // Time-1 intercept of the refitted propensity model per surviving resample.
  std::vector<double> ps_intercepts;
};

// Every resample reruns the full pipeline (propensity refit, weights or
// PPTA, MSM fit) for all methods in `points`, under stream (seed, b).
// Throws Errc::bootstrap_unstable when more than max_failure_fraction of the
// resamples fail for any method.
std::vector<BootstrapResult> bootstrap_effects(const PanelDataset& ds,
                                               std::span<const EffectEstimate> points,
                                               const EstimatorOptions& options,
                                               const BootstrapOptions& boot, std::uint64_t seed);

// Point estimate on the original data followed by bootstrap_effects.
BootstrapResult bootstrap_effect(const PanelDataset& ds, Method method,
                                 const EstimatorOptions& options, const BootstrapOptions& boot,
                                 std::uint64_t seed);

EffectEstimate apply_bootstrap(EffectEstimate estimate, const BootstrapResult& result);

// method, b, estimate
void write_bootstrap_csv(std::ostream& out, std::span<const BootstrapResult> results);

}  // namespace tvmsm
