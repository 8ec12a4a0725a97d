#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tvmsm/error.hpp"
#include "tvmsm/msm.hpp"
#include "tvmsm/panel.hpp"
#include "tvmsm/ppta.hpp"
#include "tvmsm/propensity.hpp"
#include "tvmsm/weights.hpp"

namespace tvmsm {

struct EstimatorOptions {
  MsmSpec spec{};
  PptaOptions ppta{};
  MleOptions mle{};
};

// Everything one pass of the analysis produces. A method that fails leaves
// its estimate empty and records the reason; a failure of the shared
// propensity fit is thrown.
struct PipelineResult {
  std::vector<Method> methods;
  std::vector<std::optional<EffectEstimate>> estimates;
  std::vector<std::optional<Error>> failures;
  SequentialPS ps;  // MLE fits
  std::optional<WeightSet> ipw;
  std::optional<WeightSet> sw;
  std::optional<WeightSet> ow;
  std::optional<PptaRun> ppta;
};

// Fits the propensity model by ML, then each requested method on the same
// data. PPTA draws its own posterior under a stream derived from `seed`.
PipelineResult run_pipeline(const PanelDataset& ds, std::span<const Method> methods,
                            const EstimatorOptions& options, std::uint64_t seed);

// Like run_pipeline but throws on the first failing method.
std::vector<EffectEstimate> estimate_methods(const PanelDataset& ds, std::span<const Method> methods,
                                             const EstimatorOptions& options, std::uint64_t seed);

EffectEstimate estimate(const PanelDataset& ds, Method method, const EstimatorOptions& options,
                        std::uint64_t seed);

}  // namespace tvmsm
