#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tvmsm/msm.hpp"
#include "tvmsm/panel.hpp"
#include "tvmsm/propensity.hpp"
#include "tvmsm/rng.hpp"

namespace tvmsm {

// One stochastic pruning iteration. `assigned` (T̃) and `states` (S) are
// populated by draw_overlap_states and kept by run() only on request.
struct OverlapDraw {
  std::size_t k = 0;
  ExposureMatrix assigned;
  ExposureMatrix states;
  std::vector<std::size_t> cos;  // units whose state is 1 at every time
  std::optional<double> beta0;
  std::optional<double> beta;
  std::optional<double> delta;  // present iff feasible
  bool feasible = false;
};

// T̃_ti ~ Bernoulli(e_ti) independently; S_ti = 1 iff T̃_ti differs from the
// observed T_ti.
OverlapDraw draw_overlap_states(const Eigen::MatrixXd& propensity, const ExposureMatrix& exposure,
                                Rng& rng);

struct PptaOptions {
  std::size_t draws = 1500;  // K
  std::size_t min_cos = 10;
  bool keep_states = false;
  double insufficient_fraction = 0.5;
  McmcOptions mcmc{};
  MleOptions mle{};
  unsigned threads = 1;
};

struct PptaRun {
  std::size_t K = 0;
  std::vector<OverlapDraw> draws;
  double delta_hat = 0.0;  // mean of feasible Δ^k; NaN when none are feasible
  double beta0_hat = 0.0;
  double beta_hat = 0.0;
  Eigen::VectorXd marginal_inclusion;  // over all K iterations
  double cos_size_mean = 0.0;
  double cos_size_sd = 0.0;
  double ever_used_fraction = 0.0;
  std::size_t skipped = 0;
  bool insufficient_overlap = false;
  std::vector<double> acceptance_rates;  // per time point, when sampled here
};

// Fills the n × D propensity matrix used at iteration k.
using PropensitySource = std::function<void(std::size_t k, Eigen::MatrixXd& propensity)>;

PptaRun run_with_propensities(const PanelDataset& ds, std::size_t iterations,
                              const PropensitySource& source, const MsmSpec& spec,
                              std::uint64_t seed, const PptaOptions& options);

// Uses row k of each time point's posterior draw matrix at iteration k.
PptaRun run_with_posterior(const PanelDataset& ds, const SequentialPS& ps, const MsmSpec& spec,
                           std::uint64_t seed, const PptaOptions& options);

// Full procedure: posterior sampling of every time point's propensity model,
// then K pruning iterations.
PptaRun run(const PanelDataset& ds, const MsmSpec& spec, std::uint64_t seed,
            const PptaOptions& options = {});

// Mean and sample SD of the feasible Δ^k. Needs two feasible iterations.
std::pair<double, double> point_and_spread(const PptaRun& run);

// β and β0 are averaged over feasible iterations; Δ follows the link.
EffectEstimate to_estimate(const PptaRun& run, const MsmSpec& spec);

nlohmann::json to_json(const PptaRun& run);

// k, feasible, cos_size, delta
void write_deltas_csv(std::ostream& out, const PptaRun& run);
// id, marginal_inclusion, ever_in_cos
void write_inclusion_csv(std::ostream& out, const PptaRun& run, const PanelDataset& ds);

}  // namespace tvmsm
