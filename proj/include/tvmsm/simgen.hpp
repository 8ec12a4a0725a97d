#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tvmsm/panel.hpp"

namespace tvmsm {

enum class EffectMode { homogeneous, heterogeneous };

const char* to_string(EffectMode mode) noexcept;
EffectMode effect_mode_from_string(const std::string& name);

// Coefficients of the true logistic exposure model. Scalars apply to every
// coordinate of the corresponding covariate vector.
struct TrueExposureModel {
  double intercept = 0.0;
  double baseline = 0.3;
  double current = 1.0;    // X_t
  double lagged = 0.5;     // X_{t-1}
  double lag1_exposure = 0.5;
  double lag2_exposure = 0.3;
};

// Mean of X_t: tau_T1·T_{t-1} + tau_T2·T_{t-2} + tau_X1·X_{t-1} + tau_X2·X_{t-2}.
struct CovariateDynamics {
  double tau_t1 = 0.2;
  double tau_t2 = 0.1;
  double tau_x1 = 0.2;
  double tau_x2 = 0.1;
};

struct OutcomeModel {
  double intercept = -1.0;
  double delta_star = 0.5;
  double baseline = 0.3;
  double covariate_scale = 0.1;  // β_X at period d is scale/(D − d + 1)
  double noise_sd = 1.0;
};

struct SimConfig {
  std::size_t n = 5000;
  std::size_t periods = 3;
  std::size_t baseline_dim = 3;
  std::size_t covariate_dim = 3;
  CovariateDynamics tau{};
  TrueExposureModel alpha{};
  OutcomeModel beta{};
  EffectMode mode = EffectMode::homogeneous;
  std::uint64_t seed = 1;
};

struct SimulatedDataset {
  PanelDataset panel;
  Eigen::MatrixXd e_true;  // n × D
  std::optional<std::vector<std::uint8_t>> dgcop;  // heterogeneous mode only
  std::vector<std::uint8_t> dgcop_periods;  // count of time points in a mixed bin
};

SimulatedDataset generate(const SimConfig& cfg);

inline constexpr std::size_t kDgcopBins = 20;
inline constexpr std::size_t kDgcopShareDenominator = 10;  // minimum share 1/10

// Per time point: equal-count bins of e_true (ties broken by unit index);
// O_ti = 1 iff unit i's bin holds ≥10% treated and ≥10% untreated units.
// Returns the n × D indicator matrix.
ExposureMatrix overlap_bins(const Eigen::MatrixXd& e_true, const ExposureMatrix& exposure);

// O*_i = ∏_t O_ti.
std::vector<std::uint8_t> compute_dgcop(const Eigen::MatrixXd& e_true, const ExposureMatrix& exposure);

struct TrueEstimands {
  double ate = 0.0;
  double ato = 0.0;
  double dgcop_share = 1.0;  // mean O* of the oracle sample (1 when homogeneous)
  double ow_oracle = 0.0;    // OW fit with true scores on the oracle sample
};

// Homogeneous: ATE = ATO = Δ*. Heterogeneous: ATE = Δ*·mean(O*), ATO = OW
// fit with the true propensity scores on one large oracle sample.
TrueEstimands true_estimands(const SimConfig& cfg, std::size_t n_oracle, std::uint64_t seed);

}  // namespace tvmsm
