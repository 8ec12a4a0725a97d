#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tvmsm/panel.hpp"

namespace tvmsm {

// Logistic design at one time point. Column layout:
// [intercept | W | X_t | X_{t-1} if t≥1 | T_{t-1} if t≥1 | T_{t-2} if t≥2].
// Lags that precede the first period are dropped, not zero-filled.
struct PSDesign {
  std::size_t time = 0;
  Eigen::MatrixXd x;
  Eigen::VectorXd response;
  std::vector<std::string> columns;

  std::size_t cols() const noexcept { return static_cast<std::size_t>(x.cols()); }
};

std::size_t design_width(std::size_t baseline_dim, std::size_t covariate_dim, std::size_t t);

PSDesign build_design(const PanelDataset& ds, std::size_t t);

struct MleOptions {
  double tol = 1e-8;           // on max |score component|
  int max_iter = 100;
  double divergence_norm = 1e3;
};

// Random-walk Metropolis settings. The proposal is c²·(inverse Fisher) with
// c = 2.38/√p, started at the MLE.
struct McmcOptions {
  int burn_in = 1000;
  int thin = 1;
};

struct PSFit {
  Eigen::VectorXd alpha_mle;
  Eigen::MatrixXd fisher_cov;
  Eigen::VectorXd e_mle;
  std::optional<Eigen::MatrixXd> posterior_draws;  // K × p, one draw per row
  std::optional<double> acceptance_rate;
  double loglik = 0.0;
  int iterations = 0;
  std::vector<double> loglik_trace;  // one entry per accepted Newton iterate
};

// Logistic regression by Newton–Raphson with step-halving. Throws
// Errc::no_mle when the response has a single class, Errc::rank_deficient,
// Errc::separation when the coefficient norm exceeds divergence_norm, and
// Errc::non_convergence after max_iter.
PSFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const MleOptions& options = {});

inline PSFit fit_mle(const PSDesign& design, const MleOptions& options = {}) {
  return fit_logistic(design.x, design.response, options);
}

double logistic_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& alpha);

// Adds K posterior draws (flat prior) to an existing MLE fit.
void sample_posterior(const PSDesign& design, PSFit& fit, std::size_t draws, std::uint64_t seed,
                      const McmcOptions& options = {});

PSFit sample_posterior(const PSDesign& design, std::size_t draws, std::uint64_t seed,
                       const McmcOptions& mcmc = {}, const MleOptions& mle = {});

inline constexpr double kProbabilityFloor = 1e-12;

// expit(x·alpha), clamped to [1e-12, 1 − 1e-12].
Eigen::VectorXd predict_ps(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& x);
inline Eigen::VectorXd predict_ps(const Eigen::VectorXd& alpha, const PSDesign& design) {
  return predict_ps(alpha, design.x);
}

struct SequentialPS {
  std::vector<PSFit> fits;

  std::size_t periods() const noexcept { return fits.size(); }
  // n × D matrix of fitted probabilities at the MLE.
  Eigen::MatrixXd propensity() const;
  bool has_posterior() const;
};

struct MleMode {};
struct PosteriorMode {
  std::size_t draws = 1500;
  std::uint64_t seed = 0;
  McmcOptions mcmc{};
};
using FitMode = std::variant<MleMode, PosteriorMode>;

// Independent fits at each time point; posterior chains use the stream
// (seed, t) so results do not depend on `threads`.
SequentialPS fit_sequential(const PanelDataset& ds, const FitMode& mode,
                            const MleOptions& mle = {}, unsigned threads = 1);

}  // namespace tvmsm
