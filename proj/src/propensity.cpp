#include "tvmsm/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

#include "tvmsm/error.hpp"
#include "tvmsm/parallel.hpp"
#include "tvmsm/rng.hpp"

namespace tvmsm {

namespace {

const char* kModule = "propensity";

// Σ y·η − log(1 + e^η), with η written into `eta`. log(1 + z) for z ≤ 1 is
// within 1.2e-16 of log1p(z) and vectorizes.
double loglik_into(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& alpha, Eigen::VectorXd& eta) {
  eta.noalias() = x * alpha;
  const auto a = eta.array();
  return (y.array() * a - (a.max(0.0) + (1.0 + (-a.abs()).exp()).log())).sum();
}

Eigen::VectorXd expit(const Eigen::VectorXd& eta) {
  return (1.0 / (1.0 + (-eta.array()).exp())).matrix();
}

Eigen::MatrixXd information(const Eigen::MatrixXd& x, const Eigen::VectorXd& mu) {
  const Eigen::ArrayXd w = mu.array() * (1.0 - mu.array());
  Eigen::MatrixXd weighted = x.array().colwise() * w;
  Eigen::MatrixXd h = x.transpose() * weighted;
  return h.selfadjointView<Eigen::Lower>();
}

}  // namespace

std::size_t design_width(std::size_t baseline_dim, std::size_t covariate_dim, std::size_t t) {
  return 1 + baseline_dim + covariate_dim * std::min<std::size_t>(t + 1, 2) +
         std::min<std::size_t>(t, 2);
}

PSDesign build_design(const PanelDataset& ds, std::size_t t) {
  if (t >= ds.periods()) {
    throw Error(Errc::config, kModule,
                "time index " + std::to_string(t + 1) + " outside 1.." + std::to_string(ds.periods()));
  }
  const auto n = static_cast<Eigen::Index>(ds.n());
  const std::size_t pw = ds.baseline_dim();
  const std::size_t px = ds.covariate_dim();
  const std::size_t d = t + 1;

  PSDesign design;
  design.time = t;
  design.x.resize(n, static_cast<Eigen::Index>(design_width(pw, px, t)));
  Eigen::Index c = 0;

  design.x.col(c++).setOnes();
  design.columns.push_back("intercept");
  for (std::size_t j = 0; j < pw; ++j) {
    design.x.col(c++) = ds.baseline().col(static_cast<Eigen::Index>(j));
    design.columns.push_back("w_" + std::to_string(j + 1));
  }
  auto add_covariates = [&](std::size_t time, std::size_t label) {
    for (std::size_t r = 0; r < px; ++r) {
      design.x.col(c++) = ds.timevarying().col(static_cast<Eigen::Index>(time * px + r));
      design.columns.push_back("x_" + std::to_string(label) + "_" + std::to_string(r + 1));
    }
  };
  add_covariates(t, d);
  if (t >= 1) add_covariates(t - 1, d - 1);
  if (t >= 1) {
    design.x.col(c++) = ds.exposure().col(static_cast<Eigen::Index>(t - 1)).cast<double>();
    design.columns.push_back("t_" + std::to_string(d - 1));
  }
  if (t >= 2) {
    design.x.col(c++) = ds.exposure().col(static_cast<Eigen::Index>(t - 2)).cast<double>();
    design.columns.push_back("t_" + std::to_string(d - 2));
  }
  design.response = ds.exposure().col(static_cast<Eigen::Index>(t)).cast<double>();
  return design;
}

double logistic_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& alpha) {
  Eigen::VectorXd eta(x.rows());
  return loglik_into(x, y, alpha, eta);
}

constexpr double kStepTol = 1e-6;

PSFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MleOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double ones = y.sum();
  if (n == 0 || ones == 0.0 || ones == static_cast<double>(n)) {
    throw Error(Errc::no_mle, kModule, "response has a single class; no MLE exists");
  }
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p) {
      throw Error(Errc::rank_deficient, kModule,
                  "design has rank " + std::to_string(qr.rank()) + " < " + std::to_string(p));
    }
  }

  PSFit fit;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta(n);
  double ll = loglik_into(x, y, alpha, eta);
  fit.loglik_trace.push_back(ll);

  bool converged = false;
  int iter = 0;
  for (; iter <= options.max_iter; ++iter) {
    const Eigen::VectorXd mu = expit(eta);
    const Eigen::VectorXd score = x.transpose() * (y - mu);
    Eigen::LLT<Eigen::MatrixXd> llt(information(x, mu));
    if (llt.info() != Eigen::Success) {
      throw Error(Errc::separation, kModule, "quasi-separation: information matrix is singular");
    }
    Eigen::VectorXd step = llt.solve(score);
    // A vanishing score with a Newton step that does not vanish means the
    // likelihood is still rising toward infinity along a separating direction.
    if (score.cwiseAbs().maxCoeff() < options.tol && step.cwiseAbs().maxCoeff() < kStepTol) {
      converged = true;
      break;
    }
    if (iter == options.max_iter) break;

    Eigen::VectorXd candidate = alpha + step;
    Eigen::VectorXd eta_candidate(n);
    double ll_candidate = loglik_into(x, y, candidate, eta_candidate);
    const double slack = 1e-12 * std::max(1.0, std::abs(ll));
    int halvings = 0;
    while (!(ll_candidate >= ll - slack) && halvings < 50) {
      step *= 0.5;
      candidate = alpha + step;
      ll_candidate = loglik_into(x, y, candidate, eta_candidate);
      ++halvings;
    }
    if (!(ll_candidate >= ll - slack)) {
      throw Error(Errc::non_convergence, kModule, "step-halving failed to increase the likelihood");
    }
    alpha = std::move(candidate);
    eta = std::move(eta_candidate);
    ll = ll_candidate;
    fit.loglik_trace.push_back(ll);
    if (alpha.norm() > options.divergence_norm) {
      throw Error(Errc::separation, kModule,
                  "quasi-separation: coefficient norm exceeded " +
                      std::to_string(options.divergence_norm));
    }
  }
  if (!converged) {
    throw Error(Errc::non_convergence, kModule,
                "no convergence after " + std::to_string(options.max_iter) + " iterations");
  }

  const Eigen::Index id = p;
  Eigen::LLT<Eigen::MatrixXd> llt(information(x, expit(eta)));
  if (llt.info() != Eigen::Success) {
    throw Error(Errc::separation, kModule, "quasi-separation: information matrix is singular");
  }
  fit.fisher_cov = llt.solve(Eigen::MatrixXd::Identity(id, id));
  fit.alpha_mle = std::move(alpha);
  fit.e_mle = predict_ps(fit.alpha_mle, x);
  fit.loglik = ll;
  fit.iterations = iter;
  return fit;
}

void sample_posterior(const PSDesign& design, PSFit& fit, std::size_t draws, std::uint64_t seed,
                      const McmcOptions& options) {
  if (options.burn_in < 0 || options.thin < 1) {
    throw Error(Errc::config, kModule, "burn-in must be ≥ 0 and thinning ≥ 1");
  }
  const Eigen::Index p = fit.alpha_mle.size();
  const Eigen::Index n = design.x.rows();
  Eigen::LLT<Eigen::MatrixXd> chol(fit.fisher_cov);
  if (chol.info() != Eigen::Success) {
    throw Error(Errc::separation, kModule, "inverse Fisher information is not positive definite");
  }
  const Eigen::MatrixXd proposal = (2.38 / std::sqrt(static_cast<double>(p))) * chol.matrixL().toDenseMatrix();

  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  Eigen::VectorXd current = fit.alpha_mle;
  Eigen::VectorXd eta(n);
  double ll = loglik_into(design.x, design.response, current, eta);
  Eigen::VectorXd z(p);
  Eigen::VectorXd candidate(p);

  Eigen::MatrixXd kept(static_cast<Eigen::Index>(draws), p);
  const std::size_t total =
      static_cast<std::size_t>(options.burn_in) + draws * static_cast<std::size_t>(options.thin);
  std::size_t accepted = 0;
  Eigen::Index row = 0;
  for (std::size_t it = 0; it < total; ++it) {
    for (Eigen::Index j = 0; j < p; ++j) z(j) = normal(rng);
    candidate.noalias() = current + proposal * z;
    const double ll_candidate = loglik_into(design.x, design.response, candidate, eta);
    if (std::log(uniform(rng)) < ll_candidate - ll) {
      current = candidate;
      ll = ll_candidate;
      ++accepted;
    }
    if (it >= static_cast<std::size_t>(options.burn_in) &&
        (it - static_cast<std::size_t>(options.burn_in) + 1) % static_cast<std::size_t>(options.thin) == 0) {
      kept.row(row++) = current.transpose();
    }
  }
  const double rate = total ? static_cast<double>(accepted) / static_cast<double>(total) : 0.0;
  if (rate < 0.1 || rate > 0.6) {
    spdlog::warn("propensity: time {} Metropolis acceptance rate {:.3f} outside [0.1, 0.6]",
                 design.time + 1, rate);
  }
  fit.posterior_draws = std::move(kept);
  fit.acceptance_rate = rate;
}

PSFit sample_posterior(const PSDesign& design, std::size_t draws, std::uint64_t seed,
                       const McmcOptions& mcmc, const MleOptions& mle) {
  PSFit fit = fit_mle(design, mle);
  sample_posterior(design, fit, draws, seed, mcmc);
  return fit;
}

Eigen::VectorXd predict_ps(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& x) {
  if (alpha.size() != x.cols()) {
    throw Error(Errc::config, kModule,
                "coefficient length " + std::to_string(alpha.size()) + " does not match design width " +
                    std::to_string(x.cols()));
  }
  Eigen::VectorXd e = expit(x * alpha);
  std::size_t clamped = 0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    if (e(i) < kProbabilityFloor) {
      e(i) = kProbabilityFloor;
      ++clamped;
    } else if (e(i) > 1.0 - kProbabilityFloor) {
      e(i) = 1.0 - kProbabilityFloor;
      ++clamped;
    }
  }
  if (clamped > 0) spdlog::debug("propensity: clamped {} probabilities to [1e-12, 1-1e-12]", clamped);
  return e;
}

Eigen::MatrixXd SequentialPS::propensity() const {
  if (fits.empty()) return {};
  Eigen::MatrixXd e(fits.front().e_mle.size(), static_cast<Eigen::Index>(fits.size()));
  for (std::size_t t = 0; t < fits.size(); ++t) e.col(static_cast<Eigen::Index>(t)) = fits[t].e_mle;
  return e;
}

bool SequentialPS::has_posterior() const {
  return !fits.empty() && std::all_of(fits.begin(), fits.end(),
                                      [](const PSFit& f) { return f.posterior_draws.has_value(); });
}

SequentialPS fit_sequential(const PanelDataset& ds, const FitMode& mode, const MleOptions& mle,
                            unsigned threads) {
  SequentialPS ps;
  ps.fits.resize(ds.periods());
  parallel_for(ds.periods(), threads, [&](std::size_t t) {
    try {
      const PSDesign design = build_design(ds, t);
      PSFit fit = fit_mle(design, mle);
      if (const auto* post = std::get_if<PosteriorMode>(&mode)) {
        sample_posterior(design, fit, post->draws, derive_seed(post->seed, {stream::posterior, t}),
                         post->mcmc);
      }
      ps.fits[t] = std::move(fit);
    } catch (const Error& e) {
      throw Error(e.code(), kModule, "time " + std::to_string(t + 1) + ": " + e.message());
    }
  });
  return ps;
}

}  // namespace tvmsm
