#include "tvmsm/msm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tvmsm/error.hpp"

namespace tvmsm {

namespace {

const char* kModule = "msm";

struct Coefficients {
  double beta0;
  double beta;
};

void check_link(const PanelDataset& ds, const MsmSpec& spec) {
  const bool ok = (spec.link == Link::identity) == (ds.outcome_kind() == OutcomeKind::continuous);
  if (!ok) {
    throw Error(Errc::config, kModule,
                std::string(to_string(spec.link)) + " link does not match " +
                    to_string(ds.outcome_kind()) + " outcome");
  }
}

bool has_contrast(std::span<const double> x, std::span<const double> w) {
  std::optional<double> first;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] <= 0.0) continue;
    if (!first) first = x[i];
    else if (x[i] != *first) return true;
  }
  return false;
}

Coefficients weighted_least_squares(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> w) {
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xbar = sx / sw;
  const double ybar = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - xbar;
    sxx += w[i] * dx * dx;
    sxy += w[i] * dx * (y[i] - ybar);
  }
  const double beta = sxy / sxx;
  return {ybar - beta * xbar, beta};
}

double poisson_loglik(std::span<const double> x, std::span<const double> y,
                      std::span<const double> w, std::span<const double> log_offset,
                      const Coefficients& c) {
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eta = c.beta0 + c.beta * x[i] + (log_offset.empty() ? 0.0 : log_offset[i]);
    ll += w[i] * (y[i] * eta - std::exp(eta));
  }
  return ll;
}

Coefficients weighted_poisson(std::span<const double> x, std::span<const double> y,
                              std::span<const double> w, std::span<const double> log_offset) {
  double swy = 0.0, swo = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    swy += w[i] * y[i];
    swo += w[i] * (log_offset.empty() ? 1.0 : std::exp(log_offset[i]));
  }
  if (!(swy > 0.0)) {
    throw Error(Errc::non_convergence, kModule, "weighted outcome total is zero; no Poisson MLE");
  }
  Coefficients c{std::log(swy / swo), 0.0};
  double ll = poisson_loglik(x, y, w, log_offset, c);
  for (int iter = 0; iter < 100; ++iter) {
    double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double eta = c.beta0 + c.beta * x[i] + (log_offset.empty() ? 0.0 : log_offset[i]);
      const double mu = std::exp(eta);
      const double r = w[i] * (y[i] - mu);
      g0 += r;
      g1 += r * x[i];
      h00 += w[i] * mu;
      h01 += w[i] * mu * x[i];
      h11 += w[i] * mu * x[i] * x[i];
    }
    const double det = h00 * h11 - h01 * h01;
    if (!(det > 0.0)) throw Error(Errc::no_contrast, kModule, "singular Poisson information");
    double s0 = (h11 * g0 - h01 * g1) / det;
    double s1 = (h00 * g1 - h01 * g0) / det;

    Coefficients next{c.beta0 + s0, c.beta + s1};
    double ll_next = poisson_loglik(x, y, w, log_offset, next);
    for (int h = 0; h < 50 && !(ll_next >= ll - 1e-12 * std::max(1.0, std::abs(ll))); ++h) {
      s0 *= 0.5;
      s1 *= 0.5;
      next = {c.beta0 + s0, c.beta + s1};
      ll_next = poisson_loglik(x, y, w, log_offset, next);
    }
    c = next;
    ll = ll_next;
    if (std::max(std::abs(s0), std::abs(s1)) < 1e-12 * (1.0 + std::abs(c.beta0) + std::abs(c.beta))) {
      return c;
    }
  }
  throw Error(Errc::non_convergence, kModule, "weighted Poisson IRLS did not converge");
}

EffectEstimate finish(const Coefficients& c, const MsmSpec& spec, Method method) {
  EffectEstimate est;
  est.beta0 = c.beta0;
  est.beta = c.beta;
  est.delta = to_delta(spec.link, c.beta);
  est.link = spec.link;
  est.method = method;
  est.estimand = estimand_of(method);
  return est;
}

Coefficients fit_columns(std::span<const double> x, std::span<const double> y,
                         std::span<const double> w, std::span<const double> log_offset,
                         Link link) {
  return link == Link::identity ? weighted_least_squares(x, y, w)
                                : weighted_poisson(x, y, w, log_offset);
}

}  // namespace

const char* to_string(Link link) noexcept { return link == Link::log ? "log" : "identity"; }
const char* to_string(Estimand estimand) noexcept { return estimand == Estimand::ato ? "ATO" : "ATE"; }

const char* to_string(Method method) noexcept {
  switch (method) {
    case Method::unweighted: return "UNWEIGHTED";
    case Method::ipw: return "IPW";
    case Method::sw: return "SW";
    case Method::ow: return "OW";
    case Method::ppta: return "PPTA";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (s == "ipw") return Method::ipw;
  if (s == "sw") return Method::sw;
  if (s == "ow") return Method::ow;
  if (s == "ppta") return Method::ppta;
  if (s == "unweighted") return Method::unweighted;
  throw Error(Errc::config, kModule, "unknown method '" + name + "'");
}

Link link_from_string(const std::string& name) {
  if (name == "identity") return Link::identity;
  if (name == "log") return Link::log;
  throw Error(Errc::config, kModule, "unknown link '" + name + "'");
}

Estimand estimand_of(Method method) noexcept {
  return method == Method::ow || method == Method::ppta ? Estimand::ato : Estimand::ate;
}

double to_delta(Link link, double beta) noexcept {
  return link == Link::log ? std::exp(beta) : beta;
}

EffectEstimate with_standard_error(EffectEstimate estimate, double se) {
  estimate.se = se;
  estimate.ci95 = Interval{to_delta(estimate.link, estimate.beta - 1.96 * se),
                           to_delta(estimate.link, estimate.beta + 1.96 * se)};
  return estimate;
}

EffectEstimate fit_weighted(const PanelDataset& ds, const Eigen::VectorXd& weights,
                            const MsmSpec& spec, Method method) {
  check_link(ds, spec);
  if (static_cast<std::size_t>(weights.size()) != ds.n()) {
    throw Error(Errc::config, kModule, "weight vector length does not match the panel");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights(i) >= 0.0) || !std::isfinite(weights(i))) {
      throw Error(Errc::invalid_data, kModule, "weights must be finite and non-negative");
    }
    total += weights(i);
  }
  if (!(total > 0.0)) throw Error(Errc::invalid_data, kModule, "all weights are zero");

  const auto n = ds.n();
  std::span<const double> x(ds.exposure_total().data(), n);
  std::span<const double> y(ds.outcome().data(), n);
  std::span<const double> w(weights.data(), n);
  if (!has_contrast(x, w)) {
    throw Error(Errc::no_contrast, kModule,
                "no contrast: every positively weighted unit has the same cumulative exposure");
  }
  std::vector<double> log_offset;
  if (spec.link == Link::log && spec.offset_used && ds.offset()) {
    log_offset.resize(n);
    for (std::size_t i = 0; i < n; ++i) log_offset[i] = std::log((*ds.offset())(static_cast<Eigen::Index>(i)));
  }
  return finish(fit_columns(x, y, w, log_offset, spec.link), spec, method);
}

EffectEstimate fit_on_subset(const PanelDataset& ds, std::span<const std::size_t> members,
                             const MsmSpec& spec, Method method) {
  check_link(ds, spec);
  if (members.size() < 3) {
    throw Error(Errc::infeasible_subset, kModule,
                "infeasible subset: " + std::to_string(members.size()) + " members, need at least 3");
  }
  const bool use_offset = spec.link == Link::log && spec.offset_used && ds.offset();
  std::vector<double> x, y, w(members.size(), 1.0), log_offset;
  x.reserve(members.size());
  y.reserve(members.size());
  for (std::size_t i : members) {
    if (i >= ds.n()) throw Error(Errc::config, kModule, "subset index out of range");
    const auto row = static_cast<Eigen::Index>(i);
    x.push_back(ds.exposure_total()(row));
    y.push_back(ds.outcome()(row));
    if (use_offset) log_offset.push_back(std::log((*ds.offset())(row)));
  }
  if (!has_contrast(x, w)) {
    throw Error(Errc::infeasible_subset, kModule,
                "infeasible subset: all members share one cumulative exposure value");
  }
  try {
    return finish(fit_columns(x, y, w, log_offset, spec.link), spec, method);
  } catch (const Error& e) {
    throw Error(Errc::infeasible_subset, kModule, "infeasible subset: " + e.message());
  }
}

nlohmann::json to_json(const EffectEstimate& e) {
  nlohmann::json j;
  j["method"] = to_string(e.method);
  j["estimand"] = to_string(e.estimand);
  j["link"] = to_string(e.link);
  j["beta0"] = e.beta0;
  j["beta"] = e.beta;
  j["delta"] = e.delta;
  j["se"] = e.se ? nlohmann::json(*e.se) : nlohmann::json(nullptr);
  j["ci_low"] = e.ci95 ? nlohmann::json(e.ci95->low) : nlohmann::json(nullptr);
  j["ci_high"] = e.ci95 ? nlohmann::json(e.ci95->high) : nlohmann::json(nullptr);
  return j;
}

}  // namespace tvmsm
