#pragma once

#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "tvmsm/panel.hpp"

namespace tvmsm {

enum class Link { identity, log };
enum class Estimand { ate, ato };
enum class Method { unweighted, ipw, sw, ow, ppta };

const char* to_string(Link link) noexcept;
const char* to_string(Estimand estimand) noexcept;
const char* to_string(Method method) noexcept;
Method method_from_string(const std::string& name);
Link link_from_string(const std::string& name);

// IPW/SW/unweighted target the ATE, OW/PPTA the ATO.
Estimand estimand_of(Method method) noexcept;

// Observed-data model E[Y | T̄] = g⁻¹(β0 + β·ΣT).
struct MsmSpec {
  Link link = Link::identity;
  bool offset_used = true;  // log link only: person-time enters as log offset
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct EffectEstimate {
  double beta0 = 0.0;
  double beta = 0.0;
  double delta = 0.0;  // β for identity, e^β for log
  Link link = Link::identity;
  Estimand estimand = Estimand::ate;
  Method method = Method::unweighted;
  std::optional<double> se;  // on the β scale
  std::optional<Interval> ci95;
};

double to_delta(Link link, double beta) noexcept;

// Normal-approximation interval β ± 1.96·se, mapped to the Δ scale.
EffectEstimate with_standard_error(EffectEstimate estimate, double se);

// Weighted fit on regressors [1, ΣT]: closed-form WLS for the identity link,
// weighted Poisson IRLS for the log link. The link must match the outcome
// kind (identity ↔ continuous, log ↔ count).
EffectEstimate fit_weighted(const PanelDataset& ds, const Eigen::VectorXd& weights,
                            const MsmSpec& spec, Method method = Method::unweighted);

// Unweighted fit restricted to `members` (≥ 3 units with at least two
// distinct ΣT values); throws Errc::infeasible_subset otherwise.
EffectEstimate fit_on_subset(const PanelDataset& ds, std::span<const std::size_t> members,
                             const MsmSpec& spec, Method method = Method::unweighted);

nlohmann::json to_json(const EffectEstimate& estimate);

}  // namespace tvmsm
