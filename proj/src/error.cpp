#include "tvmsm/error.hpp"

namespace tvmsm {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_data: return "invalid data";
    case Errc::config: return "configuration error";
    case Errc::io: return "i/o error";
    case Errc::no_mle: return "no MLE";
    case Errc::separation: return "quasi-separation";
    case Errc::rank_deficient: return "rank deficient design";
    case Errc::non_convergence: return "non-convergence";
    case Errc::no_contrast: return "no contrast";
    case Errc::infeasible_subset: return "infeasible subset";
    case Errc::insufficient_feasible: return "insufficient feasible iterations";
    case Errc::bootstrap_unstable: return "bootstrap unstable";
  }
  return "unknown";
}

}  // namespace tvmsm
