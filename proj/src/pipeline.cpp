#include "tvmsm/pipeline.hpp"

#include "tvmsm/error.hpp"
#include "tvmsm/rng.hpp"

namespace tvmsm {

PipelineResult run_pipeline(const PanelDataset& ds, std::span<const Method> methods,
                            const EstimatorOptions& options, std::uint64_t seed) {
  PipelineResult out;
  out.methods.assign(methods.begin(), methods.end());
  out.estimates.resize(methods.size());
  out.failures.resize(methods.size());
  out.ps = fit_sequential(ds, MleMode{}, options.mle);
  const Eigen::MatrixXd e = out.ps.propensity();

  for (std::size_t m = 0; m < methods.size(); ++m) {
    try {
      switch (methods[m]) {
        case Method::unweighted:
          out.estimates[m] = fit_weighted(ds, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ds.n())),
                                          options.spec, Method::unweighted);
          break;
        case Method::ipw:
          if (!out.ipw) out.ipw = ipw(e, ds);
          out.estimates[m] = fit_weighted(ds, out.ipw->values, options.spec, Method::ipw);
          break;
        case Method::sw:
          if (!out.sw) out.sw = stabilized(e, ds, options.mle);
          out.estimates[m] = fit_weighted(ds, out.sw->values, options.spec, Method::sw);
          break;
        case Method::ow:
          if (!out.ow) out.ow = overlap(e, ds);
          out.estimates[m] = fit_weighted(ds, out.ow->values, options.spec, Method::ow);
          break;
        case Method::ppta: {
          PptaOptions ppta = options.ppta;
          ppta.mle = options.mle;
          out.ppta = run(ds, options.spec, derive_seed(seed, {stream::pipeline}), ppta);
          out.estimates[m] = to_estimate(*out.ppta, options.spec);
          break;
        }
      }
    } catch (const Error& err) {
      out.failures[m] = err;
    }
  }
  return out;
}

std::vector<EffectEstimate> estimate_methods(const PanelDataset& ds, std::span<const Method> methods,
                                             const EstimatorOptions& options, std::uint64_t seed) {
  PipelineResult result = run_pipeline(ds, methods, options, seed);
  std::vector<EffectEstimate> out;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (!result.estimates[m]) {
      const Error& err = *result.failures[m];
      throw Error(err.code(), err.module(), std::string(to_string(methods[m])) + ": " + err.message());
    }
    out.push_back(*result.estimates[m]);
  }
  return out;
}

EffectEstimate estimate(const PanelDataset& ds, Method method, const EstimatorOptions& options,
                        std::uint64_t seed) {
  const Method one[] = {method};
  return estimate_methods(ds, one, options, seed).front();
}

}  // namespace tvmsm
