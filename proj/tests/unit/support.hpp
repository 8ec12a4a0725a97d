#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tvmsm/panel.hpp"

namespace tvmsm::testing {

// Panel with one baseline and one time-varying covariate of zeros; exposure
// given row by row.
inline RawPanel raw_panel(const std::vector<std::vector<int>>& exposure, const std::vector<double>& outcome) {
  RawPanel raw;
  raw.n = exposure.size();
  raw.periods = exposure.front().size();
  raw.baseline_dim = 1;
  raw.covariate_dim = 1;
  raw.baseline.assign(raw.n, 0.0);
  raw.timevarying.assign(raw.n * raw.periods, 0.0);
  for (const auto& row : exposure) {
    for (int t : row) raw.exposure.push_back(t);
  }
  raw.outcome = outcome;
  return raw;
}

// Random panel with standard-normal covariates and Bernoulli(0.5) exposure.
inline RawPanel random_raw(std::size_t n, std::size_t periods, std::size_t pw, std::size_t px, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  RawPanel raw;
  raw.n = n;
  raw.periods = periods;
  raw.baseline_dim = pw;
  raw.covariate_dim = px;
  for (std::size_t i = 0; i < n * pw; ++i) raw.baseline.push_back(normal(rng));
  for (std::size_t i = 0; i < n * periods * px; ++i) raw.timevarying.push_back(normal(rng));
  for (std::size_t i = 0; i < n * periods; ++i) raw.exposure.push_back(coin(rng) ? 1.0 : 0.0);
  for (std::size_t i = 0; i < n; ++i) raw.outcome.push_back(normal(rng));
  return raw;
}

}  // namespace tvmsm::testing
