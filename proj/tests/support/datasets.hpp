#pragma once

#include <random>
#include <vector>

#include "carat/glm.hpp"

namespace carat::test_support {

/// Small two-arm dataset, 8 to 40 records, with per-record linear predictors
/// scattered around a family-specific base so that the treatment-only
/// working model is misspecified as in the simulations.
inline std::vector<TrialRecord> random_dataset(const GlmFamily& family, Rng& rng) {
  std::uniform_int_distribution<int> size(8, 40);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  const auto n = static_cast<std::size_t>(size(rng));
  double base = 0.0;
  switch (family.tag()) {
    case FamilyTag::bernoulli_logit: base = 0.2; break;
    case FamilyTag::poisson_log: base = 0.7; break;
    case FamilyTag::normal_identity: base = 1.0; break;
    case FamilyTag::exponential_inverse: base = 1.2; break;
    case FamilyTag::exponential_neg_inverse: base = -1.2; break;
  }
  const double delta = jitter(rng);
  std::vector<TrialRecord> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i].arm = i % 2 == 0 ? Arm::treatment : Arm::control;
    if (uniform01(rng) < 0.3) data[i].arm = data[i].arm == Arm::treatment ? Arm::control : Arm::treatment;
    const double eta = base + delta * indicator(data[i].arm) + jitter(rng);
    data[i].y = family.sample(eta, rng);
  }
  return data;
}

}  // namespace carat::test_support
