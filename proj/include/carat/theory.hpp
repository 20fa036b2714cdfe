#pragma once

#include <string_view>

#include "carat/core.hpp"

namespace carat {

struct PopulationMoments {
  double e_y = 0.0;
  double var_y = 0.0;
  double e_var_y_given_x = 0.0;
};

/// Exact null moments by enumeration over the strata:
///   E[Y] = sum_j pi_j h(eta_j),  E[Var(Y|X)] = sum_j pi_j phi h'(eta_j)/gamma'(eta_j),
///   Var(Y) = E[Var(Y|X)] + sum_j pi_j (h(eta_j) - E[Y])^2.
/// The scenario's delta is ignored. Throws DomainError if some eta_j is
/// outside the family's domain.
PopulationMoments population_moments(const Scenario& scenario);

enum class SizeClass { conservative, valid, anti_conservative };

std::string_view to_string(SizeClass c);

struct AsymptoticSummary {
  double e_y = 0.0;
  double var_y = 0.0;
  double e_var_y_given_x = 0.0;
  double denom = 0.0;       // phi h'h^{-1}(E[Y]) / gamma'h^{-1}(E[Y])
  double sigma_h_sq = 0.0;  // for complete randomization, Var(E[Y|X])
  double s_variance = 0.0;  // (e_var_y_given_x + sigma_h_sq) / denom
  SizeClass classification = SizeClass::valid;
};

/// Null limiting variance of the unadjusted Wald statistic. For complete
/// randomization the numerator is Var(Y) and sigma_h_sq is ignored; for
/// designs with bounded within-stratum imbalance callers pass 0.
AsymptoticSummary asymptotic_s_variance(const Scenario& scenario, double sigma_h_sq);

/// 2 (1 - Phi(z_{1-alpha/2} / sqrt(s_variance)))
double predicted_size(const AsymptoticSummary& summary, double alpha);

}  // namespace carat
