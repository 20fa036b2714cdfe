#pragma once

#include <span>

#include "carat/core.hpp"

namespace carat {

/// Response family and link: mean function h, its derivative, the inverse
/// link, and gamma' where theta = gamma(eta). Dispersion phi is known.
class GlmFamily {
 public:
  explicit GlmFamily(FamilyTag tag, double phi = 1.0);

  FamilyTag tag() const { return tag_; }
  double phi() const { return phi_; }

  double mean(double eta) const;             // h(eta)
  double mean_derivative(double eta) const;  // h'(eta)
  double link(double mean) const;            // h^{-1}(m)
  double theta_derivative(double eta) const; // gamma'(eta)

  /// phi * h'(eta) / gamma'(eta)
  double conditional_variance(double eta) const;

  /// Linear predictors for which the mean is a valid parameter.
  bool eta_in_domain(double eta) const;

  /// Means strictly inside the family's mean space; boundary means make
  /// the working-model fit non-estimable.
  bool mean_in_domain(double mean) const;

  bool response_in_support(double y) const;

  /// Draws Y given eta. Throws DomainError when eta is outside the domain.
  double sample(double eta, Rng& rng) const;

 private:
  FamilyTag tag_;
  double phi_;
};

inline GlmFamily family_of(const Scenario& scenario) { return GlmFamily(scenario.family, scenario.phi); }

/// mu + delta * T + beta . dummy(profile)
double linear_predictor(const Scenario& scenario, const CovariateProfile& profile, Arm arm);

double sample_response(const GlmFamily& family, double eta, Rng& rng);

struct FitResult {
  double mu_hat = 0.0;
  double delta_hat = 0.0;
  double se_delta = 0.0;
  std::size_t n1 = 0;  // treatment
  std::size_t n0 = 0;  // control
};

/// Maximum-likelihood fit of the treatment-only working model. The MLE
/// matches each arm's fitted mean to its sample mean, and the standard
/// error comes from the two-cell information matrix:
///   se^2 = phi * (1 / (n1 a1) + 1 / (n0 a0)),  a = h'(eta) gamma'(eta).
/// Throws NonEstimable for an empty arm or a boundary arm mean.
FitResult fit_working_model(std::span<const TrialRecord> data, const GlmFamily& family);

/// S = delta_hat / se(delta_hat) against the standard normal.
TestReport wald_statistic(const FitResult& fit, double alpha = 0.05);

}  // namespace carat
