#include "carat/glm.hpp"

#include <cmath>
#include <string>

namespace carat {

GlmFamily::GlmFamily(FamilyTag tag, double phi) : tag_(tag), phi_(phi) {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw ConfigError("dispersion must be positive");
  if (tag != FamilyTag::normal_identity && phi != 1.0)
    throw ConfigError("dispersion is fixed at 1 for " + std::string(to_string(tag)));
}

double GlmFamily::mean(double eta) const {
  switch (tag_) {
    case FamilyTag::bernoulli_logit:
      return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    case FamilyTag::poisson_log:
      return std::exp(eta);
    case FamilyTag::normal_identity:
      return eta;
    case FamilyTag::exponential_inverse:
      return 1.0 / eta;
    case FamilyTag::exponential_neg_inverse:
      return -1.0 / eta;
  }
  return 0.0;
}

double GlmFamily::mean_derivative(double eta) const {
  switch (tag_) {
    case FamilyTag::bernoulli_logit: {
      const double m = mean(eta);
      return m * (1.0 - m);
    }
    case FamilyTag::poisson_log:
      return std::exp(eta);
    case FamilyTag::normal_identity:
      return 1.0;
    case FamilyTag::exponential_inverse:
      return -1.0 / (eta * eta);
    case FamilyTag::exponential_neg_inverse:
      return 1.0 / (eta * eta);
  }
  return 0.0;
}

double GlmFamily::link(double m) const {
  switch (tag_) {
    case FamilyTag::bernoulli_logit:
      return std::log(m / (1.0 - m));
    case FamilyTag::poisson_log:
      return std::log(m);
    case FamilyTag::normal_identity:
      return m;
    case FamilyTag::exponential_inverse:
      return 1.0 / m;
    case FamilyTag::exponential_neg_inverse:
      return -1.0 / m;
  }
  return 0.0;
}

double GlmFamily::theta_derivative(double) const {
  // theta = -eta for the inverse link, eta otherwise.
  return tag_ == FamilyTag::exponential_inverse ? -1.0 : 1.0;
}

double GlmFamily::conditional_variance(double eta) const {
  return phi_ * mean_derivative(eta) / theta_derivative(eta);
}

bool GlmFamily::eta_in_domain(double eta) const {
  if (!std::isfinite(eta)) return false;
  switch (tag_) {
    case FamilyTag::exponential_inverse:
      return eta > 0.0;
    case FamilyTag::exponential_neg_inverse:
      return eta < 0.0;
    default:
      return true;
  }
}

bool GlmFamily::mean_in_domain(double m) const {
  if (!std::isfinite(m)) return false;
  switch (tag_) {
    case FamilyTag::bernoulli_logit:
      return m > 0.0 && m < 1.0;
    case FamilyTag::normal_identity:
      return true;
    default:
      return m > 0.0;
  }
}

bool GlmFamily::response_in_support(double y) const {
  if (!std::isfinite(y)) return false;
  switch (tag_) {
    case FamilyTag::bernoulli_logit:
      return y == 0.0 || y == 1.0;
    case FamilyTag::poisson_log:
      return y >= 0.0 && y == std::floor(y);
    case FamilyTag::normal_identity:
      return true;
    default:
      return y > 0.0;
  }
}

double GlmFamily::sample(double eta, Rng& rng) const {
  if (!eta_in_domain(eta))
    throw DomainError("linear predictor " + std::to_string(eta) + " is outside the domain of " +
                      std::string(to_string(tag_)));
  switch (tag_) {
    case FamilyTag::bernoulli_logit:
      return uniform01(rng) < mean(eta) ? 1.0 : 0.0;
    case FamilyTag::poisson_log:
      return static_cast<double>(std::poisson_distribution<long>(mean(eta))(rng));
    case FamilyTag::normal_identity:
      return std::normal_distribution<double>(eta, std::sqrt(phi_))(rng);
    case FamilyTag::exponential_inverse:
    case FamilyTag::exponential_neg_inverse: {
      // Rate is the reciprocal mean. Guard against a zero draw.
      double y = 0.0;
      while (y <= 0.0) y = std::exponential_distribution<double>(1.0 / mean(eta))(rng);
      return y;
    }
  }
  return 0.0;
}

double linear_predictor(const Scenario& scenario, const CovariateProfile& profile, Arm arm) {
  const std::vector<double> x = dummy_code(profile, scenario.space);
  double eta = scenario.mu + scenario.delta * indicator(arm);
  for (std::size_t i = 0; i < x.size(); ++i) eta += scenario.beta.at(i) * x[i];
  return eta;
}

double sample_response(const GlmFamily& family, double eta, Rng& rng) { return family.sample(eta, rng); }

FitResult fit_working_model(std::span<const TrialRecord> data, const GlmFamily& family) {
  FitResult fit;
  double sum1 = 0.0;
  double sum0 = 0.0;
  for (const TrialRecord& r : data) {
    if (r.arm == Arm::treatment) {
      ++fit.n1;
      sum1 += r.y;
    } else {
      ++fit.n0;
      sum0 += r.y;
    }
  }
  if (fit.n1 == 0 || fit.n0 == 0) throw NonEstimable("an arm has no patients");
  const double mean1 = sum1 / static_cast<double>(fit.n1);
  const double mean0 = sum0 / static_cast<double>(fit.n0);
  if (!family.mean_in_domain(mean1) || !family.mean_in_domain(mean0))
    throw NonEstimable("an arm mean lies on the boundary of the mean space");

  const double eta1 = family.link(mean1);
  const double eta0 = family.link(mean0);
  fit.mu_hat = eta0;
  fit.delta_hat = eta1 - eta0;

  const double a1 = family.mean_derivative(eta1) * family.theta_derivative(eta1);
  const double a0 = family.mean_derivative(eta0) * family.theta_derivative(eta0);
  const double var = family.phi() * (1.0 / (static_cast<double>(fit.n1) * a1) +
                                     1.0 / (static_cast<double>(fit.n0) * a0));
  if (!(var > 0.0) || !std::isfinite(var)) throw NonEstimable("information matrix is singular");
  fit.se_delta = std::sqrt(var);
  return fit;
}

TestReport wald_statistic(const FitResult& fit, double alpha) {
  return make_report(fit.delta_hat / fit.se_delta, alpha, Method::wald);
}

}  // namespace carat
