#pragma once

#include <span>
#include <vector>

#include "carat/glm.hpp"
#include "carat/randomize.hpp"

namespace carat {

struct StratumSummary {
  double sigma_nu_sq = 0.0;                 // pooled within-stratum variance
  std::vector<double> stratum_means;        // 0 for empty strata
  std::vector<std::size_t> stratum_counts;
  std::size_t nonempty = 0;
};

struct VarianceComponents {
  double sigma_nu_sq = 0.0;
  double sigma_h_sq = 0.0;
  double sigma_y_sq = 0.0;
  std::vector<double> stratum_means;
};

/// Stratum means pooled over both arms and
///   sigma_nu^2 = sum_i (y_i - mean_{stratum(i)})^2 / (n - m),
/// where m counts the nonempty strata only.
/// Throws DegenerateVariance when n <= m.
StratumSummary pooled_within_stratum_variance(std::span<const TrialRecord> data,
                                              const CovariateSpace& space);

/// Sample variance of y with the n - 1 denominator.
double overall_sample_variance(std::span<const TrialRecord> data);

double sample_mean(std::span<const TrialRecord> data);

/// h'h^{-1}(ybar) delta_hat / (2 sqrt(sigma_nu^2 / n))
TestReport adjusted_statistic_stratified(const FitResult& fit, double sigma_nu_sq, double ybar,
                                         const GlmFamily& family, std::size_t n, double alpha = 0.05);

/// h'h^{-1}(ybar) delta_hat / (2 sqrt((sigma_nu^2 + sigma_h^2) / n))
TestReport adjusted_statistic_general(const FitResult& fit, double sigma_nu_sq, double sigma_h_sq,
                                      double ybar, const GlmFamily& family, std::size_t n,
                                      double alpha = 0.05);

/// Overall sample variance in place of the within-stratum variance.
TestReport adjusted_statistic_cr(const FitResult& fit, double sigma_y_sq, double ybar,
                                 const GlmFamily& family, std::size_t n, double alpha = 0.05);

/// Monte Carlo estimate of sigma_h^2. Replays the design B times on the
/// fixed covariate sequence and returns the sample variance of
///   W_b = n^{-1/2} sum_j D_n^{(b)}(s_j) * stratum_means[j].
/// The design is reset before every replay; its final state is unspecified.
double estimate_sigma_h_mc(std::span<const CovariateProfile> profiles, Design& design,
                           std::span<const double> stratum_means, std::size_t replays, Rng& rng);

}  // namespace carat
