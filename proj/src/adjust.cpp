#include "carat/adjust.hpp"

#include <cmath>

namespace carat {

StratumSummary pooled_within_stratum_variance(std::span<const TrialRecord> data,
                                              const CovariateSpace& space) {
  StratumSummary out;
  out.stratum_means.assign(space.strata(), 0.0);
  out.stratum_counts.assign(space.strata(), 0);

  std::vector<StratumId> ids;
  ids.reserve(data.size());
  for (const TrialRecord& r : data) {
    const StratumId id = encode_stratum(r.profile, space);
    ids.push_back(id);
    out.stratum_means[id.index] += r.y;
    ++out.stratum_counts[id.index];
  }
  for (std::size_t j = 0; j < space.strata(); ++j) {
    if (out.stratum_counts[j] == 0) continue;
    out.stratum_means[j] /= static_cast<double>(out.stratum_counts[j]);
    ++out.nonempty;
  }
  if (data.size() <= out.nonempty)
    throw DegenerateVariance("within-stratum variance needs more records than nonempty strata");

  double ss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = data[i].y - out.stratum_means[ids[i].index];
    ss += e * e;
  }
  out.sigma_nu_sq = ss / static_cast<double>(data.size() - out.nonempty);
  return out;
}

double sample_mean(std::span<const TrialRecord> data) {
  if (data.empty()) throw DegenerateVariance("mean of an empty sample");
  double total = 0.0;
  for (const TrialRecord& r : data) total += r.y;
  return total / static_cast<double>(data.size());
}

double overall_sample_variance(std::span<const TrialRecord> data) {
  if (data.size() < 2) throw DegenerateVariance("sample variance needs at least two records");
  const double ybar = sample_mean(data);
  double ss = 0.0;
  for (const TrialRecord& r : data) ss += (r.y - ybar) * (r.y - ybar);
  return ss / static_cast<double>(data.size() - 1);
}

namespace {

TestReport scaled_statistic(const FitResult& fit, double variance, double ybar, const GlmFamily& family,
                            std::size_t n, double alpha, Method method) {
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw DegenerateVariance("adjusted statistic needs a positive variance estimate");
  if (!family.mean_in_domain(ybar)) throw NonEstimable("overall mean lies on the boundary of the mean space");
  const double slope = family.mean_derivative(family.link(ybar));
  const double stat = slope * fit.delta_hat / (2.0 * std::sqrt(variance / static_cast<double>(n)));
  return make_report(stat, alpha, method);
}

}  // namespace

TestReport adjusted_statistic_stratified(const FitResult& fit, double sigma_nu_sq, double ybar,
                                         const GlmFamily& family, std::size_t n, double alpha) {
  return scaled_statistic(fit, sigma_nu_sq, ybar, family, n, alpha, Method::adj_stratified);
}

TestReport adjusted_statistic_general(const FitResult& fit, double sigma_nu_sq, double sigma_h_sq,
                                      double ybar, const GlmFamily& family, std::size_t n, double alpha) {
  if (sigma_h_sq < 0.0) throw DegenerateVariance("sigma_h^2 must be nonnegative");
  return scaled_statistic(fit, sigma_nu_sq + sigma_h_sq, ybar, family, n, alpha, Method::adj_general);
}

TestReport adjusted_statistic_cr(const FitResult& fit, double sigma_y_sq, double ybar,
                                 const GlmFamily& family, std::size_t n, double alpha) {
  return scaled_statistic(fit, sigma_y_sq, ybar, family, n, alpha, Method::adj_cr);
}

double estimate_sigma_h_mc(std::span<const CovariateProfile> profiles, Design& design,
                           std::span<const double> stratum_means, std::size_t replays, Rng& rng) {
  if (replays < 2) throw ConfigError("Monte Carlo estimate of sigma_h^2 needs at least 2 replays");
  const std::size_t strata = design.state().space().strata();
  if (stratum_means.size() != strata) throw ConfigError("one stratum mean is required per stratum");
  if (profiles.empty()) return 0.0;

  std::vector<StratumId> ids;
  ids.reserve(profiles.size());
  for (const CovariateProfile& profile : profiles) ids.push_back(encode_stratum(profile, design.state().space()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(profiles.size()));
  // Welford accumulation of W_b.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t b = 0; b < replays; ++b) {
    design.reset();
    for (std::size_t i = 0; i < profiles.size(); ++i) design.assign(profiles[i], ids[i], rng);
    double w = 0.0;
    for (std::size_t j = 0; j < strata; ++j) w += design.state().stratum(StratumId{j}) * stratum_means[j];
    w *= scale;
    const double d = w - mean;
    mean += d / static_cast<double>(b + 1);
    m2 += d * (w - mean);
  }
  return m2 / static_cast<double>(replays - 1);
}

}  // namespace carat
