#include "carat/theory.hpp"

#include <cmath>

#include "carat/glm.hpp"

namespace carat {

PopulationMoments population_moments(const Scenario& scenario) {
  const GlmFamily family = family_of(scenario);
  Scenario null = scenario;
  null.delta = 0.0;

  const std::size_t strata = scenario.space.strata();
  std::vector<double> weight(strata);
  std::vector<double> cell_mean(strata);
  PopulationMoments out;
  for (std::size_t j = 0; j < strata; ++j) {
    const StratumId id{j};
    const double eta = linear_predictor(null, decode_stratum(id, scenario.space), Arm::control);
    if (!family.eta_in_domain(eta))
      throw DomainError("stratum " + std::to_string(j) + " has a linear predictor outside the family domain");
    weight[j] = scenario.space.stratum_probability(id);
    cell_mean[j] = family.mean(eta);
    out.e_y += weight[j] * cell_mean[j];
    out.e_var_y_given_x += weight[j] * family.conditional_variance(eta);
  }
  double between = 0.0;
  for (std::size_t j = 0; j < strata; ++j) between += weight[j] * (cell_mean[j] - out.e_y) * (cell_mean[j] - out.e_y);
  out.var_y = out.e_var_y_given_x + between;
  return out;
}

std::string_view to_string(SizeClass c) {
  switch (c) {
    case SizeClass::conservative:
      return "conservative";
    case SizeClass::valid:
      return "valid";
    case SizeClass::anti_conservative:
      return "anti-conservative";
  }
  return "?";
}

AsymptoticSummary asymptotic_s_variance(const Scenario& scenario, double sigma_h_sq) {
  if (sigma_h_sq < 0.0) throw ConfigError("sigma_h^2 must be nonnegative");
  const GlmFamily family = family_of(scenario);
  const PopulationMoments moments = population_moments(scenario);

  AsymptoticSummary s;
  s.e_y = moments.e_y;
  s.var_y = moments.var_y;
  s.e_var_y_given_x = moments.e_var_y_given_x;
  const double eta = family.link(moments.e_y);
  s.denom = family.phi() * family.mean_derivative(eta) / family.theta_derivative(eta);
  s.sigma_h_sq = scenario.design.tag == DesignTag::cr ? moments.var_y - moments.e_var_y_given_x : sigma_h_sq;
  s.s_variance = (s.e_var_y_given_x + s.sigma_h_sq) / s.denom;

  if (std::abs(s.s_variance - 1.0) <= 1e-9)
    s.classification = SizeClass::valid;
  else
    s.classification = s.s_variance < 1.0 ? SizeClass::conservative : SizeClass::anti_conservative;
  return s;
}

double predicted_size(const AsymptoticSummary& summary, double alpha) {
  if (!(summary.s_variance > 0.0)) throw DegenerateVariance("asymptotic variance must be positive");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  return 2.0 * (1.0 - normal_cdf(z / std::sqrt(summary.s_variance)));
}

}  // namespace carat
