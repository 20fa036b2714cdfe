#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "carat/glm.hpp"
#include "support/datasets.hpp"
#include "support/irls_oracle.hpp"

using namespace carat;

namespace {

constexpr FamilyTag kFamilies[] = {FamilyTag::bernoulli_logit, FamilyTag::poisson_log, FamilyTag::normal_identity,
                                   FamilyTag::exponential_inverse, FamilyTag::exponential_neg_inverse};

std::vector<TrialRecord> two_cell(double treated_mean, std::size_t n1, double control_mean, std::size_t n0,
                                  double spread = 0.0) {
  // Responses alternate around the arm means by +/- spread; arm means are
  // exact for even arm sizes.
  std::vector<TrialRecord> data;
  for (std::size_t i = 0; i < n1; ++i)
    data.push_back({treated_mean + (i % 2 ? spread : -spread), Arm::treatment, {}});
  for (std::size_t i = 0; i < n0; ++i)
    data.push_back({control_mean + (i % 2 ? spread : -spread), Arm::control, {}});
  return data;
}

std::vector<TrialRecord> bernoulli_cells(std::size_t ones1, std::size_t n1, std::size_t ones0, std::size_t n0) {
  std::vector<TrialRecord> data;
  for (std::size_t i = 0; i < n1; ++i) data.push_back({i < ones1 ? 1.0 : 0.0, Arm::treatment, {}});
  for (std::size_t i = 0; i < n0; ++i) data.push_back({i < ones0 ? 1.0 : 0.0, Arm::control, {}});
  return data;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

// ---------------------------------------------------------------------------
// Families

TEST(Family, LinkInvertsMean) {
  const std::pair<FamilyTag, std::vector<double>> cases[] = {
      {FamilyTag::bernoulli_logit, {0.01, 0.25, 0.5, 0.7365, 0.99}},
      {FamilyTag::poisson_log, {0.05, 1.0, 2.0, 40.0}},
      {FamilyTag::normal_identity, {-3.0, 0.0, 7.5}},
      {FamilyTag::exponential_inverse, {0.1, 0.588, 3.0}},
      {FamilyTag::exponential_neg_inverse, {0.1, 0.588, 3.0}},
  };
  for (const auto& [tag, means] : cases) {
    const GlmFamily f(tag);
    for (double m : means) {
      EXPECT_NEAR(f.mean(f.link(m)), m, 1e-12 * std::max(1.0, m)) << to_string(tag);
      EXPECT_TRUE(f.mean_in_domain(m));
    }
  }
}

TEST(Family, DerivativesAgreeWithFiniteDifferences) {
  const std::pair<FamilyTag, double> cases[] = {{FamilyTag::bernoulli_logit, 0.4},
                                                {FamilyTag::poisson_log, 0.2},
                                                {FamilyTag::normal_identity, 1.3},
                                                {FamilyTag::exponential_inverse, 1.7},
                                                {FamilyTag::exponential_neg_inverse, -1.7}};
  for (const auto& [tag, eta] : cases) {
    const GlmFamily f(tag);
    const double h = 1e-6;
    EXPECT_NEAR(f.mean_derivative(eta), (f.mean(eta + h) - f.mean(eta - h)) / (2 * h), 1e-8) << to_string(tag);
  }
  EXPECT_EQ(GlmFamily(FamilyTag::exponential_inverse).theta_derivative(1.0), -1.0);
  EXPECT_EQ(GlmFamily(FamilyTag::exponential_neg_inverse).theta_derivative(-1.0), 1.0);
}

TEST(Family, DenominatorIdentities) {
  // phi h'h^{-1}(m) / gamma'h^{-1}(m): m(1-m), m, sigma^2, m^2, m^2.
  for (double m : {0.05, 0.3, 0.7364, 0.9}) {
    const GlmFamily f(FamilyTag::bernoulli_logit);
    EXPECT_NEAR(f.conditional_variance(f.link(m)), m * (1 - m), 1e-12);
  }
  for (double m : {0.1, 1.0, 1.8, 25.0}) {
    const GlmFamily p(FamilyTag::poisson_log);
    EXPECT_NEAR(p.conditional_variance(p.link(m)), m, 1e-12 * m);
    for (FamilyTag tag : {FamilyTag::exponential_inverse, FamilyTag::exponential_neg_inverse}) {
      const GlmFamily e(tag);
      EXPECT_NEAR(e.conditional_variance(e.link(m)), m * m, 1e-12 * m * m);
    }
  }
  const GlmFamily normal(FamilyTag::normal_identity, 2.5);
  EXPECT_DOUBLE_EQ(normal.conditional_variance(normal.link(-4.0)), 2.5);
}

TEST(Family, DispersionOnlyFreeForNormal) {
  EXPECT_THROW(GlmFamily(FamilyTag::poisson_log, 2.0), ConfigError);
  EXPECT_THROW(GlmFamily(FamilyTag::normal_identity, 0.0), ConfigError);
  EXPECT_NO_THROW(GlmFamily(FamilyTag::normal_identity, 4.0));
}

// ---------------------------------------------------------------------------
// Linear predictor and sampling

TEST(LinearPredictor, LogisticScenario) {
  Scenario s;
  s.mu = -1;
  s.beta = {2, 4};
  s.n = 10;
  EXPECT_DOUBLE_EQ(linear_predictor(s, {{2, 2}}, Arm::control), 5.0);
  EXPECT_DOUBLE_EQ(linear_predictor(s, {{1, 1}}, Arm::control), -1.0);
  EXPECT_DOUBLE_EQ(linear_predictor(s, {{2, 1}}, Arm::treatment), 1.0);
  s.delta = 0.7;
  EXPECT_DOUBLE_EQ(linear_predictor(s, {{2, 1}}, Arm::treatment), 1.7);
  EXPECT_DOUBLE_EQ(linear_predictor(s, {{2, 1}}, Arm::control), 1.0);
  EXPECT_THROW(linear_predictor(s, {{3, 1}}, Arm::control), InvalidProfile);
}

TEST(LinearPredictor, AppendixDummyCoding) {
  Scenario s;
  s.space = CovariateSpace::uniform({2, 2, 3, 4});
  s.mu = -1;
  s.beta = {1, -1, -2, 1, 1, 2, 3};
  s.n = 10;
  EXPECT_DOUBLE_EQ(linear_predictor(s, {{1, 1, 1, 1}}, Arm::control), -1.0);
  EXPECT_DOUBLE_EQ(linear_predictor(s, {{2, 2, 2, 2}}, Arm::control), -1 + 1 - 1 - 2 + 1);
  EXPECT_DOUBLE_EQ(linear_predictor(s, {{1, 1, 3, 4}}, Arm::control), -1 + 1 + 3);
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments sample_moments(const GlmFamily& f, double eta, int draws, std::uint64_t seed) {
  Rng rng = make_stream({seed});
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double y = sample_response(f, eta, rng);
    EXPECT_TRUE(f.response_in_support(y));
    sum += y;
    sum_sq += y * y;
  }
  const double mean = sum / draws;
  return {mean, (sum_sq - draws * mean * mean) / (draws - 1)};
}

TEST(Sampling, BernoulliAtZero) {
  const Moments m = sample_moments(GlmFamily(FamilyTag::bernoulli_logit), 0.0, 1'000'000, 41);
  EXPECT_NEAR(m.mean, 0.5, 0.003);
  EXPECT_NEAR(m.var, 0.25, 0.003);
}

TEST(Sampling, PoissonMeanEqualsVariance) {
  const Moments m = sample_moments(GlmFamily(FamilyTag::poisson_log), 0.2, 1'000'000, 42);
  EXPECT_NEAR(m.mean, std::exp(0.2), 0.01 * std::exp(0.2));
  EXPECT_NEAR(m.var, std::exp(0.2), 0.01 * std::exp(0.2));
}

TEST(Sampling, ExponentialBothLinks) {
  const Moments a = sample_moments(GlmFamily(FamilyTag::exponential_inverse), 1.7, 1'000'000, 43);
  EXPECT_NEAR(a.mean, 1 / 1.7, 0.01 / 1.7);
  EXPECT_NEAR(a.var, 1 / (1.7 * 1.7), 0.02 / (1.7 * 1.7));
  const Moments b = sample_moments(GlmFamily(FamilyTag::exponential_neg_inverse), -1.7, 1'000'000, 44);
  EXPECT_NEAR(b.mean, 1 / 1.7, 0.01 / 1.7);
}

TEST(Sampling, NormalUsesDispersion) {
  const Moments m = sample_moments(GlmFamily(FamilyTag::normal_identity, 4.0), 1.5, 500'000, 45);
  EXPECT_NEAR(m.mean, 1.5, 0.01);
  EXPECT_NEAR(m.var, 4.0, 0.04);
}

TEST(Sampling, DomainViolationIsAnError) {
  Rng rng = make_stream({1});
  EXPECT_THROW(GlmFamily(FamilyTag::exponential_inverse).sample(-0.5, rng), DomainError);
  EXPECT_THROW(GlmFamily(FamilyTag::exponential_inverse).sample(0.0, rng), DomainError);
  EXPECT_THROW(GlmFamily(FamilyTag::exponential_neg_inverse).sample(0.5, rng), DomainError);
  EXPECT_THROW(GlmFamily(FamilyTag::poisson_log).sample(std::nan(""), rng), DomainError);
}

// ---------------------------------------------------------------------------
// Working-model fit

TEST(Fit, EqualBernoulliMeans) {
  const auto data = bernoulli_cells(10, 20, 15, 30);
  const FitResult fit = fit_working_model(data, GlmFamily(FamilyTag::bernoulli_logit));
  EXPECT_NEAR(fit.mu_hat, 0.0, 1e-15);
  EXPECT_NEAR(fit.delta_hat, 0.0, 1e-15);
  EXPECT_EQ(fit.n1, 20u);
  EXPECT_EQ(fit.n0, 30u);
  const TestReport r = wald_statistic(fit);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_FALSE(r.reject);
}

TEST(Fit, PoissonExample) {
  const auto data = two_cell(2.0, 100, 1.0, 100, 1.0);
  const FitResult fit = fit_working_model(data, GlmFamily(FamilyTag::poisson_log));
  EXPECT_NEAR(fit.mu_hat, 0.0, 1e-14);
  EXPECT_NEAR(fit.delta_hat, std::numbers::ln2, 1e-14);
  EXPECT_NEAR(fit.se_delta * fit.se_delta, 0.015, 1e-15);
  const TestReport r = wald_statistic(fit);
  EXPECT_NEAR(r.statistic, std::numbers::ln2 / std::sqrt(0.015), 1e-12);
  EXPECT_NEAR(r.statistic, 5.66, 0.005);
  EXPECT_TRUE(r.reject);

  const oracle::IrlsFit o = oracle::irls_fit(data, FamilyTag::poisson_log);
  EXPECT_NEAR(o.delta_hat, fit.delta_hat, 1e-8);
  EXPECT_NEAR(o.se_delta, fit.se_delta, 1e-8);
}

TEST(Fit, BernoulliExample) {
  const auto data = bernoulli_cells(150, 200, 50, 200);
  const FitResult fit = fit_working_model(data, GlmFamily(FamilyTag::bernoulli_logit));
  EXPECT_NEAR(fit.delta_hat, 2 * std::log(3.0), 1e-13);
  EXPECT_NEAR(fit.mu_hat, -std::log(3.0), 1e-13);
  EXPECT_NEAR(fit.se_delta * fit.se_delta, 2.0 / (200 * 0.1875), 1e-14);

  const oracle::IrlsFit o = oracle::irls_fit(data, FamilyTag::bernoulli_logit);
  EXPECT_NEAR(o.delta_hat, fit.delta_hat, 1e-8);
  EXPECT_NEAR(o.se_delta, fit.se_delta, 1e-8);
}

TEST(Fit, FixedPointIdentity) {
  Rng rng = make_stream({46});
  for (FamilyTag tag : kFamilies) {
    const GlmFamily f(tag, tag == FamilyTag::normal_identity ? 2.0 : 1.0);
    for (int k = 0; k < 50; ++k) {
      const auto data = test_support::random_dataset(f, rng);
      FitResult fit;
      try {
        fit = fit_working_model(data, f);
      } catch (const NonEstimable&) {
        continue;
      }
      double s1 = 0, s0 = 0;
      for (const auto& r : data) (r.arm == Arm::treatment ? s1 : s0) += r.y;
      EXPECT_NEAR(f.mean(fit.mu_hat), s0 / fit.n0, 1e-10 * std::max(1.0, s0 / fit.n0));
      EXPECT_NEAR(f.mean(fit.mu_hat + fit.delta_hat), s1 / fit.n1, 1e-10 * std::max(1.0, s1 / fit.n1));
    }
  }
}

TEST(Fit, AgreesWithIrlsOracle) {
  Rng rng = make_stream({47});
  for (FamilyTag tag : kFamilies) {
    const double phi = tag == FamilyTag::normal_identity ? 1.7 : 1.0;
    const GlmFamily f(tag, phi);
    int checked = 0;
    while (checked < 200) {
      const auto data = test_support::random_dataset(f, rng);
      FitResult fit;
      try {
        fit = fit_working_model(data, f);
      } catch (const NonEstimable&) {
        continue;
      }
      const oracle::IrlsFit o = oracle::irls_fit(data, tag, phi);
      ASSERT_LT(rel(fit.mu_hat, o.mu_hat), 1e-6) << to_string(tag);
      ASSERT_LT(rel(fit.delta_hat, o.delta_hat), 1e-6) << to_string(tag);
      ASSERT_LT(rel(fit.se_delta, o.se_delta), 1e-6) << to_string(tag);
      ++checked;
    }
  }
}

TEST(Fit, LabelSymmetry) {
  Rng rng = make_stream({48});
  for (FamilyTag tag : kFamilies) {
    const GlmFamily f(tag);
    auto data = test_support::random_dataset(f, rng);
    FitResult fit;
    try {
      fit = fit_working_model(data, f);
    } catch (const NonEstimable&) {
      continue;
    }
    for (auto& r : data) r.arm = r.arm == Arm::treatment ? Arm::control : Arm::treatment;
    const FitResult swapped = fit_working_model(data, f);
    EXPECT_NEAR(swapped.delta_hat, -fit.delta_hat, 1e-12);
    EXPECT_NEAR(swapped.se_delta, fit.se_delta, 1e-12);
    EXPECT_NEAR(wald_statistic(swapped).statistic, -wald_statistic(fit).statistic, 1e-10);
  }
}

TEST(Fit, NonEstimableCases) {
  const GlmFamily bern(FamilyTag::bernoulli_logit);
  EXPECT_THROW(fit_working_model(bernoulli_cells(0, 10, 3, 10), bern), NonEstimable);
  EXPECT_THROW(fit_working_model(bernoulli_cells(10, 10, 3, 10), bern), NonEstimable);
  EXPECT_THROW(fit_working_model(bernoulli_cells(4, 10, 0, 0), bern), NonEstimable);
  EXPECT_THROW(fit_working_model(bernoulli_cells(0, 0, 4, 10), bern), NonEstimable);
  EXPECT_THROW(fit_working_model(two_cell(0.0, 5, 1.0, 5), GlmFamily(FamilyTag::poisson_log)), NonEstimable);
  EXPECT_THROW(fit_working_model(std::vector<TrialRecord>{}, bern), NonEstimable);
}

TEST(Wald, BoundaryAtCriticalValue) {
  FitResult fit;
  fit.delta_hat = 1.96;
  fit.se_delta = 1.0;
  const TestReport r = wald_statistic(fit, 0.05);
  EXPECT_DOUBLE_EQ(r.statistic, 1.96);
  EXPECT_NEAR(r.p_value, 0.05, 1e-4);
  EXPECT_TRUE(r.reject);
  EXPECT_EQ(r.method, Method::wald);
}
