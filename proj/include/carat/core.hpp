#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace carat {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidProfile : public Error {
 public:
  using Error::Error;
};

/// A parameter or response outside the family's mean/predictor domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Working-model fit is not estimable (empty arm or boundary arm mean).
class NonEstimable : public Error {
 public:
  using Error::Error;
};

class DegenerateVariance : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

/// Uniform draw on [0, 1).
double uniform01(Rng& rng);

/// Seeds an engine from an ordered tuple of 64-bit keys. Equal keys give
/// equal streams; the mapping does not depend on call order or threading.
Rng make_stream(std::initializer_list<std::uint64_t> keys);

/// Stable 64-bit FNV-1a hash, used to key streams by cell descriptors.
std::uint64_t stable_hash(std::string_view text);

// ---------------------------------------------------------------------------
// Covariates
// ---------------------------------------------------------------------------

/// A patient's level on each factor; levels are 1-based.
struct CovariateProfile {
  std::vector<int> levels;

  friend bool operator==(const CovariateProfile&, const CovariateProfile&) = default;
};

struct StratumId {
  std::size_t index = 0;

  friend auto operator<=>(const StratumId&, const StratumId&) = default;
};

/// Discrete covariate space: p factors with m_k levels each and independent
/// categorical level distributions.
class CovariateSpace {
 public:
  CovariateSpace(std::vector<int> levels_per_factor,
                 std::vector<std::vector<double>> factor_probs);

  /// Every factor uniform over its levels.
  static CovariateSpace uniform(std::vector<int> levels_per_factor);

  std::size_t factors() const { return levels_.size(); }
  int levels(std::size_t factor) const { return levels_.at(factor); }
  const std::vector<int>& levels_per_factor() const { return levels_; }
  const std::vector<std::vector<double>>& factor_probs() const { return probs_; }

  /// Total strata, the product of the level counts.
  std::size_t strata() const { return strata_; }

  /// Total margins, the sum of the level counts.
  std::size_t margins() const { return margin_offset_.back(); }

  /// Flat index of margin (factor; level) with 1-based level.
  std::size_t margin_index(std::size_t factor, int level) const {
    return margin_offset_[factor] + static_cast<std::size_t>(level - 1);
  }

  /// Width of the dummy coding, the sum of (m_k - 1).
  std::size_t dummy_width() const { return margins() - factors(); }

  double stratum_probability(StratumId id) const;

  bool contains(const CovariateProfile& profile) const;

  friend bool operator==(const CovariateSpace&, const CovariateSpace&) = default;

 private:
  std::vector<int> levels_;
  std::vector<std::vector<double>> probs_;
  std::vector<std::size_t> margin_offset_;
  std::size_t strata_ = 1;
};

/// Mixed-radix index, factor 1 varying fastest.
StratumId encode_stratum(const CovariateProfile& profile, const CovariateSpace& space);
CovariateProfile decode_stratum(StratumId id, const CovariateSpace& space);

CovariateProfile sample_profile(const CovariateSpace& space, Rng& rng);

/// Reference-level dummy coding: level 1 is all zeros, level j > 1 sets
/// indicator j - 1 of its factor's block.
std::vector<double> dummy_code(const CovariateProfile& profile, const CovariateSpace& space);

// ---------------------------------------------------------------------------
// Trial data and scenarios
// ---------------------------------------------------------------------------

/// Arm indicator T: treatment is arm 1 (T = 1), control is arm 2 (T = 0).
enum class Arm : std::uint8_t { control = 0, treatment = 1 };

constexpr int indicator(Arm arm) { return arm == Arm::treatment ? 1 : 0; }
constexpr int sign(Arm arm) { return arm == Arm::treatment ? 1 : -1; }

struct TrialRecord {
  double y = 0.0;
  Arm arm = Arm::control;
  CovariateProfile profile;
};

enum class FamilyTag {
  bernoulli_logit,
  poisson_log,
  normal_identity,
  exponential_inverse,
  exponential_neg_inverse,
};

enum class DesignTag {
  cr,   // complete randomization
  sb,   // stratified permuted block
  sbc,  // stratified Efron biased coin
  ps,   // Pocock-Simon minimization
  hh,   // Hu-Hu weighted imbalance
  pb,   // permuted block ignoring covariates
  bcd,  // Efron biased coin ignoring covariates
};

/// Marginal imbalance functional used by Pocock-Simon minimization.
enum class MarginalCriterion { squared, range };

struct HuHuWeights {
  double overall = 0.0;
  std::vector<double> margin;
  double stratum = 0.0;

  /// 1/(p+2) on each of the p+2 terms.
  static HuHuWeights equal(std::size_t factors);
  void validate(std::size_t factors) const;
};

struct DesignSpec {
  DesignTag tag = DesignTag::cr;
  int block_size = 4;
  double coin_p = 0.75;
  MarginalCriterion ps_criterion = MarginalCriterion::squared;
  // Empty means HuHuWeights::equal for the space.
  std::vector<double> hh_weights;
};

std::string_view to_string(FamilyTag tag);
std::string_view to_string(DesignTag tag);
std::string_view to_string(MarginalCriterion criterion);
FamilyTag parse_family(std::string_view text);
DesignTag parse_design(std::string_view text);
MarginalCriterion parse_criterion(std::string_view text);

/// Designs whose within-stratum imbalances stay bounded in probability.
bool bounds_within_stratum(DesignTag tag);

struct Scenario {
  CovariateSpace space = CovariateSpace::uniform({2, 2});
  FamilyTag family = FamilyTag::bernoulli_logit;
  double phi = 1.0;  // dispersion; only free for normal_identity
  double mu = 0.0;
  double delta = 0.0;
  std::vector<double> beta;
  std::size_t n = 0;
  DesignSpec design;

  /// Throws ConfigError on structural problems.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Test reports
// ---------------------------------------------------------------------------

enum class Method { wald, adj_stratified, adj_general, adj_cr };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct TestReport {
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  Method method = Method::wald;
};

double normal_cdf(double x);
double normal_quantile(double p);

/// Two-sided normal reference: p = 2(1 - Phi(|s|)), reject iff |s| > z_{1-alpha/2}.
TestReport make_report(double statistic, double alpha, Method method);

}  // namespace carat
