#include "carat/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

namespace carat {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

double uniform01(Rng& rng) {
  // 53 random mantissa bits.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Rng make_stream(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t state = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t key : keys) {
    state ^= key;
    state = splitmix64(state);
  }
  std::array<std::uint32_t, 8> words{};
  for (std::size_t i = 0; i < words.size(); i += 2) {
    const std::uint64_t v = splitmix64(state);
    words[i] = static_cast<std::uint32_t>(v);
    words[i + 1] = static_cast<std::uint32_t>(v >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------

CovariateSpace::CovariateSpace(std::vector<int> levels_per_factor,
                               std::vector<std::vector<double>> factor_probs)
    : levels_(std::move(levels_per_factor)), probs_(std::move(factor_probs)) {
  if (levels_.empty()) throw ConfigError("covariate space needs at least one factor");
  if (probs_.size() != levels_.size())
    throw ConfigError("one probability vector is required per factor");
  margin_offset_.assign(1, 0);
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    const int m = levels_[k];
    if (m < 2) throw ConfigError("factor " + std::to_string(k + 1) + " needs at least 2 levels");
    if (probs_[k].size() != static_cast<std::size_t>(m))
      throw ConfigError("factor " + std::to_string(k + 1) + ": probability vector length differs from level count");
    double total = 0.0;
    for (double q : probs_[k]) {
      if (!(q >= 0.0) || q > 1.0)
        throw ConfigError("factor " + std::to_string(k + 1) + ": probabilities must lie in [0, 1]");
      total += q;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw ConfigError("factor " + std::to_string(k + 1) + ": probabilities must sum to 1");
    margin_offset_.push_back(margin_offset_.back() + static_cast<std::size_t>(m));
    strata_ *= static_cast<std::size_t>(m);
  }
}

CovariateSpace CovariateSpace::uniform(std::vector<int> levels_per_factor) {
  std::vector<std::vector<double>> probs;
  probs.reserve(levels_per_factor.size());
  for (int m : levels_per_factor) {
    if (m < 2) throw ConfigError("every factor needs at least 2 levels");
    probs.emplace_back(static_cast<std::size_t>(m), 1.0 / m);
  }
  return {std::move(levels_per_factor), std::move(probs)};
}

double CovariateSpace::stratum_probability(StratumId id) const {
  const CovariateProfile profile = decode_stratum(id, *this);
  double prob = 1.0;
  for (std::size_t k = 0; k < factors(); ++k)
    prob *= probs_[k][static_cast<std::size_t>(profile.levels[k] - 1)];
  return prob;
}

bool CovariateSpace::contains(const CovariateProfile& profile) const {
  if (profile.levels.size() != factors()) return false;
  for (std::size_t k = 0; k < factors(); ++k)
    if (profile.levels[k] < 1 || profile.levels[k] > levels_[k]) return false;
  return true;
}

StratumId encode_stratum(const CovariateProfile& profile, const CovariateSpace& space) {
  if (!space.contains(profile)) throw InvalidProfile("profile does not belong to the covariate space");
  std::size_t index = 0;
  std::size_t radix = 1;
  for (std::size_t k = 0; k < space.factors(); ++k) {
    index += static_cast<std::size_t>(profile.levels[k] - 1) * radix;
    radix *= static_cast<std::size_t>(space.levels(k));
  }
  return StratumId{index};
}

CovariateProfile decode_stratum(StratumId id, const CovariateSpace& space) {
  if (id.index >= space.strata()) throw InvalidProfile("stratum index out of range");
  CovariateProfile profile;
  profile.levels.resize(space.factors());
  std::size_t rest = id.index;
  for (std::size_t k = 0; k < space.factors(); ++k) {
    const auto m = static_cast<std::size_t>(space.levels(k));
    profile.levels[k] = static_cast<int>(rest % m) + 1;
    rest /= m;
  }
  return profile;
}

CovariateProfile sample_profile(const CovariateSpace& space, Rng& rng) {
  CovariateProfile profile;
  profile.levels.resize(space.factors());
  for (std::size_t k = 0; k < space.factors(); ++k) {
    const auto& probs = space.factor_probs()[k];
    const double u = uniform01(rng);
    double cumulative = 0.0;
    int level = space.levels(k);
    for (std::size_t j = 0; j < probs.size(); ++j) {
      cumulative += probs[j];
      if (u < cumulative) {
        level = static_cast<int>(j) + 1;
        break;
      }
    }
    // Rounding can leave cumulative just under 1; fall back to the last
    // level that carries mass.
    if (level == space.levels(k)) {
      while (level > 1 && probs[static_cast<std::size_t>(level - 1)] == 0.0) --level;
    }
    profile.levels[k] = level;
  }
  return profile;
}

std::vector<double> dummy_code(const CovariateProfile& profile, const CovariateSpace& space) {
  if (!space.contains(profile)) throw InvalidProfile("profile does not belong to the covariate space");
  std::vector<double> x(space.dummy_width(), 0.0);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < space.factors(); ++k) {
    if (profile.levels[k] > 1) x[offset + static_cast<std::size_t>(profile.levels[k] - 2)] = 1.0;
    offset += static_cast<std::size_t>(space.levels(k) - 1);
  }
  return x;
}

// ---------------------------------------------------------------------------

HuHuWeights HuHuWeights::equal(std::size_t factors) {
  const double w = 1.0 / static_cast<double>(factors + 2);
  return HuHuWeights{w, std::vector<double>(factors, w), w};
}

void HuHuWeights::validate(std::size_t factors) const {
  if (margin.size() != factors)
    throw ConfigError("Hu-Hu weights need one marginal weight per factor");
  double total = overall + stratum;
  bool nonnegative = overall >= 0.0 && stratum >= 0.0;
  for (double w : margin) {
    nonnegative = nonnegative && w >= 0.0;
    total += w;
  }
  if (!nonnegative) throw ConfigError("Hu-Hu weights must be nonnegative");
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("Hu-Hu weights must sum to 1");
}

namespace {

constexpr std::pair<FamilyTag, std::string_view> kFamilies[] = {
    {FamilyTag::bernoulli_logit, "bernoulli_logit"},
    {FamilyTag::poisson_log, "poisson_log"},
    {FamilyTag::normal_identity, "normal_identity"},
    {FamilyTag::exponential_inverse, "exponential_inverse"},
    {FamilyTag::exponential_neg_inverse, "exponential_neg_inverse"},
};

constexpr std::pair<DesignTag, std::string_view> kDesigns[] = {
    {DesignTag::cr, "cr"}, {DesignTag::sb, "sb"}, {DesignTag::sbc, "sbc"},
    {DesignTag::ps, "ps"}, {DesignTag::hh, "hh"}, {DesignTag::pb, "pb"},
    {DesignTag::bcd, "bcd"},
};

constexpr std::pair<Method, std::string_view> kMethods[] = {
    {Method::wald, "wald"},
    {Method::adj_stratified, "adj_stratified"},
    {Method::adj_general, "adj_general"},
    {Method::adj_cr, "adj_cr"},
};

template <class Tag, std::size_t N>
std::string_view name_of(const std::pair<Tag, std::string_view> (&table)[N], Tag tag) {
  for (const auto& [t, name] : table)
    if (t == tag) return name;
  return "?";
}

template <class Tag, std::size_t N>
Tag tag_of(const std::pair<Tag, std::string_view> (&table)[N], std::string_view text,
           std::string_view what) {
  for (const auto& [t, name] : table)
    if (name == text) return t;
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(FamilyTag tag) { return name_of(kFamilies, tag); }
std::string_view to_string(DesignTag tag) { return name_of(kDesigns, tag); }
std::string_view to_string(Method method) { return name_of(kMethods, method); }

std::string_view to_string(MarginalCriterion criterion) {
  return criterion == MarginalCriterion::squared ? "squared" : "range";
}

FamilyTag parse_family(std::string_view text) { return tag_of(kFamilies, text, "family"); }
DesignTag parse_design(std::string_view text) { return tag_of(kDesigns, text, "design"); }
Method parse_method(std::string_view text) { return tag_of(kMethods, text, "method"); }

MarginalCriterion parse_criterion(std::string_view text) {
  if (text == "squared" || text == "variance") return MarginalCriterion::squared;
  if (text == "range") return MarginalCriterion::range;
  throw ConfigError("unknown marginal criterion '" + std::string(text) + "'");
}

bool bounds_within_stratum(DesignTag tag) {
  return tag == DesignTag::sb || tag == DesignTag::sbc || tag == DesignTag::hh;
}

void Scenario::validate() const {
  if (beta.size() != space.dummy_width())
    throw ConfigError("beta has " + std::to_string(beta.size()) + " entries; the covariate space needs " +
                      std::to_string(space.dummy_width()));
  if (n < 2) throw ConfigError("sample size must be at least 2");
  if (!(phi > 0.0) || !std::isfinite(phi)) throw ConfigError("dispersion must be positive");
  if (family != FamilyTag::normal_identity && phi != 1.0)
    throw ConfigError("dispersion is fixed at 1 for " + std::string(to_string(family)));
  if (!std::isfinite(mu) || !std::isfinite(delta)) throw ConfigError("mu and delta must be finite");
  if (design.coin_p < 0.5 || design.coin_p >= 1.0) throw ConfigError("coin_p must lie in [0.5, 1)");
  if (design.block_size < 2 || design.block_size % 2 != 0)
    throw ConfigError("block_size must be a positive even integer");
  if (design.tag == DesignTag::hh && !design.hh_weights.empty()) {
    if (design.hh_weights.size() != space.factors() + 2)
      throw ConfigError("hh_weights needs p + 2 entries (overall, margins..., stratum)");
    HuHuWeights w{design.hh_weights.front(),
                  {design.hh_weights.begin() + 1, design.hh_weights.end() - 1},
                  design.hh_weights.back()};
    w.validate(space.factors());
  }
}

// ---------------------------------------------------------------------------

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

TestReport make_report(double statistic, double alpha, Method method) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  TestReport report;
  report.statistic = statistic;
  report.alpha = alpha;
  report.method = method;
  report.p_value = std::erfc(std::abs(statistic) / std::sqrt(2.0));
  report.reject = std::abs(statistic) > normal_quantile(1.0 - alpha / 2.0);
  return report;
}

}  // namespace carat
