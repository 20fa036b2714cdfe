#include "carat/randomize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace carat {

DesignState::DesignState(CovariateSpace space)
    : space_(std::move(space)),
      margin_(space_.margins(), 0),
      stratum_(space_.strata(), 0),
      blocks_(space_.strata()) {}

void DesignState::record(const CovariateProfile& profile, StratumId id, Arm arm) {
  const int s = sign(arm);
  ++total_;
  overall_ += s;
  for (std::size_t k = 0; k < space_.factors(); ++k) margin_[space_.margin_index(k, profile.levels[k])] += s;
  stratum_[id.index] += s;
}

void DesignState::clear() {
  total_ = 0;
  overall_ = 0;
  std::fill(margin_.begin(), margin_.end(), 0);
  std::fill(stratum_.begin(), stratum_.end(), 0);
  for (auto& block : blocks_) block.pending.clear();
  overall_block_.pending.clear();
}

ImbalanceSnapshot imbalance_snapshot(const DesignState& state) {
  const CovariateSpace& space = state.space();
  ImbalanceSnapshot snap;
  snap.overall = state.overall();
  snap.margin.resize(space.factors());
  for (std::size_t k = 0; k < space.factors(); ++k)
    for (int level = 1; level <= space.levels(k); ++level) snap.margin[k].push_back(state.margin(k, level));
  snap.stratum.reserve(space.strata());
  for (std::size_t j = 0; j < space.strata(); ++j) snap.stratum.push_back(state.stratum(StratumId{j}));
  return snap;
}

Arm resolve_coin(Preference preference, double p, double u) {
  switch (preference) {
    case Preference::treatment:
      return u < p ? Arm::treatment : Arm::control;
    case Preference::control:
      return u < p ? Arm::control : Arm::treatment;
    case Preference::none:
      break;
  }
  return u < 0.5 ? Arm::treatment : Arm::control;
}

namespace {

void check_coin(double p) {
  if (!(p >= 0.5 && p < 1.0)) throw ConfigError("biased coin probability must lie in [0.5, 1)");
}

Preference from_difference(double treatment_score, double control_score) {
  if (treatment_score < control_score) return Preference::treatment;
  if (control_score < treatment_score) return Preference::control;
  return Preference::none;
}

}  // namespace

Arm assign_complete(Rng& rng) { return uniform01(rng) < 0.5 ? Arm::treatment : Arm::control; }

Arm assign_efron(int d, double p, Rng& rng) {
  check_coin(p);
  const Preference pref = d < 0 ? Preference::treatment : d > 0 ? Preference::control : Preference::none;
  return resolve_coin(pref, p, uniform01(rng));
}

Arm assign_permuted_block(BlockBuffer& buffer, int block_size, Rng& rng) {
  if (block_size < 2 || block_size % 2 != 0) throw ConfigError("block size must be a positive even integer");
  if (buffer.pending.empty()) {
    buffer.pending.assign(static_cast<std::size_t>(block_size / 2), Arm::treatment);
    buffer.pending.insert(buffer.pending.end(), static_cast<std::size_t>(block_size / 2), Arm::control);
    std::shuffle(buffer.pending.begin(), buffer.pending.end(), rng);
  }
  const Arm arm = buffer.pending.back();
  buffer.pending.pop_back();
  return arm;
}

Arm assign_stratified(const CovariateProfile& profile, DesignState& state, InnerDesign inner,
                      const DesignSpec& params, Rng& rng) {
  const StratumId id = encode_stratum(profile, state.space());
  const Arm arm = inner == InnerDesign::block
                      ? assign_permuted_block(state.stratum_block(id), params.block_size, rng)
                      : assign_efron(state.stratum(id), params.coin_p, rng);
  state.record(profile, id, arm);
  return arm;
}

namespace {

Preference ps_preference(const CovariateProfile& profile, const DesignState& state, MarginalCriterion criterion) {
  const CovariateSpace& space = state.space();
  double if_treatment = 0.0;
  double if_control = 0.0;
  for (std::size_t k = 0; k < space.factors(); ++k) {
    const double d = state.margin(k, profile.levels[k]);
    if (criterion == MarginalCriterion::squared) {
      if_treatment += (d + 1) * (d + 1);
      if_control += (d - 1) * (d - 1);
    } else {
      // With two arms the range of the arm counts is |D|.
      if_treatment += std::abs(d + 1);
      if_control += std::abs(d - 1);
    }
  }
  return from_difference(if_treatment, if_control);
}

Preference hh_preference(const CovariateProfile& profile, StratumId id, const DesignState& state,
                         const HuHuWeights& weights) {
  const CovariateSpace& space = state.space();
  auto squared_shift = [](double d, double w) { return std::pair{w * (d + 1) * (d + 1), w * (d - 1) * (d - 1)}; };

  auto [t, c] = squared_shift(state.overall(), weights.overall);
  for (std::size_t k = 0; k < space.factors(); ++k) {
    const auto [tk, ck] = squared_shift(state.margin(k, profile.levels[k]), weights.margin[k]);
    t += tk;
    c += ck;
  }
  const auto [ts, cs] = squared_shift(state.stratum(id), weights.stratum);
  return from_difference(t + ts, c + cs);
}

}  // namespace

Preference pocock_simon_preference(const CovariateProfile& profile, const DesignState& state,
                                   MarginalCriterion criterion) {
  if (!state.space().contains(profile)) throw InvalidProfile("profile does not belong to the covariate space");
  return ps_preference(profile, state, criterion);
}

Arm assign_pocock_simon(const CovariateProfile& profile, DesignState& state, double p, Rng& rng,
                        MarginalCriterion criterion) {
  check_coin(p);
  const StratumId id = encode_stratum(profile, state.space());
  const Arm arm = resolve_coin(ps_preference(profile, state, criterion), p, uniform01(rng));
  state.record(profile, id, arm);
  return arm;
}

Preference hu_hu_preference(const CovariateProfile& profile, const DesignState& state,
                            const HuHuWeights& weights) {
  return hh_preference(profile, encode_stratum(profile, state.space()), state, weights);
}

Arm assign_hu_hu(const CovariateProfile& profile, DesignState& state, const HuHuWeights& weights,
                 double p, Rng& rng) {
  check_coin(p);
  weights.validate(state.space().factors());
  const StratumId id = encode_stratum(profile, state.space());
  const Arm arm = resolve_coin(hh_preference(profile, id, state, weights), p, uniform01(rng));
  state.record(profile, id, arm);
  return arm;
}

// ---------------------------------------------------------------------------
// Engines

namespace {

template <class Derived>
class DesignBase : public Design {
 public:
  using Design::Design;

  std::unique_ptr<Design> fresh() const override {
    auto copy = std::make_unique<Derived>(static_cast<const Derived&>(*this));
    copy->reset();
    return copy;
  }
};

class CompleteRandomization final : public DesignBase<CompleteRandomization> {
 public:
  using DesignBase::DesignBase;

  Arm assign(const CovariateProfile& profile, StratumId id, Rng& rng) override {
    const Arm arm = assign_complete(rng);
    state_.record(profile, id, arm);
    return arm;
  }
};

/// Efron coin or permuted block on the overall imbalance, ignoring covariates.
class Unstratified final : public DesignBase<Unstratified> {
 public:
  Unstratified(const CovariateSpace& space, InnerDesign inner, DesignSpec params)
      : DesignBase(space), inner_(inner), params_(std::move(params)) {}

  Arm assign(const CovariateProfile& profile, StratumId id, Rng& rng) override {
    const Arm arm = inner_ == InnerDesign::block
                        ? assign_permuted_block(state_.overall_block(), params_.block_size, rng)
                        : assign_efron(state_.overall(), params_.coin_p, rng);
    state_.record(profile, id, arm);
    return arm;
  }

 private:
  InnerDesign inner_;
  DesignSpec params_;
};

class Stratified final : public DesignBase<Stratified> {
 public:
  Stratified(const CovariateSpace& space, InnerDesign inner, DesignSpec params)
      : DesignBase(space), inner_(inner), params_(std::move(params)) {}

  Arm assign(const CovariateProfile& profile, StratumId id, Rng& rng) override {
    const Arm arm = inner_ == InnerDesign::block
                        ? assign_permuted_block(state_.stratum_block(id), params_.block_size, rng)
                        : assign_efron(state_.stratum(id), params_.coin_p, rng);
    state_.record(profile, id, arm);
    return arm;
  }

 private:
  InnerDesign inner_;
  DesignSpec params_;
};

class PocockSimon final : public DesignBase<PocockSimon> {
 public:
  PocockSimon(const CovariateSpace& space, double p, MarginalCriterion criterion)
      : DesignBase(space), p_(p), criterion_(criterion) {}

  Arm assign(const CovariateProfile& profile, StratumId id, Rng& rng) override {
    const Arm arm = resolve_coin(ps_preference(profile, state_, criterion_), p_, uniform01(rng));
    state_.record(profile, id, arm);
    return arm;
  }

 private:
  double p_;
  MarginalCriterion criterion_;
};

class HuHu final : public DesignBase<HuHu> {
 public:
  HuHu(const CovariateSpace& space, HuHuWeights weights, double p)
      : DesignBase(space), weights_(std::move(weights)), p_(p) {
    weights_.validate(space.factors());
  }

  Arm assign(const CovariateProfile& profile, StratumId id, Rng& rng) override {
    const Arm arm = resolve_coin(hh_preference(profile, id, state_, weights_), p_, uniform01(rng));
    state_.record(profile, id, arm);
    return arm;
  }

 private:
  HuHuWeights weights_;
  double p_;
};

}  // namespace

std::unique_ptr<Design> make_design(const DesignSpec& spec, const CovariateSpace& space) {
  check_coin(spec.coin_p);
  if (spec.block_size < 2 || spec.block_size % 2 != 0)
    throw ConfigError("block size must be a positive even integer");
  switch (spec.tag) {
    case DesignTag::cr:
      return std::make_unique<CompleteRandomization>(space);
    case DesignTag::sb:
      return std::make_unique<Stratified>(space, InnerDesign::block, spec);
    case DesignTag::sbc:
      return std::make_unique<Stratified>(space, InnerDesign::efron, spec);
    case DesignTag::pb:
      return std::make_unique<Unstratified>(space, InnerDesign::block, spec);
    case DesignTag::bcd:
      return std::make_unique<Unstratified>(space, InnerDesign::efron, spec);
    case DesignTag::ps:
      return std::make_unique<PocockSimon>(space, spec.coin_p, spec.ps_criterion);
    case DesignTag::hh: {
      HuHuWeights weights = HuHuWeights::equal(space.factors());
      if (!spec.hh_weights.empty()) {
        if (spec.hh_weights.size() != space.factors() + 2)
          throw ConfigError("hh_weights needs p + 2 entries (overall, margins..., stratum)");
        weights = HuHuWeights{spec.hh_weights.front(),
                              {spec.hh_weights.begin() + 1, spec.hh_weights.end() - 1},
                              spec.hh_weights.back()};
      }
      return std::make_unique<HuHu>(space, std::move(weights), spec.coin_p);
    }
  }
  throw ConfigError("unsupported design");
}

}  // namespace carat
