#pragma once

#include <memory>
#include <vector>

#include "carat/core.hpp"

namespace carat {

/// Pending assignments of the current permuted block.
struct BlockBuffer {
  std::vector<Arm> pending;
};

/// Signed imbalance counters, (count in treatment) - (count in control),
/// at the overall, marginal and within-stratum levels.
class DesignState {
 public:
  explicit DesignState(CovariateSpace space);

  const CovariateSpace& space() const { return space_; }
  std::size_t total() const { return total_; }
  int overall() const { return overall_; }
  int margin(std::size_t factor, int level) const {
    return margin_[space_.margin_index(factor, level)];
  }
  int stratum(StratumId id) const { return stratum_.at(id.index); }

  void record(const CovariateProfile& profile, StratumId id, Arm arm);
  void clear();

  BlockBuffer& stratum_block(StratumId id) { return blocks_.at(id.index); }
  BlockBuffer& overall_block() { return overall_block_; }

 private:
  CovariateSpace space_;
  std::size_t total_ = 0;
  int overall_ = 0;
  std::vector<int> margin_;
  std::vector<int> stratum_;
  std::vector<BlockBuffer> blocks_;
  BlockBuffer overall_block_;
};

struct ImbalanceSnapshot {
  int overall = 0;
  std::vector<std::vector<int>> margin;  // [factor][level - 1]
  std::vector<int> stratum;              // indexed by StratumId
};

ImbalanceSnapshot imbalance_snapshot(const DesignState& state);

/// Which arm a biased-coin rule leans toward.
enum class Preference { none, treatment, control };

/// Biased coin on a uniform draw u in [0, 1): the preferred arm with
/// probability p, either arm with probability 1/2 when there is no preference.
Arm resolve_coin(Preference preference, double p, double u);

// Assignment operations. The ones taking a DesignState also record the
// assignment in it.

Arm assign_complete(Rng& rng);

/// Efron's coin on imbalance d: favors control when d > 0, treatment when d < 0.
Arm assign_efron(int d, double p, Rng& rng);

/// Pops the next arm of the block, drawing a fresh uniform permutation of
/// block_size/2 arms of each kind when the buffer is empty.
Arm assign_permuted_block(BlockBuffer& buffer, int block_size, Rng& rng);

enum class InnerDesign { block, efron };

/// Runs the inner design on the profile's stratum only.
Arm assign_stratified(const CovariateProfile& profile, DesignState& state, InnerDesign inner,
                      const DesignSpec& params, Rng& rng);

/// Arm whose hypothetical assignment yields the smaller marginal imbalance
/// sum over the profile's margins.
Preference pocock_simon_preference(const CovariateProfile& profile, const DesignState& state,
                                   MarginalCriterion criterion = MarginalCriterion::squared);

Arm assign_pocock_simon(const CovariateProfile& profile, DesignState& state, double p, Rng& rng,
                        MarginalCriterion criterion = MarginalCriterion::squared);

/// Weighted sum of squared overall, marginal and within-stratum imbalances
/// after each hypothetical assignment.
Preference hu_hu_preference(const CovariateProfile& profile, const DesignState& state,
                            const HuHuWeights& weights);

Arm assign_hu_hu(const CovariateProfile& profile, DesignState& state, const HuHuWeights& weights,
                 double p, Rng& rng);

/// Sequential allocation engine with its own imbalance state. All designs
/// share this interface so that trials and Monte Carlo replays can swap
/// them freely.
class Design {
 public:
  explicit Design(CovariateSpace space) : state_(std::move(space)) {}
  virtual ~Design() = default;

  Design(const Design&) = default;
  Design& operator=(const Design&) = default;

  /// Validates the profile, assigns it and records the assignment.
  Arm assign(const CovariateProfile& profile, Rng& rng) {
    return assign(profile, encode_stratum(profile, state_.space()), rng);
  }

  /// Same, for a profile already known to lie in the space with stratum id.
  virtual Arm assign(const CovariateProfile& profile, StratumId id, Rng& rng) = 0;

  /// Fresh engine with the same parameters and an empty state.
  virtual std::unique_ptr<Design> fresh() const = 0;

  void reset() { state_.clear(); }
  const DesignState& state() const { return state_; }

 protected:
  DesignState state_;
};

std::unique_ptr<Design> make_design(const DesignSpec& spec, const CovariateSpace& space);

}  // namespace carat
