#pragma once

// Trajectory rewards, expected returns and regret against an expert policy.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arkl/core.hpp"

namespace arkl {

/// A reward on whole trajectories with |r| <= 1. Dense tables are indexed by
/// the lexicographic trajectory index.
class RewardFn {
 public:
  enum class Kind { Tabular, Random, Constant };

  static RewardFn tabular(int horizon, int alphabet_size, std::vector<double> values);
  /// Values drawn uniformly from [lo, hi] by a generator seeded with `seed`.
  static RewardFn random(int horizon, int alphabet_size, std::uint64_t seed, double lo = -1.0,
                         double hi = 1.0, std::uint64_t cap = default_enumeration_cap());
  static RewardFn constant(int horizon, int alphabet_size, double value);
  /// CSV with header "trajectory,value"; trajectories are space-separated
  /// tokens. Unlisted trajectories get reward 0.
  static RewardFn from_csv(const std::string& text, int horizon, int alphabet_size,
                           std::uint64_t cap = default_enumeration_cap());

  Kind kind() const { return kind_; }
  int horizon() const { return horizon_; }
  int alphabet_size() const { return alphabet_size_; }

  double operator()(std::span<const Token> traj) const;
  double at_index(std::uint64_t index) const;

  /// lambda * r for lambda in [0, 1].
  RewardFn scaled(double lambda) const;

 private:
  RewardFn(Kind kind, int horizon, int alphabet_size, std::vector<double> values, double constant);

  Kind kind_;
  int horizon_;
  int alphabet_size_;
  std::vector<double> values_;
  double constant_ = 0.0;
};

/// J(pi; r) = E_{S ~ P^pi}[r(S)] by exact enumeration.
double expected_return(const SeqPolicy& policy, const RewardFn& reward,
                       std::uint64_t cap = default_enumeration_cap());

struct ReturnEstimate {
  double value = 0.0;
  std::uint64_t samples = 0;
  double standard_error = 0.0;
};

ReturnEstimate expected_return_monte_carlo(const SeqPolicy& policy, const RewardFn& reward,
                                           std::uint64_t samples, Rng& rng);

/// J(pi*; r) - J(pi_hat; r).
double regret(const SeqPolicy& pi_star, const SeqPolicy& pi_hat, const RewardFn& reward,
              std::uint64_t cap = default_enumeration_cap());

struct WorstCaseRegret {
  double value = 0.0;
  RewardFn maximizing_reward;
};

/// sup over rewards with values in [0, 1] of the regret, which equals
/// TV(P^pi*, P^pi_hat). The maximizer is 1 where P^pi*(S) >= P^pi_hat(S) and
/// 0 elsewhere; `value` is the regret under that reward.
WorstCaseRegret worst_case_regret(const SeqPolicy& pi_star, const SeqPolicy& pi_hat,
                                  std::uint64_t cap = default_enumeration_cap());

}  // namespace arkl
