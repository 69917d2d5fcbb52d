#pragma once

// Token alphabets, tabular autoregressive step policies, sequence policies,
// policy classes and trajectory utilities.
//
// Tokens are 0-indexed. A prefix of length k over an alphabet of size d is
// identified exactly by the pair (k, code) where code is the base-d value of
// the prefix with the first token most significant. Tabular tables are dense
// in that encoding, so lookups never collide.

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "arkl/errors.hpp"
#include "arkl/rng.hpp"

namespace arkl {

using Token = std::int32_t;

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;
inline constexpr double kRowSumTolerance = 1e-12;

/// The enumeration cap: ARKL_CAP when set to a positive integer, otherwise 10^7.
std::uint64_t default_enumeration_cap();

/// base^exp, or nullopt if it does not fit in 64 bits.
std::optional<std::uint64_t> checked_pow(std::uint64_t base, int exp);

/// Number of trajectories d^H, throwing CapExceeded when above `cap`.
std::uint64_t trajectory_count(int alphabet_size, int horizon, std::uint64_t cap);

class Alphabet {
 public:
  explicit Alphabet(int size);
  int size() const { return size_; }

 private:
  int size_;
};

/// Base-d code of a prefix.
std::uint64_t prefix_code(std::span<const Token> prefix, int alphabet_size);

/// Calls fn(prefix, code) for every prefix of length `len` in lexicographic order.
void for_each_prefix(int alphabet_size, int len,
                     const std::function<void(std::span<const Token>, std::uint64_t)>& fn);

/// A conditional next-token distribution: either one row shared by every
/// prefix, or a dense table with one row per prefix whose length lies in
/// [min_prefix_length, max_prefix_length]. Immutable; copies share storage.
class StepPolicy {
 public:
  enum class Kind { ContextFree, Tabular };

  using RowFn = std::function<void(std::span<const Token> prefix, std::span<double> row)>;

  static StepPolicy context_free(std::vector<double> row);

  /// `rows` holds the rows ordered by prefix length, then lexicographically.
  static StepPolicy tabular(int alphabet_size, int min_prefix_length, int max_prefix_length,
                            std::vector<double> rows);

  /// Builds a tabular policy by calling `fill` once per covered prefix.
  static StepPolicy tabular(int alphabet_size, int min_prefix_length, int max_prefix_length,
                            const RowFn& fill,
                            std::uint64_t cap = default_enumeration_cap());

  Kind kind() const { return data_->kind; }
  bool is_context_free() const { return data_->kind == Kind::ContextFree; }
  int alphabet_size() const { return data_->alphabet_size; }
  int min_prefix_length() const { return data_->min_len; }
  int max_prefix_length() const { return data_->max_len; }
  bool covers(int prefix_length) const {
    return prefix_length >= data_->min_len && prefix_length <= data_->max_len;
  }

  std::span<const double> row(std::span<const Token> prefix) const;
  std::span<const double> log_row(std::span<const Token> prefix) const;

  // Unchecked fast paths for kernels; `code` must be the prefix_code of a covered length.
  std::span<const double> row_at(int prefix_length, std::uint64_t code) const {
    return {data_->rows.data() + row_offset(prefix_length, code), row_width()};
  }
  std::span<const double> log_row_at(int prefix_length, std::uint64_t code) const {
    return {data_->log_rows.data() + row_offset(prefix_length, code), row_width()};
  }

  double prob(std::span<const Token> prefix, Token token) const;

  /// Flat storage of every row.
  std::span<const double> table() const { return data_->rows; }
  std::size_t row_count() const { return data_->rows.size() / row_width(); }

  bool has_full_support() const;

  /// Identity: both handles refer to the same storage.
  bool same_as(const StepPolicy& other) const { return data_ == other.data_; }

  /// Content equality: same kind, shape and bitwise-equal rows.
  friend bool operator==(const StepPolicy& a, const StepPolicy& b);

 private:
  struct Data {
    Kind kind;
    int alphabet_size;
    int min_len;
    int max_len;
    std::vector<std::uint64_t> length_offsets;  // first row index of each covered length
    std::vector<double> rows;
    std::vector<double> log_rows;
  };

  explicit StepPolicy(std::shared_ptr<const Data> data) : data_(std::move(data)) {}
  static std::shared_ptr<const Data> finish(Data data);

  std::size_t row_width() const { return static_cast<std::size_t>(data_->alphabet_size); }
  std::size_t row_offset(int prefix_length, std::uint64_t code) const {
    if (data_->kind == Kind::ContextFree) return 0;
    return static_cast<std::size_t>(
        (data_->length_offsets[static_cast<std::size_t>(prefix_length - data_->min_len)] + code) *
        row_width());
  }

  std::shared_ptr<const Data> data_;
};

/// An H-tuple of step policies; step h (0-based) is queried at prefixes of length h.
class SeqPolicy {
 public:
  explicit SeqPolicy(std::vector<StepPolicy> steps);

  /// The same step policy at every position.
  static SeqPolicy shared(const StepPolicy& step, int horizon);

  int horizon() const { return static_cast<int>(steps_.size()); }
  int alphabet_size() const { return steps_.front().alphabet_size(); }
  const StepPolicy& step(int h) const { return steps_[static_cast<std::size_t>(h)]; }
  std::span<const StepPolicy> steps() const { return steps_; }

  bool is_fully_shared() const;
  /// Every step is context-free, so P^pi is a product of per-step marginals.
  bool is_product() const;

 private:
  std::vector<StepPolicy> steps_;
};

struct Trajectory {
  std::vector<Token> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
  auto operator<=>(const Trajectory&) const = default;
};

enum class Regime { Decomposable, FullyShared, Dependent };

const char* to_string(Regime regime);

/// A finite hypothesis class over sequence policies.
///
/// Decomposable classes are Pi_0^H and FullyShared classes are
/// {(p, ..., p) : p in Pi_0}; neither materializes its members. Dependent
/// classes are an explicit list; their base() is the union of per-step
/// marginal sets (distinct by content, first-appearance order).
class PolicyClass {
 public:
  static PolicyClass decomposable(std::vector<StepPolicy> base, int horizon);
  static PolicyClass fully_shared(std::vector<StepPolicy> base, int horizon);
  static PolicyClass dependent(std::vector<SeqPolicy> members);

  Regime regime() const { return regime_; }
  int horizon() const { return horizon_; }
  int alphabet_size() const { return base_.front().alphabet_size(); }

  std::span<const StepPolicy> base() const { return base_; }
  /// Dependent only: the explicit member list.
  std::span<const SeqPolicy> explicit_members() const { return members_; }
  /// Dependent only: member_steps()[k][h] indexes base() for member k at step h.
  const std::vector<std::vector<std::size_t>>& member_steps() const { return member_steps_; }

  /// |Pi|, or nullopt if it does not fit in 64 bits.
  std::optional<std::uint64_t> member_count() const;
  double log_member_count() const;

  /// Per-step marginal sets as indices into base().
  std::vector<std::vector<std::size_t>> marginal_sets() const;

  /// The member selecting base()[choice[h]] at step h (Decomposable), or
  /// base()[choice[0]] everywhere (FullyShared, where a single entry suffices).
  SeqPolicy member(std::span<const std::size_t> choice) const;

 private:
  PolicyClass() = default;

  Regime regime_ = Regime::Decomposable;
  int horizon_ = 0;
  std::vector<StepPolicy> base_;
  std::vector<SeqPolicy> members_;
  std::vector<std::vector<std::size_t>> member_steps_;
};

/// log|Pi_0| <= log|Pi| + log H and log|Pi| <= H log|Pi_0|, checked on integers.
bool satisfies_lifting_sandwich(const PolicyClass& cls);

/// Members in index order: lexicographic choice tuples for Decomposable.
void for_each_member(const PolicyClass& cls, const std::function<void(const SeqPolicy&)>& fn,
                     std::uint64_t cap = default_enumeration_cap());
std::vector<SeqPolicy> class_members(const PolicyClass& cls,
                                     std::uint64_t cap = default_enumeration_cap());

Trajectory sample_trajectory(const SeqPolicy& policy, Rng& rng);

/// Sum of per-step log conditional probabilities; ZeroProbability on a zero factor.
double log_joint_prob(const SeqPolicy& policy, std::span<const Token> tokens);
inline double log_joint_prob(const SeqPolicy& policy, const Trajectory& traj) {
  return log_joint_prob(policy, std::span<const Token>(traj.tokens));
}

/// All d^H trajectories in lexicographic order.
std::vector<Trajectory> enumerate_trajectories(int horizon, int alphabet_size,
                                               std::uint64_t cap = default_enumeration_cap());

/// The trajectory at a lexicographic index.
void decode_trajectory(std::uint64_t index, int alphabet_size, std::span<Token> out);

/// sup over steps, prefixes, tokens and members of log(pi*_h(x|s) / pi_h(x|s)).
/// Throws Unbounded when a member assigns zero mass where pi* does not.
double log_ratio_bound(const SeqPolicy& pi_star, const PolicyClass& cls,
                       std::uint64_t cap = default_enumeration_cap());

/// The same supremum taken over ordered pairs of class step policies at each step.
double member_log_ratio_bound(const PolicyClass& cls,
                              std::uint64_t cap = default_enumeration_cap());

}  // namespace arkl
