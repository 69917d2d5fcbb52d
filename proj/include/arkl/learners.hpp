#pragma once

// Log-loss ERM and the per-step Bayesian posterior, plus their stepwise
// (lifted) variants.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arkl/core.hpp"

namespace arkl {

/// n trajectories of length H stored flat, with the prefix code of every
/// (trajectory, step) precomputed.
class Dataset {
 public:
  Dataset(int horizon, int alphabet_size, std::vector<Token> tokens);
  static Dataset from_trajectories(int horizon, int alphabet_size, std::span<const Trajectory> trajectories);

  int horizon() const { return horizon_; }
  int alphabet_size() const { return alphabet_size_; }
  std::size_t size() const { return tokens_.size() / static_cast<std::size_t>(horizon_); }

  std::span<const Token> trajectory(std::size_t i) const {
    const auto hs = static_cast<std::size_t>(horizon_);
    return std::span<const Token>(tokens_).subspan(i * hs, hs);
  }
  Token token(std::size_t i, int h) const {
    return tokens_[i * static_cast<std::size_t>(horizon_) + static_cast<std::size_t>(h)];
  }
  /// prefix_code of trajectory(i).first(h).
  std::uint64_t prefix_code_at(std::size_t i, int h) const {
    return codes_[i * static_cast<std::size_t>(horizon_) + static_cast<std::size_t>(h)];
  }
  /// counts[h * d + x] = #{i : u_h^i = x}.
  std::span<const std::uint64_t> token_counts() const { return counts_; }

 private:
  int horizon_;
  int alphabet_size_;
  std::vector<Token> tokens_;
  std::vector<std::uint64_t> codes_;
  std::vector<std::uint64_t> counts_;
};

Dataset sample_dataset(const SeqPolicy& policy, std::size_t n, Rng& rng);

/// -(1/n) sum_i log P^pi(S_i). ZeroProbability on a zero factor.
double empirical_log_loss(const SeqPolicy& policy, const Dataset& data);

/// losses[h][j] = -sum_i log base_j(u_h^i | u_<h^i); +inf when some factor is 0.
/// Cells run in parallel, each summed serially in sample order.
std::vector<std::vector<double>> step_loss_table(std::span<const StepPolicy> base, const Dataset& data);

struct Selection {
  SeqPolicy policy;
  std::vector<std::size_t> step_choice;     // index into the base per step (one entry for FullyShared)
  std::optional<std::size_t> member_index;  // FullyShared / Dependent
};

/// Empirical log-loss minimizer over the class, lowest index on ties.
/// Decomposable classes are solved per step without member enumeration.
Selection erm(const PolicyClass& cls, const Dataset& data);

/// Per-step argmin over `base`; the result lies in base^H.
Selection stepwise_erm(std::span<const StepPolicy> base, const Dataset& data, int horizon);

struct PosteriorWeights {
  std::vector<std::vector<double>> weights;  // weights[h][j]

  /// "step,member_index,weight" rows, one per (h, j).
  std::string to_csv() const;
};

struct BayesPosterior {
  SeqPolicy predictor;
  PosteriorWeights weights;
};

std::vector<double> uniform_prior(std::size_t size);

/// q_h(j) proportional to prior_j prod_i base_j(u_h^i | u_<h^i), via log-sum-exp.
/// An empty prior means uniform.
PosteriorWeights posterior_weights(std::span<const StepPolicy> base, const Dataset& data, int horizon,
                                   std::span<const double> prior = {});

/// The mixture row sum_j w_j base_j(.|prefix).
std::vector<double> mixture_row(std::span<const StepPolicy> base, std::span<const double> weights,
                                std::span<const Token> prefix);

/// Posterior weights together with the materialized mixture predictor: a
/// context-free row per step when every base policy is context-free, a
/// tabular step over prefixes of length h otherwise. Throws CapExceeded when
/// the tabular rows would exceed `cap`; mixture_row then evaluates the
/// predictor one prefix at a time.
BayesPosterior bayes_posterior(std::span<const StepPolicy> base, const Dataset& data, int horizon,
                               std::span<const double> prior = {},
                               std::uint64_t cap = default_enumeration_cap());

/// Posterior mode over the class. `prior` ranges over base() for
/// Decomposable and FullyShared classes and over the members for Dependent
/// ones; empty means uniform. Lowest index on ties.
Selection bayes_mode(const PolicyClass& cls, const Dataset& data, std::span<const double> prior = {});

/// For every base member j and step h:
///   sum_i -log predictor_h(u_h^i|s^i) <= sum_i -log base_j(u_h^i|s^i) + log(1/prior_j) + 1e-9.
bool mixability_check(std::span<const StepPolicy> base, const Dataset& data, int horizon,
                      std::span<const double> prior = {});

}  // namespace arkl
