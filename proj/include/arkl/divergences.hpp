#pragma once

// Divergences between the joint trajectory laws of two sequence policies.
//
// Exact routines enumerate all d^H trajectories with an OpenMP kernel that
// sums fixed-size chunks in a fixed order, so results do not depend on the
// thread count. arkl/reference.hpp keeps straightforward serial versions for
// cross-checking.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arkl/core.hpp"

namespace arkl {

enum class Method { ExactEnumeration, ChainRule, MonteCarlo };

const char* to_string(Method method);

struct DivergenceReport {
  double value = 0.0;
  Method method = Method::ExactEnumeration;
  std::optional<std::uint64_t> mc_samples;
  std::optional<double> mc_stderr;
};

/// "value,method,mc_samples,mc_stderr"
std::string divergence_csv_header();
/// Absent optional fields are written as empty cells.
std::string to_csv_row(const DivergenceReport& report);

double kl(std::span<const double> p, std::span<const double> q);
double squared_hellinger(std::span<const double> p, std::span<const double> q);

/// KL between the rows of two step policies at one prefix.
double conditional_kl(const StepPolicy& p_h, const StepPolicy& q_h, std::span<const Token> prefix);

DivergenceReport joint_kl_exact(const SeqPolicy& p, const SeqPolicy& q,
                                std::uint64_t cap = default_enumeration_cap());

/// sum_h E_{s_h ~ P^p}[KL(p_h(.|s_h) || q_h(.|s_h))] by prefix enumeration.
/// Unreachable prefixes contribute nothing.
DivergenceReport joint_kl_chain(const SeqPolicy& p, const SeqPolicy& q,
                                std::uint64_t cap = default_enumeration_cap());

/// sum_S (sqrt P^p(S) - sqrt P^q(S))^2, in [0, 2].
DivergenceReport squared_hellinger(const SeqPolicy& p, const SeqPolicy& q,
                                   std::uint64_t cap = default_enumeration_cap());

/// (1/2) sum_S |P^p(S) - P^q(S)|.
DivergenceReport total_variation(const SeqPolicy& p, const SeqPolicy& q,
                                 std::uint64_t cap = default_enumeration_cap());

/// Mean of log(P^p(S)/P^q(S)) over S ~ P^p with its standard error.
DivergenceReport joint_kl_monte_carlo(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t samples,
                                      Rng& rng);

/// sum_h E_{s_h ~ P^p}[D_H^2(p_h(.|s_h), q_h(.|s_h))].
double stepwise_hellinger_sum(const SeqPolicy& p, const SeqPolicy& q,
                              std::uint64_t cap = default_enumeration_cap());

/// E_{s_h ~ P^p}[KL(p_h(.|s_h) || candidate(.|s_h))] for one step h.
double expected_conditional_kl(const SeqPolicy& p, int h, const StepPolicy& candidate,
                               std::uint64_t cap = default_enumeration_cap());

// Product laws (every step context-free) need no enumeration.

/// sum_h KL(p_h || q_h).
double product_joint_kl(const SeqPolicy& p, const SeqPolicy& q);
/// 2 (1 - prod_h (1 - D_H^2(p_h, q_h) / 2)), evaluated without cancellation.
double product_squared_hellinger(const SeqPolicy& p, const SeqPolicy& q);

/// Product formula when both laws are products, exact enumeration otherwise.
DivergenceReport joint_kl(const SeqPolicy& p, const SeqPolicy& q,
                          std::uint64_t cap = default_enumeration_cap());
DivergenceReport joint_squared_hellinger(const SeqPolicy& p, const SeqPolicy& q,
                                         std::uint64_t cap = default_enumeration_cap());

struct ClassOptimum {
  double value = 0.0;                   // min over the class of KL(P^truth || P^pi)
  std::vector<std::size_t> step_choice;  // Decomposable: per step; FullyShared: one entry
  std::optional<std::size_t> member_index;  // FullyShared / Dependent
};

/// min_{pi in class} KL(P^truth || P^pi). Decomposable classes are minimized
/// step by step through the chain rule; ties go to the lowest index.
ClassOptimum min_class_kl(const SeqPolicy& truth, const PolicyClass& cls,
                          std::uint64_t cap = default_enumeration_cap());

namespace detail {

/// Visits every trajectory with its log-probability under p and q and sums
/// term(tokens, log_p, log_q). Work is split into fixed chunks reduced in
/// index order. Returns the sum; `violation` is set when log_p is finite and
/// log_q is -inf anywhere.
template <class Term>
double reduce_joint_laws(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap, Term term,
                         bool& violation);

}  // namespace detail

}  // namespace arkl

#include "arkl/detail/joint_law_kernel.hpp"
