#pragma once

// Instance generators with their closed-form oracle values.

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"

#include "arkl/core.hpp"
#include "arkl/divergences.hpp"

namespace arkl {

/// Sylvester Hadamard matrix of a power-of-two order; entry [row][col] is +-1.
std::vector<std::vector<int>> sylvester_hadamard(int order);

/// m context-free policies row_v(s) = e^{eps v_s} / (d cosh eps) built from
/// balanced, pairwise orthogonal sign vectors v.
struct HadamardFamily {
  int m = 0;
  int d = 0;
  double eps = 0.0;
  std::vector<std::vector<int>> columns;  // m sign vectors of length d
  std::vector<StepPolicy> members;

  /// eps tanh eps: KL between any two distinct members.
  double pairwise_kl() const;
  /// eps tanh eps - log cosh eps: KL from any member to the uniform 1/d row.
  double kl_to_mixture() const;
  StepPolicy uniform() const;
};

/// Order d = 2^ceil(log2 max(m, 2)), doubled when fewer than m columns remain
/// after dropping the all-ones column; members use columns 1..m.
HadamardFamily make_hadamard_family(int m, double eps);

/// min((G/4) sqrt(log m / n), G/2, 1).
double fano_eps(double G, int m, std::uint64_t n);

struct FanoProductInstance {
  HadamardFamily family;
  int horizon = 0;
  PolicyClass cls;                   // Decomposable over family.members
  std::vector<std::size_t> theta;    // truth index per step
  SeqPolicy truth;

  /// eps tanh eps times the Hamming distance between theta and other.
  double kl_to(std::span<const std::size_t> other) const;
};

FanoProductInstance make_fano_instance(int horizon, int m, double eps, std::vector<std::size_t> theta);
/// theta drawn uniformly from [m]^H.
FanoProductInstance make_fano_instance(int horizon, int m, double eps, Rng& rng);

std::size_t hamming_distance(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// Tokens 0/1 with P(1) the Bernoulli parameter. Base class
/// {Bern(1/2 + a), Bern(1/2 - a)} with a = 1/4, truth Bern(1/2 + sign b)
/// with b = 1/(10 sqrt n), extended to H independent steps.
struct BernoulliMisspecInstance {
  std::uint64_t n = 0;
  int horizon = 0;
  int sign = 1;
  double a = 0.25;
  double b = 0.0;
  std::vector<StepPolicy> base;  // base[0] = Bern(1/2 + a), base[1] = Bern(1/2 - a)
  PolicyClass cls;               // Decomposable
  SeqPolicy truth;

  /// 2 b log 3: excess KL of the wrong member over the right one, per step.
  double per_step_gap() const;
  /// Index into base of the per-step class optimum.
  std::size_t optimal_index() const { return sign > 0 ? 0 : 1; }
  /// KL(Bern(1/2 + sign b) || optimal member), per step.
  double per_step_min_kl() const;
};

BernoulliMisspecInstance make_bernoulli_instance(std::uint64_t n, int horizon, int sign);

/// Exact TV between the n-fold products of Bern(1/2 + b) and Bern(1/2 - b).
double bernoulli_nfold_tv(double b, std::uint64_t n);

/// A dependent class whose members are whole-trajectory laws, encoded as
/// one-step policies over a super-alphabet of size family.d >= M. Each
/// outcome stands for one trajectory of the original H-step problem.
struct DependentHardInstance {
  int members = 0;  // M
  int horizon = 0;  // H of the encoded problem (enters only through eps)
  double G = 0.0;
  std::uint64_t n = 0;
  double eps = 0.0;
  HadamardFamily family;
  PolicyClass cls;  // Dependent, horizon 1
};

/// eps = min((H G / 4) sqrt(log M / n), H G / 2, 1).
DependentHardInstance make_dependent_instance(int horizon, int members, double G, std::uint64_t n);

/// Random tabular base class with a truth outside it. Not one of the proof
/// constructions; used where any misspecified instance will do.
struct MisspecifiedInstance {
  SeqPolicy truth;
  PolicyClass cls;  // Decomposable
  ClassOptimum optimum;
  double perturbation = 0.0;
};

/// Base: class_size tabular step policies with rows drawn from [0.1, 1] and
/// normalized. Truth step h: (1 - perturbation) base_a(.|s) + perturbation
/// base_b(.|s) for two members a != b drawn per step. perturbation = 0 is
/// the realizable case.
MisspecifiedInstance make_misspecified_instance(int horizon, int alphabet_size, int class_size,
                                                double perturbation, Rng& rng,
                                                std::uint64_t cap = default_enumeration_cap());

// Manifests: construction name, parameters, closed-form oracle values, seed.
nlohmann::json manifest(const HadamardFamily& family, std::optional<std::uint64_t> seed = std::nullopt);
nlohmann::json manifest(const FanoProductInstance& inst, std::optional<std::uint64_t> seed = std::nullopt);
nlohmann::json manifest(const BernoulliMisspecInstance& inst, std::optional<std::uint64_t> seed = std::nullopt);
nlohmann::json manifest(const DependentHardInstance& inst, std::optional<std::uint64_t> seed = std::nullopt);
nlohmann::json manifest(const MisspecifiedInstance& inst, std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace arkl
