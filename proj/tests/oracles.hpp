#pragma once

// Test-side oracles and seeded generators. Everything here is written
// independently of the library's kernels: joint laws are built by explicit
// digit decoding and plain products of table entries.

#include <cmath>
#include <cstdint>
#include <vector>

#include "arkl/core.hpp"

namespace oracle {

using arkl::Rng;
using arkl::SeqPolicy;
using arkl::StepPolicy;
using arkl::Token;

inline std::vector<double> random_row(int d, Rng& rng, double floor = 0.05) {
  std::vector<double> row(static_cast<std::size_t>(d));
  double total = 0.0;
  for (auto& x : row) {
    x = floor + arkl::uniform01(rng);
    total += x;
  }
  for (auto& x : row) x /= total;
  return row;
}

/// Step h covers exactly prefixes of length h.
inline SeqPolicy random_tabular(int H, int d, Rng& rng, double floor = 0.05) {
  std::vector<StepPolicy> steps;
  for (int h = 0; h < H; ++h) {
    steps.push_back(StepPolicy::tabular(d, h, h, [&](std::span<const Token>, std::span<double> row) {
      const auto r = random_row(d, rng, floor);
      std::copy(r.begin(), r.end(), row.begin());
    }));
  }
  return SeqPolicy(std::move(steps));
}

inline SeqPolicy random_product(int H, int d, Rng& rng) {
  std::vector<StepPolicy> steps;
  for (int h = 0; h < H; ++h) steps.push_back(StepPolicy::context_free(random_row(d, rng)));
  return SeqPolicy(std::move(steps));
}

inline std::vector<Token> digits(std::uint64_t index, int d, int H) {
  std::vector<Token> out(static_cast<std::size_t>(H));
  for (int k = H - 1; k >= 0; --k) {
    out[static_cast<std::size_t>(k)] = static_cast<Token>(index % static_cast<std::uint64_t>(d));
    index /= static_cast<std::uint64_t>(d);
  }
  return out;
}

/// P^pi over all d^H trajectories in lexicographic order.
inline std::vector<double> joint_law(const SeqPolicy& p) {
  const int d = p.alphabet_size();
  const int H = p.horizon();
  std::uint64_t count = 1;
  for (int h = 0; h < H; ++h) count *= static_cast<std::uint64_t>(d);
  std::vector<double> law(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto t = digits(i, d, H);
    double prob = 1.0;
    for (int h = 0; h < H; ++h) {
      const auto prefix = std::span<const Token>(t).first(static_cast<std::size_t>(h));
      prob *= p.step(h).row(prefix)[static_cast<std::size_t>(t[static_cast<std::size_t>(h)])];
    }
    law[i] = prob;
  }
  return law;
}

inline double kl_laws(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

/// 2 - 2 sum sqrt(p q).
inline double hellinger_laws(const std::vector<double>& p, const std::vector<double>& q) {
  double bc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) bc += std::sqrt(p[i] * q[i]);
  return 2.0 - 2.0 * bc;
}

inline double tv_laws(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

inline double bernoulli_kl(double p, double q) {
  return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

/// -(1/n) sum_i log prod_h pi_h(u_h | u_<h) by direct lookup.
inline double log_loss(const SeqPolicy& p, const std::vector<std::vector<Token>>& data) {
  double total = 0.0;
  for (const auto& t : data) {
    for (int h = 0; h < p.horizon(); ++h) {
      const auto prefix = std::span<const Token>(t).first(static_cast<std::size_t>(h));
      total += std::log(p.step(h).row(prefix)[static_cast<std::size_t>(t[static_cast<std::size_t>(h)])]);
    }
  }
  return -total / static_cast<double>(data.size());
}

}  // namespace oracle
