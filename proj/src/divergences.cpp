#include "arkl/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arkl/serialize.hpp"

namespace arkl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_same_shape(const SeqPolicy& p, const SeqPolicy& q) {
  if (p.horizon() != q.horizon() || p.alphabet_size() != q.alphabet_size()) {
    throw InvalidParam("policies disagree on horizon or alphabet size");
  }
}

// Prefix law of length h + 1 from the law of length h.
std::vector<double> extend_prefix_law(const SeqPolicy& p, int h, const std::vector<double>& level) {
  const auto d = static_cast<std::size_t>(p.alphabet_size());
  std::vector<double> next(level.size() * d, 0.0);
  for (std::size_t code = 0; code < level.size(); ++code) {
    if (level[code] <= 0.0) continue;
    const auto row = p.step(h).row_at(h, code);
    for (std::size_t x = 0; x < d; ++x) next[code * d + x] = level[code] * row[x];
  }
  return next;
}

// Calls fn(h, weights) for h = 0..H-1 where weights[code] = P^p(prefix of length h).
template <class Fn>
void for_each_prefix_level(const SeqPolicy& p, std::uint64_t cap, Fn fn) {
  trajectory_count(p.alphabet_size(), p.horizon(), cap);
  std::vector<double> level{1.0};
  for (int h = 0; h < p.horizon(); ++h) {
    fn(h, std::span<const double>(level));
    if (h + 1 < p.horizon()) level = extend_prefix_law(p, h, level);
  }
}

// Prefix law of length h under P^p.
std::vector<double> prefix_law(const SeqPolicy& p, int h, std::uint64_t cap) {
  const auto count = checked_pow(static_cast<std::uint64_t>(p.alphabet_size()), h);
  if (!count || *count > cap) throw CapExceeded("prefix enumeration exceeds the cap");
  std::vector<double> level{1.0};
  for (int k = 0; k < h; ++k) level = extend_prefix_law(p, k, level);
  return level;
}

}  // namespace

const char* to_string(Method method) {
  switch (method) {
    case Method::ExactEnumeration: return "exact_enumeration";
    case Method::ChainRule: return "chain_rule";
    case Method::MonteCarlo: return "monte_carlo";
  }
  return "?";
}

std::string divergence_csv_header() { return "value,method,mc_samples,mc_stderr"; }

std::string to_csv_row(const DivergenceReport& report) {
  std::string out = format_real(report.value) + "," + to_string(report.method) + ",";
  if (report.mc_samples) out += std::to_string(*report.mc_samples);
  out += ",";
  if (report.mc_stderr) out += format_real(*report.mc_stderr);
  return out;
}

double kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidParam("rows disagree in length");
  double sum = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] <= 0.0) continue;
    if (q[x] <= 0.0) throw SupportViolation("KL: p > 0 where q = 0");
    sum += p[x] * (std::log(p[x]) - std::log(q[x]));
  }
  return std::max(sum, 0.0);
}

double squared_hellinger(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidParam("rows disagree in length");
  double sum = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    const double diff = std::sqrt(p[x]) - std::sqrt(q[x]);
    sum += diff * diff;
  }
  return sum;
}

double conditional_kl(const StepPolicy& p_h, const StepPolicy& q_h, std::span<const Token> prefix) {
  return kl(p_h.row(prefix), q_h.row(prefix));
}

DivergenceReport joint_kl_exact(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap) {
  bool violation = false;
  const double value = detail::reduce_joint_laws(
      p, q, cap,
      [](std::span<const Token>, double a, double b) {
        if (a == kNegInf || b == kNegInf) return 0.0;
        return std::exp(a) * (a - b);
      },
      violation);
  if (violation) throw SupportViolation("joint KL: P^p(S) > 0 where P^q(S) = 0");
  return {std::max(value, 0.0), Method::ExactEnumeration, std::nullopt, std::nullopt};
}

DivergenceReport joint_kl_chain(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap) {
  require_same_shape(p, q);
  double total = 0.0;
  for_each_prefix_level(p, cap, [&](int h, std::span<const double> weights) {
    double level_sum = 0.0;
    for (std::size_t code = 0; code < weights.size(); ++code) {
      if (weights[code] <= 0.0) continue;
      level_sum += weights[code] * kl(p.step(h).row_at(h, code), q.step(h).row_at(h, code));
    }
    total += level_sum;
  });
  return {total, Method::ChainRule, std::nullopt, std::nullopt};
}

DivergenceReport squared_hellinger(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap) {
  bool unused = false;
  const double value = detail::reduce_joint_laws(
      p, q, cap,
      [](std::span<const Token>, double a, double b) {
        const double diff = std::exp(0.5 * a) - std::exp(0.5 * b);
        return diff * diff;
      },
      unused);
  return {std::clamp(value, 0.0, 2.0), Method::ExactEnumeration, std::nullopt, std::nullopt};
}

DivergenceReport total_variation(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap) {
  bool unused = false;
  const double value = detail::reduce_joint_laws(
      p, q, cap,
      [](std::span<const Token>, double a, double b) { return 0.5 * std::abs(std::exp(a) - std::exp(b)); },
      unused);
  return {std::clamp(value, 0.0, 1.0), Method::ExactEnumeration, std::nullopt, std::nullopt};
}

DivergenceReport joint_kl_monte_carlo(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t samples,
                                      Rng& rng) {
  require_same_shape(p, q);
  if (samples < 2) throw InvalidParam("Monte Carlo needs at least two samples");
  double mean = 0.0;
  double m2 = 0.0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const auto traj = sample_trajectory(p, rng);
    double lp = 0.0;
    double lq = 0.0;
    std::uint64_t code = 0;
    for (int h = 0; h < p.horizon(); ++h) {
      const auto t = static_cast<std::size_t>(traj.tokens[static_cast<std::size_t>(h)]);
      lp += p.step(h).log_row_at(h, code)[t];
      lq += q.step(h).log_row_at(h, code)[t];
      code = code * static_cast<std::uint64_t>(p.alphabet_size()) + t;
    }
    if (lq == kNegInf) throw ZeroProbability("sampled trajectory has zero probability under q");
    const double x = lp - lq;
    const double delta = x - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (x - mean);
  }
  const double sd = std::sqrt(m2 / static_cast<double>(samples - 1));
  return {mean, Method::MonteCarlo, samples, sd / std::sqrt(static_cast<double>(samples))};
}

double stepwise_hellinger_sum(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap) {
  require_same_shape(p, q);
  double total = 0.0;
  for_each_prefix_level(p, cap, [&](int h, std::span<const double> weights) {
    for (std::size_t code = 0; code < weights.size(); ++code) {
      if (weights[code] <= 0.0) continue;
      total += weights[code] * squared_hellinger(p.step(h).row_at(h, code), q.step(h).row_at(h, code));
    }
  });
  return total;
}

double expected_conditional_kl(const SeqPolicy& p, int h, const StepPolicy& candidate, std::uint64_t cap) {
  if (h < 0 || h >= p.horizon()) throw InvalidParam("step index out of range");
  if (candidate.alphabet_size() != p.alphabet_size() || !candidate.covers(h)) {
    throw InvalidParam("candidate step policy does not fit step " + std::to_string(h));
  }
  const auto& ph = p.step(h);
  if (ph.is_context_free() && candidate.is_context_free()) return kl(ph.table(), candidate.table());
  const auto weights = prefix_law(p, h, cap);
  double total = 0.0;
  for (std::size_t code = 0; code < weights.size(); ++code) {
    if (weights[code] <= 0.0) continue;
    total += weights[code] * kl(ph.row_at(h, code), candidate.row_at(h, code));
  }
  return total;
}

double product_joint_kl(const SeqPolicy& p, const SeqPolicy& q) {
  require_same_shape(p, q);
  if (!p.is_product() || !q.is_product()) throw InvalidParam("product formula needs context-free steps");
  double total = 0.0;
  for (int h = 0; h < p.horizon(); ++h) total += kl(p.step(h).table(), q.step(h).table());
  return total;
}

double product_squared_hellinger(const SeqPolicy& p, const SeqPolicy& q) {
  require_same_shape(p, q);
  if (!p.is_product() || !q.is_product()) throw InvalidParam("product formula needs context-free steps");
  // Bhattacharyya coefficients multiply across independent steps.
  double log_bc = 0.0;
  for (int h = 0; h < p.horizon(); ++h) {
    log_bc += std::log1p(-0.5 * squared_hellinger(p.step(h).table(), q.step(h).table()));
  }
  return std::clamp(-2.0 * std::expm1(log_bc), 0.0, 2.0);
}

DivergenceReport joint_kl(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap) {
  if (p.is_product() && q.is_product()) {
    return {product_joint_kl(p, q), Method::ChainRule, std::nullopt, std::nullopt};
  }
  return joint_kl_exact(p, q, cap);
}

DivergenceReport joint_squared_hellinger(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap) {
  if (p.is_product() && q.is_product()) {
    return {product_squared_hellinger(p, q), Method::ChainRule, std::nullopt, std::nullopt};
  }
  return squared_hellinger(p, q, cap);
}

ClassOptimum min_class_kl(const SeqPolicy& truth, const PolicyClass& cls, std::uint64_t cap) {
  if (truth.horizon() != cls.horizon() || truth.alphabet_size() != cls.alphabet_size()) {
    throw InvalidParam("truth and class disagree on shape");
  }
  const auto horizon = static_cast<std::size_t>(cls.horizon());
  const auto base_size = cls.base().size();
  const auto sets = cls.marginal_sets();

  // table[h][j] = E_{s_h ~ P^truth}[KL(truth_h || base_j)] for the (h, j) the class can use.
  std::vector<std::vector<double>> table(horizon, std::vector<double>(base_size, std::nan("")));
  for (std::size_t h = 0; h < horizon; ++h) {
    const int hi = static_cast<int>(h);
    const auto& th = truth.step(hi);
    const bool all_cf = th.is_context_free() &&
                        std::all_of(sets[h].begin(), sets[h].end(),
                                    [&](std::size_t j) { return cls.base()[j].is_context_free(); });
    std::vector<double> weights;
    if (!all_cf) weights = prefix_law(truth, hi, cap);
    for (auto j : sets[h]) {
      const auto& cand = cls.base()[j];
      if (all_cf) {
        table[h][j] = kl(th.table(), cand.table());
        continue;
      }
      double e = 0.0;
      for (std::size_t code = 0; code < weights.size(); ++code) {
        if (weights[code] <= 0.0) continue;
        e += weights[code] * kl(th.row_at(hi, code), cand.row_at(hi, code));
      }
      table[h][j] = e;
    }
  }

  ClassOptimum best;
  switch (cls.regime()) {
    case Regime::Decomposable: {
      for (std::size_t h = 0; h < horizon; ++h) {
        const auto it = std::min_element(table[h].begin(), table[h].end());
        best.step_choice.push_back(static_cast<std::size_t>(it - table[h].begin()));
        best.value += *it;
      }
      return best;
    }
    case Regime::FullyShared: {
      double best_value = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < base_size; ++j) {
        double v = 0.0;
        for (std::size_t h = 0; h < horizon; ++h) v += table[h][j];
        if (v < best_value) {
          best_value = v;
          best.member_index = j;
        }
      }
      best.value = best_value;
      best.step_choice = {*best.member_index};
      return best;
    }
    case Regime::Dependent: {
      double best_value = std::numeric_limits<double>::infinity();
      const auto& steps = cls.member_steps();
      for (std::size_t k = 0; k < steps.size(); ++k) {
        double v = 0.0;
        for (std::size_t h = 0; h < horizon; ++h) v += table[h][steps[k][h]];
        if (v < best_value) {
          best_value = v;
          best.member_index = k;
        }
      }
      best.value = best_value;
      best.step_choice = steps[*best.member_index];
      return best;
    }
  }
  return best;
}

}  // namespace arkl
