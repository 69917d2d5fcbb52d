#include "arkl/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arkl/serialize.hpp"

namespace arkl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_base(std::span<const StepPolicy> base, int alphabet_size, int horizon) {
  if (base.empty()) throw InvalidParam("base class is empty");
  for (const auto& b : base) {
    if (b.alphabet_size() != alphabet_size) throw InvalidParam("base policy alphabet does not match the data");
    for (int h = 0; h < horizon; ++h) {
      if (!b.covers(h)) throw InvalidParam("base policy does not cover every step");
    }
  }
}

std::vector<double> log_prior_or_uniform(std::span<const double> prior, std::size_t size) {
  if (prior.empty()) return std::vector<double>(size, -std::log(static_cast<double>(size)));
  if (prior.size() != size) throw InvalidParam("prior has the wrong length");
  std::vector<double> out(size);
  double total = 0.0;
  for (std::size_t j = 0; j < size; ++j) {
    if (!(prior[j] > 0.0) || !std::isfinite(prior[j])) throw InvalidParam("prior must be strictly positive");
    total += prior[j];
    out[j] = std::log(prior[j]);
  }
  if (std::abs(total - 1.0) > kRowSumTolerance) throw InvalidParam("prior does not sum to 1");
  return out;
}

// First index minimizing score; throws when every score is +inf.
std::size_t argmin_finite(std::span<const double> score) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < score.size(); ++j) {
    if (score[j] < score[best]) best = j;
  }
  if (score[best] == kInf) throw ZeroProbability("every candidate assigns zero probability to the data");
  return best;
}

// Minimizes sum_h table[h][.] (+ penalty) under the class structure.
Selection select(const PolicyClass& cls, const std::vector<std::vector<double>>& table,
                 std::span<const double> penalty) {
  const auto horizon = static_cast<std::size_t>(cls.horizon());
  const auto base = cls.base();
  switch (cls.regime()) {
    case Regime::Decomposable: {
      std::vector<std::size_t> choice;
      std::vector<double> score(base.size());
      for (std::size_t h = 0; h < horizon; ++h) {
        for (std::size_t j = 0; j < base.size(); ++j) {
          score[j] = table[h][j] + (penalty.empty() ? 0.0 : penalty[j]);
        }
        choice.push_back(argmin_finite(score));
      }
      auto policy = cls.member(choice);
      return {std::move(policy), std::move(choice), std::nullopt};
    }
    case Regime::FullyShared: {
      std::vector<double> score(base.size(), 0.0);
      for (std::size_t j = 0; j < base.size(); ++j) {
        for (std::size_t h = 0; h < horizon; ++h) score[j] += table[h][j];
        if (!penalty.empty()) score[j] += penalty[j];
      }
      const auto j = argmin_finite(score);
      return {SeqPolicy::shared(base[j], cls.horizon()), {j}, j};
    }
    case Regime::Dependent: {
      const auto& steps = cls.member_steps();
      std::vector<double> score(steps.size(), 0.0);
      for (std::size_t k = 0; k < steps.size(); ++k) {
        for (std::size_t h = 0; h < horizon; ++h) score[k] += table[h][steps[k][h]];
        if (!penalty.empty()) score[k] += penalty[k];
      }
      const auto k = argmin_finite(score);
      return {cls.explicit_members()[k], steps[k], k};
    }
  }
  throw InvalidParam("unknown regime");
}

void require_data_fits(const PolicyClass& cls, const Dataset& data) {
  if (cls.horizon() != data.horizon() || cls.alphabet_size() != data.alphabet_size()) {
    throw InvalidParam("class and data disagree on shape");
  }
}

// log sum_j exp(v_j).
double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

Dataset::Dataset(int horizon, int alphabet_size, std::vector<Token> tokens)
    : horizon_(horizon), alphabet_size_(alphabet_size), tokens_(std::move(tokens)) {
  static_cast<void>(Alphabet(alphabet_size));
  if (horizon < 1) throw InvalidParam("horizon must be positive");
  const auto hs = static_cast<std::size_t>(horizon);
  if (tokens_.size() % hs != 0) throw InvalidParam("token count is not a multiple of the horizon");
  const auto d = static_cast<std::size_t>(alphabet_size);
  codes_.resize(tokens_.size());
  counts_.assign(hs * d, 0);
  for (std::size_t i = 0; i < tokens_.size() / hs; ++i) {
    std::uint64_t code = 0;
    for (std::size_t h = 0; h < hs; ++h) {
      const Token t = tokens_[i * hs + h];
      if (t < 0 || t >= alphabet_size) throw InvalidParam("token out of range");
      codes_[i * hs + h] = code;
      ++counts_[h * d + static_cast<std::size_t>(t)];
      code = code * d + static_cast<std::uint64_t>(t);
    }
  }
}

Dataset Dataset::from_trajectories(int horizon, int alphabet_size, std::span<const Trajectory> trajectories) {
  std::vector<Token> flat;
  flat.reserve(trajectories.size() * static_cast<std::size_t>(std::max(horizon, 0)));
  for (const auto& t : trajectories) {
    if (t.size() != horizon) throw InvalidParam("trajectory length differs from the horizon");
    flat.insert(flat.end(), t.tokens.begin(), t.tokens.end());
  }
  return Dataset(horizon, alphabet_size, std::move(flat));
}

Dataset sample_dataset(const SeqPolicy& policy, std::size_t n, Rng& rng) {
  std::vector<Token> flat;
  flat.reserve(n * static_cast<std::size_t>(policy.horizon()));
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = sample_trajectory(policy, rng);
    flat.insert(flat.end(), t.tokens.begin(), t.tokens.end());
  }
  return Dataset(policy.horizon(), policy.alphabet_size(), std::move(flat));
}

double empirical_log_loss(const SeqPolicy& policy, const Dataset& data) {
  if (policy.horizon() != data.horizon() || policy.alphabet_size() != data.alphabet_size()) {
    throw InvalidParam("policy and data disagree on shape");
  }
  if (data.size() == 0) throw InvalidParam("empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += log_joint_prob(policy, data.trajectory(i));
  return -total / static_cast<double>(data.size());
}

std::vector<std::vector<double>> step_loss_table(std::span<const StepPolicy> base, const Dataset& data) {
  require_base(base, data.alphabet_size(), data.horizon());
  const int horizon = data.horizon();
  const auto m = base.size();
  const auto d = static_cast<std::size_t>(data.alphabet_size());
  const auto counts = data.token_counts();
  std::vector<double> flat(static_cast<std::size_t>(horizon) * m, 0.0);

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t cell = 0; cell < static_cast<std::int64_t>(flat.size()); ++cell) {
    const auto c = static_cast<std::size_t>(cell);
    const int h = static_cast<int>(c / m);
    const auto& b = base[c % m];
    double loss = 0.0;
    if (b.is_context_free()) {
      const auto log_row = b.log_row_at(h, 0);
      for (std::size_t x = 0; x < d; ++x) {
        const auto k = counts[static_cast<std::size_t>(h) * d + x];
        if (k == 0) continue;
        loss -= static_cast<double>(k) * log_row[x];
      }
    } else {
      for (std::size_t i = 0; i < data.size(); ++i) {
        loss -= b.log_row_at(h, data.prefix_code_at(i, h))[static_cast<std::size_t>(data.token(i, h))];
      }
    }
    flat[c] = loss;
  }

  std::vector<std::vector<double>> losses(static_cast<std::size_t>(horizon));
  for (std::size_t h = 0; h < losses.size(); ++h) {
    losses[h].assign(flat.begin() + static_cast<std::ptrdiff_t>(h * m),
                     flat.begin() + static_cast<std::ptrdiff_t>((h + 1) * m));
  }
  return losses;
}

Selection erm(const PolicyClass& cls, const Dataset& data) {
  require_data_fits(cls, data);
  return select(cls, step_loss_table(cls.base(), data), {});
}

Selection stepwise_erm(std::span<const StepPolicy> base, const Dataset& data, int horizon) {
  if (horizon != data.horizon()) throw InvalidParam("horizon differs from the data");
  const auto cls = PolicyClass::decomposable(std::vector<StepPolicy>(base.begin(), base.end()), horizon);
  return erm(cls, data);
}

std::string PosteriorWeights::to_csv() const {
  std::string out = "step,member_index,weight\n";
  for (std::size_t h = 0; h < weights.size(); ++h) {
    for (std::size_t j = 0; j < weights[h].size(); ++j) {
      out += std::to_string(h) + "," + std::to_string(j) + "," + format_real(weights[h][j]) + "\n";
    }
  }
  return out;
}

std::vector<double> uniform_prior(std::size_t size) {
  if (size == 0) throw InvalidParam("prior over an empty set");
  return std::vector<double>(size, 1.0 / static_cast<double>(size));
}

PosteriorWeights posterior_weights(std::span<const StepPolicy> base, const Dataset& data, int horizon,
                                   std::span<const double> prior) {
  if (horizon != data.horizon()) throw InvalidParam("horizon differs from the data");
  const auto log_prior = log_prior_or_uniform(prior, base.size());
  const auto losses = step_loss_table(base, data);
  PosteriorWeights out;
  out.weights.resize(static_cast<std::size_t>(horizon));
  std::vector<double> logw(base.size());
  for (std::size_t h = 0; h < out.weights.size(); ++h) {
    for (std::size_t j = 0; j < base.size(); ++j) logw[j] = log_prior[j] - losses[h][j];
    const double z = log_sum_exp(logw);
    if (z == -kInf) throw ZeroProbability("every base policy assigns zero probability to the data");
    auto& w = out.weights[h];
    w.resize(base.size());
    for (std::size_t j = 0; j < base.size(); ++j) w[j] = std::exp(logw[j] - z);
  }
  return out;
}

std::vector<double> mixture_row(std::span<const StepPolicy> base, std::span<const double> weights,
                                std::span<const Token> prefix) {
  if (weights.size() != base.size()) throw InvalidParam("weights and base differ in size");
  std::vector<double> row(static_cast<std::size_t>(base.front().alphabet_size()), 0.0);
  for (std::size_t j = 0; j < base.size(); ++j) {
    if (weights[j] == 0.0) continue;
    const auto r = base[j].row(prefix);
    for (std::size_t x = 0; x < row.size(); ++x) row[x] += weights[j] * r[x];
  }
  return row;
}

BayesPosterior bayes_posterior(std::span<const StepPolicy> base, const Dataset& data, int horizon,
                               std::span<const double> prior, std::uint64_t cap) {
  auto weights = posterior_weights(base, data, horizon, prior);
  const bool all_cf = std::all_of(base.begin(), base.end(), [](const StepPolicy& b) { return b.is_context_free(); });
  const int d = data.alphabet_size();
  std::vector<StepPolicy> steps;
  for (int h = 0; h < horizon; ++h) {
    const auto& w = weights.weights[static_cast<std::size_t>(h)];
    if (all_cf) {
      steps.push_back(StepPolicy::context_free(mixture_row(base, w, {})));
      continue;
    }
    steps.push_back(StepPolicy::tabular(
        d, h, h,
        [&](std::span<const Token> prefix, std::span<double> row) {
          const auto mixed = mixture_row(base, w, prefix);
          std::copy(mixed.begin(), mixed.end(), row.begin());
        },
        cap));
  }
  return {SeqPolicy(std::move(steps)), std::move(weights)};
}

Selection bayes_mode(const PolicyClass& cls, const Dataset& data, std::span<const double> prior) {
  require_data_fits(cls, data);
  const std::size_t units = cls.regime() == Regime::Dependent ? cls.explicit_members().size() : cls.base().size();
  auto penalty = log_prior_or_uniform(prior, units);
  for (auto& p : penalty) p = -p;
  return select(cls, step_loss_table(cls.base(), data), penalty);
}

bool mixability_check(std::span<const StepPolicy> base, const Dataset& data, int horizon,
                      std::span<const double> prior) {
  const auto log_prior = log_prior_or_uniform(prior, base.size());
  const auto losses = step_loss_table(base, data);
  const auto post = posterior_weights(base, data, horizon, prior);
  for (int h = 0; h < horizon; ++h) {
    const auto& w = post.weights[static_cast<std::size_t>(h)];
    double mix_loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto traj = data.trajectory(i);
      const auto tok = static_cast<std::size_t>(traj[static_cast<std::size_t>(h)]);
      double p = 0.0;
      for (std::size_t j = 0; j < base.size(); ++j) {
        p += w[j] * base[j].row(traj.first(static_cast<std::size_t>(h)))[tok];
      }
      mix_loss -= std::log(p);
    }
    for (std::size_t j = 0; j < base.size(); ++j) {
      if (mix_loss > losses[static_cast<std::size_t>(h)][j] - log_prior[j] + 1e-9) return false;
    }
  }
  return true;
}

}  // namespace arkl
