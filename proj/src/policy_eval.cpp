#include "arkl/policy_eval.hpp"

#include <cmath>
#include <sstream>

#include "arkl/divergences.hpp"
#include "arkl/serialize.hpp"

namespace arkl {

namespace {

void require_bounded(double v) {
  if (!(std::abs(v) <= 1.0)) throw InvalidParam("reward values must lie in [-1, 1]");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RewardFn::RewardFn(Kind kind, int horizon, int alphabet_size, std::vector<double> values, double constant)
    : kind_(kind), horizon_(horizon), alphabet_size_(alphabet_size), values_(std::move(values)), constant_(constant) {
  static_cast<void>(Alphabet(alphabet_size));
  if (horizon < 1) throw InvalidParam("horizon must be positive");
  for (double v : values_) require_bounded(v);
  require_bounded(constant_);
}

RewardFn RewardFn::tabular(int horizon, int alphabet_size, std::vector<double> values) {
  const auto count = checked_pow(static_cast<std::uint64_t>(alphabet_size), horizon);
  if (!count || values.size() != *count) throw InvalidParam("reward table must have d^H entries");
  return RewardFn(Kind::Tabular, horizon, alphabet_size, std::move(values), 0.0);
}

RewardFn RewardFn::random(int horizon, int alphabet_size, std::uint64_t seed, double lo, double hi,
                          std::uint64_t cap) {
  if (!(lo <= hi)) throw InvalidParam("reward range is empty");
  const auto count = trajectory_count(alphabet_size, horizon, cap);
  Rng rng(seed);
  std::vector<double> values(count);
  for (auto& v : values) v = lo + (hi - lo) * uniform01(rng);
  return RewardFn(Kind::Random, horizon, alphabet_size, std::move(values), 0.0);
}

RewardFn RewardFn::constant(int horizon, int alphabet_size, double value) {
  return RewardFn(Kind::Constant, horizon, alphabet_size, {}, value);
}

RewardFn RewardFn::from_csv(const std::string& text, int horizon, int alphabet_size, std::uint64_t cap) {
  const auto count = trajectory_count(alphabet_size, horizon, cap);
  std::vector<double> values(count, 0.0);
  std::vector<char> seen(count, 0);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "trajectory,value") {
    throw InvalidParam("reward CSV must start with the header 'trajectory,value'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidParam("reward CSV line " + std::to_string(line_no) + ": missing comma");
    std::istringstream toks(line.substr(0, comma));
    std::vector<Token> traj;
    long long t = 0;
    while (toks >> t) {
      if (t < 0 || t >= alphabet_size) throw InvalidParam("reward CSV line " + std::to_string(line_no) + ": token out of range");
      traj.push_back(static_cast<Token>(t));
    }
    if (!toks.eof() || traj.size() != static_cast<std::size_t>(horizon)) {
      throw InvalidParam("reward CSV line " + std::to_string(line_no) + ": bad trajectory");
    }
    const auto idx = prefix_code(traj, alphabet_size);
    if (seen[idx]) throw InvalidParam("reward CSV line " + std::to_string(line_no) + ": duplicate trajectory");
    seen[idx] = 1;
    values[idx] = parse_real(trim(line.substr(comma + 1)));
  }
  return tabular(horizon, alphabet_size, std::move(values));
}

double RewardFn::at_index(std::uint64_t index) const {
  if (kind_ == Kind::Constant) return constant_;
  return values_[index];
}

double RewardFn::operator()(std::span<const Token> traj) const {
  if (traj.size() != static_cast<std::size_t>(horizon_)) throw InvalidParam("trajectory length differs from the horizon");
  if (kind_ == Kind::Constant) return constant_;
  return values_[prefix_code(traj, alphabet_size_)];
}

RewardFn RewardFn::scaled(double lambda) const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidParam("scale must lie in [0, 1]");
  std::vector<double> values(values_);
  for (auto& v : values) v *= lambda;
  return RewardFn(kind_, horizon_, alphabet_size_, std::move(values), constant_ * lambda);
}

double expected_return(const SeqPolicy& policy, const RewardFn& reward, std::uint64_t cap) {
  if (policy.horizon() != reward.horizon() || policy.alphabet_size() != reward.alphabet_size()) {
    throw InvalidParam("policy and reward disagree on shape");
  }
  const int d = policy.alphabet_size();
  bool unused = false;
  return detail::reduce_joint_laws(
      policy, policy, cap,
      [&](std::span<const Token> tokens, double a, double) {
        return std::exp(a) * reward.at_index(prefix_code(tokens, d));
      },
      unused);
}

ReturnEstimate expected_return_monte_carlo(const SeqPolicy& policy, const RewardFn& reward,
                                           std::uint64_t samples, Rng& rng) {
  if (samples < 2) throw InvalidParam("Monte Carlo needs at least two samples");
  double mean = 0.0;
  double m2 = 0.0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const auto t = sample_trajectory(policy, rng);
    const double x = reward(t.tokens);
    const double delta = x - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (x - mean);
  }
  const double sd = std::sqrt(m2 / static_cast<double>(samples - 1));
  return {mean, samples, sd / std::sqrt(static_cast<double>(samples))};
}

double regret(const SeqPolicy& pi_star, const SeqPolicy& pi_hat, const RewardFn& reward, std::uint64_t cap) {
  return expected_return(pi_star, reward, cap) - expected_return(pi_hat, reward, cap);
}

WorstCaseRegret worst_case_regret(const SeqPolicy& pi_star, const SeqPolicy& pi_hat, std::uint64_t cap) {
  const int d = pi_star.alphabet_size();
  const auto count = trajectory_count(d, pi_star.horizon(), cap);
  std::vector<double> indicator(count, 0.0);
  bool unused = false;
  // Each trajectory index is written by exactly one chunk.
  detail::reduce_joint_laws(
      pi_star, pi_hat, cap,
      [&](std::span<const Token> tokens, double a, double b) {
        indicator[prefix_code(tokens, d)] = a >= b ? 1.0 : 0.0;
        return 0.0;
      },
      unused);
  auto reward = RewardFn::tabular(pi_star.horizon(), d, std::move(indicator));
  const double value = regret(pi_star, pi_hat, reward, cap);
  return {value, std::move(reward)};
}

}  // namespace arkl
