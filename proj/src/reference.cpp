#include "arkl/reference.hpp"

#include <cmath>

#include "arkl/divergences.hpp"
#include "arkl/learners.hpp"

namespace arkl::reference {

double joint_prob(const SeqPolicy& policy, const Trajectory& traj) {
  double p = 1.0;
  std::span<const Token> tokens(traj.tokens);
  for (int h = 0; h < policy.horizon(); ++h) {
    p *= policy.step(h).prob(tokens.first(static_cast<std::size_t>(h)), tokens[static_cast<std::size_t>(h)]);
  }
  return p;
}

double joint_kl(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap) {
  double sum = 0.0;
  for (const auto& t : enumerate_trajectories(p.horizon(), p.alphabet_size(), cap)) {
    const double a = joint_prob(p, t);
    if (a <= 0.0) continue;
    const double b = joint_prob(q, t);
    if (b <= 0.0) throw SupportViolation("reference joint KL: support violation");
    sum += a * std::log(a / b);
  }
  return sum;
}

double squared_hellinger(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap) {
  double sum = 0.0;
  for (const auto& t : enumerate_trajectories(p.horizon(), p.alphabet_size(), cap)) {
    const double diff = std::sqrt(joint_prob(p, t)) - std::sqrt(joint_prob(q, t));
    sum += diff * diff;
  }
  return sum;
}

double total_variation(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap) {
  double sum = 0.0;
  for (const auto& t : enumerate_trajectories(p.horizon(), p.alphabet_size(), cap)) {
    sum += std::abs(joint_prob(p, t) - joint_prob(q, t));
  }
  return 0.5 * sum;
}

std::vector<std::vector<double>> step_loss_table(std::span<const StepPolicy> base, const Dataset& data) {
  const auto horizon = static_cast<std::size_t>(data.horizon());
  std::vector<std::vector<double>> losses(horizon, std::vector<double>(base.size(), 0.0));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto traj = data.trajectory(i);
    for (std::size_t h = 0; h < horizon; ++h) {
      for (std::size_t j = 0; j < base.size(); ++j) {
        losses[h][j] -= std::log(base[j].prob(traj.first(h), traj[h]));
      }
    }
  }
  return losses;
}

}  // namespace arkl::reference
