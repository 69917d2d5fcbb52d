#pragma once

// Serial reference implementations of the parallel kernels. Slow and direct:
// materialize every trajectory, multiply probabilities through the checked
// lookup path. Used by tests and the benchmark.

#include <vector>

#include "arkl/core.hpp"

namespace arkl {
class Dataset;
}

namespace arkl::reference {

/// prod_h pi_h(u_h | u_<h) by direct table lookup (no log domain).
double joint_prob(const SeqPolicy& policy, const Trajectory& traj);

double joint_kl(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap = default_enumeration_cap());
double squared_hellinger(const SeqPolicy& p, const SeqPolicy& q,
                         std::uint64_t cap = default_enumeration_cap());
double total_variation(const SeqPolicy& p, const SeqPolicy& q,
                       std::uint64_t cap = default_enumeration_cap());

/// losses[h][j] = -sum_i log base_j(u_h^i | u_<h^i), one trajectory at a time.
std::vector<std::vector<double>> step_loss_table(std::span<const StepPolicy> base, const Dataset& data);

}  // namespace arkl::reference
