#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <omp.h>

namespace arkl::detail {

inline constexpr std::uint64_t kJointLawChunk = 4096;

template <class Term>
double reduce_joint_laws(const SeqPolicy& p, const SeqPolicy& q, std::uint64_t cap, Term term,
                         bool& violation) {
  if (p.horizon() != q.horizon() || p.alphabet_size() != q.alphabet_size()) {
    throw InvalidParam("policies disagree on horizon or alphabet size");
  }
  const int horizon = p.horizon();
  const int d = p.alphabet_size();
  const auto du = static_cast<std::uint64_t>(d);
  const std::uint64_t total = trajectory_count(d, horizon, cap);
  const std::uint64_t chunks = (total + kJointLawChunk - 1) / kJointLawChunk;

  std::vector<double> partial(chunks, 0.0);
  std::vector<char> bad(chunks, 0);

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(chunks); ++c) {
    const auto hsz = static_cast<std::size_t>(horizon);
    std::vector<Token> tokens(hsz);
    // lp[k], lq[k]: log-probability of the first k tokens; code[k]: prefix code of length k.
    std::vector<double> lp(hsz + 1, 0.0), lq(hsz + 1, 0.0);
    std::vector<std::uint64_t> code(hsz + 1, 0);

    const std::uint64_t begin = static_cast<std::uint64_t>(c) * kJointLawChunk;
    const std::uint64_t end = std::min(total, begin + kJointLawChunk);
    decode_trajectory(begin, d, tokens);

    auto refresh_from = [&](std::size_t j) {
      for (std::size_t k = j; k < hsz; ++k) {
        const auto t = static_cast<std::size_t>(tokens[k]);
        const int len = static_cast<int>(k);
        lp[k + 1] = lp[k] + p.step(len).log_row_at(len, code[k])[t];
        lq[k + 1] = lq[k] + q.step(len).log_row_at(len, code[k])[t];
        code[k + 1] = code[k] * du + t;
      }
    };
    refresh_from(0);

    double sum = 0.0;
    char flagged = 0;
    for (std::uint64_t idx = begin; idx < end; ++idx) {
      const double a = lp[hsz];
      const double b = lq[hsz];
      if (a > -std::numeric_limits<double>::infinity() && b == -std::numeric_limits<double>::infinity()) {
        flagged = 1;
      }
      sum += term(std::span<const Token>(tokens), a, b);
      if (idx + 1 == end) break;
      std::size_t j = hsz - 1;
      while (tokens[j] == d - 1) {
        tokens[j] = 0;
        --j;
      }
      ++tokens[j];
      refresh_from(j);
    }
    partial[static_cast<std::size_t>(c)] = sum;
    bad[static_cast<std::size_t>(c)] = flagged;
  }

  double total_sum = 0.0;
  violation = false;
  for (std::uint64_t c = 0; c < chunks; ++c) {
    total_sum += partial[c];
    violation = violation || bad[c] != 0;
  }
  return total_sum;
}

}  // namespace arkl::detail
