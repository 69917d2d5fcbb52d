#include "arkl/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace arkl {

std::uint64_t default_enumeration_cap() {
  if (const char* env = std::getenv("ARKL_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return kDefaultEnumerationCap;
}

std::optional<std::uint64_t> checked_pow(std::uint64_t base, int exp) {
  std::uint64_t result = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && result > std::numeric_limits<std::uint64_t>::max() / base) return std::nullopt;
    result *= base;
  }
  return result;
}

std::uint64_t trajectory_count(int alphabet_size, int horizon, std::uint64_t cap) {
  const auto count = checked_pow(static_cast<std::uint64_t>(alphabet_size), horizon);
  if (!count || *count > cap) {
    throw CapExceeded("d^H = " + std::to_string(alphabet_size) + "^" + std::to_string(horizon) +
                      " exceeds enumeration cap " + std::to_string(cap));
  }
  return *count;
}

Alphabet::Alphabet(int size) : size_(size) {
  if (size < 2) throw InvalidParam("alphabet size must be at least 2");
}

std::uint64_t prefix_code(std::span<const Token> prefix, int alphabet_size) {
  std::uint64_t code = 0;
  for (Token t : prefix) code = code * static_cast<std::uint64_t>(alphabet_size) + static_cast<std::uint64_t>(t);
  return code;
}

void for_each_prefix(int alphabet_size, int len,
                     const std::function<void(std::span<const Token>, std::uint64_t)>& fn) {
  std::vector<Token> prefix(static_cast<std::size_t>(len), 0);
  std::uint64_t code = 0;
  while (true) {
    fn(prefix, code);
    int j = len - 1;
    while (j >= 0 && prefix[static_cast<std::size_t>(j)] == alphabet_size - 1) {
      prefix[static_cast<std::size_t>(j)] = 0;
      --j;
    }
    if (j < 0) return;
    ++prefix[static_cast<std::size_t>(j)];
    ++code;
  }
}

// ---------------------------------------------------------------------------
// StepPolicy

namespace {

void validate_row(std::span<const double> row) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidParam("probability entries must be finite and nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowSumTolerance) {
    throw InvalidParam("probability row sums to " + std::to_string(sum) + ", not 1");
  }
}

}  // namespace

std::shared_ptr<const StepPolicy::Data> StepPolicy::finish(Data data) {
  const auto d = static_cast<std::size_t>(data.alphabet_size);
  for (std::size_t r = 0; r < data.rows.size(); r += d) {
    validate_row(std::span<const double>(data.rows).subspan(r, d));
  }
  data.log_rows.resize(data.rows.size());
  std::transform(data.rows.begin(), data.rows.end(), data.log_rows.begin(),
                 [](double p) { return std::log(p); });
  return std::make_shared<const Data>(std::move(data));
}

StepPolicy StepPolicy::context_free(std::vector<double> row) {
  if (row.size() < 2) throw InvalidParam("alphabet size must be at least 2");
  Data data{Kind::ContextFree, static_cast<int>(row.size()), 0, std::numeric_limits<int>::max(),
            {0}, std::move(row), {}};
  return StepPolicy(finish(std::move(data)));
}

namespace {

std::vector<std::uint64_t> tabular_offsets(int d, int lo, int hi, std::uint64_t cap) {
  if (d < 2) throw InvalidParam("alphabet size must be at least 2");
  if (lo < 0 || hi < lo) throw InvalidParam("invalid prefix length range");
  std::vector<std::uint64_t> offsets;
  std::uint64_t total = 0;
  for (int k = lo; k <= hi; ++k) {
    offsets.push_back(total);
    const auto n = checked_pow(static_cast<std::uint64_t>(d), k);
    if (!n || *n > cap || total + *n > cap) {
      throw CapExceeded("tabular policy needs more than " + std::to_string(cap) + " rows");
    }
    total += *n;
  }
  offsets.push_back(total);
  return offsets;
}

}  // namespace

StepPolicy StepPolicy::tabular(int alphabet_size, int min_prefix_length, int max_prefix_length,
                               std::vector<double> rows) {
  auto offsets = tabular_offsets(alphabet_size, min_prefix_length, max_prefix_length,
                                 std::numeric_limits<std::uint64_t>::max());
  if (rows.size() != offsets.back() * static_cast<std::uint64_t>(alphabet_size)) {
    throw InvalidParam("tabular policy row storage has the wrong size");
  }
  offsets.pop_back();
  Data data{Kind::Tabular, alphabet_size, min_prefix_length, max_prefix_length,
            std::move(offsets), std::move(rows), {}};
  return StepPolicy(finish(std::move(data)));
}

StepPolicy StepPolicy::tabular(int alphabet_size, int min_prefix_length, int max_prefix_length,
                               const RowFn& fill, std::uint64_t cap) {
  auto offsets = tabular_offsets(alphabet_size, min_prefix_length, max_prefix_length, cap);
  const auto d = static_cast<std::size_t>(alphabet_size);
  std::vector<double> rows(offsets.back() * d);
  std::size_t r = 0;
  for (int k = min_prefix_length; k <= max_prefix_length; ++k) {
    for_each_prefix(alphabet_size, k, [&](std::span<const Token> prefix, std::uint64_t) {
      fill(prefix, std::span<double>(rows).subspan(r * d, d));
      ++r;
    });
  }
  offsets.pop_back();
  Data data{Kind::Tabular, alphabet_size, min_prefix_length, max_prefix_length,
            std::move(offsets), std::move(rows), {}};
  return StepPolicy(finish(std::move(data)));
}

std::span<const double> StepPolicy::row(std::span<const Token> prefix) const {
  const int len = static_cast<int>(prefix.size());
  if (!covers(len)) throw InvalidParam("prefix length " + std::to_string(len) + " not covered by step policy");
  for (Token t : prefix) {
    if (t < 0 || t >= alphabet_size()) throw InvalidParam("token out of range");
  }
  return row_at(len, is_context_free() ? 0 : prefix_code(prefix, alphabet_size()));
}

std::span<const double> StepPolicy::log_row(std::span<const Token> prefix) const {
  const auto r = row(prefix);
  const auto offset = static_cast<std::size_t>(r.data() - data_->rows.data());
  return {data_->log_rows.data() + offset, r.size()};
}

double StepPolicy::prob(std::span<const Token> prefix, Token token) const {
  if (token < 0 || token >= alphabet_size()) throw InvalidParam("token out of range");
  return row(prefix)[static_cast<std::size_t>(token)];
}

bool StepPolicy::has_full_support() const {
  return std::all_of(data_->rows.begin(), data_->rows.end(), [](double p) { return p > 0.0; });
}

bool operator==(const StepPolicy& a, const StepPolicy& b) {
  if (a.same_as(b)) return true;
  return a.kind() == b.kind() && a.alphabet_size() == b.alphabet_size() &&
         a.min_prefix_length() == b.min_prefix_length() &&
         a.max_prefix_length() == b.max_prefix_length() &&
         std::equal(a.table().begin(), a.table().end(), b.table().begin(), b.table().end());
}

// ---------------------------------------------------------------------------
// SeqPolicy

SeqPolicy::SeqPolicy(std::vector<StepPolicy> steps) : steps_(std::move(steps)) {
  if (steps_.empty()) throw InvalidParam("a sequence policy needs at least one step");
  const int d = steps_.front().alphabet_size();
  for (std::size_t h = 0; h < steps_.size(); ++h) {
    if (steps_[h].alphabet_size() != d) throw InvalidParam("steps disagree on alphabet size");
    if (!steps_[h].covers(static_cast<int>(h))) {
      throw InvalidParam("step " + std::to_string(h) + " does not cover prefixes of length " +
                         std::to_string(h));
    }
  }
}

SeqPolicy SeqPolicy::shared(const StepPolicy& step, int horizon) {
  if (horizon < 1) throw InvalidParam("horizon must be positive");
  return SeqPolicy(std::vector<StepPolicy>(static_cast<std::size_t>(horizon), step));
}

bool SeqPolicy::is_fully_shared() const {
  return std::all_of(steps_.begin(), steps_.end(),
                     [&](const StepPolicy& s) { return s.same_as(steps_.front()); });
}

bool SeqPolicy::is_product() const {
  return std::all_of(steps_.begin(), steps_.end(),
                     [](const StepPolicy& s) { return s.is_context_free(); });
}

// ---------------------------------------------------------------------------
// PolicyClass

const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::Decomposable: return "decomposable";
    case Regime::FullyShared: return "fully_shared";
    case Regime::Dependent: return "dependent";
  }
  return "?";
}

namespace {

void validate_base(const std::vector<StepPolicy>& base, int horizon) {
  if (base.empty()) throw InvalidParam("base class must be nonempty");
  if (horizon < 1) throw InvalidParam("horizon must be positive");
  const int d = base.front().alphabet_size();
  for (const auto& s : base) {
    if (s.alphabet_size() != d) throw InvalidParam("base policies disagree on alphabet size");
    for (int h = 0; h < horizon; ++h) {
      if (!s.covers(h)) throw InvalidParam("base policy must cover every prefix length below H");
    }
  }
}

}  // namespace

PolicyClass PolicyClass::decomposable(std::vector<StepPolicy> base, int horizon) {
  validate_base(base, horizon);
  PolicyClass cls;
  cls.regime_ = Regime::Decomposable;
  cls.horizon_ = horizon;
  cls.base_ = std::move(base);
  return cls;
}

PolicyClass PolicyClass::fully_shared(std::vector<StepPolicy> base, int horizon) {
  validate_base(base, horizon);
  PolicyClass cls;
  cls.regime_ = Regime::FullyShared;
  cls.horizon_ = horizon;
  cls.base_ = std::move(base);
  return cls;
}

PolicyClass PolicyClass::dependent(std::vector<SeqPolicy> members) {
  if (members.empty()) throw InvalidParam("dependent class must be nonempty");
  PolicyClass cls;
  cls.regime_ = Regime::Dependent;
  cls.horizon_ = members.front().horizon();
  const int d = members.front().alphabet_size();
  for (const auto& m : members) {
    if (m.horizon() != cls.horizon_ || m.alphabet_size() != d) {
      throw InvalidParam("dependent class members disagree on shape");
    }
    std::vector<std::size_t> idx;
    for (const auto& s : m.steps()) {
      auto it = std::find(cls.base_.begin(), cls.base_.end(), s);
      if (it == cls.base_.end()) {
        cls.base_.push_back(s);
        idx.push_back(cls.base_.size() - 1);
      } else {
        idx.push_back(static_cast<std::size_t>(it - cls.base_.begin()));
      }
    }
    cls.member_steps_.push_back(std::move(idx));
  }
  cls.members_ = std::move(members);
  return cls;
}

std::optional<std::uint64_t> PolicyClass::member_count() const {
  switch (regime_) {
    case Regime::Decomposable: return checked_pow(base_.size(), horizon_);
    case Regime::FullyShared: return base_.size();
    case Regime::Dependent: return members_.size();
  }
  return std::nullopt;
}

double PolicyClass::log_member_count() const {
  if (regime_ == Regime::Decomposable) return horizon_ * std::log(static_cast<double>(base_.size()));
  return std::log(static_cast<double>(*member_count()));
}

std::vector<std::vector<std::size_t>> PolicyClass::marginal_sets() const {
  std::vector<std::vector<std::size_t>> sets(static_cast<std::size_t>(horizon_));
  if (regime_ != Regime::Dependent) {
    for (auto& s : sets) {
      for (std::size_t j = 0; j < base_.size(); ++j) s.push_back(j);
    }
    return sets;
  }
  for (const auto& steps : member_steps_) {
    for (std::size_t h = 0; h < steps.size(); ++h) {
      auto& s = sets[h];
      if (std::find(s.begin(), s.end(), steps[h]) == s.end()) s.push_back(steps[h]);
    }
  }
  for (auto& s : sets) std::sort(s.begin(), s.end());
  return sets;
}

SeqPolicy PolicyClass::member(std::span<const std::size_t> choice) const {
  if (regime_ == Regime::Dependent) throw InvalidParam("dependent members are addressed by index");
  if (choice.empty()) throw InvalidParam("empty member choice");
  if (regime_ == Regime::FullyShared) {
    if (choice[0] >= base_.size()) throw InvalidParam("base index out of range");
    return SeqPolicy::shared(base_[choice[0]], horizon_);
  }
  if (choice.size() != static_cast<std::size_t>(horizon_)) throw InvalidParam("choice length must equal H");
  std::vector<StepPolicy> steps;
  steps.reserve(choice.size());
  for (auto j : choice) {
    if (j >= base_.size()) throw InvalidParam("base index out of range");
    steps.push_back(base_[j]);
  }
  return SeqPolicy(std::move(steps));
}

bool satisfies_lifting_sandwich(const PolicyClass& cls) {
  const auto members = cls.member_count();
  const auto base = static_cast<std::uint64_t>(cls.base().size());
  const auto h = static_cast<std::uint64_t>(cls.horizon());
  if (!members) return true;  // only Decomposable overflows, where |Pi| = |Pi_0|^H
  // |Pi_0| <= H |Pi|
  if (*members > std::numeric_limits<std::uint64_t>::max() / h) return false;
  if (base > h * *members) return false;
  // |Pi| <= |Pi_0|^H
  const auto bound = checked_pow(base, cls.horizon());
  return !bound || *members <= *bound;
}

void for_each_member(const PolicyClass& cls, const std::function<void(const SeqPolicy&)>& fn,
                     std::uint64_t cap) {
  switch (cls.regime()) {
    case Regime::Dependent:
      for (const auto& m : cls.explicit_members()) fn(m);
      return;
    case Regime::FullyShared:
      for (std::size_t j = 0; j < cls.base().size(); ++j) {
        const std::size_t choice[1] = {j};
        fn(cls.member(choice));
      }
      return;
    case Regime::Decomposable: {
      const auto count = checked_pow(cls.base().size(), cls.horizon());
      if (!count || *count > cap) throw CapExceeded("decomposable class has more members than the cap");
      std::vector<std::size_t> choice(static_cast<std::size_t>(cls.horizon()), 0);
      for (std::uint64_t k = 0; k < *count; ++k) {
        fn(cls.member(choice));
        for (int j = cls.horizon() - 1; j >= 0; --j) {
          auto& c = choice[static_cast<std::size_t>(j)];
          if (++c < cls.base().size()) break;
          c = 0;
        }
      }
      return;
    }
  }
}

std::vector<SeqPolicy> class_members(const PolicyClass& cls, std::uint64_t cap) {
  std::vector<SeqPolicy> out;
  for_each_member(cls, [&](const SeqPolicy& m) { out.push_back(m); }, cap);
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories

Trajectory sample_trajectory(const SeqPolicy& policy, Rng& rng) {
  const int d = policy.alphabet_size();
  Trajectory traj;
  traj.tokens.resize(static_cast<std::size_t>(policy.horizon()));
  std::uint64_t code = 0;
  for (int h = 0; h < policy.horizon(); ++h) {
    const Token t = sample_index(policy.step(h).row_at(h, code), rng);
    traj.tokens[static_cast<std::size_t>(h)] = t;
    code = code * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(t);
  }
  return traj;
}

double log_joint_prob(const SeqPolicy& policy, std::span<const Token> tokens) {
  if (static_cast<int>(tokens.size()) != policy.horizon()) {
    throw InvalidParam("trajectory length must equal the policy horizon");
  }
  double total = 0.0;
  for (int h = 0; h < policy.horizon(); ++h) {
    const double p = policy.step(h).prob(tokens.first(static_cast<std::size_t>(h)),
                                         tokens[static_cast<std::size_t>(h)]);
    if (p <= 0.0) {
      throw ZeroProbability("zero conditional probability at step " + std::to_string(h));
    }
    total += std::log(p);
  }
  return total;
}

std::vector<Trajectory> enumerate_trajectories(int horizon, int alphabet_size, std::uint64_t cap) {
  if (horizon < 1) throw InvalidParam("horizon must be positive");
  static_cast<void>(Alphabet(alphabet_size));
  const auto count = trajectory_count(alphabet_size, horizon, cap);
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(count));
  for_each_prefix(alphabet_size, horizon, [&](std::span<const Token> t, std::uint64_t) {
    out.push_back(Trajectory{{t.begin(), t.end()}});
  });
  return out;
}

void decode_trajectory(std::uint64_t index, int alphabet_size, std::span<Token> out) {
  const auto d = static_cast<std::uint64_t>(alphabet_size);
  for (std::size_t k = out.size(); k-- > 0;) {
    out[k] = static_cast<Token>(index % d);
    index /= d;
  }
}

// ---------------------------------------------------------------------------
// Log-ratio bounds

namespace {

// Step policies a class may place at step h.
std::vector<std::vector<StepPolicy>> step_candidates(const PolicyClass& cls) {
  std::vector<std::vector<StepPolicy>> out;
  for (const auto& set : cls.marginal_sets()) {
    auto& c = out.emplace_back();
    for (auto j : set) c.push_back(cls.base()[j]);
  }
  return out;
}

// Visits the prefixes of length h that can distinguish the given policies.
void for_each_relevant_prefix(int d, int h, bool all_context_free, std::uint64_t cap,
                              const std::function<void(std::uint64_t)>& fn) {
  if (all_context_free) {
    fn(0);
    return;
  }
  const auto count = checked_pow(static_cast<std::uint64_t>(d), h);
  if (!count || *count > cap) throw CapExceeded("prefix enumeration exceeds the cap");
  for (std::uint64_t code = 0; code < *count; ++code) fn(code);
}

double log_ratio(double num, double den) {
  if (num <= 0.0) return -std::numeric_limits<double>::infinity();
  if (den <= 0.0) throw Unbounded("log-density ratio is unbounded (zero denominator)");
  return std::log(num) - std::log(den);
}

}  // namespace

double log_ratio_bound(const SeqPolicy& pi_star, const PolicyClass& cls, std::uint64_t cap) {
  if (pi_star.horizon() != cls.horizon() || pi_star.alphabet_size() != cls.alphabet_size()) {
    throw InvalidParam("pi* and class disagree on shape");
  }
  const int d = cls.alphabet_size();
  const auto candidates = step_candidates(cls);
  double g = -std::numeric_limits<double>::infinity();
  for (int h = 0; h < cls.horizon(); ++h) {
    const auto& star = pi_star.step(h);
    const auto& cands = candidates[static_cast<std::size_t>(h)];
    const bool cf = star.is_context_free() &&
                    std::all_of(cands.begin(), cands.end(), [](const auto& s) { return s.is_context_free(); });
    for_each_relevant_prefix(d, h, cf, cap, [&](std::uint64_t code) {
      const auto ps = star.row_at(h, code);
      for (const auto& c : cands) {
        const auto pc = c.row_at(h, code);
        for (std::size_t x = 0; x < ps.size(); ++x) g = std::max(g, log_ratio(ps[x], pc[x]));
      }
    });
  }
  return g;
}

double member_log_ratio_bound(const PolicyClass& cls, std::uint64_t cap) {
  const int d = cls.alphabet_size();
  const auto candidates = step_candidates(cls);
  double g = 0.0;
  for (int h = 0; h < cls.horizon(); ++h) {
    const auto& cands = candidates[static_cast<std::size_t>(h)];
    const bool cf = std::all_of(cands.begin(), cands.end(), [](const auto& s) { return s.is_context_free(); });
    for_each_relevant_prefix(d, h, cf, cap, [&](std::uint64_t code) {
      for (const auto& a : cands) {
        const auto pa = a.row_at(h, code);
        for (const auto& b : cands) {
          const auto pb = b.row_at(h, code);
          for (std::size_t x = 0; x < pa.size(); ++x) g = std::max(g, log_ratio(pa[x], pb[x]));
        }
      }
    });
  }
  return g;
}

}  // namespace arkl
