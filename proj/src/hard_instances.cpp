#include "arkl/hard_instances.hpp"

#include <cmath>

#include "arkl/serialize.hpp"

namespace arkl {

namespace {

std::vector<double> bernoulli_row(double p) { return {1.0 - p, p}; }

StepPolicy random_tabular_step(int alphabet_size, int max_len, Rng& rng, std::uint64_t cap) {
  return StepPolicy::tabular(
      alphabet_size, 0, max_len,
      [&](std::span<const Token>, std::span<double> row) {
        double total = 0.0;
        for (auto& x : row) {
          x = 0.1 + 0.9 * uniform01(rng);
          total += x;
        }
        for (auto& x : row) x /= total;
      },
      cap);
}

nlohmann::json base_manifest(const char* construction, std::optional<std::uint64_t> seed) {
  nlohmann::json j;
  j["construction"] = construction;
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

std::vector<std::vector<int>> sylvester_hadamard(int order) {
  if (order < 1 || (order & (order - 1)) != 0) throw InvalidParam("Sylvester order must be a power of two");
  std::vector<std::vector<int>> h{{1}};
  for (int size = 1; size < order; size *= 2) {
    std::vector<std::vector<int>> next(static_cast<std::size_t>(2 * size),
                                       std::vector<int>(static_cast<std::size_t>(2 * size)));
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        const int v = h[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        next[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = v;
        next[static_cast<std::size_t>(r)][static_cast<std::size_t>(c + size)] = v;
        next[static_cast<std::size_t>(r + size)][static_cast<std::size_t>(c)] = v;
        next[static_cast<std::size_t>(r + size)][static_cast<std::size_t>(c + size)] = -v;
      }
    }
    h = std::move(next);
  }
  return h;
}

double HadamardFamily::pairwise_kl() const { return eps * std::tanh(eps); }

double HadamardFamily::kl_to_mixture() const { return eps * std::tanh(eps) - std::log(std::cosh(eps)); }

StepPolicy HadamardFamily::uniform() const {
  return StepPolicy::context_free(std::vector<double>(static_cast<std::size_t>(d), 1.0 / d));
}

HadamardFamily make_hadamard_family(int m, double eps) {
  if (m < 2) throw InvalidParam("Hadamard family needs m >= 2");
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidParam("eps must lie in [0, 1]");
  int order = 2;
  while (order < m) order *= 2;
  if (order - 1 < m) order *= 2;
  const auto h = sylvester_hadamard(order);

  HadamardFamily fam;
  fam.m = m;
  fam.d = order;
  fam.eps = eps;
  const double norm = static_cast<double>(order) * std::cosh(eps);
  for (int c = 1; c <= m; ++c) {
    std::vector<int> col(static_cast<std::size_t>(order));
    std::vector<double> row(static_cast<std::size_t>(order));
    for (int s = 0; s < order; ++s) {
      col[static_cast<std::size_t>(s)] = h[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)];
      row[static_cast<std::size_t>(s)] = std::exp(eps * col[static_cast<std::size_t>(s)]) / norm;
    }
    fam.columns.push_back(std::move(col));
    fam.members.push_back(StepPolicy::context_free(std::move(row)));
  }
  return fam;
}

double fano_eps(double G, int m, std::uint64_t n) {
  if (!(G > 0.0) || m < 2 || n == 0) throw InvalidParam("eps rule needs G > 0, m >= 2, n >= 1");
  const double raw = (G / 4.0) * std::sqrt(std::log(static_cast<double>(m)) / static_cast<double>(n));
  return std::min({raw, G / 2.0, 1.0});
}

std::size_t hamming_distance(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw InvalidParam("index vectors differ in length");
  std::size_t k = 0;
  for (std::size_t i = 0; i < a.size(); ++i) k += a[i] != b[i] ? 1 : 0;
  return k;
}

double FanoProductInstance::kl_to(std::span<const std::size_t> other) const {
  return family.pairwise_kl() * static_cast<double>(hamming_distance(theta, other));
}

FanoProductInstance make_fano_instance(int horizon, int m, double eps, std::vector<std::size_t> theta) {
  if (horizon < 1) throw InvalidParam("horizon must be positive");
  if (theta.size() != static_cast<std::size_t>(horizon)) throw InvalidParam("truth index has the wrong length");
  for (auto t : theta) {
    if (t >= static_cast<std::size_t>(m)) throw InvalidParam("truth index out of range");
  }
  auto family = make_hadamard_family(m, eps);
  auto cls = PolicyClass::decomposable(family.members, horizon);
  auto truth = cls.member(theta);
  return {std::move(family), horizon, std::move(cls), std::move(theta), std::move(truth)};
}

FanoProductInstance make_fano_instance(int horizon, int m, double eps, Rng& rng) {
  if (horizon < 1 || m < 2) throw InvalidParam("Fano instance needs H >= 1 and m >= 2");
  std::vector<std::size_t> theta(static_cast<std::size_t>(horizon));
  std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(m) - 1);
  for (auto& t : theta) t = pick(rng);
  return make_fano_instance(horizon, m, eps, std::move(theta));
}

double BernoulliMisspecInstance::per_step_gap() const { return 2.0 * b * std::log(3.0); }

double BernoulliMisspecInstance::per_step_min_kl() const {
  return kl(truth.step(0).table(), base[optimal_index()].table());
}

BernoulliMisspecInstance make_bernoulli_instance(std::uint64_t n, int horizon, int sign) {
  if (n == 0) throw InvalidParam("n must be positive");
  if (horizon < 1) throw InvalidParam("horizon must be positive");
  if (sign != 1 && sign != -1) throw InvalidParam("sign must be +1 or -1");
  const double a = 0.25;
  const double b = 1.0 / (10.0 * std::sqrt(static_cast<double>(n)));
  std::vector<StepPolicy> base{StepPolicy::context_free(bernoulli_row(0.5 + a)),
                               StepPolicy::context_free(bernoulli_row(0.5 - a))};
  auto cls = PolicyClass::decomposable(base, horizon);
  auto truth = SeqPolicy::shared(StepPolicy::context_free(bernoulli_row(0.5 + sign * b)), horizon);
  return {n, horizon, sign, a, b, std::move(base), std::move(cls), std::move(truth)};
}

double bernoulli_nfold_tv(double b, std::uint64_t n) {
  if (!(b >= 0.0 && b < 0.5)) throw InvalidParam("b must lie in [0, 1/2)");
  const double lp = std::log(0.5 + b);
  const double lq = std::log(0.5 - b);
  const double nn = static_cast<double>(n);
  double total = 0.0;
  for (std::uint64_t k = 0; k <= n; ++k) {
    const double kk = static_cast<double>(k);
    const double log_choose = std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0);
    total += std::abs(std::exp(log_choose + kk * lp + (nn - kk) * lq) -
                      std::exp(log_choose + kk * lq + (nn - kk) * lp));
  }
  return 0.5 * total;
}

DependentHardInstance make_dependent_instance(int horizon, int members, double G, std::uint64_t n) {
  if (horizon < 1 || members < 4 || !(G > 0.0) || n == 0) {
    throw InvalidParam("dependent instance needs H >= 1, M >= 4, G > 0, n >= 1");
  }
  const double hg = horizon * G;
  const double raw = (hg / 4.0) * std::sqrt(std::log(static_cast<double>(members)) / static_cast<double>(n));
  const double eps = std::min({raw, hg / 2.0, 1.0});
  auto family = make_hadamard_family(members, eps);
  std::vector<SeqPolicy> seqs;
  for (const auto& m : family.members) seqs.emplace_back(std::vector<StepPolicy>{m});
  auto cls = PolicyClass::dependent(std::move(seqs));
  return {members, horizon, G, n, eps, std::move(family), std::move(cls)};
}

MisspecifiedInstance make_misspecified_instance(int horizon, int alphabet_size, int class_size,
                                                double perturbation, Rng& rng, std::uint64_t cap) {
  if (horizon < 1 || class_size < 2) throw InvalidParam("misspecified instance needs H >= 1, class size >= 2");
  if (!(perturbation >= 0.0 && perturbation <= 1.0)) throw InvalidParam("perturbation must lie in [0, 1]");
  static_cast<void>(Alphabet(alphabet_size));

  std::vector<StepPolicy> base;
  for (int j = 0; j < class_size; ++j) base.push_back(random_tabular_step(alphabet_size, horizon - 1, rng, cap));

  std::uniform_int_distribution<int> pick(0, class_size - 1);
  std::vector<StepPolicy> steps;
  for (int h = 0; h < horizon; ++h) {
    const int a = pick(rng);
    int b = pick(rng);
    while (b == a) b = pick(rng);
    const auto& pa = base[static_cast<std::size_t>(a)];
    const auto& pb = base[static_cast<std::size_t>(b)];
    steps.push_back(StepPolicy::tabular(
        alphabet_size, h, h,
        [&](std::span<const Token> prefix, std::span<double> row) {
          const auto ra = pa.row(prefix);
          const auto rb = pb.row(prefix);
          for (std::size_t x = 0; x < row.size(); ++x) row[x] = (1.0 - perturbation) * ra[x] + perturbation * rb[x];
        },
        cap));
  }
  SeqPolicy truth(std::move(steps));
  auto cls = PolicyClass::decomposable(std::move(base), horizon);
  auto optimum = min_class_kl(truth, cls, cap);
  return {std::move(truth), std::move(cls), std::move(optimum), perturbation};
}

nlohmann::json manifest(const HadamardFamily& family, std::optional<std::uint64_t> seed) {
  auto j = base_manifest("hadamard_family", seed);
  j["params"] = {{"m", family.m}, {"d", family.d}, {"eps", format_real(family.eps)}};
  j["oracle"] = {{"pairwise_kl", format_real(family.pairwise_kl())},
                 {"kl_to_mixture", format_real(family.kl_to_mixture())},
                 {"max_log_ratio", format_real(2.0 * family.eps)}};
  j["columns"] = family.columns;
  j["class"] = to_json(PolicyClass::fully_shared(family.members, 1));
  return j;
}

nlohmann::json manifest(const FanoProductInstance& inst, std::optional<std::uint64_t> seed) {
  auto j = base_manifest("fano_product", seed);
  j["params"] = {{"horizon", inst.horizon},
                 {"m", inst.family.m},
                 {"d", inst.family.d},
                 {"eps", format_real(inst.family.eps)},
                 {"theta", inst.theta}};
  j["oracle"] = {{"per_step_pairwise_kl", format_real(inst.family.pairwise_kl())},
                 {"per_step_kl_to_mixture", format_real(inst.family.kl_to_mixture())}};
  j["class"] = to_json(inst.cls);
  j["truth"] = to_json(inst.truth);
  return j;
}

nlohmann::json manifest(const BernoulliMisspecInstance& inst, std::optional<std::uint64_t> seed) {
  auto j = base_manifest("bernoulli_misspecified", seed);
  j["params"] = {{"n", inst.n},
                 {"horizon", inst.horizon},
                 {"sign", inst.sign},
                 {"a", format_real(inst.a)},
                 {"b", format_real(inst.b)}};
  j["oracle"] = {{"per_step_gap", format_real(inst.per_step_gap())},
                 {"total_gap", format_real(inst.horizon * inst.per_step_gap())},
                 {"per_step_min_kl", format_real(inst.per_step_min_kl())},
                 {"optimal_index", inst.optimal_index()}};
  j["class"] = to_json(inst.cls);
  j["truth"] = to_json(inst.truth);
  return j;
}

nlohmann::json manifest(const DependentHardInstance& inst, std::optional<std::uint64_t> seed) {
  auto j = base_manifest("dependent_hadamard", seed);
  j["params"] = {{"members", inst.members},
                 {"horizon", inst.horizon},
                 {"G", format_real(inst.G)},
                 {"n", inst.n},
                 {"eps", format_real(inst.eps)},
                 {"super_alphabet_size", inst.family.d}};
  j["oracle"] = {{"pairwise_kl", format_real(inst.family.pairwise_kl())},
                 {"kl_to_mixture", format_real(inst.family.kl_to_mixture())},
                 {"max_log_ratio", format_real(2.0 * inst.eps)}};
  j["class"] = to_json(inst.cls);
  return j;
}

nlohmann::json manifest(const MisspecifiedInstance& inst, std::optional<std::uint64_t> seed) {
  auto j = base_manifest("random_misspecified", seed);
  j["params"] = {{"horizon", inst.truth.horizon()},
                 {"alphabet_size", inst.truth.alphabet_size()},
                 {"class_size", inst.cls.base().size()},
                 {"perturbation", format_real(inst.perturbation)}};
  j["oracle"] = {{"min_class_kl", format_real(inst.optimum.value)},
                 {"optimal_step_choice", inst.optimum.step_choice}};
  j["class"] = to_json(inst.cls);
  j["truth"] = to_json(inst.truth);
  return j;
}

}  // namespace arkl
