#include "arkl/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <set>

#include "arkl/divergences.hpp"
#include "arkl/hard_instances.hpp"
#include "arkl/serialize.hpp"

namespace arkl {

namespace {

using nlohmann::json;

constexpr double kRealizableTolerance = 1e-12;
constexpr double kGapSlack = 1e-12;

// Runs fn(i) for i in [0, count) in parallel; rethrows the first failure by index.
template <class Fn>
void parallel_cells(std::size_t count, Fn fn) {
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Cell {
  int H;
  std::uint64_t n;
  int trial;
  std::uint64_t seed;
};

std::vector<Cell> make_cells(const SweepConfig& config) {
  std::vector<Cell> cells;
  for (int H : config.horizons) {
    for (auto n : config.sample_sizes) {
      for (int t = 0; t < config.trials; ++t) {
        cells.push_back({H, n, t,
                         derive_seed({config.seed, static_cast<std::uint64_t>(H), n, static_cast<std::uint64_t>(t)})});
      }
    }
  }
  return cells;
}

double eps_for(const InstanceSpec& spec, std::uint64_t n) {
  return spec.eps ? *spec.eps : fano_eps(spec.G, spec.m, n);
}

double joint_kl_value(const SeqPolicy& p, const SeqPolicy& q, const SweepConfig& config, Rng& rng) {
  try {
    return joint_kl(p, q, config.cap).value;
  } catch (const CapExceeded&) {
    if (config.mc_samples == 0) throw;
    return joint_kl_monte_carlo(p, q, config.mc_samples, rng).value;
  }
}

// ---------------------------------------------------------------------------
// Config parsing

const std::set<std::string> kSweepKeys{"instance", "H",          "n",           "trials", "learner", "regime", "metric",
                                       "seed",     "mc_samples", "out",         "fixed_truth", "delta", "cap"};

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

Learner parse_learner(const std::string& s) {
  if (s == "erm") return Learner::Erm;
  if (s == "stepwise_erm") return Learner::StepwiseErm;
  if (s == "bayes_posterior") return Learner::BayesPosterior;
  if (s == "bayes_mode") return Learner::BayesMode;
  if (s == "oracle") return Learner::Oracle;
  throw ConfigError("unknown learner '" + s + "'");
}

Metric parse_metric(const std::string& s) {
  if (s == "joint_kl") return Metric::JointKl;
  if (s == "squared_hellinger") return Metric::SquaredHellinger;
  if (s == "tv") return Metric::Tv;
  if (s == "excess_kl") return Metric::ExcessKl;
  if (s == "approx_ratio") return Metric::ApproxRatio;
  throw ConfigError("unknown metric '" + s + "'");
}

Regime parse_regime(const std::string& s) {
  if (s == "decomposable") return Regime::Decomposable;
  if (s == "fully_shared") return Regime::FullyShared;
  throw ConfigError("unknown regime '" + s + "' (sweeps use decomposable or fully_shared)");
}

InstanceSpec parse_instance(const json& j, InstanceSpec spec) {
  if (!j.is_object()) throw ConfigError("'instance' must be an object");
  if (j.contains("name")) spec.name = get_as<std::string>(j.at("name"), "instance.name");
  if (spec.name == "fano") {
    reject_unknown(j, {"name", "m", "G", "eps"}, "instance");
    if (j.contains("m")) spec.m = get_as<int>(j.at("m"), "instance.m");
    if (j.contains("G")) spec.G = get_as<double>(j.at("G"), "instance.G");
    if (j.contains("eps")) spec.eps = get_as<double>(j.at("eps"), "instance.eps");
    if (spec.m < 2) throw ConfigError("instance.m must be at least 2");
    if (!(spec.G > 0.0)) throw ConfigError("instance.G must be positive");
    if (spec.eps && !(*spec.eps >= 0.0 && *spec.eps <= 1.0)) throw ConfigError("instance.eps must lie in [0, 1]");
  } else if (spec.name == "bernoulli") {
    reject_unknown(j, {"name", "sign"}, "instance");
    if (j.contains("sign")) spec.sign = get_as<int>(j.at("sign"), "instance.sign");
    if (spec.sign != 1 && spec.sign != -1) throw ConfigError("instance.sign must be 1 or -1");
  } else if (spec.name == "misspecified") {
    reject_unknown(j, {"name", "alphabet_size", "class_size", "perturbation"}, "instance");
    if (j.contains("alphabet_size")) spec.alphabet_size = get_as<int>(j.at("alphabet_size"), "instance.alphabet_size");
    if (j.contains("class_size")) spec.class_size = get_as<int>(j.at("class_size"), "instance.class_size");
    if (j.contains("perturbation")) spec.perturbation = get_as<double>(j.at("perturbation"), "instance.perturbation");
    if (spec.alphabet_size < 2 || spec.class_size < 2) throw ConfigError("misspecified instance needs d >= 2 and class size >= 2");
    if (!(spec.perturbation >= 0.0 && spec.perturbation <= 1.0)) throw ConfigError("perturbation must lie in [0, 1]");
  } else {
    throw ConfigError("unknown instance '" + spec.name + "'");
  }
  return spec;
}

void require_instance(const SweepConfig& c, std::initializer_list<const char*> names, const char* experiment) {
  for (const char* n : names) {
    if (c.instance.name == n) return;
  }
  throw ConfigError(std::string("instance '") + c.instance.name + "' is not supported by the " + experiment + " experiment");
}

// ---------------------------------------------------------------------------
// Summaries

json cell_json(const CellSummary& c) {
  return {{"H", c.H},
          {"n", c.n},
          {"metric", c.metric},
          {"count", c.count},
          {"mean", c.mean},
          {"median", c.median},
          {"q10", c.q10},
          {"q90", c.q90}};
}

const CellSummary* find_cell(const std::vector<CellSummary>& cells, int H, std::uint64_t n, const std::string& metric) {
  for (const auto& c : cells) {
    if (c.H == H && c.n == n && c.metric == metric) return &c;
  }
  return nullptr;
}

SlopeFit fit_axis(const std::string& metric, const std::string& axis, const std::string& fixed,
                  const std::vector<std::pair<double, double>>& points, std::pair<double, double> window) {
  SlopeFit fit{axis, fixed, metric, std::nullopt, std::nullopt, window, false};
  try {
    const auto est = fit_loglog_slope(points);
    fit.slope = est.slope;
    fit.stderr_slope = est.stderr_slope;
    fit.pass = est.slope >= window.first && est.slope <= window.second;
  } catch (const InvalidParam&) {
    // Nonpositive means (for example zero risk everywhere) leave the slope undefined.
  }
  return fit;
}

std::vector<SlopeFit> scaling_slopes(const SweepConfig& config, const std::vector<CellSummary>& cells,
                                     const std::string& metric) {
  std::vector<SlopeFit> out;
  if (config.horizons.size() >= 3) {
    for (auto n : config.sample_sizes) {
      std::vector<std::pair<double, double>> pts;
      for (int H : config.horizons) pts.emplace_back(H, find_cell(cells, H, n, metric)->mean);
      out.push_back(fit_axis(metric, "H", "n=" + std::to_string(n), pts, {0.7, 1.3}));
    }
  }
  if (config.sample_sizes.size() >= 3) {
    for (int H : config.horizons) {
      std::vector<std::pair<double, double>> pts;
      for (auto n : config.sample_sizes) pts.emplace_back(static_cast<double>(n), find_cell(cells, H, n, metric)->mean);
      out.push_back(fit_axis(metric, "n", "H=" + std::to_string(H), pts, {-1.3, -0.7}));
    }
  }
  return out;
}

}  // namespace

const char* to_string(Learner learner) {
  switch (learner) {
    case Learner::Erm: return "erm";
    case Learner::StepwiseErm: return "stepwise_erm";
    case Learner::BayesPosterior: return "bayes_posterior";
    case Learner::BayesMode: return "bayes_mode";
    case Learner::Oracle: return "oracle";
  }
  return "?";
}

const char* to_string(Metric metric) {
  switch (metric) {
    case Metric::JointKl: return "joint_kl";
    case Metric::SquaredHellinger: return "squared_hellinger";
    case Metric::Tv: return "tv";
    case Metric::ExcessKl: return "excess_kl";
    case Metric::ApproxRatio: return "approx_ratio";
  }
  return "?";
}

SweepConfig default_config(ExperimentKind kind) {
  SweepConfig c;
  switch (kind) {
    case ExperimentKind::Estimation:
      break;
    case ExperimentKind::Approximation:
      c.instance.name = "bernoulli";
      c.sample_sizes = {10000};
      c.metric = Metric::ApproxRatio;
      break;
    case ExperimentKind::Hellinger:
      c.instance.eps = 0.1;
      c.horizons = {1, 4, 16};
      c.sample_sizes = {400};
      c.metric = Metric::SquaredHellinger;
      break;
    case ExperimentKind::NoSharpOracle:
      c.instance.name = "bernoulli";
      c.horizons = {1};
      c.sample_sizes = {100, 400};
      c.trials = 2000;
      c.metric = Metric::ExcessKl;
      break;
  }
  return c;
}

SweepConfig parse_sweep_config(const json& doc, ExperimentKind kind) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc, kSweepKeys, "config");
  SweepConfig c = default_config(kind);
  if (doc.contains("instance")) c.instance = parse_instance(doc.at("instance"), c.instance);
  if (doc.contains("H")) c.horizons = get_as<std::vector<int>>(doc.at("H"), "H");
  if (doc.contains("n")) c.sample_sizes = get_as<std::vector<std::uint64_t>>(doc.at("n"), "n");
  if (doc.contains("trials")) c.trials = get_as<int>(doc.at("trials"), "trials");
  if (doc.contains("learner")) c.learner = parse_learner(get_as<std::string>(doc.at("learner"), "learner"));
  if (doc.contains("regime")) c.regime = parse_regime(get_as<std::string>(doc.at("regime"), "regime"));
  if (doc.contains("metric")) c.metric = parse_metric(get_as<std::string>(doc.at("metric"), "metric"));
  if (doc.contains("seed")) c.seed = get_as<std::uint64_t>(doc.at("seed"), "seed");
  if (doc.contains("mc_samples")) c.mc_samples = get_as<std::uint64_t>(doc.at("mc_samples"), "mc_samples");
  if (doc.contains("out")) c.out = get_as<std::string>(doc.at("out"), "out");
  if (doc.contains("fixed_truth")) c.fixed_truth = get_as<bool>(doc.at("fixed_truth"), "fixed_truth");
  if (doc.contains("delta")) c.delta = get_as<double>(doc.at("delta"), "delta");
  if (doc.contains("cap")) c.cap = get_as<std::uint64_t>(doc.at("cap"), "cap");

  if (c.horizons.empty() || c.sample_sizes.empty()) throw ConfigError("H and n grids must be nonempty");
  if (c.trials < 1) throw ConfigError("trials must be at least 1");
  for (int H : c.horizons) {
    if (H < 1) throw ConfigError("horizons must be positive");
  }
  for (auto n : c.sample_sizes) {
    if (n < 1) throw ConfigError("sample sizes must be positive");
  }
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (c.cap < 1) throw ConfigError("cap must be positive");

  switch (kind) {
    case ExperimentKind::Estimation:
      require_instance(c, {"fano"}, "estimation");
      if (c.metric == Metric::ExcessKl || c.metric == Metric::ApproxRatio) {
        throw ConfigError("estimation sweeps are realizable; use joint_kl, squared_hellinger or tv");
      }
      break;
    case ExperimentKind::Approximation:
      require_instance(c, {"bernoulli", "misspecified"}, "approximation");
      if (c.metric != Metric::ApproxRatio && c.metric != Metric::ExcessKl) {
        throw ConfigError("approximation sweeps report approx_ratio (excess_kl when realizable)");
      }
      break;
    case ExperimentKind::Hellinger:
      require_instance(c, {"fano"}, "hellinger");
      if (c.metric != Metric::SquaredHellinger) throw ConfigError("the hellinger experiment reports squared_hellinger");
      break;
    case ExperimentKind::NoSharpOracle:
      require_instance(c, {"bernoulli"}, "no-sharp-oracle");
      if (c.metric != Metric::ExcessKl) throw ConfigError("the no-sharp-oracle experiment reports excess_kl");
      break;
  }
  return c;
}

SweepConfig parse_sweep_config(const std::string& text, ExperimentKind kind) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return parse_sweep_config(doc, kind);
}

SeqPolicy run_learner(Learner learner, const PolicyClass& cls, const Dataset& data, const SeqPolicy* truth,
                      std::uint64_t cap) {
  switch (learner) {
    case Learner::Erm: return erm(cls, data).policy;
    case Learner::StepwiseErm: return stepwise_erm(cls.base(), data, cls.horizon()).policy;
    case Learner::BayesPosterior: return bayes_posterior(cls.base(), data, cls.horizon(), {}, cap).predictor;
    case Learner::BayesMode: return bayes_mode(cls, data).policy;
    case Learner::Oracle: {
      if (truth == nullptr) throw InvalidParam("the oracle learner needs the truth");
      const auto opt = min_class_kl(*truth, cls, cap);
      if (cls.regime() == Regime::Dependent) return cls.explicit_members()[*opt.member_index];
      return cls.member(opt.step_choice);
    }
  }
  throw InvalidParam("unknown learner");
}

SweepResult run_estimation_sweep(const SweepConfig& config) {
  const auto cells = make_cells(config);
  const auto& spec = config.instance;
  std::vector<SweepRow> rows(cells.size());

  parallel_cells(cells.size(), [&](std::size_t i) {
    const auto& cell = cells[i];
    Rng rng(cell.seed);
    Rng truth_rng(config.fixed_truth ? derive_seed({config.seed, static_cast<std::uint64_t>(cell.H)}) : cell.seed);
    Rng& pick = config.fixed_truth ? truth_rng : rng;

    std::vector<std::size_t> theta(static_cast<std::size_t>(cell.H));
    std::uniform_int_distribution<std::size_t> draw(0, static_cast<std::size_t>(spec.m) - 1);
    if (config.regime == Regime::FullyShared) {
      std::fill(theta.begin(), theta.end(), draw(pick));
    } else {
      for (auto& t : theta) t = draw(pick);
    }
    const auto inst = make_fano_instance(cell.H, spec.m, eps_for(spec, cell.n), theta);
    const auto cls = config.regime == Regime::FullyShared ? PolicyClass::fully_shared(inst.family.members, cell.H)
                                                          : inst.cls;
    const auto data = sample_dataset(inst.truth, cell.n, rng);
    const auto hat = run_learner(config.learner, cls, data, &inst.truth, config.cap);

    double value = 0.0;
    switch (config.metric) {
      case Metric::JointKl: value = joint_kl_value(inst.truth, hat, config, rng); break;
      case Metric::SquaredHellinger: value = joint_squared_hellinger(inst.truth, hat, config.cap).value; break;
      case Metric::Tv: value = total_variation(inst.truth, hat, config.cap).value; break;
      default: throw ConfigError("unsupported metric for estimation");
    }
    rows[i] = {cell.H, cell.n, cell.trial, cell.seed, to_string(config.metric), value, std::nullopt};
  });

  SweepResult result;
  result.rows = std::move(rows);
  result.cells = summarize(result.rows);
  result.slopes = scaling_slopes(config, result.cells, to_string(config.metric));
  json per_cell = json::array();
  for (const auto& c : result.cells) {
    auto j = cell_json(c);
    j["eps"] = eps_for(spec, c.n);
    per_cell.push_back(std::move(j));
  }
  result.summary = {{"experiment", "estimation"},
                    {"learner", to_string(config.learner)},
                    {"regime", to_string(config.regime)},
                    {"m", spec.m},
                    {"cells", per_cell}};
  return result;
}

SweepResult run_approximation_sweep(const SweepConfig& config) {
  const auto cells = make_cells(config);
  const auto& spec = config.instance;
  std::vector<SweepRow> rows(cells.size());
  std::vector<double> kls(cells.size());

  parallel_cells(cells.size(), [&](std::size_t i) {
    const auto& cell = cells[i];
    Rng rng(cell.seed);
    std::optional<SeqPolicy> truth;
    std::optional<PolicyClass> cls;
    if (spec.name == "bernoulli") {
      auto inst = make_bernoulli_instance(cell.n, cell.H, spec.sign);
      truth = inst.truth;
      cls = config.regime == Regime::FullyShared ? PolicyClass::fully_shared(inst.base, cell.H) : inst.cls;
    } else {
      Rng inst_rng(derive_seed({cell.seed, 1}));
      auto inst = make_misspecified_instance(cell.H, spec.alphabet_size, spec.class_size, spec.perturbation,
                                             inst_rng, config.cap);
      truth = inst.truth;
      cls = config.regime == Regime::FullyShared
                ? PolicyClass::fully_shared(std::vector<StepPolicy>(inst.cls.base().begin(), inst.cls.base().end()),
                                            cell.H)
                : inst.cls;
    }
    const double min_kl = min_class_kl(*truth, *cls, config.cap).value;
    const auto data = sample_dataset(*truth, cell.n, rng);
    const auto hat = run_learner(config.learner, *cls, data, &*truth, config.cap);
    const double kl_hat = joint_kl_value(*truth, hat, config, rng);
    kls[i] = kl_hat;
    if (min_kl > kRealizableTolerance) {
      rows[i] = {cell.H, cell.n, cell.trial, cell.seed, "approx_ratio", kl_hat / min_kl, min_kl};
    } else {
      rows[i] = {cell.H, cell.n, cell.trial, cell.seed, "excess_kl", kl_hat - min_kl, min_kl};
    }
  });

  SweepResult result;
  result.rows = std::move(rows);
  result.cells = summarize(result.rows);

  json per_cell = json::array();
  double max_ratio = 0.0;
  double min_ratio = std::numeric_limits<double>::infinity();
  bool any_ratio = false;
  for (int H : config.horizons) {
    for (auto n : config.sample_sizes) {
      double sum_kl = 0.0;
      double sum_min = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].H != H || cells[i].n != n) continue;
        sum_kl += kls[i];
        sum_min += *result.rows[i].min_class_kl;
        ++count;
      }
      const double mean_kl = sum_kl / static_cast<double>(count);
      const double mean_min = sum_min / static_cast<double>(count);
      json j = {{"H", H}, {"n", n}, {"mean_kl", mean_kl}, {"mean_min_class_kl", mean_min}};
      if (mean_min > kRealizableTolerance) {
        const double ratio = mean_kl / mean_min;
        j["ratio_of_means"] = ratio;
        max_ratio = std::max(max_ratio, ratio);
        min_ratio = std::min(min_ratio, ratio);
        any_ratio = true;
      } else {
        j["mean_excess_kl"] = mean_kl - mean_min;
      }
      per_cell.push_back(std::move(j));
    }
  }
  result.summary = {{"experiment", "approximation"},
                    {"instance", spec.name},
                    {"learner", to_string(config.learner)},
                    {"regime", to_string(config.regime)},
                    {"cells", per_cell}};
  if (any_ratio) {
    result.summary["max_ratio"] = max_ratio;
    result.summary["ratio_spread"] = max_ratio / min_ratio;
  }
  return result;
}

SweepResult run_hellinger_comparison(const SweepConfig& config) {
  const auto cells = make_cells(config);
  const auto& spec = config.instance;
  std::vector<SweepRow> shared_rows(cells.size());
  std::vector<SweepRow> decomp_rows(cells.size());

  parallel_cells(cells.size(), [&](std::size_t i) {
    const auto& cell = cells[i];
    Rng rng(cell.seed);
    const auto family = make_hadamard_family(spec.m, eps_for(spec, cell.n));
    Rng truth_rng(derive_seed({config.seed, static_cast<std::uint64_t>(cell.H)}));
    std::uniform_int_distribution<std::size_t> draw(0, family.members.size() - 1);
    const auto j = draw(config.fixed_truth ? truth_rng : rng);
    const auto truth = SeqPolicy::shared(family.members[j], cell.H);
    const auto shared = PolicyClass::fully_shared(family.members, cell.H);
    const auto decomp = PolicyClass::decomposable(family.members, cell.H);
    const auto data = sample_dataset(truth, cell.n, rng);
    const auto hat_shared = run_learner(config.learner, shared, data, &truth, config.cap);
    const auto hat_decomp = run_learner(config.learner, decomp, data, &truth, config.cap);
    shared_rows[i] = {cell.H, cell.n, cell.trial, cell.seed, "squared_hellinger_fully_shared",
                      joint_squared_hellinger(hat_shared, truth, config.cap).value, std::nullopt};
    decomp_rows[i] = {cell.H, cell.n, cell.trial, cell.seed, "squared_hellinger_decomposable",
                      joint_squared_hellinger(hat_decomp, truth, config.cap).value, std::nullopt};
  });

  SweepResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    result.rows.push_back(std::move(shared_rows[i]));
    result.rows.push_back(std::move(decomp_rows[i]));
  }
  result.cells = summarize(result.rows);

  json per_cell = json::array();
  bool shared_within = true;
  for (int H : config.horizons) {
    for (auto n : config.sample_sizes) {
      const auto* s = find_cell(result.cells, H, n, "squared_hellinger_fully_shared");
      const auto* d = find_cell(result.cells, H, n, "squared_hellinger_decomposable");
      const double m = spec.m;
      const double bound_shared = 2.0 * std::log(m / config.delta) / static_cast<double>(n);
      const double bound_decomp = 2.0 * (H * std::log(m) - std::log(config.delta)) / static_cast<double>(n);
      const double q = 1.0 - config.delta;
      std::vector<double> sv;
      std::vector<double> dv;
      for (const auto& r : result.rows) {
        if (r.H != H || r.n != n) continue;
        (r.metric == "squared_hellinger_fully_shared" ? sv : dv).push_back(r.value);
      }
      const double qs = quantile(sv, q);
      const double qd = quantile(dv, q);
      shared_within = shared_within && qs <= bound_shared;
      per_cell.push_back({{"H", H},
                          {"n", n},
                          {"quantile_level", q},
                          {"fully_shared_quantile", qs},
                          {"fully_shared_bound", bound_shared},
                          {"fully_shared_within_bound", qs <= bound_shared},
                          {"decomposable_quantile", qd},
                          {"decomposable_bound", bound_decomp},
                          {"decomposable_within_bound", qd <= bound_decomp},
                          {"fully_shared_mean", s->mean},
                          {"decomposable_mean", d->mean},
                          {"mean_ratio", s->mean > 0.0 ? json(d->mean / s->mean) : json(nullptr)}});
    }
  }
  result.summary = {{"experiment", "hellinger"},
                    {"learner", to_string(config.learner)},
                    {"m", spec.m},
                    {"delta", config.delta},
                    {"fully_shared_within_bound_everywhere", shared_within},
                    {"cells", per_cell}};
  return result;
}

SweepResult run_no_sharp_oracle_experiment(const SweepConfig& config) {
  const auto cells = make_cells(config);
  std::vector<SweepRow> pos(cells.size());
  std::vector<SweepRow> neg(cells.size());

  parallel_cells(cells.size(), [&](std::size_t i) {
    const auto& cell = cells[i];
    for (int sign : {1, -1}) {
      // Both signs reuse the cell seed, so the two arms are paired.
      Rng rng(cell.seed);
      const auto inst = make_bernoulli_instance(cell.n, cell.H, sign);
      const auto cls = config.regime == Regime::FullyShared ? PolicyClass::fully_shared(inst.base, cell.H) : inst.cls;
      const double min_kl = min_class_kl(inst.truth, cls, config.cap).value;
      const auto data = sample_dataset(inst.truth, cell.n, rng);
      const auto hat = run_learner(config.learner, cls, data, &inst.truth, config.cap);
      const double excess = joint_kl(inst.truth, hat, config.cap).value - min_kl;
      (sign > 0 ? pos : neg)[i] = {cell.H, cell.n, cell.trial, cell.seed,
                                   sign > 0 ? "excess_kl_pos" : "excess_kl_neg", excess, min_kl};
    }
  });

  SweepResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    result.rows.push_back(std::move(pos[i]));
    result.rows.push_back(std::move(neg[i]));
  }
  result.cells = summarize(result.rows);

  json per_cell = json::array();
  double worst = 1.0;
  for (int H : config.horizons) {
    for (auto n : config.sample_sizes) {
      const double b = make_bernoulli_instance(n, H, 1).b;
      const double gap = 2.0 * b * std::log(3.0) * H;
      std::size_t hits_pos = 0;
      std::size_t hits_neg = 0;
      std::size_t count = 0;
      for (const auto& r : result.rows) {
        if (r.H != H || r.n != n) continue;
        const bool hit = r.value >= gap - kGapSlack;
        if (r.metric == "excess_kl_pos") {
          hits_pos += hit ? 1 : 0;
          ++count;
        } else {
          hits_neg += hit ? 1 : 0;
        }
      }
      const double fp = static_cast<double>(hits_pos) / static_cast<double>(count);
      const double fn = static_cast<double>(hits_neg) / static_cast<double>(count);
      worst = std::min(worst, std::max(fp, fn));
      per_cell.push_back({{"H", H},
                          {"n", n},
                          {"b", b},
                          {"gap", gap},
                          {"frequency_pos", fp},
                          {"frequency_neg", fn},
                          {"max_over_signs", std::max(fp, fn)}});
    }
  }
  result.summary = {{"experiment", "no_sharp_oracle"},
                    {"learner", to_string(config.learner)},
                    {"regime", to_string(config.regime)},
                    {"min_over_cells_of_max_over_signs", worst},
                    {"cells", per_cell}};
  return result;
}

SweepResult run_experiment(ExperimentKind kind, const SweepConfig& config) {
  switch (kind) {
    case ExperimentKind::Estimation: return run_estimation_sweep(config);
    case ExperimentKind::Approximation: return run_approximation_sweep(config);
    case ExperimentKind::Hellinger: return run_hellinger_comparison(config);
    case ExperimentKind::NoSharpOracle: return run_no_sharp_oracle_experiment(config);
  }
  throw InvalidParam("unknown experiment");
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidParam("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidParam("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

SlopeEstimate fit_loglog_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw InvalidParam("slope fit needs at least 3 points");
  const double k = static_cast<double>(points.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw InvalidParam("log-log fit needs positive coordinates");
    mx += std::log(x);
    my += std::log(y);
  }
  mx /= k;
  my /= k;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y) - my);
  }
  if (!(sxx > 0.0)) throw InvalidParam("log-log fit needs at least two distinct x values");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (const auto& [x, y] : points) {
    const double r = std::log(y) - (intercept + slope * std::log(x));
    ssr += r * r;
  }
  return {slope, std::sqrt(ssr / (k - 2.0) / sxx)};
}

std::vector<CellSummary> summarize(std::span<const SweepRow> rows) {
  std::vector<CellSummary> out;
  std::map<std::tuple<int, std::uint64_t, std::string>, std::size_t> index;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.H, r.n, r.metric);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({r.H, r.n, r.metric, 0, 0.0, 0.0, 0.0, 0.0});
      values.emplace_back();
    }
    values[it->second].push_back(r.value);
  }
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto& v = values[c];
    double sum = 0.0;
    for (double x : v) sum += x;
    out[c].count = v.size();
    out[c].mean = sum / static_cast<double>(v.size());
    out[c].median = quantile(v, 0.5);
    out[c].q10 = quantile(v, 0.1);
    out[c].q90 = quantile(v, 0.9);
  }
  return out;
}

std::string to_csv(const SweepResult& result) {
  const bool with_min = std::any_of(result.rows.begin(), result.rows.end(),
                                    [](const SweepRow& r) { return r.min_class_kl.has_value(); });
  std::string out = "H,n,trial,seed,metric,value";
  if (with_min) out += ",min_class_kl";
  out += "\n";
  for (const auto& r : result.rows) {
    out += std::to_string(r.H) + "," + std::to_string(r.n) + "," + std::to_string(r.trial) + "," +
           std::to_string(r.seed) + "," + r.metric + "," + format_real(r.value);
    if (with_min) {
      out += ",";
      if (r.min_class_kl) out += format_real(*r.min_class_kl);
    }
    out += "\n";
  }
  return out;
}

json slopes_json(const SweepResult& result) {
  json arr = json::array();
  for (const auto& s : result.slopes) {
    arr.push_back({{"axis", s.axis},
                   {"fixed", s.fixed},
                   {"metric", s.metric},
                   {"slope", s.slope ? json(*s.slope) : json(nullptr)},
                   {"stderr", s.stderr_slope ? json(*s.stderr_slope) : json(nullptr)},
                   {"window", {s.window.first, s.window.second}},
                   {"pass", s.pass}});
  }
  return arr;
}

FreedmanReport run_freedman_selftest(const FreedmanConfig& config) {
  if (!(config.R > 0.0) || !(config.eps > 0.0 && config.eps < 1.0) || !(config.delta > 0.0 && config.delta < 1.0) ||
      config.T < 1 || config.trials < 1 || !(config.p >= 0.0 && config.p <= 1.0)) {
    throw InvalidParam("Freedman self-test needs R > 0, eps and delta in (0, 1), T, trials >= 1, p in [0, 1]");
  }
  const double log_term = std::log(1.0 / config.delta);
  const double fwd_extra = config.R / config.eps * log_term;
  const double rev_extra = (1.0 + config.eps) * (1.0 + config.eps) * config.R / config.eps * log_term;
  std::vector<char> fwd(static_cast<std::size_t>(config.trials), 0);
  std::vector<char> rev(static_cast<std::size_t>(config.trials), 0);

#pragma omp parallel for schedule(static)
  for (int trial = 0; trial < config.trials; ++trial) {
    Rng rng(derive_seed({config.seed, static_cast<std::uint64_t>(trial)}));
    double sum_x = 0.0;
    double sum_e = 0.0;
    int ones = 0;
    for (int t = 0; t < config.T; ++t) {
      double p = config.p;
      if (config.process == FreedmanProcess::Adapted) p = 0.5 * (config.p + (t == 0 ? 0.0 : static_cast<double>(ones) / t));
      double x = 0.0;
      if (config.process == FreedmanProcess::Deterministic) {
        x = p * config.R;
      } else if (uniform01(rng) < p) {
        x = config.R;
        ++ones;
      }
      sum_x += x;
      sum_e += p * config.R;
    }
    fwd[static_cast<std::size_t>(trial)] = sum_x > (1.0 + config.eps) * sum_e + fwd_extra;
    rev[static_cast<std::size_t>(trial)] = sum_e > (1.0 + config.eps) * sum_x + rev_extra;
  }

  FreedmanReport r;
  r.trials = config.trials;
  r.forward_violations = static_cast<int>(std::count(fwd.begin(), fwd.end(), 1));
  r.reverse_violations = static_cast<int>(std::count(rev.begin(), rev.end(), 1));
  r.forward_frequency = static_cast<double>(r.forward_violations) / config.trials;
  r.reverse_frequency = static_cast<double>(r.reverse_violations) / config.trials;
  r.threshold = config.delta + 3.0 * std::sqrt(config.delta * (1.0 - config.delta) / config.trials);
  r.forward_pass = r.forward_frequency <= r.threshold;
  r.reverse_pass = r.reverse_frequency <= r.threshold;
  return r;
}

FreedmanConfig parse_freedman_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc, {"R", "T", "eps", "delta", "trials", "process", "p", "seed"}, "config");
  FreedmanConfig c;
  if (doc.contains("R")) c.R = get_as<double>(doc.at("R"), "R");
  if (doc.contains("T")) c.T = get_as<int>(doc.at("T"), "T");
  if (doc.contains("eps")) c.eps = get_as<double>(doc.at("eps"), "eps");
  if (doc.contains("delta")) c.delta = get_as<double>(doc.at("delta"), "delta");
  if (doc.contains("trials")) c.trials = get_as<int>(doc.at("trials"), "trials");
  if (doc.contains("p")) c.p = get_as<double>(doc.at("p"), "p");
  if (doc.contains("seed")) c.seed = get_as<std::uint64_t>(doc.at("seed"), "seed");
  if (doc.contains("process")) {
    const auto s = get_as<std::string>(doc.at("process"), "process");
    if (s == "deterministic") c.process = FreedmanProcess::Deterministic;
    else if (s == "bernoulli") c.process = FreedmanProcess::Bernoulli;
    else if (s == "adapted") c.process = FreedmanProcess::Adapted;
    else throw ConfigError("unknown process '" + s + "'");
  }
  if (!(c.R > 0.0) || !(c.eps > 0.0 && c.eps < 1.0) || !(c.delta > 0.0 && c.delta < 1.0) || c.T < 1 ||
      c.trials < 1 || !(c.p >= 0.0 && c.p <= 1.0)) {
    throw ConfigError("Freedman config needs R > 0, eps and delta in (0, 1), T, trials >= 1, p in [0, 1]");
  }
  return c;
}

json to_json(const FreedmanReport& r) {
  return {{"trials", r.trials},
          {"forward_violations", r.forward_violations},
          {"reverse_violations", r.reverse_violations},
          {"forward_frequency", r.forward_frequency},
          {"reverse_frequency", r.reverse_frequency},
          {"threshold", r.threshold},
          {"forward_pass", r.forward_pass},
          {"reverse_pass", r.reverse_pass}};
}

}  // namespace arkl
