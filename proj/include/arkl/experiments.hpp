#pragma once

// Sweep harness: configs, per-cell simulation, summaries, slope fits and
// output files.
//
// Config documents are strict JSON objects; unknown keys raise ConfigError.
// Common keys:
//
//   "instance":  {"name": "fano", "m": 8, "G": 1.0, "eps": <optional fixed eps>}
//              | {"name": "bernoulli", "sign": 1 | -1}
//              | {"name": "misspecified", "alphabet_size": 2, "class_size": 4,
//                 "perturbation": 0.3}
//   "H": [..], "n": [..], "trials": 200, "seed": 0,
//   "learner": "erm" | "stepwise_erm" | "bayes_posterior" | "bayes_mode" | "oracle",
//   "regime": "decomposable" | "fully_shared",
//   "metric": "joint_kl" | "squared_hellinger" | "tv" | "excess_kl" | "approx_ratio",
//   "mc_samples": 0, "out": "<csv path>", "fixed_truth": false, "delta": 0.1
//
// Each experiment accepts the subset of keys it uses; see README.md.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "arkl/core.hpp"
#include "arkl/learners.hpp"

namespace arkl {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Learner { Erm, StepwiseErm, BayesPosterior, BayesMode, Oracle };
enum class Metric { JointKl, SquaredHellinger, Tv, ExcessKl, ApproxRatio };
enum class ExperimentKind { Estimation, Approximation, Hellinger, NoSharpOracle };

const char* to_string(Learner learner);
const char* to_string(Metric metric);

struct InstanceSpec {
  std::string name = "fano";
  int m = 8;
  double G = 1.0;
  std::optional<double> eps;  // fixed eps; the eps rule applies when absent
  int sign = 1;
  int alphabet_size = 2;
  int class_size = 4;
  double perturbation = 0.3;
};

struct SweepConfig {
  InstanceSpec instance;
  std::vector<int> horizons{1, 2, 4, 8, 16};
  std::vector<std::uint64_t> sample_sizes{50, 100, 200, 400, 800};
  int trials = 200;
  Learner learner = Learner::Erm;
  Regime regime = Regime::Decomposable;
  Metric metric = Metric::JointKl;
  std::uint64_t seed = 0;
  std::uint64_t mc_samples = 0;
  std::optional<std::string> out;
  bool fixed_truth = false;
  double delta = 0.1;
  std::uint64_t cap = default_enumeration_cap();
};

/// Defaults for each experiment before the document is applied.
SweepConfig default_config(ExperimentKind kind);
/// Parses and validates a config document for `kind`; ConfigError on failure.
SweepConfig parse_sweep_config(const nlohmann::json& doc, ExperimentKind kind);
SweepConfig parse_sweep_config(const std::string& text, ExperimentKind kind);

struct SweepRow {
  int H = 0;
  std::uint64_t n = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
  std::optional<double> min_class_kl;
};

struct CellSummary {
  int H = 0;
  std::uint64_t n = 0;
  std::string metric;
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

struct SlopeFit {
  std::string axis;   // "H" or "n"
  std::string fixed;  // the other coordinate, e.g. "n=200"
  std::string metric;
  std::optional<double> slope;
  std::optional<double> stderr_slope;
  std::pair<double, double> window;
  bool pass = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<CellSummary> cells;
  std::vector<SlopeFit> slopes;
  nlohmann::json summary = nlohmann::json::object();
};

/// Realizable Fano instance; records the learner's risk in the config metric.
SweepResult run_estimation_sweep(const SweepConfig& config);

/// Misspecified instance; records KL(P^pi* || P^pi_hat) / min-class KL per
/// trial (the excess when the class is realizable).
SweepResult run_approximation_sweep(const SweepConfig& config);

/// Fully-shared truth drawn from the Hadamard family; the same data feed ERM
/// over the fully-shared and the decomposable class. Records D_H^2 for each.
SweepResult run_hellinger_comparison(const SweepConfig& config);

/// Bernoulli instance for both signs; records the excess KL over the class
/// optimum and the frequency with which it reaches the gap H * 2b log 3.
SweepResult run_no_sharp_oracle_experiment(const SweepConfig& config);

SweepResult run_experiment(ExperimentKind kind, const SweepConfig& config);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double q);

struct SlopeEstimate {
  double slope = 0.0;
  double stderr_slope = 0.0;
};

/// OLS of log y on log x. Needs >= 3 points with positive coordinates.
SlopeEstimate fit_loglog_slope(std::span<const std::pair<double, double>> points);

/// Per-cell summaries in (H, n, metric) first-appearance order.
std::vector<CellSummary> summarize(std::span<const SweepRow> rows);

/// "H,n,trial,seed,metric,value[,min_class_kl]" with LF line endings.
std::string to_csv(const SweepResult& result);
nlohmann::json slopes_json(const SweepResult& result);

enum class FreedmanProcess { Deterministic, Bernoulli, Adapted };

struct FreedmanConfig {
  double R = 1.0;
  int T = 100;
  double eps = 0.5;
  double delta = 0.05;
  int trials = 10000;
  FreedmanProcess process = FreedmanProcess::Bernoulli;
  double p = 0.3;  // Bernoulli parameter; baseline for the adapted process
  std::uint64_t seed = 0;
};

struct FreedmanReport {
  int trials = 0;
  int forward_violations = 0;
  int reverse_violations = 0;
  double forward_frequency = 0.0;
  double reverse_frequency = 0.0;
  double threshold = 0.0;  // delta + 3 sqrt(delta (1 - delta) / trials)
  bool forward_pass = false;
  bool reverse_pass = false;
};

/// Sequences X_t in [0, R] with known conditional means:
///   Deterministic: X_t = p R.
///   Bernoulli:     X_t = R Bern(p), independent.
///   Adapted:       X_t = R Bern(p_t), p_t = (p + fraction of ones so far) / 2.
/// Forward event:  sum X > (1 + eps) sum E + (R / eps) log(1/delta).
/// Reverse event:  sum E > (1 + eps) sum X + ((1 + eps)^2 R / eps) log(1/delta).
FreedmanReport run_freedman_selftest(const FreedmanConfig& config);

FreedmanConfig parse_freedman_config(const nlohmann::json& doc);
nlohmann::json to_json(const FreedmanReport& report);

/// The learner's output on one dataset. `truth` is used only by the oracle learner.
SeqPolicy run_learner(Learner learner, const PolicyClass& cls, const Dataset& data,
                      const SeqPolicy* truth = nullptr, std::uint64_t cap = default_enumeration_cap());

}  // namespace arkl
