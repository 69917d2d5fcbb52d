#include "arkl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "arkl/divergences.hpp"
#include "arkl/experiments.hpp"
#include "arkl/hard_instances.hpp"
#include "arkl/serialize.hpp"

namespace arkl {

namespace {

using nlohmann::json;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::uint64_t> cap;
  std::optional<std::uint64_t> mc_samples;
  bool fixed_truth = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--seed", f.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", f.out, "Output path (stdout when omitted)");
  cmd->add_option("--cap", f.cap, "Enumeration cap (overrides ARKL_CAP and the config)");
  cmd->add_option("--mc-samples", f.mc_samples, "Monte Carlo budget used above the cap");
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON in '") + path + "': " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string sidecar(const std::string& path, const char* suffix) {
  std::filesystem::path p(path);
  p.replace_extension(suffix);
  return p.string();
}

int run_sweep(ExperimentKind kind, const CommonFlags& f) {
  auto config = parse_sweep_config(read_config(f.config), kind);
  if (f.seed) config.seed = *f.seed;
  if (f.cap) config.cap = *f.cap;
  if (f.mc_samples) config.mc_samples = *f.mc_samples;
  if (f.fixed_truth) config.fixed_truth = true;
  std::string out = f.out;
  if (out.empty() && config.out) out = *config.out;

  const auto result = run_experiment(kind, config);
  write_text(out, to_csv(result));
  if (!out.empty()) {
    write_text(sidecar(out, ".slopes.json"), slopes_json(result).dump(2) + "\n");
    write_text(sidecar(out, ".summary.json"), result.summary.dump(2) + "\n");
  } else {
    std::cerr << result.summary.dump(2) << "\n";
  }
  return 0;
}

int run_freedman(const CommonFlags& f) {
  auto config = parse_freedman_config(read_config(f.config));
  if (f.seed) config.seed = *f.seed;
  write_text(f.out, to_json(run_freedman_selftest(config)).dump(2) + "\n");
  return 0;
}

int run_divergence(const CommonFlags& f) {
  const auto doc = read_config(f.config);
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "p" && key != "q" && key != "method" && key != "divergences" && key != "seed") {
      throw ConfigError("unknown key '" + key + "' in config");
    }
  }
  if (!doc.contains("p") || !doc.contains("q")) throw ConfigError("config needs policies 'p' and 'q'");
  const auto p = seq_policy_from_json(doc.at("p"));
  const auto q = seq_policy_from_json(doc.at("q"));
  const std::string method = doc.value("method", "auto");
  if (method != "auto" && method != "exact" && method != "chain" && method != "monte_carlo") {
    throw ConfigError("unknown method '" + method + "'");
  }
  std::vector<std::string> which{"joint_kl", "squared_hellinger", "total_variation"};
  if (doc.contains("divergences")) which = doc.at("divergences").get<std::vector<std::string>>();
  const std::uint64_t cap = f.cap.value_or(default_enumeration_cap());
  const std::uint64_t seed = f.seed.value_or(doc.value("seed", std::uint64_t{0}));
  Rng rng(seed);

  std::string csv = "divergence," + divergence_csv_header() + "\n";
  for (const auto& name : which) {
    DivergenceReport r;
    if (name == "joint_kl") {
      if (method == "monte_carlo") {
        if (!f.mc_samples) throw ConfigError("monte_carlo needs --mc-samples");
        r = joint_kl_monte_carlo(p, q, *f.mc_samples, rng);
      } else if (method == "chain") {
        r = joint_kl_chain(p, q, cap);
      } else if (method == "exact") {
        r = joint_kl_exact(p, q, cap);
      } else {
        try {
          r = joint_kl(p, q, cap);
        } catch (const CapExceeded&) {
          if (!f.mc_samples) throw;
          r = joint_kl_monte_carlo(p, q, *f.mc_samples, rng);
        }
      }
    } else if (name == "squared_hellinger") {
      r = method == "exact" ? squared_hellinger(p, q, cap) : joint_squared_hellinger(p, q, cap);
    } else if (name == "total_variation") {
      r = total_variation(p, q, cap);
    } else {
      throw ConfigError("unknown divergence '" + name + "'");
    }
    csv += name + "," + to_csv_row(r) + "\n";
  }
  write_text(f.out, csv);
  return 0;
}

template <class T>
T param(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("instance parameter '") + key + "' has the wrong type");
  }
}

void allow_only(const json& j, std::initializer_list<const char*> keys) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : keys) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown instance parameter '" + key + "'");
  }
}

int run_instance(const CommonFlags& f) {
  const auto doc = read_config(f.config);
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "instance" && key != "seed") throw ConfigError("unknown key '" + key + "' in config");
  }
  if (!doc.contains("instance") || !doc.at("instance").is_object()) throw ConfigError("config needs an 'instance' object");
  const auto& j = doc.at("instance");
  const std::string name = param<std::string>(j, "name", "");
  const std::uint64_t seed = f.seed.value_or(param<std::uint64_t>(doc, "seed", 0));
  const std::uint64_t cap = f.cap.value_or(default_enumeration_cap());
  Rng rng(seed);

  json out;
  if (name == "hadamard") {
    allow_only(j, {"name", "m", "eps"});
    out = manifest(make_hadamard_family(param<int>(j, "m", 8), param<double>(j, "eps", 0.5)), seed);
  } else if (name == "fano") {
    allow_only(j, {"name", "H", "m", "eps", "G", "n", "theta"});
    const int H = param<int>(j, "H", 4);
    const int m = param<int>(j, "m", 8);
    double eps = 0.0;
    if (j.contains("eps")) {
      eps = param<double>(j, "eps", 0.0);
    } else {
      eps = fano_eps(param<double>(j, "G", 1.0), m, param<std::uint64_t>(j, "n", 200));
    }
    if (j.contains("theta")) {
      out = manifest(make_fano_instance(H, m, eps, param<std::vector<std::size_t>>(j, "theta", {})), seed);
    } else {
      out = manifest(make_fano_instance(H, m, eps, rng), seed);
    }
  } else if (name == "bernoulli") {
    allow_only(j, {"name", "n", "H", "sign"});
    out = manifest(make_bernoulli_instance(param<std::uint64_t>(j, "n", 100), param<int>(j, "H", 1),
                                           param<int>(j, "sign", 1)),
                   seed);
  } else if (name == "dependent") {
    allow_only(j, {"name", "H", "M", "G", "n"});
    out = manifest(make_dependent_instance(param<int>(j, "H", 4), param<int>(j, "M", 8), param<double>(j, "G", 1.0),
                                           param<std::uint64_t>(j, "n", 200)),
                   seed);
  } else if (name == "misspecified") {
    allow_only(j, {"name", "H", "alphabet_size", "class_size", "perturbation"});
    out = manifest(make_misspecified_instance(param<int>(j, "H", 3), param<int>(j, "alphabet_size", 2),
                                              param<int>(j, "class_size", 4), param<double>(j, "perturbation", 0.3),
                                              rng, cap),
                   seed);
  } else {
    throw ConfigError("unknown instance '" + name + "'");
  }
  write_text(f.out, out.dump(2) + "\n");
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Misspecified autoregressive learning under joint KL: sweeps, divergences and instances"};
  app.require_subcommand(1);

  CommonFlags flags;
  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"estimation", "KL estimation sweep on the Fano product instance"},
      {"approximation", "Approximation-ratio sweep on a misspecified instance"},
      {"hellinger", "Squared Hellinger: fully-shared versus decomposable ERM"},
      {"no-sharp-oracle", "Frequency of the Bernoulli excess-KL event"},
      {"freedman", "Monte Carlo self-test of the one-sided Freedman bounds"},
      {"divergence", "Divergences between two serialized sequence policies"},
      {"instance", "Generate an instance and print its manifest"},
  };
  std::vector<CLI::App*> cmds;
  for (const auto& s : subs) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, flags);
    if (std::string(s.name) == "estimation") cmd->add_flag("--fixed-truth", flags.fixed_truth, "Hold the truth fixed per H");
    cmds.push_back(cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmds[0]->parsed()) return run_sweep(ExperimentKind::Estimation, flags);
    if (cmds[1]->parsed()) return run_sweep(ExperimentKind::Approximation, flags);
    if (cmds[2]->parsed()) return run_sweep(ExperimentKind::Hellinger, flags);
    if (cmds[3]->parsed()) return run_sweep(ExperimentKind::NoSharpOracle, flags);
    if (cmds[4]->parsed()) return run_freedman(flags);
    if (cmds[5]->parsed()) return run_divergence(flags);
    if (cmds[6]->parsed()) return run_instance(flags);
  } catch (const CapExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const InvalidParam& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace arkl
