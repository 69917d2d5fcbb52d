#include "arkl/serialize.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace arkl {

using nlohmann::json;

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_real(std::string_view text) {
  const std::string s(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  // ERANGE with a finite result is underflow to a subnormal, which is still exact.
  if (s.empty() || end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v))) {
    throw InvalidParam("malformed decimal '" + s + "'");
  }
  return v;
}

namespace {

json row_to_json(std::span<const double> row) {
  json out = json::array();
  for (double p : row) out.push_back(format_real(p));
  return out;
}

void row_from_json(const json& j, std::vector<double>& out) {
  if (!j.is_array()) throw InvalidParam("probability row must be an array");
  for (const auto& v : j) {
    if (!v.is_string()) throw InvalidParam("probabilities must be decimal strings");
    out.push_back(parse_real(v.get<std::string>()));
  }
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InvalidParam(std::string("missing field '") + key + "'");
  return j.at(key);
}

int int_field(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) throw InvalidParam(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

std::string string_field(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw InvalidParam(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

json steps_to_json(std::span<const StepPolicy> steps) {
  json out = json::array();
  for (const auto& s : steps) out.push_back(to_json(s));
  return out;
}

std::vector<StepPolicy> steps_from_json(const json& j) {
  if (!j.is_array()) throw InvalidParam("steps must be an array");
  std::vector<StepPolicy> out;
  for (const auto& s : j) out.push_back(step_policy_from_json(s));
  return out;
}

void check_shape(const json& j, int horizon, int alphabet_size) {
  if (int_field(j, "horizon") != horizon || int_field(j, "alphabet_size") != alphabet_size) {
    throw InvalidParam("declared horizon/alphabet_size disagree with the content");
  }
}

}  // namespace

json to_json(const StepPolicy& step) {
  const auto d = static_cast<std::size_t>(step.alphabet_size());
  if (step.is_context_free()) {
    return json{{"kind", "context_free"}, {"row", row_to_json(step.table())}};
  }
  json rows = json::array();
  for (std::size_t r = 0; r < step.row_count(); ++r) rows.push_back(row_to_json(step.table().subspan(r * d, d)));
  return json{{"kind", "tabular"},
              {"min_prefix_length", step.min_prefix_length()},
              {"max_prefix_length", step.max_prefix_length()},
              {"rows", std::move(rows)}};
}

json to_json(const SeqPolicy& policy) {
  json j{{"object", "seq_policy"}, {"horizon", policy.horizon()}, {"alphabet_size", policy.alphabet_size()}};
  if (policy.is_fully_shared() && policy.horizon() > 1) {
    j["regime"] = "fully_shared";
    j["steps"] = steps_to_json(policy.steps().first(1));
  } else {
    j["regime"] = "per_step";
    j["steps"] = steps_to_json(policy.steps());
  }
  return j;
}

json to_json(const PolicyClass& cls) {
  json j{{"object", "policy_class"},
         {"horizon", cls.horizon()},
         {"alphabet_size", cls.alphabet_size()},
         {"regime", to_string(cls.regime())}};
  if (cls.regime() == Regime::Dependent) {
    json members = json::array();
    for (const auto& m : cls.explicit_members()) members.push_back(json{{"steps", steps_to_json(m.steps())}});
    j["members"] = std::move(members);
  } else {
    j["base"] = steps_to_json(cls.base());
  }
  return j;
}

StepPolicy step_policy_from_json(const json& j) {
  const auto kind = string_field(j, "kind");
  if (kind == "context_free") {
    std::vector<double> row;
    row_from_json(field(j, "row"), row);
    return StepPolicy::context_free(std::move(row));
  }
  if (kind == "tabular") {
    const auto& rows = field(j, "rows");
    if (!rows.is_array() || rows.empty()) throw InvalidParam("tabular rows must be a nonempty array");
    std::vector<double> flat;
    std::size_t width = 0;
    for (const auto& r : rows) {
      const auto before = flat.size();
      row_from_json(r, flat);
      const auto w = flat.size() - before;
      if (width == 0) width = w;
      if (w != width) throw InvalidParam("tabular rows have unequal widths");
    }
    return StepPolicy::tabular(static_cast<int>(width), int_field(j, "min_prefix_length"),
                               int_field(j, "max_prefix_length"), std::move(flat));
  }
  throw InvalidParam("unknown step kind '" + kind + "'");
}

SeqPolicy seq_policy_from_json(const json& j) {
  if (string_field(j, "object") != "seq_policy") throw InvalidParam("not a seq_policy document");
  const int horizon = int_field(j, "horizon");
  const auto regime = string_field(j, "regime");
  auto steps = steps_from_json(field(j, "steps"));
  std::optional<SeqPolicy> policy;
  if (regime == "fully_shared") {
    if (steps.size() != 1) throw InvalidParam("fully_shared policy stores exactly one step");
    policy = SeqPolicy::shared(steps.front(), horizon);
  } else if (regime == "per_step") {
    policy = SeqPolicy(std::move(steps));
  } else {
    throw InvalidParam("unknown policy regime '" + regime + "'");
  }
  check_shape(j, policy->horizon(), policy->alphabet_size());
  return *policy;
}

PolicyClass policy_class_from_json(const json& j) {
  if (string_field(j, "object") != "policy_class") throw InvalidParam("not a policy_class document");
  const int horizon = int_field(j, "horizon");
  const auto regime = string_field(j, "regime");
  std::optional<PolicyClass> cls;
  if (regime == "decomposable") {
    cls = PolicyClass::decomposable(steps_from_json(field(j, "base")), horizon);
  } else if (regime == "fully_shared") {
    cls = PolicyClass::fully_shared(steps_from_json(field(j, "base")), horizon);
  } else if (regime == "dependent") {
    std::vector<SeqPolicy> members;
    const auto& ms = field(j, "members");
    if (!ms.is_array()) throw InvalidParam("members must be an array");
    for (const auto& m : ms) members.emplace_back(steps_from_json(field(m, "steps")));
    cls = PolicyClass::dependent(std::move(members));
  } else {
    throw InvalidParam("unknown class regime '" + regime + "'");
  }
  check_shape(j, cls->horizon(), cls->alphabet_size());
  return *cls;
}

std::string serialize(const SeqPolicy& policy) { return to_json(policy).dump(2) + "\n"; }
std::string serialize(const PolicyClass& cls) { return to_json(cls).dump(2) + "\n"; }

namespace {

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidParam(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

SeqPolicy parse_seq_policy(std::string_view text) { return seq_policy_from_json(parse_document(text)); }
PolicyClass parse_policy_class(std::string_view text) { return policy_class_from_json(parse_document(text)); }

}  // namespace arkl
