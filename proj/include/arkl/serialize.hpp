#pragma once

// Text serialization of policies and classes.
//
// JSON documents with integer shape fields and probabilities written as
// decimal strings with 17 significant digits, which round-trip every double
// bit-exactly:
//
//   {"object": "seq_policy", "horizon": H, "alphabet_size": d,
//    "regime": "per_step" | "fully_shared", "steps": [STEP, ...]}
//   {"object": "policy_class", "horizon": H, "alphabet_size": d,
//    "regime": "decomposable" | "fully_shared", "base": [STEP, ...]}
//   {"object": "policy_class", ..., "regime": "dependent",
//    "members": [{"steps": [STEP, ...]}, ...]}
//
//   STEP = {"kind": "context_free", "row": ["0.25", ...]}
//        | {"kind": "tabular", "min_prefix_length": a, "max_prefix_length": b,
//           "rows": [["..", ..], ...]}
//
// A fully-shared sequence policy stores its single step once.

#include <string>
#include <string_view>

#include "json.hpp"

#include "arkl/core.hpp"

namespace arkl {

/// "%.17g" rendering; strtod of the result recovers the same double.
std::string format_real(double value);
double parse_real(std::string_view text);

nlohmann::json to_json(const StepPolicy& step);
nlohmann::json to_json(const SeqPolicy& policy);
nlohmann::json to_json(const PolicyClass& cls);

StepPolicy step_policy_from_json(const nlohmann::json& j);
SeqPolicy seq_policy_from_json(const nlohmann::json& j);
PolicyClass policy_class_from_json(const nlohmann::json& j);

std::string serialize(const SeqPolicy& policy);
std::string serialize(const PolicyClass& cls);
SeqPolicy parse_seq_policy(std::string_view text);
PolicyClass parse_policy_class(std::string_view text);

}  // namespace arkl
