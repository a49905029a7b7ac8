// Copyright 2026 The DALM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dalm/domain.hpp"
#include "dalm/errors.hpp"

namespace dalm {

// Relation typing: monotone relations inherit into child domains,
// non-monotone relations are blocked at domain boundaries.
enum class Tau { monotone, nonmonotone };

inline std::string to_string(Tau t) {
  return t == Tau::monotone ? "monotone" : "nonmonotone";
}

struct TauTable {
  std::map<std::string, Tau> global;
  std::map<std::pair<std::string, DomainPath>, Tau> conditioned;
  std::map<std::string, double> soft;
  double threshold = 0.5;

  bool operator==(const TauTable&) const = default;
};

// Structural flags per relation, stored as name sets.
struct RelationProperties {
  std::set<std::string> acyclic;
  std::set<std::string> symmetric;
  std::set<std::string> functional;
  std::set<std::string> causal;

  bool is_acyclic(const std::string& r) const { return acyclic.count(r) > 0; }
  bool is_symmetric(const std::string& r) const {
    return symmetric.count(r) > 0;
  }
  bool is_functional(const std::string& r) const {
    return functional.count(r) > 0;
  }
  bool is_causal(const std::string& r) const { return causal.count(r) > 0; }

  bool operator==(const RelationProperties&) const = default;
};

// Unordered pair of relations declared mutually contradictory on the same
// (subject, object, domain). Stored with the lexicographically smaller name
// first.
struct ExclusionRule {
  std::string a;
  std::string b;

  ExclusionRule(std::string r_a, std::string r_b) {
    if (r_b < r_a) std::swap(r_a, r_b);
    a = std::move(r_a);
    b = std::move(r_b);
  }

  bool covers(const std::string& x, const std::string& y) const {
    return (a == x && b == y) || (a == y && b == x);
  }

  auto operator<=>(const ExclusionRule&) const = default;
};

// The @Meta@Logic data bundle: τ tables, relation structural properties,
// and contradiction axioms. Everything here is data, not code.
struct MetaFiber {
  TauTable tau;
  RelationProperties properties;
  std::set<ExclusionRule> exclusions;
  double lambda_tau = 1.0;

  bool declared(const std::string& r) const { return tau.global.count(r) > 0; }

  Tau global_tau(const std::string& r) const {
    auto it = tau.global.find(r);
    if (it == tau.global.end()) {
      throw UnknownRelation("relation \"" + r + "\" is not declared");
    }
    return it->second;
  }

  std::vector<std::string> relation_names() const {
    std::vector<std::string> names;
    names.reserve(tau.global.size());
    for (const auto& [name, _] : tau.global) names.push_back(name);
    return names;
  }

  bool operator==(const MetaFiber&) const = default;
};

// Effective τ for inheritance from `from` into its descendant `to`:
// conditioned entries at either endpoint are consulted (falling back to the
// global entry) and the more restrictive classification governs.
inline Tau tau_effective(const std::string& r, const DomainPath& from,
                         const DomainPath& to, const MetaFiber& meta) {
  const Tau global = meta.global_tau(r);
  auto lookup = [&](const DomainPath& d) {
    auto it = meta.tau.conditioned.find({r, d});
    return it == meta.tau.conditioned.end() ? global : it->second;
  };
  if (lookup(from) == Tau::nonmonotone || lookup(to) == Tau::nonmonotone) {
    return Tau::nonmonotone;
  }
  return Tau::monotone;
}

// Thresholding of a soft score: monotone iff score > threshold (strict).
inline Tau tau_from_soft(double score, double threshold) {
  if (score < 0.0 || score > 1.0) {
    throw OutOfRange("soft score " + std::to_string(score) +
                     " outside [0, 1]");
  }
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw OutOfRange("threshold " + std::to_string(threshold) +
                     " outside (0, 1)");
  }
  return score > threshold ? Tau::monotone : Tau::nonmonotone;
}

// λ_τ · Σ_r (soft(r) − hard01(r))² over relations with a soft score,
// where hard01 maps monotone→1 and nonmonotone→0.
inline double tau_regularizer(const MetaFiber& meta) {
  if (meta.tau.soft.empty()) {
    throw MissingSoftTable("no soft τ scores configured");
  }
  double sum = 0.0;
  for (const auto& [r, score] : meta.tau.soft) {
    const double hard = meta.global_tau(r) == Tau::monotone ? 1.0 : 0.0;
    const double d = score - hard;
    sum += d * d;
  }
  return meta.lambda_tau * sum;
}

namespace detail {

inline bool valid_relation_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!((c >= 'a' && c <= 'z') || c == '_')) return false;
  }
  return true;
}

inline Tau parse_tau(const std::string& text, const std::string& where) {
  if (text == "monotone") return Tau::monotone;
  if (text == "nonmonotone") return Tau::nonmonotone;
  throw FormatError("tau must be \"monotone\" or \"nonmonotone\"", where);
}

}  // namespace detail

// Ships the hard τ assignments of the core predicate family. `causes` is not
// classified by the hard table; it is treated as monotone here and flagged
// causal (but not acyclic) so that reversal of causal chains is reported as
// causal_reversal rather than as a generic cycle.
inline MetaFiber default_meta_fiber() {
  MetaFiber meta;
  auto add = [&](const std::string& name, Tau t) { meta.tau.global[name] = t; };
  add("is_a", Tau::monotone);
  add("part_of", Tau::monotone);
  add("requires", Tau::monotone);
  add("enables", Tau::monotone);
  add("causes", Tau::monotone);
  add("contrasts_with", Tau::nonmonotone);
  add("analogous_to", Tau::nonmonotone);
  meta.properties.acyclic = {"is_a", "part_of", "requires", "enables"};
  meta.properties.symmetric = {"contrasts_with", "analogous_to"};
  meta.properties.causal = {"causes"};
  return meta;
}

// Meta-fiber config document:
//   {"relations": {name: {"tau": ..., "soft"?: x, "acyclic"?: b,
//                         "symmetric"?: b, "functional"?: b, "causal"?: b}},
//    "conditioned": [{"r": ..., "d": ..., "tau": ...}],
//    "exclusions": [[r_a, r_b]],
//    "lambda_tau": x, "threshold": x}
inline MetaFiber meta_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw FormatError("meta config must be an object");
  static const std::set<std::string> top_keys = {
      "relations", "conditioned", "exclusions", "lambda_tau", "threshold"};
  for (const auto& [key, _] : doc.items()) {
    if (!top_keys.count(key)) {
      throw FormatError("unknown key \"" + key + "\"", "meta config");
    }
  }
  if (!doc.contains("relations") || !doc["relations"].is_object()) {
    throw FormatError("meta config requires a \"relations\" object");
  }

  MetaFiber meta;
  static const std::set<std::string> rel_keys = {
      "tau", "soft", "acyclic", "symmetric", "functional", "causal"};
  for (const auto& [name, entry] : doc["relations"].items()) {
    if (!detail::valid_relation_name(name)) {
      throw FormatError("relation name must match [a-z_]+", name);
    }
    if (!entry.is_object() || !entry.contains("tau")) {
      throw FormatError("relation entry requires \"tau\"", name);
    }
    for (const auto& [key, _] : entry.items()) {
      if (!rel_keys.count(key)) {
        throw FormatError("unknown key \"" + key + "\"", name);
      }
    }
    meta.tau.global[name] =
        detail::parse_tau(entry["tau"].get<std::string>(), name);
    if (entry.contains("soft")) {
      const double s = entry["soft"].get<double>();
      if (s < 0.0 || s > 1.0) {
        throw InvalidScore("soft score " + std::to_string(s) +
                           " outside [0, 1] for relation " + name);
      }
      meta.tau.soft[name] = s;
    }
    auto flag = [&](const char* key) {
      return entry.contains(key) && entry[key].get<bool>();
    };
    if (flag("acyclic")) meta.properties.acyclic.insert(name);
    if (flag("symmetric")) meta.properties.symmetric.insert(name);
    if (flag("functional")) meta.properties.functional.insert(name);
    if (flag("causal")) meta.properties.causal.insert(name);
    if (meta.properties.is_acyclic(name) && meta.properties.is_symmetric(name)) {
      throw FormatError("relation cannot be both symmetric and acyclic", name);
    }
  }

  if (doc.contains("conditioned")) {
    for (const auto& entry : doc["conditioned"]) {
      const std::string r = entry.at("r").get<std::string>();
      if (!meta.declared(r)) {
        throw UnknownRelationReference("conditioned entry references \"" + r +
                                       "\"");
      }
      const DomainPath d = DomainPath::parse(entry.at("d").get<std::string>());
      const Tau t = detail::parse_tau(entry.at("tau").get<std::string>(),
                                      r + " @ " + d.str());
      if (!meta.tau.conditioned.emplace(std::make_pair(r, d), t).second) {
        throw DuplicateRelation("duplicate conditioned entry for " + r +
                                " at " + d.str());
      }
    }
  }

  if (doc.contains("exclusions")) {
    for (const auto& entry : doc["exclusions"]) {
      if (!entry.is_array() || entry.size() != 2) {
        throw FormatError("exclusion must be a pair of relation names");
      }
      const std::string a = entry[0].get<std::string>();
      const std::string b = entry[1].get<std::string>();
      if (a == b) throw FormatError("exclusion pair must be distinct", a);
      if (!meta.declared(a)) {
        throw UnknownRelationReference("exclusion references \"" + a + "\"");
      }
      if (!meta.declared(b)) {
        throw UnknownRelationReference("exclusion references \"" + b + "\"");
      }
      meta.exclusions.insert(ExclusionRule(a, b));
    }
  }

  if (doc.contains("lambda_tau")) {
    meta.lambda_tau = doc["lambda_tau"].get<double>();
    if (meta.lambda_tau < 0.0) {
      throw InvalidScore("lambda_tau must be non-negative");
    }
  }
  if (doc.contains("threshold")) {
    meta.tau.threshold = doc["threshold"].get<double>();
    if (meta.tau.threshold <= 0.0 || meta.tau.threshold >= 1.0) {
      throw InvalidScore("threshold must lie in (0, 1)");
    }
  }
  return meta;
}

inline MetaFiber load_meta_fiber(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("meta config is not valid JSON: ") +
                      e.what());
  }
  try {
    return meta_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed meta config: ") + e.what());
  }
}

inline nlohmann::json meta_to_json(const MetaFiber& meta) {
  nlohmann::json relations = nlohmann::json::object();
  for (const auto& [name, t] : meta.tau.global) {
    nlohmann::json entry;
    entry["tau"] = to_string(t);
    if (auto it = meta.tau.soft.find(name); it != meta.tau.soft.end()) {
      entry["soft"] = it->second;
    }
    if (meta.properties.is_acyclic(name)) entry["acyclic"] = true;
    if (meta.properties.is_symmetric(name)) entry["symmetric"] = true;
    if (meta.properties.is_functional(name)) entry["functional"] = true;
    if (meta.properties.is_causal(name)) entry["causal"] = true;
    relations[name] = entry;
  }
  nlohmann::json conditioned = nlohmann::json::array();
  for (const auto& [key, t] : meta.tau.conditioned) {
    conditioned.push_back(
        {{"r", key.first}, {"d", key.second.str()}, {"tau", to_string(t)}});
  }
  nlohmann::json exclusions = nlohmann::json::array();
  for (const auto& rule : meta.exclusions) {
    exclusions.push_back({rule.a, rule.b});
  }
  return nlohmann::json{{"relations", relations},
                        {"conditioned", conditioned},
                        {"exclusions", exclusions},
                        {"lambda_tau", meta.lambda_tau},
                        {"threshold", meta.tau.threshold}};
}

}  // namespace dalm
