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

#include <string>
#include <tuple>

#include <json.hpp>

#include "dalm/domain.hpp"
#include "dalm/errors.hpp"

namespace dalm {

enum class CrystalStatus { validated, provisional };

inline std::string to_string(CrystalStatus s) {
  return s == CrystalStatus::validated ? "validated" : "provisional";
}

// One knowledge unit: ⟨subject, relation@domain, object⟩ plus a negation
// flag. Identity ignores status and provenance.
struct Crystal {
  std::string subject;
  std::string relation;
  DomainPath domain;
  std::string object;
  bool negated = false;
  CrystalStatus status = CrystalStatus::validated;
  std::string provenance;

  auto identity() const {
    return std::tie(subject, relation, domain, object, negated);
  }

  bool same_tuple(const Crystal& other) const {
    return identity() == other.identity();
  }

  bool same_tuple_ignoring_negation(const Crystal& other) const {
    return std::tie(subject, relation, domain, object) ==
           std::tie(other.subject, other.relation, other.domain, other.object);
  }

  bool operator==(const Crystal&) const = default;
};

inline Crystal make_crystal(std::string subject, std::string relation,
                            DomainPath domain, std::string object,
                            bool negated = false) {
  Crystal c;
  c.subject = std::move(subject);
  c.relation = std::move(relation);
  c.domain = std::move(domain);
  c.object = std::move(object);
  c.negated = negated;
  return c;
}

// Canonical ordering used everywhere a crystal set is iterated or persisted:
// (domain, relation, subject, object, negated). Status and provenance do not
// participate, so they cannot create duplicate keys.
struct CrystalOrder {
  bool operator()(const Crystal& a, const Crystal& b) const {
    return std::tie(a.domain, a.relation, a.subject, a.object, a.negated) <
           std::tie(b.domain, b.relation, b.subject, b.object, b.negated);
  }
};

// JSONL record: {"s":…, "r":…, "d":…, "o":…, "neg"?:bool, "status"?:…,
// "prov"?:…}. Defaults (neg=false, status=validated, empty prov) are omitted
// on output to keep the canonical byte form minimal.
inline nlohmann::json crystal_to_json(const Crystal& c) {
  nlohmann::json j;
  j["s"] = c.subject;
  j["r"] = c.relation;
  j["d"] = c.domain.str();
  j["o"] = c.object;
  if (c.negated) j["neg"] = true;
  if (c.status == CrystalStatus::provisional) j["status"] = "provisional";
  if (!c.provenance.empty()) j["prov"] = c.provenance;
  return j;
}

inline Crystal crystal_from_json(const nlohmann::json& j,
                                 const std::string& where = "") {
  if (!j.is_object()) throw FormatError("crystal record must be an object", where);
  static const std::set<std::string> keys = {"s", "r", "d", "o",
                                             "neg", "status", "prov"};
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) {
      throw FormatError("unknown key \"" + key + "\" in crystal record", where);
    }
  }
  for (const char* key : {"s", "r", "d", "o"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw FormatError(std::string("crystal record requires string \"") +
                            key + "\"",
                        where);
    }
  }
  Crystal c;
  c.subject = j["s"].get<std::string>();
  c.relation = j["r"].get<std::string>();
  c.domain = DomainPath::parse(j["d"].get<std::string>());
  c.object = j["o"].get<std::string>();
  if (j.contains("neg")) {
    if (!j["neg"].is_boolean()) throw FormatError("\"neg\" must be a boolean", where);
    c.negated = j["neg"].get<bool>();
  }
  if (j.contains("status")) {
    const std::string s = j["status"].get<std::string>();
    if (s == "validated") {
      c.status = CrystalStatus::validated;
    } else if (s == "provisional") {
      c.status = CrystalStatus::provisional;
    } else {
      throw FormatError("status must be \"validated\" or \"provisional\"",
                        where);
    }
  }
  if (j.contains("prov")) c.provenance = j["prov"].get<std::string>();
  if (c.subject.empty() || c.object.empty()) {
    throw FormatError("subject and object must be non-empty", where);
  }
  return c;
}

}  // namespace dalm
