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

#include <algorithm>
#include <deque>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dalm/crystal.hpp"
#include "dalm/domain.hpp"
#include "dalm/errors.hpp"
#include "dalm/meta.hpp"

namespace dalm {

using CrystalSet = std::set<Crystal, CrystalOrder>;

struct Fiber {
  DomainPath domain;
  CrystalSet crystals;
};

enum class ValidationScope { local, effective };

enum class RejectReason { none, cycle, causal_reversal, contradiction, schema };

inline std::string to_string(RejectReason r) {
  switch (r) {
    case RejectReason::none: return "none";
    case RejectReason::cycle: return "cycle";
    case RejectReason::causal_reversal: return "causal_reversal";
    case RejectReason::contradiction: return "contradiction";
    case RejectReason::schema: return "schema";
  }
  return "none";
}

// Remediation record for a within-fiber contradiction: the domain likely
// conflates two perspectives and should be split into fresh children.
struct DomainSplitSuggestion {
  DomainPath domain;
  Crystal existing;
  Crystal candidate;
  DomainPath child_a;
  DomainPath child_b;
};

struct ValidationReport {
  bool accepted = false;
  RejectReason reason = RejectReason::none;
  std::optional<DomainSplitSuggestion> split_suggestion;
  std::string details;

  static ValidationReport ok(std::string details = "") {
    ValidationReport r;
    r.accepted = true;
    r.details = std::move(details);
    return r;
  }

  static ValidationReport reject(RejectReason reason, std::string details) {
    ValidationReport r;
    r.accepted = false;
    r.reason = reason;
    r.details = std::move(details);
    return r;
  }
};

// The single persistent store: a domain lattice, the meta fiber, and one
// fiber of validated crystals per domain. Provisional crystals never live
// inside fibers; they sit in a sidecar until resubmitted through insert().
class CrystalLibrary {
 public:
  CrystalLibrary() : meta_(default_meta_fiber()) {}
  explicit CrystalLibrary(MetaFiber meta) : meta_(std::move(meta)) {}

  DomainLattice& lattice() { return lattice_; }
  const DomainLattice& lattice() const { return lattice_; }

  MetaFiber& meta() { return meta_; }
  const MetaFiber& meta() const { return meta_; }

  std::map<DomainPath, Fiber>& fibers() { return fibers_; }
  const std::map<DomainPath, Fiber>& fibers() const { return fibers_; }

  const CrystalSet& fiber(const DomainPath& d) const {
    static const CrystalSet empty;
    auto it = fibers_.find(d);
    return it == fibers_.end() ? empty : it->second.crystals;
  }

  void place_validated(Crystal c) {
    lattice_.register_domain(c.domain);
    c.status = CrystalStatus::validated;
    auto& f = fibers_[c.domain];
    f.domain = c.domain;
    f.crystals.insert(std::move(c));
  }

  std::vector<Crystal>& provisional() { return provisional_; }
  const std::vector<Crystal>& provisional() const { return provisional_; }

  std::size_t crystal_count() const {
    std::size_t n = 0;
    for (const auto& [_, f] : fibers_) n += f.crystals.size();
    return n;
  }

  std::set<std::string> all_concepts() const {
    std::set<std::string> out;
    for (const auto& [_, f] : fibers_) {
      for (const auto& c : f.crystals) {
        out.insert(c.subject);
        out.insert(c.object);
      }
    }
    return out;
  }

  std::set<std::string> used_relations() const {
    std::set<std::string> out;
    for (const auto& [_, f] : fibers_) {
      for (const auto& c : f.crystals) out.insert(c.relation);
    }
    return out;
  }

  bool auto_register_domains = true;

 private:
  DomainLattice lattice_;
  MetaFiber meta_;
  std::map<DomainPath, Fiber> fibers_;
  std::vector<Crystal> provisional_;
};

// A crystal visible at some domain, either scoped there or inherited from a
// strict ancestor through a monotone relation.
struct TaggedCrystal {
  Crystal crystal;
  bool inherited = false;
  DomainPath origin;
};

// F(d) plus every ancestor crystal whose relation inherits monotonically from
// its home domain into d. A local crystal shadows an inherited exact
// duplicate; among ancestors, the nearest origin wins.
inline std::vector<TaggedCrystal> effective_fiber(const DomainPath& d,
                                                  const CrystalLibrary& lib) {
  using Key = std::tuple<std::string, std::string, std::string, bool>;
  std::map<Key, TaggedCrystal> best;
  auto key_of = [](const Crystal& c) {
    return Key{c.relation, c.subject, c.object, c.negated};
  };
  for (const Crystal& c : lib.fiber(d)) {
    best[key_of(c)] = TaggedCrystal{c, false, d};
  }
  for (const DomainPath& a : d.ancestors()) {  // nearest first
    for (const Crystal& c : lib.fiber(a)) {
      if (tau_effective(c.relation, a, d, lib.meta()) != Tau::monotone)
        continue;
      auto [it, fresh] = best.emplace(key_of(c), TaggedCrystal{c, true, a});
      (void)it;
      (void)fresh;  // existing local or nearer entry wins
    }
  }
  std::vector<TaggedCrystal> out;
  out.reserve(best.size());
  for (auto& [_, tc] : best) out.push_back(std::move(tc));
  return out;
}

inline std::set<std::string> concepts_of(const std::vector<TaggedCrystal>& fiber) {
  std::set<std::string> out;
  for (const auto& tc : fiber) {
    out.insert(tc.crystal.subject);
    out.insert(tc.crystal.object);
  }
  return out;
}

inline std::set<std::string> effective_concepts(const DomainPath& d,
                                                const CrystalLibrary& lib) {
  return concepts_of(effective_fiber(d, lib));
}

namespace detail {

// Symmetric relations store one orientation: lexicographically smaller
// subject first.
inline Crystal canonical_form(Crystal c, const MetaFiber& meta) {
  if (meta.properties.is_symmetric(c.relation) && c.object < c.subject) {
    std::swap(c.subject, c.object);
  }
  return c;
}

// Directed path from `from` to `to` along edges subject→object of the given
// relations. The empty path counts, so from == to is reachable.
inline bool path_exists(const std::vector<const Crystal*>& scope,
                        const std::set<std::string>& relations,
                        const std::string& from, const std::string& to) {
  if (from == to) return true;
  std::map<std::string, std::vector<const std::string*>> adjacency;
  for (const Crystal* c : scope) {
    if (c->negated) continue;
    if (!relations.count(c->relation)) continue;
    adjacency[c->subject].push_back(&c->object);
  }
  std::set<std::string> visited{from};
  std::deque<const std::string*> frontier;
  if (auto it = adjacency.find(from); it != adjacency.end()) {
    for (const auto* n : it->second) frontier.push_back(n);
  }
  while (!frontier.empty()) {
    const std::string& node = *frontier.front();
    frontier.pop_front();
    if (node == to) return true;
    if (!visited.insert(node).second) continue;
    if (auto it = adjacency.find(node); it != adjacency.end()) {
      for (const auto* n : it->second) frontier.push_back(n);
    }
  }
  return false;
}

inline std::pair<DomainPath, DomainPath> fresh_split_children(
    const DomainPath& d, const DomainLattice& lattice) {
  for (int n = 1;; n += 2) {
    DomainPath a = d.child("split_" + std::to_string(n));
    DomainPath b = d.child("split_" + std::to_string(n + 1));
    if (!lattice.contains(a) && !lattice.contains(b)) return {a, b};
  }
}

}  // namespace detail

// Write-time falsification: checks a candidate against its validation scope
// without mutating anything. Check order: cycle, causal reversal,
// contradiction. With exclude_self set, one stored copy of the candidate is
// ignored while gathering the scope (used by the fixed-point re-validation).
inline ValidationReport validate(const Crystal& raw,
                                 const CrystalLibrary& lib,
                                 ValidationScope scope = ValidationScope::local,
                                 bool exclude_self = false) {
  if (!lib.meta().declared(raw.relation)) {
    throw UnknownRelation("relation \"" + raw.relation + "\" is not declared");
  }
  const Crystal c = detail::canonical_form(raw, lib.meta());
  if (c.subject.empty() || c.object.empty()) {
    return ValidationReport::reject(RejectReason::schema,
                                    "subject and object must be non-empty");
  }

  std::vector<TaggedCrystal> effective;
  std::vector<const Crystal*> scope_crystals;
  bool excluded = false;
  auto add = [&](const Crystal& k) {
    if (exclude_self && !excluded && k.same_tuple(c)) {
      excluded = true;
      return;
    }
    scope_crystals.push_back(&k);
  };
  if (scope == ValidationScope::local) {
    for (const Crystal& k : lib.fiber(c.domain)) add(k);
  } else {
    effective = effective_fiber(c.domain, lib);
    for (const TaggedCrystal& tc : effective) add(tc.crystal);
  }

  for (const Crystal* k : scope_crystals) {
    if (k->same_tuple(c)) return ValidationReport::ok("duplicate");
  }

  if (!c.negated) {
    if (lib.meta().properties.is_acyclic(c.relation) &&
        detail::path_exists(scope_crystals, {c.relation}, c.object,
                            c.subject)) {
      return ValidationReport::reject(
          RejectReason::cycle, "inserting " + c.relation + "(" + c.subject +
                                   ", " + c.object + ") closes a cycle in " +
                                   c.domain.str());
    }
    if (lib.meta().properties.is_causal(c.relation) &&
        detail::path_exists(scope_crystals, lib.meta().properties.causal,
                            c.object, c.subject)) {
      return ValidationReport::reject(
          RejectReason::causal_reversal,
          "a causal chain " + c.object + " → " + c.subject +
              " is already established in " + c.domain.str());
    }
  }

  const Crystal* offender = nullptr;
  std::string how;
  for (const Crystal* k : scope_crystals) {
    if (k->same_tuple_ignoring_negation(c) && k->negated != c.negated) {
      offender = k;
      how = "negation conflict";
      break;
    }
    if (!c.negated && !k->negated &&
        lib.meta().properties.is_functional(c.relation) &&
        k->relation == c.relation && k->subject == c.subject &&
        k->object != c.object) {
      offender = k;
      how = "functional conflict: " + c.relation + "(" + c.subject +
            ") already maps to " + k->object;
      break;
    }
    if (!c.negated && !k->negated && k->subject == c.subject &&
        k->object == c.object) {
      bool excluded_pair = false;
      for (const auto& rule : lib.meta().exclusions) {
        if (rule.covers(c.relation, k->relation)) {
          excluded_pair = true;
          break;
        }
      }
      if (excluded_pair) {
        offender = k;
        how = "exclusion conflict with " + k->relation;
        break;
      }
    }
  }
  if (offender != nullptr) {
    auto report = ValidationReport::reject(
        RejectReason::contradiction,
        how + "; existing: " + crystal_to_json(*offender).dump());
    if (offender->domain == c.domain) {
      auto [child_a, child_b] =
          detail::fresh_split_children(c.domain, lib.lattice());
      report.split_suggestion = DomainSplitSuggestion{
          c.domain, *offender, c, std::move(child_a), std::move(child_b)};
    }
    return report;
  }
  return ValidationReport::ok();
}

// Validates and, on acceptance, commits the crystal with validated status.
// Rejected candidates leave the library bit-identical.
inline ValidationReport insert(const Crystal& candidate, CrystalLibrary& lib,
                               ValidationScope scope = ValidationScope::local) {
  if (!lib.lattice().contains(candidate.domain) &&
      !lib.auto_register_domains) {
    throw UnregisteredDomain("domain " + candidate.domain.str() +
                             " is not registered");
  }
  ValidationReport report = validate(candidate, lib, scope);
  if (report.accepted && report.details != "duplicate") {
    lib.place_validated(detail::canonical_form(candidate, lib.meta()));
  }
  return report;
}

struct RejectedRecord {
  std::size_t line = 0;
  Crystal crystal;
  ValidationReport report;
};

struct IngestSummary {
  std::size_t accepted = 0;
  std::map<RejectReason, std::size_t> rejected;
  std::vector<RejectedRecord> rejected_records;
  std::vector<DomainSplitSuggestion> suggestions;

  std::size_t rejected_total() const {
    std::size_t n = 0;
    for (const auto& [_, count] : rejected) n += count;
    return n;
  }
};

// Applies insert() in stream order. Lines are JSONL: crystal records plus
// {"domain": "@…"} declaration records. Malformed lines raise ParseError;
// records that fail the gate are reported, never silently dropped.
inline IngestSummary bulk_ingest(std::istream& in, CrystalLibrary& lib,
                                 ValidationScope scope = ValidationScope::local) {
  IngestSummary summary;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (j.is_object() && j.contains("domain") && j.size() == 1) {
      try {
        lib.lattice().register_domain(
            DomainPath::parse(j["domain"].get<std::string>()));
      } catch (const Error& e) {
        throw ParseError(e.what(), line_no);
      }
      continue;
    }
    Crystal c;
    try {
      c = crystal_from_json(j, "line " + std::to_string(line_no));
    } catch (const FormatError& e) {
      throw ParseError(e.what(), line_no);
    }
    ValidationReport report;
    try {
      report = insert(c, lib, scope);
    } catch (const Error& e) {
      report = ValidationReport::reject(RejectReason::schema, e.what());
    }
    if (report.accepted) {
      ++summary.accepted;
    } else {
      ++summary.rejected[report.reason];
      if (report.split_suggestion) {
        summary.suggestions.push_back(*report.split_suggestion);
      }
      summary.rejected_records.push_back({line_no, std::move(c), std::move(report)});
    }
  }
  return summary;
}

// The library is a fixed point of the gate: every stored crystal re-validates
// against its own fiber with itself removed.
inline bool is_gate_fixed_point(const CrystalLibrary& lib,
                                ValidationScope scope = ValidationScope::local,
                                std::vector<std::string>* failures = nullptr) {
  bool ok = true;
  for (const auto& [_, f] : lib.fibers()) {
    for (const Crystal& c : f.crystals) {
      ValidationReport report = validate(c, lib, scope, /*exclude_self=*/true);
      if (!report.accepted) {
        ok = false;
        if (failures != nullptr) {
          failures->push_back(crystal_to_json(c).dump() + " -> " +
                              to_string(report.reason) + ": " + report.details);
        }
      }
    }
  }
  return ok;
}

// Canonical JSONL serialization: domain declarations for every registered
// domain (so empty domains survive a round trip), then fiber crystals, then
// the provisional sidecar, each group in canonical order. Byte-deterministic.
inline std::string save_crystals(const CrystalLibrary& lib) {
  std::string out;
  for (const DomainPath& d : lib.lattice().known()) {
    if (d.is_top()) continue;
    out += nlohmann::json{{"domain", d.str()}}.dump();
    out += '\n';
  }
  for (const auto& [_, f] : lib.fibers()) {
    for (const Crystal& c : f.crystals) {
      out += crystal_to_json(c).dump();
      out += '\n';
    }
  }
  std::vector<Crystal> sidecar = lib.provisional();
  std::sort(sidecar.begin(), sidecar.end(), [](const Crystal& a, const Crystal& b) {
    return CrystalOrder{}(a, b) ||
           (!CrystalOrder{}(b, a) && a.provenance < b.provenance);
  });
  for (Crystal& c : sidecar) {
    c.status = CrystalStatus::provisional;
    out += crystal_to_json(c).dump();
    out += '\n';
  }
  return out;
}

inline std::string save_meta(const MetaFiber& meta) {
  return meta_to_json(meta).dump(2) + "\n";
}

// Restores a persisted library. Validated records are placed directly (a
// saved library is a gate fixed point by construction); provisional records
// go to the sidecar. Structural problems raise FormatError.
inline CrystalLibrary load_library(const std::string& crystals_jsonl,
                                   const MetaFiber& meta) {
  CrystalLibrary lib(meta);
  std::istringstream in(crystals_jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), where);
    }
    if (j.is_object() && j.contains("domain") && j.size() == 1) {
      lib.lattice().register_domain(
          DomainPath::parse(j["domain"].get<std::string>()));
      continue;
    }
    Crystal c = crystal_from_json(j, where);
    if (!lib.meta().declared(c.relation)) {
      throw FormatError("relation \"" + c.relation + "\" is not declared",
                        where);
    }
    c = detail::canonical_form(c, lib.meta());
    if (c.status == CrystalStatus::provisional) {
      lib.lattice().register_domain(c.domain);
      lib.provisional().push_back(std::move(c));
    } else {
      lib.place_validated(std::move(c));
    }
  }
  return lib;
}

inline CrystalLibrary load_library(const std::string& crystals_jsonl,
                                   const std::string& meta_json) {
  return load_library(crystals_jsonl, load_meta_fiber(meta_json));
}

}  // namespace dalm
