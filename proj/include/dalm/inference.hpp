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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dalm/embedding.hpp"
#include "dalm/store.hpp"

namespace dalm {

struct QueryPattern {
  std::optional<std::string> subject;
  std::optional<std::string> relation;
  std::optional<std::string> object;
  bool include_inherited = true;

  bool valid() const {
    return subject.has_value() || relation.has_value() || object.has_value();
  }
};

// Symmetric relations are stored in one canonical orientation and match both
// orientations here.
inline bool matches(const QueryPattern& p, const Crystal& c,
                    const MetaFiber& meta) {
  if (p.relation && c.relation != *p.relation) return false;
  if (meta.properties.is_symmetric(c.relation)) {
    if (p.subject && p.object) {
      return (*p.subject == c.subject && *p.object == c.object) ||
             (*p.subject == c.object && *p.object == c.subject);
    }
    if (p.subject) return *p.subject == c.subject || *p.subject == c.object;
    if (p.object) return *p.object == c.subject || *p.object == c.object;
    return true;
  }
  if (p.subject && c.subject != *p.subject) return false;
  if (p.object && c.object != *p.object) return false;
  return true;
}

// All crystals visible at d (effective fiber, or the local fiber when
// include_inherited is off) matching every present pattern field.
inline std::vector<TaggedCrystal> query(const QueryPattern& p,
                                        const DomainPath& d,
                                        const CrystalLibrary& lib) {
  std::vector<TaggedCrystal> source;
  if (p.include_inherited) {
    source = effective_fiber(d, lib);
  } else {
    for (const Crystal& c : lib.fiber(d)) {
      source.push_back(TaggedCrystal{c, false, d});
    }
  }
  std::vector<TaggedCrystal> out;
  for (auto& tc : source) {
    if (matches(p, tc.crystal, lib.meta())) out.push_back(std::move(tc));
  }
  std::sort(out.begin(), out.end(),
            [](const TaggedCrystal& a, const TaggedCrystal& b) {
              if (CrystalOrder{}(a.crystal, b.crystal)) return true;
              if (CrystalOrder{}(b.crystal, a.crystal)) return false;
              return a.origin < b.origin;
            });
  return out;
}

struct PerspectiveAnswer {
  DomainPath domain;
  double weight = 0.0;
  std::vector<TaggedCrystal> answers;
};

// One independently computed answer per domain whose activation exceeds ε.
// Each answer depends only on its domain's ancestor chain, so mutating
// incomparable fibers cannot change it.
inline std::vector<PerspectiveAnswer> multi_perspective_query(
    const QueryPattern& pattern, const CrystalLibrary& lib,
    const std::map<DomainPath, double>& activations, double epsilon) {
  std::vector<PerspectiveAnswer> out;
  for (const auto& [d, weight] : activations) {
    if (weight <= epsilon) continue;
    out.push_back(PerspectiveAnswer{d, weight, query(pattern, d, lib)});
  }
  std::sort(out.begin(), out.end(),
            [](const PerspectiveAnswer& a, const PerspectiveAnswer& b) {
              if (a.weight != b.weight) return a.weight > b.weight;
              return a.domain < b.domain;
            });
  return out;
}

inline nlohmann::json tagged_crystal_to_json(const TaggedCrystal& tc) {
  nlohmann::json j = crystal_to_json(tc.crystal);
  j["origin"] = tc.inherited ? "inherited" : "local";
  if (tc.inherited) j["from"] = tc.origin.str();
  return j;
}

inline nlohmann::json perspective_to_json(const PerspectiveAnswer& p) {
  nlohmann::json answers = nlohmann::json::array();
  for (const auto& tc : p.answers) answers.push_back(tagged_crystal_to_json(tc));
  return nlohmann::json{
      {"domain", p.domain.str()}, {"weight", p.weight}, {"answers", answers}};
}

inline nlohmann::json perspectives_to_json(
    const QueryPattern& pattern, const std::vector<PerspectiveAnswer>& answers) {
  nlohmann::json q = nlohmann::json::object();
  if (pattern.subject) q["s"] = *pattern.subject;
  if (pattern.relation) q["r"] = *pattern.relation;
  if (pattern.object) q["o"] = *pattern.object;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : answers) list.push_back(perspective_to_json(p));
  return nlohmann::json{{"query", q}, {"perspectives", list}};
}

struct BridgeCandidate {
  DomainPath a;
  DomainPath b;
  double similarity = 0.0;
};

// Cross-domain connection candidates: unordered pairs of registered,
// lattice-incomparable domains with embedding similarity 1/(1+dist) above θ,
// sorted by descending similarity. Comparable pairs are close by lattice
// structure and are never reported.
inline std::vector<BridgeCandidate> bridge_candidates(
    const CrystalLibrary& lib, const EmbeddingSpace& space, double theta) {
  std::vector<DomainPath> domains(lib.lattice().known().begin(),
                                  lib.lattice().known().end());
  for (const DomainPath& d : domains) space.domain_vec(d);  // MissingEmbedding
  std::vector<BridgeCandidate> out;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    for (std::size_t j = i + 1; j < domains.size(); ++j) {
      if (comparable(domains[i], domains[j])) continue;
      const double dist = distance(space.domain_vec(domains[i]),
                                   space.domain_vec(domains[j]), space.geometry);
      const double sim = 1.0 / (1.0 + dist);
      if (sim > theta) out.push_back({domains[i], domains[j], sim});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const BridgeCandidate& x, const BridgeCandidate& y) {
              if (x.similarity != y.similarity) return x.similarity > y.similarity;
              if (x.a != y.a) return x.a < y.a;
              return x.b < y.b;
            });
  return out;
}

}  // namespace dalm
