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

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dalm/errors.hpp"
#include "dalm/store.hpp"
#include "dalm/vecmath.hpp"

namespace dalm {

enum class Geometry { euclidean, poincare };

inline std::string to_string(Geometry g) {
  return g == Geometry::euclidean ? "euclidean" : "poincare";
}

inline Geometry geometry_from_string(const std::string& s) {
  if (s == "euclidean") return Geometry::euclidean;
  if (s == "poincare") return Geometry::poincare;
  throw FormatError("geometry must be \"euclidean\" or \"poincare\"", s);
}

// Poincaré vectors are clipped to stay strictly inside the unit ball.
inline constexpr double kBallRadius = 1.0 - 1e-5;

// d(u, v) = arcosh(1 + 2‖u−v‖² / ((1−‖u‖²)(1−‖v‖²))) on the open unit ball.
inline double poincare_distance(const Vec& u, const Vec& v) {
  check_same_dim(u, v);
  const double su = norm_sq(u);
  const double sv = norm_sq(v);
  if (su >= 1.0 || sv >= 1.0) {
    throw OutsideBall("poincare_distance requires vectors inside the unit ball");
  }
  const double d2 = sq_dist(u, v);
  const double z = 1.0 + 2.0 * d2 / ((1.0 - su) * (1.0 - sv));
  return std::acosh(std::max(1.0, z));
}

inline double distance(const Vec& u, const Vec& v, Geometry geometry) {
  if (geometry == Geometry::poincare) return poincare_distance(u, v);
  check_same_dim(u, v);
  return euclidean_distance(u, v);
}

// Margin triplet hinge: max(0, d(e1, e2) − d(e1, e3) + γ).
inline double lattice_loss(const Vec& e1, const Vec& e2, const Vec& e3,
                           double gamma, Geometry geometry) {
  const double pulled = distance(e1, e2, geometry);
  const double pushed = distance(e1, e3, geometry);
  return std::max(0.0, pulled - pushed + gamma);
}

// Seeded collection of domain/concept/relation vectors, relation-domain
// interaction vectors, and concept biases.
struct EmbeddingSpace {
  Geometry geometry = Geometry::euclidean;
  std::size_t dim = 32;
  std::map<DomainPath, Vec> domains;
  std::map<std::string, Vec> concepts;
  std::map<std::string, Vec> relations;
  std::map<std::string, Vec> interactions;  // v_r
  std::map<std::string, double> bias;       // b_c
  std::uint64_t seed = 0;

  const Vec& domain_vec(const DomainPath& d) const {
    auto it = domains.find(d);
    if (it == domains.end()) {
      throw MissingEmbedding("no embedding for domain " + d.str());
    }
    return it->second;
  }

  const Vec& concept_vec(const std::string& c) const {
    auto it = concepts.find(c);
    if (it == concepts.end()) {
      throw MissingEmbedding("no embedding for concept " + c);
    }
    return it->second;
  }

  const Vec& relation_vec(const std::string& r) const {
    auto it = relations.find(r);
    if (it == relations.end()) {
      throw MissingEmbedding("no embedding for relation " + r);
    }
    return it->second;
  }

  const Vec& interaction_vec(const std::string& r) const {
    auto it = interactions.find(r);
    if (it == interactions.end()) {
      throw MissingEmbedding("no interaction vector for relation " + r);
    }
    return it->second;
  }

  double concept_bias(const std::string& c) const {
    auto it = bias.find(c);
    if (it == bias.end()) {
      throw MissingEmbedding("no bias for concept " + c);
    }
    return it->second;
  }

  bool covers_all_domains(const DomainLattice& lattice) const {
    for (const DomainPath& d : lattice.known()) {
      if (!domains.count(d)) return false;
    }
    return true;
  }
};

// Domain-contextualized relation reading: h_r + (e_d ⊙ v_r). A zero
// interaction vector or a zero domain vector leaves the base relation intact.
inline Vec relation_in_domain(const std::string& r, const DomainPath& d,
                              const EmbeddingSpace& space) {
  const Vec& h_r = space.relation_vec(r);
  const Vec& e_d = space.domain_vec(d);
  const Vec& v_r = space.interaction_vec(r);
  check_same_dim(h_r, e_d);
  check_same_dim(h_r, v_r);
  Vec out = h_r;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += e_d[i] * v_r[i];
  return out;
}

struct ConceptScore {
  std::string concept_id;
  double probability = 0.0;
};

// Softmax over exactly the concepts of effective_fiber(d): scores are
// dot(h_{r@d}, h_c)/T + b_c. Concepts outside the fiber are absent from the
// support, not down-weighted.
inline std::vector<ConceptScore> concept_scores(const DomainPath& d,
                                                const std::string& r,
                                                const CrystalLibrary& lib,
                                                const EmbeddingSpace& space,
                                                double temperature = 1.0) {
  const std::set<std::string> support = effective_concepts(d, lib);
  if (support.empty()) {
    throw EmptyFiber("effective fiber of " + d.str() + " has no concepts");
  }
  const Vec h_rd = relation_in_domain(r, d, space);
  std::vector<ConceptScore> out;
  out.reserve(support.size());
  std::vector<double> logits;
  logits.reserve(support.size());
  double max_logit = -1e300;
  for (const std::string& c : support) {
    const double z =
        dot(h_rd, space.concept_vec(c)) / temperature + space.concept_bias(c);
    logits.push_back(z);
    max_logit = std::max(max_logit, z);
    out.push_back({c, 0.0});
  }
  double total = 0.0;
  for (double& z : logits) {
    z = std::exp(z - max_logit);
    total += z;
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i].probability = logits[i] / total;
  }
  return out;
}

// Snapshot format:
//   {"geometry":…, "dim":…, "domains":{path:vec}, "concepts":{…},
//    "relations":{…}, "v":{…}, "bias":{…}, "seed":…}
inline nlohmann::json space_to_json(const EmbeddingSpace& space) {
  auto vec_map = [](const auto& m) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [key, v] : m) {
      if constexpr (std::is_same_v<std::decay_t<decltype(key)>, DomainPath>) {
        out[key.str()] = v;
      } else {
        out[key] = v;
      }
    }
    return out;
  };
  nlohmann::json bias = nlohmann::json::object();
  for (const auto& [key, b] : space.bias) bias[key] = b;
  return nlohmann::json{{"geometry", to_string(space.geometry)},
                        {"dim", space.dim},
                        {"domains", vec_map(space.domains)},
                        {"concepts", vec_map(space.concepts)},
                        {"relations", vec_map(space.relations)},
                        {"v", vec_map(space.interactions)},
                        {"bias", bias},
                        {"seed", space.seed}};
}

inline EmbeddingSpace space_from_json(const nlohmann::json& j) {
  EmbeddingSpace space;
  try {
    space.geometry = geometry_from_string(j.at("geometry").get<std::string>());
    space.dim = j.at("dim").get<std::size_t>();
    space.seed = j.at("seed").get<std::uint64_t>();
    auto read_vec = [&](const nlohmann::json& v, const std::string& where) {
      Vec out = v.get<Vec>();
      if (out.size() != space.dim) {
        throw FormatError("vector dimension " + std::to_string(out.size()) +
                              " does not match dim " +
                              std::to_string(space.dim),
                          where);
      }
      if (space.geometry == Geometry::poincare && norm_sq(out) >= 1.0) {
        throw OutsideBall("vector for " + where + " lies outside the ball");
      }
      return out;
    };
    for (const auto& [key, v] : j.at("domains").items()) {
      space.domains[DomainPath::parse(key)] = read_vec(v, key);
    }
    for (const auto& [key, v] : j.at("concepts").items()) {
      space.concepts[key] = read_vec(v, key);
    }
    for (const auto& [key, v] : j.at("relations").items()) {
      space.relations[key] = read_vec(v, key);
    }
    for (const auto& [key, v] : j.at("v").items()) {
      space.interactions[key] = read_vec(v, key);
    }
    for (const auto& [key, b] : j.at("bias").items()) {
      space.bias[key] = b.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed embedding snapshot: ") + e.what());
  }
  return space;
}

inline std::string save_space(const EmbeddingSpace& space) {
  return space_to_json(space).dump(2) + "\n";
}

inline EmbeddingSpace load_space(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("embedding snapshot is not valid JSON: ") +
                      e.what());
  }
  return space_from_json(j);
}

}  // namespace dalm
