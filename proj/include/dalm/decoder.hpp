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
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dalm/embedding.hpp"
#include "dalm/inference.hpp"
#include "dalm/rng.hpp"
#include "dalm/store.hpp"

namespace dalm {

enum class VocabularyMode { closed, open };
enum class OutputMode { crystal, multi_perspective, verbalized };
enum class ActivationSource { embedding, overlap };

struct GenerationConfig {
  double epsilon = 0.05;
  double theta_novel = 0.15;
  VocabularyMode vocabulary = VocabularyMode::closed;
  OutputMode output_mode = OutputMode::crystal;
  std::size_t max_concepts_per_pair = 3;
  std::uint64_t seed = 0;
  ActivationSource activation_source = ActivationSource::overlap;
  double temperature = 1.0;
};

inline std::string to_string(OutputMode m) {
  switch (m) {
    case OutputMode::crystal: return "crystal";
    case OutputMode::multi_perspective: return "multi_perspective";
    case OutputMode::verbalized: return "verbalized";
  }
  return "crystal";
}

inline void validate_config(const GenerationConfig& config) {
  if (config.epsilon < 0.0 || config.epsilon >= 1.0) {
    throw OutOfRange("epsilon must lie in [0, 1)");
  }
  if (config.theta_novel <= 0.0 || config.theta_novel > 1.0) {
    throw OutOfRange("theta_novel must lie in (0, 1]");
  }
  if (config.max_concepts_per_pair == 0) {
    throw OutOfRange("max_concepts_per_pair must be positive");
  }
}

// Query embedding: mean of the concept vectors present in the space.
// Concepts the space does not know contribute nothing; with no known
// concept the embedding is the zero vector.
inline Vec query_embedding(const std::vector<std::string>& query_concepts,
                           const EmbeddingSpace& space) {
  Vec h_q(space.dim, 0.0);
  std::size_t known = 0;
  for (const std::string& c : query_concepts) {
    auto it = space.concepts.find(c);
    if (it == space.concepts.end()) continue;
    add_scaled(h_q, 1.0, it->second);
    ++known;
  }
  if (known > 0) {
    for (double& x : h_q) x /= static_cast<double>(known);
  }
  return h_q;
}

namespace detail {

// concept → domains whose effective fiber contains it; built once per
// library snapshot for overlap activation.
struct OverlapIndex {
  std::map<std::string, std::vector<DomainPath>> domains_of;

  static OverlapIndex build(const CrystalLibrary& lib) {
    OverlapIndex index;
    for (const DomainPath& d : lib.lattice().known()) {
      for (const std::string& c : effective_concepts(d, lib)) {
        index.domains_of[c].push_back(d);
      }
    }
    return index;
  }

  // weight(d) ∝ |query ∩ concepts(effective_fiber(d))|, normalized.
  std::map<DomainPath, double> activation(
      const std::vector<std::string>& query_concepts) const {
    std::map<DomainPath, std::size_t> counts;
    std::set<std::string> seen;
    for (const std::string& c : query_concepts) {
      if (!seen.insert(c).second) continue;
      auto it = domains_of.find(c);
      if (it == domains_of.end()) continue;
      for (const DomainPath& d : it->second) ++counts[d];
    }
    double total = 0.0;
    for (const auto& [_, n] : counts) total += static_cast<double>(n);
    std::map<DomainPath, double> out;
    if (total == 0.0) return out;
    for (const auto& [d, n] : counts) {
      out[d] = static_cast<double>(n) / total;
    }
    return out;
  }
};

}  // namespace detail

// Phase 1. Embedding source: softmax over all registered domains of
// dot(e_d, h_q)/√dim. Overlap source: normalized shared-concept counts, a
// fallback that needs no trained space. Only entries above ε are returned.
inline std::map<DomainPath, double> activate_domains(
    const std::vector<std::string>& query_concepts, const CrystalLibrary& lib,
    const EmbeddingSpace* space, const GenerationConfig& config) {
  validate_config(config);
  if (query_concepts.empty()) {
    throw NoQueryConcepts("query must contain at least one concept");
  }
  std::map<DomainPath, double> weights;
  if (config.activation_source == ActivationSource::embedding) {
    if (space == nullptr || !space->covers_all_domains(lib.lattice())) {
      throw MissingEmbedding(
          "embedding activation requires a space covering all registered "
          "domains");
    }
    const Vec h_q = query_embedding(query_concepts, *space);
    const double scale = 1.0 / std::sqrt(static_cast<double>(space->dim));
    double max_score = -1e300;
    std::map<DomainPath, double> scores;
    for (const DomainPath& d : lib.lattice().known()) {
      const double s = dot(space->domain_vec(d), h_q) * scale;
      scores[d] = s;
      max_score = std::max(max_score, s);
    }
    double total = 0.0;
    for (auto& [_, s] : scores) {
      s = std::exp(s - max_score);
      total += s;
    }
    for (const auto& [d, s] : scores) weights[d] = s / total;
  } else {
    weights = detail::OverlapIndex::build(lib).activation(query_concepts);
  }
  std::map<DomainPath, double> out;
  for (const auto& [d, w] : weights) {
    if (w > config.epsilon) out[d] = w;
  }
  return out;
}

struct RouteResult {
  std::vector<std::pair<DomainPath, double>> top;  // best first
  std::size_t visited = 0;
};

// Beam descent from the top element: each level scores the registered
// children of the current beam, keeps the k best, and descends. Returns the
// k best-scoring domains encountered anywhere plus the number of scored
// nodes, which is bounded by depth × branching × k.
inline RouteResult hierarchical_route(
    const std::vector<std::string>& query_concepts, const CrystalLibrary& lib,
    const EmbeddingSpace& space, std::size_t k) {
  if (query_concepts.empty()) {
    throw NoQueryConcepts("query must contain at least one concept");
  }
  if (!space.covers_all_domains(lib.lattice())) {
    throw MissingEmbedding("routing requires a space covering all domains");
  }
  const Vec h_q = query_embedding(query_concepts, space);
  RouteResult result;
  std::vector<std::pair<DomainPath, double>> scored;
  std::vector<DomainPath> beam{DomainPath::top()};
  while (!beam.empty()) {
    std::vector<std::pair<DomainPath, double>> level;
    for (const DomainPath& node : beam) {
      for (const DomainPath& child : lib.lattice().children(node)) {
        const double s = dot(space.domain_vec(child), h_q);
        level.emplace_back(child, s);
        ++result.visited;
      }
    }
    if (level.empty()) break;
    std::sort(level.begin(), level.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (level.size() > k) level.resize(k);
    scored.insert(scored.end(), level.begin(), level.end());
    beam.clear();
    for (const auto& [d, _] : level) beam.push_back(d);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > k) scored.resize(k);
  result.top = std::move(scored);
  return result;
}

// Phase 2, the hard mask M_d: relations used by crystals in F(d) are native
// and always allowed; relations seen only on ancestor crystals are allowed
// iff they inherit monotonically into d. Blocked relations are absent, not
// down-weighted.
inline std::vector<std::pair<std::string, bool>> expand_relations(
    const DomainPath& d, const CrystalLibrary& lib) {
  std::set<std::string> native;
  for (const Crystal& c : lib.fiber(d)) native.insert(c.relation);
  std::set<std::string> inherited;
  for (const DomainPath& a : d.ancestors()) {
    for (const Crystal& c : lib.fiber(a)) {
      if (native.count(c.relation) || inherited.count(c.relation)) continue;
      if (tau_effective(c.relation, a, d, lib.meta()) == Tau::monotone) {
        inherited.insert(c.relation);
      }
    }
  }
  std::vector<std::pair<std::string, bool>> out;
  for (const std::string& r : native) out.emplace_back(r, false);
  for (const std::string& r : inherited) out.emplace_back(r, true);
  std::sort(out.begin(), out.end());
  return out;
}

struct ProvisionalContext {
  DomainPath domain;
  std::string relation;
  double trigger_probability = 0.0;
};

struct GeneratedConcept {
  std::string concept_id;
  double probability = 0.0;
  CrystalStatus status = CrystalStatus::validated;
  std::optional<ProvisionalContext> context;
};

namespace detail {

// Character trigram model over the concept names of one fiber; used by the
// open-vocabulary fallback to propose novel, domain-conditioned names.
class TrigramModel {
 public:
  static constexpr char kBegin = '\x01';
  static constexpr char kEnd = '\x02';

  explicit TrigramModel(const std::set<std::string>& names) {
    if (names.size() < 2) {
      throw DegenerateModel(
          "need at least 2 concept names to fit a trigram model");
    }
    for (const std::string& name : names) {
      char a = kBegin, b = kBegin;
      for (char c : name) {
        ++transitions_[{a, b}][c];
        a = b;
        b = c;
      }
      ++transitions_[{a, b}][kEnd];
    }
  }

  std::optional<std::string> sample(SplitMix64& rng,
                                    std::size_t max_len = 24) const {
    std::string out;
    char a = kBegin, b = kBegin;
    while (out.size() <= max_len) {
      auto it = transitions_.find({a, b});
      if (it == transitions_.end()) return std::nullopt;
      std::size_t total = 0;
      for (const auto& [_, n] : it->second) total += n;
      std::size_t pick = rng.index(total);
      char next = kEnd;
      for (const auto& [c, n] : it->second) {
        if (pick < n) {
          next = c;
          break;
        }
        pick -= n;
      }
      if (next == kEnd) {
        if (out.empty()) return std::nullopt;
        return out;
      }
      out.push_back(next);
      a = b;
      b = next;
    }
    return std::nullopt;  // unterminated at the length cap
  }

 private:
  std::map<std::pair<char, char>, std::map<char, std::size_t>> transitions_;
};

}  // namespace detail

// Subword-generator stand-in: samples a novel concept name from a trigram
// model fitted to the fiber's concept names, rejecting names already in the
// fiber. The result is provisional, carries its generation context, and is
// never inserted here; acceptance requires the full gate.
inline GeneratedConcept open_vocab_fallback(const DomainPath& d,
                                            const std::string& r,
                                            const CrystalLibrary& lib,
                                            const GenerationConfig& config,
                                            SplitMix64& rng,
                                            double trigger_probability) {
  (void)config;
  const std::set<std::string> existing = effective_concepts(d, lib);
  detail::TrigramModel model(existing);
  for (int attempt = 0; attempt < 200; ++attempt) {
    auto name = model.sample(rng);
    if (!name || existing.count(*name)) continue;
    GeneratedConcept out;
    out.concept_id = *name;
    out.probability = 0.0;
    out.status = CrystalStatus::provisional;
    out.context = ProvisionalContext{d, r, trigger_probability};
    return out;
  }
  throw DegenerateModel("trigram model of " + d.str() +
                        " cannot produce a novel name");
}

// Phase 3. Closed mode: the top max_concepts_per_pair fiber concepts, all
// validated. Open mode: when the best probability falls below θ_novel, a
// provisional novel concept is appended to the closed candidates.
inline std::vector<GeneratedConcept> generate_concepts(
    const DomainPath& d, const std::string& r, const CrystalLibrary& lib,
    const EmbeddingSpace& space, const GenerationConfig& config,
    SplitMix64& rng) {
  std::vector<ConceptScore> scores;
  try {
    scores = concept_scores(d, r, lib, space, config.temperature);
  } catch (const EmptyFiber&) {
    if (config.vocabulary == VocabularyMode::closed) throw;
    return {open_vocab_fallback(d, r, lib, config, rng, 0.0)};
  }
  std::sort(scores.begin(), scores.end(),
            [](const ConceptScore& a, const ConceptScore& b) {
              if (a.probability != b.probability)
                return a.probability > b.probability;
              return a.concept_id < b.concept_id;
            });
  std::vector<GeneratedConcept> out;
  const std::size_t keep = std::min(config.max_concepts_per_pair, scores.size());
  for (std::size_t i = 0; i < keep; ++i) {
    out.push_back(GeneratedConcept{scores[i].concept_id, scores[i].probability,
                                   CrystalStatus::validated, std::nullopt});
  }
  if (config.vocabulary == VocabularyMode::open && !scores.empty() &&
      scores.front().probability < config.theta_novel) {
    try {
      out.push_back(open_vocab_fallback(d, r, lib, config, rng,
                                        scores.front().probability));
    } catch (const DegenerateModel&) {
      // The fiber's trigram language is saturated; stay closed-vocabulary.
    }
  }
  return out;
}

struct RelationEntry {
  std::string relation;
  bool inherited = false;
  std::vector<GeneratedConcept> concepts;
};

struct DomainEntry {
  DomainPath domain;
  double weight = 0.0;
  std::string anchor;  // query concept the emitted tuples attach to
  std::vector<RelationEntry> relations;
};

struct LeakageAudit {
  std::size_t total_concepts = 0;
  std::size_t out_of_fiber = 0;
  std::size_t provisional_count = 0;
  double leakage_rate = 0.0;
  std::vector<std::pair<DomainPath, std::string>> offenders;
};

struct GeneratedOutput {
  std::vector<std::string> query;
  OutputMode mode = OutputMode::crystal;
  std::vector<DomainEntry> entries;
  std::optional<std::string> rendered;
  LeakageAudit audit;
};

// Counts validated concepts that are not members of their entry's effective
// fiber. Provisional concepts are tallied separately: until validated they
// are outside the fiber by definition.
inline LeakageAudit leakage_audit(const GeneratedOutput& output,
                                  const CrystalLibrary& lib) {
  LeakageAudit audit;
  std::map<DomainPath, std::set<std::string>> cache;
  for (const DomainEntry& entry : output.entries) {
    auto it = cache.find(entry.domain);
    if (it == cache.end()) {
      it = cache.emplace(entry.domain, effective_concepts(entry.domain, lib))
               .first;
    }
    for (const RelationEntry& rel : entry.relations) {
      for (const GeneratedConcept& gc : rel.concepts) {
        if (gc.status == CrystalStatus::provisional) {
          ++audit.provisional_count;
          continue;
        }
        ++audit.total_concepts;
        if (!it->second.count(gc.concept_id)) {
          ++audit.out_of_fiber;
          audit.offenders.emplace_back(entry.domain, gc.concept_id);
        }
      }
    }
  }
  audit.leakage_rate =
      audit.total_concepts == 0
          ? 0.0
          : static_cast<double>(audit.out_of_fiber) /
                static_cast<double>(audit.total_concepts);
  return audit;
}

inline std::string relation_gloss(const std::string& r) {
  static const std::map<std::string, std::string> table = {
      {"is_a", "is a"},
      {"part_of", "is part of"},
      {"causes", "causes"},
      {"requires", "requires"},
      {"enables", "enables"},
      {"contrasts_with", "contrasts with"},
      {"analogous_to", "is analogous to"},
  };
  auto it = table.find(r);
  if (it != table.end()) return it->second;
  std::string gloss = r;
  std::replace(gloss.begin(), gloss.end(), '_', ' ');
  return gloss;
}

inline std::string verbalize(const GeneratedOutput& output) {
  std::string text;
  for (const DomainEntry& entry : output.entries) {
    for (const RelationEntry& rel : entry.relations) {
      for (const GeneratedConcept& gc : rel.concepts) {
        text += "In " + entry.domain.str() + ": " + entry.anchor + " " +
                relation_gloss(rel.relation) + " " + gc.concept_id + ".\n";
      }
    }
  }
  return text;
}

// Full three-phase pipeline: domain activation → relation expansion →
// fiber-local concept generation, composed per activated domain. Every
// activated domain contributes an entry even when no relations are allowed.
inline GeneratedOutput generate(const std::vector<std::string>& query_concepts,
                                const CrystalLibrary& lib,
                                const EmbeddingSpace* space,
                                const GenerationConfig& config) {
  GeneratedOutput output;
  output.query = query_concepts;
  output.mode = config.output_mode;
  std::map<DomainPath, double> activations =
      activate_domains(query_concepts, lib, space, config);

  std::vector<std::pair<DomainPath, double>> ordered(activations.begin(),
                                                     activations.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  for (const auto& [d, weight] : ordered) {
    DomainEntry entry;
    entry.domain = d;
    entry.weight = weight;
    const std::set<std::string> fiber_concepts = effective_concepts(d, lib);
    entry.anchor = query_concepts.front();
    for (const std::string& q : query_concepts) {
      if (fiber_concepts.count(q)) {
        entry.anchor = q;
        break;
      }
    }
    for (const auto& [relation, inherited] : expand_relations(d, lib)) {
      RelationEntry rel;
      rel.relation = relation;
      rel.inherited = inherited;
      SplitMix64 rng(
          mix_seed(config.seed, hash_str(d.str()) ^ hash_str(relation)));
      if (space != nullptr) {
        rel.concepts = generate_concepts(d, relation, lib, *space, config, rng);
      } else {
        // No trained space: scores degenerate to the uniform distribution
        // over the fiber concepts, matching concept_scores on zero vectors.
        const double p = 1.0 / static_cast<double>(fiber_concepts.size());
        std::size_t kept = 0;
        for (const std::string& c : fiber_concepts) {
          if (kept++ >= config.max_concepts_per_pair) break;
          rel.concepts.push_back(
              GeneratedConcept{c, p, CrystalStatus::validated, std::nullopt});
        }
        if (config.vocabulary == VocabularyMode::open && p < config.theta_novel) {
          try {
            rel.concepts.push_back(
                open_vocab_fallback(d, relation, lib, config, rng, p));
          } catch (const DegenerateModel&) {
          }
        }
      }
      entry.relations.push_back(std::move(rel));
    }
    output.entries.push_back(std::move(entry));
  }
  output.audit = leakage_audit(output, lib);
  if (config.output_mode == OutputMode::verbalized) {
    output.rendered = verbalize(output);
  }
  return output;
}

inline nlohmann::json output_to_json(const GeneratedOutput& output) {
  nlohmann::json entries = nlohmann::json::array();
  for (const DomainEntry& entry : output.entries) {
    nlohmann::json relations = nlohmann::json::array();
    for (const RelationEntry& rel : entry.relations) {
      nlohmann::json concepts = nlohmann::json::array();
      for (const GeneratedConcept& gc : rel.concepts) {
        nlohmann::json c{{"concept", gc.concept_id},
                         {"p", gc.probability},
                         {"status", to_string(gc.status)}};
        if (gc.context) {
          c["context"] = {{"domain", gc.context->domain.str()},
                          {"relation", gc.context->relation},
                          {"trigger", gc.context->trigger_probability}};
        }
        concepts.push_back(std::move(c));
      }
      relations.push_back({{"relation", rel.relation},
                           {"origin", rel.inherited ? "inherited" : "native"},
                           {"concepts", concepts}});
    }
    entries.push_back({{"domain", entry.domain.str()},
                       {"weight", entry.weight},
                       {"anchor", entry.anchor},
                       {"relations", relations}});
  }
  nlohmann::json offenders = nlohmann::json::array();
  for (const auto& [d, c] : output.audit.offenders) {
    offenders.push_back({{"domain", d.str()}, {"concept", c}});
  }
  nlohmann::json j{{"query", output.query},
                   {"mode", to_string(output.mode)},
                   {"entries", entries},
                   {"audit",
                    {{"total_concepts", output.audit.total_concepts},
                     {"out_of_fiber", output.audit.out_of_fiber},
                     {"provisional_count", output.audit.provisional_count},
                     {"leakage_rate", output.audit.leakage_rate},
                     {"offenders", offenders}}}};
  if (output.rendered) j["rendered"] = *output.rendered;
  return j;
}

// Subsequent validation of a provisional crystal. A proposal aimed at an
// unregistered domain is re-scoped to its nearest registered ancestor (a
// valid generalization); the alternative of growing the lattice is surfaced
// as a warning instead of a mutation.
inline ValidationReport submit_provisional(Crystal crystal,
                                           CrystalLibrary& lib,
                                           ValidationScope scope,
                                           std::string* warning = nullptr) {
  if (!lib.lattice().contains(crystal.domain)) {
    const DomainPath ancestor =
        lib.lattice().nearest_registered_ancestor(crystal.domain);
    if (warning != nullptr) {
      *warning = "domain " + crystal.domain.str() +
                 " is not registered; re-scoped to " + ancestor.str() +
                 " (novel-domain candidate)";
    }
    crystal.domain = ancestor;
  }
  crystal.status = CrystalStatus::validated;
  return insert(crystal, lib, scope);
}

}  // namespace dalm
