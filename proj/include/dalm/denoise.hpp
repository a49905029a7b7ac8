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
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dalm/decoder.hpp"
#include "dalm/embedding.hpp"
#include "dalm/rng.hpp"
#include "dalm/store.hpp"

namespace dalm {

// Experimental harness contrasting lattice-ordered denoising
// (domain → relation → concept) with random field-order denoising on
// corrupted crystal corpora. The contrast is architectural; no claim about
// physical phase transitions is made or measured here.

enum class CrystalField { domain, relation, subject, object };

struct CorruptionSpec {
  double noise_level = 0.5;  // per-field masking probability
  std::set<CrystalField> maskable = {CrystalField::domain, CrystalField::relation,
                                     CrystalField::subject, CrystalField::object};
  std::uint64_t seed = 0;
};

struct MaskedRecord {
  Crystal original;
  bool domain_masked = false;
  bool relation_masked = false;
  bool subject_masked = false;
  bool object_masked = false;

  bool any_concept_masked() const { return subject_masked || object_masked; }
};

struct SynthSpec {
  std::size_t depth = 2;
  std::size_t branching = 3;
  std::size_t concepts_per_fiber = 10;
  std::size_t crystals_per_fiber = 20;
  double shared_fraction = 0.0;
  std::uint64_t seed = 0;
};

// Sizing modeled on a mid-size medical classification slice: 6 leaf fibers,
// ~1,250 entities, ~5,000 four-tuples.
inline SynthSpec icd11_like_preset(std::uint64_t seed = 0) {
  SynthSpec spec;
  spec.depth = 1;
  spec.branching = 6;
  spec.concepts_per_fiber = 208;
  spec.crystals_per_fiber = 833;
  spec.shared_fraction = 0.0;
  spec.seed = seed;
  return spec;
}

// Generates a complete tree lattice with fiber-disjoint concept vocabularies
// at the leaves (plus an optional shared slice), then fills each leaf fiber
// with crystals that pass insert(). Rejected draws are retried up to a bound.
inline CrystalLibrary synth_corpus(const SynthSpec& spec) {
  if (spec.depth == 0 || spec.branching == 0 || spec.concepts_per_fiber == 0 ||
      spec.crystals_per_fiber == 0) {
    throw Error("synth_corpus requires positive sizing parameters");
  }
  CrystalLibrary lib;
  std::vector<DomainPath> leaves;
  std::vector<DomainPath> frontier{DomainPath::top()};
  for (std::size_t level = 0; level < spec.depth; ++level) {
    std::vector<DomainPath> next;
    for (const DomainPath& node : frontier) {
      for (std::size_t b = 0; b < spec.branching; ++b) {
        next.push_back(node.child("n" + std::to_string(b)));
      }
    }
    frontier = std::move(next);
  }
  leaves = frontier;
  for (const DomainPath& leaf : leaves) lib.lattice().register_domain(leaf);

  const std::size_t shared =
      std::min(spec.concepts_per_fiber,
               static_cast<std::size_t>(spec.shared_fraction *
                                        static_cast<double>(spec.concepts_per_fiber)));
  std::map<DomainPath, std::vector<std::string>> vocab;
  for (const DomainPath& leaf : leaves) {
    std::string slug;
    for (const auto& s : leaf.segments()) slug += s + "_";
    auto& names = vocab[leaf];
    for (std::size_t i = 0; i < shared; ++i) {
      names.push_back("shared_" + std::to_string(i));
    }
    for (std::size_t i = shared; i < spec.concepts_per_fiber; ++i) {
      names.push_back("c_" + slug + std::to_string(i));
    }
  }

  const std::vector<std::string> relations = lib.meta().relation_names();
  SplitMix64 rng(mix_seed(spec.seed, 0x5EED));
  for (const DomainPath& leaf : leaves) {
    const auto& names = vocab[leaf];
    const std::size_t budget = spec.crystals_per_fiber * 50;
    std::size_t attempts = 0;
    while (lib.fiber(leaf).size() < spec.crystals_per_fiber) {
      if (++attempts > budget) {
        throw QuotaUnreachable("could not fill fiber " + leaf.str() + " with " +
                               std::to_string(spec.crystals_per_fiber) +
                               " crystals");
      }
      const std::string& s = names[rng.index(names.size())];
      const std::string& o = names[rng.index(names.size())];
      if (s == o) continue;
      const std::string& r = relations[rng.index(relations.size())];
      Crystal c = make_crystal(s, r, leaf, o);
      c.provenance = "synth";
      insert(c, lib);
    }
  }
  return lib;
}

// Masks each maskable field of each crystal independently with probability
// noise_level. Field draws happen in a fixed order so the same seed yields
// the same mask pattern at every noise level.
inline MaskedRecord corrupt_one(const Crystal& c, const CorruptionSpec& spec,
                                SplitMix64& rng) {
  MaskedRecord rec;
  rec.original = c;
  auto roll = [&](CrystalField f) {
    const double u = rng.uniform();
    return spec.maskable.count(f) > 0 && u < spec.noise_level;
  };
  rec.domain_masked = roll(CrystalField::domain);
  rec.relation_masked = roll(CrystalField::relation);
  rec.subject_masked = roll(CrystalField::subject);
  rec.object_masked = roll(CrystalField::object);
  return rec;
}

inline std::vector<MaskedRecord> corrupt(const CrystalLibrary& lib,
                                         const CorruptionSpec& spec) {
  std::vector<MaskedRecord> out;
  SplitMix64 rng(mix_seed(spec.seed, 0xC0DE));
  for (const auto& [_, f] : lib.fibers()) {
    for (const Crystal& c : f.crystals) {
      out.push_back(corrupt_one(c, spec, rng));
    }
  }
  return out;
}

struct Reconstruction {
  Crystal result;
  bool domain_unresolved = false;
  bool relation_unresolved = false;
  bool subject_unresolved = false;
  bool object_unresolved = false;
};

namespace detail {

// Shared resolver state, precomputed once per denoising run.
struct ResolverContext {
  const CrystalLibrary& lib;
  const EmbeddingSpace* space;
  OverlapIndex overlap;
  std::vector<DomainPath> fibered_domains;        // non-empty fibers, sorted
  std::map<DomainPath, std::vector<std::string>> fiber_vocab;
  std::vector<std::string> global_vocab;
  std::vector<std::string> global_relations;

  explicit ResolverContext(const CrystalLibrary& library,
                           const EmbeddingSpace* sp)
      : lib(library), space(sp), overlap(OverlapIndex::build(library)) {
    for (const auto& [d, f] : lib.fibers()) {
      if (f.crystals.empty()) continue;
      fibered_domains.push_back(d);
    }
    for (const DomainPath& d : lib.lattice().known()) {
      const auto s = effective_concepts(d, lib);
      fiber_vocab[d] = std::vector<std::string>(s.begin(), s.end());
    }
    const auto all = lib.all_concepts();
    global_vocab.assign(all.begin(), all.end());
    const auto rels = lib.used_relations();
    global_relations.assign(rels.begin(), rels.end());
  }

  DomainPath resolve_domain(const std::optional<std::string>& subject,
                            const std::optional<std::string>& object,
                            SplitMix64& rng) const {
    std::vector<std::string> visible;
    if (subject) visible.push_back(*subject);
    if (object) visible.push_back(*object);
    if (!visible.empty()) {
      const auto weights = overlap.activation(visible);
      double total = 0.0;
      for (const auto& [_, w] : weights) total += w;
      if (total > 0.0) {
        double pick = rng.uniform() * total;
        for (const auto& [d, w] : weights) {
          pick -= w;
          if (pick <= 0.0) return d;
        }
        return weights.rbegin()->first;
      }
    }
    return fibered_domains[rng.index(fibered_domains.size())];
  }

  std::optional<std::string> resolve_relation(
      const std::optional<DomainPath>& domain, SplitMix64& rng) const {
    if (domain) {
      const auto allowed = expand_relations(*domain, lib);
      if (allowed.empty()) return std::nullopt;
      return allowed[rng.index(allowed.size())].first;
    }
    if (global_relations.empty()) return std::nullopt;
    return global_relations[rng.index(global_relations.size())];
  }

  std::optional<std::string> resolve_concept(
      const std::optional<DomainPath>& domain,
      const std::optional<std::string>& relation, SplitMix64& rng) const {
    if (!domain) {
      // Flat-token-space baseline: all fibers pooled.
      if (global_vocab.empty()) return std::nullopt;
      return global_vocab[rng.index(global_vocab.size())];
    }
    auto it = fiber_vocab.find(*domain);
    if (it == fiber_vocab.end() || it->second.empty()) return std::nullopt;
    const auto& support = it->second;
    if (space != nullptr && relation) {
      bool covered = space->domains.count(*domain) > 0 &&
                     space->relations.count(*relation) > 0 &&
                     space->interactions.count(*relation) > 0;
      if (covered) {
        for (const std::string& c : support) {
          if (!space->concepts.count(c) || !space->bias.count(c)) {
            covered = false;
            break;
          }
        }
      }
      if (covered) {
        const auto scores =
            concept_scores(*domain, *relation, lib, *space, 1.0);
        double pick = rng.uniform();
        for (const auto& s : scores) {
          pick -= s.probability;
          if (pick <= 0.0) return s.concept_id;
        }
        return scores.back().concept_id;
      }
    }
    return support[rng.index(support.size())];
  }
};

inline Reconstruction denoise_one(const MaskedRecord& rec,
                                  const ResolverContext& ctx,
                                  const std::vector<CrystalField>& order,
                                  SplitMix64& rng) {
  Reconstruction out;
  out.result = rec.original;
  std::optional<DomainPath> domain;
  std::optional<std::string> relation, subject, object;
  if (!rec.domain_masked) domain = rec.original.domain;
  if (!rec.relation_masked) relation = rec.original.relation;
  if (!rec.subject_masked) subject = rec.original.subject;
  if (!rec.object_masked) object = rec.original.object;
  // The domain resolver sees the record's visible concepts only, never
  // concepts reconstructed earlier in the same pass; the resolution order
  // decides whether domain and relation are known when a field comes up.
  const std::optional<std::string> visible_subject = subject;
  const std::optional<std::string> visible_object = object;

  for (CrystalField field : order) {
    switch (field) {
      case CrystalField::domain:
        if (rec.domain_masked) {
          domain = ctx.resolve_domain(visible_subject, visible_object, rng);
        }
        break;
      case CrystalField::relation:
        if (rec.relation_masked) relation = ctx.resolve_relation(domain, rng);
        break;
      case CrystalField::subject:
        if (rec.subject_masked) subject = ctx.resolve_concept(domain, relation, rng);
        break;
      case CrystalField::object:
        if (rec.object_masked) object = ctx.resolve_concept(domain, relation, rng);
        break;
    }
  }

  if (domain) out.result.domain = *domain; else out.domain_unresolved = true;
  if (relation) out.result.relation = *relation; else out.relation_unresolved = true;
  if (subject) out.result.subject = *subject; else out.subject_unresolved = true;
  if (object) out.result.object = *object; else out.object_unresolved = true;
  return out;
}

}  // namespace detail

// Lattice-ordered schedule: domain first, then relation, then concepts. A
// masked concept is always sampled inside the resolved domain's effective
// fiber, so structured reconstructions cannot leak across fibers.
inline std::vector<Reconstruction> denoise_structured(
    const std::vector<MaskedRecord>& records, const CrystalLibrary& lib,
    const EmbeddingSpace* space, std::uint64_t seed) {
  detail::ResolverContext ctx(lib, space);
  static const std::vector<CrystalField> order = {
      CrystalField::domain, CrystalField::relation, CrystalField::subject,
      CrystalField::object};
  std::vector<Reconstruction> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    SplitMix64 rng(mix_seed(seed, i));
    out.push_back(detail::denoise_one(records[i], ctx, order, rng));
  }
  return out;
}

// Unstructured baseline: identical resolvers, but the field order is a
// uniformly random permutation per record, and a concept resolved before its
// domain is drawn from the pooled global vocabulary.
inline std::vector<Reconstruction> denoise_random(
    const std::vector<MaskedRecord>& records, const CrystalLibrary& lib,
    const EmbeddingSpace* space, std::uint64_t seed) {
  detail::ResolverContext ctx(lib, space);
  std::vector<Reconstruction> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    SplitMix64 rng(mix_seed(seed, i));
    std::vector<CrystalField> order = {CrystalField::domain,
                                       CrystalField::relation,
                                       CrystalField::subject,
                                       CrystalField::object};
    for (std::size_t j = order.size(); j > 1; --j) {  // Fisher-Yates
      std::swap(order[j - 1], order[rng.index(j)]);
    }
    out.push_back(detail::denoise_one(records[i], ctx, order, rng));
  }
  return out;
}

struct GridPointMetrics {
  std::string schedule;
  double eps_noise = 0.0;
  double domain_acc = 1.0;
  double relation_acc = 1.0;
  double concept_acc = 1.0;
  double leakage = 0.0;
  std::size_t trials = 0;
};

struct DenoiseResult {
  std::vector<GridPointMetrics> rows;
};

namespace detail {

inline GridPointMetrics score_runs(const std::string& schedule, double eps,
                                   const std::vector<MaskedRecord>& records,
                                   const std::vector<Reconstruction>& recs,
                                   const CrystalLibrary& lib) {
  GridPointMetrics m;
  m.schedule = schedule;
  m.eps_noise = eps;
  m.trials = records.size();
  std::size_t domain_masked = 0, domain_ok = 0;
  std::size_t relation_masked = 0, relation_ok = 0;
  std::size_t concept_masked = 0, concept_ok = 0;
  std::size_t leak_eligible = 0, leaked = 0;
  std::map<DomainPath, std::set<std::string>> cache;
  auto fiber_set = [&](const DomainPath& d) -> const std::set<std::string>& {
    auto it = cache.find(d);
    if (it == cache.end()) {
      it = cache.emplace(d, effective_concepts(d, lib)).first;
    }
    return it->second;
  };
  for (std::size_t i = 0; i < records.size(); ++i) {
    const MaskedRecord& rec = records[i];
    const Reconstruction& r = recs[i];
    if (rec.domain_masked) {
      ++domain_masked;
      if (!r.domain_unresolved && r.result.domain == rec.original.domain)
        ++domain_ok;
    }
    if (rec.relation_masked) {
      ++relation_masked;
      if (!r.relation_unresolved && r.result.relation == rec.original.relation)
        ++relation_ok;
    }
    bool any_leak = false;
    auto check_concept = [&](bool masked, bool unresolved,
                             const std::string& got, const std::string& want) {
      if (!masked) return;
      ++concept_masked;
      if (!unresolved && got == want) ++concept_ok;
      if (!unresolved && !r.domain_unresolved &&
          !fiber_set(r.result.domain).count(got)) {
        any_leak = true;
      }
    };
    check_concept(rec.subject_masked, r.subject_unresolved, r.result.subject,
                  rec.original.subject);
    check_concept(rec.object_masked, r.object_unresolved, r.result.object,
                  rec.original.object);
    if (rec.any_concept_masked()) {
      ++leak_eligible;
      if (any_leak) ++leaked;
    }
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.domain_acc = ratio(domain_ok, domain_masked);
  m.relation_acc = ratio(relation_ok, relation_masked);
  m.concept_acc = ratio(concept_ok, concept_masked);
  m.leakage = leak_eligible == 0 ? 0.0
                                 : static_cast<double>(leaked) /
                                       static_cast<double>(leak_eligible);
  return m;
}

}  // namespace detail

// Runs both schedules on byte-identical corrupted inputs at every grid
// point: `trials` crystals are drawn per point, corrupted once, then handed
// to both schedules. Leakage is the fraction of records with at least one
// reconstructed concept outside the finally-resolved domain's fiber.
inline DenoiseResult experiment(
    const CrystalLibrary& lib, const EmbeddingSpace* space,
    const std::vector<double>& grid, std::size_t trials, std::uint64_t seed,
    const std::set<CrystalField>& maskable = {
        CrystalField::domain, CrystalField::relation, CrystalField::subject,
        CrystalField::object}) {
  if (grid.empty()) throw Error("experiment requires a non-empty grid");
  if (trials == 0) throw Error("experiment requires trials > 0");
  std::vector<const Crystal*> corpus;
  for (const auto& [_, f] : lib.fibers()) {
    for (const Crystal& c : f.crystals) corpus.push_back(&c);
  }
  if (corpus.empty()) throw EmptyLibrary("experiment requires crystals");

  DenoiseResult result;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double eps = grid[g];
    SplitMix64 pick_rng(mix_seed(seed, 0xA000 + g));
    SplitMix64 mask_rng(mix_seed(seed, 0xB000 + g));
    CorruptionSpec spec;
    spec.noise_level = eps;
    spec.maskable = maskable;
    spec.seed = seed;
    std::vector<MaskedRecord> records;
    records.reserve(trials);
    for (std::size_t t = 0; t < trials; ++t) {
      const Crystal& c = *corpus[pick_rng.index(corpus.size())];
      records.push_back(corrupt_one(c, spec, mask_rng));
    }
    const auto structured =
        denoise_structured(records, lib, space, mix_seed(seed, 0xD000 + g));
    const auto random =
        denoise_random(records, lib, space, mix_seed(seed, 0xE000 + g));
    result.rows.push_back(
        detail::score_runs("structured", eps, records, structured, lib));
    result.rows.push_back(
        detail::score_runs("random", eps, records, random, lib));
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const GridPointMetrics& a, const GridPointMetrics& b) {
              if (a.schedule != b.schedule) return a.schedule < b.schedule;
              return a.eps_noise < b.eps_noise;
            });
  return result;
}

inline std::string to_csv(const DenoiseResult& result) {
  std::string out =
      "schedule,eps_noise,domain_acc,relation_acc,concept_acc,leakage,trials\n";
  char buf[256];
  for (const GridPointMetrics& m : result.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%zu\n",
                  m.schedule.c_str(), m.eps_noise, m.domain_acc, m.relation_acc,
                  m.concept_acc, m.leakage, m.trials);
    out += buf;
  }
  return out;
}

}  // namespace dalm
