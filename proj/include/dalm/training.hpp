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
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dalm/embedding.hpp"
#include "dalm/rng.hpp"
#include "dalm/store.hpp"
#include "dalm/vecmath.hpp"

namespace dalm {

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  double margin = 1.0;
  std::size_t negatives_per_positive = 5;
  std::uint64_t seed = 0;
  Geometry geometry = Geometry::euclidean;
  std::size_t dim = 32;
  double temperature = 1.0;
};

// (d1, d2, d3) with d1 a strict descendant of d2 and d3 off the chain
// through them: neither an ancestor-or-self of d1 nor inside d2's cone.
struct Triplet {
  DomainPath child;    // d1
  DomainPath parent;   // d2
  DomainPath offpath;  // d3
};

inline bool triplet_constraints_hold(const Triplet& t) {
  return t.child.specializes(t.parent) && t.child != t.parent &&
         !t.child.specializes(t.offpath) && !t.offpath.specializes(t.parent);
}

namespace detail {

struct TripletPool {
  struct Pair {
    DomainPath child;
    DomainPath parent;
    std::vector<DomainPath> offs;
  };
  std::vector<Pair> pairs;
};

inline TripletPool build_triplet_pool(const DomainLattice& lattice) {
  TripletPool pool;
  for (const DomainPath& child : lattice.known()) {
    if (child.is_top()) continue;
    for (const DomainPath& parent : child.ancestors()) {
      if (parent.is_top()) continue;  // everything specializes top
      TripletPool::Pair pair{child, parent, {}};
      for (const DomainPath& off : lattice.known()) {
        if (child.specializes(off)) continue;
        if (off.specializes(parent)) continue;
        pair.offs.push_back(off);
      }
      if (!pair.offs.empty()) pool.pairs.push_back(std::move(pair));
    }
  }
  return pool;
}

inline Triplet draw_triplet(const TripletPool& pool, SplitMix64& rng) {
  const auto& pair = pool.pairs[rng.index(pool.pairs.size())];
  return Triplet{pair.child, pair.parent,
                 pair.offs[rng.index(pair.offs.size())]};
}

}  // namespace detail

inline std::vector<Triplet> sample_triplets(const DomainLattice& lattice,
                                            std::size_t count,
                                            SplitMix64& rng) {
  detail::TripletPool pool = detail::build_triplet_pool(lattice);
  if (pool.pairs.empty()) {
    throw InsufficientLattice(
        "no valid (child, parent, off-path) triplet exists in this lattice");
  }
  std::vector<Triplet> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(detail::draw_triplet(pool, rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Analytic gradients.

struct DistanceGrad {
  double value = 0.0;
  Vec g_u;
  Vec g_v;
};

inline DistanceGrad euclidean_distance_grad(const Vec& u, const Vec& v) {
  DistanceGrad out;
  out.value = euclidean_distance(u, v);
  out.g_u.assign(u.size(), 0.0);
  out.g_v.assign(u.size(), 0.0);
  if (out.value < 1e-12) return out;  // subgradient 0 at coincident points
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double g = (u[i] - v[i]) / out.value;
    out.g_u[i] = g;
    out.g_v[i] = -g;
  }
  return out;
}

inline DistanceGrad poincare_distance_grad(const Vec& u, const Vec& v) {
  check_same_dim(u, v);
  DistanceGrad out;
  out.g_u.assign(u.size(), 0.0);
  out.g_v.assign(u.size(), 0.0);
  const double su = norm_sq(u);
  const double sv = norm_sq(v);
  if (su >= 1.0 || sv >= 1.0) {
    throw OutsideBall("poincare gradient requires vectors inside the unit ball");
  }
  const double a = 1.0 - su;
  const double b = 1.0 - sv;
  const double d2 = sq_dist(u, v);
  const double z = 1.0 + 2.0 * d2 / (a * b);
  out.value = std::acosh(std::max(1.0, z));
  const double denom = std::sqrt(std::max(0.0, z * z - 1.0));
  if (denom < 1e-12) return out;  // coincident points
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double dz_du = 4.0 * (u[i] - v[i]) / (a * b) +
                         4.0 * d2 * u[i] / (a * a * b);
    const double dz_dv = 4.0 * (v[i] - u[i]) / (a * b) +
                         4.0 * d2 * v[i] / (a * b * b);
    out.g_u[i] = dz_du / denom;
    out.g_v[i] = dz_dv / denom;
  }
  return out;
}

inline DistanceGrad distance_grad(const Vec& u, const Vec& v,
                                  Geometry geometry) {
  return geometry == Geometry::poincare ? poincare_distance_grad(u, v)
                                        : euclidean_distance_grad(u, v);
}

struct LatticeLossGrad {
  double loss = 0.0;
  Vec g1;
  Vec g2;
  Vec g3;
};

inline LatticeLossGrad lattice_loss_grad(const Vec& e1, const Vec& e2,
                                         const Vec& e3, double gamma,
                                         Geometry geometry) {
  LatticeLossGrad out;
  out.g1.assign(e1.size(), 0.0);
  out.g2.assign(e1.size(), 0.0);
  out.g3.assign(e1.size(), 0.0);
  const DistanceGrad pulled = distance_grad(e1, e2, geometry);
  const DistanceGrad pushed = distance_grad(e1, e3, geometry);
  const double hinge = pulled.value - pushed.value + gamma;
  if (hinge <= 0.0) return out;
  out.loss = hinge;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    out.g1[i] = pulled.g_u[i] - pushed.g_u[i];
    out.g2[i] = pulled.g_v[i];
    out.g3[i] = -pushed.g_v[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initialization and the domain-embedding trainer.

namespace detail {

inline Vec init_vec(std::size_t dim, SplitMix64& rng) {
  Vec v(dim);
  for (double& x : v) x = rng.uniform(-0.001, 0.001);
  return v;
}

inline void clip_to_ball(Vec& v) {
  const double n = norm(v);
  const double limit = kBallRadius * (1.0 - 1e-10);
  if (n > limit) {
    const double scale = limit / n;
    for (double& x : v) x *= scale;
  }
}

}  // namespace detail

// Seeds every table of the space from uniform(−0.001, 0.001), which also
// guarantees an in-ball start for Poincaré geometry. Iteration order is
// canonical, so the result depends only on (library, config).
inline EmbeddingSpace init_space(const CrystalLibrary& lib,
                                 const TrainConfig& config) {
  EmbeddingSpace space;
  space.geometry = config.geometry;
  space.dim = config.dim;
  space.seed = config.seed;
  SplitMix64 rng(mix_seed(config.seed, 0x1A17));
  for (const DomainPath& d : lib.lattice().known()) {
    space.domains[d] = detail::init_vec(config.dim, rng);
  }
  for (const std::string& c : lib.all_concepts()) {
    space.concepts[c] = detail::init_vec(config.dim, rng);
  }
  for (const std::string& r : lib.meta().relation_names()) {
    space.relations[r] = detail::init_vec(config.dim, rng);
  }
  for (const std::string& r : lib.meta().relation_names()) {
    space.interactions[r] = detail::init_vec(config.dim, rng);
  }
  for (const std::string& c : lib.all_concepts()) {
    space.bias[c] = 0.0;
  }
  return space;
}

struct TrainingReport {
  std::vector<double> epoch_loss;
  double constraint_satisfaction = 0.0;
  std::size_t triplets_per_epoch = 0;
};

// Mini-batch gradient descent on the mean triplet hinge over the lattice.
// Each epoch visits every strict (child, parent) pair once and draws
// negatives_per_positive off-path domains for it. Poincaré updates take the
// plain gradient of the distance formula and then retract by norm clipping.
inline std::pair<EmbeddingSpace, TrainingReport> train_domain_embeddings(
    const CrystalLibrary& lib, const TrainConfig& config) {
  detail::TripletPool pool = detail::build_triplet_pool(lib.lattice());
  if (pool.pairs.empty()) {
    throw InsufficientLattice(
        "no valid (child, parent, off-path) triplet exists in this lattice");
  }
  EmbeddingSpace space = init_space(lib, config);
  TrainingReport report;
  report.triplets_per_epoch = pool.pairs.size() * config.negatives_per_positive;

  SplitMix64 rng(mix_seed(config.seed, 0x7231));
  auto run_batch = [&](bool apply_update) {
    std::map<DomainPath, Vec> grads;
    double total_loss = 0.0;
    std::size_t n = 0;
    for (const auto& pair : pool.pairs) {
      for (std::size_t k = 0; k < config.negatives_per_positive; ++k) {
        const DomainPath& off = pair.offs[rng.index(pair.offs.size())];
        const LatticeLossGrad g =
            lattice_loss_grad(space.domains.at(pair.child),
                              space.domains.at(pair.parent),
                              space.domains.at(off), config.margin,
                              config.geometry);
        total_loss += g.loss;
        ++n;
        if (!apply_update || g.loss == 0.0) continue;
        auto accumulate = [&](const DomainPath& d, const Vec& grad) {
          auto [it, fresh] = grads.emplace(d, Vec(config.dim, 0.0));
          (void)fresh;
          add_scaled(it->second, 1.0, grad);
        };
        accumulate(pair.child, g.g1);
        accumulate(pair.parent, g.g2);
        accumulate(off, g.g3);
      }
    }
    if (apply_update) {
      const double step = config.learning_rate / static_cast<double>(n);
      for (const auto& [d, grad] : grads) {
        Vec& e = space.domains.at(d);
        add_scaled(e, -step, grad);
        if (config.geometry == Geometry::poincare) detail::clip_to_ball(e);
      }
    }
    return total_loss / static_cast<double>(n);
  };

  if (config.epochs == 0) {
    report.epoch_loss.push_back(run_batch(/*apply_update=*/false));
  } else {
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      report.epoch_loss.push_back(run_batch(/*apply_update=*/true));
    }
  }

  SplitMix64 fresh(mix_seed(config.seed, 0xC5EC));
  const std::size_t samples = 500;
  std::size_t satisfied = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Triplet t = detail::draw_triplet(pool, fresh);
    const double pulled = distance(space.domains.at(t.child),
                                   space.domains.at(t.parent), config.geometry);
    const double pushed = distance(space.domains.at(t.child),
                                   space.domains.at(t.offpath), config.geometry);
    if (pulled <= pushed) ++satisfied;
  }
  report.constraint_satisfaction =
      static_cast<double>(satisfied) / static_cast<double>(samples);
  return {std::move(space), report};
}

// ---------------------------------------------------------------------------
// Concept-completion trainer: cross-entropy of concept_scores against the
// true object of each stored (non-negated) crystal. Gradients flow to
// h_concept, h_relation, v_relation and b_concept; domain vectors stay fixed.

struct CompletionGrads {
  std::map<std::string, Vec> concepts;
  std::map<std::string, Vec> relations;
  std::map<std::string, Vec> interactions;
  std::map<std::string, double> bias;
  double mean_loss = 0.0;
  std::size_t examples = 0;
};

inline CompletionGrads completion_grads(const CrystalLibrary& lib,
                                        const EmbeddingSpace& space,
                                        double temperature) {
  CompletionGrads out;
  std::map<DomainPath, std::vector<std::string>> support_cache;
  auto support_of = [&](const DomainPath& d) -> const std::vector<std::string>& {
    auto it = support_cache.find(d);
    if (it == support_cache.end()) {
      const auto s = effective_concepts(d, lib);
      it = support_cache.emplace(d, std::vector<std::string>(s.begin(), s.end()))
               .first;
    }
    return it->second;
  };
  double total_loss = 0.0;
  for (const auto& [_, f] : lib.fibers()) {
    for (const Crystal& c : f.crystals) {
      if (c.negated) continue;
      const auto& support = support_of(c.domain);
      const Vec h_rd = relation_in_domain(c.relation, c.domain, space);
      std::vector<double> z(support.size());
      double max_z = -1e300;
      for (std::size_t i = 0; i < support.size(); ++i) {
        z[i] = dot(h_rd, space.concept_vec(support[i])) / temperature +
               space.concept_bias(support[i]);
        max_z = std::max(max_z, z[i]);
      }
      double total = 0.0;
      for (double& v : z) {
        v = std::exp(v - max_z);
        total += v;
      }
      Vec d_h_rd(space.dim, 0.0);
      double loss = 0.0;
      for (std::size_t i = 0; i < support.size(); ++i) {
        const double p = z[i] / total;
        const bool is_target = support[i] == c.object;
        if (is_target) loss = -std::log(std::max(p, 1e-300));
        const double dz = p - (is_target ? 1.0 : 0.0);
        auto [cit, cfresh] =
            out.concepts.emplace(support[i], Vec(space.dim, 0.0));
        (void)cfresh;
        add_scaled(cit->second, dz / temperature, h_rd);
        out.bias[support[i]] += dz;
        add_scaled(d_h_rd, dz / temperature, space.concept_vec(support[i]));
      }
      auto [rit, rfresh] = out.relations.emplace(c.relation, Vec(space.dim, 0.0));
      (void)rfresh;
      add_scaled(rit->second, 1.0, d_h_rd);
      auto [vit, vfresh] =
          out.interactions.emplace(c.relation, Vec(space.dim, 0.0));
      (void)vfresh;
      const Vec& e_d = space.domain_vec(c.domain);
      for (std::size_t i = 0; i < space.dim; ++i) {
        vit->second[i] += e_d[i] * d_h_rd[i];
      }
      total_loss += loss;
      ++out.examples;
    }
  }
  if (out.examples == 0) {
    throw EmptyLibrary("no non-negated crystals to train on");
  }
  out.mean_loss = total_loss / static_cast<double>(out.examples);
  return out;
}

inline double completion_loss(const CrystalLibrary& lib,
                              const EmbeddingSpace& space, double temperature) {
  return completion_grads(lib, space, temperature).mean_loss;
}

struct CompletionReport {
  std::vector<double> epoch_loss;
  double final_cross_entropy = 0.0;
};

inline CompletionReport train_completion(const CrystalLibrary& lib,
                                         EmbeddingSpace& space,
                                         const TrainConfig& config) {
  CompletionReport report;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    CompletionGrads g = completion_grads(lib, space, config.temperature);
    report.epoch_loss.push_back(g.mean_loss);
    const double step =
        config.learning_rate / static_cast<double>(g.examples);
    for (const auto& [name, grad] : g.concepts) {
      add_scaled(space.concepts.at(name), -step, grad);
    }
    for (const auto& [name, grad] : g.relations) {
      add_scaled(space.relations.at(name), -step, grad);
    }
    for (const auto& [name, grad] : g.interactions) {
      add_scaled(space.interactions.at(name), -step, grad);
    }
    for (const auto& [name, grad] : g.bias) {
      space.bias.at(name) -= step * grad;
    }
  }
  report.final_cross_entropy =
      completion_grads(lib, space, config.temperature).mean_loss;
  return report;
}

// Convenience: domain-embedding training followed by completion training.
inline std::pair<EmbeddingSpace, TrainingReport> train_embeddings(
    const CrystalLibrary& lib, const TrainConfig& config,
    std::size_t completion_epochs, CompletionReport* completion = nullptr) {
  auto [space, report] = train_domain_embeddings(lib, config);
  if (completion_epochs > 0) {
    TrainConfig cc = config;
    cc.epochs = completion_epochs;
    CompletionReport cr = train_completion(lib, space, cc);
    if (completion != nullptr) *completion = std::move(cr);
  }
  return {std::move(space), report};
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks.

enum class LossKind { lattice, completion, poincare_distance };

namespace detail {

inline double grad_rel_err(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  const double denom = std::max(std::abs(analytic), std::abs(numeric));
  if (denom < 1e-6) return diff;  // absolute regime near zero
  return diff / denom;
}

template <typename Loss>
double fd_check_vec(const Loss& loss, Vec& point, const Vec& analytic,
                    double h) {
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = loss();
    point[i] = saved - h;
    const double down = loss();
    point[i] = saved;
    worst = std::max(worst, grad_rel_err(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

}  // namespace detail

// Compares analytic gradients with central finite differences at a random
// point in the loss's domain, resampled away from hinge kinks. Returns the
// max relative error over all coordinates.
inline double grad_check(LossKind kind, SplitMix64& rng,
                         Geometry geometry = Geometry::euclidean) {
  if (kind == LossKind::poincare_distance) {
    const std::size_t dim = 8;
    Vec u(dim), v(dim);
    do {
      for (double& x : u) x = rng.uniform(-0.25, 0.25);
      for (double& x : v) x = rng.uniform(-0.25, 0.25);
    } while (euclidean_distance(u, v) < 1e-2);
    const DistanceGrad g = poincare_distance_grad(u, v);
    auto loss_u = [&] { return poincare_distance(u, v); };
    double worst = detail::fd_check_vec(loss_u, u, g.g_u, 1e-6);
    worst = std::max(worst, detail::fd_check_vec(loss_u, v, g.g_v, 1e-6));
    return worst;
  }

  if (kind == LossKind::lattice) {
    const std::size_t dim = 8;
    const double gamma = 0.5;
    const double lo = geometry == Geometry::poincare ? -0.25 : -1.0;
    const double hi = -lo;
    const double h = geometry == Geometry::poincare ? 1e-6 : 1e-5;
    Vec e1(dim), e2(dim), e3(dim);
    double pulled = 0.0, pushed = 0.0;
    do {
      for (double& x : e1) x = rng.uniform(lo, hi);
      for (double& x : e2) x = rng.uniform(lo, hi);
      for (double& x : e3) x = rng.uniform(lo, hi);
      pulled = distance(e1, e2, geometry);
      pushed = distance(e1, e3, geometry);
    } while (std::abs(pulled - pushed + gamma) < 1e-3 || pulled < 1e-2 ||
             pushed < 1e-2);
    const LatticeLossGrad g = lattice_loss_grad(e1, e2, e3, gamma, geometry);
    auto loss = [&] { return lattice_loss(e1, e2, e3, gamma, geometry); };
    double worst = detail::fd_check_vec(loss, e1, g.g1, h);
    worst = std::max(worst, detail::fd_check_vec(loss, e2, g.g2, h));
    worst = std::max(worst, detail::fd_check_vec(loss, e3, g.g3, h));
    return worst;
  }

  // Completion loss on a small fixture library.
  CrystalLibrary lib;
  insert(make_crystal("atom", "is_a", DomainPath::parse("@Physics"),
                      "particle"),
         lib);
  insert(make_crystal("electron", "part_of",
                      DomainPath::parse("@Physics@Quantum"), "atom"),
         lib);
  insert(make_crystal("reactor", "requires", DomainPath::parse("@Engineering"),
                      "fuel"),
         lib);
  TrainConfig config;
  config.dim = 6;
  config.seed = rng.next();
  EmbeddingSpace space = init_space(lib, config);
  // Move parameters off the near-zero init so gradients are informative.
  SplitMix64 jitter(rng.next());
  for (auto& [_, v] : space.concepts) {
    for (double& x : v) x = jitter.uniform(-0.5, 0.5);
  }
  for (auto& [_, v] : space.relations) {
    for (double& x : v) x = jitter.uniform(-0.5, 0.5);
  }
  for (auto& [_, v] : space.interactions) {
    for (double& x : v) x = jitter.uniform(-0.5, 0.5);
  }
  for (auto& [_, b] : space.bias) b = jitter.uniform(-0.5, 0.5);

  const CompletionGrads g = completion_grads(lib, space, 1.0);
  auto loss = [&] { return completion_loss(lib, space, 1.0); };
  double worst = 0.0;
  const double h = 1e-5;
  for (auto& [name, grad] : g.concepts) {
    worst = std::max(worst,
                     detail::fd_check_vec(loss, space.concepts.at(name),
                                          scaled(grad, 1.0 / g.examples), h));
  }
  for (auto& [name, grad] : g.relations) {
    worst = std::max(worst,
                     detail::fd_check_vec(loss, space.relations.at(name),
                                          scaled(grad, 1.0 / g.examples), h));
  }
  for (auto& [name, grad] : g.interactions) {
    worst = std::max(worst,
                     detail::fd_check_vec(loss, space.interactions.at(name),
                                          scaled(grad, 1.0 / g.examples), h));
  }
  for (auto& [name, grad] : g.bias) {
    double& b = space.bias.at(name);
    const double saved = b;
    b = saved + h;
    const double up = loss();
    b = saved - h;
    const double down = loss();
    b = saved;
    worst = std::max(worst, detail::grad_rel_err(grad / g.examples,
                                                 (up - down) / (2.0 * h)));
  }
  return worst;
}

}  // namespace dalm
