#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// must stay independent of the library code paths they check: they use plain
// scans, closures and sorts, never the fast-path implementations.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dalm/dalm.hpp"

namespace testutil {

inline dalm::DomainPath dp(const std::string& text) {
  return dalm::DomainPath::parse(text);
}

// Random segment pool kept tiny so generated paths collide and nest often.
inline dalm::DomainPath random_path(dalm::SplitMix64& rng,
                                    std::size_t max_depth = 4) {
  static const std::vector<std::string> pool = {"A", "B", "C", "D", "E"};
  const std::size_t depth = rng.index(max_depth + 1);
  std::vector<std::string> segments;
  for (std::size_t i = 0; i < depth; ++i) {
    segments.push_back(pool[rng.index(pool.size())]);
  }
  return dalm::DomainPath(segments);
}

// Random lattice with `target` registered domains (prefix closure counts).
inline dalm::DomainLattice random_lattice(dalm::SplitMix64& rng,
                                          std::size_t target,
                                          std::size_t max_depth = 4) {
  dalm::DomainLattice lattice;
  std::size_t guard = 0;
  while (lattice.size() < target && ++guard < target * 50) {
    lattice.register_domain(random_path(rng, max_depth));
  }
  return lattice;
}

// Complete tree lattice: depth levels, `branching` children per node.
inline dalm::DomainLattice tree_lattice(std::size_t depth,
                                        std::size_t branching) {
  dalm::DomainLattice lattice;
  std::vector<dalm::DomainPath> frontier{dalm::DomainPath::top()};
  for (std::size_t level = 0; level < depth; ++level) {
    std::vector<dalm::DomainPath> next;
    for (const auto& node : frontier) {
      for (std::size_t b = 0; b < branching; ++b) {
        auto child = node.child("n" + std::to_string(b));
        lattice.register_domain(child);
        next.push_back(child);
      }
    }
    frontier = std::move(next);
  }
  return lattice;
}

// Oracle: meet is the ⊑-least common generalization. Checks the defining
// property directly against every registered domain.
inline bool meet_characterization_holds(const dalm::DomainPath& d1,
                                        const dalm::DomainPath& d2,
                                        const dalm::DomainLattice& lattice) {
  const dalm::DomainPath m = dalm::meet(d1, d2);
  if (!d1.specializes(m) || !d2.specializes(m)) return false;
  for (const auto& e : lattice.known()) {
    if (d1.specializes(e) && d2.specializes(e) && !m.specializes(e)) {
      return false;
    }
  }
  return true;
}

// Oracle: any registered common specialization of d1 and d2?
inline bool common_specialization_exists(const dalm::DomainPath& d1,
                                         const dalm::DomainPath& d2,
                                         const dalm::DomainLattice& lattice) {
  for (const auto& e : lattice.known()) {
    if (e.specializes(d1) && e.specializes(d2)) return true;
  }
  return false;
}

// Oracle: Kahn's algorithm. True iff the directed edge set is acyclic.
inline bool is_dag(const std::vector<std::pair<std::string, std::string>>& edges) {
  std::map<std::string, std::set<std::string>> adj;
  std::map<std::string, std::size_t> indegree;
  for (const auto& [from, to] : edges) {
    if (adj[from].insert(to).second) ++indegree[to];
    indegree.emplace(from, indegree[from]);
  }
  std::vector<std::string> ready;
  for (const auto& [node, deg] : indegree) {
    if (deg == 0) ready.push_back(node);
  }
  std::size_t removed = 0;
  while (!ready.empty()) {
    const std::string node = ready.back();
    ready.pop_back();
    ++removed;
    for (const auto& next : adj[node]) {
      if (--indegree[next] == 0) ready.push_back(next);
    }
  }
  return removed == indegree.size();
}

// Oracle: reflexive-transitive reachability by repeated relaxation.
inline bool closure_has_path(
    const std::vector<std::pair<std::string, std::string>>& edges,
    const std::string& from, const std::string& to) {
  if (from == to) return true;
  std::set<std::pair<std::string, std::string>> closure(edges.begin(),
                                                         edges.end());
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::pair<std::string, std::string>> fresh;
    for (const auto& [a, b] : closure) {
      for (const auto& [c, d] : closure) {
        if (b == c && !closure.count({a, d})) fresh.emplace_back(a, d);
      }
    }
    for (const auto& e : fresh) changed |= closure.insert(e).second;
  }
  return closure.count({from, to}) > 0;
}

inline dalm::Crystal cr(const std::string& s, const std::string& r,
                        const std::string& d, const std::string& o,
                        bool negated = false) {
  return dalm::make_crystal(s, r, dp(d), o, negated);
}

// The running textbook fixture: Apple/Atom facts across four branches.
inline dalm::CrystalLibrary atom_library() {
  dalm::CrystalLibrary lib;
  dalm::insert(cr("Atom", "is_a", "@Physics", "Particle"), lib);
  dalm::insert(cr("Wave", "contrasts_with", "@Physics", "Particle"), lib);
  dalm::insert(cr("Atom", "is_a", "@Physics@Quantum", "Field_Excitation"), lib);
  dalm::insert(cr("Atom", "is_a", "@Physics@Classical", "Point_Mass"), lib);
  dalm::insert(cr("Atom", "is_a", "@Chemistry@Dalton", "Indivisible_Particle"),
               lib);
  dalm::insert(cr("Atom", "is_a", "@CS@Concurrent", "Atomic_Operation"), lib);
  return lib;
}

}  // namespace testutil
