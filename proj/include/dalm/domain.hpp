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
#include <string_view>
#include <vector>

#include "dalm/errors.hpp"

namespace dalm {

// Hierarchical domain identifier. The empty segment list is the top element,
// rendered as the single character "@"; deeper domains render as
// "@Physics@Quantum". Ordering is lexicographic over segments, which puts the
// top element first and keeps every container iteration canonical.
//
// Terminology follows the source material: d1 "specializes" d2 when d2 is a
// prefix of d1, and "meet" names the most specific common generalization
// (the longest common prefix) even though order theory with a top element
// would call that operation a join.
class DomainPath {
 public:
  DomainPath() = default;

  explicit DomainPath(std::vector<std::string> segments)
      : segments_(std::move(segments)) {
    for (const auto& s : segments_) validate_segment(s);
  }

  static DomainPath top() { return DomainPath(); }

  // Grammar: domain := "@" | ("@" segment)+ with segment = [A-Za-z0-9_]+.
  static DomainPath parse(std::string_view text) {
    if (text.empty() || text.front() != '@') {
      throw MissingLeadingAt("domain must start with '@': \"" +
                             std::string(text) + "\"");
    }
    if (text == "@") return top();
    std::vector<std::string> segments;
    std::string current;
    for (std::size_t i = 1; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '@') {
        if (current.empty()) {
          throw EmptySegment("empty segment in \"" + std::string(text) + "\"");
        }
        segments.push_back(std::move(current));
        current.clear();
      } else {
        if (!legal_segment_char(c)) {
          throw IllegalCharacter("illegal character '" + std::string(1, c) +
                                 "' in \"" + std::string(text) + "\"");
        }
        current.push_back(c);
      }
    }
    if (current.empty()) {
      throw EmptySegment("empty segment in \"" + std::string(text) + "\"");
    }
    segments.push_back(std::move(current));
    return DomainPath(std::move(segments));
  }

  const std::vector<std::string>& segments() const { return segments_; }
  std::size_t depth() const { return segments_.size(); }
  bool is_top() const { return segments_.empty(); }

  std::string str() const {
    if (segments_.empty()) return "@";
    std::string out;
    for (const auto& s : segments_) {
      out.push_back('@');
      out += s;
    }
    return out;
  }

  // *this ⊑ other: other's segment list is a prefix of ours.
  bool specializes(const DomainPath& other) const {
    if (other.segments_.size() > segments_.size()) return false;
    return std::equal(other.segments_.begin(), other.segments_.end(),
                      segments_.begin());
  }

  DomainPath parent() const {
    if (segments_.empty()) return *this;
    return DomainPath(
        std::vector<std::string>(segments_.begin(), segments_.end() - 1));
  }

  // Strict ancestors, nearest first, ending with top.
  std::vector<DomainPath> ancestors() const {
    std::vector<DomainPath> out;
    DomainPath p = *this;
    while (!p.is_top()) {
      p = p.parent();
      out.push_back(p);
    }
    return out;
  }

  DomainPath child(const std::string& segment) const {
    validate_segment(segment);
    std::vector<std::string> segments = segments_;
    segments.push_back(segment);
    return DomainPath(std::move(segments));
  }

  auto operator<=>(const DomainPath&) const = default;

 private:
  static bool legal_segment_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
           (c >= '0' && c <= '9') || c == '_';
  }

  static void validate_segment(const std::string& s) {
    if (s.empty()) throw EmptySegment("empty segment");
    for (char c : s) {
      if (!legal_segment_char(c)) {
        throw IllegalCharacter("illegal character '" + std::string(1, c) +
                               "' in segment \"" + s + "\"");
      }
    }
  }

  std::vector<std::string> segments_;
};

// Most specific common generalization: the longest common prefix.
inline DomainPath meet(const DomainPath& d1, const DomainPath& d2) {
  const auto& a = d1.segments();
  const auto& b = d2.segments();
  std::vector<std::string> prefix;
  for (std::size_t i = 0; i < a.size() && i < b.size() && a[i] == b[i]; ++i) {
    prefix.push_back(a[i]);
  }
  return DomainPath(std::move(prefix));
}

inline bool comparable(const DomainPath& d1, const DomainPath& d2) {
  return d1.specializes(d2) || d2.specializes(d1);
}

// Common specialization. In a prefix hierarchy two incomparable paths have
// none, so the result is the deeper path when comparable and absent otherwise.
inline std::optional<DomainPath> join(const DomainPath& d1,
                                      const DomainPath& d2) {
  if (d1.specializes(d2)) return d1;
  if (d2.specializes(d1)) return d2;
  return std::nullopt;
}

// Finite registry of known domains, closed under ancestor prefixes. The top
// element is always registered.
class DomainLattice {
 public:
  DomainLattice() { known_.insert(DomainPath::top()); }

  void register_domain(const DomainPath& d) {
    DomainPath current = DomainPath::top();
    for (const auto& segment : d.segments()) {
      DomainPath next = current.child(segment);
      if (known_.insert(next).second) {
        children_[current].insert(next);
      }
      current = std::move(next);
    }
  }

  bool contains(const DomainPath& d) const { return known_.count(d) > 0; }

  const std::set<DomainPath>& known() const { return known_; }

  std::size_t size() const { return known_.size(); }

  std::size_t max_depth() const {
    std::size_t d = 0;
    for (const auto& p : known_) d = std::max(d, p.depth());
    return d;
  }

  const std::set<DomainPath>& children(const DomainPath& d) const {
    static const std::set<DomainPath> empty;
    auto it = children_.find(d);
    return it == children_.end() ? empty : it->second;
  }

  std::size_t max_branching() const {
    std::size_t b = 0;
    for (const auto& [_, kids] : children_) b = std::max(b, kids.size());
    return b;
  }

  // Deepest registered prefix of d (top when nothing deeper is known).
  DomainPath nearest_registered_ancestor(const DomainPath& d) const {
    DomainPath best = DomainPath::top();
    DomainPath current = DomainPath::top();
    for (const auto& segment : d.segments()) {
      current = current.child(segment);
      if (!contains(current)) break;
      best = current;
    }
    return best;
  }

  // Greatest registered x with meet(x, d1) ⊑ d2. Closed form over the prefix
  // hierarchy: top when d2 is top, d2 when d1 ⊑ d2, absent otherwise.
  // implication_brute_force is the defining maximization and must agree.
  std::optional<DomainPath> implication(const DomainPath& d1,
                                        const DomainPath& d2) const {
    require_registered(d1);
    require_registered(d2);
    if (d2.is_top()) return DomainPath::top();
    if (d1.specializes(d2)) return d2;
    return std::nullopt;
  }

  std::optional<DomainPath> implication_brute_force(
      const DomainPath& d1, const DomainPath& d2) const {
    require_registered(d1);
    require_registered(d2);
    std::vector<DomainPath> qualifying;
    for (const auto& x : known_) {
      if (meet(x, d1).specializes(d2)) qualifying.push_back(x);
    }
    if (qualifying.empty()) return std::nullopt;
    // Keep the ⊑-maximal qualifying elements (the least specialized ones).
    std::vector<DomainPath> maximal;
    for (const auto& x : qualifying) {
      bool dominated = false;
      for (const auto& y : qualifying) {
        if (y != x && x.specializes(y)) {
          dominated = true;
          break;
        }
      }
      if (!dominated) maximal.push_back(x);
    }
    if (maximal.size() > 1) {
      throw AmbiguousImplication("implication(" + d1.str() + ", " + d2.str() +
                                 ") has " + std::to_string(maximal.size()) +
                                 " incomparable maximal solutions");
    }
    return maximal.front();
  }

  bool operator==(const DomainLattice& other) const {
    return known_ == other.known_;
  }

 private:
  void require_registered(const DomainPath& d) const {
    if (!contains(d)) {
      throw UnregisteredDomain("domain " + d.str() + " is not registered");
    }
  }

  std::set<DomainPath> known_;
  std::map<DomainPath, std::set<DomainPath>> children_;
};

}  // namespace dalm
