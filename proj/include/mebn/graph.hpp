#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mebn {

struct Arc {
  std::size_t from = 0;
  std::size_t to = 0;
  auto operator<=>(const Arc&) const = default;
};

// Directed acyclic graph over named nodes. At most one node may be the
// discrete group node; it never has parents. Nodes are addressed by index
// into nodes(); names are the stable identity used for tie-breaking.
class Dag {
 public:
  Dag() = default;

  explicit Dag(std::vector<std::string> nodes,
               std::optional<std::string> group_node = std::nullopt)
      : names_(std::move(nodes)), adj_(names_.size() * names_.size(), 0) {
    std::set<std::string> seen;
    for (const auto& n : names_)
      if (!seen.insert(n).second)
        throw std::invalid_argument("duplicate node id '" + n + "'");
    if (group_node) group_ = index_of(*group_node);
  }

  // Builds a DAG and validates every invariant.
  static Dag from_arcs(std::vector<std::string> nodes,
                       const std::vector<std::pair<std::string, std::string>>& arcs,
                       std::optional<std::string> group_node = std::nullopt) {
    Dag g(std::move(nodes), std::move(group_node));
    for (const auto& [u, v] : arcs) g.insert_checked(g.index_of(u), g.index_of(v));
    if (!g.acyclic()) throw std::invalid_argument("arc set contains a directed cycle");
    return g;
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& nodes() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::optional<std::size_t> group_index() const { return group_; }
  bool is_group(std::size_t i) const { return group_ && *group_ == i; }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    throw std::invalid_argument("unknown node id '" + name + "'");
  }

  bool has_arc(std::size_t u, std::size_t v) const { return adj_[u * size() + v] != 0; }
  bool adjacent(std::size_t u, std::size_t v) const { return has_arc(u, v) || has_arc(v, u); }

  // Arcs in (from, to) index order.
  std::vector<Arc> arcs() const {
    std::vector<Arc> out;
    for (std::size_t u = 0; u < size(); ++u)
      for (std::size_t v = 0; v < size(); ++v)
        if (has_arc(u, v)) out.push_back({u, v});
    return out;
  }

  std::size_t arc_count() const {
    return static_cast<std::size_t>(std::count(adj_.begin(), adj_.end(), char{1}));
  }

  // Parents of v in increasing index order.
  std::vector<std::size_t> parents(std::size_t v) const {
    std::vector<std::size_t> out;
    for (std::size_t u = 0; u < size(); ++u)
      if (has_arc(u, v)) out.push_back(u);
    return out;
  }

  // Parents of v excluding the group node.
  std::vector<std::size_t> continuous_parents(std::size_t v) const {
    auto p = parents(v);
    std::erase_if(p, [&](std::size_t u) { return is_group(u); });
    return p;
  }

  std::vector<std::size_t> children(std::size_t u) const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < size(); ++v)
      if (has_arc(u, v)) out.push_back(v);
    return out;
  }

  // True iff `to` is reachable from `from` along directed arcs.
  bool reachable(std::size_t from, std::size_t to) const {
    std::vector<char> seen(size(), 0);
    std::vector<std::size_t> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      if (u == to) return true;
      for (std::size_t v = 0; v < size(); ++v)
        if (has_arc(u, v) && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
    }
    return false;
  }

  bool acyclic() const {
    // Kahn: acyclic iff every node can be removed.
    std::vector<std::size_t> indeg(size(), 0);
    for (auto a : arcs()) ++indeg[a.to];
    std::vector<std::size_t> ready;
    for (std::size_t v = 0; v < size(); ++v)
      if (indeg[v] == 0) ready.push_back(v);
    std::size_t removed = 0;
    while (!ready.empty()) {
      auto u = ready.back();
      ready.pop_back();
      ++removed;
      for (std::size_t v = 0; v < size(); ++v)
        if (has_arc(u, v) && --indeg[v] == 0) ready.push_back(v);
    }
    return removed == size();
  }

  // Unchecked mutation; callers are responsible for acyclicity.
  void set_arc(std::size_t u, std::size_t v, bool present) { adj_[u * size() + v] = present ? 1 : 0; }

  friend bool operator==(const Dag&, const Dag&) = default;

 private:
  void insert_checked(std::size_t u, std::size_t v) {
    if (u == v) throw std::invalid_argument("self-loop on '" + names_[u] + "'");
    if (is_group(v)) throw std::invalid_argument("the group node cannot have parents");
    if (has_arc(u, v)) throw std::invalid_argument("duplicate arc " + names_[u] + "->" + names_[v]);
    set_arc(u, v, true);
  }

  std::vector<std::string> names_;
  std::vector<char> adj_;
  std::optional<std::size_t> group_;
};

inline bool is_acyclic(const Dag& dag) { return dag.acyclic(); }

// Topological order with ties broken by node id (lexicographic).
inline std::vector<std::size_t> topological_order(const Dag& dag) {
  const auto n = dag.size();
  std::vector<std::size_t> indeg(n, 0);
  for (auto a : dag.arcs()) ++indeg[a.to];
  auto later = [&](std::size_t a, std::size_t b) { return dag.name(a) > dag.name(b); };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> ready(later);
  for (std::size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push(v);
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    auto u = ready.top();
    ready.pop();
    order.push_back(u);
    for (std::size_t v = 0; v < n; ++v)
      if (dag.has_arc(u, v) && --indeg[v] == 0) ready.push(v);
  }
  if (order.size() != n) throw std::invalid_argument("topological_order: graph has a directed cycle");
  return order;
}

inline std::vector<std::string> topological_names(const Dag& dag) {
  std::vector<std::string> out;
  for (auto i : topological_order(dag)) out.push_back(dag.name(i));
  return out;
}

// ---------------------------------------------------------------------------
// CPDAG

// Completed partially directed graph of a Markov-equivalence class.
struct Cpdag {
  std::vector<std::string> nodes;
  std::set<Arc> directed;    // compelled arcs
  std::set<Arc> undirected;  // reversible edges, stored with from < to

  enum class Edge { None, Forward, Backward, Undirected };

  // Status of the pair (u, v) seen from u.
  Edge edge(std::size_t u, std::size_t v) const {
    if (directed.contains({u, v})) return Edge::Forward;
    if (directed.contains({v, u})) return Edge::Backward;
    if (undirected.contains({std::min(u, v), std::max(u, v)})) return Edge::Undirected;
    return Edge::None;
  }

  friend bool operator==(const Cpdag&, const Cpdag&) = default;
};

// Compelled-arc labelling: v-structures (plus every arc out of the group
// node) are oriented first, then Meek's rules R1-R4 are applied to closure.
inline Cpdag to_cpdag(const Dag& dag) {
  if (!dag.acyclic()) throw std::invalid_argument("to_cpdag: graph has a directed cycle");
  const auto n = dag.size();
  // 0 = none, 1 = u->v oriented, 2 = undirected (stored symmetric).
  std::vector<int> m(n * n, 0);
  auto at = [&](std::size_t u, std::size_t v) -> int& { return m[u * n + v]; };
  auto adj = [&](std::size_t u, std::size_t v) { return at(u, v) != 0 || at(v, u) != 0; };
  auto dir = [&](std::size_t u, std::size_t v) { return at(u, v) == 1; };
  auto und = [&](std::size_t u, std::size_t v) { return at(u, v) == 2; };
  auto orient = [&](std::size_t u, std::size_t v) {
    at(u, v) = 1;
    at(v, u) = 0;
  };

  for (auto a : dag.arcs()) at(a.from, a.to) = at(a.to, a.from) = 2;
  for (auto a : dag.arcs())
    if (dag.is_group(a.from) || dag.is_group(a.to)) orient(a.from, a.to);
  for (std::size_t c = 0; c < n; ++c) {
    auto pa = dag.parents(c);
    for (std::size_t i = 0; i < pa.size(); ++i)
      for (std::size_t j = i + 1; j < pa.size(); ++j)
        if (!dag.adjacent(pa[i], pa[j])) {
          orient(pa[i], c);
          orient(pa[j], c);
        }
  }

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        if (!und(a, b)) continue;
        bool fire = false;
        for (std::size_t c = 0; c < n && !fire; ++c) {
          if (c == a || c == b) continue;
          // R1: c -> a - b, c and b nonadjacent.
          if (dir(c, a) && !adj(c, b)) fire = true;
          // R2: a -> c -> b with a - b.
          else if (dir(a, c) && dir(c, b)) fire = true;
        }
        // R3: a - c -> b and a - d -> b, c and d nonadjacent.
        for (std::size_t c = 0; c < n && !fire; ++c) {
          if (c == a || c == b || !und(a, c) || !dir(c, b)) continue;
          for (std::size_t d = c + 1; d < n && !fire; ++d)
            if (d != a && d != b && und(a, d) && dir(d, b) && !adj(c, d)) fire = true;
        }
        // R4: a - c -> d -> b with a adjacent to d, c and b nonadjacent.
        for (std::size_t c = 0; c < n && !fire; ++c) {
          if (c == a || c == b || !und(a, c) || adj(c, b)) continue;
          for (std::size_t d = 0; d < n && !fire; ++d)
            if (d != a && d != b && d != c && dir(c, d) && dir(d, b) && adj(a, d)) fire = true;
        }
        if (fire) {
          orient(a, b);
          changed = true;
        }
      }
  }

  Cpdag out{dag.nodes(), {}, {}};
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      if (dir(u, v)) out.directed.insert({u, v});
      if (u < v && und(u, v)) out.undirected.insert({u, v});
    }
  return out;
}

// ---------------------------------------------------------------------------
// Arc constraints and local moves

struct ArcConstraints {
  std::set<Arc> required;
  std::set<Arc> forbidden;

  bool consistent(const Dag& dag) const {
    for (auto a : required)
      if (forbidden.contains(a)) return false;
    Dag only(dag.nodes());
    for (auto a : required) only.set_arc(a.from, a.to, true);
    return only.acyclic();
  }

  bool satisfied_by(const Dag& dag) const {
    for (auto a : required)
      if (!dag.has_arc(a.from, a.to)) return false;
    for (auto a : forbidden)
      if (dag.has_arc(a.from, a.to)) return false;
    return true;
  }
};

enum class MoveType { Add = 0, Delete = 1, Reverse = 2 };

struct Move {
  MoveType type = MoveType::Add;
  Arc arc;
  auto operator<=>(const Move&) const = default;
};

inline Move inverse(const Move& m) {
  switch (m.type) {
    case MoveType::Add: return {MoveType::Delete, m.arc};
    case MoveType::Delete: return {MoveType::Add, m.arc};
    case MoveType::Reverse: return {MoveType::Reverse, {m.arc.to, m.arc.from}};
  }
  return m;
}

enum class Rejection { Cycle, Constraint, DuplicateArc, MissingArc };

inline const char* to_string(Rejection r) {
  switch (r) {
    case Rejection::Cycle: return "cycle";
    case Rejection::Constraint: return "constraint";
    case Rejection::DuplicateArc: return "duplicate-arc";
    case Rejection::MissingArc: return "missing-arc";
  }
  return "?";
}

using MoveResult = std::variant<Dag, Rejection>;

inline MoveResult apply_move(const Dag& dag, const Move& move, const ArcConstraints& constraints) {
  const auto [u, v] = move.arc;
  if (u == v) return Rejection::Cycle;
  Dag out = dag;
  switch (move.type) {
    case MoveType::Add:
      if (dag.has_arc(u, v)) return Rejection::DuplicateArc;
      if (constraints.forbidden.contains({u, v}) || dag.is_group(v)) return Rejection::Constraint;
      if (dag.has_arc(v, u) || dag.reachable(v, u)) return Rejection::Cycle;
      out.set_arc(u, v, true);
      break;
    case MoveType::Delete:
      if (!dag.has_arc(u, v)) return Rejection::MissingArc;
      if (constraints.required.contains({u, v})) return Rejection::Constraint;
      out.set_arc(u, v, false);
      break;
    case MoveType::Reverse:
      if (!dag.has_arc(u, v)) return Rejection::MissingArc;
      if (constraints.required.contains({u, v}) || constraints.forbidden.contains({v, u}) ||
          dag.is_group(u))
        return Rejection::Constraint;
      out.set_arc(u, v, false);
      if (out.reachable(u, v)) return Rejection::Cycle;
      out.set_arc(v, u, true);
      break;
  }
  return out;
}

}  // namespace mebn
