#pragma once

// Interaction graphs over agents: weighted directed construction from events,
// neighborhood centroids, undirected binarization, Louvain communities,
// degree-preserving rewiring and dyadic link features.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vissoc/core.hpp"
#include "vissoc/data_model.hpp"
#include "vissoc/stats.hpp"
#include "vissoc/style_vector.hpp"

namespace vissoc {

constexpr double kLikeWeight = 1.0;
constexpr double kCommentWeight = 2.0;
constexpr double kFollowWeight = 3.0;

struct EdgeCounts {
  std::int64_t likes = 0;
  std::int64_t comments = 0;
  std::int64_t follows = 0;

  [[nodiscard]] double weight() const {
    return kLikeWeight * static_cast<double>(likes) + kCommentWeight * static_cast<double>(comments) +
           kFollowWeight * static_cast<double>(follows);
  }
};

/// Weighted directed graph; w(a, b) = likes + 2 comments + 3 follows from a to b.
class InteractionGraph {
 public:
  using Adjacency = std::vector<std::pair<std::size_t, double>>;  // sorted by neighbor index

  InteractionGraph() = default;

  InteractionGraph(std::vector<std::string> nodes, const std::map<std::pair<std::size_t, std::size_t>, EdgeCounts>& edges)
      : nodes_(std::move(nodes)), out_(nodes_.size()), in_(nodes_.size()) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i], i);
    for (const auto& [key, counts] : edges) {
      const double w = counts.weight();
      if (w <= 0) continue;
      out_[key.first].emplace_back(key.second, w);
      in_[key.second].emplace_back(key.first, w);
      counts_.emplace(key, counts);
    }
    for (auto& a : in_) std::sort(a.begin(), a.end());
  }

  [[nodiscard]] const std::vector<std::string>& nodes() const { return nodes_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] std::optional<std::size_t> index(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  [[nodiscard]] const Adjacency& out_edges(std::size_t i) const { return out_[i]; }
  [[nodiscard]] const Adjacency& in_edges(std::size_t i) const { return in_[i]; }

  [[nodiscard]] double weight(std::size_t a, std::size_t b) const {
    const auto& adj = out_[a];
    auto it = std::lower_bound(adj.begin(), adj.end(), std::make_pair(b, -1.0));
    return it != adj.end() && it->first == b ? it->second : 0.0;
  }
  [[nodiscard]] double weight(const std::string& a, const std::string& b) const {
    auto ia = index(a), ib = index(b);
    return ia && ib ? weight(*ia, *ib) : 0.0;
  }
  [[nodiscard]] EdgeCounts counts(std::size_t a, std::size_t b) const {
    auto it = counts_.find({a, b});
    return it == counts_.end() ? EdgeCounts{} : it->second;
  }
  [[nodiscard]] std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& a : out_) n += a.size();
    return n;
  }

 private:
  std::vector<std::string> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Adjacency> out_, in_;
  std::map<std::pair<std::size_t, std::size_t>, EdgeCounts> counts_;
};

struct GraphOptions {
  std::optional<TimeWindow> window;
  bool include_human_likes = false;
};

/// Builds the interaction graph over every agent in the dataset. Only events
/// inside `window` count (all events when absent); follows are windowed by
/// their event time. Self-interactions are ignored.
inline InteractionGraph build_interaction_graph(const Dataset& d, const GraphOptions& opts = {}) {
  std::vector<std::string> nodes;
  nodes.reserve(d.agents.size());
  for (const auto& a : d.agents) nodes.push_back(a.agent_id);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < nodes.size(); ++i) idx.emplace(nodes[i], i);

  std::map<std::pair<std::size_t, std::size_t>, EdgeCounts> edges;
  for (const auto& e : d.interactions) {
    if (opts.window && !opts.window->contains(e.created_at)) continue;
    if (e.kind == InteractionKind::like && e.human.value_or(false) && !opts.include_human_likes) continue;
    if (e.source == e.target) continue;
    auto s = idx.find(e.source), t = idx.find(e.target);
    if (s == idx.end() || t == idx.end()) continue;
    auto& c = edges[{s->second, t->second}];
    switch (e.kind) {
      case InteractionKind::like: ++c.likes; break;
      case InteractionKind::comment: ++c.comments; break;
      case InteractionKind::follow: ++c.follows; break;
    }
  }
  return InteractionGraph(std::move(nodes), edges);
}

inline InteractionGraph build_interaction_graph(const Dataset& d, std::optional<TimeWindow> window) {
  GraphOptions o;
  o.window = window;
  return build_interaction_graph(d, o);
}

/// Weighted mean of out-neighbor centroids, sum(w_ab mu_b) / sum(w_ab), over
/// neighbors for which `lookup(agent_id)` returns a centroid.
template <std::invocable<const std::string&> Lookup>
std::optional<StyleCentroid> neighborhood_centroid(const InteractionGraph& g, const std::string& agent, Lookup&& lookup) {
  const auto i = g.index(agent);
  if (!i) return std::nullopt;
  StyleCentroid out;
  double total = 0.0;
  for (const auto& [j, w] : g.out_edges(*i)) {
    const StyleCentroid* c = lookup(g.nodes()[j]);
    if (!c) continue;
    if (out.components.empty()) out.components.assign(c->components.size(), 0.0);
    if (c->components.size() != out.components.size()) throw Error("neighborhood_centroid: dimension mismatch");
    for (std::size_t k = 0; k < out.components.size(); ++k) out.components[k] += w * c->components[k];
    total += w;
    ++out.support_count;
    out.window_index = c->window_index;
  }
  if (out.support_count == 0 || !(total > 0)) return std::nullopt;
  for (double& x : out.components) x /= total;
  return out;
}

inline std::optional<StyleCentroid> neighborhood_centroid(const InteractionGraph& g, const std::string& agent,
                                                          const std::map<std::string, StyleCentroid>& centroids) {
  return neighborhood_centroid(g, agent, [&](const std::string& id) -> const StyleCentroid* {
    auto it = centroids.find(id);
    return it == centroids.end() ? nullptr : &it->second;
  });
}

// ---------------------------------------------------------------------------
// Undirected graphs.

/// Undirected weighted graph with sorted adjacency lists. A self-loop (i, i)
/// appears once in adj[i] and carries the full diagonal entry A_ii.
class UndirectedGraph {
 public:
  using Adjacency = std::vector<std::pair<std::size_t, double>>;

  UndirectedGraph() = default;
  explicit UndirectedGraph(std::vector<std::string> nodes) : nodes_(std::move(nodes)), adj_(nodes_.size()) {}

  void add_edge(std::size_t a, std::size_t b, double w = 1.0) {
    auto bump = [&](std::size_t x, std::size_t y, double v) {
      auto& l = adj_[x];
      auto it = std::lower_bound(l.begin(), l.end(), std::make_pair(y, -1e300));
      if (it != l.end() && it->first == y) it->second += v;
      else l.insert(it, {y, v});
    };
    bump(a, b, w);
    if (a != b) bump(b, a, w);
  }

  [[nodiscard]] const std::vector<std::string>& nodes() const { return nodes_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] const Adjacency& neighbors(std::size_t i) const { return adj_[i]; }
  [[nodiscard]] std::size_t degree(std::size_t i) const {
    std::size_t d = 0;
    for (const auto& [j, w] : adj_[i])
      if (j != i) ++d;
    return d;
  }
  [[nodiscard]] bool has_edge(std::size_t a, std::size_t b) const {
    const auto& l = adj_[a];
    auto it = std::lower_bound(l.begin(), l.end(), std::make_pair(b, -1e300));
    return it != l.end() && it->first == b;
  }
  [[nodiscard]] std::size_t edge_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < adj_.size(); ++i)
      for (const auto& [j, w] : adj_[i])
        if (j >= i) ++n;
    return n;
  }
  // Each undirected edge once, as (i, j) with i <= j.
  [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (std::size_t i = 0; i < adj_.size(); ++i)
      for (const auto& [j, w] : adj_[i])
        if (j >= i) e.emplace_back(i, j);
    return e;
  }
  [[nodiscard]] std::optional<std::size_t> index(const std::string& id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id);
    if (it != nodes_.end() && *it == id) return static_cast<std::size_t>(it - nodes_.begin());
    // Node lists are sorted when built from an InteractionGraph; fall back to a scan otherwise.
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i] == id) return i;
    return std::nullopt;
  }

 private:
  std::vector<std::string> nodes_;
  std::vector<Adjacency> adj_;
};

/// Edge {a, b} iff w_ab > 0 or w_ba > 0; all weights 1.
inline UndirectedGraph undirected_binary(const InteractionGraph& g) {
  UndirectedGraph u(g.nodes());
  for (std::size_t a = 0; a < g.size(); ++a)
    for (const auto& [b, w] : g.out_edges(a))
      if (w > 0 && a != b && !u.has_edge(a, b)) u.add_edge(a, b, 1.0);
  return u;
}

// ---------------------------------------------------------------------------
// Modularity and Louvain.

namespace detail {

inline std::vector<double> strengths(const UndirectedGraph& g) {
  std::vector<double> k(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (const auto& [j, w] : g.neighbors(i)) k[i] += w;
  return k;
}

}  // namespace detail

/// Newman modularity of a community assignment (community[i] for node i).
inline double modularity(const UndirectedGraph& g, const std::vector<int>& community) {
  const auto k = detail::strengths(g);
  const double m2 = std::accumulate(k.begin(), k.end(), 0.0);
  if (!(m2 > 0)) return 0.0;
  std::map<int, double> in, tot;
  for (std::size_t i = 0; i < g.size(); ++i) {
    tot[community[i]] += k[i];
    for (const auto& [j, w] : g.neighbors(i))
      if (community[j] == community[i]) in[community[i]] += w;
  }
  double q = 0.0;
  for (const auto& [c, t] : tot) q += in[c] / m2 - (t / m2) * (t / m2);
  return q;
}

inline double modularity(const UndirectedGraph& g, const Partition& p) {
  std::vector<int> c(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) c[i] = p.at(g.nodes()[i]);
  return modularity(g, c);
}

namespace detail {

// One level of local moving. Returns true when any node changed community.
inline bool louvain_local_moves(const UndirectedGraph& g, std::vector<std::size_t>& comm) {
  const std::size_t n = g.size();
  const auto k = strengths(g);
  const double m2 = std::accumulate(k.begin(), k.end(), 0.0);
  if (!(m2 > 0)) return false;
  std::vector<double> tot(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) tot[comm[i]] += k[i];

  bool any = false;
  std::vector<double> link(n, 0.0);
  std::vector<std::size_t> touched;
  for (int pass = 0; pass < 1000; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t own = comm[i];
      touched.clear();
      for (const auto& [j, w] : g.neighbors(i)) {
        if (j == i) continue;
        if (link[comm[j]] == 0.0) touched.push_back(comm[j]);
        link[comm[j]] += w;
      }
      tot[own] -= k[i];
      const double own_gain = link[own] - tot[own] * k[i] / m2;
      std::size_t best = own;
      double best_gain = own_gain;
      std::sort(touched.begin(), touched.end());
      for (std::size_t c : touched) {
        if (c == own) continue;
        const double gain = link[c] - tot[c] * k[i] / m2;
        if (gain > best_gain + 1e-12) {
          best = c;
          best_gain = gain;
        }
      }
      tot[best] += k[i];
      if (best != own) {
        comm[i] = best;
        moved = any = true;
      }
      for (std::size_t c : touched) link[c] = 0.0;
      link[own] = 0.0;
    }
    if (!moved) break;
  }
  return any;
}

}  // namespace detail

/// Greedy modularity maximization (Louvain). Nodes are scanned in index order
/// (sorted ids); a move needs a strictly positive improvement, and among equal
/// gains the smallest community label wins, so the result is reproducible.
/// Labels are renumbered 0.. in order of each community's first node.
inline Partition louvain_partition(const UndirectedGraph& g) {
  const std::size_t n = g.size();
  if (n == 0) throw Error("louvain_partition: empty graph");
  std::vector<std::size_t> membership(n);
  std::iota(membership.begin(), membership.end(), std::size_t{0});

  UndirectedGraph level = g;
  for (int depth = 0; depth < 64; ++depth) {
    std::vector<std::size_t> comm(level.size());
    std::iota(comm.begin(), comm.end(), std::size_t{0});
    if (!detail::louvain_local_moves(level, comm)) break;
    // Renumber communities densely in order of first appearance.
    std::vector<std::size_t> relabel(level.size(), SIZE_MAX);
    std::size_t next = 0;
    for (std::size_t i = 0; i < level.size(); ++i)
      if (relabel[comm[i]] == SIZE_MAX) relabel[comm[i]] = next++;
    for (auto& m : membership) m = relabel[comm[m]];
    if (next == level.size()) break;
    UndirectedGraph agg{std::vector<std::string>(next)};
    std::map<std::pair<std::size_t, std::size_t>, double> w;
    for (std::size_t i = 0; i < level.size(); ++i)
      for (const auto& [j, x] : level.neighbors(i)) {
        const std::size_t a = relabel[comm[i]], b = relabel[comm[j]];
        if (j < i) continue;
        // A non-loop edge inside one community contributes twice to A_cc.
        if (a == b) w[{a, a}] += (i == j) ? x : 2.0 * x;
        else w[{std::min(a, b), std::max(a, b)}] += x;
      }
    for (const auto& [key, x] : w) agg.add_edge(key.first, key.second, x);
    level = std::move(agg);
  }

  std::vector<std::size_t> relabel(n, SIZE_MAX);
  int next = 0;
  Partition p;
  for (std::size_t i = 0; i < n; ++i) {
    if (relabel[membership[i]] == SIZE_MAX) relabel[membership[i]] = static_cast<std::size_t>(next++);
    p[g.nodes()[i]] = static_cast<int>(relabel[membership[i]]);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Degree-preserving null.

namespace detail {

class EdgeSet {
 public:
  explicit EdgeSet(std::size_t n) : n_(n) {
    if (n <= 30000) bits_.assign((n * n + 63) / 64, 0);
  }
  [[nodiscard]] bool contains(std::size_t a, std::size_t b) const {
    const auto k = key(a, b);
    if (!bits_.empty()) return (bits_[k >> 6] >> (k & 63)) & 1U;
    return hashed_.count(k) != 0;
  }
  void insert(std::size_t a, std::size_t b) {
    const auto k = key(a, b);
    if (!bits_.empty()) bits_[k >> 6] |= std::uint64_t{1} << (k & 63);
    else hashed_.insert(k);
  }
  void erase(std::size_t a, std::size_t b) {
    const auto k = key(a, b);
    if (!bits_.empty()) bits_[k >> 6] &= ~(std::uint64_t{1} << (k & 63));
    else hashed_.erase(k);
  }

 private:
  [[nodiscard]] std::uint64_t key(std::size_t a, std::size_t b) const {
    if (a > b) std::swap(a, b);
    return static_cast<std::uint64_t>(a) * n_ + b;
  }
  std::size_t n_;
  std::vector<std::uint64_t> bits_;
  std::unordered_set<std::uint64_t> hashed_;
};

}  // namespace detail

/// Double-edge-swap rewiring of a simple graph: (a,b),(c,d) -> (a,d),(c,b),
/// rejecting swaps that would create self-loops or multi-edges. `n_swaps`
/// counts attempts; 0 means 20 |E|. Every node keeps its exact degree.
inline UndirectedGraph degree_preserving_null(const UndirectedGraph& g, std::size_t n_swaps, std::uint64_t seed) {
  auto edges = g.edges();
  std::erase_if(edges, [](const auto& e) { return e.first == e.second; });
  if (edges.size() < 2) {
    warn("degree_preserving_null: graph too small to swap; returning a copy");
    return g;
  }
  if (n_swaps == 0) n_swaps = 20 * edges.size();
  detail::EdgeSet present(g.size());
  for (const auto& [a, b] : edges) present.insert(a, b);

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
  std::bernoulli_distribution flip(0.5);
  for (std::size_t s = 0; s < n_swaps; ++s) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (i == j) continue;
    auto [a, b] = edges[i];
    auto [c, d] = edges[j];
    if (flip(rng)) std::swap(c, d);
    if (a == d || c == b || a == c || b == d) continue;
    if (present.contains(a, d) || present.contains(c, b)) continue;
    present.erase(a, b);
    present.erase(c, d);
    present.insert(a, d);
    present.insert(c, b);
    edges[i] = {std::min(a, d), std::max(a, d)};
    edges[j] = {std::min(c, b), std::max(c, b)};
  }
  UndirectedGraph out(g.nodes());
  for (const auto& [a, b] : edges) out.add_edge(a, b, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Dyadic features for link prediction.

struct DyadicFeatures {
  std::optional<double> visual_cosine;
  std::optional<double> text_cosine;  // absent when either agent lacks a text centroid
  double degree_sum = 0.0;
  double shared_neighbors = 0.0;
};

inline std::size_t shared_neighbor_count(const UndirectedGraph& g, std::size_t a, std::size_t b) {
  const auto& x = g.neighbors(a);
  const auto& y = g.neighbors(b);
  std::size_t i = 0, j = 0, n = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i].first < y[j].first) ++i;
    else if (y[j].first < x[i].first) ++j;
    else {
      if (x[i].first != a && x[i].first != b) ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

inline DyadicFeatures dyadic_features(const UndirectedGraph& g, const std::map<std::string, StyleCentroid>& visual,
                                      const std::map<std::string, StyleCentroid>& text, const std::string& a,
                                      const std::string& b) {
  const auto ia = g.index(a), ib = g.index(b);
  if (!ia || !ib) throw Error("dyadic_features: agent not in graph");
  DyadicFeatures f;
  auto cos_of = [&](const std::map<std::string, StyleCentroid>& m) -> std::optional<double> {
    auto x = m.find(a), y = m.find(b);
    if (x == m.end() || y == m.end()) return std::nullopt;
    if (is_degenerate(x->second) || is_degenerate(y->second)) return std::nullopt;
    return cosine(x->second, y->second);
  };
  f.visual_cosine = cos_of(visual);
  f.text_cosine = cos_of(text);
  f.degree_sum = static_cast<double>(g.degree(*ia) + g.degree(*ib));
  f.shared_neighbors = static_cast<double>(shared_neighbor_count(g, *ia, *ib));
  return f;
}

// ---------------------------------------------------------------------------

/// Uniform sample without replacement from `pool`, never containing `exclude`.
inline std::vector<std::string> random_agent_sample(const std::vector<std::string>& pool, const std::string& exclude,
                                                    std::size_t size, Rng& rng) {
  std::vector<std::string> cand;
  cand.reserve(pool.size());
  for (const auto& p : pool)
    if (p != exclude) cand.push_back(p);
  if (size > cand.size())
    throw Error("random_agent_sample: requested " + std::to_string(size) + " agents from a pool of " +
                std::to_string(cand.size()));
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cand.size() - 1);
    std::swap(cand[i], cand[pick(rng)]);
  }
  cand.resize(size);
  return cand;
}

inline std::vector<std::string> random_agent_sample(const std::vector<std::string>& pool, const std::string& exclude,
                                                    std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  return random_agent_sample(pool, exclude, size, rng);
}

/// Undirected binarized degree / (n - 1).
inline std::map<std::string, double> degree_centrality(const UndirectedGraph& g) {
  std::map<std::string, double> c;
  const double denom = g.size() > 1 ? static_cast<double>(g.size() - 1) : 1.0;
  for (std::size_t i = 0; i < g.size(); ++i) c[g.nodes()[i]] = static_cast<double>(g.degree(i)) / denom;
  return c;
}

inline void write_edge_list_csv(const InteractionGraph& g, std::ostream& out) {
  out << "source,target,weight\n";
  for (std::size_t a = 0; a < g.size(); ++a)
    for (const auto& [b, w] : g.out_edges(a)) out << g.nodes()[a] << ',' << g.nodes()[b] << ',' << w << '\n';
}

}  // namespace vissoc
