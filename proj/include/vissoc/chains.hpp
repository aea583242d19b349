#pragma once

// Visual reply chains: extraction from reply forests, coherence (CCS),
// intra-chain diversity (ICSD), lagged coherence and pooled null models.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vissoc/core.hpp"
#include "vissoc/data_model.hpp"
#include "vissoc/stats.hpp"
#include "vissoc/style_vector.hpp"

namespace vissoc {

/// Root post followed by image-bearing replies, each the direct child of the
/// previous node. Node 0 is the root.
struct Chain {
  std::string root;
  std::vector<std::string> replies;
  std::vector<StyleVector> embeddings;  // size depth() + 1
  std::vector<std::string> authors;     // size depth() + 1

  [[nodiscard]] std::size_t depth() const { return replies.size(); }
};

/// One chain per maximal root-to-leaf path through image-bearing replies.
/// Children are visited in (created_at, reply_id) order; chains shallower than
/// `min_depth` are not emitted.
inline std::vector<Chain> extract_chains(const Dataset& d, std::size_t min_depth = 2) {
  if (min_depth < 1) throw Error("extract_chains: min_depth must be >= 1");
  std::unordered_map<std::string, std::vector<const ReplyNode*>> children;
  for (const auto& r : d.replies)
    if (r.has_image()) children[r.parent].push_back(&r);
  for (auto& [id, kids] : children)
    std::sort(kids.begin(), kids.end(), [](const ReplyNode* a, const ReplyNode* b) {
      return std::tie(a->created_at, a->reply_id) < std::tie(b->created_at, b->reply_id);
    });

  std::vector<Chain> out;
  std::vector<const ReplyNode*> path;
  for (const auto& p : d.posts) {
    auto emit = [&] {
      if (path.size() < min_depth) return;
      Chain c;
      c.root = p.post_id;
      c.embeddings.push_back(p.image_embedding);
      c.authors.push_back(p.author);
      for (const ReplyNode* r : path) {
        c.replies.push_back(r->reply_id);
        c.embeddings.push_back(*r->image_embedding);
        c.authors.push_back(r->author);
      }
      out.push_back(std::move(c));
    };
    // Iterative DFS; the stack holds (node id, next child index).
    std::vector<std::pair<const std::string*, std::size_t>> stack{{&p.post_id, 0}};
    path.clear();
    while (!stack.empty()) {
      auto& [id, next] = stack.back();
      auto it = children.find(*id);
      const std::size_t n_kids = it == children.end() ? 0 : it->second.size();
      if (n_kids == 0 && next == 0) {
        if (!path.empty()) emit();
        next = 1;
      }
      if (next < n_kids) {
        const ReplyNode* child = it->second[next++];
        path.push_back(child);
        stack.emplace_back(&child->reply_id, 0);
        if (stack.size() > d.replies.size() + 2) throw Error("extract_chains: reply cycle detected");
        continue;
      }
      stack.pop_back();
      if (!path.empty() && !stack.empty()) path.pop_back();
    }
  }
  return out;
}

/// Mean cosine over adjacent pairs (v_i, v_{i+1}), i = 0..k-1.
inline double chain_coherence(const Chain& c) {
  if (c.depth() < 1) throw Error("chain_coherence: chain has no replies");
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < c.embeddings.size(); ++i) s += unit_cosine(c.embeddings[i], c.embeddings[i + 1]);
  return s / static_cast<double>(c.depth());
}

/// CCS with adjacent same-author pairs masked out; absent when every pair is masked.
inline std::optional<double> chain_coherence_same_author_filtered(const Chain& c) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < c.embeddings.size(); ++i) {
    if (c.authors[i] == c.authors[i + 1]) continue;
    s += unit_cosine(c.embeddings[i], c.embeddings[i + 1]);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

/// Mean of 1 - cos over all unordered node pairs, root included.
inline double chain_style_diversity(const Chain& c) {
  if (c.depth() < 1) throw Error("chain_style_diversity: chain has no replies");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.embeddings.size(); ++i)
    for (std::size_t j = i + 1; j < c.embeddings.size(); ++j) {
      s += 1.0 - unit_cosine(c.embeddings[i], c.embeddings[j]);
      ++n;
    }
  return s / static_cast<double>(n);
}

inline std::size_t distinct_authors(const Chain& c) {
  std::vector<std::string> a = c.authors;
  std::sort(a.begin(), a.end());
  return static_cast<std::size_t>(std::unique(a.begin(), a.end()) - a.begin());
}

struct DepthSummary {
  std::size_t count = 0;
  double mean_depth = 0.0;
  std::size_t max_depth = 0;
};

inline DepthSummary depth_summary(const std::vector<Chain>& chains) {
  DepthSummary s;
  s.count = chains.size();
  for (const auto& c : chains) {
    s.mean_depth += static_cast<double>(c.depth());
    s.max_depth = std::max(s.max_depth, c.depth());
  }
  if (s.count) s.mean_depth /= static_cast<double>(s.count);
  return s;
}

// ---------------------------------------------------------------------------
// Null models over the pooled visual-reply embeddings.

/// Image embeddings of every image-bearing reply in the dataset.
inline std::vector<StyleVector> visual_reply_pool(const Dataset& d) {
  std::vector<StyleVector> pool;
  for (const auto& r : d.replies)
    if (r.image_embedding) pool.push_back(*r.image_embedding);
  return pool;
}

namespace detail {

inline std::pair<std::size_t, std::size_t> random_pair(std::size_t n, Rng& rng) {
  std::uniform_int_distribution<std::size_t> a(0, n - 1), b(0, n - 2);
  const std::size_t i = a(rng);
  std::size_t j = b(rng);
  if (j >= i) ++j;
  return {i, j};
}

// ICSD of m distinct pool members via |sum v|^2 = m + 2 sum_{i<j} cos(v_i, v_j).
inline double random_set_diversity(const std::vector<StyleVector>& pool, std::size_t m, Rng& rng,
                                   std::vector<std::size_t>& scratch, std::vector<double>& sum) {
  const std::size_t n = pool.size();
  // Any permutation of 0..n-1 is a valid starting point for a partial shuffle.
  if (scratch.size() != n) {
    scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i) scratch[i] = i;
  }
  std::fill(sum.begin(), sum.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(scratch[i], scratch[pick(rng)]);
    const auto v = pool[scratch[i]].values();
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += v[k];
  }
  double sq = 0.0;
  for (double x : sum) sq += x * x;
  const double md = static_cast<double>(m);
  const double mean_cos = (sq - md) / (md * (md - 1.0));
  return 1.0 - mean_cos;
}

}  // namespace detail

/// Each sample is the mean cosine of `pair_count` uniformly drawn pairs of
/// distinct pool members.
inline std::vector<double> ccs_null_distribution(const std::vector<StyleVector>& pool, std::size_t pair_count,
                                                 std::size_t resamples, std::uint64_t seed) {
  if (pool.size() < 2) throw Error("chain null: degenerate corpus (fewer than 2 visual replies)");
  if (pair_count < 1) throw Error("chain null: pair_count must be >= 1");
  Rng rng(seed);
  std::vector<double> out(resamples);
  for (auto& x : out) {
    double s = 0.0;
    for (std::size_t p = 0; p < pair_count; ++p) {
      const auto [i, j] = detail::random_pair(pool.size(), rng);
      s += unit_cosine(pool[i], pool[j]);
    }
    x = s / static_cast<double>(pair_count);
  }
  return out;
}

/// Each sample is the ICSD of `node_count` distinct uniformly drawn pool members.
inline std::vector<double> icsd_null_distribution(const std::vector<StyleVector>& pool, std::size_t node_count,
                                                  std::size_t resamples, std::uint64_t seed) {
  if (pool.size() < 2) throw Error("chain null: degenerate corpus (fewer than 2 visual replies)");
  if (node_count < 2 || node_count > pool.size()) throw Error("chain null: node_count must lie in [2, |pool|]");
  Rng rng(seed);
  std::vector<std::size_t> scratch;
  std::vector<double> sum(pool.front().dim());
  std::vector<double> out(resamples);
  for (auto& x : out) x = detail::random_set_diversity(pool, node_count, rng, scratch, sum);
  return out;
}

/// Exact mean cosine over all unordered pairs of distinct pool members.
inline double pool_mean_pair_cosine(const std::vector<StyleVector>& pool) {
  if (pool.size() < 2) throw Error("chain null: degenerate corpus (fewer than 2 visual replies)");
  std::vector<double> sum(pool.front().dim(), 0.0);
  for (const auto& v : pool) {
    const auto s = v.values();
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += s[k];
  }
  double sq = 0.0;
  for (double x : sum) sq += x * x;
  const double n = static_cast<double>(pool.size());
  return (sq - n) / (n * (n - 1.0));
}

/// Corpus-level nulls: per resample, every chain is replaced by random draws
/// of the same size (k pairs for CCS, k + 1 nodes for ICSD) and the corpus
/// mean is recorded. `per_chain_first` receives each chain's draw from the
/// first resample, a matched random sample of chain-level values.
struct CorpusNull {
  std::vector<double> corpus_means;
  std::vector<double> per_chain_first;
};

inline CorpusNull corpus_ccs_null(const std::vector<StyleVector>& pool, const std::vector<Chain>& chains,
                                  std::size_t resamples, std::uint64_t seed) {
  if (pool.size() < 2) throw Error("chain null: degenerate corpus (fewer than 2 visual replies)");
  CorpusNull out;
  if (chains.empty()) return out;
  Rng rng(seed);
  out.corpus_means.resize(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    double corpus = 0.0;
    for (const auto& c : chains) {
      double s = 0.0;
      for (std::size_t p = 0; p < c.depth(); ++p) {
        const auto [i, j] = detail::random_pair(pool.size(), rng);
        s += unit_cosine(pool[i], pool[j]);
      }
      const double v = s / static_cast<double>(c.depth());
      if (r == 0) out.per_chain_first.push_back(v);
      corpus += v;
    }
    out.corpus_means[r] = corpus / static_cast<double>(chains.size());
  }
  return out;
}

inline CorpusNull corpus_icsd_null(const std::vector<StyleVector>& pool, const std::vector<Chain>& chains,
                                   std::size_t resamples, std::uint64_t seed) {
  if (pool.size() < 2) throw Error("chain null: degenerate corpus (fewer than 2 visual replies)");
  CorpusNull out;
  if (chains.empty()) return out;
  Rng rng(seed);
  std::vector<std::size_t> scratch;
  std::vector<double> sum(pool.front().dim());
  out.corpus_means.resize(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    double corpus = 0.0;
    for (const auto& c : chains) {
      const std::size_t m = std::min(c.depth() + 1, pool.size());
      const double v = detail::random_set_diversity(pool, m, rng, scratch, sum);
      if (r == 0) out.per_chain_first.push_back(v);
      corpus += v;
    }
    out.corpus_means[r] = corpus / static_cast<double>(chains.size());
  }
  return out;
}

/// Two-sided p for an observed value against a null sample, centered at the
/// null mean: (1 + #{|T - m| >= |obs - m|}) / (N + 1).
inline double null_sample_p_value(double observed, const std::vector<double>& null) {
  if (null.empty()) return 1.0;
  const double m = mean(null);
  const double d = std::abs(observed - m);
  const double eps = 1e-12 * std::max(1.0, std::abs(observed));
  std::size_t count = 0;
  for (double x : null)
    if (std::abs(x - m) >= d - eps) ++count;
  return static_cast<double>(count + 1) / static_cast<double>(null.size() + 1);
}

// ---------------------------------------------------------------------------

struct LagCoherence {
  std::size_t lag = 1;
  std::size_t n_pairs = 0;
  double mean_cosine = 0.0;
  double null_mean = 0.0;
  double delta = 0.0;
  double t_p_value = 1.0;
};

/// Mean cosine over every (v_i, v_{i+lag}) pair in chains with depth >= lag,
/// minus the pooled random-pair mean. Absent when no chain is deep enough.
inline std::optional<LagCoherence> lag_k_coherence(const std::vector<Chain>& chains, std::size_t lag,
                                                   const std::vector<StyleVector>& pool) {
  if (lag < 1) throw Error("lag_k_coherence: lag must be >= 1");
  std::vector<double> cosines;
  for (const auto& c : chains) {
    if (c.depth() < lag) continue;
    for (std::size_t i = 0; i + lag < c.embeddings.size(); ++i)
      cosines.push_back(unit_cosine(c.embeddings[i], c.embeddings[i + lag]));
  }
  if (cosines.empty()) return std::nullopt;
  LagCoherence r;
  r.lag = lag;
  r.n_pairs = cosines.size();
  r.mean_cosine = mean(cosines);
  r.null_mean = pool_mean_pair_cosine(pool);
  r.delta = r.mean_cosine - r.null_mean;
  if (cosines.size() >= 2) r.t_p_value = one_sample_t(cosines, r.null_mean).p_value;
  return r;
}

// ---------------------------------------------------------------------------

struct EngagementStats {
  std::vector<double> in_chain;
  std::vector<double> out_of_chain;
  std::optional<double> in_mean;
  std::optional<double> out_mean;
  std::optional<double> ratio;
};

/// Splits posts by whether they root at least one of `chains`; engagement is
/// like_count + comment_count.
inline EngagementStats chain_engagement_stats(const Dataset& d, const std::vector<Chain>& chains) {
  std::vector<std::string> roots;
  for (const auto& c : chains) roots.push_back(c.root);
  std::sort(roots.begin(), roots.end());
  EngagementStats s;
  for (const auto& p : d.posts) {
    const double e = static_cast<double>(p.engagement());
    (std::binary_search(roots.begin(), roots.end(), p.post_id) ? s.in_chain : s.out_of_chain).push_back(e);
  }
  if (!s.in_chain.empty()) s.in_mean = mean(s.in_chain);
  if (!s.out_of_chain.empty()) s.out_mean = mean(s.out_of_chain);
  if (s.in_mean && s.out_mean && *s.out_mean > 0) s.ratio = *s.in_mean / *s.out_mean;
  return s;
}

/// One JSON object per chain: root, replies, authors, depth, ccs, icsd.
inline void write_chains_jsonl(const std::vector<Chain>& chains, std::ostream& out) {
  for (const auto& c : chains) {
    nlohmann::ordered_json j{{"root", c.root},
                             {"replies", c.replies},
                             {"authors", c.authors},
                             {"depth", c.depth()},
                             {"ccs", chain_coherence(c)},
                             {"icsd", chain_style_diversity(c)}};
    out << j.dump() << '\n';
  }
}

}  // namespace vissoc
