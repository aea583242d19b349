#pragma once

// Experiment pipelines E1-E8, robustness reports R1-R3 and the randomized
// adversarial comparison F1, plus report serialization and table rendering.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vissoc/chains.hpp"
#include "vissoc/clustering.hpp"
#include "vissoc/core.hpp"
#include "vissoc/data_model.hpp"
#include "vissoc/lexicon.hpp"
#include "vissoc/sim.hpp"
#include "vissoc/social_graph.hpp"
#include "vissoc/stats.hpp"
#include "vissoc/style_space.hpp"
#include "vissoc/themes.hpp"

namespace vissoc {

using ojson = nlohmann::ordered_json;

inline constexpr std::array<std::string_view, 12> kExperimentIds = {"e1", "e2", "e3", "e4", "e5", "e6",
                                                                    "e7", "e8", "r1", "r2", "r3", "f1"};

inline std::string_view phenomenon_label(std::string_view id) {
  if (id == "e1") return "Emergent Visual Galleries";
  if (id == "e2") return "Personality-driven Ties";
  if (id == "e3") return "Stylistic Inertia";
  if (id == "e4") return "Identity Reactance";
  if (id == "e5") return "Aesthetic-Social Decoupling";
  if (id == "e6") return "Visual Theme Propagation";
  if (id == "e7") return "Unconstrained Distinctiveness";
  if (id == "e8") return "Style Aggregation";
  if (id == "r1") return "Homophily Robustness";
  if (id == "r2") return "Lag-k Coherence";
  if (id == "r3") return "R0 Sensitivity";
  if (id == "f1") return "Randomized Reactance";
  return "";
}

struct AnalysisOptions {
  std::uint64_t seed = 0;
  int window_days = 3;
  int min_posts = 3;
  std::size_t permutations = 2000;
  std::size_t bootstrap = 5000;
  std::size_t ccs_null_resamples = 5000;
  std::size_t icsd_null_resamples = 3000;
  std::size_t degree_null_graphs = 1000;
  std::size_t degree_null_swaps = 0;  // 0 means 20 |E| per null graph
  double fdr_q = 0.05;
  bool include_human_likes = false;
  bool engagement_mean = true;  // E7: mean (true) or total (false) post engagement per agent
  std::optional<GroundTruth> ground_truth;

  [[nodiscard]] ojson to_json() const {
    return ojson{{"seed", seed},
                 {"window_days", window_days},
                 {"min_posts", min_posts},
                 {"permutations", permutations},
                 {"bootstrap", bootstrap},
                 {"ccs_null_resamples", ccs_null_resamples},
                 {"icsd_null_resamples", icsd_null_resamples},
                 {"degree_null_graphs", degree_null_graphs},
                 {"degree_null_swaps", degree_null_swaps},
                 {"fdr_q", fdr_q},
                 {"include_human_likes", include_human_likes},
                 {"engagement", engagement_mean ? "mean" : "total"}};
  }
};

struct NamedTest {
  std::string name;
  TestResult result;
  bool fdr_rejected = false;
};

struct NamedInterval {
  std::string name;
  ConfidenceInterval ci;
};

struct ReportRow {
  std::string metric;
  std::optional<double> observed;
  std::optional<double> baseline;
  std::optional<double> p_value;
};

struct ExperimentReport {
  std::string experiment_id;
  std::string phenomenon;
  std::vector<std::pair<std::string, std::optional<double>>> metrics;
  std::vector<NamedTest> tests;
  std::vector<NamedInterval> intervals;
  std::vector<ReportRow> rows;
  std::size_t n_observations = 0;
  ojson config = ojson::object();
  ojson extra = ojson::object();
  std::optional<std::string> primary_test;
  bool fdr_adjusted = false;
  bool fdr_rejected = false;
  std::optional<double> fdr_q_value;
  std::vector<std::string> notes;
  std::optional<std::string> error;

  ExperimentReport() = default;
  explicit ExperimentReport(std::string id)
      : experiment_id(std::move(id)), phenomenon(phenomenon_label(experiment_id)) {}

  void set(const std::string& name, std::optional<double> v) {
    if (v && !std::isfinite(*v)) v.reset();
    for (auto& [k, x] : metrics)
      if (k == name) {
        x = v;
        return;
      }
    metrics.emplace_back(name, v);
  }
  [[nodiscard]] std::optional<double> get(const std::string& name) const {
    for (const auto& [k, x] : metrics)
      if (k == name) return x;
    return std::nullopt;
  }
  void add_test(const std::string& name, const TestResult& r) { tests.push_back({name, r, false}); }
  [[nodiscard]] const NamedTest* test(const std::string& name) const {
    for (const auto& t : tests)
      if (t.name == name) return &t;
    return nullptr;
  }
  [[nodiscard]] std::optional<double> p(const std::string& name) const {
    const auto* t = test(name);
    return t ? std::optional<double>(t->result.p_value) : std::nullopt;
  }
  [[nodiscard]] const NamedInterval* interval(const std::string& name) const {
    for (const auto& i : intervals)
      if (i.name == name) return &i;
    return nullptr;
  }
  void row(std::string metric, std::optional<double> observed, std::optional<double> baseline = std::nullopt,
           std::optional<double> p_value = std::nullopt) {
    rows.push_back({std::move(metric), observed, baseline, p_value});
  }
};

namespace detail {

inline std::optional<double> opt_size(std::optional<std::size_t> n) {
  return n ? std::optional<double>(static_cast<double>(*n)) : std::nullopt;
}

inline std::uint64_t sub_seed(std::uint64_t seed, std::string_view tag) { return derive_seed(seed, hash_string(tag)); }

inline std::vector<std::string> sorted_agent_ids(const Dataset& d) {
  std::vector<std::string> ids;
  for (const auto& a : d.agents) ids.push_back(a.agent_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

inline UndirectedGraph undirected_weighted(const InteractionGraph& g) {
  UndirectedGraph u(g.nodes());
  for (std::size_t a = 0; a < g.size(); ++a)
    for (const auto& [b, w] : g.out_edges(a))
      if (a != b && w > 0) u.add_edge(a, b, w);
  return u;
}

inline double centroid_distance(const StyleCentroid& a, const StyleCentroid& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.components.size(); ++k) {
    const double x = a.components[k] - b.components[k];
    s += x * x;
  }
  return std::sqrt(s);
}

inline TimeWindow analysis_window(const Dataset& d, std::int64_t t, int window_days) {
  const std::int64_t width = static_cast<std::int64_t>(window_days) * kSecondsPerDay;
  return {d.dataset_epoch + t * width, d.dataset_epoch + (t + 1) * width};
}

/// Mean of 1 - cos over all pairs of unit vectors, using |sum|^2 = n + 2 sum_{i<j} cos.
inline double mean_pair_distance(const std::vector<StyleVector>& vs) {
  const double n = static_cast<double>(vs.size());
  std::vector<double> sum(vs.front().dim(), 0.0);
  for (const auto& v : vs) {
    const auto s = v.values();
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += s[k];
  }
  double sq = 0.0;
  for (double x : sum) sq += x * x;
  return 1.0 - (sq - n) / (n * (n - 1.0));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// E1: visual reply chains (also feeds R2).

inline ExperimentReport e1_chains(const Dataset& d, const AnalysisOptions& o = {}) {
  ExperimentReport r("e1");
  r.config = ojson{{"min_depth", 2}, {"ccs_null_resamples", o.ccs_null_resamples}};
  const auto chains = extract_chains(d, 2);
  const auto pool = visual_reply_pool(d);
  const auto ds = depth_summary(chains);
  r.n_observations = chains.size();
  r.set("chain_count", static_cast<double>(ds.count));
  r.set("mean_depth", chains.empty() ? std::nullopt : std::optional<double>(ds.mean_depth));
  r.set("max_depth", chains.empty() ? std::nullopt : std::optional<double>(static_cast<double>(ds.max_depth)));

  std::vector<double> ccs, depth;
  for (const auto& c : chains) {
    ccs.push_back(chain_coherence(c));
    depth.push_back(static_cast<double>(c.depth()));
  }
  std::optional<double> mean_ccs, null_mean, delta, perm_p;
  if (!chains.empty()) mean_ccs = mean(ccs);
  if (!chains.empty() && pool.size() >= 2) {
    const auto null = corpus_ccs_null(pool, chains, o.ccs_null_resamples, detail::sub_seed(o.seed, "e1.ccs_null"));
    null_mean = mean(null.corpus_means);
    delta = *mean_ccs - *null_mean;
    TestResult t;
    t.statistic = *delta;
    t.p_value = null_sample_p_value(*mean_ccs, null.corpus_means);
    t.method = TestMethod::permutation;
    t.n_resamples = null.corpus_means.size();
    r.add_test("delta_ccs_permutation", t);
    perm_p = t.p_value;
    r.primary_test = "delta_ccs_permutation";
    if (ccs.size() >= 2) r.add_test("ccs_t_test", one_sample_t(ccs, pool_mean_pair_cosine(pool)));
  } else if (!chains.empty()) {
    r.notes.push_back("fewer than 2 visual replies; chain null undefined");
  }
  r.set("mean_ccs", mean_ccs);
  r.set("null_ccs", null_mean);
  r.set("delta_ccs", delta);

  std::vector<double> filtered;
  for (const auto& c : chains)
    if (auto f = chain_coherence_same_author_filtered(c)) filtered.push_back(*f);
  r.set("same_author_filtered_ccs", filtered.empty() ? std::nullopt : std::optional<double>(mean(filtered)));
  r.set("same_author_filtered_chains", static_cast<double>(filtered.size()));

  const auto eng = chain_engagement_stats(d, chains);
  r.set("engagement_in_chain", eng.in_mean);
  r.set("engagement_out_of_chain", eng.out_mean);
  r.set("engagement_ratio", eng.ratio);
  std::optional<double> eng_p;
  if (eng.in_chain.size() >= 2 && eng.out_of_chain.size() >= 2) {
    const auto w = welch_t(eng.in_chain, eng.out_of_chain);
    r.add_test("engagement_welch", w);
    eng_p = w.p_value;
  }

  std::optional<Correlation> dc;
  if (chains.size() >= 3) dc = pearson_r(depth, ccs);
  r.set("depth_ccs_r", dc ? std::optional<double>(dc->r) : std::nullopt);
  if (dc) {
    TestResult t;
    t.statistic = dc->r;
    t.p_value = dc->p_value;
    t.df = static_cast<double>(dc->n) - 2.0;
    r.add_test("depth_ccs_pearson", t);
  }

  ojson lags = ojson::array();
  for (std::size_t lag = 1; lag <= 3; ++lag) {
    std::optional<LagCoherence> lc;
    if (pool.size() >= 2) lc = lag_k_coherence(chains, lag, pool);
    const std::string k = std::to_string(lag);
    r.set("lag" + k + "_delta", lc ? std::optional<double>(lc->delta) : std::nullopt);
    r.set("lag" + k + "_pairs", lc ? std::optional<double>(static_cast<double>(lc->n_pairs)) : std::nullopt);
    r.set("lag" + k + "_p", lc ? std::optional<double>(lc->t_p_value) : std::nullopt);
    if (lc)
      lags.push_back(ojson{{"lag", lag},
                           {"n_pairs", lc->n_pairs},
                           {"mean_cosine", lc->mean_cosine},
                           {"null_mean", lc->null_mean},
                           {"delta", lc->delta},
                           {"t_p_value", lc->t_p_value}});
  }
  r.extra["lag_coherence"] = lags;

  r.row("Mean CCS", mean_ccs, null_mean, perm_p);
  r.row("Chains (depth >= 2)", static_cast<double>(ds.count));
  r.row("Mean depth", r.get("mean_depth"));
  r.row("Max depth", r.get("max_depth"));
  r.row("Engagement ratio", eng.ratio, 1.0, eng_p);
  r.row("Depth-CCS r", r.get("depth_ccs_r"), 0.0, dc ? std::optional<double>(dc->p_value) : std::nullopt);
  r.row("Same-author-filtered CCS", r.get("same_author_filtered_ccs"), null_mean);
  return r;
}

// ---------------------------------------------------------------------------
// E2: visual homophily (also feeds R1).

inline ExperimentReport e2_homophily(const Dataset& d, const AnalysisOptions& o = {}) {
  ExperimentReport r("e2");
  r.config = ojson{{"centroids", "whole dataset"},
                   {"graph", "undirected binarized"},
                   {"permutations", o.permutations},
                   {"degree_null_graphs", o.degree_null_graphs}};
  GraphOptions go;
  go.include_human_likes = o.include_human_likes;
  const auto g = build_interaction_graph(d, go);
  const auto u = undirected_binary(g);
  const auto visual = agent_overall_centroids(d, 1, Channel::visual);
  const auto text = agent_overall_centroids(d, 1, Channel::text);

  // Eligible agents: graph nodes with a usable visual centroid.
  std::vector<std::size_t> node_of;
  std::vector<const StyleCentroid*> cv, ct;
  for (std::size_t i = 0; i < u.size(); ++i) {
    auto it = visual.find(u.nodes()[i]);
    if (it == visual.end() || is_degenerate(it->second)) continue;
    node_of.push_back(i);
    cv.push_back(&it->second);
    auto jt = text.find(u.nodes()[i]);
    ct.push_back(jt == text.end() || is_degenerate(jt->second) ? nullptr : &jt->second);
  }
  const std::size_t n = node_of.size();
  std::vector<std::size_t> pos_of(u.size(), SIZE_MAX);
  for (std::size_t k = 0; k < n; ++k) pos_of[node_of[k]] = k;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& [a, b] : u.edges())
    if (a != b && pos_of[a] != SIZE_MAX && pos_of[b] != SIZE_MAX)
      edges.emplace_back(std::min(pos_of[a], pos_of[b]), std::max(pos_of[a], pos_of[b]));
  const std::size_t total_pairs = n < 2 ? 0 : n * (n - 1) / 2;
  const std::size_t m = edges.size();
  r.set("eligible_agents", static_cast<double>(n));
  r.set("connected_pairs", static_cast<double>(m));
  r.set("disconnected_pairs", static_cast<double>(total_pairs - m));
  r.n_observations = total_pairs;

  auto absent_rows = [&] {
    r.row("H", r.get("H"), 1.0);
    r.row("AUC (visual)", r.get("auc_visual"), 0.5);
    r.row("AUC (text)", r.get("auc_text"), 0.5);
    r.row("n connected pairs", static_cast<double>(m));
  };
  if (m < 2 || total_pairs - m < 2) {
    r.notes.push_back("need at least 2 connected and 2 disconnected pairs with centroids");
    r.set("H", std::nullopt);
    absent_rows();
    return r;
  }

  std::vector<double> cosm(n * n, 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = cosine(*cv[i], *cv[j]);
      cosm[i * n + j] = cosm[j * n + i] = c;
      total += c;
    }
  const double md = static_cast<double>(m), nd = static_cast<double>(total_pairs - m);
  auto h_of = [&](double edge_sum) -> std::optional<double> {
    const double den = (total - edge_sum) / nd;
    if (std::abs(den) < 1e-12) return std::nullopt;
    return (edge_sum / md) / den;
  };
  double edge_sum = 0.0;
  for (const auto& [a, b] : edges) edge_sum += cosm[a * n + b];
  const auto H = h_of(edge_sum);
  r.set("H", H);
  r.set("mean_cos_connected", edge_sum / md);
  r.set("mean_cos_disconnected", (total - edge_sum) / nd);

  std::optional<double> perm_p;
  if (H) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto stat = [&](const std::vector<std::size_t>& p) {
      double s = 0.0;
      for (const auto& [a, b] : edges) s += cosm[p[a] * n + p[b]];
      return h_of(s).value_or(1.0) - 1.0;
    };
    auto shuffle = [](std::vector<std::size_t>& v, Rng& rng) { std::shuffle(v.begin(), v.end(), rng); };
    auto t = permutation_test(*H - 1.0, stat, perm, shuffle, o.permutations, detail::sub_seed(o.seed, "e2.perm"));
    t.statistic = *H;
    r.add_test("h_node_permutation", t);
    r.primary_test = "h_node_permutation";
    perm_p = t.p_value;
  }

  // Link prediction.
  std::vector<char> connected(n * n, 0);
  for (const auto& [a, b] : edges) connected[a * n + b] = connected[b * n + a] = 1;
  std::vector<double> vpos, vneg, tpos, tneg;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      (connected[i * n + j] ? vpos : vneg).push_back(cosm[i * n + j]);
      if (ct[i] && ct[j]) (connected[i * n + j] ? tpos : tneg).push_back(cosine(*ct[i], *ct[j]));
    }
  const double auc_v = auc(vpos, vneg);
  r.set("auc_visual", auc_v);
  std::optional<double> auc_t;
  if (!tpos.empty() && !tneg.empty()) auc_t = auc(tpos, tneg);
  r.set("auc_text", auc_t);

  // Degree-preserving null (R1).
  UndirectedGraph sub{std::vector<std::string>(n)};
  for (const auto& [a, b] : edges) sub.add_edge(a, b, 1.0);
  std::vector<double> null_h;
  if (o.degree_null_graphs > 0) {
    null_h.reserve(o.degree_null_graphs);
    ScopedWarningSink quiet([](std::string_view) {});
    for (std::size_t k = 0; k < o.degree_null_graphs; ++k) {
      const auto rg = degree_preserving_null(sub, o.degree_null_swaps, derive_seed(o.seed, hash_string("e2.dp"), k));
      double s = 0.0;
      for (const auto& [a, b] : rg.edges())
        if (a != b) s += cosm[a * n + b];
      if (auto h = h_of(s)) null_h.push_back(*h);
    }
  }
  if (!null_h.empty() && H) {
    TestResult t;
    t.statistic = *H;
    t.p_value = null_sample_p_value(*H, null_h);
    t.method = TestMethod::permutation;
    t.n_resamples = null_h.size();
    r.add_test("h_degree_preserving", t);
    r.set("dp_null_mean", mean(null_h));
    const double sd = null_h.size() > 1 ? sample_sd(null_h) : 0.0;
    r.set("dp_null_sd", sd);
    r.set("dp_z", sd > 0 ? std::optional<double>((*H - mean(null_h)) / sd) : std::nullopt);
  }

  // Dyadic logistic regression with structural controls (R1).
  {
    std::vector<std::vector<double>> rows_v, rows_s;
    std::vector<int> labels;
    const bool with_text = auc_t.has_value() && std::all_of(ct.begin(), ct.end(), [](auto* p) { return p != nullptr; });
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double deg = static_cast<double>(sub.degree(i) + sub.degree(j));
        const double shared = static_cast<double>(shared_neighbor_count(sub, i, j));
        std::vector<double> row{cosm[i * n + j]};
        if (with_text) row.push_back(cosine(*ct[i], *ct[j]));
        row.push_back(deg);
        row.push_back(shared);
        rows_s.push_back(std::move(row));
        labels.push_back(connected[i * n + j]);
      }
    try {
      ScopedWarningSink quiet([&](std::string_view w) { r.notes.emplace_back(w); });
      const auto fit = logistic_fit(rows_s, labels);
      r.set("dyadic_auc_structural", fit.auc_on_fit);
      r.set("dyadic_visual_coefficient", fit.coefficients[1]);
      if (with_text) r.set("dyadic_text_coefficient", fit.coefficients[2]);
      r.extra["dyadic_model"] = ojson{{"features", with_text ? ojson{"visual_cosine", "text_cosine", "degree_sum", "shared_neighbors"}
                                                             : ojson{"visual_cosine", "degree_sum", "shared_neighbors"}},
                                      {"coefficients", fit.coefficients},
                                      {"converged", fit.converged},
                                      {"separation", fit.separation}};
    } catch (const Error& e) {
      r.notes.push_back(std::string("dyadic regression: ") + e.what());
    }
  }

  r.row("H", H, 1.0, perm_p);
  r.row("AUC (visual)", auc_v, 0.5);
  r.row("AUC (text)", auc_t, 0.5);
  r.row("n connected pairs", static_cast<double>(m));
  return r;
}

// ---------------------------------------------------------------------------
// E3: style drift via the visual contagion index.

struct VciObservation {
  std::string agent;
  std::int64_t window = 0;
  double neighbor_cosine = 0.0;
  double random_cosine = 0.0;
  [[nodiscard]] double vci() const { return neighbor_cosine - random_cosine; }
};

/// One observation per (agent, window t) with a centroid at t + 1 and at
/// least one out-neighbor holding a centroid at t. The random baseline draws
/// as many agents as contributing neighbors (excluding the agent) from those
/// with a centroid at t and gives them the neighbors' weights in draw order.
inline std::vector<VciObservation> vci_observations(const Dataset& d, int window_days, int min_posts,
                                                    std::uint64_t seed, bool include_human_likes = false,
                                                    std::size_t* skipped = nullptr) {
  const auto table = agent_style_centroids(d, window_days, min_posts, Channel::visual);
  std::map<std::int64_t, std::map<std::string, const StyleCentroid*>> by_window;
  for (const auto& [key, c] : table)
    if (!is_degenerate(c)) by_window[key.window][key.agent] = &c;
  std::vector<VciObservation> out;
  Rng rng(seed);
  std::size_t skip = 0;
  for (const auto& [t, here] : by_window) {
    auto next = by_window.find(t + 1);
    if (next == by_window.end()) continue;
    GraphOptions go;
    go.window = detail::analysis_window(d, t, window_days);
    go.include_human_likes = include_human_likes;
    const auto g = build_interaction_graph(d, go);
    std::vector<std::string> pool;
    for (const auto& [a, c] : here) pool.push_back(a);
    for (const auto& [a, future] : next->second) {
      const auto ia = g.index(a);
      if (!ia) continue;
      std::vector<double> weights;
      for (const auto& [j, w] : g.out_edges(*ia))
        if (here.count(g.nodes()[j])) weights.push_back(w);
      if (weights.empty()) continue;
      const auto nb = neighborhood_centroid(g, a, [&](const std::string& id) -> const StyleCentroid* {
        auto it = here.find(id);
        return it == here.end() ? nullptr : it->second;
      });
      const std::size_t others = pool.size() - (here.count(a) ? 1 : 0);
      if (!nb || others < weights.size()) {
        ++skip;
        continue;
      }
      const auto sample = random_agent_sample(pool, a, weights.size(), rng);
      StyleCentroid rc;
      rc.components.assign(future->components.size(), 0.0);
      double total = 0.0;
      for (std::size_t k = 0; k < sample.size(); ++k) {
        const auto& c = here.at(sample[k])->components;
        for (std::size_t q = 0; q < c.size(); ++q) rc.components[q] += weights[k] * c[q];
        total += weights[k];
      }
      for (double& x : rc.components) x /= total;
      rc.support_count = sample.size();
      if (is_degenerate(*nb) || is_degenerate(rc)) {
        ++skip;
        continue;
      }
      out.push_back({a, t, cosine(*future, *nb), cosine(*future, rc)});
    }
  }
  if (skipped) *skipped = skip;
  return out;
}

inline ExperimentReport e3_style_drift(const Dataset& d, const AnalysisOptions& o = {}) {
  ExperimentReport r("e3");
  r.config = ojson{{"window_days", o.window_days}, {"min_posts", o.min_posts}, {"random_baseline", "weight-matched"}};
  std::size_t skipped = 0;
  const auto obs = vci_observations(d, o.window_days, o.min_posts, detail::sub_seed(o.seed, "e3.random"),
                                    o.include_human_likes, &skipped);
  r.n_observations = obs.size();
  r.set("n_observations", static_cast<double>(obs.size()));
  r.set("skipped_small_pool", static_cast<double>(skipped));
  std::vector<double> v;
  for (const auto& x : obs) v.push_back(x.vci());
  std::optional<double> m, p;
  if (!v.empty()) {
    m = mean(v);
    const auto t = sign_flip_test(v, o.permutations, detail::sub_seed(o.seed, "e3.perm"));
    r.add_test("vci_sign_flip", t);
    r.primary_test = "vci_sign_flip";
    p = t.p_value;
  }
  r.set("mean_vci", m);
  std::optional<ConfidenceInterval> ci;
  if (v.size() >= 3) {
    ci = bootstrap_bca_mean_ci(v, o.bootstrap, 0.95, detail::sub_seed(o.seed, "e3.bca"));
    r.intervals.push_back({"mean_vci", *ci});
    r.set("ci_low", ci->low);
    r.set("ci_high", ci->high);
  }
  r.row("Mean VCI", m, 0.0, p);
  r.row("95% CI low", ci ? std::optional<double>(ci->low) : std::nullopt);
  r.row("95% CI high", ci ? std::optional<double>(ci->high) : std::nullopt);
  r.row("n observations", static_cast<double>(obs.size()));
  return r;
}

// ---------------------------------------------------------------------------
// E4: adversarial exposure vs next-window style shift.

struct ExposureObservation {
  std::string agent;
  std::int64_t window = 0;
  double exposure = 0.0;
  double shift = 0.0;
  double activity = 0.0;
};

/// Critical comments received per (agent, window), counted per comment.
inline std::map<AgentWindow, std::size_t> adversarial_exposure(const Dataset& d, int window_days) {
  const DatasetIndex idx(d);
  std::map<AgentWindow, std::size_t> out;
  for (const auto& rep : d.replies) {
    if (!is_critical_comment(rep.text)) continue;
    const auto target = idx.content_author(rep.parent);
    if (!target || *target == rep.author) continue;
    ++out[{*target, window_index(rep.created_at, d.dataset_epoch, window_days)}];
  }
  return out;
}

inline std::vector<ExposureObservation> exposure_observations(const Dataset& d, int window_days, int min_posts) {
  const auto table = agent_style_centroids(d, window_days, min_posts, Channel::visual);
  const auto exposure = adversarial_exposure(d, window_days);
  std::map<std::string, double> posts;
  for (const auto& p : d.posts) posts[p.author] += 1.0;
  std::vector<ExposureObservation> out;
  for (const auto& [key, c] : table) {
    auto next = table.find({key.agent, key.window + 1});
    if (next == table.end()) continue;
    auto e = exposure.find(key);
    out.push_back({key.agent, key.window, e == exposure.end() ? 0.0 : static_cast<double>(e->second),
                   detail::centroid_distance(c, next->second), posts[key.agent]});
  }
  return out;
}

inline ExperimentReport e4_cross_modal(const Dataset& d, const AnalysisOptions& o = {}) {
  ExperimentReport r("e4");
  r.config = ojson{{"window_days", o.window_days},
                   {"min_posts", o.min_posts},
                   {"lexicon_terms", kAdversarialLexicon.size()},
                   {"exposure_unit", "comment"}};
  const auto obs = exposure_observations(d, o.window_days, o.min_posts);
  r.n_observations = obs.size();
  std::vector<double> x, y, z;
  for (const auto& ob : obs) {
    x.push_back(ob.exposure);
    y.push_back(ob.shift);
    z.push_back(ob.activity);
  }
  r.set("n_observations", static_cast<double>(obs.size()));
  r.set("total_exposure", std::accumulate(x.begin(), x.end(), 0.0));
  std::optional<Correlation> c;
  if (obs.size() >= 3) c = pearson_r(x, y);
  std::optional<double> perm_p;
  if (c) {
    r.set("r_exposure_shift", c->r);
    TestResult t;
    t.statistic = c->r;
    t.p_value = c->p_value;
    t.df = static_cast<double>(c->n) - 2.0;
    r.add_test("pearson_t", t);
    if (auto pt = pearson_permutation_test(x, y, o.permutations, detail::sub_seed(o.seed, "e4.perm"))) {
      r.add_test("pearson_permutation", *pt);
      r.primary_test = "pearson_permutation";
      perm_p = pt->p_value;
    }
    if (auto pc = partial_correlation(x, y, z)) {
      r.set("partial_r_activity", pc->r);
      TestResult t2;
      t2.statistic = pc->r;
      t2.p_value = pc->p_value;
      r.add_test("partial_correlation", t2);
    }
  } else {
    r.set("r_exposure_shift", std::nullopt);
    if (obs.size() >= 3) r.notes.push_back("exposure or shift is constant; correlation undefined");
  }

  std::optional<double> hi_m, lo_m, split_p;
  if (obs.size() >= 3) {
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted_quantile(sorted, 0.5);
    std::vector<double> hi, lo;
    for (const auto& ob : obs) (ob.exposure > med ? hi : lo).push_back(ob.shift);
    if (!hi.empty()) hi_m = mean(hi);
    if (!lo.empty()) lo_m = mean(lo);
    if (hi.size() >= 2 && lo.size() >= 2) {
      const auto w = welch_t(hi, lo);
      r.add_test("high_low_welch", w);
      split_p = w.p_value;
    }
    r.set("median_exposure", med);
  }
  r.set("high_exposure_shift", hi_m);
  r.set("low_exposure_shift", lo_m);

  r.row("r(exposure, shift)", c ? std::optional<double>(c->r) : std::nullopt, 0.0, perm_p);
  r.row("High-exposure shift", hi_m);
  r.row("Low-exposure shift", lo_m, std::nullopt, split_p);
  r.row("Partial r (activity)", r.get("partial_r_activity"), 0.0, r.p("partial_correlation"));
  return r;
}

// ---------------------------------------------------------------------------
// E5: social communities vs visual clusters.

inline ExperimentReport e5_communities(const Dataset& d, const AnalysisOptions& o = {}) {
  ExperimentReport r("e5");
  r.config = ojson{{"community", "louvain"}, {"clustering", "k-means"}, {"k_range", {2, 8}}};
  GraphOptions go;
  go.include_human_likes = o.include_human_likes;
  const auto g = build_interaction_graph(d, go);
  const auto u = detail::undirected_weighted(g);
  const auto visual = agent_overall_centroids(d, 1, Channel::visual);
  const auto text = agent_overall_centroids(d, 1, Channel::text);
  r.set("agents_with_centroids", static_cast<double>(visual.size()));
  auto absent = [&](std::string why) {
    r.notes.push_back(std::move(why));
    r.set("nmi_visual", std::nullopt);
    r.set("ari_visual", std::nullopt);
    r.row("NMI (visual)", std::nullopt, 0.0);
    r.row("ARI", std::nullopt, 0.0);
    r.row("NMI (text)", std::nullopt);
    return r;
  };
  if (visual.size() < 10) return absent("need at least 10 agents with centroids");
  if (u.edge_count() == 0) return absent("interaction graph has no edges");

  const auto communities = louvain_partition(u);
  r.set("communities", static_cast<double>([&] {
          std::set<int> s;
          for (const auto& [a, c] : communities) s.insert(c);
          return s.size();
        }()));
  r.set("modularity", modularity(u, communities));

  auto cluster_partition = [&](const std::map<std::string, StyleCentroid>& cents, std::string_view tag,
                               std::vector<std::string>& ids) -> std::optional<SilhouetteSelection> {
    PointSet pts;
    ids.clear();
    for (const auto& [a, c] : cents)
      if (communities.count(a)) {
        ids.push_back(a);
        pts.push_back(c.components);
      }
    if (pts.size() < 10) return std::nullopt;
    return select_k_by_silhouette(pts, 2, 8, detail::sub_seed(o.seed, tag));
  };

  std::vector<std::string> ids;
  const auto sel = cluster_partition(visual, "e5.kmeans", ids);
  if (!sel) return absent("need at least 10 agents with centroids in the graph");
  r.n_observations = ids.size();
  r.set("k_selected", static_cast<double>(sel->k));
  r.set("silhouette", sel->silhouette);
  Partition social, clusters;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    social[ids[i]] = communities.at(ids[i]);
    clusters[ids[i]] = sel->clustering.labels[i];
  }
  const double nmi_v = nmi(social, clusters), ari_v = ari(social, clusters);
  r.set("nmi_visual", nmi_v);
  r.set("ari_visual", ari_v);

  std::vector<int> labels = sel->clustering.labels;
  auto shuffle = [](std::vector<int>& v, Rng& rng) { std::shuffle(v.begin(), v.end(), rng); };
  auto as_partition = [&](const std::vector<int>& lab) {
    Partition p;
    for (std::size_t i = 0; i < ids.size(); ++i) p[ids[i]] = lab[i];
    return p;
  };
  const auto nmi_t = permutation_test(
      nmi_v, [&](const std::vector<int>& lab) { return nmi(social, as_partition(lab)); }, labels, shuffle,
      o.permutations, detail::sub_seed(o.seed, "e5.perm.nmi"), Sidedness::greater);
  r.add_test("nmi_permutation", nmi_t);
  r.primary_test = "nmi_permutation";
  const auto ari_t = permutation_test(
      ari_v, [&](const std::vector<int>& lab) { return ari(social, as_partition(lab)); }, labels, shuffle,
      o.permutations, detail::sub_seed(o.seed, "e5.perm.ari"));
  r.add_test("ari_permutation", ari_t);

  std::optional<double> nmi_text;
  std::vector<std::string> tids;
  if (const auto tsel = cluster_partition(text, "e5.kmeans.text", tids)) {
    Partition ts, tc;
    for (std::size_t i = 0; i < tids.size(); ++i) {
      ts[tids[i]] = communities.at(tids[i]);
      tc[tids[i]] = tsel->clustering.labels[i];
    }
    nmi_text = nmi(ts, tc);
    r.set("k_selected_text", static_cast<double>(tsel->k));
  }
  r.set("nmi_text", nmi_text);

  r.row("NMI (visual)", nmi_v, 0.0, nmi_t.p_value);
  r.row("ARI", ari_v, 0.0, ari_t.p_value);
  r.row("NMI (text)", nmi_text);
  return r;
}

// ---------------------------------------------------------------------------
// E6: theme cascades (also feeds R3).

inline ExperimentReport e6_cascades(const Dataset& d, const AnalysisOptions& o = {}) {
  ExperimentReport r("e6");
  r.config = ojson{{"s", kDefaultR0Scale}, {"window_hours", kDefaultAdoptionWindowHours}, {"posts_per_theme", kPostsPerTheme}};
  auto absent = [&](std::string why) {
    r.notes.push_back(std::move(why));
    r.set("mean_r0", std::nullopt);
    r.row("Mean R0", std::nullopt, 1.0);
    r.row("SD R0", std::nullopt);
    r.row("Super-critical fraction", std::nullopt, 0.5);
    r.extra["sensitivity_grid"] = sensitivity_grid({}).to_json();
    return r;
  };
  if (d.posts.size() < kPostsPerTheme) return absent("need at least 30 posts");
  const auto themes = detect_themes(d.posts, detail::sub_seed(o.seed, "e6.themes"));
  std::vector<CascadeResult> results;
  std::vector<double> r0;
  for (const auto& t : themes.themes) {
    results.push_back(theme_r0(t));
    r0.push_back(results.back().r0);
  }
  r.n_observations = results.size();
  r.set("themes", static_cast<double>(results.size()));
  r.set("k_requested", static_cast<double>(themes.k_requested));
  const double m = mean(r0);
  const std::optional<double> sd = r0.size() > 1 ? std::optional<double>(sample_sd(r0)) : std::nullopt;
  const double frac = supercritical_fraction(results);
  r.set("mean_r0", m);
  r.set("sd_r0", sd);
  r.set("supercritical_fraction", frac);
  std::size_t super = 0;
  for (const auto& c : results)
    if (c.r0 > 1.0) ++super;
  const auto bt = binomial_test(super, results.size(), 0.5);
  r.add_test("majority_binomial", bt);
  r.primary_test = "majority_binomial";

  const auto u = undirected_binary(build_interaction_graph(d, GraphOptions{std::nullopt, o.include_human_likes}));
  const auto cc = centrality_r0_correlation(u, themes.themes, results);
  r.set("centrality_r0_r", cc ? std::optional<double>(cc->r) : std::nullopt);
  if (cc) {
    TestResult t;
    t.statistic = cc->r;
    t.p_value = cc->p_value;
    r.add_test("centrality_r0_pearson", t);
  }
  const auto grid = sensitivity_grid(themes.themes);
  r.extra["sensitivity_grid"] = grid.to_json();

  r.row("Mean R0", m, 1.0);
  r.row("SD R0", sd);
  r.row("Super-critical fraction", frac, 0.5, bt.p_value);
  r.row("Centrality-R0 r", r.get("centrality_r0_r"), 0.0, r.p("centrality_r0_pearson"));
  return r;
}

// ---------------------------------------------------------------------------
// E7: visual distinctiveness vs engagement.

struct DistinctivenessObservation {
  std::string agent;
  double vds = 0.0;
  double engagement = 0.0;
  std::size_t audience = 0;
};

/// VDS(a) = 1 - cos(mu_a, unweighted mean of the centroids of agents with an
/// interaction toward a). Agents without a centroid or audience are omitted.
inline std::vector<DistinctivenessObservation> distinctiveness_observations(const Dataset& d,
                                                                            bool include_human_likes = false,
                                                                            bool engagement_mean = true) {
  GraphOptions go;
  go.include_human_likes = include_human_likes;
  const auto g = build_interaction_graph(d, go);
  const auto cents = agent_overall_centroids(d, 1, Channel::visual);
  std::map<std::string, std::pair<double, double>> eng;  // (total, count)
  for (const auto& p : d.posts) {
    auto& e = eng[p.author];
    e.first += static_cast<double>(p.engagement());
    e.second += 1.0;
  }
  std::vector<DistinctivenessObservation> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& a = g.nodes()[i];
    auto ca = cents.find(a);
    if (ca == cents.end() || is_degenerate(ca->second)) continue;
    std::vector<const StyleCentroid*> audience;
    for (const auto& [j, w] : g.in_edges(i)) {
      if (j == i) continue;
      auto cb = cents.find(g.nodes()[j]);
      if (cb != cents.end()) audience.push_back(&cb->second);
    }
    if (audience.empty()) continue;
    StyleCentroid f;
    f.components.assign(ca->second.components.size(), 0.0);
    for (const auto* c : audience)
      for (std::size_t k = 0; k < f.components.size(); ++k) f.components[k] += c->components[k];
    for (double& x : f.components) x /= static_cast<double>(audience.size());
    f.support_count = audience.size();
    if (is_degenerate(f)) continue;
    const auto& e = eng[a];
    out.push_back({a, 1.0 - cosine(ca->second, f), engagement_mean ? e.first / e.second : e.first, audience.size()});
  }
  return out;
}

inline ExperimentReport e7_distinctiveness(const Dataset& d, const AnalysisOptions& o = {}) {
  ExperimentReport r("e7");
  r.config = ojson{{"audience", "incoming edges, unweighted"}, {"engagement", o.engagement_mean ? "mean" : "total"}};
  const auto obs = distinctiveness_observations(d, o.include_human_likes, o.engagement_mean);
  r.n_observations = obs.size();
  r.set("n_agents", static_cast<double>(obs.size()));
  std::vector<double> x, y;
  for (const auto& ob : obs) {
    x.push_back(ob.vds);
    y.push_back(ob.engagement);
  }
  auto finish = [&](std::optional<double> b2, std::optional<double> p, std::optional<double> r2, std::optional<double> v) {
    r.row("beta2", b2, 0.0, p);
    r.row("R^2 (quadratic)", r2);
    r.row("Vertex VDS", v);
    return r;
  };
  if (obs.size() < 3) {
    r.notes.push_back("need at least 3 agents with nonempty audiences");
    r.set("beta2", std::nullopt);
    return finish(std::nullopt, std::nullopt, std::nullopt, std::nullopt);
  }
  QuadraticFit fit;
  try {
    fit = quadratic_fit(x, y);
  } catch (const Error& e) {
    r.error = e.what();
    r.set("beta2", std::nullopt);
    return finish(std::nullopt, std::nullopt, std::nullopt, std::nullopt);
  }
  r.set("beta0", fit.beta0);
  r.set("beta1", fit.beta1);
  r.set("beta2", fit.beta2);
  r.set("r_squared", fit.r_squared);
  r.set("vertex", fit.vertex);
  const double lo = *std::min_element(x.begin(), x.end()), hi = *std::max_element(x.begin(), x.end());
  r.set("vds_min", lo);
  r.set("vds_max", hi);
  if (fit.vertex) {
    const bool inside = *fit.vertex >= lo && *fit.vertex <= hi;
    r.extra["vertex_inside_observed_range"] = inside;
    if (!inside) r.notes.push_back("vertex outside observed domain");
  }
  auto stat = [&](const std::vector<double>& yy) {
    try {
      return quadratic_fit(x, yy).beta2;
    } catch (const Error&) {
      return 0.0;
    }
  };
  auto shuffle = [](std::vector<double>& v, Rng& rng) { std::shuffle(v.begin(), v.end(), rng); };
  const auto t = permutation_test(fit.beta2, stat, y, shuffle, o.permutations, detail::sub_seed(o.seed, "e7.perm"));
  r.add_test("beta2_permutation", t);
  r.primary_test = "beta2_permutation";
  return finish(fit.beta2, t.p_value, fit.r_squared, fit.vertex);
}

// ---------------------------------------------------------------------------
// E8: intra-chain style diversity.

/// Mean pairwise cosine distance among each agent's own posts, one value per
/// agent with at least two posts (agents in id order).
inline std::vector<double> within_agent_spreads(const Dataset& d) {
  std::map<std::string, std::vector<StyleVector>> by_agent;
  for (const auto& p : d.posts) by_agent[p.author].push_back(p.image_embedding);
  std::vector<double> out;
  for (const auto& [a, vs] : by_agent)
    if (vs.size() >= 2) out.push_back(detail::mean_pair_distance(vs));
  return out;
}

inline ExperimentReport e8_style_diversity(const Dataset& d, const AnalysisOptions& o = {}) {
  ExperimentReport r("e8");
  r.config = ojson{{"icsd_null_resamples", o.icsd_null_resamples}};
  const auto chains = extract_chains(d, 2);
  const auto pool = visual_reply_pool(d);
  const auto within = within_agent_spreads(d);
  r.n_observations = chains.size();
  std::vector<double> icsd, ccs, depth, authors;
  for (const auto& c : chains) {
    icsd.push_back(chain_style_diversity(c));
    ccs.push_back(chain_coherence(c));
    depth.push_back(static_cast<double>(c.depth()));
    authors.push_back(static_cast<double>(distinct_authors(c)));
  }
  const std::optional<double> mean_icsd = icsd.empty() ? std::nullopt : std::optional<double>(mean(icsd));
  const std::optional<double> within_m = within.empty() ? std::nullopt : std::optional<double>(mean(within));
  r.set("chains", static_cast<double>(chains.size()));
  r.set("mean_icsd", mean_icsd);
  r.set("within_agent_spread", within_m);
  r.set("mean_distinct_authors", authors.empty() ? std::nullopt : std::optional<double>(mean(authors)));

  std::optional<double> random_m, chain_random_p;
  if (!chains.empty() && pool.size() >= 2) {
    const auto null = corpus_icsd_null(pool, chains, o.icsd_null_resamples, detail::sub_seed(o.seed, "e8.icsd_null"));
    random_m = mean(null.corpus_means);
    if (icsd.size() >= 2 && null.per_chain_first.size() >= 2) {
      const auto w = welch_t(icsd, null.per_chain_first);
      r.add_test("chain_vs_random_welch", w);
      r.primary_test = "chain_vs_random_welch";
      chain_random_p = w.p_value;
    }
    TestResult t;
    t.statistic = *mean_icsd;
    t.p_value = null_sample_p_value(*mean_icsd, null.corpus_means);
    t.method = TestMethod::permutation;
    t.n_resamples = null.corpus_means.size();
    r.add_test("icsd_corpus_null", t);
  }
  r.set("random_baseline", random_m);
  std::optional<double> within_chain_p;
  if (within.size() >= 2 && icsd.size() >= 2) {
    const auto w = welch_t(within, icsd);
    r.add_test("within_vs_chain_welch", w);
    within_chain_p = w.p_value;
  }
  if (chains.size() >= 3) {
    if (auto c = pearson_r(depth, icsd)) {
      r.set("icsd_depth_r", c->r);
      TestResult t;
      t.statistic = c->r;
      t.p_value = c->p_value;
      r.add_test("icsd_depth_pearson", t);
    }
    if (auto c = pearson_r(ccs, icsd)) r.set("ccs_icsd_r", c->r);
  }
  r.row("Mean ICSD", mean_icsd, random_m, chain_random_p);
  r.row("Within-agent spread", within_m, std::nullopt, within_chain_p);
  r.row("Random baseline", random_m);
  r.row("ICSD-depth r", r.get("icsd_depth_r"), 0.0, r.p("icsd_depth_pearson"));
  r.row("CCS-ICSD r", r.get("ccs_icsd_r"));
  r.row("Mean distinct authors", r.get("mean_distinct_authors"));
  return r;
}

// ---------------------------------------------------------------------------
// Robustness views and F1.

inline ExperimentReport r1_from_e2(const ExperimentReport& e2) {
  ExperimentReport r("r1");
  r.n_observations = e2.n_observations;
  r.notes = e2.notes;
  for (const char* k : {"H", "dp_null_mean", "dp_null_sd", "dp_z", "dyadic_auc_structural", "dyadic_visual_coefficient",
                        "dyadic_text_coefficient", "auc_visual", "auc_text"})
    if (auto v = e2.get(k); v || k == std::string("H")) r.set(k, v);
  if (const auto* t = e2.test("h_degree_preserving")) {
    r.tests.push_back(*t);
    r.primary_test = t->name;
  }
  if (e2.extra.contains("dyadic_model")) r.extra["dyadic_model"] = e2.extra["dyadic_model"];
  r.row("H vs degree-preserving null", e2.get("H"), e2.get("dp_null_mean"), e2.p("h_degree_preserving"));
  r.row("Null z", e2.get("dp_z"));
  r.row("Structural model AUC", e2.get("dyadic_auc_structural"), 0.5);
  return r;
}

inline ExperimentReport r2_from_e1(const ExperimentReport& e1) {
  ExperimentReport r("r2");
  r.n_observations = e1.n_observations;
  for (int lag = 1; lag <= 3; ++lag) {
    const std::string k = std::to_string(lag);
    r.set("lag" + k + "_delta", e1.get("lag" + k + "_delta"));
    r.set("lag" + k + "_pairs", e1.get("lag" + k + "_pairs"));
    r.set("lag" + k + "_p", e1.get("lag" + k + "_p"));
    if (auto p = e1.get("lag" + k + "_p")) {
      TestResult t;
      t.statistic = e1.get("lag" + k + "_delta").value_or(0.0);
      t.p_value = *p;
      t.method = TestMethod::analytic;
      r.add_test("lag" + k + "_t_test", t);
      if (lag == 1) r.primary_test = "lag1_t_test";
    }
    r.row("Lag-" + k + " delta CCS", e1.get("lag" + k + "_delta"), 0.0, e1.get("lag" + k + "_p"));
  }
  r.row("Same-author-filtered CCS", e1.get("same_author_filtered_ccs"), e1.get("null_ccs"));
  r.set("same_author_filtered_ccs", e1.get("same_author_filtered_ccs"));
  if (e1.extra.contains("lag_coherence")) r.extra["lag_coherence"] = e1.extra["lag_coherence"];
  return r;
}

inline ExperimentReport r3_from_e6(const ExperimentReport& e6) {
  ExperimentReport r("r3");
  r.n_observations = e6.n_observations;
  r.notes = e6.notes;
  r.extra["sensitivity_grid"] = e6.extra.value("sensitivity_grid", ojson::object());
  const auto& grid = r.extra["sensitivity_grid"];
  if (grid.contains("fraction")) {
    const auto s = grid["s_values"].get<std::vector<double>>();
    const auto w = grid["window_hours"].get<std::vector<double>>();
    const auto f = grid["fraction"].get<std::vector<std::vector<double>>>();
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < w.size(); ++j) {
        char name[64];
        std::snprintf(name, sizeof name, "s=%g window=%gh", s[i], w[j]);
        std::optional<double> v;
        if (e6.n_observations > 0) v = f[i][j];
        r.set(name, v);
        r.row(name, v);
      }
  }
  return r;
}

inline ExperimentReport f1_randomized(const Dataset& d, const AnalysisOptions& o = {}) {
  ExperimentReport r("f1");
  auto absent = [&](std::string why) {
    r.notes.push_back(std::move(why));
    r.set("treatment_delta_mu", std::nullopt);
    r.set("control_delta_mu", std::nullopt);
    r.row("Treatment delta mu", std::nullopt);
    r.row("Control delta mu", std::nullopt);
    return r;
  };
  if (!o.ground_truth || !o.ground_truth->assignment) return absent("no scenario assignment in ground truth");
  const auto& a = *o.ground_truth->assignment;
  r.config = ojson{{"treatment", a.treatment.size()},
                   {"control", a.control.size()},
                   {"switch", format_timestamp(a.switch_time)},
                   {"end", format_timestamp(a.end_time)}};
  const auto dmu = scenario_delta_mu(d, a);
  std::vector<double> t, c;
  for (const auto& id : a.treatment)
    if (auto it = dmu.find(id); it != dmu.end()) t.push_back(it->second);
  for (const auto& id : a.control)
    if (auto it = dmu.find(id); it != dmu.end()) c.push_back(it->second);
  r.n_observations = t.size() + c.size();
  r.set("n_treatment", static_cast<double>(t.size()));
  r.set("n_control", static_cast<double>(c.size()));
  if (t.size() < 2 || c.size() < 2) return absent("fewer than 2 agents per arm with posts in adjacent exposure windows");
  r.set("treatment_delta_mu", mean(t));
  r.set("control_delta_mu", mean(c));
  const auto w = welch_t(t, c);
  r.add_test("treatment_vs_control_welch", w);
  r.primary_test = "treatment_vs_control_welch";
  r.row("Treatment delta mu", mean(t), mean(c), w.p_value);
  r.row("Control delta mu", mean(c));
  return r;
}

// ---------------------------------------------------------------------------
// Orchestration.

/// Parses a comma-separated experiment filter; empty selects everything.
inline std::vector<std::string> parse_experiment_filter(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    std::transform(cur.begin(), cur.end(), cur.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (std::find(kExperimentIds.begin(), kExperimentIds.end(), cur) == kExperimentIds.end())
      throw Error("unknown experiment id '" + cur + "' (expected one of e1..e8, r1, r2, r3, f1)");
    if (std::find(out.begin(), out.end(), cur) == out.end()) out.push_back(cur);
    cur.clear();
  };
  for (char ch : s) {
    if (ch == ',' || ch == ' ') flush();
    else cur.push_back(ch);
  }
  flush();
  if (out.empty())
    for (auto id : kExperimentIds) out.emplace_back(id);
  std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
    auto rank = [](const std::string& x) { return std::find(kExperimentIds.begin(), kExperimentIds.end(), x) - kExperimentIds.begin(); };
    return rank(a) < rank(b);
  });
  return out;
}

/// BH step-up adjusted p-values, q_(i) = min_{j >= i} p_(j) m / j.
inline std::vector<double> bh_adjusted(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    running = std::min(running, p[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1));
    q[order[k]] = running;
  }
  return q;
}

/// Marks each report's primary test in one BH pass over all primary p-values,
/// and each individual test in a second pass over every reported p-value.
inline void apply_global_fdr(std::vector<ExperimentReport>& reports, double q = 0.05) {
  std::vector<double> primary;
  std::vector<std::size_t> who;
  for (std::size_t i = 0; i < reports.size(); ++i)
    if (reports[i].primary_test)
      if (auto p = reports[i].p(*reports[i].primary_test)) {
        primary.push_back(*p);
        who.push_back(i);
      }
  const auto mask = bh_fdr(primary, q);
  const auto adj = bh_adjusted(primary);
  for (auto& r : reports) r.fdr_adjusted = true;
  for (std::size_t k = 0; k < who.size(); ++k) {
    reports[who[k]].fdr_rejected = mask[k];
    reports[who[k]].fdr_q_value = adj[k];
  }
  std::vector<double> all;
  for (const auto& r : reports)
    for (const auto& t : r.tests) all.push_back(t.result.p_value);
  const auto all_mask = bh_fdr(all, q);
  std::size_t k = 0;
  for (auto& r : reports)
    for (auto& t : r.tests) t.fdr_rejected = all_mask[k++];
}

/// Runs the selected experiments (all when `ids` is empty) with sub-seeds
/// derived from opts.seed, then applies the global FDR pass. A failing
/// experiment yields a report carrying the error message.
inline std::vector<ExperimentReport> run_all(const Dataset& d, const AnalysisOptions& opts = {},
                                             std::vector<std::string> ids = {}) {
  if (ids.empty())
    for (auto id : kExperimentIds) ids.emplace_back(id);
  auto wants = [&](std::string_view id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); };
  auto guarded = [&](const std::string& id, const std::function<ExperimentReport()>& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      ExperimentReport r(id);
      r.error = e.what();
      return r;
    }
  };
  std::map<std::string, ExperimentReport> done;
  auto run = [&](const std::string& id) -> const ExperimentReport& {
    if (auto it = done.find(id); it != done.end()) return it->second;
    ExperimentReport r;
    if (id == "e1") r = guarded(id, [&] { return e1_chains(d, opts); });
    else if (id == "e2") r = guarded(id, [&] { return e2_homophily(d, opts); });
    else if (id == "e3") r = guarded(id, [&] { return e3_style_drift(d, opts); });
    else if (id == "e4") r = guarded(id, [&] { return e4_cross_modal(d, opts); });
    else if (id == "e5") r = guarded(id, [&] { return e5_communities(d, opts); });
    else if (id == "e6") r = guarded(id, [&] { return e6_cascades(d, opts); });
    else if (id == "e7") r = guarded(id, [&] { return e7_distinctiveness(d, opts); });
    else if (id == "e8") r = guarded(id, [&] { return e8_style_diversity(d, opts); });
    else if (id == "f1") r = guarded(id, [&] { return f1_randomized(d, opts); });
    return done.emplace(id, std::move(r)).first->second;
  };
  std::vector<ExperimentReport> out;
  for (auto idv : kExperimentIds) {
    const std::string id(idv);
    if (!wants(id)) continue;
    if (id == "r1") out.push_back(r1_from_e2(run("e2")));
    else if (id == "r2") out.push_back(r2_from_e1(run("e1")));
    else if (id == "r3") out.push_back(r3_from_e6(run("e6")));
    else out.push_back(run(id));
  }
  apply_global_fdr(out, opts.fdr_q);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace detail {

inline ojson opt_json(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

}  // namespace detail

inline ojson to_json(const ExperimentReport& r) {
  ojson metrics = ojson::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = detail::opt_json(v);
  ojson tests = ojson::array();
  for (const auto& t : r.tests)
    tests.push_back(ojson{{"name", t.name},
                          {"statistic", detail::opt_json(t.result.statistic)},
                          {"p_value", detail::opt_json(t.result.p_value)},
                          {"method", to_string(t.result.method)},
                          {"n_resamples", t.result.n_resamples ? ojson(*t.result.n_resamples) : ojson(nullptr)},
                          {"df", t.result.df ? detail::opt_json(*t.result.df) : ojson(nullptr)},
                          {"degenerate", t.result.degenerate},
                          {"fdr_rejected", t.fdr_rejected}});
  ojson intervals = ojson::array();
  for (const auto& i : r.intervals)
    intervals.push_back(ojson{{"name", i.name},
                              {"low", detail::opt_json(i.ci.low)},
                              {"high", detail::opt_json(i.ci.high)},
                              {"level", i.ci.level},
                              {"method", i.ci.method},
                              {"n_resamples", i.ci.n_resamples}});
  ojson rows = ojson::array();
  for (const auto& row : r.rows)
    rows.push_back(ojson{{"metric", row.metric},
                         {"observed", detail::opt_json(row.observed)},
                         {"baseline", detail::opt_json(row.baseline)},
                         {"p_value", detail::opt_json(row.p_value)}});
  ojson notes = ojson::array();
  for (const auto& n : r.notes) notes.push_back(n);
  std::optional<double> primary_p;
  if (r.primary_test) primary_p = r.p(*r.primary_test);
  return ojson{{"experiment_id", r.experiment_id},
               {"phenomenon", r.phenomenon},
               {"n_observations", r.n_observations},
               {"metrics", metrics},
               {"tests", tests},
               {"intervals", intervals},
               {"rows", rows},
               {"primary_test", r.primary_test ? ojson(*r.primary_test) : ojson(nullptr)},
               {"primary_p_value", detail::opt_json(primary_p)},
               {"fdr_adjusted", r.fdr_adjusted},
               {"fdr_rejected", r.fdr_rejected},
               {"fdr_q_value", detail::opt_json(r.fdr_q_value)},
               {"config", r.config},
               {"extra", r.extra},
               {"notes", notes},
               {"error", r.error ? ojson(*r.error) : ojson(nullptr)}};
}

inline ojson report_document(const std::vector<ExperimentReport>& reports, const AnalysisOptions& opts) {
  ojson exps = ojson::array();
  for (const auto& r : reports) exps.push_back(to_json(r));
  return ojson{{"format", "vissoc-report"}, {"version", 1}, {"analysis", opts.to_json()}, {"experiments", exps}};
}

struct TableRow {
  std::string experiment;
  std::string metric;
  std::optional<double> observed;
  std::optional<double> baseline;
  std::optional<double> p_value;
  std::string phenomenon;
};

/// Flattens a report document into table rows; throws on malformed input.
inline std::vector<TableRow> flatten_report(const nlohmann::json& doc) {
  auto fail = [](const std::string& why) -> std::vector<TableRow> { throw Error("malformed report: " + why); };
  if (!doc.is_object() || !doc.contains("experiments") || !doc["experiments"].is_array())
    return fail("missing 'experiments' array");
  auto num = [](const nlohmann::json& j, const char* k) -> std::optional<double> {
    if (!j.contains(k) || j[k].is_null()) return std::nullopt;
    if (!j[k].is_number()) throw Error(std::string("malformed report: field '") + k + "' is not a number");
    return j[k].get<double>();
  };
  std::vector<TableRow> out;
  for (const auto& e : doc["experiments"]) {
    if (!e.is_object() || !e.contains("experiment_id") || !e["experiment_id"].is_string())
      return fail("experiment without 'experiment_id'");
    if (!e.contains("rows") || !e["rows"].is_array()) return fail("experiment without 'rows'");
    const auto id = e["experiment_id"].get<std::string>();
    const auto phen = e.value("phenomenon", std::string());
    for (const auto& row : e["rows"]) {
      if (!row.is_object() || !row.contains("metric") || !row["metric"].is_string()) return fail("row without 'metric'");
      out.push_back({id, row["metric"].get<std::string>(), num(row, "observed"), num(row, "baseline"),
                     num(row, "p_value"), phen});
    }
  }
  return out;
}

inline std::string format_number(std::optional<double> v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", *v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

inline void write_report_csv(const std::vector<TableRow>& rows, std::ostream& out) {
  out << "experiment,metric,observed,baseline,p_value,phenomenon\n";
  auto full = [](std::optional<double> v) -> std::string {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", *v);
    return buf;
  };
  for (const auto& r : rows)
    out << r.experiment << ',' << csv_field(r.metric) << ',' << full(r.observed) << ',' << full(r.baseline) << ','
        << full(r.p_value) << ',' << csv_field(r.phenomenon) << '\n';
}

/// Aligned text table; the experiment id and phenomenon appear on the first
/// row of each experiment only.
inline void write_report_text(const std::vector<TableRow>& rows, std::ostream& out) {
  std::vector<std::array<std::string, 6>> cells;
  cells.push_back({"Exp.", "Metric", "Observed", "Baseline", "p-value", "Phenomenon"});
  std::string last;
  for (const auto& r : rows) {
    const bool first = r.experiment != last;
    last = r.experiment;
    std::string id = r.experiment;
    std::transform(id.begin(), id.end(), id.begin(), [](unsigned char c) { return std::toupper(c); });
    cells.push_back({first ? id : "", r.metric, format_number(r.observed), r.baseline ? format_number(r.baseline) : "-",
                     r.p_value ? format_number(r.p_value) : "-", first ? r.phenomenon : ""});
  }
  std::array<std::size_t, 6> width{};
  for (const auto& row : cells)
    for (std::size_t i = 0; i < 6; ++i) width[i] = std::max(width[i], row[i].size());
  auto emit = [&](const std::array<std::string, 6>& row) {
    std::string line;
    for (std::size_t i = 0; i < 6; ++i) {
      const bool right = i >= 2 && i <= 4;
      const std::string pad(width[i] - row[i].size(), ' ');
      line += right ? pad + row[i] : row[i] + pad;
      if (i + 1 < 6) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  };
  emit(cells.front());
  std::size_t total = 0;
  for (std::size_t i = 0; i < 6; ++i) total += width[i] + (i + 1 < 6 ? 2 : 0);
  out << std::string(total, '-') << '\n';
  for (std::size_t i = 1; i < cells.size(); ++i) emit(cells[i]);
}

}  // namespace vissoc
