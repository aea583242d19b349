#pragma once

// Visual themes (k-means clusters of post embeddings) and their cascade
// statistics: secondary adopters, R0, super-critical fraction and the
// (s, window) sensitivity grid.

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vissoc/clustering.hpp"
#include "vissoc/core.hpp"
#include "vissoc/data_model.hpp"
#include "vissoc/social_graph.hpp"
#include "vissoc/stats.hpp"
#include "vissoc/style_vector.hpp"

namespace vissoc {

constexpr std::size_t kPostsPerTheme = 30;
constexpr double kDefaultR0Scale = 3.0;
constexpr double kDefaultAdoptionWindowHours = 48.0;

struct ThemeMember {
  std::string post_id;
  std::string author;
  Timestamp created_at;
};

struct Theme {
  int theme_id = 0;
  std::vector<ThemeMember> members;  // sorted by (created_at, post_id)
  std::string index_post;
  std::string index_author;
  Timestamp t0;
  StyleCentroid frozen_centroid;     // members with created_at <= t0
  std::vector<double> cluster_center;
};

struct ThemeSet {
  std::vector<Theme> themes;
  std::map<std::string, int> post_theme;
  std::size_t k_requested = 0;
};

/// k-means over post image embeddings with k = max(1, floor(n / 30)).
inline ThemeSet detect_themes(const std::vector<PostNode>& posts, std::uint64_t seed) {
  ThemeSet out;
  if (posts.empty()) return out;
  out.k_requested = std::max<std::size_t>(1, posts.size() / kPostsPerTheme);
  PointSet pts;
  pts.reserve(posts.size());
  for (const auto& p : posts) pts.emplace_back(p.image_embedding.values().begin(), p.image_embedding.values().end());
  const auto km = kmeans(pts, out.k_requested, seed);

  out.themes.resize(km.k());
  std::vector<std::vector<const PostNode*>> groups(km.k());
  for (std::size_t i = 0; i < posts.size(); ++i) {
    groups[static_cast<std::size_t>(km.labels[i])].push_back(&posts[i]);
    out.post_theme[posts[i].post_id] = km.labels[i];
  }
  for (std::size_t t = 0; t < km.k(); ++t) {
    auto& g = groups[t];
    std::sort(g.begin(), g.end(), [](const PostNode* a, const PostNode* b) {
      return std::tie(a->created_at, a->post_id) < std::tie(b->created_at, b->post_id);
    });
    Theme& th = out.themes[t];
    th.theme_id = static_cast<int>(t);
    th.cluster_center = km.centers[t];
    for (const PostNode* p : g) th.members.push_back({p->post_id, p->author, p->created_at});
    th.index_post = g.front()->post_id;
    th.index_author = g.front()->author;
    th.t0 = g.front()->created_at;
    std::vector<StyleVector> early;
    for (const PostNode* p : g)
      if (p->created_at <= th.t0) early.push_back(p->image_embedding);
    th.frozen_centroid = centroid(early);
  }
  return out;
}

struct CascadeResult {
  int theme_id = 0;
  std::vector<std::string> secondary_adopters;  // sorted, distinct
  double r0 = 0.0;
  double s = kDefaultR0Scale;
  double window_hours = kDefaultAdoptionWindowHours;
};

/// Distinct agents other than the index author with a member post in
/// (t0, t0 + window]; r0 = s * |adopters|.
inline CascadeResult theme_r0(const Theme& theme, double s = kDefaultR0Scale,
                              double window_hours = kDefaultAdoptionWindowHours) {
  if (s < 1) throw Error("theme_r0: s must be >= 1");
  if (!(window_hours > 0)) throw Error("theme_r0: window must be positive");
  CascadeResult r;
  r.theme_id = theme.theme_id;
  r.s = s;
  r.window_hours = window_hours;
  const auto horizon = static_cast<std::int64_t>(window_hours * static_cast<double>(kSecondsPerHour));
  for (const auto& m : theme.members) {
    const auto dt = m.created_at - theme.t0;
    if (dt > 0 && dt <= horizon && m.author != theme.index_author) r.secondary_adopters.push_back(m.author);
  }
  std::sort(r.secondary_adopters.begin(), r.secondary_adopters.end());
  r.secondary_adopters.erase(std::unique(r.secondary_adopters.begin(), r.secondary_adopters.end()),
                             r.secondary_adopters.end());
  r.r0 = s * static_cast<double>(r.secondary_adopters.size());
  return r;
}

inline double supercritical_fraction(const std::vector<CascadeResult>& results) {
  if (results.empty()) throw Error("supercritical_fraction: no themes");
  std::size_t n = 0;
  for (const auto& r : results)
    if (r.r0 > 1.0) ++n;
  return static_cast<double>(n) / static_cast<double>(results.size());
}

struct SensitivityGrid {
  std::vector<double> s_values;
  std::vector<double> window_hours;
  std::vector<std::vector<double>> fraction;  // [s index][window index]

  void write_csv(std::ostream& out) const {
    out << "s";
    for (double w : window_hours) out << ",w" << w << "h";
    out << '\n';
    for (std::size_t i = 0; i < s_values.size(); ++i) {
      out << s_values[i];
      for (double f : fraction[i]) out << ',' << f;
      out << '\n';
    }
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    return nlohmann::ordered_json{{"s_values", s_values}, {"window_hours", window_hours}, {"fraction", fraction}};
  }
};

inline SensitivityGrid sensitivity_grid(const std::vector<Theme>& themes,
                                        std::vector<double> s_values = {1, 2, 3, 4, 5},
                                        std::vector<double> windows = {24, 48, 72, 96}) {
  SensitivityGrid g;
  g.s_values = std::move(s_values);
  g.window_hours = std::move(windows);
  g.fraction.assign(g.s_values.size(), std::vector<double>(g.window_hours.size(), 0.0));
  if (themes.empty()) return g;
  for (std::size_t j = 0; j < g.window_hours.size(); ++j) {
    std::vector<std::size_t> adopters;
    for (const auto& t : themes) adopters.push_back(theme_r0(t, 1.0, g.window_hours[j]).secondary_adopters.size());
    for (std::size_t i = 0; i < g.s_values.size(); ++i) {
      std::size_t n = 0;
      for (auto a : adopters)
        if (g.s_values[i] * static_cast<double>(a) > 1.0) ++n;
      g.fraction[i][j] = static_cast<double>(n) / static_cast<double>(themes.size());
    }
  }
  return g;
}

/// Pearson correlation between each theme's index-author degree centrality
/// and its R0. Themes whose index author is unknown to the graph are skipped.
inline std::optional<Correlation> centrality_r0_correlation(const UndirectedGraph& g, const std::vector<Theme>& themes,
                                                            const std::vector<CascadeResult>& results) {
  const auto centrality = degree_centrality(g);
  std::map<int, const Theme*> by_id;
  for (const auto& t : themes) by_id[t.theme_id] = &t;
  std::vector<double> x, y;
  for (const auto& r : results) {
    auto t = by_id.find(r.theme_id);
    if (t == by_id.end()) continue;
    auto c = centrality.find(t->second->index_author);
    if (c == centrality.end()) continue;
    x.push_back(c->second);
    y.push_back(r.r0);
  }
  if (x.size() < 3) return std::nullopt;
  return pearson_r(x, y);
}

}  // namespace vissoc
