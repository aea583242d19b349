#pragma once

// Embedding geometry: windowed style centroids and the synthetic
// persona-conditioned embedding generator used by the simulator.

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "vissoc/data_model.hpp"
#include "vissoc/style_vector.hpp"

namespace vissoc {

enum class Channel { visual, text };

struct AgentWindow {
  std::string agent;
  std::int64_t window = 0;
  friend auto operator<=>(const AgentWindow&, const AgentWindow&) = default;
};

using CentroidTable = std::map<AgentWindow, StyleCentroid>;

/// Per-(agent, window) style centroids over posts.
///
/// Windows are consecutive half-open intervals of `window_days` starting at
/// the dataset epoch. Cells supported by fewer than `min_posts` posts are
/// omitted. The text channel averages caption embeddings and skips posts that
/// have none.
inline CentroidTable agent_style_centroids(const Dataset& d, int window_days = 3, int min_posts = 3,
                                           Channel channel = Channel::visual) {
  if (window_days < 1) throw Error("window_days must be >= 1");
  if (min_posts < 1) throw Error("min_posts must be >= 1");
  std::map<AgentWindow, std::vector<StyleVector>> groups;
  for (const auto& p : d.posts) {
    const StyleVector* v = &p.image_embedding;
    if (channel == Channel::text) {
      if (!p.caption_embedding) continue;
      v = &*p.caption_embedding;
    }
    groups[{p.author, window_index(p.created_at, d.dataset_epoch, window_days)}].push_back(*v);
  }
  CentroidTable out;
  for (auto& [key, vs] : groups) {
    if (static_cast<int>(vs.size()) < min_posts) continue;
    out.emplace(key, centroid(vs, key.window));
  }
  return out;
}

/// Whole-dataset centroid per agent (every post in one window).
inline std::map<std::string, StyleCentroid> agent_overall_centroids(const Dataset& d, int min_posts = 1,
                                                                    Channel channel = Channel::visual) {
  std::map<std::string, std::vector<StyleVector>> groups;
  for (const auto& p : d.posts) {
    if (channel == Channel::text) {
      if (p.caption_embedding) groups[p.author].push_back(*p.caption_embedding);
    } else {
      groups[p.author].push_back(p.image_embedding);
    }
  }
  std::map<std::string, StyleCentroid> out;
  for (auto& [agent, vs] : groups)
    if (static_cast<int>(vs.size()) >= min_posts) out.emplace(agent, centroid(vs));
  return out;
}

// ---------------------------------------------------------------------------

struct SynthStyleConfig {
  int embedding_dim = 64;
  double style_weight = 0.7;    // w_s
  double subject_weight = 0.3;  // w_j
  // Expected L2 norm of the noise term: the Gaussian draw is scaled by
  // 1/sqrt(dim) so sigma means the same thing at every dimension.
  double noise_sigma = 0.15;
  int subject_pool_size = 40;
  double drift_lambda = 0.0;

  void check() const {
    if (embedding_dim < 1) throw Error("embedding_dim must be >= 1");
    if (style_weight < 0 || subject_weight < 0) throw Error("style and subject weights must be non-negative");
    if (noise_sigma < 0) throw Error("noise_sigma must be non-negative");
    if (subject_pool_size < 1) throw Error("subject_pool_size must be >= 1");
    if (drift_lambda < 0 || drift_lambda > 1) throw Error("drift_lambda must lie in [0, 1]");
  }
};

inline StyleVector random_unit_vector(int dim, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (double& x : v) x = gauss(rng);
    if (norm(v) > 1e-12) return StyleVector::normalized(std::move(v));
  }
  throw Error("failed to draw a nonzero random vector");
}

/// normalize(w_s * anchor + w_j * subject + sigma * g / sqrt(dim)), g ~ N(0, I).
///
/// `sigma_scale` multiplies cfg.noise_sigma (the simulator uses it for
/// reactance). A zero result redraws the noise at most 10 times.
inline StyleVector synth_embedding(const StyleVector& persona_anchor, const StyleVector& subject,
                                   const SynthStyleConfig& cfg, Rng& rng, double sigma_scale = 1.0) {
  const auto a = persona_anchor.values();
  const auto s = subject.values();
  if (a.size() != s.size()) throw Error("synth_embedding: anchor and subject dimensions differ");
  const double sigma = cfg.noise_sigma * sigma_scale;
  const double noise_scale = sigma / std::sqrt(static_cast<double>(a.size()));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = cfg.style_weight * a[i] + cfg.subject_weight * s[i];
    if (sigma > 0)
      for (double& x : v) x += noise_scale * gauss(rng);
    if (norm(v) > 1e-12) return StyleVector::normalized(std::move(v));
  }
  throw Error("synth_embedding: degenerate zero vector after 10 noise draws");
}

/// normalize((1 - lambda) * anchor + lambda * neighborhood); lambda = 0 is the identity.
inline StyleVector apply_drift(const StyleVector& anchor, const StyleCentroid& neighborhood, double lambda) {
  if (lambda < 0 || lambda > 1) throw Error("apply_drift: lambda must lie in [0, 1]");
  if (lambda == 0.0) return anchor;
  const auto a = anchor.values();
  const auto& n = neighborhood.components;
  if (a.size() != n.size()) throw Error("apply_drift: dimension mismatch");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - lambda) * a[i] + lambda * n[i];
  if (!(norm(v) > 1e-12)) throw Error("apply_drift: degenerate zero vector");
  return StyleVector::normalized(std::move(v));
}

}  // namespace vissoc
