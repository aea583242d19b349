#pragma once

// k-means (k-means++ seeding, Lloyd iterations) and silhouette-based k selection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vissoc/core.hpp"

namespace vissoc {

using PointSet = std::vector<std::vector<double>>;

struct KMeansResult {
  std::vector<int> labels;  // dense 0..k_effective-1
  PointSet centers;
  std::size_t iterations = 0;
  bool converged = false;
  [[nodiscard]] std::size_t k() const { return centers.size(); }
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Lloyd's algorithm from k-means++ seeds. Stops after `max_iter` iterations
/// or once no center moves farther than `tol`. Clusters that end up empty are
/// dropped (with a warning) and labels compacted.
inline KMeansResult kmeans(const PointSet& points, std::size_t k, Rng& rng, std::size_t max_iter = 100,
                           double tol = 1e-6) {
  const std::size_t n = points.size();
  if (n == 0) throw Error("kmeans: no points");
  if (k == 0) throw Error("kmeans: k must be >= 1");
  k = std::min(k, n);
  const std::size_t dim = points.front().size();

  // k-means++ seeding.
  PointSet centers;
  centers.reserve(k);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centers.push_back(points[first(rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = detail::squared_distance(points[i], centers[0]);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (centers.size() < k) {
    double total = 0.0;
    for (double x : d2) total += x;
    std::size_t chosen = 0;
    if (total > 0) {
      double r = unif(rng) * total;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = first(rng);
    }
    centers.push_back(points[chosen]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], detail::squared_distance(points[i], centers.back()));
  }

  KMeansResult res;
  res.labels.assign(n, 0);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const double dist = detail::squared_distance(points[i], centers[c]);
        if (dist < best) {
          best = dist;
          arg = static_cast<int>(c);
        }
      }
      res.labels[i] = arg;
    }
    PointSet next(centers.size(), std::vector<double>(dim, 0.0));
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = next[static_cast<std::size_t>(res.labels[i])];
      for (std::size_t j = 0; j < dim; ++j) c[j] += points[i][j];
      ++counts[static_cast<std::size_t>(res.labels[i])];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] == 0) {
        next[c] = centers[c];
        continue;
      }
      for (double& x : next[c]) x /= static_cast<double>(counts[c]);
      shift = std::max(shift, std::sqrt(detail::squared_distance(next[c], centers[c])));
    }
    centers = std::move(next);
    res.iterations = it + 1;
    if (shift < tol) {
      res.converged = true;
      break;
    }
  }

  // Final assignment against the last centers, then drop empty clusters.
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double dist = detail::squared_distance(points[i], centers[c]);
      if (dist < best) {
        best = dist;
        arg = static_cast<int>(c);
      }
    }
    res.labels[i] = arg;
    ++counts[static_cast<std::size_t>(arg)];
  }
  std::vector<int> remap(centers.size(), -1);
  int next_label = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (counts[c] == 0) continue;
    remap[c] = next_label++;
    res.centers.push_back(centers[c]);
  }
  if (static_cast<std::size_t>(next_label) < centers.size())
    warn("kmeans: dropped " + std::to_string(centers.size() - static_cast<std::size_t>(next_label)) +
         " empty cluster(s); effective k = " + std::to_string(next_label));
  for (int& l : res.labels) l = remap[static_cast<std::size_t>(l)];
  return res;
}

inline KMeansResult kmeans(const PointSet& points, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100,
                           double tol = 1e-6) {
  Rng rng(seed);
  return kmeans(points, k, rng, max_iter, tol);
}

/// Mean silhouette width under Euclidean distance. Points in singleton
/// clusters score 0; a single-cluster labeling scores 0.
inline double mean_silhouette(const PointSet& points, const std::vector<int>& labels) {
  const std::size_t n = points.size();
  if (n != labels.size()) throw Error("mean_silhouette: label count mismatch");
  if (n < 2) return 0.0;
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  if (k < 2) return 0.0;
  std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++size[static_cast<std::size_t>(l)];
  double total = 0.0;
  std::vector<double> sum(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sum[static_cast<std::size_t>(labels[j])] += std::sqrt(detail::squared_distance(points[i], points[j]));
    const auto own = static_cast<std::size_t>(labels[i]);
    if (size[own] <= 1) continue;
    const double a = sum[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sum.size(); ++c)
      if (c != own && size[c] > 0) b = std::min(b, sum[c] / static_cast<double>(size[c]));
    const double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

struct SilhouetteSelection {
  std::size_t k = 0;
  double silhouette = 0.0;
  KMeansResult clustering;
  std::vector<std::pair<std::size_t, double>> scores;  // (k, mean silhouette) per candidate
};

/// Runs k-means for every k in [k_min, k_max] and keeps the largest mean
/// silhouette; ties go to the smallest k.
inline SilhouetteSelection select_k_by_silhouette(const PointSet& points, std::size_t k_min, std::size_t k_max,
                                                  std::uint64_t seed) {
  if (k_min < 2 || k_max < k_min) throw Error("select_k_by_silhouette: invalid k range");
  if (points.size() <= k_min) throw Error("select_k_by_silhouette: too few points for the k range");
  SilhouetteSelection best;
  bool have = false;
  for (std::size_t k = k_min; k <= std::min(k_max, points.size() - 1); ++k) {
    auto res = kmeans(points, k, derive_seed(seed, k));
    const double s = mean_silhouette(points, res.labels);
    best.scores.emplace_back(k, s);
    if (!have || s > best.silhouette + 1e-12) {
      best.k = k;
      best.silhouette = s;
      best.clustering = std::move(res);
      have = true;
    }
  }
  return best;
}

}  // namespace vissoc
