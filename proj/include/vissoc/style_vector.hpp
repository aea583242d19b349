#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vissoc/core.hpp"

namespace vissoc {

constexpr double kUnitNormTolerance = 1e-6;

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Unit-norm embedding of one image or caption.
///
/// Storage is shared and immutable, so copies are cheap and chains or
/// centroid tables can hold StyleVectors by value.
class StyleVector {
 public:
  StyleVector() = default;

  /// Normalizes `v`; throws on a zero vector.
  static StyleVector normalized(std::vector<double> v) {
    const double n = norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) throw Error("cannot normalize a zero or non-finite vector");
    for (double& x : v) x /= n;
    return StyleVector(std::move(v));
  }

  /// Adopts `v` verbatim; throws unless it is unit-norm within kUnitNormTolerance.
  static StyleVector from_unit(std::vector<double> v) {
    const double n = norm(v);
    if (!(std::abs(n - 1.0) <= kUnitNormTolerance))
      throw Error("vector norm " + std::to_string(n) + " is not unit within tolerance");
    return StyleVector(std::move(v));
  }

  [[nodiscard]] std::span<const double> values() const {
    return data_ ? std::span<const double>(*data_) : std::span<const double>();
  }
  [[nodiscard]] std::size_t dim() const { return data_ ? data_->size() : 0; }
  [[nodiscard]] bool empty() const { return dim() == 0; }
  [[nodiscard]] double operator[](std::size_t i) const { return (*data_)[i]; }

  friend bool operator==(const StyleVector& a, const StyleVector& b) {
    if (a.data_ == b.data_) return true;
    return a.dim() == b.dim() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
  }

 private:
  explicit StyleVector(std::vector<double> v) : data_(std::make_shared<const std::vector<double>>(std::move(v))) {}
  std::shared_ptr<const std::vector<double>> data_;
};

/// Plain arithmetic mean of unit vectors; deliberately not renormalized.
struct StyleCentroid {
  std::vector<double> components;
  std::size_t support_count = 0;
  std::int64_t window_index = 0;

  [[nodiscard]] std::span<const double> values() const { return components; }
  friend bool operator==(const StyleCentroid&, const StyleCentroid&) = default;
};

inline std::span<const double> as_span(const StyleVector& v) { return v.values(); }
inline std::span<const double> as_span(const StyleCentroid& c) { return c.components; }
inline std::span<const double> as_span(std::span<const double> s) { return s; }
inline std::span<const double> as_span(const std::vector<double>& v) { return v; }

inline double cosine_span(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a), nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw Error("cosine of a zero-norm vector (degenerate centroid)");
  const double c = dot(a, b) / (na * nb);
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

template <typename A, typename B>
double cosine(const A& a, const B& b) {
  return cosine_span(as_span(a), as_span(b));
}

// Cosine between two StyleVectors: both are unit so the dot product suffices.
inline double unit_cosine(const StyleVector& a, const StyleVector& b) {
  const double c = dot(a.values(), b.values());
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

template <typename Range>
StyleCentroid centroid(const Range& vectors, std::int64_t window = 0) {
  StyleCentroid c;
  c.window_index = window;
  for (const auto& v : vectors) {
    const auto s = as_span(v);
    if (c.components.empty()) c.components.assign(s.size(), 0.0);
    if (s.size() != c.components.size()) throw Error("centroid: dimension mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) c.components[i] += s[i];
    ++c.support_count;
  }
  if (c.support_count == 0) throw Error("centroid of an empty set");
  for (double& x : c.components) x /= static_cast<double>(c.support_count);
  return c;
}

// True when the centroid collapsed to (numerically) zero and cosine would fail.
inline bool is_degenerate(const StyleCentroid& c) { return !(norm(c.components) > 1e-12); }

}  // namespace vissoc
