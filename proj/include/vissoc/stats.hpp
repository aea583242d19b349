#pragma once

// Resampling statistics and small-sample estimators: permutation tests, BCa
// bootstrap intervals, Benjamini-Hochberg, correlation, Welch t, rank AUC,
// partition agreement (NMI / ARI), ridge logistic regression and quadratic
// least squares.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "vissoc/core.hpp"

namespace vissoc {

enum class TestMethod { permutation, t_welch, analytic };

inline std::string_view to_string(TestMethod m) {
  switch (m) {
    case TestMethod::permutation: return "permutation";
    case TestMethod::t_welch: return "t_welch";
    case TestMethod::analytic: return "analytic";
  }
  return "?";
}

enum class Sidedness { two_sided, greater, less };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::analytic;
  std::optional<std::size_t> n_resamples;
  std::optional<double> df;
  bool degenerate = false;
};

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  double level = 0.95;
  std::string method = "BCa";
  std::size_t n_resamples = 0;
};

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;  // two-sided, t approximation with n - 2 df
  std::size_t n = 0;
};

using Partition = std::map<std::string, int>;

// ---------------------------------------------------------------------------
// Descriptive helpers.

inline double mean(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double sample_sd(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

inline double normal_cdf(double z) { return boost::math::cdf(boost::math::normal(), z); }
inline double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

inline double student_t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

// Linear-interpolated quantile of sorted data (type 7).
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// ---------------------------------------------------------------------------
// Permutation tests.

namespace detail {

inline bool at_least_as_extreme(double perm, double obs, Sidedness side) {
  const double eps = 1e-12 * std::max(1.0, std::abs(obs));
  switch (side) {
    case Sidedness::two_sided: return std::abs(perm) >= std::abs(obs) - eps;
    case Sidedness::greater: return perm >= obs - eps;
    case Sidedness::less: return perm <= obs + eps;
  }
  return false;
}

}  // namespace detail

/// p = (1 + #{T_perm at least as extreme as T_obs}) / (n + 1).
///
/// `shuffle(data, rng)` applies the caller's exchange scheme in place;
/// `statistic(data)` recomputes T. Both must be pure apart from the rng.
template <typename Data, typename Statistic, typename Shuffle>
TestResult permutation_test(double observed, Statistic&& statistic, Data data, Shuffle&& shuffle,
                            std::size_t n = 2000, std::uint64_t seed = 0,
                            Sidedness side = Sidedness::two_sided) {
  Rng rng(seed);
  std::size_t count = 0;
  bool all_same = true;
  double first = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    shuffle(data, rng);
    const double t = statistic(data);
    if (i == 0) first = t;
    else if (t != first) all_same = false;
    if (detail::at_least_as_extreme(t, observed, side)) ++count;
  }
  TestResult r;
  r.statistic = observed;
  r.method = TestMethod::permutation;
  r.n_resamples = n;
  r.p_value = static_cast<double>(count + 1) / static_cast<double>(n + 1);
  if (n > 0 && all_same && first == observed) {
    r.p_value = 1.0;
    r.degenerate = true;
  }
  return r;
}

/// Two-sample label permutation on the difference of means (a - b).
inline TestResult permutation_test_mean_difference(std::span<const double> a, std::span<const double> b,
                                                   std::size_t n = 2000, std::uint64_t seed = 0,
                                                   Sidedness side = Sidedness::two_sided) {
  if (a.empty() || b.empty()) throw Error("permutation test needs two nonempty samples");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t na = a.size();
  auto stat = [na](const std::vector<double>& v) {
    return mean(std::span(v).first(na)) - mean(std::span(v).subspan(na));
  };
  auto shuffle = [](std::vector<double>& v, Rng& rng) { std::shuffle(v.begin(), v.end(), rng); };
  const double observed = stat(pooled);
  return permutation_test(observed, stat, std::move(pooled), shuffle, n, seed, side);
}

/// Sign-flip permutation for a mean of paired differences (exchanging the two
/// members of each pair negates its difference).
inline TestResult sign_flip_test(std::span<const double> diffs, std::size_t n = 2000, std::uint64_t seed = 0,
                                 Sidedness side = Sidedness::two_sided) {
  if (diffs.empty()) throw Error("sign-flip test needs a nonempty sample");
  std::vector<double> base(diffs.begin(), diffs.end());
  std::vector<double> work = base;
  auto stat = [](const std::vector<double>& v) { return mean(v); };
  auto shuffle = [&base](std::vector<double>& v, Rng& rng) {
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = coin(rng) ? -base[i] : base[i];
  };
  return permutation_test(mean(base), stat, std::move(work), shuffle, n, seed, side);
}

// ---------------------------------------------------------------------------
// BCa bootstrap.

/// BCa interval for a statistic over item indices.
///
/// `statistic(indices)` evaluates the statistic on the multiset of items named
/// by `indices`; returning NaN marks it undefined, and such a resample is
/// redrawn at most 10 times before failing.
template <typename Statistic>
ConfidenceInterval bootstrap_bca_ci_indexed(std::size_t n_items, Statistic&& statistic, std::size_t n = 5000,
                                            double level = 0.95, std::uint64_t seed = 0) {
  if (n_items < 2) throw Error("bootstrap needs at least 2 observations");
  if (!(level > 0 && level < 1)) throw Error("confidence level must lie in (0, 1)");
  std::vector<std::size_t> all(n_items);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double theta = statistic(std::span<const std::size_t>(all));
  if (std::isnan(theta)) throw Error("bootstrap statistic undefined on the observed data");

  ConfidenceInterval ci;
  ci.level = level;
  ci.n_resamples = n;

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n_items - 1);
  std::vector<double> boot;
  boot.reserve(n);
  std::vector<std::size_t> idx(n_items);
  for (std::size_t b = 0; b < n; ++b) {
    double t = std::numeric_limits<double>::quiet_NaN();
    for (int attempt = 0; attempt <= 10 && std::isnan(t); ++attempt) {
      for (auto& i : idx) i = pick(rng);
      t = statistic(std::span<const std::size_t>(idx));
    }
    if (std::isnan(t)) throw Error("bootstrap statistic undefined after 10 redraws");
    boot.push_back(t);
  }
  std::sort(boot.begin(), boot.end());
  if (boot.front() == boot.back()) {
    ci.low = ci.high = theta;
    return ci;
  }

  // Bias correction from the bootstrap CDF at theta (ties count half).
  const auto lower = std::lower_bound(boot.begin(), boot.end(), theta);
  const auto upper = std::upper_bound(boot.begin(), boot.end(), theta);
  double prop = (static_cast<double>(lower - boot.begin()) + 0.5 * static_cast<double>(upper - lower)) /
                static_cast<double>(n);
  const double clamp_eps = 0.5 / static_cast<double>(n);
  prop = std::clamp(prop, clamp_eps, 1.0 - clamp_eps);
  const double z0 = normal_quantile(prop);

  // Acceleration from jackknife skewness.
  std::vector<double> jack(n_items);
  std::vector<std::size_t> loo(n_items - 1);
  for (std::size_t i = 0; i < n_items; ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < n_items; ++j)
      if (j != i) loo[k++] = j;
    jack[i] = statistic(std::span<const std::size_t>(loo));
  }
  double a = 0.0;
  if (std::none_of(jack.begin(), jack.end(), [](double v) { return std::isnan(v); })) {
    const double jm = mean(jack);
    double num = 0.0, den = 0.0;
    for (double v : jack) {
      const double dlt = jm - v;
      num += dlt * dlt * dlt;
      den += dlt * dlt;
    }
    if (den > 0) a = num / (6.0 * std::pow(den, 1.5));
  }

  const double alpha = (1.0 - level) / 2.0;
  auto adjusted = [&](double q) {
    const double zq = normal_quantile(q);
    const double denom = 1.0 - a * (z0 + zq);
    return normal_cdf(z0 + (z0 + zq) / denom);
  };
  ci.low = sorted_quantile(boot, adjusted(alpha));
  ci.high = sorted_quantile(boot, adjusted(1.0 - alpha));
  if (ci.low > ci.high) std::swap(ci.low, ci.high);
  return ci;
}

template <typename Statistic>
ConfidenceInterval bootstrap_bca_ci(std::span<const double> data, Statistic&& statistic, std::size_t n = 5000,
                                    double level = 0.95, std::uint64_t seed = 0) {
  std::vector<double> buf;
  auto by_index = [&](std::span<const std::size_t> idx) {
    buf.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) buf[i] = data[idx[i]];
    return statistic(std::span<const double>(buf));
  };
  return bootstrap_bca_ci_indexed(data.size(), by_index, n, level, seed);
}

inline ConfidenceInterval bootstrap_bca_mean_ci(std::span<const double> data, std::size_t n = 5000,
                                                double level = 0.95, std::uint64_t seed = 0) {
  return bootstrap_bca_ci(
      data, [](std::span<const double> x) { return mean(x); }, n, level, seed);
}

// ---------------------------------------------------------------------------
// Multiple testing.

/// Benjamini-Hochberg step-up: reject every p_(i) with i <= max{i : p_(i) <= i q / m}.
inline std::vector<bool> bh_fdr(std::span<const double> p_values, double q = 0.05) {
  const std::size_t m = p_values.size();
  std::vector<bool> reject(m, false);
  if (m == 0) return reject;
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw Error("bh_fdr: p-values must lie in [0, 1]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::size_t cutoff = 0;
  for (std::size_t i = 1; i <= m; ++i)
    if (p_values[order[i - 1]] <= static_cast<double>(i) * q / static_cast<double>(m)) cutoff = i;
  for (std::size_t i = 0; i < cutoff; ++i) reject[order[i]] = true;
  return reject;
}

// ---------------------------------------------------------------------------
// Correlation and t tests.

inline std::optional<Correlation> pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson_r: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) return std::nullopt;
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0) || !(syy > 0)) return std::nullopt;
  Correlation c;
  c.n = n;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::abs(c.r) >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
    c.p_value = student_t_two_sided_p(t, df);
  }
  return c;
}

/// Permutation p for Pearson r, shuffling y against x.
inline std::optional<TestResult> pearson_permutation_test(std::span<const double> x, std::span<const double> y,
                                                          std::size_t n = 2000, std::uint64_t seed = 0) {
  const auto obs = pearson_r(x, y);
  if (!obs) return std::nullopt;
  std::vector<double> xs(x.begin(), x.end());
  auto stat = [&xs](const std::vector<double>& ys) {
    auto c = pearson_r(xs, ys);
    return c ? c->r : 0.0;
  };
  auto shuffle = [](std::vector<double>& v, Rng& rng) { std::shuffle(v.begin(), v.end(), rng); };
  return permutation_test(obs->r, stat, std::vector<double>(y.begin(), y.end()), shuffle, n, seed);
}

/// Partial correlation of x and y controlling for z.
inline std::optional<Correlation> partial_correlation(std::span<const double> x, std::span<const double> y,
                                                      std::span<const double> z) {
  const auto rxy = pearson_r(x, y), rxz = pearson_r(x, z), ryz = pearson_r(y, z);
  if (!rxy || !rxz || !ryz || x.size() < 4) return std::nullopt;
  const double den = std::sqrt((1 - rxz->r * rxz->r) * (1 - ryz->r * ryz->r));
  if (!(den > 0)) return std::nullopt;
  Correlation c;
  c.n = x.size();
  c.r = std::clamp((rxy->r - rxz->r * ryz->r) / den, -1.0, 1.0);
  const double df = static_cast<double>(c.n - 3);
  c.p_value = std::abs(c.r) >= 1.0 ? 0.0 : student_t_two_sided_p(c.r * std::sqrt(df / (1 - c.r * c.r)), df);
  return c;
}

/// Welch two-sample t test (a - b) with Welch-Satterthwaite df.
inline TestResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error("welch_t: each sample needs at least 2 values");
  const double ma = mean(a), mb = mean(b);
  const double va = sample_variance(a), vb = sample_variance(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  TestResult r;
  r.method = TestMethod::t_welch;
  const double se2 = va / na + vb / nb;
  if (!(se2 > 0)) {
    r.degenerate = true;
    if (ma == mb) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return r;
  }
  r.statistic = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / ((va / na) * (va / na) / (na - 1) + (vb / nb) * (vb / nb) / (nb - 1));
  r.df = df;
  r.p_value = student_t_two_sided_p(r.statistic, df);
  return r;
}

inline TestResult one_sample_t(std::span<const double> x, double mu0 = 0.0) {
  if (x.size() < 2) throw Error("one_sample_t: need at least 2 values");
  TestResult r;
  r.method = TestMethod::analytic;
  const double m = mean(x), v = sample_variance(x);
  const double df = static_cast<double>(x.size() - 1);
  r.df = df;
  if (!(v > 0)) {
    r.degenerate = true;
    r.statistic = m == mu0 ? 0.0 : (m > mu0 ? 1.0 : -1.0) * std::numeric_limits<double>::infinity();
    r.p_value = m == mu0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = (m - mu0) / std::sqrt(v / static_cast<double>(x.size()));
  r.p_value = student_t_two_sided_p(r.statistic, df);
  return r;
}

/// Exact two-sided binomial test (sum of outcomes no more likely than the observed one).
inline TestResult binomial_test(std::size_t successes, std::size_t trials, double p0 = 0.5) {
  if (trials == 0) throw Error("binomial_test: zero trials");
  boost::math::binomial dist(static_cast<double>(trials), p0);
  const double observed = boost::math::pdf(dist, static_cast<double>(successes));
  double p = 0.0;
  for (std::size_t k = 0; k <= trials; ++k) {
    const double pk = boost::math::pdf(dist, static_cast<double>(k));
    if (pk <= observed * (1 + 1e-7)) p += pk;
  }
  TestResult r;
  r.statistic = static_cast<double>(successes) / static_cast<double>(trials);
  r.p_value = std::min(1.0, p);
  r.method = TestMethod::analytic;
  return r;
}

// ---------------------------------------------------------------------------
// Rank AUC.

/// Mann-Whitney AUC = P(pos > neg) + 0.5 P(pos == neg).
inline double auc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw Error("auc: both score sets must be nonempty");
  std::vector<std::pair<double, int>> all;
  all.reserve(pos.size() + neg.size());
  for (double s : pos) all.emplace_back(s, 1);
  for (double s : neg) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  // Count, for each positive, negatives strictly below plus half the ties.
  double wins = 0.0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t tie_pos = 0, tie_neg = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? tie_pos : tie_neg)++;
      ++j;
    }
    wins += static_cast<double>(tie_pos) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(tie_neg));
    neg_below += tie_neg;
    i = j;
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// ---------------------------------------------------------------------------
// Partition agreement.

namespace detail {

struct Contingency {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows, cols;
  double n = 0;
};

inline Contingency contingency(const Partition& p1, const Partition& p2) {
  if (p1.size() != p2.size()) throw Error("partitions cover different node sets");
  Contingency c;
  auto it2 = p2.begin();
  for (auto it1 = p1.begin(); it1 != p1.end(); ++it1, ++it2) {
    if (it1->first != it2->first) throw Error("partitions cover different node sets");
    c.joint[{it1->second, it2->second}] += 1;
    c.rows[it1->second] += 1;
    c.cols[it2->second] += 1;
    c.n += 1;
  }
  return c;
}

inline double entropy(const std::map<int, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [k, v] : counts) {
    const double p = v / n;
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

inline double choose2(double x) { return x * (x - 1) / 2.0; }

}  // namespace detail

/// Mutual information normalized by the arithmetic mean of the two entropies.
/// A zero-entropy partition yields 0 by convention.
inline double nmi(const Partition& p1, const Partition& p2) {
  const auto c = detail::contingency(p1, p2);
  if (c.n == 0) return 0.0;
  const double h1 = detail::entropy(c.rows, c.n), h2 = detail::entropy(c.cols, c.n);
  if (h1 <= 0 || h2 <= 0) return 0.0;
  double mi = 0.0;
  for (const auto& [k, v] : c.joint) {
    const double pij = v / c.n;
    mi += pij * std::log(pij / ((c.rows.at(k.first) / c.n) * (c.cols.at(k.second) / c.n)));
  }
  return std::clamp(mi / ((h1 + h2) / 2.0), 0.0, 1.0);
}

/// Adjusted Rand index. When both partitions are trivial in the same way the
/// index is undefined; it is reported as 1 for identical partitions, else 0.
inline double ari(const Partition& p1, const Partition& p2) {
  const auto c = detail::contingency(p1, p2);
  if (c.n < 2) return 1.0;
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (const auto& [k, v] : c.joint) sum_ij += detail::choose2(v);
  for (const auto& [k, v] : c.rows) sum_a += detail::choose2(v);
  for (const auto& [k, v] : c.cols) sum_b += detail::choose2(v);
  const double total = detail::choose2(c.n);
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return sum_ij == max_index ? 1.0 : 0.0;
  return (sum_ij - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Dense linear algebra for tiny systems.

namespace detail {

// Gaussian elimination with partial pivoting; throws on a singular matrix.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    if (!(std::abs(A[piv][col]) > 1e-14)) throw Error("singular linear system");
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r][col] / A[col][col];
      for (std::size_t k = col; k < n; ++k) A[r][k] -= f * A[col][k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= A[i][k] * x[k];
    x[i] = s / A[i][i];
  }
  return x;
}

inline std::vector<std::vector<double>> invert(const std::vector<std::vector<double>>& A) {
  const std::size_t n = A.size();
  std::vector<std::vector<double>> inv(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const auto col = solve_linear(A, e);
    for (std::size_t i = 0; i < n; ++i) inv[i][j] = col[i];
  }
  return inv;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ridge logistic regression by IRLS on standardized features.

struct LogisticFit {
  // coefficients[0] is the intercept; slopes are on the standardized scale.
  std::vector<double> coefficients;
  std::vector<double> feature_means;
  std::vector<double> feature_sds;
  double auc_on_fit = 0.5;
  std::size_t iterations = 0;
  bool converged = false;
  bool separation = false;  // classes split by the fitted predictor, or probabilities saturated

  [[nodiscard]] double linear_predictor(std::span<const double> row) const {
    double eta = coefficients[0];
    for (std::size_t j = 0; j < row.size(); ++j)
      eta += coefficients[j + 1] * (feature_sds[j] > 0 ? (row[j] - feature_means[j]) / feature_sds[j] : 0.0);
    return eta;
  }
};

inline LogisticFit logistic_fit(const std::vector<std::vector<double>>& features, std::span<const int> labels,
                                double l2 = 1e-6, std::size_t max_iter = 100) {
  const std::size_t n = features.size();
  if (n != labels.size()) throw Error("logistic_fit: row/label count mismatch");
  const std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (pos == 0 || pos == n) throw Error("logistic_fit: need at least one positive and one negative label");
  const std::size_t p = features.front().size();

  LogisticFit fit;
  fit.feature_means.assign(p, 0.0);
  fit.feature_sds.assign(p, 0.0);
  for (const auto& row : features) {
    if (row.size() != p) throw Error("logistic_fit: ragged feature matrix");
    for (std::size_t j = 0; j < p; ++j) fit.feature_means[j] += row[j];
  }
  for (double& m : fit.feature_means) m /= static_cast<double>(n);
  for (const auto& row : features)
    for (std::size_t j = 0; j < p; ++j) fit.feature_sds[j] += (row[j] - fit.feature_means[j]) * (row[j] - fit.feature_means[j]);
  for (double& s : fit.feature_sds) s = std::sqrt(s / static_cast<double>(n));

  // Design matrix with intercept column; constant features become zeros.
  std::vector<std::vector<double>> X(n, std::vector<double>(p + 1, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      X[i][j + 1] = fit.feature_sds[j] > 0 ? (features[i][j] - fit.feature_means[j]) / fit.feature_sds[j] : 0.0;

  std::vector<double> beta(p + 1, 0.0);
  const double prior = static_cast<double>(pos) / static_cast<double>(n);
  beta[0] = std::log(prior / (1 - prior));
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::vector<std::vector<double>> H(p + 1, std::vector<double>(p + 1, 0.0));
    std::vector<double> g(p + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0;
      for (std::size_t j = 0; j <= p; ++j) eta += X[i][j] * beta[j];
      const double mu = 1.0 / (1.0 + std::exp(-eta));
      const double w = std::max(mu * (1 - mu), 1e-12);
      for (std::size_t j = 0; j <= p; ++j) {
        g[j] += X[i][j] * (labels[i] - mu);
        for (std::size_t k = 0; k <= j; ++k) H[j][k] += w * X[i][j] * X[i][k];
      }
    }
    for (std::size_t j = 0; j <= p; ++j)
      for (std::size_t k = 0; k < j; ++k) H[k][j] = H[j][k];
    // Ridge on slopes only.
    for (std::size_t j = 1; j <= p; ++j) {
      H[j][j] += l2;
      g[j] -= l2 * beta[j];
    }
    for (std::size_t j = 1; j <= p; ++j)
      if (fit.feature_sds[j - 1] == 0) H[j][j] += 1.0;
    const auto step = detail::solve_linear(H, g);
    double max_change = 0;
    for (std::size_t j = 0; j <= p; ++j) {
      beta[j] += step[j];
      max_change = std::max(max_change, std::abs(step[j]));
    }
    fit.iterations = it + 1;
    if (max_change < 1e-8) {
      fit.converged = true;
      break;
    }
  }
  fit.coefficients = beta;

  std::vector<double> spos, sneg;
  double min_mu = 1, max_mu = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double eta = 0;
    for (std::size_t j = 0; j <= p; ++j) eta += X[i][j] * beta[j];
    const double mu = 1.0 / (1.0 + std::exp(-eta));
    min_mu = std::min(min_mu, labels[i] ? mu : 1 - mu);
    max_mu = std::max(max_mu, mu);
    (labels[i] ? spos : sneg).push_back(eta);
  }
  const bool split = !spos.empty() && !sneg.empty() &&
                     *std::min_element(spos.begin(), spos.end()) > *std::max_element(sneg.begin(), sneg.end());
  fit.separation = split || min_mu > 1 - 1e-6;
  fit.auc_on_fit = auc(spos, sneg);
  if (fit.separation) warn("logistic_fit: data are (quasi-)separable; ridge-regularized estimate returned");
  return fit;
}

// ---------------------------------------------------------------------------
// Quadratic least squares.

struct QuadraticFit {
  double beta0 = 0, beta1 = 0, beta2 = 0;
  double r_squared = 0;
  std::optional<double> vertex;
  double se_beta0 = 0, se_beta1 = 0, se_beta2 = 0;
  std::size_t n = 0;
};

/// OLS of y on [1, x, x^2] via the normal equations.
inline QuadraticFit quadratic_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("quadratic_fit: length mismatch");
  {
    std::vector<double> distinct(x.begin(), x.end());
    std::sort(distinct.begin(), distinct.end());
    if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 3)
      throw Error("quadratic_fit: need at least 3 distinct x values (collinear design)");
  }
  const std::size_t n = x.size();
  std::vector<std::vector<double>> XtX(3, std::vector<double>(3, 0.0));
  std::vector<double> Xty(3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double row[3] = {1.0, x[i], x[i] * x[i]};
    for (int j = 0; j < 3; ++j) {
      Xty[j] += row[j] * y[i];
      for (int k = 0; k < 3; ++k) XtX[j][k] += row[j] * row[k];
    }
  }
  const auto b = detail::solve_linear(XtX, Xty);
  QuadraticFit f;
  f.n = n;
  f.beta0 = b[0];
  f.beta1 = b[1];
  f.beta2 = b[2];
  const double my = mean(y);
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double yhat = b[0] + b[1] * x[i] + b[2] * x[i] * x[i];
    ss_res += (y[i] - yhat) * (y[i] - yhat);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  f.r_squared = ss_tot > 0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 0.0;
  if (ss_tot == 0) {
    // Constant response: the exact solution is flat.
    f.beta0 = my;
    f.beta1 = f.beta2 = 0.0;
  }
  if (std::abs(f.beta2) >= 1e-12) f.vertex = -f.beta1 / (2.0 * f.beta2);
  if (n > 3) {
    const double sigma2 = ss_res / static_cast<double>(n - 3);
    const auto inv = detail::invert(XtX);
    f.se_beta0 = std::sqrt(std::max(0.0, sigma2 * inv[0][0]));
    f.se_beta1 = std::sqrt(std::max(0.0, sigma2 * inv[1][1]));
    f.se_beta2 = std::sqrt(std::max(0.0, sigma2 * inv[2][2]));
  }
  return f;
}

}  // namespace vissoc
