// Acceptance suite: one PASS/FAIL line per criterion; exits nonzero when any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace vissoc;

namespace {

// Pinned tolerances and targets.
constexpr int kForestCount = 200;
constexpr int kForestMaxNodes = 12;
constexpr double kForestSeconds = 5.0;
constexpr int kOracleInstances = 20;     // minimum comparisons per metric
constexpr int kOracleMaxDraws = 200;
constexpr int kOracleMaxAgents = 10;
constexpr double kOracleTolerance = 1e-9;
constexpr int kKsReplications = 200;
constexpr double kKsMax = 0.1;
constexpr int kCoverageTrials = 1000;
constexpr int kCoverageMin = 930;
constexpr int kCoverageMax = 970;
constexpr double kCalibrationSeconds = 120.0;
constexpr int kSilhouetteTrials = 100;
constexpr int kSilhouetteMinHits = 95;
constexpr int kReferenceSeeds = 5;
constexpr double kNullVciBound = 0.01;
constexpr double kSeedSeconds = 180.0;
constexpr double kDriftLambda = 0.3;
constexpr double kDriftVciMin = 0.05;
constexpr double kDriftP = 0.01;
constexpr int kDriftMinSeeds = 4;
constexpr double kPlantedBeta = 3.0;
constexpr double kPlantedHMin = 1.05;
constexpr double kPlantedP = 0.05;
constexpr double kNullHLow = 0.97;
constexpr double kNullHHigh = 1.03;
constexpr double kChainP = 0.01;
constexpr double kCcsIcsdRMax = -0.8;
constexpr int kScenarioSeeds = 20;
constexpr std::uint64_t kScenarioSeedBase = 1000;
constexpr double kScenarioP = 0.05;
constexpr int kAnchorMinHits = 16;
constexpr int kNoneMaxHits = 3;
constexpr double kScaleSeconds = 600.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string config_path(const char* name) { return std::string(VISSOC_CONFIG_DIR) + "/" + name; }

// Reference runs are shared between criteria 5, 7, 8, 9 and 12.
const Dataset& reference_dataset(std::uint64_t seed) {
  static std::map<std::uint64_t, Dataset> cache;
  if (auto it = cache.find(seed); it != cache.end()) return it->second;
  auto cfg = load_sim_config(config_path("reference.json"));
  cfg.seed = seed;
  return cache.emplace(seed, run_simulation(cfg).dataset).first->second;
}

AnalysisOptions options_for(std::uint64_t seed) {
  AnalysisOptions o;
  o.seed = seed;
  return o;
}

// Random social instance: up to kOracleMaxAgents agents, posts over three
// days and random interactions of every kind.
Dataset random_social(Rng& rng, int dim = 5) {
  std::uniform_int_distribution<int> n_agents(4, kOracleMaxAgents);
  const int n = n_agents(rng);
  std::uniform_int_distribution<int> who(0, n - 1);
  std::uniform_int_distribution<std::int64_t> when(0, 3 * kSecondsPerDay - 1);
  std::uniform_int_distribution<int> kind(0, 2);
  std::bernoulli_distribution human(0.2);
  Dataset d;
  for (int i = 0; i < n; ++i) d.agents.push_back(fx::agent("a" + std::to_string(i)));
  for (int i = 0; i < 4 * n; ++i)
    d.posts.push_back(fx::post("p" + std::to_string(i), "a" + std::to_string(who(rng)), fx::at(when(rng)),
                               fx::random_unit(dim, rng)));
  for (int i = 0; i < 3 * n; ++i) {
    const int a = who(rng), b = who(rng);
    const int kk = kind(rng);
    const auto k = kk == 0 ? InteractionKind::like : kk == 1 ? InteractionKind::comment : InteractionKind::follow;
    auto e = fx::interaction("a" + std::to_string(a), "a" + std::to_string(b), k, fx::at(when(rng)));
    if (k == InteractionKind::like && human(rng)) e.human = true;
    d.interactions.push_back(e);
  }
  return fx::finish(std::move(d));
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2001);
  std::uniform_int_distribution<int> posts(1, 3);
  int mismatches = 0, chains = 0;
  for (int i = 0; i < kForestCount; ++i) {
    const int np = posts(rng);
    const int nr = std::uniform_int_distribution<int>(0, kForestMaxNodes - np)(rng);
    const auto d = fx::random_forest(rng, np, nr, std::uniform_real_distribution<double>(0.3, 0.95)(rng));
    for (std::size_t min_depth : {1u, 2u}) {
      std::set<std::vector<std::string>> got;
      const auto extracted = extract_chains(d, min_depth);
      for (const auto& c : extracted) {
        std::vector<std::string> p{c.root};
        p.insert(p.end(), c.replies.begin(), c.replies.end());
        got.insert(p);
      }
      if (got != oracle::chain_paths(d, min_depth) || got.size() != extracted.size()) ++mismatches;
      chains += static_cast<int>(extracted.size());
    }
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && s < kForestSeconds,
          fmt("%d forests, %d chains, %d mismatches, %.2fs", kForestCount, chains, mismatches, s)};
}

Outcome criterion2() {
  Rng rng(2002);
  double worst = 0.0;
  std::map<std::string, int> checks;
  auto track = [&](const std::string& what, double got, double want) {
    worst = std::max(worst, std::abs(got - want));
    ++checks[what];
  };

  const std::vector<std::string> metrics{"ccs", "icsd", "edge_weight", "h", "vds", "vci", "vci_identity", "r0"};
  auto short_of_minimum = [&] {
    return std::any_of(metrics.begin(), metrics.end(), [&](const std::string& m) { return checks[m] < kOracleInstances; });
  };
  for (int i = 0; i < kOracleMaxDraws && short_of_minimum(); ++i) {
    // CCS and ICSD on random linear chains.
    std::vector<std::vector<double>> raw;
    Dataset d;
    d.agents = {fx::agent("a")};
    const int nodes = std::uniform_int_distribution<int>(3, kOracleMaxAgents)(rng);
    std::string parent = "p";
    for (int k = 0; k < nodes; ++k) {
      const auto v = fx::random_unit(6, rng);
      raw.push_back(oracle::raw(v));
      if (k == 0) d.posts.push_back(fx::post("p", "a", fx::at(0), v));
      else {
        d.replies.push_back(fx::reply("r" + std::to_string(k), parent, "a", fx::at(k), v));
        parent = "r" + std::to_string(k);
      }
    }
    const auto c = extract_chains(fx::finish(d)).at(0);
    track("ccs", chain_coherence(c), oracle::ccs(raw));
    track("icsd", chain_style_diversity(c), oracle::icsd(raw));

    const auto s = random_social(rng);
    // Edge weights.
    const auto g = build_interaction_graph(s);
    for (const auto& a : s.agents)
      for (const auto& b : s.agents)
        if (a.agent_id != b.agent_id) track("edge_weight", g.weight(a.agent_id, b.agent_id), oracle::edge_weight(s, a.agent_id, b.agent_id));
    // H.
    AnalysisOptions o;
    o.permutations = 10;
    o.degree_null_graphs = 0;
    const auto h = e2_homophily(s, o).get("H");
    const auto hw = oracle::homophily(s);
    if (h.has_value() != hw.has_value()) track("h", 1.0, 0.0);
    else if (h) track("h", *h, *hw);
    // VDS.
    const auto want_vds = oracle::vds(s);
    const auto got_vds = distinctiveness_observations(s);
    if (got_vds.size() != want_vds.size()) track("vds", 1.0, 0.0);
    for (const auto& ob : got_vds) track("vds", ob.vds, want_vds.count(ob.agent) ? want_vds.at(ob.agent) : 1e9);
    // VCI: neighbor pull against the oracle, and VCI = neighbor - random.
    for (const auto& ob : vci_observations(s, 1, 1, derive_seed(7, static_cast<std::uint64_t>(i)))) {
      const auto want = oracle::vci_neighbor_cosine(s, ob.agent, ob.window, 1, 1);
      track("vci", ob.neighbor_cosine, want.value_or(1e9));
      track("vci_identity", ob.vci(), ob.neighbor_cosine - ob.random_cosine);
    }
    // R0 on a random theme timeline.
    Theme t;
    std::vector<std::pair<std::string, std::int64_t>> members;
    const int m = std::uniform_int_distribution<int>(1, kOracleMaxAgents)(rng);
    for (int k = 0; k < m; ++k)
      members.emplace_back("x" + std::to_string(std::uniform_int_distribution<int>(0, 4)(rng)),
                           k == 0 ? 0 : std::uniform_int_distribution<std::int64_t>(1, 120 * 3600)(rng));
    std::sort(members.begin(), members.end(), [](const auto& x, const auto& y) { return x.second < y.second; });
    for (std::size_t k = 0; k < members.size(); ++k)
      t.members.push_back({"m" + std::to_string(k), members[k].first, Timestamp{members[k].second}});
    t.index_author = members[0].first;
    t.t0 = Timestamp{members[0].second};
    for (double sc : {1.0, 3.0})
      for (double w : {24.0, 48.0, 96.0}) track("r0", theme_r0(t, sc, w).r0, oracle::r0(members, sc, w));
  }
  const bool enough = !short_of_minimum();
  std::string counts;
  for (const auto& m : metrics) counts += m + "=" + std::to_string(checks[m]) + " ";
  return {enough && worst <= kOracleTolerance, fmt("max |diff| %.2e; comparisons %s", worst, counts.c_str())};
}

Outcome criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  // (a) Permutation p-values under a true null.
  Rng rng(2003);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> ps;
  for (int r = 0; r < kKsReplications; ++r) {
    std::vector<double> a(20), b(20);
    for (double& x : a) x = g(rng);
    for (double& x : b) x = g(rng);
    ps.push_back(permutation_test_mean_difference(a, b, 999, derive_seed(3, static_cast<std::uint64_t>(r))).p_value);
  }
  std::sort(ps.begin(), ps.end());
  double ks = 0.0;
  const double n = static_cast<double>(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i)
    ks = std::max({ks, (static_cast<double>(i) + 1) / n - ps[i], ps[i] - static_cast<double>(i) / n});
  // (b) BCa coverage.
  int covered = 0;
  for (int t = 0; t < kCoverageTrials; ++t) {
    std::vector<double> x(30);
    for (double& v : x) v = g(rng);
    const auto ci = bootstrap_bca_mean_ci(x, 2000, 0.95, derive_seed(4, static_cast<std::uint64_t>(t)));
    if (ci.low <= 0.0 && 0.0 <= ci.high) ++covered;
  }
  // (c) BH example.
  const std::vector<double> bh{0.01, 0.02, 0.03, 0.5};
  const auto mask = bh_fdr(bh, 0.05);
  const auto rejected = std::count(mask.begin(), mask.end(), true);
  // (d) AUC antisymmetry.
  bool antisymmetric = true;
  std::uniform_int_distribution<int> tie(0, 5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> pos(1 + t % 13), neg(1 + t % 7);
    for (double& v : pos) v = tie(rng);
    for (double& v : neg) v = tie(rng);
    if (auc(pos, neg) + auc(neg, pos) != 1.0) antisymmetric = false;
  }
  const double s = seconds_since(t0);
  const bool pass = ks < kKsMax && covered >= kCoverageMin && covered <= kCoverageMax && rejected == 3 && antisymmetric &&
                    s < kCalibrationSeconds;
  return {pass, fmt("KS %.3f, BCa coverage %d/%d, BH rejections %d, AUC antisymmetric %s, %.1fs", ks, covered,
                    kCoverageTrials, static_cast<int>(rejected), antisymmetric ? "yes" : "no", s)};
}

Outcome criterion4() {
  std::vector<std::string> names;
  for (int i = 0; i < 20; ++i) names.push_back("n" + std::to_string(i));
  UndirectedGraph g(names);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = i + 1; j < 10; ++j) g.add_edge(c * 10 + i, c * 10 + j);
  g.add_edge(0, 10);
  Partition truth;
  for (std::size_t i = 0; i < 20; ++i) truth[names[i]] = i < 10 ? 0 : 1;
  const double score = nmi(louvain_partition(g), truth);

  int hits = 0;
  for (int t = 0; t < kSilhouetteTrials; ++t) {
    Rng rng(static_cast<std::uint64_t>(5000 + t));
    std::normal_distribution<double> noise(0.0, 0.5);
    PointSet pts;
    const double centers[3][3] = {{0, 0, 0}, {10, 0, 0}, {0, 10, 0}};
    for (const auto& c : centers)
      for (int i = 0; i < 30; ++i) pts.push_back({c[0] + noise(rng), c[1] + noise(rng), c[2] + noise(rng)});
    if (select_k_by_silhouette(pts, 2, 8, static_cast<std::uint64_t>(t)).k == 3) ++hits;
  }
  return {score == 1.0 && hits >= kSilhouetteMinHits, fmt("Louvain NMI %.3f, silhouette k=3 in %d/%d", score, hits, kSilhouetteTrials)};
}

Outcome criterion5() {
  bool pass = true;
  std::string detail;
  for (int s = 1; s <= kReferenceSeeds; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = e3_style_drift(reference_dataset(static_cast<std::uint64_t>(s)), options_for(static_cast<std::uint64_t>(s)));
    const double secs = seconds_since(t0);
    const auto m = r.get("mean_vci"), lo = r.get("ci_low"), hi = r.get("ci_high");
    const bool ok = m && lo && hi && std::abs(*m) < kNullVciBound && *lo <= 0.0 && 0.0 <= *hi && secs < kSeedSeconds;
    pass = pass && ok;
    detail += fmt("seed %d VCI %+.4f [%+.4f, %+.4f]%s; ", s, m.value_or(NAN), lo.value_or(NAN), hi.value_or(NAN), ok ? "" : " (fail)");
  }
  return {pass, detail};
}

Outcome criterion6() {
  int hits = 0;
  std::string detail;
  for (int s = 1; s <= kReferenceSeeds; ++s) {
    auto cfg = load_sim_config(config_path("reference.json"));
    cfg.seed = static_cast<std::uint64_t>(s);
    cfg.style.drift_lambda = kDriftLambda;
    const auto d = run_simulation(cfg).dataset;
    const auto r = e3_style_drift(d, options_for(cfg.seed));
    const auto m = r.get("mean_vci");
    const auto p = r.p("vci_sign_flip");
    const bool ok = m && p && *m > kDriftVciMin && *p < kDriftP;
    hits += ok;
    detail += fmt("seed %d VCI %.4f p %.4g; ", s, m.value_or(NAN), p.value_or(NAN));
  }
  return {hits >= kDriftMinSeeds, fmt("%d/%d seeds; ", hits, kReferenceSeeds) + detail};
}

Outcome criterion7() {
  auto cfg = load_sim_config(config_path("reference.json"));
  cfg.homophily_beta = kPlantedBeta;
  const auto planted = e2_homophily(run_simulation(cfg).dataset, options_for(cfg.seed));
  const auto h3 = planted.get("H");
  const auto p3 = planted.p("h_degree_preserving");
  const auto h0 = e2_homophily(reference_dataset(cfg.seed), options_for(cfg.seed)).get("H");
  const bool pass = h3 && p3 && *h3 > kPlantedHMin && *p3 < kPlantedP && h0 && *h0 >= kNullHLow && *h0 <= kNullHHigh;
  return {pass, fmt("beta=3: H %.3f, degree-preserving p %.4g; beta=0: H %.3f", h3.value_or(NAN), p3.value_or(NAN),
                    h0.value_or(NAN))};
}

Outcome criterion8() {
  const auto& d = reference_dataset(1);
  const auto e1 = e1_chains(d, options_for(1));
  const auto e8 = e8_style_diversity(d, options_for(1));
  const auto delta = e1.get("delta_ccs");
  const auto pd = e1.p("delta_ccs_permutation");
  const auto within = e8.get("within_agent_spread"), icsd = e8.get("mean_icsd"), random = e8.get("random_baseline");
  const auto p_wc = e8.p("within_vs_chain_welch"), p_cr = e8.p("chain_vs_random_welch");
  const auto r = e8.get("ccs_icsd_r");
  const bool pass = delta && pd && *delta > 0 && *pd < kChainP && within && icsd && random && *within < *icsd &&
                    *icsd < *random && p_wc && p_cr && *p_wc < kChainP && *p_cr < kChainP && r && *r <= kCcsIcsdRMax;
  return {pass, fmt("chains %.0f, dCCS %.4f (p %.4g); within %.3f < ICSD %.3f < random %.3f (p %.3g, %.3g); r %.3f",
                    e1.get("chain_count").value_or(NAN), delta.value_or(NAN), pd.value_or(NAN), within.value_or(NAN),
                    icsd.value_or(NAN), random.value_or(NAN), p_wc.value_or(NAN), p_cr.value_or(NAN), r.value_or(NAN))};
}

Outcome criterion9() {
  // Index post at t0 by "origin"; adopters at +10h and +50h; a repeat at +12h.
  Theme t;
  t.members = {{"i", "origin", fx::at(0)}, {"m1", "b", fx::hours(10)}, {"m2", "b", fx::hours(12)}, {"m3", "c", fx::hours(50)}};
  t.index_post = "i";
  t.index_author = "origin";
  t.t0 = fx::at(0);
  const std::map<double, std::size_t> expected{{24, 1}, {48, 1}, {72, 2}, {96, 2}};
  bool fixture = true;
  for (const auto& [w, n] : expected) fixture = fixture && theme_r0(t, 1, w).secondary_adopters.size() == n;

  bool monotone = true, linear = true;
  std::size_t themes = 0;
  for (int s = 1; s <= kReferenceSeeds; ++s) {
    const auto set = detect_themes(reference_dataset(static_cast<std::uint64_t>(s)).posts, static_cast<std::uint64_t>(s));
    themes += set.themes.size();
    const auto grid = sensitivity_grid(set.themes);
    for (const auto& row : grid.fraction)
      for (std::size_t j = 1; j < row.size(); ++j) monotone = monotone && row[j] >= row[j - 1];
    for (const auto& th : set.themes) {
      const double base = theme_r0(th, 1).r0;
      for (double sc : {2.0, 3.0, 4.0, 5.0}) linear = linear && theme_r0(th, sc).r0 == sc * base;
    }
  }
  return {fixture && monotone && linear, fmt("fixture %s, grid monotone over %zu themes %s, r0 linear %s",
                                             fixture ? "exact" : "wrong", themes, monotone ? "yes" : "no",
                                             linear ? "yes" : "no")};
}

Outcome criterion10() {
  const auto base = load_sim_config(config_path("scenario.json"));
  std::map<ReactanceCoupling, int> hits;
  for (auto coupling : {ReactanceCoupling::anchor, ReactanceCoupling::none}) {
    for (int s = 1; s <= kScenarioSeeds; ++s) {
      auto cfg = base;
      cfg.seed = kScenarioSeedBase + static_cast<std::uint64_t>(s);
      cfg.reactance_coupling = coupling;
      const auto out = randomized_adversarial_scenario(cfg, 20, 20, 7);
      if (out.treatment_delta_mu.size() < 2 || out.control_delta_mu.size() < 2) continue;
      const auto w = welch_t(out.treatment_delta_mu, out.control_delta_mu);
      if (mean(out.treatment_delta_mu) < mean(out.control_delta_mu) && w.p_value < kScenarioP) ++hits[coupling];
    }
  }
  const int a = hits[ReactanceCoupling::anchor], n = hits[ReactanceCoupling::none];
  return {a >= kAnchorMinHits && n <= kNoneMaxHits, fmt("anchor %d/%d, none %d/%d", a, kScenarioSeeds, n, kScenarioSeeds)};
}

Outcome criterion11() {
  const auto cfg = load_sim_config(config_path("scale.json"));
  std::vector<std::string> reports;
  std::size_t posts = 0;
  double slowest = 0.0;
  for (int run = 0; run < 2; ++run) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = run_simulation(cfg).dataset;
    posts = d.posts.size();
    const auto opts = options_for(cfg.seed);
    reports.push_back(report_document(run_all(d, opts), opts).dump(2));
    slowest = std::max(slowest, seconds_since(t0));
  }
  return {reports[0] == reports[1] && slowest < kScaleSeconds,
          fmt("%d agents, %zu posts, report bytes %zu, identical %s, slowest run %.1fs", cfg.n_agents, posts,
              reports[0].size(), reports[0] == reports[1] ? "yes" : "no", slowest)};
}

Outcome criterion12() {
  const auto& d = reference_dataset(1);
  const auto opts = options_for(1);
  fx::TempDir first("accept_export"), second("accept_reexport");
  export_dataset(d, first.path());
  const auto loaded = ingest_dataset(first.path());
  const auto a = report_document(run_all(loaded, opts), opts).dump(2);
  export_dataset(loaded, second.path());
  const auto b = report_document(run_all(ingest_dataset(second.path()), opts), opts).dump(2);
  const auto direct = report_document(run_all(d, opts), opts).dump(2);
  return {a == b && a == direct && loaded == d,
          fmt("dataset round trip %s, re-analysis identical %s, matches in-memory analysis %s",
              loaded == d ? "equal" : "differs", a == b ? "yes" : "no", a == direct ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"chain extraction matches exhaustive enumeration", criterion1},
      {"metrics match brute-force oracles", criterion2},
      {"statistical calibration", criterion3},
      {"community and clustering oracles", criterion4},
      {"sovereign null gives VCI near zero", criterion5},
      {"planted drift is recovered", criterion6},
      {"planted homophily is recovered", criterion7},
      {"chain coherence and diversity ordering", criterion8},
      {"cascade mechanics", criterion9},
      {"randomized adversarial scenario", criterion10},
      {"end-to-end determinism at scale", criterion11},
      {"export fidelity", criterion12},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] criterion %zu: %s (%s) [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
