#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace vissoc;
using fx::vec;

namespace {

AnalysisOptions quick_options() {
  AnalysisOptions o;
  o.permutations = 200;
  o.bootstrap = 500;
  o.ccs_null_resamples = 300;
  o.icsd_null_resamples = 300;
  o.degree_null_graphs = 50;
  return o;
}

// Agents a, b share one style and c, d another; a-b and c-d interact.
Dataset homophily_fixture(StyleVector left, StyleVector right) {
  Dataset d;
  for (const char* a : {"a", "b", "c", "d"}) d.agents.push_back(fx::agent(a));
  d.posts.push_back(fx::post("pa", "a", fx::at(0), left));
  d.posts.push_back(fx::post("pb", "b", fx::at(1), left));
  d.posts.push_back(fx::post("pc", "c", fx::at(2), right));
  d.posts.push_back(fx::post("pd", "d", fx::at(3), right));
  d.interactions.push_back(fx::interaction("a", "b", InteractionKind::like, fx::at(10), "pb"));
  d.interactions.push_back(fx::interaction("d", "c", InteractionKind::follow, fx::at(11)));
  return fx::finish(std::move(d));
}

Dataset small_sim(std::uint64_t seed, int n = 30, int days = 6) {
  SimConfig c;
  c.n_agents = n;
  c.duration_minutes = days * kMinutesPerDay;
  c.seed = seed;
  c.initial_follows = 4;
  c.style.embedding_dim = 12;
  return run_simulation(c).dataset;
}

}  // namespace

TEST(E2Homophily, HandExample) {
  const auto d = homophily_fixture(vec({1, 0}), vec({1, 1}));
  const auto r = e2_homophily(d, quick_options());
  EXPECT_NEAR(r.get("H").value(), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(oracle::homophily(d).value(), std::sqrt(2.0), 1e-12);
  EXPECT_EQ(r.get("connected_pairs").value(), 2.0);
}

TEST(E2Homophily, IdenticalCentroidsGiveUnitH) {
  const auto r = e2_homophily(homophily_fixture(vec({1, 2}), vec({1, 2})), quick_options());
  EXPECT_NEAR(r.get("H").value(), 1.0, 1e-12);
}

TEST(E2Homophily, AbsentWithoutEnoughPairs) {
  auto d = homophily_fixture(vec({1, 0}), vec({1, 1}));
  d.interactions.pop_back();
  const auto r = e2_homophily(d, quick_options());
  EXPECT_FALSE(r.get("H").has_value());
  EXPECT_FALSE(r.notes.empty());
}

TEST(E2Homophily, MatchesBruteForceOnSimulatedData) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto d = small_sim(seed);
    const auto h = e2_homophily(d, quick_options()).get("H");
    const auto o = oracle::homophily(d);
    ASSERT_EQ(h.has_value(), o.has_value());
    if (h) {
      EXPECT_NEAR(*h, *o, 1e-9);
    }
  }
}

TEST(Vci, NeighborCosineOfPerfectImitationIsOne) {
  Dataset d;
  for (const char* a : {"a", "b", "c"}) d.agents.push_back(fx::agent(a));
  const std::int64_t day = kSecondsPerDay;
  d.posts.push_back(fx::post("b0", "b", fx::at(10), vec({1, 0})));
  d.posts.push_back(fx::post("c0", "c", fx::at(20), vec({0, 1})));
  d.posts.push_back(fx::post("a1", "a", fx::at(day + 10), vec({1, 0})));
  d.interactions.push_back(fx::interaction("a", "b", InteractionKind::comment, fx::at(30), "b0"));
  const auto obs = vci_observations(fx::finish(d), 1, 1, 7);
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(obs[0].agent, "a");
  EXPECT_NEAR(obs[0].neighbor_cosine, 1.0, 1e-12);
  EXPECT_TRUE(std::abs(obs[0].random_cosine - 1.0) < 1e-12 || std::abs(obs[0].random_cosine) < 1e-12);
  EXPECT_NEAR(obs[0].vci(), 1.0 - obs[0].random_cosine, 1e-12);
}

TEST(Vci, NeighborPartMatchesBruteForce) {
  const auto d = small_sim(4, 25, 9);
  const auto obs = vci_observations(d, 3, 1, 11);
  ASSERT_GE(obs.size(), 20u);
  for (const auto& ob : obs) {
    const auto want = oracle::vci_neighbor_cosine(d, ob.agent, ob.window, 3, 1);
    ASSERT_TRUE(want.has_value()) << ob.agent << " " << ob.window;
    EXPECT_NEAR(ob.neighbor_cosine, *want, 1e-9);
  }
}

TEST(Vds, ZeroAndOneExamples) {
  Dataset d;
  for (const char* a : {"a", "b", "c"}) d.agents.push_back(fx::agent(a));
  d.posts.push_back(fx::post("pa", "a", fx::at(0), vec({1, 0})));
  d.posts.push_back(fx::post("pb", "b", fx::at(1), vec({1, 0})));
  d.posts.push_back(fx::post("pc", "c", fx::at(2), vec({0, 1})));
  d.interactions.push_back(fx::interaction("b", "a", InteractionKind::like, fx::at(10), "pa"));
  d.interactions.push_back(fx::interaction("a", "c", InteractionKind::like, fx::at(11), "pc"));
  const auto fd = fx::finish(d);
  std::map<std::string, double> got;
  for (const auto& ob : distinctiveness_observations(fd)) got[ob.agent] = ob.vds;
  EXPECT_NEAR(got.at("a"), 0.0, 1e-12);
  EXPECT_NEAR(got.at("c"), 1.0, 1e-12);
  EXPECT_EQ(got.count("b"), 0u);
  const auto want = oracle::vds(fd);
  ASSERT_EQ(want.size(), got.size());
  for (const auto& [a, v] : want) EXPECT_NEAR(got.at(a), v, 1e-12);
}

TEST(E7Distinctiveness, InvertedUWithVertexInsideRange) {
  Dataset d;
  d.agents.push_back(fx::agent("hub"));
  d.posts.push_back(fx::post("h", "hub", fx::at(0), vec({1, 0})));
  const std::vector<double> vds{0.1, 0.2, 0.3, 0.4, 0.5};
  for (std::size_t i = 0; i < vds.size(); ++i) {
    const std::string a = "a" + std::to_string(i);
    d.agents.push_back(fx::agent(a));
    const double c = 1.0 - vds[i];
    const auto likes = static_cast<std::int64_t>(std::lround(100 - 1000 * (vds[i] - 0.3) * (vds[i] - 0.3)));
    d.posts.push_back(fx::post("p" + a, a, fx::at(static_cast<std::int64_t>(i) + 1), vec({c, std::sqrt(1 - c * c)}), likes));
    d.interactions.push_back(fx::interaction("hub", a, InteractionKind::like, fx::at(100), "p" + a));
  }
  const auto r = e7_distinctiveness(fx::finish(d), quick_options());
  EXPECT_NEAR(r.get("beta2").value(), -1000.0, 1e-6);
  EXPECT_NEAR(r.get("vertex").value(), 0.3, 1e-9);
  EXPECT_TRUE(r.extra.at("vertex_inside_observed_range").get<bool>());
}

TEST(E4CrossModal, CriticalCommentCountsOnce) {
  Dataset d;
  d.agents = {fx::agent("a"), fx::agent("b")};
  d.posts.push_back(fx::post("p", "a", fx::at(0), vec({1, 0})));
  auto r = fx::reply("c1", "p", "b", fx::at(60));
  r.text = "so derivative and boring";
  d.replies.push_back(r);
  auto self = fx::reply("c2", "p", "a", fx::at(70));
  self.text = "so derivative and boring";
  d.replies.push_back(self);
  const auto e = adversarial_exposure(fx::finish(d), 1);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e.begin()->first.agent, "a");
  EXPECT_EQ(e.begin()->second, 1u);
}

TEST(RunAll, EmptyDatasetReportsEveryExperiment) {
  Dataset d;
  const auto reports = run_all(d, quick_options());
  ASSERT_EQ(reports.size(), kExperimentIds.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    EXPECT_EQ(reports[i].experiment_id, kExperimentIds[i]);
    EXPECT_FALSE(reports[i].error.has_value()) << reports[i].experiment_id << ": " << *reports[i].error;
  }
}

TEST(RunAll, FilterSelectsExactlyThoseExperiments) {
  const auto ids = parse_experiment_filter("E3, e1,e3");
  EXPECT_EQ(ids, (std::vector<std::string>{"e1", "e3"}));
  const auto reports = run_all(small_sim(2), quick_options(), ids);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[0].experiment_id, "e1");
  EXPECT_EQ(reports[1].experiment_id, "e3");
  EXPECT_EQ(parse_experiment_filter("").size(), kExperimentIds.size());
  try {
    parse_experiment_filter("e1,e9");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("e9"), std::string::npos);
  }
}

TEST(RunAll, ReportBytesAreDeterministic) {
  const auto d = small_sim(6);
  const auto o = quick_options();
  EXPECT_EQ(report_document(run_all(d, o), o).dump(2), report_document(run_all(d, o), o).dump(2));
}

TEST(GlobalFdr, PrimaryAndAllTestPasses) {
  std::vector<ExperimentReport> reports;
  for (double p : {0.001, 0.04, 0.03}) {
    ExperimentReport r("e1");
    TestResult t;
    t.p_value = p;
    r.add_test("main", t);
    TestResult extra;
    extra.p_value = 0.9;
    r.add_test("side", extra);
    r.primary_test = "main";
    reports.push_back(r);
  }
  apply_global_fdr(reports, 0.05);
  EXPECT_NEAR(reports[0].fdr_q_value.value(), 0.003, 1e-12);
  EXPECT_NEAR(reports[1].fdr_q_value.value(), 0.04, 1e-12);
  EXPECT_NEAR(reports[2].fdr_q_value.value(), 0.04, 1e-12);
  for (const auto& r : reports) {
    EXPECT_TRUE(r.fdr_rejected);
    EXPECT_FALSE(r.test("side")->fdr_rejected);
  }
  // Across all six tests only 0.001 clears its BH threshold (0.05 / 6).
  EXPECT_TRUE(reports[0].test("main")->fdr_rejected);
  EXPECT_FALSE(reports[1].test("main")->fdr_rejected);
  EXPECT_FALSE(reports[2].test("main")->fdr_rejected);
}

TEST(ReportTable, TextAndCsvRendering) {
  const auto doc = nlohmann::json::parse(R"({"experiments":[
    {"experiment_id":"e1","phenomenon":"Emergent Visual Galleries","rows":[
      {"metric":"Mean CCS","observed":0.512345,"baseline":0.4,"p_value":0.0002},
      {"metric":"Max depth","observed":7,"baseline":null,"p_value":null}]},
    {"experiment_id":"e3","phenomenon":"Stylistic Inertia","rows":[
      {"metric":"Mean VCI","observed":null,"baseline":0,"p_value":null}]}]})");
  const auto rows = flatten_report(doc);
  ASSERT_EQ(rows.size(), 3u);
  std::ostringstream text;
  write_report_text(rows, text);
  EXPECT_EQ(text.str(),
            "Exp.  Metric     Observed  Baseline  p-value  Phenomenon\n"
            "-----------------------------------------------------------------------\n"
            "E1    Mean CCS     0.5123       0.4   0.0002  Emergent Visual Galleries\n"
            "      Max depth         7         -        -\n"
            "E3    Mean VCI         NA         0        -  Stylistic Inertia\n");
  std::ostringstream csv;
  write_report_csv(rows, csv);
  EXPECT_EQ(csv.str(),
            "experiment,metric,observed,baseline,p_value,phenomenon\n"
            "e1,Mean CCS,0.512345,0.4,0.0002,Emergent Visual Galleries\n"
            "e1,Max depth,7,,,Emergent Visual Galleries\n"
            "e3,Mean VCI,,0,,Stylistic Inertia\n");
  EXPECT_THROW(flatten_report(nlohmann::json::parse(R"({"rows":[]})")), Error);
  EXPECT_THROW(flatten_report(nlohmann::json::parse(R"({"experiments":[{"experiment_id":"e1","rows":[{"metric":"m","observed":"x"}]}]})")),
               Error);
}

TEST(ReportTable, EmptyReportPrintsHeaderOnly) {
  std::ostringstream text;
  write_report_text({}, text);
  EXPECT_EQ(text.str(), "Exp.  Metric  Observed  Baseline  p-value  Phenomenon\n"
                        "-----------------------------------------------------\n");
}

TEST(ReferenceConfig, ProducesEnoughChains) {
  const auto cfg = load_sim_config(std::string(VISSOC_CONFIG_DIR) + "/reference.json");
  const auto d = run_simulation(cfg).dataset;
  EXPECT_GE(extract_chains(d, 2).size(), 100u);
}
