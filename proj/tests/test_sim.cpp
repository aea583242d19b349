#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"

using namespace vissoc;
using fx::vec;

namespace {

SimConfig small_config(std::uint64_t seed = 3) {
  SimConfig c;
  c.n_agents = 20;
  c.duration_minutes = 2 * kMinutesPerDay;
  c.seed = seed;
  c.style.embedding_dim = 16;
  return c;
}

}  // namespace

TEST(ComposeFeed, FollowsNobodyGivesOnlyRandomItems) {
  FeedState s(3);
  for (int i = 0; i < 5; ++i) s.add(1, i, false);
  Rng rng(1);
  const auto feed = compose_feed(s, 0, 100, 20, 10, rng);
  EXPECT_EQ(feed, (std::vector<std::size_t>{4, 3, 2, 1, 0}));
  const auto none = compose_feed(s, 0, 100, 20, 0, rng);
  EXPECT_TRUE(none.empty());
}

TEST(ComposeFeed, EmptyCorpusAndFutureItemsAreInvisible) {
  FeedState s(2);
  Rng rng(1);
  EXPECT_TRUE(compose_feed(s, 0, 10, 5, 5, rng).empty());
  s.follow(0, 1);
  s.add(1, 10, false);
  EXPECT_TRUE(compose_feed(s, 0, 10, 5, 5, rng).empty());
  EXPECT_EQ(compose_feed(s, 0, 11, 5, 0, rng), (std::vector<std::size_t>{0}));
}

TEST(ComposeFeed, FollowedItemsNewestFirstWithoutOwnItems) {
  FeedState s(3);
  s.follow(0, 1);
  s.follow(0, 2);
  for (int i = 0; i < 6; ++i) s.add(static_cast<std::size_t>(i % 3), i, false);
  Rng rng(1);
  EXPECT_EQ(compose_feed(s, 0, 100, 3, 0, rng), (std::vector<std::size_t>{5, 4, 2}));
  for (std::size_t i : compose_feed(s, 0, 100, 10, 10, rng)) EXPECT_NE(s.items[i].author, 0u);
}

TEST(ComposeFeed, RandomPartIsUniform) {
  FeedState s(2);
  for (int i = 0; i < 20; ++i) s.add(1, i, false);
  Rng rng(42);
  std::vector<int> hits(20, 0);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k)
    for (std::size_t i : compose_feed(s, 0, 100, 0, 1, rng)) ++hits[i];
  const double expected = draws / 20.0, sd = std::sqrt(draws * (1.0 / 20) * (19.0 / 20));
  for (int h : hits) EXPECT_NEAR(h, expected, 3.5 * sd);
}

TEST(DecideAction, EmptyFeedAllowsOnlyPostAndWait) {
  ActionProbabilities p;
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    const auto a = decide_action(p, false, false, rng);
    EXPECT_TRUE(a == ActionKind::post || a == ActionKind::wait) << to_string(a);
  }
  ActionProbabilities only_like;
  only_like.post = only_like.comment = only_like.visual_reply = only_like.follow = only_like.wait = 0;
  only_like.like = 1;
  EXPECT_EQ(decide_action(only_like, false, true, rng), ActionKind::wait);
  EXPECT_EQ(decide_action(only_like, true, true, rng), ActionKind::like);
}

TEST(FollowTargetProbabilities, UniformAtZeroBetaAndSoftmaxOdds) {
  const auto anchor = vec({1, 0});
  const std::vector<StyleVector> c{vec({1, 0}), vec({-1, 0}), vec({0, 1})};
  for (double p : follow_target_probabilities(anchor, c, 0.0)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
  const std::vector<StyleVector> two{vec({1, 0}), vec({0.1, std::sqrt(1 - 0.01)})};
  const auto p = follow_target_probabilities(anchor, two, 5.0);
  EXPECT_NEAR(p[0] / p[1], std::exp(4.5), 1e-9);
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
}

TEST(DrawIndex, FrequenciesFollowWeights) {
  Rng rng(3);
  std::vector<int> n(3, 0);
  for (int i = 0; i < 30000; ++i) ++n[draw_index({1, 2, 7}, rng)];
  EXPECT_NEAR(n[0] / 30000.0, 0.1, 0.01);
  EXPECT_NEAR(n[2] / 30000.0, 0.7, 0.01);
}

TEST(ActVisualReply, ClosedFormWithoutNoise) {
  SynthStyleConfig cfg;
  cfg.noise_sigma = 0;
  cfg.subject_weight = 0;
  Rng rng(1);
  const auto anchor = vec({0.3, 0.4, 0.5});
  const auto out = act_visual_reply(anchor, vec({0, 0, 1}), cfg, rng);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out[i], anchor[i], 1e-12);
  cfg.style_weight = 0.7;
  cfg.subject_weight = 0.3;
  const auto mix = act_visual_reply(vec({1, 0}), vec({0, 1}), cfg, rng);
  EXPECT_NEAR(mix[0], 0.7 / std::sqrt(0.58), 1e-12);
  EXPECT_NEAR(mix[1], 0.3 / std::sqrt(0.58), 1e-12);
}

TEST(EndOfWindow, AnchorAndSigmaHelpers) {
  const auto a = vec({1, 0});
  StyleCentroid nb;
  nb.components = {0, 1};
  EXPECT_EQ(end_of_window_anchor(a, std::nullopt, 0.5), a);
  EXPECT_EQ(end_of_window_anchor(a, nb, 0.0), a);
  EXPECT_NEAR(end_of_window_anchor(a, nb, 0.5)[1], std::sqrt(0.5), 1e-12);
  EXPECT_DOUBLE_EQ(end_of_window_sigma_scale(true, ReactanceCoupling::anchor, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(end_of_window_sigma_scale(false, ReactanceCoupling::anchor, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(end_of_window_sigma_scale(true, ReactanceCoupling::none, 0.5), 1.0);
}

TEST(Simulation, ZeroDurationGivesAgentsOnly) {
  auto c = small_config();
  c.duration_minutes = 0;
  const auto r = run_simulation(c);
  EXPECT_EQ(r.dataset.agents.size(), 20u);
  EXPECT_TRUE(r.dataset.posts.empty());
  EXPECT_TRUE(r.dataset.replies.empty());
}

TEST(Simulation, DeterministicForSeedAndValid) {
  const auto a = run_simulation(small_config(5));
  const auto b = run_simulation(small_config(5));
  const auto c = run_simulation(small_config(6));
  EXPECT_EQ(a.event_hash, b.event_hash);
  EXPECT_EQ(a.dataset, b.dataset);
  EXPECT_NE(a.event_hash, c.event_hash);
  EXPECT_EQ(a.event_hash, hash_event_log(a.events));
  EXPECT_FALSE(a.dataset.posts.empty());
  EXPECT_TRUE(validate_dataset(a.dataset).empty());
  for (std::size_t i = 1; i < a.events.size(); ++i) EXPECT_LE(a.events[i - 1].time_minutes, a.events[i].time_minutes);
}

TEST(Simulation, NoSelfFollowsAndImageRepliesCarryEmbeddings) {
  const auto r = run_simulation(small_config(8));
  for (const auto& e : r.dataset.interactions) EXPECT_FALSE(e.kind == InteractionKind::follow && e.source == e.target);
  for (const auto& f : r.truth.follows) EXPECT_NE(f.source, f.target);
  for (const auto& rep : r.dataset.replies)
    if (rep.image_embedding) {
      EXPECT_EQ(rep.image_embedding->dim(), 16u);
    }
}

TEST(GroundTruth, RoundTrip) {
  auto c = small_config(11);
  c.n_agents = 12;
  ScenarioConfig s;
  s.n_treatment = 4;
  s.n_control = 4;
  s.n_adversaries = 2;
  s.pre_days = 1;
  s.days = 1;
  c.scenario = s;
  const auto r = run_simulation(c);
  fx::TempDir dir("truth");
  write_ground_truth(r, c, dir.path() / kGroundTruthFile);
  const auto g = read_ground_truth(dir.path() / kGroundTruthFile);
  EXPECT_EQ(g.content_subject, r.truth.content_subject);
  EXPECT_EQ(g.archetype, r.truth.archetype);
  ASSERT_TRUE(g.assignment.has_value());
  EXPECT_EQ(g.assignment->treatment, r.truth.assignment->treatment);
  EXPECT_EQ(g.assignment->control, r.truth.assignment->control);
  EXPECT_EQ(g.assignment->switch_time, r.truth.assignment->switch_time);
  EXPECT_EQ(g.assignment->window_days, c.window_days);
  EXPECT_EQ(g.assignment->treatment.size(), 4u);
}

TEST(SimConfigJson, UnknownKeyNamesThePath) {
  try {
    sim_config_from_json(nlohmann::json::parse(R"({"n_agents": 3, "style": {"noise_sigmaa": 0.1}})"));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("style.noise_sigmaa"), std::string::npos) << e.what();
  }
  EXPECT_THROW(sim_config_from_json(nlohmann::json::parse(R"({"n_agents": -1})")), Error);
}

TEST(SimConfigJson, RoundTripAndShippedConfigsLoad) {
  const auto c = small_config(99);
  const auto back = sim_config_from_json(nlohmann::json::parse(sim_config_to_json(c).dump()));
  EXPECT_EQ(sim_config_to_json(back).dump(), sim_config_to_json(c).dump());
  for (const char* f : {"reference.json", "scenario.json", "scale.json"})
    EXPECT_NO_THROW(load_sim_config(std::string(VISSOC_CONFIG_DIR) + "/" + f)) << f;
}

TEST(Scenario, TooFewAgentsThrows) {
  auto c = small_config();
  c.n_agents = 10;
  EXPECT_THROW(randomized_adversarial_scenario(c, 20, 20, 7), Error);
}

TEST(Scenario, DeltaMuUsesAdjacentExposureWindows) {
  Dataset d;
  d.agents = {fx::agent("a"), fx::agent("b")};
  const std::int64_t day = kSecondsPerDay;
  d.posts.push_back(fx::post("x0", "a", fx::at(-day), vec({-1, 0})));  // before the switch, ignored
  d.posts.push_back(fx::post("x1", "a", fx::at(10), vec({1, 0})));
  d.posts.push_back(fx::post("x2", "a", fx::at(day + 10), vec({0, 1})));
  d.posts.push_back(fx::post("y1", "b", fx::at(10), vec({1, 0})));
  d.posts.push_back(fx::post("y2", "b", fx::at(2 * day + 10), vec({0, 1})));
  ScenarioAssignment a;
  a.switch_time = fx::at(0);
  a.end_time = fx::at(3 * day);
  a.window_days = 1;
  const auto dmu = scenario_delta_mu(fx::finish(d), a);
  EXPECT_NEAR(dmu.at("a"), std::sqrt(2.0), 1e-12);
  EXPECT_EQ(dmu.count("b"), 0u);
}
