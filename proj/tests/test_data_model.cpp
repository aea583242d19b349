#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"

using namespace vissoc;
using fx::vec;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

void touch_all(const std::filesystem::path& dir) {
  for (const char* f : {kAgentsFile, kPostsFile, kRepliesFile, kInteractionsFile}) write_file(dir / f, "");
}

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

Dataset small_valid() {
  Dataset d;
  d.agents = {fx::agent("a"), fx::agent("b"), fx::agent("c")};
  d.agents[0].following_ids = {"b"};
  d.agents[1].follower_ids = {"a"};
  d.posts.push_back(fx::post("p1", "a", fx::at(60), vec({1, 0, 0}), 1, 1));
  d.posts.back().caption_embedding = vec({0, 1, 0});
  d.replies.push_back(fx::reply("r1", "p1", "b", fx::at(120), vec({0.6, 0.8, 0})));
  d.replies.push_back(fx::reply("r2", "r1", "c", fx::at(180)));
  d.interactions.push_back(fx::interaction("b", "a", InteractionKind::like, fx::at(130), "p1"));
  d.interactions.push_back(fx::interaction("b", "a", InteractionKind::comment, fx::at(120), "p1"));
  d.interactions.push_back(fx::interaction("a", "b", InteractionKind::follow, fx::at(200)));
  d.interactions.back().human = false;
  return fx::finish(std::move(d));
}

}  // namespace

TEST(Ingest, EmptyFilesGiveEmptyDatasetWithDefaultDim) {
  fx::TempDir dir("empty");
  touch_all(dir.path());
  const auto d = ingest_dataset(dir.path());
  EXPECT_TRUE(d.agents.empty());
  EXPECT_TRUE(d.posts.empty());
  EXPECT_EQ(d.embedding_dim, kDefaultEmbeddingDim);
}

TEST(Ingest, SinglePostSetsEmbeddingDim) {
  fx::TempDir dir("one");
  touch_all(dir.path());
  write_file(dir.path() / kAgentsFile,
             R"({"agent_id":"a","persona_text":"x","created_at":"2025-01-01T00:00:00Z","follower_ids":[],"following_ids":[]})"
             "\n");
  write_file(dir.path() / kPostsFile,
             R"({"post_id":"p","author":"a","created_at":"2025-01-01T01:00:00Z","caption":"c","image_embedding":[1,0,0,0],"like_count":0,"comment_count":0})"
             "\n");
  const auto d = ingest_dataset(dir.path());
  EXPECT_EQ(d.embedding_dim, 4);
  ASSERT_EQ(d.posts.size(), 1u);
  EXPECT_EQ(d.dataset_epoch, parse_timestamp("2025-01-01T00:00:00Z"));
}

TEST(Ingest, DanglingParentNamesTheId) {
  fx::TempDir dir("dangling");
  auto d = small_valid();
  d.replies[1].parent = "ghost";
  export_dataset(d, dir.path());
  try {
    ingest_dataset(dir.path());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos) << e.what();
  }
}

TEST(Ingest, MalformedLineReportsFileAndLine) {
  fx::TempDir dir("malformed");
  export_dataset(small_valid(), dir.path());
  std::ofstream(dir.path() / kRepliesFile, std::ios::app) << "{not json\n";
  try {
    ingest_dataset(dir.path());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("replies.jsonl:3"), std::string::npos) << e.what();
  }
}

TEST(Ingest, UnknownInteractionKindRejected) {
  fx::TempDir dir("kind");
  export_dataset(small_valid(), dir.path());
  write_file(dir.path() / kInteractionsFile,
             R"({"source":"a","target":"b","kind":"poke","created_at":"2025-01-01T00:10:00Z"})"
             "\n");
  EXPECT_THROW(ingest_dataset(dir.path()), Error);
}

TEST(Ingest, DimensionMismatchRejected) {
  fx::TempDir dir("dim");
  auto d = small_valid();
  d.replies[0].image_embedding = vec({1, 0});
  export_dataset(d, dir.path());
  EXPECT_THROW(ingest_dataset(dir.path()), Error);
}

TEST(Ingest, LineOrderDoesNotMatter) {
  fx::TempDir a("order_a"), b("order_b");
  const auto d = small_valid();
  export_dataset(d, a.path());
  export_dataset(d, b.path());
  std::vector<std::string> lines;
  {
    std::ifstream in(b.path() / kInteractionsFile);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  std::reverse(lines.begin(), lines.end());
  std::ofstream out(b.path() / kInteractionsFile, std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';
  out.close();
  EXPECT_EQ(ingest_dataset(a.path()), ingest_dataset(b.path()));
}

TEST(Export, RoundTripIsFieldEqual) {
  fx::TempDir dir("roundtrip");
  const auto d = small_valid();
  export_dataset(d, dir.path());
  EXPECT_EQ(ingest_dataset(dir.path()), d);
}

TEST(Export, RoundTripOfSimulatedDataset) {
  SimConfig cfg;
  cfg.n_agents = 3;
  cfg.duration_minutes = 2 * 24 * 60;
  cfg.seed = 17;
  const auto sim = run_simulation(cfg);
  ASSERT_FALSE(sim.dataset.posts.empty());
  fx::TempDir dir("sim_roundtrip");
  export_dataset(sim.dataset, dir.path());
  EXPECT_EQ(ingest_dataset(dir.path()), sim.dataset);
}

TEST(Export, EmptyDatasetWritesEmptyFiles) {
  fx::TempDir dir("empty_export");
  export_dataset(Dataset{}, dir.path());
  for (const char* f : {kAgentsFile, kPostsFile, kRepliesFile, kInteractionsFile})
    EXPECT_EQ(std::filesystem::file_size(dir.path() / f), 0u) << f;
}

TEST(Export, UnwritablePathFails) {
  fx::TempDir dir("blocked");
  write_file(dir.path() / "file", "x");
  EXPECT_THROW(export_dataset(small_valid(), dir.path() / "file" / "sub"), Error);
}

TEST(Validate, ValidDatasetHasNoViolations) { EXPECT_TRUE(validate_dataset(small_valid()).empty()); }

TEST(Validate, ReplyBeforeParentCitesBothTimestamps) {
  auto d = small_valid();
  d.replies[0].created_at = fx::at(30);
  const auto v = validate_dataset(d);
  ASSERT_TRUE(has_code(v, "time_order"));
  const auto it = std::find_if(v.begin(), v.end(), [](const Violation& x) { return x.code == "time_order"; });
  EXPECT_NE(it->message.find(format_timestamp(fx::at(30))), std::string::npos) << it->message;
  EXPECT_NE(it->message.find(format_timestamp(fx::at(60))), std::string::npos) << it->message;
}

TEST(Validate, SelfFollowFlagged) {
  auto d = small_valid();
  d.interactions.push_back(fx::interaction("a", "a", InteractionKind::follow, fx::at(300)));
  EXPECT_TRUE(has_code(validate_dataset(d), "self_follow"));
}

TEST(Validate, OtherInvariants) {
  {
    auto d = small_valid();
    d.posts.push_back(d.posts[0]);
    EXPECT_TRUE(has_code(validate_dataset(d), "duplicate_id"));
  }
  {
    auto d = small_valid();
    d.posts[0].like_count = -1;
    EXPECT_TRUE(has_code(validate_dataset(d), "negative_count"));
  }
  {
    auto d = small_valid();
    d.posts[0].author = "nobody";
    EXPECT_TRUE(has_code(validate_dataset(d), "dangling_reference"));
  }
  {
    auto d = small_valid();
    d.replies[0].parent = "r2";
    EXPECT_TRUE(has_code(validate_dataset(d), "cycle"));
  }
}

TEST(DatasetIndex, RootAndAuthorLookup) {
  const auto d = small_valid();
  const DatasetIndex idx(d);
  EXPECT_EQ(idx.content_author("r2").value(), "c");
  EXPECT_EQ(idx.content_author("p1").value(), "a");
  EXPECT_EQ(d.posts[*idx.root_post("r2")].post_id, "p1");
  EXPECT_FALSE(idx.root_post("zzz").has_value());
}
