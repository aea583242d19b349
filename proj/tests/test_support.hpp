#pragma once

#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "vissoc/vissoc.hpp"

namespace vissoc::fx {

inline constexpr std::int64_t kT0 = 1735689600;  // 2025-01-01T00:00:00Z

inline Timestamp at(std::int64_t seconds_after_t0) { return Timestamp{kT0 + seconds_after_t0}; }
inline Timestamp hours(double h) { return at(static_cast<std::int64_t>(h * 3600.0)); }

inline StyleVector vec(std::initializer_list<double> xs) { return StyleVector::normalized(std::vector<double>(xs)); }

inline StyleVector random_unit(int dim, Rng& rng) { return random_unit_vector(dim, rng); }

inline AgentRecord agent(std::string id, Timestamp created = at(0)) {
  AgentRecord a;
  a.agent_id = std::move(id);
  a.persona_text = "persona";
  a.created_at = created;
  return a;
}

inline PostNode post(std::string id, std::string author, Timestamp t, StyleVector v, std::int64_t likes = 0,
                     std::int64_t comments = 0) {
  PostNode p;
  p.post_id = std::move(id);
  p.author = std::move(author);
  p.created_at = t;
  p.caption = "caption";
  p.image_embedding = std::move(v);
  p.like_count = likes;
  p.comment_count = comments;
  return p;
}

inline ReplyNode reply(std::string id, std::string parent, std::string author, Timestamp t,
                       std::optional<StyleVector> image = std::nullopt) {
  ReplyNode r;
  r.reply_id = std::move(id);
  r.parent = std::move(parent);
  r.author = std::move(author);
  r.created_at = t;
  r.text = "nice";
  r.image_embedding = std::move(image);
  return r;
}

inline InteractionEvent interaction(std::string source, std::string target, InteractionKind kind, Timestamp t,
                                    std::optional<std::string> object = std::nullopt) {
  InteractionEvent e;
  e.source = std::move(source);
  e.target = std::move(target);
  e.kind = kind;
  e.created_at = t;
  e.object = std::move(object);
  return e;
}

inline Dataset finish(Dataset d) {
  canonicalize(d);
  if (auto e = earliest_timestamp(d)) d.dataset_epoch = *e;
  for (const auto& p : d.posts) d.embedding_dim = static_cast<int>(p.image_embedding.dim());
  return d;
}

// Random reply forest: each reply hangs off a uniformly chosen earlier node
// and carries an image with probability `image_p`.
inline Dataset random_forest(Rng& rng, int n_posts, int n_replies, double image_p = 0.7, int dim = 6) {
  Dataset d;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int a = 0; a < 4; ++a) d.agents.push_back(agent("a" + std::to_string(a)));
  std::vector<std::string> nodes;
  std::int64_t t = 0;
  for (int i = 0; i < n_posts; ++i) {
    const std::string id = "p" + std::to_string(i);
    d.posts.push_back(post(id, "a" + std::to_string(i % 4), at(t += 60), random_unit(dim, rng)));
    nodes.push_back(id);
  }
  for (int i = 0; i < n_replies; ++i) {
    const std::string id = "r" + std::to_string(i);
    const auto parent = nodes[std::uniform_int_distribution<std::size_t>(0, nodes.size() - 1)(rng)];
    std::optional<StyleVector> img;
    if (u(rng) < image_p) img = random_unit(dim, rng);
    d.replies.push_back(reply(id, parent, "a" + std::to_string((i + 1) % 4), at(t += 60), std::move(img)));
    nodes.push_back(id);
  }
  return finish(std::move(d));
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vissoc_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace vissoc::fx
