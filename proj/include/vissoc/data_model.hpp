#pragma once

// Canonical dataset representation with JSONL ingestion, export and validation.
//
// Files: agents.jsonl, posts.jsonl, replies.jsonl, interactions.jsonl, plus an
// optional meta.json carrying embedding_dim and dataset_epoch.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "vissoc/core.hpp"
#include "vissoc/style_vector.hpp"

namespace vissoc {

struct AgentRecord {
  std::string agent_id;
  std::string persona_text;
  Timestamp created_at;
  std::vector<std::string> follower_ids;   // sorted, unique
  std::vector<std::string> following_ids;  // sorted, unique

  friend bool operator==(const AgentRecord&, const AgentRecord&) = default;
};

struct PostNode {
  std::string post_id;
  std::string author;
  Timestamp created_at;
  std::string caption;
  StyleVector image_embedding;
  std::optional<StyleVector> caption_embedding;
  std::int64_t like_count = 0;
  std::int64_t comment_count = 0;

  [[nodiscard]] std::int64_t engagement() const { return like_count + comment_count; }
  friend bool operator==(const PostNode&, const PostNode&) = default;
};

struct ReplyNode {
  std::string reply_id;
  std::string parent;  // post_id or reply_id
  std::string author;
  Timestamp created_at;
  std::string text;
  std::optional<StyleVector> image_embedding;  // present iff image-bearing

  [[nodiscard]] bool has_image() const { return image_embedding.has_value(); }
  friend bool operator==(const ReplyNode&, const ReplyNode&) = default;
};

enum class InteractionKind { like, comment, follow };

inline std::string_view to_string(InteractionKind k) {
  switch (k) {
    case InteractionKind::like: return "like";
    case InteractionKind::comment: return "comment";
    case InteractionKind::follow: return "follow";
  }
  return "?";
}

inline InteractionKind parse_interaction_kind(std::string_view s) {
  if (s == "like") return InteractionKind::like;
  if (s == "comment") return InteractionKind::comment;
  if (s == "follow") return InteractionKind::follow;
  throw Error("unknown interaction kind '" + std::string(s) + "'");
}

struct InteractionEvent {
  std::string source;
  std::string target;
  InteractionKind kind = InteractionKind::like;
  Timestamp created_at;
  std::optional<std::string> object;
  std::optional<bool> human;  // accepted on likes; ignored by analyses unless asked

  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

constexpr int kDefaultEmbeddingDim = 64;

struct Dataset {
  std::vector<AgentRecord> agents;
  std::vector<PostNode> posts;
  std::vector<ReplyNode> replies;
  std::vector<InteractionEvent> interactions;
  Timestamp dataset_epoch;
  int embedding_dim = kDefaultEmbeddingDim;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// Canonical ordering. Ingestion sorts every collection so line order in the
// input files never matters.

inline void canonicalize(Dataset& d) {
  for (auto& a : d.agents) {
    for (auto* ids : {&a.follower_ids, &a.following_ids}) {
      std::sort(ids->begin(), ids->end());
      ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
    }
  }
  std::sort(d.agents.begin(), d.agents.end(),
            [](const AgentRecord& x, const AgentRecord& y) { return x.agent_id < y.agent_id; });
  std::sort(d.posts.begin(), d.posts.end(), [](const PostNode& x, const PostNode& y) {
    return std::tie(x.created_at, x.post_id) < std::tie(y.created_at, y.post_id);
  });
  std::sort(d.replies.begin(), d.replies.end(), [](const ReplyNode& x, const ReplyNode& y) {
    return std::tie(x.created_at, x.reply_id) < std::tie(y.created_at, y.reply_id);
  });
  auto key = [](const InteractionEvent& e) {
    return std::make_tuple(e.created_at, std::cref(e.source), std::cref(e.target), static_cast<int>(e.kind),
                           e.object.value_or(std::string()), e.object.has_value(), e.human.has_value(),
                           e.human.value_or(false));
  };
  std::stable_sort(d.interactions.begin(), d.interactions.end(),
                   [&](const InteractionEvent& x, const InteractionEvent& y) { return key(x) < key(y); });
}

// Minimum created_at over all entities; the origin for every time window.
inline std::optional<Timestamp> earliest_timestamp(const Dataset& d) {
  std::optional<Timestamp> t;
  auto see = [&](Timestamp x) {
    if (!t || x < *t) t = x;
  };
  for (const auto& a : d.agents) see(a.created_at);
  for (const auto& p : d.posts) see(p.created_at);
  for (const auto& r : d.replies) see(r.created_at);
  for (const auto& e : d.interactions) see(e.created_at);
  return t;
}

// ---------------------------------------------------------------------------
// Validation. Violations are data: the checker never throws or mutates.

struct Violation {
  std::string code;
  std::string message;
};

inline std::vector<Violation> validate_dataset(const Dataset& d) {
  std::vector<Violation> out;
  auto add = [&](std::string code, std::string msg) { out.push_back({std::move(code), std::move(msg)}); };

  std::unordered_map<std::string, Timestamp> agent_time;
  for (const auto& a : d.agents) {
    if (!agent_time.emplace(a.agent_id, a.created_at).second) add("duplicate_id", "duplicate agent_id " + a.agent_id);
    if (std::binary_search(a.following_ids.begin(), a.following_ids.end(), a.agent_id) ||
        std::binary_search(a.follower_ids.begin(), a.follower_ids.end(), a.agent_id))
      add("self_follow", "agent " + a.agent_id + " follows itself");
  }
  for (const auto& a : d.agents) {
    for (const auto* ids : {&a.follower_ids, &a.following_ids})
      for (const auto& id : *ids)
        if (!agent_time.count(id)) add("dangling_reference", "agent " + a.agent_id + " references unknown agent " + id);
  }

  auto check_embedding = [&](const StyleVector& v, const std::string& owner) {
    if (static_cast<int>(v.dim()) != d.embedding_dim)
      add("dimension_mismatch", owner + " embedding has dim " + std::to_string(v.dim()) + ", expected " +
                                    std::to_string(d.embedding_dim));
    else if (std::abs(norm(v.values()) - 1.0) > kUnitNormTolerance)
      add("non_unit_embedding", owner + " embedding is not unit-norm");
  };

  std::unordered_map<std::string, Timestamp> content_time;
  std::unordered_map<std::string, const ReplyNode*> reply_by_id;
  for (const auto& p : d.posts) {
    if (!content_time.emplace(p.post_id, p.created_at).second) add("duplicate_id", "duplicate content id " + p.post_id);
    auto it = agent_time.find(p.author);
    if (it == agent_time.end())
      add("dangling_reference", "post " + p.post_id + " has unknown author " + p.author);
    else if (p.created_at < it->second)
      add("time_order", "post " + p.post_id + " (" + format_timestamp(p.created_at) + ") predates its author (" +
                            format_timestamp(it->second) + ")");
    if (p.image_embedding.empty())
      add("missing_embedding", "post " + p.post_id + " has no image embedding");
    else
      check_embedding(p.image_embedding, "post " + p.post_id);
    if (p.caption_embedding) check_embedding(*p.caption_embedding, "post " + p.post_id + " caption");
    if (p.like_count < 0 || p.comment_count < 0) add("negative_count", "post " + p.post_id + " has a negative count");
  }
  for (const auto& r : d.replies) {
    if (!content_time.emplace(r.reply_id, r.created_at).second)
      add("duplicate_id", "duplicate content id " + r.reply_id);
    reply_by_id.emplace(r.reply_id, &r);
    if (!agent_time.count(r.author)) add("dangling_reference", "reply " + r.reply_id + " has unknown author " + r.author);
    if (r.image_embedding) check_embedding(*r.image_embedding, "reply " + r.reply_id);
  }
  for (const auto& r : d.replies) {
    auto it = content_time.find(r.parent);
    if (it == content_time.end()) {
      add("dangling_reference", "reply " + r.reply_id + " has unknown parent " + r.parent);
    } else if (!(r.created_at > it->second)) {
      add("time_order", "reply " + r.reply_id + " (" + format_timestamp(r.created_at) +
                            ") is not later than its parent " + r.parent + " (" + format_timestamp(it->second) + ")");
    }
  }
  // Parent links must form a forest rooted at posts.
  {
    std::unordered_map<std::string, int> state;  // 1 = on stack, 2 = done
    for (const auto& r : d.replies) {
      std::vector<std::string> path;
      std::string cur = r.reply_id;
      bool cyclic = false;
      while (true) {
        auto st = state.find(cur);
        if (st != state.end()) {
          cyclic = st->second == 1;
          break;
        }
        auto rit = reply_by_id.find(cur);
        if (rit == reply_by_id.end()) break;  // reached a post or a dangling id
        state[cur] = 1;
        path.push_back(cur);
        cur = rit->second->parent;
      }
      for (const auto& id : path) state[id] = 2;
      if (cyclic) add("cycle", "reply parent links contain a cycle through " + cur);
    }
  }
  for (const auto& e : d.interactions) {
    if (!agent_time.count(e.source)) add("dangling_reference", "interaction has unknown source " + e.source);
    if (!agent_time.count(e.target)) add("dangling_reference", "interaction has unknown target " + e.target);
    if (e.kind == InteractionKind::follow && e.source == e.target)
      add("self_follow", "follow interaction from " + e.source + " to itself");
    if (e.object && !content_time.count(*e.object))
      add("dangling_reference", "interaction references unknown object " + *e.object);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSONL encoding.

using ojson = nlohmann::ordered_json;

namespace detail {

inline ojson vector_json(const StyleVector& v) {
  ojson a = ojson::array();
  for (double x : v.values()) a.push_back(x);
  return a;
}

inline ojson to_json(const AgentRecord& a) {
  return ojson{{"agent_id", a.agent_id},
               {"persona_text", a.persona_text},
               {"created_at", format_timestamp(a.created_at)},
               {"follower_ids", a.follower_ids},
               {"following_ids", a.following_ids}};
}

inline ojson to_json(const PostNode& p) {
  ojson j{{"post_id", p.post_id},
          {"author", p.author},
          {"created_at", format_timestamp(p.created_at)},
          {"caption", p.caption},
          {"image_embedding", vector_json(p.image_embedding)}};
  if (p.caption_embedding) j["caption_embedding"] = vector_json(*p.caption_embedding);
  j["like_count"] = p.like_count;
  j["comment_count"] = p.comment_count;
  return j;
}

inline ojson to_json(const ReplyNode& r) {
  ojson j{{"reply_id", r.reply_id},
          {"parent", r.parent},
          {"author", r.author},
          {"created_at", format_timestamp(r.created_at)},
          {"text", r.text}};
  if (r.image_embedding) j["image_embedding"] = vector_json(*r.image_embedding);
  return j;
}

inline ojson to_json(const InteractionEvent& e) {
  ojson j{{"source", e.source},
          {"target", e.target},
          {"kind", std::string(to_string(e.kind))},
          {"created_at", format_timestamp(e.created_at)}};
  if (e.object) j["object"] = *e.object;
  if (e.human) j["human"] = *e.human;
  return j;
}

struct LineContext {
  std::string file;
  std::size_t line = 0;
  [[nodiscard]] std::string where() const { return file + ":" + std::to_string(line); }
};

template <typename T>
T field(const nlohmann::json& j, const char* name, const LineContext& ctx) {
  auto it = j.find(name);
  if (it == j.end()) throw Error(ctx.where() + ": missing field '" + name + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ctx.where() + ": field '" + name + "' has the wrong type");
  }
}

inline Timestamp time_field(const nlohmann::json& j, const char* name, const LineContext& ctx) {
  try {
    return parse_timestamp(field<std::string>(j, name, ctx));
  } catch (const Error& e) {
    if (std::string_view(e.what()).starts_with(ctx.where())) throw;
    throw Error(ctx.where() + ": " + e.what());
  }
}

// Unit within 1e-6 is taken verbatim; within 1e-3 it is renormalized with a
// warning; anything farther is an error.
inline StyleVector embedding_field(const nlohmann::json& j, const char* name, const LineContext& ctx) {
  auto raw = field<std::vector<double>>(j, name, ctx);
  if (raw.empty()) throw Error(ctx.where() + ": field '" + std::string(name) + "' is an empty embedding");
  const double n = norm(raw);
  if (std::abs(n - 1.0) <= kUnitNormTolerance) return StyleVector::from_unit(std::move(raw));
  if (std::abs(n - 1.0) <= 1e-3) {
    warn(ctx.where() + ": renormalized '" + name + "' (norm " + std::to_string(n) + ")");
    return StyleVector::normalized(std::move(raw));
  }
  throw Error(ctx.where() + ": '" + std::string(name) + "' has norm " + std::to_string(n) +
              ", beyond the 1e-3 unit tolerance");
}

inline AgentRecord agent_from_json(const nlohmann::json& j, const LineContext& ctx) {
  AgentRecord a;
  a.agent_id = field<std::string>(j, "agent_id", ctx);
  a.persona_text = j.contains("persona_text") ? field<std::string>(j, "persona_text", ctx) : std::string();
  a.created_at = time_field(j, "created_at", ctx);
  if (j.contains("follower_ids")) a.follower_ids = field<std::vector<std::string>>(j, "follower_ids", ctx);
  if (j.contains("following_ids")) a.following_ids = field<std::vector<std::string>>(j, "following_ids", ctx);
  return a;
}

inline PostNode post_from_json(const nlohmann::json& j, const LineContext& ctx) {
  PostNode p;
  p.post_id = field<std::string>(j, "post_id", ctx);
  p.author = field<std::string>(j, "author", ctx);
  p.created_at = time_field(j, "created_at", ctx);
  p.caption = j.contains("caption") ? field<std::string>(j, "caption", ctx) : std::string();
  p.image_embedding = embedding_field(j, "image_embedding", ctx);
  if (j.contains("caption_embedding") && !j["caption_embedding"].is_null())
    p.caption_embedding = embedding_field(j, "caption_embedding", ctx);
  p.like_count = j.contains("like_count") ? field<std::int64_t>(j, "like_count", ctx) : 0;
  p.comment_count = j.contains("comment_count") ? field<std::int64_t>(j, "comment_count", ctx) : 0;
  if (p.like_count < 0 || p.comment_count < 0) throw Error(ctx.where() + ": negative engagement count");
  return p;
}

inline ReplyNode reply_from_json(const nlohmann::json& j, const LineContext& ctx) {
  ReplyNode r;
  r.reply_id = field<std::string>(j, "reply_id", ctx);
  r.parent = field<std::string>(j, "parent", ctx);
  r.author = field<std::string>(j, "author", ctx);
  r.created_at = time_field(j, "created_at", ctx);
  r.text = j.contains("text") ? field<std::string>(j, "text", ctx) : std::string();
  if (j.contains("image_embedding") && !j["image_embedding"].is_null())
    r.image_embedding = embedding_field(j, "image_embedding", ctx);
  return r;
}

inline InteractionEvent interaction_from_json(const nlohmann::json& j, const LineContext& ctx) {
  InteractionEvent e;
  e.source = field<std::string>(j, "source", ctx);
  e.target = field<std::string>(j, "target", ctx);
  try {
    e.kind = parse_interaction_kind(field<std::string>(j, "kind", ctx));
  } catch (const Error& err) {
    throw Error(ctx.where() + ": " + err.what());
  }
  e.created_at = time_field(j, "created_at", ctx);
  if (j.contains("object") && !j["object"].is_null()) e.object = field<std::string>(j, "object", ctx);
  if (j.contains("human") && !j["human"].is_null()) e.human = field<bool>(j, "human", ctx);
  return e;
}

template <typename Parse>
void read_jsonl(const std::filesystem::path& path, Parse&& parse) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  LineContext ctx{path.filename().string(), 0};
  std::string line;
  while (std::getline(in, line)) {
    ++ctx.line;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ctx.where() + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw Error(ctx.where() + ": expected a JSON object");
    parse(j, ctx);
  }
}

}  // namespace detail

inline constexpr const char* kAgentsFile = "agents.jsonl";
inline constexpr const char* kPostsFile = "posts.jsonl";
inline constexpr const char* kRepliesFile = "replies.jsonl";
inline constexpr const char* kInteractionsFile = "interactions.jsonl";
inline constexpr const char* kMetaFile = "meta.json";

struct IngestOptions {
  int default_embedding_dim = kDefaultEmbeddingDim;
  // Strict ingestion rejects any invariant violation; lenient ingestion only
  // rejects unparseable input and leaves the rest to validate_dataset.
  bool strict = true;
};

inline Dataset ingest_dataset(const std::filesystem::path& dir, const IngestOptions& opts = {}) {
  Dataset d;
  detail::read_jsonl(dir / kAgentsFile,
                     [&](const nlohmann::json& j, const auto& ctx) { d.agents.push_back(detail::agent_from_json(j, ctx)); });
  detail::read_jsonl(dir / kPostsFile,
                     [&](const nlohmann::json& j, const auto& ctx) { d.posts.push_back(detail::post_from_json(j, ctx)); });
  detail::read_jsonl(dir / kRepliesFile, [&](const nlohmann::json& j, const auto& ctx) {
    d.replies.push_back(detail::reply_from_json(j, ctx));
  });
  detail::read_jsonl(dir / kInteractionsFile, [&](const nlohmann::json& j, const auto& ctx) {
    d.interactions.push_back(detail::interaction_from_json(j, ctx));
  });

  std::optional<int> meta_dim;
  std::optional<Timestamp> meta_epoch;
  if (std::filesystem::exists(dir / kMetaFile)) {
    std::ifstream in(dir / kMetaFile);
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(std::string(kMetaFile) + ": malformed JSON (" + e.what() + ")");
    }
    detail::LineContext ctx{kMetaFile, 1};
    if (meta.contains("embedding_dim")) meta_dim = detail::field<int>(meta, "embedding_dim", ctx);
    if (meta.contains("dataset_epoch") && !meta["dataset_epoch"].is_null())
      meta_epoch = detail::time_field(meta, "dataset_epoch", ctx);
  }

  std::optional<int> seen_dim;
  auto see_dim = [&](const StyleVector& v, const std::string& owner) {
    const int dim = static_cast<int>(v.dim());
    if (!seen_dim) seen_dim = dim;
    if (dim != *seen_dim)
      throw Error("embedding dimension mismatch: " + owner + " has dim " + std::to_string(dim) + ", expected " +
                  std::to_string(*seen_dim));
  };
  for (const auto& p : d.posts) {
    see_dim(p.image_embedding, "post " + p.post_id);
    if (p.caption_embedding) see_dim(*p.caption_embedding, "post " + p.post_id + " caption");
  }
  for (const auto& r : d.replies)
    if (r.image_embedding) see_dim(*r.image_embedding, "reply " + r.reply_id);
  if (seen_dim && meta_dim && *seen_dim != *meta_dim)
    throw Error("embedding dimension mismatch: meta.json says " + std::to_string(*meta_dim) + ", data has " +
                std::to_string(*seen_dim));
  d.embedding_dim = seen_dim.value_or(meta_dim.value_or(opts.default_embedding_dim));

  canonicalize(d);
  const auto earliest = earliest_timestamp(d);
  if (meta_epoch && earliest && *earliest < *meta_epoch)
    throw Error("meta.json dataset_epoch is later than the earliest record");
  d.dataset_epoch = meta_epoch ? *meta_epoch : earliest.value_or(Timestamp{});

  if (opts.strict) {
    const auto violations = validate_dataset(d);
    if (!violations.empty()) {
      std::string msg = "dataset failed validation: " + violations.front().message;
      if (violations.size() > 1) msg += " (and " + std::to_string(violations.size() - 1) + " more)";
      throw Error(msg);
    }
  }
  return d;
}

inline void export_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto write = [&](const char* name, const auto& items) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / name).string());
    for (const auto& item : items) out << detail::to_json(item).dump() << '\n';
    if (!out) throw Error("failed writing " + (dir / name).string());
  };
  write(kAgentsFile, d.agents);
  write(kPostsFile, d.posts);
  write(kRepliesFile, d.replies);
  write(kInteractionsFile, d.interactions);
  std::ofstream meta(dir / kMetaFile, std::ios::binary | std::ios::trunc);
  if (!meta) throw Error("cannot write " + (dir / kMetaFile).string());
  ojson m{{"embedding_dim", d.embedding_dim}, {"dataset_epoch", format_timestamp(d.dataset_epoch)}};
  meta << m.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Lookup tables over an immutable Dataset.

class DatasetIndex {
 public:
  explicit DatasetIndex(const Dataset& d) : d_(&d) {
    for (std::size_t i = 0; i < d.agents.size(); ++i) agent_.emplace(d.agents[i].agent_id, i);
    for (std::size_t i = 0; i < d.posts.size(); ++i) post_.emplace(d.posts[i].post_id, i);
    for (std::size_t i = 0; i < d.replies.size(); ++i) reply_.emplace(d.replies[i].reply_id, i);
  }

  [[nodiscard]] const Dataset& dataset() const { return *d_; }
  [[nodiscard]] std::optional<std::size_t> agent(const std::string& id) const { return find(agent_, id); }
  [[nodiscard]] std::optional<std::size_t> post(const std::string& id) const { return find(post_, id); }
  [[nodiscard]] std::optional<std::size_t> reply(const std::string& id) const { return find(reply_, id); }

  // Author of a post or reply.
  [[nodiscard]] std::optional<std::string> content_author(const std::string& id) const {
    if (auto p = post(id)) return d_->posts[*p].author;
    if (auto r = reply(id)) return d_->replies[*r].author;
    return std::nullopt;
  }

  // Root post of any content id (walks reply parents).
  [[nodiscard]] std::optional<std::size_t> root_post(std::string id) const {
    for (std::size_t guard = 0; guard <= d_->replies.size(); ++guard) {
      if (auto p = post(id)) return p;
      auto r = reply(id);
      if (!r) return std::nullopt;
      id = d_->replies[*r].parent;
    }
    return std::nullopt;
  }

 private:
  static std::optional<std::size_t> find(const std::unordered_map<std::string, std::size_t>& m,
                                         const std::string& id) {
    auto it = m.find(id);
    if (it == m.end()) return std::nullopt;
    return it->second;
  }

  const Dataset* d_;
  std::unordered_map<std::string, std::size_t> agent_, post_, reply_;
};

}  // namespace vissoc
