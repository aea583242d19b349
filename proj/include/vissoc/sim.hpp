#pragma once

// Discrete-event simulation of an image-posting agent society.
//
// Every agent runs Observe -> Decide -> Act -> Sleep. Wake-ups sit in a
// priority queue ordered by (minute, agent index, sequence number), and the
// whole run draws from one generator, so a config and seed fix the event log.

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "vissoc/core.hpp"
#include "vissoc/data_model.hpp"
#include "vissoc/lexicon.hpp"
#include "vissoc/sim_config.hpp"
#include "vissoc/style_space.hpp"
#include "vissoc/style_vector.hpp"

namespace vissoc {

constexpr std::int64_t kMinutesPerDay = 24 * 60;

// ---------------------------------------------------------------------------
// Feed.

struct FeedItem {
  std::size_t author = 0;
  std::int64_t minute = 0;
  bool is_reply = false;
};

/// Image-bearing content visible to feeds. `items` is in creation order (so
/// minutes are non-decreasing); `by_author[a]` lists a's item indices in the
/// same order and `following[a]` is sorted.
struct FeedState {
  std::vector<FeedItem> items;
  std::vector<std::vector<std::size_t>> by_author;
  std::vector<std::vector<std::size_t>> following;

  explicit FeedState(std::size_t n_agents = 0) : by_author(n_agents), following(n_agents) {}

  std::size_t add(std::size_t author, std::int64_t minute, bool is_reply) {
    items.push_back({author, minute, is_reply});
    by_author[author].push_back(items.size() - 1);
    return items.size() - 1;
  }
  [[nodiscard]] bool follows(std::size_t a, std::size_t b) const {
    return std::binary_search(following[a].begin(), following[a].end(), b);
  }
  void follow(std::size_t a, std::size_t b) {
    auto& f = following[a];
    f.insert(std::lower_bound(f.begin(), f.end(), b), b);
  }
};

/// The `followed_recent` newest items by followed accounts plus up to
/// `random_count` distinct items drawn uniformly from the whole corpus.
/// Only items created strictly before `now` and not authored by `agent` are
/// visible. The result is deduplicated and ordered newest first.
inline std::vector<std::size_t> compose_feed(const FeedState& s, std::size_t agent, std::int64_t now,
                                             int followed_recent, int random_count, Rng& rng) {
  const auto visible_end = static_cast<std::size_t>(
      std::partition_point(s.items.begin(), s.items.end(), [now](const FeedItem& it) { return it.minute < now; }) -
      s.items.begin());
  std::vector<std::size_t> feed;

  // k-way merge from the newest end of each followed author's list.
  std::priority_queue<std::tuple<std::size_t, std::size_t, std::size_t>> heap;  // (item, author, pos)
  for (std::size_t f : s.following[agent]) {
    const auto& list = s.by_author[f];
    auto it = std::lower_bound(list.begin(), list.end(), visible_end);
    if (it == list.begin()) continue;
    const auto pos = static_cast<std::size_t>(it - list.begin()) - 1;
    heap.emplace(list[pos], f, pos);
  }
  while (!heap.empty() && static_cast<int>(feed.size()) < followed_recent) {
    auto [item, f, pos] = heap.top();
    heap.pop();
    feed.push_back(item);
    if (pos > 0) heap.emplace(s.by_author[f][pos - 1], f, pos - 1);
  }

  // Floyd's sampling of distinct indices from [0, visible_end).
  if (random_count > 0 && visible_end > 0) {
    const auto m = std::min<std::size_t>(static_cast<std::size_t>(random_count), visible_end);
    std::set<std::size_t> picked;
    for (std::size_t j = visible_end - m; j < visible_end; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, j);
      const std::size_t t = pick(rng);
      picked.insert(picked.count(t) ? j : t);
    }
    for (std::size_t i : picked)
      if (s.items[i].author != agent) feed.push_back(i);
  }
  std::sort(feed.begin(), feed.end(), std::greater<>());
  feed.erase(std::unique(feed.begin(), feed.end()), feed.end());
  return feed;
}

// ---------------------------------------------------------------------------
// Decisions.

/// Categorical draw over the six actions. Actions that need a target are
/// removed when none exists (comment, visual_reply, like need a nonempty
/// feed; follow needs a candidate) and the remaining weights renormalized.
inline ActionKind decide_action(const ActionProbabilities& p, bool feed_nonempty, bool can_follow, Rng& rng) {
  std::array<double, 6> w{};
  for (std::size_t i = 0; i < kAllActions.size(); ++i) {
    const ActionKind a = kAllActions[i];
    bool ok = true;
    if (a == ActionKind::comment || a == ActionKind::visual_reply || a == ActionKind::like) ok = feed_nonempty;
    if (a == ActionKind::follow) ok = can_follow;
    w[i] = ok ? p.of(a) : 0.0;
  }
  double total = 0.0;
  for (double x : w) total += x;
  if (!(total > 0)) return ActionKind::wait;
  std::uniform_real_distribution<double> u(0.0, total);
  double r = u(rng);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0) continue;
    if (r < w[i]) return kAllActions[i];
    r -= w[i];
  }
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0) return kAllActions[i];
  return ActionKind::wait;
}

/// Softmax weights exp(beta * cos(anchor, candidate)), normalized to sum to 1.
inline std::vector<double> follow_target_probabilities(const StyleVector& anchor,
                                                       const std::vector<StyleVector>& candidates, double beta) {
  std::vector<double> logits(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) logits[i] = beta * unit_cosine(anchor, candidates[i]);
  const double mx = logits.empty() ? 0.0 : *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) total += (l = std::exp(l - mx));
  for (double& l : logits) l /= total;
  return logits;
}

inline std::size_t draw_index(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0)) {
    std::uniform_int_distribution<std::size_t> u(0, weights.size() - 1);
    return u(rng);
  }
  std::uniform_real_distribution<double> u(0.0, total);
  double r = u(rng);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (r < weights[i]) return i;
    r -= weights[i];
  }
  return weights.size() - 1;
}

/// Reply image: the replying agent's own style applied to the target's subject.
inline StyleVector act_visual_reply(const StyleVector& agent_anchor, const StyleVector& target_subject,
                                    const SynthStyleConfig& cfg, Rng& rng, double sigma_scale = 1.0) {
  return synth_embedding(agent_anchor, target_subject, cfg, rng, sigma_scale);
}

/// Anchor after one window: drifted toward the neighborhood centroid when one exists.
inline StyleVector end_of_window_anchor(const StyleVector& anchor, const std::optional<StyleCentroid>& neighborhood,
                                        double lambda) {
  if (!neighborhood || lambda == 0.0 || is_degenerate(*neighborhood)) return anchor;
  return apply_drift(anchor, *neighborhood, lambda);
}

inline double end_of_window_sigma_scale(bool criticized, ReactanceCoupling coupling, double factor) {
  return coupling == ReactanceCoupling::anchor && criticized ? factor : 1.0;
}

// ---------------------------------------------------------------------------
// Run outputs.

struct SimEvent {
  std::int64_t time_minutes = 0;
  std::string agent;
  ActionKind action = ActionKind::wait;
  std::vector<std::string> refs;
  std::uint64_t sequence = 0;
};

struct AnchorSnapshot {
  std::string agent;
  std::int64_t window = 0;
  StyleVector anchor;
};

struct FollowRecord {
  std::string source;
  std::string target;
  Timestamp created_at;
  std::string provenance;  // "initial" or "feed"
};

struct ScenarioAssignment {
  std::vector<std::string> treatment;
  std::vector<std::string> control;
  std::vector<std::string> adversaries;
  Timestamp pre_begin;
  Timestamp switch_time;
  Timestamp end_time;
  int window_days = 1;
};

struct GroundTruth {
  std::vector<StyleVector> subjects;
  std::map<std::string, int> content_subject;
  std::map<std::string, int> archetype;
  std::vector<std::string> adversaries;
  std::vector<AnchorSnapshot> anchors;
  std::vector<FollowRecord> follows;
  std::optional<ScenarioAssignment> assignment;
};

struct SimResult {
  Dataset dataset;
  std::vector<SimEvent> events;
  std::uint64_t event_hash = 0;
  GroundTruth truth;
};

namespace detail {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

inline std::uint64_t fnv_update(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string padded(char prefix, std::size_t i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

inline constexpr std::array<std::string_view, 10> kFriendlyComments = {
    "Love the palette here",        "Great composition",         "This made my day",
    "Beautiful light in this one",  "Interesting take on the theme", "The texture is wonderful",
    "Such a calm mood",             "Bold colors, well done",    "I keep coming back to this",
    "Lovely detail in the corners"};

inline constexpr std::array<std::string_view, 8> kCaptionMoods = {"quiet", "bright", "restless", "gentle",
                                                                  "stark", "warm",   "hazy",     "vivid"};

}  // namespace detail

inline std::uint64_t hash_event_log(const std::vector<SimEvent>& events) {
  std::uint64_t h = detail::kFnvOffset;
  for (const auto& e : events) {
    h = detail::fnv_update(h, std::to_string(e.time_minutes));
    h = detail::fnv_update(h, "|" + e.agent + "|");
    h = detail::fnv_update(h, to_string(e.action));
    for (const auto& r : e.refs) h = detail::fnv_update(h, "|" + r);
    h = detail::fnv_update(h, ";");
  }
  return h;
}

// ---------------------------------------------------------------------------

class Simulator {
 public:
  explicit Simulator(SimConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed), feed_(0) {
    cfg_.check();
    const auto n = static_cast<std::size_t>(cfg_.n_agents);
    const int width = std::max(4, static_cast<int>(std::to_string(n).size()));
    feed_ = FeedState(n);
    dataset_.embedding_dim = cfg_.style.embedding_dim;
    dataset_.dataset_epoch = cfg_.start_time;

    const int dim = cfg_.style.embedding_dim;
    const auto draw_geometry = [&](std::vector<StyleVector>& arche) {
      StyleVector common = random_unit_vector(dim, rng_);
      arche.clear();
      for (int k = 0; k < cfg_.persona.n_archetypes; ++k) arche.push_back(random_unit_vector(dim, rng_));
      return common;
    };
    std::vector<StyleVector> visual_arche, text_arche;
    const StyleVector visual_common = draw_geometry(visual_arche);
    const StyleVector text_common = draw_geometry(text_arche);
    for (int k = 0; k < cfg_.style.subject_pool_size; ++k) truth_.subjects.push_back(random_unit_vector(dim, rng_));
    for (int k = 0; k < cfg_.style.subject_pool_size; ++k) text_subjects_.push_back(random_unit_vector(dim, rng_));

    auto make_anchor = [&](const StyleVector& common, const StyleVector& arche) {
      const StyleVector indiv = random_unit_vector(dim, rng_);
      std::vector<double> v(static_cast<std::size_t>(dim));
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = cfg_.persona.common_weight * common[i] + cfg_.persona.archetype_weight * arche[i] +
               cfg_.persona.individual_weight * indiv[i];
      return StyleVector::normalized(std::move(v));
    };

    std::uniform_int_distribution<int> arche_pick(0, cfg_.persona.n_archetypes - 1);
    std::bernoulli_distribution adversarial(cfg_.scenario ? 0.0 : cfg_.adversarial_fraction);
    agents_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& a = agents_[i];
      a.id = detail::padded('a', i + 1, width);
      a.archetype = arche_pick(rng_);
      a.anchor = make_anchor(visual_common, visual_arche[static_cast<std::size_t>(a.archetype)]);
      a.text_anchor = make_anchor(text_common, text_arche[static_cast<std::size_t>(a.archetype)]);
      a.adversarial = adversarial(rng_);
      a.window_sum.assign(static_cast<std::size_t>(dim), 0.0);
      truth_.archetype[a.id] = a.archetype;
      if (a.adversarial) truth_.adversaries.push_back(a.id);
      AgentRecord rec;
      rec.agent_id = a.id;
      rec.persona_text = "Image-making persona of archetype " + std::to_string(a.archetype) +
                         (a.adversarial ? ", contrarian critic" : "");
      rec.created_at = cfg_.start_time;
      dataset_.agents.push_back(std::move(rec));
      truth_.anchors.push_back({a.id, 0, a.anchor});
    }
    if (cfg_.scenario) {
      const auto& s = *cfg_.scenario;
      if (s.n_treatment != s.n_control) throw Error("scenario: n_treatment must equal n_control for matched pairs");
      if (cfg_.n_agents < s.n_treatment + s.n_control + s.n_adversaries)
        throw Error("scenario: need at least " + std::to_string(s.n_treatment + s.n_control + s.n_adversaries) +
                    " agents, have " + std::to_string(cfg_.n_agents));
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      for (int k = 0; k < s.n_adversaries; ++k) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), n - 1);
        std::swap(idx[static_cast<std::size_t>(k)], idx[pick(rng_)]);
        scenario_adversaries_.push_back(idx[static_cast<std::size_t>(k)]);
      }
      std::sort(scenario_adversaries_.begin(), scenario_adversaries_.end());
      duration_ = static_cast<std::int64_t>(s.pre_days + s.days) * kMinutesPerDay;
      switch_minute_ = static_cast<std::int64_t>(s.pre_days) * kMinutesPerDay;
    } else {
      duration_ = cfg_.duration_minutes;
    }
    window_minutes_ = static_cast<std::int64_t>(cfg_.window_days) * kMinutesPerDay;
  }

  SimResult run() {
    const auto n = agents_.size();
    initial_follows();
    std::uniform_int_distribution<int> first_wake(0, cfg_.sleep_max);
    for (std::size_t i = 0; i < n; ++i) queue_.push({first_wake(rng_), i, seq_++});

    std::int64_t next_boundary = window_minutes_;
    std::int64_t window = 0;
    while (!queue_.empty()) {
      const Wake w = queue_.top();
      if (w.minute >= duration_) break;
      queue_.pop();
      while (w.minute >= next_boundary) {
        end_of_window(++window);
        next_boundary += window_minutes_;
      }
      if (switch_minute_ && !assignment_ && w.minute >= *switch_minute_) assign_scenario();
      step(w.agent, w.minute);
      if (static_cast<std::int64_t>(events_.size()) >= cfg_.max_events) {
        warn("simulation stopped at max_events = " + std::to_string(cfg_.max_events));
        break;
      }
      std::uniform_int_distribution<int> sleep(cfg_.sleep_min, cfg_.sleep_max);
      queue_.push({w.minute + sleep(rng_), w.agent, seq_++});
    }
    if (switch_minute_ && !assignment_ && duration_ >= *switch_minute_) assign_scenario();

    SimResult out;
    for (std::size_t i = 0; i < n; ++i) {
      auto& rec = dataset_.agents[i];
      for (std::size_t f : feed_.following[i]) rec.following_ids.push_back(agents_[f].id);
      for (std::size_t f : agents_[i].followers) rec.follower_ids.push_back(agents_[f].id);
    }
    canonicalize(dataset_);
    out.dataset = std::move(dataset_);
    out.event_hash = hash_event_log(events_);
    out.events = std::move(events_);
    out.truth = std::move(truth_);
    return out;
  }

 private:
  struct AgentState {
    std::string id;
    int archetype = 0;
    bool adversarial = false;
    StyleVector anchor;
    StyleVector text_anchor;
    double sigma_scale = 1.0;
    std::vector<std::size_t> followers;
    // Current-window accumulators.
    std::map<std::size_t, double> window_out;
    std::vector<double> window_sum;
    std::size_t window_posts = 0;
    bool criticized = false;
  };

  struct Content {
    std::string id;
    std::size_t author = 0;
    int subject = 0;
    std::size_t root_post = 0;  // index into dataset_.posts
    bool is_reply = false;
  };

  struct Wake {
    std::int64_t minute;
    std::size_t agent;
    std::uint64_t seq;
    bool operator<(const Wake& o) const { return std::tie(minute, agent, seq) > std::tie(o.minute, o.agent, o.seq); }
  };

  [[nodiscard]] Timestamp at(std::int64_t minute) const { return cfg_.start_time + minute * 60; }

  void record(std::int64_t minute, std::size_t agent, ActionKind a, std::vector<std::string> refs) {
    events_.push_back({minute, agents_[agent].id, a, std::move(refs), events_.size()});
  }

  void add_interaction(std::size_t src, std::size_t dst, InteractionKind kind, std::int64_t minute,
                       std::optional<std::string> object) {
    InteractionEvent e;
    e.source = agents_[src].id;
    e.target = agents_[dst].id;
    e.kind = kind;
    e.created_at = at(minute);
    e.object = std::move(object);
    dataset_.interactions.push_back(std::move(e));
    const double w = kind == InteractionKind::like ? 1.0 : kind == InteractionKind::comment ? 2.0 : 3.0;
    if (src != dst) agents_[src].window_out[dst] += w;
  }

  void do_follow(std::size_t a, std::size_t b, std::int64_t minute, const char* provenance) {
    feed_.follow(a, b);
    auto& f = agents_[b].followers;
    f.insert(std::lower_bound(f.begin(), f.end(), a), a);
    add_interaction(a, b, InteractionKind::follow, minute, std::nullopt);
    truth_.follows.push_back({agents_[a].id, agents_[b].id, at(minute), provenance});
  }

  void initial_follows() {
    if (cfg_.initial_follows == 0) return;
    const std::size_t n = agents_.size();
    for (std::size_t a = 0; a < n; ++a) {
      std::vector<std::size_t> cand;
      for (std::size_t b = 0; b < n; ++b)
        if (b != a) cand.push_back(b);
      for (int k = 0; k < cfg_.initial_follows && !cand.empty(); ++k) {
        std::vector<StyleVector> anchors;
        for (std::size_t b : cand) anchors.push_back(agents_[b].anchor);
        const auto probs = follow_target_probabilities(agents_[a].anchor, anchors, cfg_.homophily_beta);
        const std::size_t pick = draw_index(probs, rng_);
        do_follow(a, cand[pick], 0, "initial");
        record(0, a, ActionKind::follow, {agents_[cand[pick]].id});
        cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(pick));
      }
    }
  }

  std::string caption_for(int subject) {
    std::uniform_int_distribution<std::size_t> mood(0, detail::kCaptionMoods.size() - 1);
    return "A " + std::string(detail::kCaptionMoods[mood(rng_)]) + " study of motif " + std::to_string(subject);
  }

  std::string comment_text(std::size_t agent, bool force_adversarial = false) {
    const bool adv = force_adversarial || agents_[agent].adversarial;
    std::bernoulli_distribution critical(cfg_.adversarial_comment_prob);
    if (adv && critical(rng_)) {
      std::uniform_int_distribution<std::size_t> term(0, kAdversarialLexicon.size() - 1);
      return "Honestly this feels " + std::string(kAdversarialLexicon[term(rng_)]) + ".";
    }
    std::uniform_int_distribution<std::size_t> pick(0, detail::kFriendlyComments.size() - 1);
    return std::string(detail::kFriendlyComments[pick(rng_)]);
  }

  void do_post(std::size_t a, std::int64_t minute) {
    std::uniform_int_distribution<int> subj(0, cfg_.style.subject_pool_size - 1);
    const int subject = subj(rng_);
    auto& ag = agents_[a];
    PostNode p;
    p.post_id = detail::padded('p', dataset_.posts.size() + 1, 7);
    p.author = ag.id;
    p.created_at = at(minute);
    p.caption = caption_for(subject);
    p.image_embedding =
        synth_embedding(ag.anchor, truth_.subjects[static_cast<std::size_t>(subject)], cfg_.style, rng_, ag.sigma_scale);
    p.caption_embedding =
        synth_embedding(ag.text_anchor, text_subjects_[static_cast<std::size_t>(subject)], cfg_.style, rng_);
    const auto e = p.image_embedding.values();
    for (std::size_t i = 0; i < e.size(); ++i) ag.window_sum[i] += e[i];
    ++ag.window_posts;
    truth_.content_subject[p.post_id] = subject;
    content_.push_back({p.post_id, a, subject, dataset_.posts.size(), false});
    feed_.add(a, minute, false);
    record(minute, a, ActionKind::post, {p.post_id});
    dataset_.posts.push_back(std::move(p));
  }

  ReplyNode& add_reply(std::size_t a, std::size_t target, std::int64_t minute, std::string text) {
    const Content& t = content_[target];
    ReplyNode r;
    r.reply_id = detail::padded('r', dataset_.replies.size() + 1, 7);
    r.parent = t.id;
    r.author = agents_[a].id;
    r.created_at = at(minute);
    r.text = std::move(text);
    ++dataset_.posts[t.root_post].comment_count;
    add_interaction(a, t.author, InteractionKind::comment, minute, t.id);
    dataset_.replies.push_back(std::move(r));
    return dataset_.replies.back();
  }

  void do_comment(std::size_t a, std::size_t target, std::int64_t minute, bool force_adversarial = false) {
    const std::string text = comment_text(a, force_adversarial);
    const bool critical = is_critical_comment(text);
    const std::size_t author = content_[target].author;
    auto& r = add_reply(a, target, minute, text);
    if (critical) agents_[author].criticized = true;
    record(minute, a, ActionKind::comment, {r.reply_id, content_[target].id});
  }

  void do_visual_reply(std::size_t a, std::size_t target, std::int64_t minute) {
    const Content t = content_[target];
    auto& ag = agents_[a];
    const StyleVector emb =
        act_visual_reply(ag.anchor, truth_.subjects[static_cast<std::size_t>(t.subject)], cfg_.style, rng_, ag.sigma_scale);
    auto& r = add_reply(a, target, minute, "");
    r.image_embedding = emb;
    const std::string id = r.reply_id;
    truth_.content_subject[id] = t.subject;
    content_.push_back({id, a, t.subject, t.root_post, true});
    feed_.add(a, minute, true);
    record(minute, a, ActionKind::visual_reply, {id, t.id});
  }

  void do_like(std::size_t a, std::size_t target, std::int64_t minute) {
    const Content& t = content_[target];
    if (!t.is_reply) ++dataset_.posts[t.root_post].like_count;
    add_interaction(a, t.author, InteractionKind::like, minute, t.id);
    record(minute, a, ActionKind::like, {t.id});
  }

  void step(std::size_t a, std::int64_t minute) {
    if (assignment_ && std::binary_search(scenario_adversaries_.begin(), scenario_adversaries_.end(), a)) {
      adversary_step(a, minute);
      return;
    }
    const auto feed = compose_feed(feed_, a, minute, cfg_.feed_followed_recent, cfg_.feed_random_count, rng_);
    std::vector<std::size_t> follow_cand;
    for (std::size_t i : feed) {
      const std::size_t b = feed_.items[i].author;
      if (b != a && !feed_.follows(a, b)) follow_cand.push_back(b);
    }
    std::sort(follow_cand.begin(), follow_cand.end());
    follow_cand.erase(std::unique(follow_cand.begin(), follow_cand.end()), follow_cand.end());

    const ActionKind act = decide_action(cfg_.action_probabilities, !feed.empty(), !follow_cand.empty(), rng_);
    std::uniform_int_distribution<std::size_t> uniform_item(0, feed.empty() ? 0 : feed.size() - 1);
    switch (act) {
      case ActionKind::post: do_post(a, minute); break;
      case ActionKind::comment: do_comment(a, feed[uniform_item(rng_)], minute); break;
      case ActionKind::like: do_like(a, feed[uniform_item(rng_)], minute); break;
      case ActionKind::visual_reply: {
        std::vector<double> w(feed.size());
        for (std::size_t i = 0; i < feed.size(); ++i)
          w[i] = feed_.items[feed[i]].is_reply ? cfg_.chain_continuation_bonus : 1.0;
        do_visual_reply(a, feed[draw_index(w, rng_)], minute);
        break;
      }
      case ActionKind::follow: {
        std::vector<StyleVector> anchors;
        for (std::size_t b : follow_cand) anchors.push_back(agents_[b].anchor);
        const auto probs = follow_target_probabilities(agents_[a].anchor, anchors, cfg_.homophily_beta);
        const std::size_t b = follow_cand[draw_index(probs, rng_)];
        do_follow(a, b, minute, "feed");
        record(minute, a, ActionKind::follow, {agents_[b].id});
        break;
      }
      case ActionKind::wait: record(minute, a, ActionKind::wait, {}); break;
    }
  }

  // Scenario adversaries comment on the latest visible post of a random treatment agent.
  void adversary_step(std::size_t a, std::int64_t minute) {
    std::uniform_int_distribution<std::size_t> pick(0, treatment_idx_.size() - 1);
    const std::size_t target_agent = treatment_idx_[pick(rng_)];
    const auto& list = feed_.by_author[target_agent];
    for (auto it = list.rbegin(); it != list.rend(); ++it) {
      if (feed_.items[*it].minute >= minute || feed_.items[*it].is_reply) continue;
      do_comment(a, *it, minute, true);
      return;
    }
    record(minute, a, ActionKind::wait, {});
  }

  void assign_scenario() {
    const auto& s = *cfg_.scenario;
    std::vector<std::size_t> post_count(agents_.size(), 0);
    for (const auto& c : content_)
      if (!c.is_reply) ++post_count[c.author];
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < agents_.size(); ++i)
      if (!std::binary_search(scenario_adversaries_.begin(), scenario_adversaries_.end(), i)) eligible.push_back(i);
    std::sort(eligible.begin(), eligible.end(), [&](std::size_t x, std::size_t y) {
      return std::make_tuple(post_count[x], agents_[x].followers.size(), x) <
             std::make_tuple(post_count[y], agents_[y].followers.size(), y);
    });
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i + 1 < eligible.size(); i += 2) pairs.emplace_back(eligible[i], eligible[i + 1]);
    const auto n_pairs = static_cast<std::size_t>(s.n_treatment);
    if (pairs.size() < n_pairs) throw Error("scenario: not enough agents to form matched pairs");
    for (std::size_t i = 0; i < n_pairs; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pairs.size() - 1);
      std::swap(pairs[i], pairs[pick(rng_)]);
    }
    pairs.resize(n_pairs);
    std::sort(pairs.begin(), pairs.end());
    ScenarioAssignment asg;
    std::bernoulli_distribution coin(0.5);
    for (auto [x, y] : pairs) {
      if (coin(rng_)) std::swap(x, y);
      treatment_idx_.push_back(x);
      asg.treatment.push_back(agents_[x].id);
      asg.control.push_back(agents_[y].id);
    }
    for (std::size_t i : scenario_adversaries_) asg.adversaries.push_back(agents_[i].id);
    asg.pre_begin = cfg_.start_time;
    asg.switch_time = at(*switch_minute_);
    asg.end_time = at(duration_);
    asg.window_days = cfg_.window_days;
    assignment_ = asg;
    truth_.assignment = asg;
  }

  void end_of_window(std::int64_t window) {
    const std::size_t n = agents_.size();
    std::vector<StyleVector> next(n);
    for (std::size_t a = 0; a < n; ++a) {
      auto& ag = agents_[a];
      std::optional<StyleCentroid> nbhd;
      if (cfg_.style.drift_lambda > 0) {
        StyleCentroid c;
        c.components.assign(static_cast<std::size_t>(cfg_.style.embedding_dim), 0.0);
        double total = 0.0;
        for (const auto& [b, w] : ag.window_out) {
          const auto& nb = agents_[b];
          if (nb.window_posts == 0) continue;
          for (std::size_t k = 0; k < c.components.size(); ++k)
            c.components[k] += w * nb.window_sum[k] / static_cast<double>(nb.window_posts);
          total += w;
          ++c.support_count;
        }
        if (total > 0) {
          for (double& x : c.components) x /= total;
          nbhd = std::move(c);
        }
      }
      next[a] = end_of_window_anchor(ag.anchor, nbhd, cfg_.style.drift_lambda);
    }
    for (std::size_t a = 0; a < n; ++a) {
      auto& ag = agents_[a];
      ag.anchor = next[a];
      ag.sigma_scale = end_of_window_sigma_scale(ag.criticized, cfg_.reactance_coupling, cfg_.reactance_factor);
      ag.window_out.clear();
      std::fill(ag.window_sum.begin(), ag.window_sum.end(), 0.0);
      ag.window_posts = 0;
      ag.criticized = false;
      truth_.anchors.push_back({ag.id, window, ag.anchor});
    }
  }

  SimConfig cfg_;
  Rng rng_;
  FeedState feed_;
  Dataset dataset_;
  GroundTruth truth_;
  std::vector<StyleVector> text_subjects_;
  std::vector<AgentState> agents_;
  std::vector<Content> content_;  // parallel to feed_.items
  std::vector<SimEvent> events_;
  std::priority_queue<Wake> queue_;
  std::uint64_t seq_ = 0;
  std::int64_t duration_ = 0;
  std::int64_t window_minutes_ = 0;
  std::optional<std::int64_t> switch_minute_;
  std::vector<std::size_t> scenario_adversaries_;
  std::vector<std::size_t> treatment_idx_;
  std::optional<ScenarioAssignment> assignment_;
};

inline SimResult run_simulation(const SimConfig& cfg) { return Simulator(cfg).run(); }

// ---------------------------------------------------------------------------
// Randomized adversarial scenario.

struct ScenarioOutcome {
  SimResult sim;
  ScenarioAssignment assignment;
  std::vector<double> treatment_delta_mu;
  std::vector<double> control_delta_mu;
};

/// Per-agent mean window-to-window drift ||mu^{t+1} - mu^t|| over the
/// exposure period [switch, end), using windows of `a.window_days` anchored at
/// the switch. Only adjacent windows that both hold posts form a pair; agents
/// with no such pair are skipped.
inline std::map<std::string, double> scenario_delta_mu(const Dataset& d, const ScenarioAssignment& a) {
  const std::int64_t width = std::int64_t{a.window_days} * 86400;
  std::map<std::string, std::map<std::int64_t, std::vector<StyleVector>>> windows;
  for (const auto& p : d.posts) {
    if (p.created_at < a.switch_time || !(p.created_at < a.end_time)) continue;
    windows[p.author][(p.created_at - a.switch_time) / width].push_back(p.image_embedding);
  }
  std::map<std::string, double> out;
  for (const auto& [agent, by_window] : windows) {
    double total = 0.0;
    int pairs = 0;
    for (auto it = by_window.begin(); it != by_window.end(); ++it) {
      auto next = std::next(it);
      if (next == by_window.end() || next->first != it->first + 1) continue;
      const auto mu0 = centroid(it->second), mu1 = centroid(next->second);
      double d2 = 0.0;
      for (std::size_t k = 0; k < mu0.components.size(); ++k)
        d2 += (mu1.components[k] - mu0.components[k]) * (mu1.components[k] - mu0.components[k]);
      total += std::sqrt(d2);
      ++pairs;
    }
    if (pairs > 0) out[agent] = total / pairs;
  }
  return out;
}

inline ScenarioOutcome randomized_adversarial_scenario(SimConfig cfg, int n_treat = 20, int n_ctrl = 20, int days = 7) {
  ScenarioConfig s = cfg.scenario.value_or(ScenarioConfig{});
  s.n_treatment = n_treat;
  s.n_control = n_ctrl;
  s.days = days;
  cfg.scenario = s;
  if (cfg.n_agents < n_treat + n_ctrl + s.n_adversaries)
    throw Error("randomized_adversarial_scenario: need at least " + std::to_string(n_treat + n_ctrl + s.n_adversaries) +
                " agents, have " + std::to_string(cfg.n_agents));
  ScenarioOutcome out;
  out.sim = run_simulation(cfg);
  out.assignment = *out.sim.truth.assignment;
  const auto dmu = scenario_delta_mu(out.sim.dataset, out.assignment);
  for (const auto& id : out.assignment.treatment)
    if (auto it = dmu.find(id); it != dmu.end()) out.treatment_delta_mu.push_back(it->second);
  for (const auto& id : out.assignment.control)
    if (auto it = dmu.find(id); it != dmu.end()) out.control_delta_mu.push_back(it->second);
  return out;
}

// ---------------------------------------------------------------------------
// ground_truth.jsonl

inline constexpr const char* kGroundTruthFile = "ground_truth.jsonl";

inline void write_ground_truth(const SimResult& r, const SimConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  using oj = nlohmann::ordered_json;
  auto vec = [](const StyleVector& v) {
    oj a = oj::array();
    for (double x : v.values()) a.push_back(x);
    return a;
  };
  out << oj{{"type", "config"}, {"config", sim_config_to_json(cfg)}}.dump() << '\n';
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.event_hash));
  out << oj{{"type", "event_log"}, {"events", r.events.size()}, {"hash", hash}}.dump() << '\n';
  for (std::size_t i = 0; i < r.truth.subjects.size(); ++i)
    out << oj{{"type", "subject"}, {"index", i}, {"vector", vec(r.truth.subjects[i])}}.dump() << '\n';
  for (const auto& [id, k] : r.truth.archetype) {
    const bool adv = std::find(r.truth.adversaries.begin(), r.truth.adversaries.end(), id) != r.truth.adversaries.end();
    out << oj{{"type", "agent"}, {"agent_id", id}, {"archetype", k}, {"adversarial", adv}}.dump() << '\n';
  }
  for (const auto& [id, k] : r.truth.content_subject)
    out << oj{{"type", "content_subject"}, {"id", id}, {"subject", k}}.dump() << '\n';
  for (const auto& a : r.truth.anchors)
    out << oj{{"type", "anchor"}, {"agent_id", a.agent}, {"window", a.window}, {"vector", vec(a.anchor)}}.dump() << '\n';
  for (const auto& f : r.truth.follows)
    out << oj{{"type", "follow"},
              {"source", f.source},
              {"target", f.target},
              {"created_at", format_timestamp(f.created_at)},
              {"provenance", f.provenance}}
               .dump()
        << '\n';
  if (r.truth.assignment) {
    const auto& a = *r.truth.assignment;
    out << oj{{"type", "assignment"},
              {"treatment", a.treatment},
              {"control", a.control},
              {"adversaries", a.adversaries},
              {"pre_begin", format_timestamp(a.pre_begin)},
              {"switch", format_timestamp(a.switch_time)},
              {"end", format_timestamp(a.end_time)},
              {"window_days", a.window_days}}
               .dump()
        << '\n';
  }
}

/// Reads the parts of ground_truth.jsonl that analyses use: subject labels,
/// archetypes, adversaries and the scenario assignment.
inline GroundTruth read_ground_truth(const std::filesystem::path& path) {
  GroundTruth g;
  detail::read_jsonl(path, [&](const nlohmann::json& j, const detail::LineContext& ctx) {
    const auto type = detail::field<std::string>(j, "type", ctx);
    if (type == "content_subject") {
      g.content_subject[detail::field<std::string>(j, "id", ctx)] = detail::field<int>(j, "subject", ctx);
    } else if (type == "agent") {
      const auto id = detail::field<std::string>(j, "agent_id", ctx);
      g.archetype[id] = detail::field<int>(j, "archetype", ctx);
      if (detail::field<bool>(j, "adversarial", ctx)) g.adversaries.push_back(id);
    } else if (type == "assignment") {
      ScenarioAssignment a;
      a.treatment = detail::field<std::vector<std::string>>(j, "treatment", ctx);
      a.control = detail::field<std::vector<std::string>>(j, "control", ctx);
      a.adversaries = detail::field<std::vector<std::string>>(j, "adversaries", ctx);
      a.pre_begin = detail::time_field(j, "pre_begin", ctx);
      a.switch_time = detail::time_field(j, "switch", ctx);
      a.end_time = detail::time_field(j, "end", ctx);
      a.window_days = detail::field<int>(j, "window_days", ctx);
      if (a.window_days < 1) throw Error(ctx.where() + ": window_days must be positive");
      g.assignment = a;
    }
  });
  return g;
}

}  // namespace vissoc
