#pragma once

// Simulation configuration and its JSON schema. Unknown keys and type errors
// are reported with the dotted path of the offending field.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "vissoc/core.hpp"
#include "vissoc/style_space.hpp"

namespace vissoc {

enum class ActionKind { post, comment, visual_reply, like, follow, wait };
inline constexpr std::array<ActionKind, 6> kAllActions = {ActionKind::post,   ActionKind::comment,
                                                          ActionKind::visual_reply, ActionKind::like,
                                                          ActionKind::follow, ActionKind::wait};

inline std::string_view to_string(ActionKind a) {
  switch (a) {
    case ActionKind::post: return "post";
    case ActionKind::comment: return "comment";
    case ActionKind::visual_reply: return "visual_reply";
    case ActionKind::like: return "like";
    case ActionKind::follow: return "follow";
    case ActionKind::wait: return "wait";
  }
  return "?";
}

struct ActionProbabilities {
  double post = 0.15;
  double comment = 0.20;
  double visual_reply = 0.20;
  double like = 0.25;
  double follow = 0.10;
  double wait = 0.10;

  [[nodiscard]] double of(ActionKind a) const {
    switch (a) {
      case ActionKind::post: return post;
      case ActionKind::comment: return comment;
      case ActionKind::visual_reply: return visual_reply;
      case ActionKind::like: return like;
      case ActionKind::follow: return follow;
      case ActionKind::wait: return wait;
    }
    return 0.0;
  }
  [[nodiscard]] double sum() const { return post + comment + visual_reply + like + follow + wait; }
};

enum class ReactanceCoupling { none, anchor };

/// Persona geometry: anchor = normalize(c * common + a * archetype + i * individual).
struct PersonaConfig {
  int n_archetypes = 6;
  double common_weight = 0.6;
  double archetype_weight = 0.6;
  double individual_weight = 0.5;
};

/// Randomized adversarial exposure: after `pre_days`, three dedicated
/// adversaries comment only on the treatment agents' posts for `days`.
struct ScenarioConfig {
  int n_treatment = 20;
  int n_control = 20;
  int n_adversaries = 3;
  int pre_days = 7;
  int days = 7;
};

struct SimConfig {
  int n_agents = 100;
  std::int64_t duration_minutes = 7 * 24 * 60;
  std::uint64_t seed = 1;
  Timestamp start_time{1735689600};  // 2025-01-01T00:00:00Z
  int sleep_min = 10;
  int sleep_max = 45;
  ActionProbabilities action_probabilities;
  int feed_random_count = 10;
  int feed_followed_recent = 20;
  double homophily_beta = 0.0;
  double adversarial_fraction = 0.05;
  double adversarial_comment_prob = 0.7;
  ReactanceCoupling reactance_coupling = ReactanceCoupling::none;
  double reactance_factor = 0.5;
  double chain_continuation_bonus = 2.0;
  int window_days = 3;
  int initial_follows = 0;
  std::int64_t max_events = 20'000'000;
  PersonaConfig persona;
  SynthStyleConfig style;
  std::optional<ScenarioConfig> scenario;

  void check() const {
    if (n_agents < 0) throw Error("n_agents must be non-negative");
    if (duration_minutes < 0) throw Error("duration_minutes must be non-negative");
    if (sleep_min < 1 || sleep_max < sleep_min) throw Error("sleep range must satisfy 1 <= sleep_min <= sleep_max");
    const auto& p = action_probabilities;
    for (auto a : kAllActions)
      if (p.of(a) < 0) throw Error("action probability for " + std::string(to_string(a)) + " is negative");
    if (std::abs(p.sum() - 1.0) > 1e-9) throw Error("action probabilities must sum to 1 (got " + std::to_string(p.sum()) + ")");
    if (feed_random_count < 0 || feed_followed_recent < 0) throw Error("feed sizes must be non-negative");
    if (adversarial_fraction < 0 || adversarial_fraction > 1) throw Error("adversarial_fraction must lie in [0, 1]");
    if (adversarial_comment_prob < 0 || adversarial_comment_prob > 1)
      throw Error("adversarial_comment_prob must lie in [0, 1]");
    if (!(reactance_factor > 0)) throw Error("reactance_factor must be positive");
    if (chain_continuation_bonus < 0) throw Error("chain_continuation_bonus must be non-negative");
    if (window_days < 1) throw Error("window_days must be >= 1");
    if (initial_follows < 0) throw Error("initial_follows must be non-negative");
    if (persona.n_archetypes < 1) throw Error("persona.n_archetypes must be >= 1");
    if (persona.common_weight < 0 || persona.archetype_weight < 0 || persona.individual_weight < 0)
      throw Error("persona weights must be non-negative");
    style.check();
    if (scenario) {
      const auto& s = *scenario;
      if (s.n_treatment < 1 || s.n_control < 1 || s.n_adversaries < 1 || s.pre_days < 1 || s.days < 1)
        throw Error("scenario sizes and durations must be positive");
    }
  }
};

// ---------------------------------------------------------------------------
// JSON mapping.

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(where() + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(child(key) + ": wrong type");
    }
  }

  template <typename F>
  void object(const char* key, F&& f) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    ConfigReader sub(*it, child(key));
    f(sub);
    sub.finish();
  }

  [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw Error("unknown config key '" + child(it.key()) + "'");
  }

  [[nodiscard]] std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  detail::ConfigReader r(j, "");
  r.get("n_agents", c.n_agents);
  r.get("duration_minutes", c.duration_minutes);
  r.get("seed", c.seed);
  if (r.has("start_time")) {
    std::string s;
    r.get("start_time", s);
    try {
      c.start_time = parse_timestamp(s);
    } catch (const Error& e) {
      throw Error(std::string("start_time: ") + e.what());
    }
  } else {
    r.get("start_time", c.start_time.seconds);  // marks the key as known
  }
  r.get("sleep_min", c.sleep_min);
  r.get("sleep_max", c.sleep_max);
  r.object("action_probabilities", [&](detail::ConfigReader& a) {
    auto& p = c.action_probabilities;
    a.get("post", p.post);
    a.get("comment", p.comment);
    a.get("visual_reply", p.visual_reply);
    a.get("like", p.like);
    a.get("follow", p.follow);
    a.get("wait", p.wait);
  });
  r.get("feed_random_count", c.feed_random_count);
  r.get("feed_followed_recent", c.feed_followed_recent);
  r.get("homophily_beta", c.homophily_beta);
  r.get("adversarial_fraction", c.adversarial_fraction);
  r.get("adversarial_comment_prob", c.adversarial_comment_prob);
  if (r.has("reactance_coupling")) {
    std::string s;
    r.get("reactance_coupling", s);
    if (s == "none") c.reactance_coupling = ReactanceCoupling::none;
    else if (s == "anchor") c.reactance_coupling = ReactanceCoupling::anchor;
    else throw Error("reactance_coupling: expected \"none\" or \"anchor\", got \"" + s + "\"");
  } else {
    std::string unused;
    r.get("reactance_coupling", unused);
  }
  r.get("reactance_factor", c.reactance_factor);
  r.get("chain_continuation_bonus", c.chain_continuation_bonus);
  r.get("window_days", c.window_days);
  r.get("initial_follows", c.initial_follows);
  r.get("max_events", c.max_events);
  r.object("persona", [&](detail::ConfigReader& p) {
    p.get("n_archetypes", c.persona.n_archetypes);
    p.get("common_weight", c.persona.common_weight);
    p.get("archetype_weight", c.persona.archetype_weight);
    p.get("individual_weight", c.persona.individual_weight);
  });
  r.object("style", [&](detail::ConfigReader& s) {
    s.get("embedding_dim", c.style.embedding_dim);
    s.get("style_weight", c.style.style_weight);
    s.get("subject_weight", c.style.subject_weight);
    s.get("noise_sigma", c.style.noise_sigma);
    s.get("subject_pool_size", c.style.subject_pool_size);
    s.get("drift_lambda", c.style.drift_lambda);
  });
  if (r.has("scenario")) {
    c.scenario = ScenarioConfig{};
    r.object("scenario", [&](detail::ConfigReader& s) {
      s.get("n_treatment", c.scenario->n_treatment);
      s.get("n_control", c.scenario->n_control);
      s.get("n_adversaries", c.scenario->n_adversaries);
      s.get("pre_days", c.scenario->pre_days);
      s.get("days", c.scenario->days);
    });
  }
  r.finish();
  c.check();
  return c;
}

inline nlohmann::ordered_json sim_config_to_json(const SimConfig& c) {
  nlohmann::ordered_json j;
  j["n_agents"] = c.n_agents;
  j["duration_minutes"] = c.duration_minutes;
  j["seed"] = c.seed;
  j["start_time"] = format_timestamp(c.start_time);
  j["sleep_min"] = c.sleep_min;
  j["sleep_max"] = c.sleep_max;
  const auto& p = c.action_probabilities;
  j["action_probabilities"] = {{"post", p.post},   {"comment", p.comment}, {"visual_reply", p.visual_reply},
                               {"like", p.like},   {"follow", p.follow},   {"wait", p.wait}};
  j["feed_random_count"] = c.feed_random_count;
  j["feed_followed_recent"] = c.feed_followed_recent;
  j["homophily_beta"] = c.homophily_beta;
  j["adversarial_fraction"] = c.adversarial_fraction;
  j["adversarial_comment_prob"] = c.adversarial_comment_prob;
  j["reactance_coupling"] = c.reactance_coupling == ReactanceCoupling::anchor ? "anchor" : "none";
  j["reactance_factor"] = c.reactance_factor;
  j["chain_continuation_bonus"] = c.chain_continuation_bonus;
  j["window_days"] = c.window_days;
  j["initial_follows"] = c.initial_follows;
  j["max_events"] = c.max_events;
  j["persona"] = {{"n_archetypes", c.persona.n_archetypes},
                  {"common_weight", c.persona.common_weight},
                  {"archetype_weight", c.persona.archetype_weight},
                  {"individual_weight", c.persona.individual_weight}};
  j["style"] = {{"embedding_dim", c.style.embedding_dim},     {"style_weight", c.style.style_weight},
                {"subject_weight", c.style.subject_weight},   {"noise_sigma", c.style.noise_sigma},
                {"subject_pool_size", c.style.subject_pool_size}, {"drift_lambda", c.style.drift_lambda}};
  if (c.scenario)
    j["scenario"] = {{"n_treatment", c.scenario->n_treatment}, {"n_control", c.scenario->n_control},
                     {"n_adversaries", c.scenario->n_adversaries}, {"pre_days", c.scenario->pre_days},
                     {"days", c.scenario->days}};
  return j;
}

inline SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path + ": malformed JSON (" + e.what() + ")");
  }
  return sim_config_from_json(j);
}

}  // namespace vissoc
