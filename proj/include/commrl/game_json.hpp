#pragma once

// JSON ingestion for game definitions and run configurations. Documents are plain nlohmann
// JSON; every schema error is reported with the JSON path of the offending field so config
// mistakes are directly actionable.
//
// Game documents (discriminated by "kind"):
//   {"kind": "tables", "n": 2, "action_sizes": [2, 3], "rewards": [[...], [...]],
//    "potential": [...], "r_max": 1.0, "noise": "exact"}
//       rewards[i] is agent i's table over flat joint indices (the LAST agent's action varies
//       fastest); "potential"/"r_max"/"noise" are optional.
//   {"kind": "random-coop", "n": 3, "actions": 10, "lo": 0.0, "hi": 0.2, "seed": 1}
//       "action_sizes" may replace "actions" for per-agent counts.
//   {"kind": "congestion", "state": "safe", "n": 8, "weights_safe": [...],
//    "distancing_multiplier": 0.5}
//
// MCG documents:
//   {"kind": "mcg-tables", "n": 2, "action_sizes": [2, 2], "horizon": 2, "states": 2,
//    "initial_state": 0, "rewards": [h][s][joint], "transitions": [h][s][joint][s']}
//   {"kind": "mcg-congestion", "horizon": 2, "n": 2, "weights_safe": [...],
//    "distancing_multiplier": 0.5}

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commrl/game.hpp"
#include "commrl/mcg.hpp"

namespace commrl {

using nlohmann::json;

namespace jsonio {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument(path + ": " + what);
}

inline const json& need(const json& doc, const char* key, const std::string& path) {
  if (!doc.is_object()) fail(path, "expected an object");
  const auto it = doc.find(key);
  if (it == doc.end()) fail(path + "." + key, "missing required field");
  return *it;
}

inline std::string need_string(const json& doc, const char* key, const std::string& path) {
  const json& v = need(doc, key, path);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline double need_number(const json& doc, const char* key, const std::string& path) {
  const json& v = need(doc, key, path);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

inline long need_integer(const json& doc, const char* key, const std::string& path) {
  const json& v = need(doc, key, path);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<long>();
}

inline double number_or(const json& doc, const char* key, double def, const std::string& path) {
  if (!doc.is_object() || !doc.contains(key)) return def;
  const json& v = doc.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

inline long integer_or(const json& doc, const char* key, long def, const std::string& path) {
  if (!doc.is_object() || !doc.contains(key)) return def;
  const json& v = doc.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<long>();
}

inline bool bool_or(const json& doc, const char* key, bool def, const std::string& path) {
  if (!doc.is_object() || !doc.contains(key)) return def;
  const json& v = doc.at(key);
  if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

inline std::string string_or(const json& doc, const char* key, const std::string& def,
                             const std::string& path) {
  if (!doc.is_object() || !doc.contains(key)) return def;
  const json& v = doc.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline std::vector<double> need_number_array(const json& doc, const char* key,
                                             const std::string& path) {
  const json& v = need(doc, key, path);
  if (!v.is_array()) fail(path + "." + key, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number())
      fail(path + "." + key + "[" + std::to_string(k) + "]", "expected a number");
    out.push_back(v[k].get<double>());
  }
  return out;
}

inline std::vector<int> need_int_array(const json& doc, const char* key, const std::string& path) {
  const json& v = need(doc, key, path);
  if (!v.is_array()) fail(path + "." + key, "expected an array of integers");
  std::vector<int> out;
  out.reserve(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number_integer())
      fail(path + "." + key + "[" + std::to_string(k) + "]", "expected an integer");
    out.push_back(v[k].get<int>());
  }
  return out;
}

inline NoiseKind parse_noise(const std::string& s, const std::string& path) {
  if (s == "exact") return NoiseKind::exact;
  if (s == "bernoulli") return NoiseKind::bernoulli_scaled;
  fail(path, "unknown noise kind '" + s + "' (expected 'exact' or 'bernoulli')");
}

}  // namespace jsonio

inline json load_json_file(const std::string& file_path) {
  std::ifstream in(file_path);
  if (!in) throw std::runtime_error("cannot open JSON file: " + file_path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(file_path + ": " + e.what());
  }
  return doc;
}

inline CongestionConfig congestion_config_from_json(const json& doc, const std::string& path) {
  CongestionConfig cfg;
  cfg.n = static_cast<int>(jsonio::integer_or(doc, "n", cfg.n, path));
  if (doc.contains("weights_safe")) cfg.weights_safe = jsonio::need_number_array(doc, "weights_safe", path);
  cfg.distancing_multiplier =
      jsonio::number_or(doc, "distancing_multiplier", cfg.distancing_multiplier, path);
  cfg.validate();
  return cfg;
}

/// Builds a static potential game from a JSON document (kinds: tables, random-coop,
/// congestion). See the header comment for the schemas.
inline PotentialGameModel game_from_json(const json& doc, const std::string& path = "game") {
  const std::string kind =
      doc.contains("kind") ? jsonio::need_string(doc, "kind", path)
                           : (doc.contains("rewards") ? "tables" : "");
  if (kind.empty()) jsonio::fail(path + ".kind", "missing required field");

  PotentialGameModel game;
  if (kind == "tables") {
    game.n = static_cast<int>(jsonio::need_integer(doc, "n", path));
    game.action_sizes = jsonio::need_int_array(doc, "action_sizes", path);
    const json& rewards = jsonio::need(doc, "rewards", path);
    if (!rewards.is_array()) jsonio::fail(path + ".rewards", "expected an array per agent");
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      if (!rewards[i].is_array())
        jsonio::fail(path + ".rewards[" + std::to_string(i) + "]", "expected an array");
      game.rewards.push_back(rewards[i].get<std::vector<double>>());
    }
    if (doc.contains("potential"))
      game.potential = jsonio::need_number_array(doc, "potential", path);
    double max_r = 0.0;
    for (const auto& table : game.rewards)
      for (double v : table) max_r = std::max(max_r, v);
    game.r_max = jsonio::number_or(doc, "r_max", max_r, path);
    double max_phi = 1.0;
    if (!game.potential.empty()) {
      max_phi = 0.0;
      for (double v : game.potential) max_phi = std::max(max_phi, std::abs(v));
    }
    game.phi_max = jsonio::number_or(doc, "phi_max", max_phi, path);
  } else if (kind == "random-coop") {
    const int n = static_cast<int>(jsonio::need_integer(doc, "n", path));
    std::vector<int> sizes;
    if (doc.contains("action_sizes")) {
      sizes = jsonio::need_int_array(doc, "action_sizes", path);
    } else {
      const int actions = static_cast<int>(jsonio::need_integer(doc, "actions", path));
      sizes.assign(static_cast<std::size_t>(std::max(n, 0)), actions);
    }
    const double lo = jsonio::number_or(doc, "lo", 0.0, path);
    const double hi = jsonio::need_number(doc, "hi", path);
    const auto seed = static_cast<std::uint64_t>(jsonio::integer_or(doc, "seed", 0, path));
    game = make_random_cooperative_game(n, sizes, lo, hi, seed);
  } else if (kind == "congestion") {
    const std::string state_name = jsonio::string_or(doc, "state", "safe", path);
    CongestionState state;
    if (state_name == "safe") {
      state = CongestionState::safe;
    } else if (state_name == "distancing") {
      state = CongestionState::distancing;
    } else {
      jsonio::fail(path + ".state", "expected 'safe' or 'distancing'");
    }
    game = make_congestion_stage_game(congestion_config_from_json(doc, path), state);
  } else {
    jsonio::fail(path + ".kind", "unknown game kind '" + kind + "'");
  }

  if (doc.contains("noise"))
    game.noise.kind = jsonio::parse_noise(jsonio::need_string(doc, "noise", path), path + ".noise");
  try {
    game.validate();
  } catch (const std::invalid_argument& e) {
    jsonio::fail(path, e.what());
  }
  return game;
}

/// Serializes a game into the "tables" document form (round-trips through game_from_json).
inline json game_to_json(const PotentialGameModel& game) {
  json doc;
  doc["kind"] = "tables";
  doc["n"] = game.n;
  doc["action_sizes"] = game.action_sizes;
  doc["rewards"] = game.rewards;
  if (game.has_potential()) doc["potential"] = game.potential;
  doc["r_max"] = game.r_max;
  doc["phi_max"] = game.phi_max;
  doc["noise"] = game.noise.kind == NoiseKind::bernoulli_scaled ? "bernoulli" : "exact";
  return doc;
}

/// Builds an episodic Markov cooperative game from a JSON document (kinds: mcg-tables,
/// mcg-congestion).
inline MCGModel mcg_from_json(const json& doc, const std::string& path = "mcg") {
  const std::string kind = jsonio::need_string(doc, "kind", path);
  if (kind == "mcg-tables") {
    const int n = static_cast<int>(jsonio::need_integer(doc, "n", path));
    const std::vector<int> sizes = jsonio::need_int_array(doc, "action_sizes", path);
    const int horizon = static_cast<int>(jsonio::need_integer(doc, "horizon", path));
    const int states = static_cast<int>(jsonio::need_integer(doc, "states", path));
    const int initial = static_cast<int>(jsonio::integer_or(doc, "initial_state", 0, path));
    const json& rewards = jsonio::need(doc, "rewards", path);
    const json& transitions = jsonio::need(doc, "transitions", path);
    try {
      return make_mcg_from_tables(
          n, sizes, horizon, states, initial,
          rewards.get<std::vector<std::vector<std::vector<double>>>>(),
          transitions.get<std::vector<std::vector<std::vector<std::vector<double>>>>>());
    } catch (const json::exception& e) {
      jsonio::fail(path, std::string("malformed reward/transition tables: ") + e.what());
    } catch (const std::invalid_argument& e) {
      jsonio::fail(path, e.what());
    }
  }
  if (kind == "mcg-congestion") {
    const int horizon = static_cast<int>(jsonio::need_integer(doc, "horizon", path));
    return make_congestion_mcg(congestion_config_from_json(doc, path), horizon);
  }
  jsonio::fail(path + ".kind", "unknown MCG kind '" + kind + "'");
}

}  // namespace commrl
