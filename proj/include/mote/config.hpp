#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mote/common.hpp"
#include "mote/enroll.hpp"
#include "mote/synth.hpp"

namespace mote::config {

using nlohmann::json;

struct ConfigParse : Error {
  explicit ConfigParse(const std::string& msg) : Error("ConfigParse", msg) {}
};

struct KdeSettings {
  int cv_folds = 5;
  std::uint32_t grid_size = 20;
  double grid_lo_factor = 0.05;
  double grid_hi_factor = 2.0;

  bool operator==(const KdeSettings&) const = default;
};

struct EvalSettings {
  double target_fmr = 1e-3;
  std::uint64_t imposter_pair_cap = 1000000;
  std::uint32_t roc_max_points = 1000;

  bool operator==(const EvalSettings&) const = default;
};

struct AttackSettings {
  std::uint32_t gallery_per_gender = 100;

  bool operator==(const AttackSettings&) const = default;
};

struct BenchSettings {
  std::uint32_t identities = 3;
  std::uint32_t repeats = 10;

  bool operator==(const BenchSettings&) const = default;
};

/// One document drives every subcommand; unknown keys are rejected so
/// typos fail loudly.
struct RunConfig {
  std::uint64_t seed = 42;
  int jobs = 1;
  synth::SynthConfig synth;
  KdeSettings kde;
  enroll::EnrollmentConfig enroll;
  EvalSettings eval;
  AttackSettings attack;
  std::vector<double> sweep{0.0, 0.4, 0.5, 0.6, 1.0};
  BenchSettings bench;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigParse(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& scope) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigParse("unknown config key '" + scope + key + "'");
  }
}

}  // namespace detail

inline json render_config(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  j["synth"] = {{"n_identities", cfg.synth.n_identities},
                {"samples_per_identity", cfg.synth.samples_per_identity},
                {"dim", cfg.synth.dim},
                {"male_fraction", cfg.synth.male_fraction},
                {"identity_spread", cfg.synth.identity_spread},
                {"gender_offset", cfg.synth.gender_offset},
                {"aux_fraction", cfg.synth.aux_fraction},
                {"seed", cfg.synth.seed}};
  j["kde"] = {{"cv_folds", cfg.kde.cv_folds},
              {"grid_size", cfg.kde.grid_size},
              {"grid_lo_factor", cfg.kde.grid_lo_factor},
              {"grid_hi_factor", cfg.kde.grid_hi_factor}};
  const auto& t = cfg.enroll.train;
  j["enroll"] = {{"balancing_factor", cfg.enroll.balancing_factor},
                 {"n_genuine_synth", cfg.enroll.n_genuine_synth},
                 {"n_imposter", cfg.enroll.n_imposter},
                 {"imposter_source", enroll::to_string(cfg.enroll.imposter_source)},
                 {"overwrite", cfg.enroll.overwrite}};
  j["train"] = {{"max_epochs", t.max_epochs},
                {"batch_size", t.batch_size},
                {"lr_max", t.lr_max},
                {"weight_decay", t.weight_decay},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"epsilon", t.epsilon},
                {"early_stop_patience", t.early_stop_patience},
                {"min_delta", t.min_delta},
                {"pct_start", t.pct_start},
                {"div_factor", t.div_factor},
                {"final_div_factor", t.final_div_factor},
                {"validation_fraction", t.validation_fraction}};
  j["eval"] = {{"target_fmr", cfg.eval.target_fmr},
               {"imposter_pair_cap", cfg.eval.imposter_pair_cap},
               {"roc_max_points", cfg.eval.roc_max_points}};
  j["attack"] = {{"gallery_per_gender", cfg.attack.gallery_per_gender}};
  j["sweep"] = cfg.sweep;
  j["bench"] = {{"identities", cfg.bench.identities}, {"repeats", cfg.bench.repeats}};
  return j;
}

inline RunConfig parse_config(const json& j) {
  RunConfig cfg;
  detail::check_keys(j, {"seed", "jobs", "synth", "kde", "enroll", "train", "eval",
                         "attack", "sweep", "bench"},
                     "");
  detail::read_field(j, "seed", cfg.seed);
  detail::read_field(j, "jobs", cfg.jobs);
  if (cfg.jobs < 1) throw ConfigParse("jobs must be >= 1");

  bool synth_seed_given = false;
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    detail::check_keys(s,
                       {"n_identities", "samples_per_identity", "dim", "male_fraction",
                        "identity_spread", "gender_offset", "aux_fraction", "seed"},
                       "synth.");
    detail::read_field(s, "n_identities", cfg.synth.n_identities);
    detail::read_field(s, "samples_per_identity", cfg.synth.samples_per_identity);
    detail::read_field(s, "dim", cfg.synth.dim);
    detail::read_field(s, "male_fraction", cfg.synth.male_fraction);
    detail::read_field(s, "identity_spread", cfg.synth.identity_spread);
    detail::read_field(s, "gender_offset", cfg.synth.gender_offset);
    detail::read_field(s, "aux_fraction", cfg.synth.aux_fraction);
    synth_seed_given = s.contains("seed");
    detail::read_field(s, "seed", cfg.synth.seed);
  }
  if (!synth_seed_given) cfg.synth.seed = cfg.seed;  // corpus follows the master seed

  if (j.contains("kde")) {
    const json& k = j.at("kde");
    detail::check_keys(k, {"cv_folds", "grid_size", "grid_lo_factor", "grid_hi_factor"},
                       "kde.");
    detail::read_field(k, "cv_folds", cfg.kde.cv_folds);
    detail::read_field(k, "grid_size", cfg.kde.grid_size);
    detail::read_field(k, "grid_lo_factor", cfg.kde.grid_lo_factor);
    detail::read_field(k, "grid_hi_factor", cfg.kde.grid_hi_factor);
  }

  if (j.contains("enroll")) {
    const json& e = j.at("enroll");
    detail::check_keys(e,
                       {"balancing_factor", "n_genuine_synth", "n_imposter",
                        "imposter_source", "overwrite"},
                       "enroll.");
    detail::read_field(e, "balancing_factor", cfg.enroll.balancing_factor);
    detail::read_field(e, "n_genuine_synth", cfg.enroll.n_genuine_synth);
    detail::read_field(e, "n_imposter", cfg.enroll.n_imposter);
    if (e.contains("imposter_source")) {
      cfg.enroll.imposter_source =
          enroll::imposter_source_from_string(e.at("imposter_source").get<std::string>());
    }
    detail::read_field(e, "overwrite", cfg.enroll.overwrite);
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    detail::check_keys(t,
                       {"max_epochs", "batch_size", "lr_max", "weight_decay", "beta1",
                        "beta2", "epsilon", "early_stop_patience", "min_delta", "pct_start",
                        "div_factor", "final_div_factor", "validation_fraction"},
                       "train.");
    auto& tc = cfg.enroll.train;
    detail::read_field(t, "max_epochs", tc.max_epochs);
    detail::read_field(t, "batch_size", tc.batch_size);
    detail::read_field(t, "lr_max", tc.lr_max);
    detail::read_field(t, "weight_decay", tc.weight_decay);
    detail::read_field(t, "beta1", tc.beta1);
    detail::read_field(t, "beta2", tc.beta2);
    detail::read_field(t, "epsilon", tc.epsilon);
    detail::read_field(t, "early_stop_patience", tc.early_stop_patience);
    detail::read_field(t, "min_delta", tc.min_delta);
    detail::read_field(t, "pct_start", tc.pct_start);
    detail::read_field(t, "div_factor", tc.div_factor);
    detail::read_field(t, "final_div_factor", tc.final_div_factor);
    detail::read_field(t, "validation_fraction", tc.validation_fraction);
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    detail::check_keys(e, {"target_fmr", "imposter_pair_cap", "roc_max_points"}, "eval.");
    detail::read_field(e, "target_fmr", cfg.eval.target_fmr);
    detail::read_field(e, "imposter_pair_cap", cfg.eval.imposter_pair_cap);
    detail::read_field(e, "roc_max_points", cfg.eval.roc_max_points);
    if (!(cfg.eval.target_fmr > 0.0 && cfg.eval.target_fmr <= 1.0)) {
      throw ConfigParse("eval.target_fmr must be in (0,1]");
    }
  }

  if (j.contains("attack")) {
    detail::check_keys(j.at("attack"), {"gallery_per_gender"}, "attack.");
    detail::read_field(j.at("attack"), "gallery_per_gender", cfg.attack.gallery_per_gender);
  }

  if (j.contains("sweep")) {
    cfg.sweep = j.at("sweep").get<std::vector<double>>();
    for (double b : cfg.sweep) {
      if (!(b >= 0.0 && b <= 1.0)) throw ConfigParse("sweep values must lie in [0,1]");
    }
  }

  if (j.contains("bench")) {
    detail::check_keys(j.at("bench"), {"identities", "repeats"}, "bench.");
    detail::read_field(j.at("bench"), "identities", cfg.bench.identities);
    detail::read_field(j.at("bench"), "repeats", cfg.bench.repeats);
  }
  return cfg;
}

inline RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParse("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigParse(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

/// Applies one "dotted.key=value" override onto a config document. The
/// value is parsed as JSON when possible and falls back to a string.
inline void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigParse("override must look like key=value: " + assignment);
  }
  std::string key = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;
  }

  json* node = &doc;
  std::size_t begin = 0;
  while (true) {
    auto dot = key.find('.', begin);
    std::string part = key.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (part.empty()) throw ConfigParse("empty path segment in override: " + assignment);
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      return;
    }
    node = &(*node)[part];
    begin = dot + 1;
  }
}

inline std::string config_digest(const RunConfig& cfg) {
  return to_hex(fnv1a64(render_config(cfg).dump()));
}

}  // namespace mote::config
