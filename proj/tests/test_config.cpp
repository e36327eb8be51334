#include <catch2/catch_amalgamated.hpp>

#include "mote/config.hpp"

using namespace mote;
using namespace mote::config;

TEST_CASE("config renders and parses back to the same value", "[config]") {
  RunConfig cfg;
  cfg.seed = 1234;
  cfg.jobs = 3;
  cfg.synth.n_identities = 50;
  cfg.synth.gender_offset = 0.25;
  cfg.enroll.balancing_factor = 0.4;
  cfg.enroll.imposter_source = enroll::ImposterSource::AuxiliaryRaw;
  cfg.enroll.train.lr_max = 0.02;
  cfg.eval.target_fmr = 0.01;
  cfg.sweep = {0.0, 1.0};
  cfg.bench.repeats = 4;

  auto parsed = parse_config(render_config(cfg));
  CHECK(parsed == cfg);
}

TEST_CASE("defaults match the experiment recipe", "[config]") {
  auto cfg = parse_config(json::object());
  CHECK(cfg.enroll.train.max_epochs == 100);
  CHECK(cfg.enroll.train.batch_size == 128);
  CHECK(cfg.enroll.train.lr_max == 0.01);
  CHECK(cfg.enroll.train.weight_decay == 0.001);
  CHECK(cfg.enroll.train.beta1 == 0.9);
  CHECK(cfg.enroll.train.beta2 == 0.999);
  CHECK(cfg.enroll.train.epsilon == 1e-8);
  CHECK(cfg.enroll.train.validation_fraction == 0.2);
  CHECK(cfg.enroll.n_genuine_synth == 512);
  CHECK(cfg.enroll.n_imposter == 512);
  CHECK(cfg.eval.target_fmr == 1e-3);
  CHECK(cfg.sweep == std::vector<double>{0.0, 0.4, 0.5, 0.6, 1.0});
  CHECK(cfg.synth.dim == 512);
  CHECK(cfg.bench.repeats == 10);
  // The corpus seed follows the master seed unless pinned.
  CHECK(cfg.synth.seed == cfg.seed);
}

TEST_CASE("set-style overrides reach nested keys", "[config]") {
  json doc = json::object();
  apply_override(doc, "train.lr_max=0.5");
  apply_override(doc, "enroll.imposter_source=AuxiliaryRaw");
  apply_override(doc, "jobs=4");
  auto cfg = parse_config(doc);
  CHECK(cfg.enroll.train.lr_max == 0.5);
  CHECK(cfg.enroll.imposter_source == enroll::ImposterSource::AuxiliaryRaw);
  CHECK(cfg.jobs == 4);

  CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ConfigParse);
}

TEST_CASE("unknown keys and bad values are rejected", "[config]") {
  CHECK_THROWS_AS(parse_config(json{{"tyop", 1}}), ConfigParse);
  CHECK_THROWS_AS(parse_config(json{{"synth", {{"wrong", 1}}}}), ConfigParse);
  CHECK_THROWS_AS(parse_config(json{{"eval", {{"target_fmr", 0.0}}}}), ConfigParse);
  CHECK_THROWS_AS(parse_config(json{{"sweep", {0.5, 1.5}}}), ConfigParse);
  CHECK_THROWS_AS(parse_config(json{{"jobs", 0}}), ConfigParse);
}

TEST_CASE("config digest tracks content", "[config]") {
  RunConfig a, b;
  CHECK(config_digest(a) == config_digest(b));
  b.enroll.balancing_factor = 0.6;
  CHECK(config_digest(a) != config_digest(b));
}
