// Command-line front end for the MOTE verification toolkit: corpus
// generation, KDE fitting, enrollment, verification, evaluation, the
// gender-inference attack and the resource benchmark, all driven by one
// JSON config plus --set overrides.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mote/config.hpp"
#include "mote/pipeline.hpp"
#include "mote/verify.hpp"

namespace {

using mote::config::json;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<double> balancing_factor;
  std::optional<double> target_fmr;
};

mote::config::RunConfig resolve_config(const GlobalArgs& args) {
  json doc = json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) {
      throw mote::config::ConfigParse("cannot open config file " + args.config_path);
    }
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw mote::config::ConfigParse(args.config_path + ": " + e.what());
    }
  }
  for (const auto& assignment : args.overrides) {
    mote::config::apply_override(doc, assignment);
  }
  if (args.seed) doc["seed"] = *args.seed;
  if (args.jobs) doc["jobs"] = *args.jobs;
  if (args.balancing_factor) doc["enroll"]["balancing_factor"] = *args.balancing_factor;
  if (args.target_fmr) doc["eval"]["target_fmr"] = *args.target_fmr;
  return mote::config::parse_config(doc);
}

void add_common_flags(CLI::App* cmd, GlobalArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--out", args.out_dir, "artifact directory");
  cmd->add_option("--set", args.overrides, "config override key=value (repeatable)");
  cmd->add_option("--seed", args.seed, "master seed");
  cmd->add_option("--jobs", args.jobs, "worker threads for enrollment");
  cmd->add_option("--balancing-factor", args.balancing_factor,
                  "fraction of synthetic residuals drawn from the male density");
  cmd->add_option("--target-fmr", args.target_fmr, "operating false-match rate");
}

int fail_with_error(const mote::Error& e) {
  json err = {{"error", e.code()}, {"message", e.what()}};
  std::cerr << err.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MOTE model-template face verification toolkit"};
  app.require_subcommand(1);

  GlobalArgs args;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic embedding corpus");
  add_common_flags(gen, args);

  auto* fit = app.add_subcommand("fit-kde", "fit the attribute KDEs and print a summary");
  add_common_flags(fit, args);

  auto* enroll_cmd = app.add_subcommand("enroll", "train and store one template per identity");
  add_common_flags(enroll_cmd, args);

  auto* verify_cmd = app.add_subcommand("verify", "score probes against a claimed identity");
  add_common_flags(verify_cmd, args);
  std::string claim_identity;
  std::string probe_file;
  std::int64_t probe_index = -1;
  double tau = 0.5;
  verify_cmd->add_option("--identity", claim_identity, "claimed identity")->required();
  verify_cmd->add_option("--probe-file", probe_file, "embedding file with probe vectors")
      ->required();
  verify_cmd->add_option("--probe-index", probe_index, "probe row (default: all rows)");
  verify_cmd->add_option("--tau", tau, "decision threshold");

  auto* eval_cmd = app.add_subcommand("evaluate", "recognition and fairness report");
  add_common_flags(eval_cmd, args);

  auto* attack_cmd = app.add_subcommand("attack", "gender inference attack report");
  add_common_flags(attack_cmd, args);

  auto* bench_cmd = app.add_subcommand("bench", "storage and enrollment-time benchmark");
  add_common_flags(bench_cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = resolve_config(args);
    mote::pipeline::Paths paths{std::filesystem::path(args.out_dir)};
    mote::TemplateStore store(paths.out_dir);

    if (gen->parsed()) {
      auto corpus = mote::pipeline::cmd_gen_data(cfg, paths);
      json summary = {{"embeddings", corpus.embeddings.size()},
                      {"dim", corpus.dim},
                      {"manifest", paths.manifest().string()},
                      {"config_digest", mote::config::config_digest(cfg)}};
      std::cout << summary.dump(2) << "\n";
    } else if (fit->parsed()) {
      auto corpus = mote::pipeline::load_corpus_or_throw(paths);
      std::cout << mote::pipeline::cmd_fit_kde(cfg, corpus, paths).dump(2) << "\n";
    } else if (enroll_cmd->parsed()) {
      auto corpus = mote::pipeline::load_corpus_or_throw(paths);
      auto aux = mote::enroll::build_auxiliary(corpus);
      auto kdes = mote::pipeline::fit_kdes(cfg, aux);
      auto summary =
          mote::pipeline::enroll_all(cfg, corpus, kdes, aux, store, cfg.jobs);
      json out = {{"enrolled", summary.log.size()},
                  {"bytes_per_identity", summary.bytes_per_identity},
                  {"timing",
                   {{"mean_enroll_seconds", summary.mean_seconds},
                    {"std_enroll_seconds", summary.std_seconds}}}};
      std::cout << out.dump(2) << "\n";
    } else if (verify_cmd->parsed()) {
      if (!(tau > 0.0 && tau < 1.0)) {
        throw mote::config::ConfigParse("tau must lie in (0,1)");
      }
      auto tmpl = store.load(claim_identity);
      auto probes = mote::load_embedding_file(probe_file);
      auto mlp = mote::net::mlp_from_template(tmpl);
      auto emit = [&](std::size_t index) {
        const auto& probe = probes.embeddings[index];
        double s = mote::verify::score(mlp, probe);
        auto decision = mote::verify::decide(s, tau);
        json line = {{"identity", claim_identity},
                     {"probe_index", index},
                     {"score", decision.score},
                     {"threshold", decision.threshold},
                     {"outcome", mote::verify::to_string(decision.outcome)}};
        std::cout << line.dump() << "\n";
      };
      if (probe_index >= 0) {
        if (static_cast<std::size_t>(probe_index) >= probes.embeddings.size()) {
          throw mote::pipeline::MissingArtifact("probe index out of range");
        }
        emit(static_cast<std::size_t>(probe_index));
      } else {
        for (std::size_t i = 0; i < probes.embeddings.size(); ++i) emit(i);
      }
    } else if (eval_cmd->parsed()) {
      auto corpus = mote::pipeline::load_corpus_or_throw(paths);
      auto report = mote::pipeline::cmd_evaluate(cfg, corpus, store, paths);
      std::cout << report.dump(2) << "\n";
    } else if (attack_cmd->parsed()) {
      auto corpus = mote::pipeline::load_corpus_or_throw(paths);
      std::cout << mote::pipeline::cmd_attack(cfg, corpus, store, paths).dump(2) << "\n";
    } else if (bench_cmd->parsed()) {
      auto corpus = mote::pipeline::load_corpus_or_throw(paths);
      std::cout << mote::pipeline::cmd_bench(cfg, corpus, paths).dump(2) << "\n";
    }
  } catch (const mote::Error& e) {
    return fail_with_error(e);
  } catch (const std::exception& e) {
    json err = {{"error", "Internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
