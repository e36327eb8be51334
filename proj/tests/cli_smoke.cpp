// End-to-end exercise of the installed CLI on a small corpus: every
// subcommand runs, artifacts appear, and a second identical run leaves
// the report byte-identical once timing fields are stripped.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "mote/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  std::cout << (ok ? "[ok]   " : "[FAIL] ") << what << "\n";
  if (!ok) ++failures;
}

int run(const std::string& cmd) {
  std::cout << "$ " << cmd << "\n";
  return std::system(cmd.c_str());
}

std::string common_args() {
  return " --seed 71"
         " --set synth.n_identities=14"
         " --set synth.samples_per_identity=4"
         " --set synth.aux_fraction=0.5"
         " --set enroll.n_genuine_synth=64"
         " --set enroll.n_imposter=64"
         " --set train.max_epochs=15"
         " --set attack.gallery_per_gender=12"
         " --set bench.identities=1 --set bench.repeats=2"
         " --target-fmr 0.05";
}

json load(const fs::path& p) {
  std::ifstream in(p);
  json j;
  in >> j;
  return j;
}

}  // namespace

int main() {
  const std::string cli = MOTE_CLI_PATH;
  fs::path dir1 = fs::temp_directory_path() / "mote_cli_smoke_1";
  fs::path dir2 = fs::temp_directory_path() / "mote_cli_smoke_2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  for (const fs::path& dir : {dir1, dir2}) {
    check(run(cli + " gen-data" + common_args() + " --out " + dir.string() +
              " > /dev/null") == 0,
          "gen-data exits cleanly");
    check(run(cli + " fit-kde" + common_args() + " --out " + dir.string() +
              " > /dev/null") == 0,
          "fit-kde exits cleanly");
    check(run(cli + " enroll" + common_args() + " --out " + dir.string() +
              " > /dev/null") == 0,
          "enroll exits cleanly");
    check(run(cli + " evaluate" + common_args() + " --out " + dir.string() +
              " > /dev/null 2>/dev/null") == 0,
          "evaluate exits cleanly");
    check(run(cli + " attack" + common_args() + " --out " + dir.string() +
              " > /dev/null") == 0,
          "attack exits cleanly");
    check(run(cli + " bench" + common_args() + " --out " + dir.string() +
              " > /dev/null") == 0,
          "bench exits cleanly");
    check(fs::exists(dir / "evaluation_report.json"), "report file exists");
    check(fs::exists(dir / "roc.csv"), "roc csv exists");
    check(fs::exists(dir / "attack.json"), "attack json exists");
    check(fs::exists(dir / "bench.json"), "bench json exists");
    check(fs::exists(dir / "enrollment_log.jsonl"), "enrollment log exists");
  }

  // verify subcommand on one probe of an enrolled identity.
  {
    std::string some_id;
    fs::path templates = dir1 / "templates";
    for (const auto& entry : fs::directory_iterator(templates)) {
      some_id = entry.path().stem().string();
      break;
    }
    std::string cmd = cli + " verify --identity " + some_id + " --probe-file " +
                      (dir1 / "corpus.emb").string() + " --probe-index 1 --tau 0.5 --out " +
                      dir1.string() + " > " + (dir1 / "verify_out.jsonl").string();
    check(run(cmd) == 0, "verify exits cleanly");
    json line = load(dir1 / "verify_out.jsonl");
    check(line.contains("score") && line.contains("outcome") && line.contains("threshold"),
          "verify emits score, threshold and outcome");
  }

  // Determinism: identical config + seed, reports match excluding timing.
  {
    json r1 = mote::pipeline::strip_timing(load(dir1 / "evaluation_report.json"));
    json r2 = mote::pipeline::strip_timing(load(dir2 / "evaluation_report.json"));
    check(r1.dump() == r2.dump(), "reports are byte-identical excluding timing");

    json a1 = mote::pipeline::strip_timing(load(dir1 / "attack.json"));
    json a2 = mote::pipeline::strip_timing(load(dir2 / "attack.json"));
    check(a1.dump() == a2.dump(), "attack reports are byte-identical excluding timing");
  }

  // Error JSON on stderr and nonzero exit for a missing artifact.
  {
    fs::path empty = fs::temp_directory_path() / "mote_cli_smoke_empty";
    fs::remove_all(empty);
    fs::create_directories(empty);
    std::string cmd = cli + " evaluate --out " + empty.string() + " 2> " +
                      (empty / "err.json").string() + " > /dev/null";
    check(run(cmd) != 0, "evaluate without artifacts fails");
    json err = load(empty / "err.json");
    check(err.contains("error") && err.contains("message"), "stderr carries error JSON");
  }

  std::cout << (failures == 0 ? "CLI SMOKE PASS\n" : "CLI SMOKE FAIL\n");
  return failures;
}
