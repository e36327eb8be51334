#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mote/attack.hpp"
#include "mote/config.hpp"
#include "mote/enroll.hpp"
#include "mote/eval.hpp"
#include "mote/kde.hpp"
#include "mote/net.hpp"
#include "mote/store.hpp"
#include "mote/synth.hpp"
#include "mote/types.hpp"

namespace mote::pipeline {

using nlohmann::json;

struct MissingArtifact : Error {
  explicit MissingArtifact(const std::string& msg) : Error("MissingArtifact", msg) {}
};

struct Paths {
  std::filesystem::path out_dir;

  explicit Paths(std::filesystem::path dir) : out_dir(std::move(dir)) {}

  std::filesystem::path embeddings() const { return out_dir / "corpus.emb"; }
  std::filesystem::path manifest() const { return out_dir / "corpus.manifest.json"; }
  std::filesystem::path report() const { return out_dir / "evaluation_report.json"; }
  std::filesystem::path roc_csv() const { return out_dir / "roc.csv"; }
  std::filesystem::path attack_json() const { return out_dir / "attack.json"; }
  std::filesystem::path bench_json() const { return out_dir / "bench.json"; }
  std::filesystem::path kde_json() const { return out_dir / "kde_summary.json"; }
};

inline void write_json(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("missing file: " + path.string());
  json j;
  in >> j;
  return j;
}

/// Removes every "timing" subtree; used for determinism comparisons
/// because wall-clock fields are annotated non-deterministic.
inline json strip_timing(json j) {
  if (j.is_object()) {
    j.erase("timing");
    for (auto& [key, value] : j.items()) value = strip_timing(value);
  } else if (j.is_array()) {
    for (auto& value : j) value = strip_timing(value);
  }
  return j;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

inline synth::Corpus cmd_gen_data(const config::RunConfig& cfg, const Paths& paths) {
  auto corpus = synth::gen_corpus(cfg.synth);
  std::filesystem::create_directories(paths.out_dir);
  synth::write_corpus(corpus, paths.embeddings(), paths.manifest());
  return corpus;
}

inline synth::Corpus load_corpus_or_throw(const Paths& paths) {
  if (!std::filesystem::exists(paths.embeddings()) ||
      !std::filesystem::exists(paths.manifest())) {
    throw MissingArtifact("corpus not found under " + paths.out_dir.string() +
                          " (run gen-data first)");
  }
  return synth::load_corpus(paths.embeddings(), paths.manifest());
}

// ---------------------------------------------------------------------------
// fit-kde
// ---------------------------------------------------------------------------

inline enroll::FittedKdes fit_kdes(const config::RunConfig& cfg,
                                   const enroll::AuxiliaryData& aux) {
  return enroll::fit_auxiliary_kdes(aux, cfg.kde.cv_folds, cfg.kde.grid_size,
                                    cfg.kde.grid_lo_factor, cfg.kde.grid_hi_factor);
}

inline json cmd_fit_kde(const config::RunConfig& cfg, const synth::Corpus& corpus,
                        const Paths& paths) {
  auto aux = enroll::build_auxiliary(corpus);
  auto kdes = fit_kdes(cfg, aux);
  json j;
  j["config_digest"] = config::config_digest(cfg);
  j["master_seed"] = cfg.seed;
  j["female"] = {{"rows", kdes.female.residuals.rows}, {"bandwidth", kdes.female.bandwidth}};
  j["male"] = {{"rows", kdes.male.residuals.rows}, {"bandwidth", kdes.male.bandwidth}};
  write_json(j, paths.kde_json());
  return j;
}

// ---------------------------------------------------------------------------
// enroll
// ---------------------------------------------------------------------------

struct EnrollSummary {
  json log = json::array();
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  std::uint64_t bytes_per_identity = 0;
};

/// Enrolls every Enroll-split identity. Identities fan out over the
/// requested number of worker threads; per-identity seeds keep the
/// result independent of scheduling, and the log is written in identity
/// order.
inline EnrollSummary enroll_all(const config::RunConfig& cfg, const synth::Corpus& corpus,
                                const enroll::FittedKdes& kdes,
                                const enroll::AuxiliaryData& aux, TemplateStore& store,
                                int jobs = 1) {
  auto references = corpus.manifest.reference_rows();
  std::vector<std::pair<IdentityId, std::uint64_t>> work(references.begin(), references.end());
  if (work.empty()) throw MissingArtifact("corpus has no Enroll-split identities");

  struct Entry {
    IdentityId id;
    double seconds = 0.0;
    std::uint32_t epochs = 0;
    double best_val_loss = 0.0;
    std::uint64_t bytes = 0;
  };
  std::vector<Entry> entries(work.size());
  std::atomic<std::size_t> next{0};
  std::mutex store_mutex;

  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      const auto& [id, row] = work[i];
      auto result = enroll::enroll_identity(corpus.embeddings[row], id, kdes, aux,
                                            cfg.enroll, cfg.seed, nullptr);
      {
        std::lock_guard<std::mutex> lock(store_mutex);
        entries[i].bytes = store.save(result.tmpl, cfg.enroll.overwrite);
      }
      entries[i].id = id;
      entries[i].seconds = result.wall_time_seconds;
      entries[i].epochs = result.report.epochs_run;
      entries[i].best_val_loss = result.report.best_val_loss;
    }
  };

  int n_threads = std::max(1, jobs);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  EnrollSummary summary;
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& e : entries) {
    json line = {{"identity", e.id},
                 {"epochs", e.epochs},
                 {"best_val_loss", e.best_val_loss},
                 {"bytes", e.bytes},
                 {"balancing_factor", cfg.enroll.balancing_factor},
                 {"timing", {{"seconds", e.seconds}}}};
    store.append_log_line(line.dump());
    summary.log.push_back(std::move(line));
    sum += e.seconds;
    sum_sq += e.seconds * e.seconds;
    summary.bytes_per_identity = e.bytes;
  }
  double n = static_cast<double>(entries.size());
  summary.mean_seconds = sum / n;
  summary.std_seconds = n > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1)))
                              : 0.0;
  return summary;
}

// ---------------------------------------------------------------------------
// Score-set construction
// ---------------------------------------------------------------------------

struct ScoreSets {
  eval::ScoreSet mote;
  eval::ScoreSet baseline;
  std::size_t n_probes = 0;
  std::size_t n_templates = 0;
  std::size_t imposter_pairs_total = 0;
  double mote_scoring_seconds = 0.0;
  std::size_t mote_scores_computed = 0;
};

namespace detail {

/// Deterministic reservoir subsampler for the imposter-pair cap.
class Reservoir {
 public:
  Reservoir(std::size_t cap, Rng& rng) : cap_(cap), rng_(rng) {}

  void offer(std::vector<eval::ScoredPair>& sink, const eval::ScoredPair& p) {
    ++seen_;
    if (sink.size() < cap_) {
      sink.push_back(p);
      return;
    }
    std::size_t slot = rng_.index(seen_);
    if (slot < cap_) sink[slot] = p;
  }

  std::size_t seen() const { return seen_; }

 private:
  std::size_t cap_;
  Rng& rng_;
  std::size_t seen_ = 0;
};

}  // namespace detail

/// Scores every probe row against every enrolled identity: genuine when
/// the probe's identity matches, imposter otherwise (capped by seeded
/// reservoir subsampling). Pairs are tagged with the enrolled identity's
/// attribute. The baseline system scores the same pairs with cosine
/// similarity against the stored reference embedding.
inline ScoreSets build_score_sets(const config::RunConfig& cfg, const synth::Corpus& corpus,
                                  const TemplateStore& store) {
  ScoreSets out;
  auto attr_of = corpus.manifest.attribute_by_identity();
  auto references = corpus.manifest.reference_rows();

  std::vector<std::uint64_t> probe_rows;
  std::vector<IdentityId> probe_ids;
  for (const auto& r : corpus.manifest.rows) {
    if (r.split != Split::Probe) continue;
    probe_rows.push_back(r.row);
    probe_ids.push_back(r.identity);
  }
  if (probe_rows.empty()) throw MissingArtifact("corpus has no Probe rows");

  auto ids = store.list();
  if (ids.empty()) throw MissingArtifact("template store is empty (run enroll first)");
  out.n_probes = probe_rows.size();
  out.n_templates = ids.size();

  Matrix<float> probes(probe_rows.size(), corpus.dim);
  for (std::size_t i = 0; i < probe_rows.size(); ++i) {
    const Embedding& e = corpus.embeddings[probe_rows[i]];
    std::copy(e.begin(), e.end(), probes.row(i));
  }

  Rng mote_rng(mix_seed(cfg.seed, fnv1a64("imposter-cap-mote")));
  Rng base_rng(mix_seed(cfg.seed, fnv1a64("imposter-cap-baseline")));
  detail::Reservoir mote_res(cfg.eval.imposter_pair_cap, mote_rng);
  detail::Reservoir base_res(cfg.eval.imposter_pair_cap, base_rng);

  auto score_start = std::chrono::steady_clock::now();
  for (const auto& id : ids) {
    ModelTemplate tmpl = store.load(id);
    net::Mlp<float> mlp = net::mlp_from_template(tmpl);
    Attribute attr = attr_of.at(id);
    auto logits = net::forward_batch(mlp, probes, /*train_mode=*/false);
    out.mote_scores_computed += logits.size();
    for (std::size_t i = 0; i < logits.size(); ++i) {
      double s = net::sigmoid(static_cast<double>(logits[i]));
      if (probe_ids[i] == id) {
        out.mote.genuine.push_back({s, attr});
      } else {
        mote_res.offer(out.mote.imposter, {s, attr});
      }
    }
  }
  out.mote_scoring_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - score_start).count();

  for (const auto& id : ids) {
    auto ref_it = references.find(id);
    if (ref_it == references.end()) {
      throw MissingArtifact("enrolled identity " + id + " has no reference row");
    }
    const Embedding& reference = corpus.embeddings[ref_it->second];
    Attribute attr = attr_of.at(id);
    for (std::size_t i = 0; i < probe_rows.size(); ++i) {
      double s = cosine_similarity(corpus.embeddings[probe_rows[i]], reference);
      if (probe_ids[i] == id) {
        out.baseline.genuine.push_back({s, attr});
      } else {
        base_res.offer(out.baseline.imposter, {s, attr});
      }
    }
  }
  out.imposter_pairs_total = mote_res.seen();
  return out;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace detail {

inline json rates_json(const std::map<Attribute, eval::Rates>& groups) {
  json j;
  for (const auto& [attr, r] : groups) {
    j[to_string(attr)] = {{"fmr", r.fmr}, {"fnmr", r.fnmr}};
  }
  return j;
}

inline json system_metrics(const eval::ScoreSet& scores, double target_fmr,
                           std::uint32_t roc_max_points, const std::string& label) {
  json j;
  auto roc = eval::roc_auc(scores);
  j["auc"] = roc.auc;

  auto thr = eval::threshold_at_fmr(scores, target_fmr);
  if (thr.resolution_warning) {
    std::cerr << "warning: " << label << ": " << scores.imposter.size()
              << " imposter scores cannot resolve FMR target " << target_fmr << "\n";
  }
  j["target_fmr"] = target_fmr;
  j["threshold"] = thr.tau;
  j["achieved_fmr"] = thr.achieved_fmr;
  j["resolution_warning"] = thr.resolution_warning;
  j["accuracy"] = eval::pair_accuracy(scores, thr.tau);

  auto rates = eval::rates_at_threshold(scores, thr.tau);
  j["fmr"] = rates.fmr;
  j["fnmr"] = rates.fnmr;

  auto groups = eval::per_group_rates(scores, thr.tau);
  j["per_group"] = rates_json(groups);
  j["fdr"] = eval::fdr(groups);
  j["igarbe"] = eval::igarbe(groups);

  auto thr_1e3 = eval::threshold_at_fmr(scores, 1e-3);
  j["fnmr_at_fmr_1e3"] = eval::rates_at_threshold(scores, thr_1e3.tau).fnmr;
  j["fmr_1e3_resolution_warning"] = thr_1e3.resolution_warning;

  json curve = json::array();
  std::size_t stride = std::max<std::size_t>(1, roc.curve.size() / roc_max_points);
  for (std::size_t i = 0; i < roc.curve.size(); i += stride) {
    curve.push_back({roc.curve[i].first, roc.curve[i].second});
  }
  j["roc"] = curve;
  return j;
}

}  // namespace detail

inline json cmd_evaluate(const config::RunConfig& cfg, const synth::Corpus& corpus,
                         const TemplateStore& store, const Paths& paths) {
  auto sets = build_score_sets(cfg, corpus, store);

  json report;
  report["config_digest"] = config::config_digest(cfg);
  report["master_seed"] = cfg.seed;
  report["counts"] = {{"templates", sets.n_templates},
                      {"probes", sets.n_probes},
                      {"genuine_pairs", sets.mote.genuine.size()},
                      {"imposter_pairs", sets.mote.imposter.size()},
                      {"imposter_pairs_total", sets.imposter_pairs_total}};
  report["mote"] = detail::system_metrics(sets.mote, cfg.eval.target_fmr,
                                          cfg.eval.roc_max_points, "mote");
  report["baseline"] = detail::system_metrics(sets.baseline, cfg.eval.target_fmr,
                                              cfg.eval.roc_max_points, "baseline");

  // Efficiency block: deterministic sizes plus annotated wall-clock
  // timings (mean enrollment seconds from the log, mean scoring cost
  // over every probe scored here).
  std::uint64_t stored_bytes = 0;
  auto ids = store.list();
  if (!ids.empty()) {
    stored_bytes = std::filesystem::file_size(store.template_path(ids.front()));
  }
  double mean_enroll = 0.0, std_enroll = 0.0;
  std::size_t log_lines = 0;
  if (std::filesystem::exists(store.log_path())) {
    std::ifstream log(store.log_path());
    std::string line;
    double sum = 0.0, sum_sq = 0.0;
    while (std::getline(log, line)) {
      if (line.empty()) continue;
      auto entry = json::parse(line);
      double s = entry.at("timing").at("seconds").get<double>();
      sum += s;
      sum_sq += s * s;
      ++log_lines;
    }
    if (log_lines > 0) {
      mean_enroll = sum / static_cast<double>(log_lines);
      if (log_lines > 1) {
        std_enroll = std::sqrt(std::max(
            0.0, (sum_sq - sum * sum / static_cast<double>(log_lines)) /
                     static_cast<double>(log_lines - 1)));
      }
    }
  }
  report["efficiency"] = {
      {"storage_bytes_per_identity", stored_bytes},
      {"payload_bytes_per_identity",
       4 * ModelTemplate::weight_count(kTemplateLayerDims)},
      {"timing",
       {{"mean_enroll_seconds", mean_enroll},
        {"std_enroll_seconds", std_enroll},
        {"enrollments_logged", log_lines},
        {"mean_score_ms",
         sets.mote_scores_computed > 0
             ? 1e3 * sets.mote_scoring_seconds /
                   static_cast<double>(sets.mote_scores_computed)
             : 0.0}}}};

  write_json(report, paths.report());

  std::ofstream roc_file(paths.roc_csv(), std::ios::trunc);
  roc_file << "fmr,fnmr\n";
  roc_file.precision(17);
  for (const auto& [fmr, fnmr] : eval::roc_auc(sets.mote).curve) {
    roc_file << fmr << "," << fnmr << "\n";
  }
  return report;
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

/// Seeded gallery of known-attribute auxiliary samples.
inline attack::AttackGallery build_gallery(const config::RunConfig& cfg,
                                           const enroll::AuxiliaryData& aux) {
  attack::AttackGallery g;
  Rng rng(mix_seed(cfg.seed, fnv1a64("attack-gallery")));
  auto pick = [&](const std::vector<std::size_t>& rows, std::vector<Embedding>& sink) {
    std::vector<std::size_t> order = rows;
    rng.shuffle(order);
    std::size_t take = std::min<std::size_t>(cfg.attack.gallery_per_gender, order.size());
    for (std::size_t i = 0; i < take; ++i) sink.push_back(aux.embeddings[order[i]]);
  };
  pick(aux.female_rows, g.female);
  pick(aux.male_rows, g.male);
  return g;
}

inline json cmd_attack(const config::RunConfig& cfg, const synth::Corpus& corpus,
                       const TemplateStore& store, const Paths& paths) {
  auto aux = enroll::build_auxiliary(corpus);
  if (aux.empty()) throw MissingArtifact("corpus has no Auxiliary rows for the gallery");
  auto gallery = build_gallery(cfg, aux);

  auto references = corpus.manifest.reference_rows();
  auto attr_of = corpus.manifest.attribute_by_identity();
  auto ids = store.list();
  if (ids.empty()) throw MissingArtifact("template store is empty (run enroll first)");

  std::map<IdentityId, Embedding> targets;
  std::map<IdentityId, ModelTemplate> templates;
  std::map<IdentityId, Attribute> truth;
  for (const auto& id : ids) {
    auto it = references.find(id);
    if (it == references.end()) continue;
    targets.emplace(id, corpus.embeddings[it->second]);
    templates.emplace(id, store.load(id));
    truth.emplace(id, attr_of.at(id));
  }

  auto baseline = attack::attack_vector_baseline(targets, gallery, truth);
  auto mote_result = attack::attack_mote(templates, gallery, truth);

  auto result_json = [](const attack::AttackResult& r) {
    json predictions;
    for (const auto& [id, a] : r.predictions) predictions[id] = to_string(a);
    return json{{"balanced_accuracy", r.balanced_accuracy},
                {"histogram",
                 {{"Female", r.histogram.at(Attribute::Female)},
                  {"Male", r.histogram.at(Attribute::Male)}}},
                {"predictions", predictions}};
  };

  json j;
  j["config_digest"] = config::config_digest(cfg);
  j["master_seed"] = cfg.seed;
  j["gallery"] = {{"female", gallery.female.size()}, {"male", gallery.male.size()}};
  j["baseline"] = result_json(baseline);
  j["mote"] = result_json(mote_result);
  write_json(j, paths.attack_json());

  // Attack results also land in the evaluation report when one exists.
  if (std::filesystem::exists(paths.report())) {
    json report = read_json(paths.report());
    report["attack"] = j;
    write_json(report, paths.report());
  }
  return j;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

inline json cmd_bench(const config::RunConfig& cfg, const synth::Corpus& corpus,
                      const Paths& paths) {
  auto aux = enroll::build_auxiliary(corpus);
  auto kdes = fit_kdes(cfg, aux);
  auto references = corpus.manifest.reference_rows();
  if (references.empty()) throw MissingArtifact("corpus has no Enroll-split identities");

  json per_identity = json::array();
  double overall_sum = 0.0, overall_sq = 0.0;
  std::size_t overall_n = 0;
  std::size_t taken = 0;

  for (const auto& [id, row] : references) {
    if (taken >= cfg.bench.identities) break;
    ++taken;
    double sum = 0.0, sum_sq = 0.0;
    for (std::uint32_t rep = 0; rep < cfg.bench.repeats; ++rep) {
      auto result = enroll::enroll_identity(corpus.embeddings[row], id, kdes, aux,
                                            cfg.enroll, cfg.seed, nullptr);
      sum += result.wall_time_seconds;
      sum_sq += result.wall_time_seconds * result.wall_time_seconds;
    }
    double n = static_cast<double>(cfg.bench.repeats);
    double mean = sum / n;
    double stddev =
        n > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1))) : 0.0;
    per_identity.push_back({{"identity", id},
                            {"repeats", cfg.bench.repeats},
                            {"timing", {{"mean_seconds", mean}, {"std_seconds", stddev}}}});
    overall_sum += sum;
    overall_sq += sum_sq;
    overall_n += cfg.bench.repeats;
  }

  double n = static_cast<double>(overall_n);
  json j;
  j["config_digest"] = config::config_digest(cfg);
  j["master_seed"] = cfg.seed;
  j["identities_benchmarked"] = taken;
  j["per_identity"] = per_identity;
  j["timing"] = {
      {"mean_enroll_seconds", overall_sum / n},
      {"std_enroll_seconds",
       overall_n > 1
           ? std::sqrt(std::max(0.0, (overall_sq - overall_sum * overall_sum / n) / (n - 1)))
           : 0.0}};
  write_json(j, paths.bench_json());
  return j;
}

}  // namespace mote::pipeline
