#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "mote/enroll.hpp"
#include "mote/synth.hpp"
#include "mote/verify.hpp"

using namespace mote;
using Catch::Approx;

namespace {

struct MiniPipeline {
  synth::Corpus corpus;
  enroll::AuxiliaryData aux;
  enroll::FittedKdes kdes;
  std::map<IdentityId, Embedding> references;
  std::map<IdentityId, Attribute> truth;
};

MiniPipeline make_pipeline(std::uint64_t seed = 4001) {
  MiniPipeline p;
  p.corpus = synth::gen_corpus({.n_identities = 16,
                                .samples_per_identity = 4,
                                .dim = 512,
                                .identity_spread = 0.05,
                                .gender_offset = 0.5,
                                .aux_fraction = 0.5,
                                .seed = seed});
  p.aux = enroll::build_auxiliary(p.corpus);
  p.kdes = enroll::fit_auxiliary_kdes(p.aux);
  for (const auto& [id, row] : p.corpus.manifest.reference_rows()) {
    p.references.emplace(id, p.corpus.embeddings[row]);
  }
  p.truth = p.corpus.manifest.attribute_by_identity();
  return p;
}

enroll::EnrollmentConfig fast_config() {
  enroll::EnrollmentConfig cfg;
  cfg.n_genuine_synth = 64;
  cfg.n_imposter = 64;
  cfg.train.max_epochs = 30;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("enrollment trains a separating template", "[enroll]") {
  auto p = make_pipeline();
  auto cfg = fast_config();
  const auto& [id, reference] = *p.references.begin();

  auto result = enroll::enroll_identity(reference, id, p.kdes, p.aux, cfg, /*seed=*/1);
  result.tmpl.validate();
  CHECK(result.tmpl.identity == id);
  CHECK(result.report.epochs_run >= 1);

  // The trained model must score its own reference above the average of
  // random auxiliary imposters.
  double ref_score = verify::score(result.tmpl, reference);
  Rng rng(2);
  double imposter_mean = 0.0;
  const std::size_t trials = 100;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto& probe = p.aux.embeddings[rng.index(p.aux.embeddings.size())];
    imposter_mean += verify::score(result.tmpl, probe);
  }
  imposter_mean /= trials;
  CHECK(ref_score > imposter_mean);
}

TEST_CASE("enrollment is deterministic and commutes across identities", "[enroll]") {
  auto p = make_pipeline();
  auto cfg = fast_config();

  auto it = p.references.begin();
  auto [id_a, ref_a] = *it++;
  auto [id_b, ref_b] = *it;

  auto dir1 = std::filesystem::temp_directory_path() / "mote_enroll_ab";
  auto dir2 = std::filesystem::temp_directory_path() / "mote_enroll_ba";
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);

  TemplateStore s1(dir1), s2(dir2);
  enroll::enroll_identity(ref_a, id_a, p.kdes, p.aux, cfg, 7, &s1);
  enroll::enroll_identity(ref_b, id_b, p.kdes, p.aux, cfg, 7, &s1);
  enroll::enroll_identity(ref_b, id_b, p.kdes, p.aux, cfg, 7, &s2);
  enroll::enroll_identity(ref_a, id_a, p.kdes, p.aux, cfg, 7, &s2);

  CHECK(slurp(s1.template_path(id_a)) == slurp(s2.template_path(id_a)));
  CHECK(slurp(s1.template_path(id_b)) == slurp(s2.template_path(id_b)));

  SECTION("re-enrollment without overwrite is rejected") {
    CHECK_THROWS_AS(enroll::enroll_identity(ref_a, id_a, p.kdes, p.aux, cfg, 7, &s1),
                    AlreadyEnrolled);
    cfg.overwrite = true;
    CHECK_NOTHROW(enroll::enroll_identity(ref_a, id_a, p.kdes, p.aux, cfg, 7, &s1));
  }
}

TEST_CASE("same seed gives identical template bytes", "[enroll]") {
  auto p = make_pipeline();
  auto cfg = fast_config();
  const auto& [id, reference] = *p.references.begin();

  auto r1 = enroll::enroll_identity(reference, id, p.kdes, p.aux, cfg, 99);
  auto r2 = enroll::enroll_identity(reference, id, p.kdes, p.aux, cfg, 99);
  CHECK(r1.tmpl == r2.tmpl);
}

TEST_CASE("enrollment needs auxiliary data", "[enroll]") {
  auto p = make_pipeline();
  auto cfg = fast_config();
  enroll::AuxiliaryData empty;
  const auto& [id, reference] = *p.references.begin();
  CHECK_THROWS_AS(enroll::enroll_identity(reference, id, p.kdes, empty, cfg, 1),
                  enroll::KdeUnavailable);
}

TEST_CASE("imposter sources are all usable", "[enroll]") {
  auto p = make_pipeline();
  auto cfg = fast_config();
  cfg.train.max_epochs = 5;
  const auto& [id, reference] = *p.references.begin();

  for (auto source : {enroll::ImposterSource::AuxiliaryRaw,
                      enroll::ImposterSource::SyntheticAroundAuxiliaryCentroids,
                      enroll::ImposterSource::Mixed}) {
    cfg.imposter_source = source;
    auto result = enroll::enroll_identity(reference, id, p.kdes, p.aux, cfg, 3);
    CHECK(result.tmpl.weights.size() == result.tmpl.expected_weight_count());
  }
}

TEST_CASE("verification decisions", "[enroll]") {
  SECTION("zero-weight template scores one half everywhere") {
    ModelTemplate t;
    t.identity = "z";
    t.weights.assign(t.expected_weight_count(), 0.0f);
    t.train_config_digest = "0";
    Rng rng(5);
    for (int i = 0; i < 3; ++i) {
      Embedding probe(512);
      for (auto& v : probe) v = static_cast<float>(rng.normal());
      CHECK(verify::score(t, probe) == Approx(0.5));
    }
  }

  SECTION("scoring is deterministic") {
    auto p = make_pipeline();
    auto cfg = fast_config();
    cfg.train.max_epochs = 5;
    const auto& [id, reference] = *p.references.begin();
    auto r = enroll::enroll_identity(reference, id, p.kdes, p.aux, cfg, 11);
    CHECK(verify::score(r.tmpl, reference) == verify::score(r.tmpl, reference));
  }

  SECTION("threshold rule is boundary-inclusive") {
    CHECK(verify::decide(0.5, 0.5).outcome == verify::Outcome::Genuine);
    CHECK(verify::decide(0.4, 0.5).outcome == verify::Outcome::Impostor);
    CHECK(verify::decide(0.6, 0.5).outcome == verify::Outcome::Genuine);
  }

  SECTION("raising the threshold never admits an impostor") {
    for (double score : {0.1, 0.37, 0.5, 0.93}) {
      bool was_impostor = false;
      for (double tau = 0.05; tau <= 0.95; tau += 0.05) {
        bool impostor = verify::decide(score, tau).outcome == verify::Outcome::Impostor;
        if (was_impostor) CHECK(impostor);
        was_impostor = was_impostor || impostor;
      }
    }
  }
}
