#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "mote/attack.hpp"
#include "mote/synth.hpp"

using namespace mote;
using Catch::Approx;

namespace {

attack::AttackGallery gallery_from_corpus(const synth::Corpus& corpus,
                                          std::size_t per_gender) {
  attack::AttackGallery g;
  for (const auto& r : corpus.manifest.rows) {
    if (r.split != Split::Auxiliary) continue;
    auto& side = (r.attribute == Attribute::Female) ? g.female : g.male;
    if (side.size() < per_gender) side.push_back(corpus.embeddings[r.row]);
  }
  return g;
}

std::pair<std::map<IdentityId, Embedding>, std::map<IdentityId, Attribute>>
reference_targets(const synth::Corpus& corpus) {
  std::map<IdentityId, Embedding> targets;
  std::map<IdentityId, Attribute> truth;
  for (const auto& r : corpus.manifest.rows) {
    if (r.split != Split::Enroll) continue;
    targets.emplace(r.identity, corpus.embeddings[r.row]);
    truth.emplace(r.identity, r.attribute);
  }
  return {targets, truth};
}

}  // namespace

TEST_CASE("balanced accuracy arithmetic", "[attack]") {
  std::map<IdentityId, Attribute> truth = {{"a", Attribute::Female},
                                           {"b", Attribute::Female},
                                           {"c", Attribute::Male},
                                           {"d", Attribute::Male}};

  SECTION("all correct") {
    CHECK(attack::balanced_accuracy(truth, truth) == 1.0);
  }

  SECTION("single-class predictions on balanced truth") {
    std::map<IdentityId, Attribute> pred;
    for (const auto& [id, a] : truth) pred[id] = Attribute::Female;
    CHECK(attack::balanced_accuracy(pred, truth) == 0.5);
  }

  SECTION("recalls 0.8 and 0.6 average to 0.7") {
    std::map<IdentityId, Attribute> big_truth, pred;
    for (int i = 0; i < 5; ++i) {
      IdentityId id = "f" + std::to_string(i);
      big_truth[id] = Attribute::Female;
      pred[id] = i < 4 ? Attribute::Female : Attribute::Male;  // recall 0.8
    }
    for (int i = 0; i < 5; ++i) {
      IdentityId id = "m" + std::to_string(i);
      big_truth[id] = Attribute::Male;
      pred[id] = i < 3 ? Attribute::Male : Attribute::Female;  // recall 0.6
    }
    CHECK(attack::balanced_accuracy(pred, big_truth) == Approx(0.7).margin(1e-12));
  }

  SECTION("missing truth label") {
    std::map<IdentityId, Attribute> pred = {{"zz", Attribute::Female}};
    CHECK_THROWS_AS(attack::balanced_accuracy(pred, truth), attack::MissingTruth);
  }
}

TEST_CASE("vector baseline recovers gender on the signal corpus", "[attack]") {
  auto corpus = synth::gen_corpus({.n_identities = 80,
                                   .samples_per_identity = 4,
                                   .dim = 512,
                                   .identity_spread = 0.05,
                                   .gender_offset = 0.5,
                                   .aux_fraction = 0.5,
                                   .seed = 777});
  auto gallery = gallery_from_corpus(corpus, 50);
  auto [targets, truth] = reference_targets(corpus);

  auto result = attack::attack_vector_baseline(targets, gallery, truth);
  CHECK(result.balanced_accuracy >= 0.85);
}

TEST_CASE("vector baseline is blind without a gender signal", "[attack]") {
  auto corpus = synth::gen_corpus({.n_identities = 220,
                                   .samples_per_identity = 3,
                                   .dim = 128,
                                   .identity_spread = 0.05,
                                   .gender_offset = 0.0,
                                   .aux_fraction = 0.35,
                                   .seed = 778});
  auto gallery = gallery_from_corpus(corpus, 60);
  auto [targets, truth] = reference_targets(corpus);
  REQUIRE(targets.size() >= 140);

  auto result = attack::attack_vector_baseline(targets, gallery, truth);
  CHECK(result.balanced_accuracy > 0.45);
  CHECK(result.balanced_accuracy < 0.55);
}

TEST_CASE("baseline predictions are invariant to positive rescaling", "[attack]") {
  auto corpus = synth::gen_corpus({.n_identities = 30,
                                   .samples_per_identity = 3,
                                   .dim = 64,
                                   .gender_offset = 0.3,
                                   .aux_fraction = 0.5,
                                   .seed = 779});
  auto gallery = gallery_from_corpus(corpus, 20);
  auto [targets, truth] = reference_targets(corpus);

  auto base = attack::attack_vector_baseline(targets, gallery, truth);
  auto scaled_targets = targets;
  for (auto& [id, e] : scaled_targets) {
    for (auto& v : e) v *= 37.5f;
  }
  auto scaled = attack::attack_vector_baseline(scaled_targets, gallery, truth);
  CHECK(base.predictions == scaled.predictions);
}

TEST_CASE("constant-score model templates collapse to one class", "[attack]") {
  auto corpus = synth::gen_corpus({.n_identities = 24,
                                   .samples_per_identity = 3,
                                   .dim = 512,
                                   .aux_fraction = 0.5,
                                   .seed = 780});
  auto gallery = gallery_from_corpus(corpus, 10);

  std::map<IdentityId, ModelTemplate> templates;
  std::map<IdentityId, Attribute> truth;
  for (const auto& r : corpus.manifest.rows) {
    if (r.split != Split::Enroll) continue;
    ModelTemplate t;
    t.identity = r.identity;
    t.weights.assign(t.expected_weight_count(), 0.0f);  // constant 0.5 score
    t.train_config_digest = "0";
    templates.emplace(r.identity, std::move(t));
    truth.emplace(r.identity, r.attribute);
  }

  auto result = attack::attack_mote(templates, gallery, truth);
  CHECK(result.balanced_accuracy == 0.5);
  std::size_t total = result.histogram.at(Attribute::Female) +
                      result.histogram.at(Attribute::Male);
  CHECK(result.histogram.at(Attribute::Female) == total);
}

TEST_CASE("empty galleries are rejected", "[attack]") {
  attack::AttackGallery g;
  g.female.push_back(Embedding(8, 0.1f));
  std::map<IdentityId, Embedding> targets = {{"a", Embedding(8, 0.2f)}};
  std::map<IdentityId, Attribute> truth = {{"a", Attribute::Female}};
  CHECK_THROWS_AS(attack::attack_vector_baseline(targets, g, truth), attack::EmptyGallery);
}
