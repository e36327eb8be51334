#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>

#include "mote/linalg.hpp"
#include "mote/synth.hpp"

using namespace mote;
using synth::SynthConfig;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "mote_synth_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

/// Nearest-gender-mean oracle: classify each identity's centroid against
/// the two gender means computed from all other identities' samples.
double gender_classifier_balanced_accuracy(const synth::Corpus& corpus) {
  std::map<IdentityId, std::pair<std::vector<double>, std::size_t>> by_id;
  std::map<IdentityId, Attribute> attr;
  for (const auto& r : corpus.manifest.rows) {
    auto& [sum, count] = by_id[r.identity];
    if (sum.empty()) sum.assign(corpus.dim, 0.0);
    const Embedding& e = corpus.embeddings[r.row];
    for (std::size_t k = 0; k < e.size(); ++k) sum[k] += e[k];
    ++count;
    attr.emplace(r.identity, r.attribute);
  }

  std::vector<double> female_sum(corpus.dim, 0.0), male_sum(corpus.dim, 0.0);
  std::size_t female_n = 0, male_n = 0;
  for (const auto& [id, sc] : by_id) {
    auto& sum = sc.first;
    if (attr.at(id) == Attribute::Female) {
      for (std::size_t k = 0; k < sum.size(); ++k) female_sum[k] += sum[k] / sc.second;
      ++female_n;
    } else {
      for (std::size_t k = 0; k < sum.size(); ++k) male_sum[k] += sum[k] / sc.second;
      ++male_n;
    }
  }

  std::map<Attribute, std::pair<std::size_t, std::size_t>> per_class;
  for (const auto& [id, sc] : by_id) {
    // Leave-one-out gender means so the oracle is unbiased.
    std::vector<double> centroid(corpus.dim);
    for (std::size_t k = 0; k < corpus.dim; ++k) centroid[k] = sc.first[k] / sc.second;
    bool is_female = attr.at(id) == Attribute::Female;
    double df = 0.0, dm = 0.0;
    for (std::size_t k = 0; k < corpus.dim; ++k) {
      double fmean = (female_sum[k] - (is_female ? centroid[k] : 0.0)) /
                     static_cast<double>(female_n - (is_female ? 1 : 0));
      double mmean = (male_sum[k] - (is_female ? 0.0 : centroid[k])) /
                     static_cast<double>(male_n - (is_female ? 0 : 1));
      df += (centroid[k] - fmean) * (centroid[k] - fmean);
      dm += (centroid[k] - mmean) * (centroid[k] - mmean);
    }
    Attribute predicted = df <= dm ? Attribute::Female : Attribute::Male;
    auto& [hits, total] = per_class[attr.at(id)];
    hits += (predicted == attr.at(id)) ? 1 : 0;
    ++total;
  }
  double acc = 0.0;
  for (const auto& [a, counts] : per_class) {
    acc += static_cast<double>(counts.first) / counts.second;
  }
  return acc / static_cast<double>(per_class.size());
}

}  // namespace

TEST_CASE("corpus generation is deterministic to the byte", "[synth]") {
  SynthConfig cfg{.n_identities = 12, .samples_per_identity = 4, .dim = 32, .seed = 99};
  auto c1 = synth::gen_corpus(cfg);
  auto c2 = synth::gen_corpus(cfg);

  auto p1 = temp_dir() / "d1.emb";
  auto p2 = temp_dir() / "d2.emb";
  auto m1 = temp_dir() / "d1.json";
  auto m2 = temp_dir() / "d2.json";
  synth::write_corpus(c1, p1, m1);
  synth::write_corpus(c2, p2, m2);

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  };
  CHECK(slurp(p1) == slurp(p2));
  CHECK(slurp(m1) == slurp(m2));
}

TEST_CASE("male identity count follows the configured fraction", "[synth]") {
  for (double fraction : {0.0, 0.3, 0.5, 0.77, 1.0}) {
    SynthConfig cfg{.n_identities = 41,
                    .samples_per_identity = 2,
                    .dim = 8,
                    .male_fraction = fraction,
                    .seed = 3};
    auto corpus = synth::gen_corpus(cfg);
    std::map<IdentityId, Attribute> attr;
    for (const auto& r : corpus.manifest.rows) attr.emplace(r.identity, r.attribute);
    std::size_t males = 0;
    for (const auto& [id, a] : attr) males += (a == Attribute::Male) ? 1 : 0;
    CHECK(males == static_cast<std::size_t>(round_half_even(fraction * 41)));
  }
}

TEST_CASE("all embeddings are unit length", "[synth]") {
  auto corpus = synth::gen_corpus({.n_identities = 10,
                                   .samples_per_identity = 3,
                                   .dim = 64,
                                   .identity_spread = 0.4,
                                   .seed = 5});
  for (const auto& e : corpus.embeddings) {
    CHECK(std::abs(l2_norm(std::span<const float>(e)) - 1.0) < 1e-4);
  }
}

TEST_CASE("zero-noise limit collapses each identity to one point", "[synth]") {
  auto corpus = synth::gen_corpus({.n_identities = 5,
                                   .samples_per_identity = 4,
                                   .dim = 16,
                                   .identity_spread = 1e-12,
                                   .seed = 11});
  std::map<IdentityId, Embedding> first;
  for (const auto& r : corpus.manifest.rows) {
    const Embedding& e = corpus.embeddings[r.row];
    auto [it, inserted] = first.emplace(r.identity, e);
    if (!inserted) {
      for (std::size_t k = 0; k < e.size(); ++k) {
        CHECK(std::abs(e[k] - it->second[k]) < 1e-6f);
      }
    }
  }
}

TEST_CASE("no gender offset means no linearly recoverable gender", "[synth]") {
  auto corpus = synth::gen_corpus({.n_identities = 200,
                                   .samples_per_identity = 3,
                                   .dim = 64,
                                   .identity_spread = 0.05,
                                   .gender_offset = 0.0,
                                   .seed = 2024});
  double acc = gender_classifier_balanced_accuracy(corpus);
  CHECK(acc > 0.45);
  CHECK(acc < 0.55);
}

TEST_CASE("default gender offset is linearly recoverable", "[synth]") {
  auto corpus = synth::gen_corpus({.n_identities = 60,
                                   .samples_per_identity = 4,
                                   .dim = 512,
                                   .identity_spread = 0.05,
                                   .gender_offset = 0.5,
                                   .seed = 2025});
  CHECK(gender_classifier_balanced_accuracy(corpus) >= 0.95);
}

TEST_CASE("split structure: references, probes and disjoint auxiliary", "[synth]") {
  auto corpus = synth::gen_corpus({.n_identities = 20,
                                   .samples_per_identity = 5,
                                   .dim = 8,
                                   .aux_fraction = 0.4,
                                   .seed = 21});
  corpus.manifest.validate(corpus.embeddings.size());

  std::map<IdentityId, std::size_t> enroll_rows, probe_rows, aux_rows;
  for (const auto& r : corpus.manifest.rows) {
    if (r.split == Split::Enroll) ++enroll_rows[r.identity];
    if (r.split == Split::Probe) ++probe_rows[r.identity];
    if (r.split == Split::Auxiliary) ++aux_rows[r.identity];
  }
  CHECK(aux_rows.size() == 8);
  CHECK(enroll_rows.size() == 12);
  for (const auto& [id, n] : enroll_rows) {
    CHECK(n == 1);
    CHECK(probe_rows.at(id) == 4);
  }
}

TEST_CASE("degenerate configurations are rejected", "[synth]") {
  CHECK_THROWS_AS(synth::gen_corpus({.n_identities = 4,
                                     .samples_per_identity = 1,
                                     .dim = 8,
                                     .aux_fraction = 0.5,
                                     .seed = 1}),
                  synth::DegenerateConfig);
  CHECK_THROWS_AS(synth::gen_corpus({.n_identities = 4,
                                     .samples_per_identity = 3,
                                     .dim = 8,
                                     .identity_spread = 0.0,
                                     .seed = 1}),
                  synth::DegenerateConfig);
}

TEST_CASE("written corpus loads back with norm validation", "[synth]") {
  auto corpus = synth::gen_corpus({.n_identities = 6,
                                   .samples_per_identity = 3,
                                   .dim = 16,
                                   .seed = 31});
  auto emb = temp_dir() / "load.emb";
  auto man = temp_dir() / "load.json";
  synth::write_corpus(corpus, emb, man);
  auto loaded = synth::load_corpus(emb, man);
  CHECK(loaded.manifest == corpus.manifest);
  CHECK(loaded.embeddings == corpus.embeddings);
}
