#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "mote/common.hpp"
#include "mote/linalg.hpp"
#include "mote/store.hpp"
#include "mote/types.hpp"

namespace mote::synth {

struct DegenerateConfig : Error {
  explicit DegenerateConfig(const std::string& msg) : Error("DegenerateConfig", msg) {}
};

/// Parameters of the synthetic, attribute-correlated embedding corpus.
/// Identity centroids live on the unit hypersphere, shifted along a fixed
/// gender direction; samples add isotropic Gaussian noise and are then
/// L2-normalized, mirroring angular-margin face embeddings.
///
/// identity_spread is the magnitude of the within-identity noise: the
/// isotropic Gaussian has per-dimension std identity_spread/sqrt(dim),
/// so the expected noise norm equals identity_spread independent of dim.
struct SynthConfig {
  std::uint32_t n_identities = 200;
  std::uint32_t samples_per_identity = 10;
  std::uint32_t dim = 512;
  double male_fraction = 0.5;
  double identity_spread = 0.05;
  double gender_offset = 0.5;
  double aux_fraction = 0.4;
  std::uint64_t seed = 42;

  bool operator==(const SynthConfig&) const = default;

  void validate() const {
    if (n_identities == 0) throw DegenerateConfig("n_identities must be positive");
    if (samples_per_identity == 0) {
      throw DegenerateConfig("samples_per_identity must be positive");
    }
    if (dim == 0) throw DegenerateConfig("dim must be positive");
    if (!(male_fraction >= 0.0 && male_fraction <= 1.0)) {
      throw DegenerateConfig("male_fraction outside [0,1]");
    }
    if (!(identity_spread > 0.0)) throw DegenerateConfig("identity_spread must be > 0");
    if (gender_offset < 0.0) throw DegenerateConfig("gender_offset must be >= 0");
    if (!(aux_fraction >= 0.0 && aux_fraction <= 1.0)) {
      throw DegenerateConfig("aux_fraction outside [0,1]");
    }
    auto n_aux = static_cast<std::uint32_t>(round_half_even(aux_fraction * n_identities));
    if (n_aux < n_identities && samples_per_identity < 2) {
      throw DegenerateConfig(
          "enroll identities need at least 2 samples (reference + probe)");
    }
  }
};

struct Corpus {
  std::uint32_t dim = 0;
  std::vector<Embedding> embeddings;
  DatasetManifest manifest;
};

/// Generates the corpus deterministically from cfg. Per-identity RNG
/// streams are derived from the master seed so generation order (or a
/// future parallel implementation) cannot change the output.
inline Corpus gen_corpus(const SynthConfig& cfg) {
  cfg.validate();
  const std::uint32_t n = cfg.n_identities;
  Rng master(cfg.seed);

  // Gender assignment: exactly round(male_fraction * n) males, placement
  // shuffled across identity indices.
  auto n_male = static_cast<std::size_t>(round_half_even(cfg.male_fraction * n));
  std::vector<Attribute> attrs(n, Attribute::Female);
  for (std::size_t i = 0; i < n_male && i < n; ++i) attrs[i] = Attribute::Male;
  master.shuffle(attrs);

  // Split assignment: round(aux_fraction * n) auxiliary identities.
  auto n_aux = static_cast<std::size_t>(round_half_even(cfg.aux_fraction * n));
  std::vector<bool> is_aux(n, false);
  for (std::size_t i = 0; i < n_aux && i < n; ++i) is_aux[i] = true;
  master.shuffle(is_aux);

  Corpus out;
  out.dim = cfg.dim;
  out.manifest.dim = cfg.dim;
  out.manifest.normalized = true;
  out.embeddings.reserve(static_cast<std::size_t>(n) * cfg.samples_per_identity);

  // The gender direction is the first basis vector; centroids are
  // otherwise uniform on the sphere, so this costs no generality.
  std::uint64_t row = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(cfg.seed, 0x1d377417ull ^ i));
    std::vector<double> centroid(cfg.dim);
    double norm2 = 0.0;
    for (auto& c : centroid) {
      c = rng.normal();
      norm2 += c * c;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (auto& c : centroid) c *= inv;
    centroid[0] += (attrs[i] == Attribute::Male ? cfg.gender_offset : -cfg.gender_offset);

    char name[16];
    std::snprintf(name, sizeof(name), "s%04u", i);
    IdentityId id(name);

    const double noise_sigma = cfg.identity_spread / std::sqrt(static_cast<double>(cfg.dim));
    for (std::uint32_t s = 0; s < cfg.samples_per_identity; ++s) {
      std::vector<double> v(cfg.dim);
      double n2 = 0.0;
      for (std::uint32_t k = 0; k < cfg.dim; ++k) {
        v[k] = centroid[k] + noise_sigma * rng.normal();
        n2 += v[k] * v[k];
      }
      double vinv = 1.0 / std::sqrt(n2);
      Embedding e(cfg.dim);
      for (std::uint32_t k = 0; k < cfg.dim; ++k) e[k] = static_cast<float>(v[k] * vinv);
      out.embeddings.push_back(std::move(e));

      ManifestRow r;
      r.row = row++;
      r.identity = id;
      r.attribute = attrs[i];
      if (is_aux[i]) {
        r.split = Split::Auxiliary;
      } else {
        r.split = (s == 0) ? Split::Enroll : Split::Probe;
      }
      out.manifest.rows.push_back(std::move(r));
    }
  }
  out.manifest.validate(out.embeddings.size());
  return out;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& emb_path,
                         const std::filesystem::path& manifest_path) {
  save_embedding_file(emb_path, corpus.dim, corpus.embeddings);
  save_manifest(corpus.manifest, manifest_path);
}

/// Loads and cross-validates an embedding file and its manifest,
/// including the unit-norm invariant when the manifest declares
/// normalized embeddings.
inline Corpus load_corpus(const std::filesystem::path& emb_path,
                          const std::filesystem::path& manifest_path) {
  Corpus out;
  auto file = load_embedding_file(emb_path);
  out.dim = file.dim;
  out.embeddings = std::move(file.embeddings);
  out.manifest = load_manifest(manifest_path);
  if (out.manifest.dim != out.dim) {
    throw ManifestError("manifest dim " + std::to_string(out.manifest.dim) +
                        " does not match embedding file dim " + std::to_string(out.dim));
  }
  out.manifest.validate(out.embeddings.size());
  if (out.manifest.normalized) {
    for (std::size_t i = 0; i < out.embeddings.size(); ++i) {
      double norm = l2_norm(std::span<const float>(out.embeddings[i]));
      if (std::abs(norm - 1.0) > 1e-4) {
        throw ManifestError("row " + std::to_string(i) +
                            " violates the declared unit-norm invariant");
      }
    }
  }
  return out;
}

}  // namespace mote::synth
