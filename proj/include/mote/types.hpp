#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mote/common.hpp"

namespace mote {

/// One face sample as a fixed-length feature vector (512-d by default).
using Embedding = std::vector<float>;

/// Opaque identity token, unique within a corpus.
using IdentityId = std::string;

enum class Attribute { Female, Male };
enum class Split { Auxiliary, Enroll, Probe };

inline const char* to_string(Attribute a) {
  return a == Attribute::Female ? "Female" : "Male";
}

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Auxiliary: return "Auxiliary";
    case Split::Enroll: return "Enroll";
    default: return "Probe";
  }
}

struct ManifestError : Error {
  explicit ManifestError(const std::string& msg) : Error("ManifestError", msg) {}
};

inline Attribute attribute_from_string(const std::string& s) {
  if (s == "Female") return Attribute::Female;
  if (s == "Male") return Attribute::Male;
  throw ManifestError("unknown attribute label: " + s);
}

inline Split split_from_string(const std::string& s) {
  if (s == "Auxiliary") return Split::Auxiliary;
  if (s == "Enroll") return Split::Enroll;
  if (s == "Probe") return Split::Probe;
  throw ManifestError("unknown split label: " + s);
}

struct ManifestRow {
  std::uint64_t row = 0;
  IdentityId identity;
  Attribute attribute = Attribute::Female;
  Split split = Split::Auxiliary;

  bool operator==(const ManifestRow&) const = default;
};

/// Identity, attribute and split labels for every row of an embedding
/// file. The auxiliary population must be subject-disjoint from the
/// enrollment/probe population.
struct DatasetManifest {
  std::uint32_t dim = 0;
  bool normalized = false;
  std::vector<ManifestRow> rows;

  bool operator==(const DatasetManifest&) const = default;

  void validate(std::size_t embedding_count) const {
    if (dim == 0) throw ManifestError("dim must be positive");
    if (rows.size() != embedding_count) {
      throw ManifestError("manifest has " + std::to_string(rows.size()) +
                          " rows but embedding file has " +
                          std::to_string(embedding_count));
    }
    std::vector<bool> seen(rows.size(), false);
    std::map<IdentityId, Attribute> attr_of;
    std::set<IdentityId> aux_ids;
    std::set<IdentityId> test_ids;  // Enroll or Probe
    for (const auto& r : rows) {
      if (r.identity.empty()) throw ManifestError("empty identity token");
      if (r.row >= rows.size() || seen[r.row]) {
        throw ManifestError("row indices are not a permutation of 0.." +
                            std::to_string(rows.size() - 1));
      }
      seen[r.row] = true;
      auto [it, inserted] = attr_of.emplace(r.identity, r.attribute);
      if (!inserted && it->second != r.attribute) {
        throw ManifestError("identity " + r.identity +
                            " maps to conflicting attribute labels");
      }
      if (r.split == Split::Auxiliary) {
        aux_ids.insert(r.identity);
      } else {
        test_ids.insert(r.identity);
      }
    }
    for (const auto& id : aux_ids) {
      if (test_ids.count(id)) {
        throw ManifestError("identity " + id +
                            " appears in both Auxiliary and Enroll/Probe splits");
      }
    }
  }

  std::map<IdentityId, Attribute> attribute_by_identity() const {
    std::map<IdentityId, Attribute> out;
    for (const auto& r : rows) out.emplace(r.identity, r.attribute);
    return out;
  }

  /// Identities owning at least one Enroll row, with that row's index
  /// (the reference sample). Sorted by identity.
  std::map<IdentityId, std::uint64_t> reference_rows() const {
    std::map<IdentityId, std::uint64_t> out;
    for (const auto& r : rows) {
      if (r.split == Split::Enroll) out.emplace(r.identity, r.row);
    }
    return out;
  }
};

struct InvalidTemplate : Error {
  explicit InvalidTemplate(const std::string& msg) : Error("InvalidTemplate", msg) {}
};

/// The per-identity classifier as stored on disk: flat weights in layer
/// order (W1 row-major, b1, W2, b2, W3, b3) plus metadata.
struct ModelTemplate {
  IdentityId identity;
  std::array<std::uint32_t, 4> layer_dims{512, 128, 64, 1};
  std::vector<float> weights;
  float balancing_factor = 0.5f;
  std::string train_config_digest;

  bool operator==(const ModelTemplate&) const = default;

  static constexpr std::size_t weight_count(const std::array<std::uint32_t, 4>& d) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < d.size(); ++l) {
      n += static_cast<std::size_t>(d[l]) * d[l + 1] + d[l + 1];
    }
    return n;
  }

  std::size_t expected_weight_count() const { return weight_count(layer_dims); }

  void validate() const {
    if (identity.empty()) throw InvalidTemplate("identity must be nonempty");
    if (weights.size() != expected_weight_count()) {
      throw InvalidTemplate("weight vector has " + std::to_string(weights.size()) +
                            " entries, expected " +
                            std::to_string(expected_weight_count()));
    }
    for (float w : weights) {
      if (!std::isfinite(w)) throw InvalidTemplate("non-finite weight");
    }
    if (!(balancing_factor >= 0.0f && balancing_factor <= 1.0f)) {
      throw InvalidTemplate("balancing factor outside [0,1]");
    }
  }
};

}  // namespace mote
