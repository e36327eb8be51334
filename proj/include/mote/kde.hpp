#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mote/common.hpp"
#include "mote/linalg.hpp"
#include "mote/types.hpp"

namespace mote::kde {

struct EmptyGroup : Error {
  explicit EmptyGroup(const std::string& msg) : Error("EmptyGroup", msg) {}
};

struct MissingCentroid : Error {
  explicit MissingCentroid(const IdentityId& id)
      : Error("MissingCentroid", "no centroid for identity " + id) {}
};

struct TooFewSamples : Error {
  explicit TooFewSamples(const std::string& msg) : Error("TooFewSamples", msg) {}
};

struct EmptyGrid : Error {
  EmptyGrid() : Error("EmptyGrid", "bandwidth grid is empty") {}
};

struct MissingKde : Error {
  explicit MissingKde(const std::string& msg) : Error("MissingKde", msg) {}
};

/// Attribute-conditioned density over identity-normalized residuals:
/// the stored residual rows plus one shared isotropic Gaussian bandwidth.
struct KdeModel {
  Attribute attribute = Attribute::Female;
  Matrix<float> residuals;
  double bandwidth = 0.0;
  std::uint32_t dim = 0;
};

/// Per-identity arithmetic mean of the group's embeddings.
inline std::map<IdentityId, Embedding> compute_centroids(
    std::span<const Embedding> embeddings, std::span<const IdentityId> identities) {
  if (embeddings.size() != identities.size()) {
    throw EmptyGroup("embedding and identity lists differ in length");
  }
  std::map<IdentityId, std::pair<std::vector<double>, std::size_t>> acc;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    auto& [sum, count] = acc[identities[i]];
    if (sum.empty()) sum.assign(embeddings[i].size(), 0.0);
    if (sum.size() != embeddings[i].size()) {
      throw EmptyGroup("inconsistent embedding lengths within identity " + identities[i]);
    }
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += embeddings[i][k];
    ++count;
  }
  if (acc.empty()) throw EmptyGroup("no embeddings to group");
  std::map<IdentityId, Embedding> out;
  for (auto& [id, sc] : acc) {
    auto& [sum, count] = sc;
    Embedding c(sum.size());
    for (std::size_t k = 0; k < sum.size(); ++k) {
      c[k] = static_cast<float>(sum[k] / static_cast<double>(count));
    }
    out.emplace(id, std::move(c));
  }
  return out;
}

struct TaggedResiduals {
  Matrix<float> values;
  std::vector<Attribute> attributes;
};

/// Subtracts each embedding's identity centroid. Rows keep the input
/// order; attribute tags come from the per-row attribute list.
inline TaggedResiduals normalize_residuals(std::span<const Embedding> embeddings,
                                           std::span<const IdentityId> identities,
                                           std::span<const Attribute> attributes,
                                           const std::map<IdentityId, Embedding>& centroids) {
  if (embeddings.empty()) throw EmptyGroup("no embeddings to normalize");
  if (embeddings.size() != identities.size() || embeddings.size() != attributes.size()) {
    throw EmptyGroup("embedding, identity and attribute lists differ in length");
  }
  TaggedResiduals out;
  std::size_t dim = embeddings[0].size();
  out.values = Matrix<float>(embeddings.size(), dim);
  out.attributes.assign(attributes.begin(), attributes.end());
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    auto it = centroids.find(identities[i]);
    if (it == centroids.end()) throw MissingCentroid(identities[i]);
    const Embedding& c = it->second;
    float* dst = out.values.row(i);
    for (std::size_t k = 0; k < dim; ++k) dst[k] = embeddings[i][k] - c[k];
  }
  return out;
}

inline Matrix<float> rows_with_attribute(const TaggedResiduals& r, Attribute a) {
  std::size_t count = 0;
  for (auto attr : r.attributes) count += (attr == a) ? 1 : 0;
  Matrix<float> out(count, r.values.cols);
  std::size_t next = 0;
  for (std::size_t i = 0; i < r.attributes.size(); ++i) {
    if (r.attributes[i] != a) continue;
    std::copy_n(r.values.row(i), r.values.cols, out.row(next++));
  }
  return out;
}

/// Mean per-dimension standard deviation of the residual rows; the
/// bandwidth grid is expressed in units of this scale.
inline double mean_dimension_stddev(const Matrix<float>& residuals) {
  if (residuals.rows < 2) throw TooFewSamples("need at least 2 residual rows");
  double total = 0.0;
  for (std::size_t k = 0; k < residuals.cols; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < residuals.rows; ++i) mean += residuals.at(i, k);
    mean /= static_cast<double>(residuals.rows);
    double var = 0.0;
    for (std::size_t i = 0; i < residuals.rows; ++i) {
      double d = residuals.at(i, k) - mean;
      var += d * d;
    }
    var /= static_cast<double>(residuals.rows - 1);
    total += std::sqrt(var);
  }
  return total / static_cast<double>(residuals.cols);
}

inline std::vector<double> log_spaced_grid(double lo, double hi, std::size_t count) {
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  double llo = std::log(lo);
  double lhi = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) /
                                 static_cast<double>(count - 1));
  }
  return grid;
}

/// Default cross-validation grid: 20 log-spaced bandwidths spanning
/// [0.05, 2] times the mean per-dimension residual scale.
inline std::vector<double> default_bandwidth_grid(const Matrix<float>& residuals,
                                                  std::size_t count = 20,
                                                  double lo_factor = 0.05,
                                                  double hi_factor = 2.0) {
  double sigma = mean_dimension_stddev(residuals);
  if (sigma <= 0.0) sigma = 1e-6;
  return log_spaced_grid(lo_factor * sigma, hi_factor * sigma, count);
}

namespace detail {

constexpr double kLogTwoPi = 1.8378770664093454836;

/// log f(x) = LSE_i(-||x - r_i||^2 / (2 h^2)) - log n - d log h - d/2 log 2pi,
/// optionally excluding rows of one fold. Evaluated from precomputed
/// squared distances. The exponents are shifted by the minimum distance
/// before scaling, so the leading term is exactly exp(0) and the sum can
/// never underflow to zero (immune to FMA contraction of a*b-c).
inline double log_density_from_sq(std::span<const double> sq, std::span<const int> folds,
                                  int excluded_fold, std::size_t dim, double h) {
  double inv = 1.0 / (2.0 * h * h);
  double dmin = std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  for (std::size_t j = 0; j < sq.size(); ++j) {
    if (!folds.empty() && folds[j] == excluded_fold) continue;
    ++n;
    dmin = std::min(dmin, sq[j]);
  }
  if (n == 0) return -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t j = 0; j < sq.size(); ++j) {
    if (!folds.empty() && folds[j] == excluded_fold) continue;
    sum += std::exp(-(sq[j] - dmin) * inv);
  }
  return -dmin * inv + std::log(sum) - std::log(static_cast<double>(n)) -
         static_cast<double>(dim) * std::log(h) -
         0.5 * static_cast<double>(dim) * kLogTwoPi;
}

}  // namespace detail

/// Log of the isotropic product-Gaussian kernel density at x, evaluated
/// in log space so it is finite for any finite query point.
inline double log_density(const KdeModel& model, std::span<const float> x) {
  std::vector<double> sq(model.residuals.rows);
  for (std::size_t i = 0; i < model.residuals.rows; ++i) {
    sq[i] = squared_distance(x.data(), model.residuals.row(i), model.dim);
  }
  return detail::log_density_from_sq(sq, {}, -1, model.dim, model.bandwidth);
}

inline double density(const KdeModel& model, std::span<const float> x) {
  return std::exp(log_density(model, x));
}

/// Fits the bandwidth by k-fold cross-validation: the grid value with the
/// highest mean held-out log-density wins, ties going to the smaller
/// bandwidth. Folds are assigned on a canonical (lexicographic) row
/// ordering so the selection is invariant to row permutations.
inline KdeModel fit_kde(Matrix<float> residuals, Attribute attribute, int cv_folds,
                        std::span<const double> bandwidth_grid) {
  if (bandwidth_grid.empty()) throw EmptyGrid();
  if (cv_folds < 2) throw TooFewSamples("need at least 2 cross-validation folds");
  const std::size_t n = residuals.rows;
  if (n < static_cast<std::size_t>(cv_folds)) {
    throw TooFewSamples("need at least " + std::to_string(cv_folds) +
                        " residual rows, got " + std::to_string(n));
  }
  for (float v : residuals.data) {
    if (!std::isfinite(v)) throw TooFewSamples("non-finite residual value");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(residuals.row(a), residuals.row(a) + residuals.cols,
                                        residuals.row(b), residuals.row(b) + residuals.cols);
  });
  std::vector<int> fold(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    fold[order[rank]] = static_cast<int>(rank % static_cast<std::size_t>(cv_folds));
  }

  // Pairwise squared distances are shared by every (fold, bandwidth)
  // combination; for n residual rows this is the dominant O(n^2 d) cost
  // and is paid once.
  Matrix<double> sq(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    sq.at(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = squared_distance(residuals.row(i), residuals.row(j), residuals.cols);
      sq.at(i, j) = d;
      sq.at(j, i) = d;
    }
  }

  double best_score = -std::numeric_limits<double>::infinity();
  double best_h = bandwidth_grid[0];
  for (double h : bandwidth_grid) {
    if (!(h > 0.0)) throw EmptyGrid();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += detail::log_density_from_sq({sq.row(i), n}, fold, fold[i],
                                           residuals.cols, h);
    }
    double score = total / static_cast<double>(n);
    if (score > best_score) {
      best_score = score;
      best_h = h;
    }
  }

  KdeModel model;
  model.attribute = attribute;
  model.dim = static_cast<std::uint32_t>(residuals.cols);
  model.residuals = std::move(residuals);
  model.bandwidth = best_h;
  return model;
}

/// Draws count samples: a uniformly chosen stored residual plus
/// Gaussian(0, h^2 I) noise.
inline Matrix<float> sample_residuals(const KdeModel& model, std::size_t count, Rng& rng) {
  Matrix<float> out(count, model.dim);
  for (std::size_t i = 0; i < count; ++i) {
    const float* base = model.residuals.row(rng.index(model.residuals.rows));
    float* dst = out.row(i);
    for (std::uint32_t k = 0; k < model.dim; ++k) {
      dst[k] = static_cast<float>(base[k] + model.bandwidth * rng.normal());
    }
  }
  return out;
}

/// Synthesizes training templates around a single reference embedding:
/// round-half-even(b * total) residuals from the male density, the rest
/// from the female one, each added to the reference. The output order is
/// shuffled deterministically.
inline std::vector<Embedding> synth_templates(const Embedding& reference,
                                              const KdeModel* female_kde,
                                              const KdeModel* male_kde, double balancing_factor,
                                              std::size_t total, Rng& rng) {
  if (total == 0) return {};
  auto n_male = static_cast<std::size_t>(round_half_even(balancing_factor * static_cast<double>(total)));
  n_male = std::min(n_male, total);
  std::size_t n_female = total - n_male;
  if (n_male > 0 && male_kde == nullptr) throw MissingKde("male KDE required");
  if (n_female > 0 && female_kde == nullptr) throw MissingKde("female KDE required");

  std::vector<Embedding> out;
  out.reserve(total);
  auto emit = [&](const KdeModel& model, std::size_t count) {
    if (model.dim != reference.size()) {
      throw MissingKde("KDE dimension does not match the reference embedding");
    }
    Matrix<float> res = sample_residuals(model, count, rng);
    for (std::size_t i = 0; i < count; ++i) {
      Embedding e(reference.size());
      const float* r = res.row(i);
      for (std::size_t k = 0; k < e.size(); ++k) e[k] = reference[k] + r[k];
      out.push_back(std::move(e));
    }
  };
  if (n_male > 0) emit(*male_kde, n_male);
  if (n_female > 0) emit(*female_kde, n_female);
  rng.shuffle(out);
  return out;
}

}  // namespace mote::kde
