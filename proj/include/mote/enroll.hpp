#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mote/common.hpp"
#include "mote/kde.hpp"
#include "mote/net.hpp"
#include "mote/store.hpp"
#include "mote/synth.hpp"
#include "mote/types.hpp"

namespace mote::enroll {

struct KdeUnavailable : Error {
  explicit KdeUnavailable(const std::string& msg) : Error("KdeUnavailable", msg) {}
};

enum class ImposterSource { AuxiliaryRaw, SyntheticAroundAuxiliaryCentroids, Mixed };

inline const char* to_string(ImposterSource s) {
  switch (s) {
    case ImposterSource::AuxiliaryRaw: return "AuxiliaryRaw";
    case ImposterSource::SyntheticAroundAuxiliaryCentroids:
      return "SyntheticAroundAuxiliaryCentroids";
    default: return "Mixed";
  }
}

inline ImposterSource imposter_source_from_string(const std::string& s) {
  if (s == "AuxiliaryRaw") return ImposterSource::AuxiliaryRaw;
  if (s == "SyntheticAroundAuxiliaryCentroids") {
    return ImposterSource::SyntheticAroundAuxiliaryCentroids;
  }
  if (s == "Mixed") return ImposterSource::Mixed;
  throw Error("ConfigParse", "unknown imposter source: " + s);
}

struct EnrollmentConfig {
  double balancing_factor = 0.5;
  std::uint32_t n_genuine_synth = 512;
  std::uint32_t n_imposter = 512;
  ImposterSource imposter_source = ImposterSource::Mixed;
  net::TrainConfig train;
  bool overwrite = false;

  bool operator==(const EnrollmentConfig&) const = default;

  void validate() const {
    if (!(balancing_factor >= 0.0 && balancing_factor <= 1.0)) {
      throw Error("ConfigParse", "balancing_factor outside [0,1]");
    }
    if (static_cast<double>(n_genuine_synth) < 2.0 / train.validation_fraction) {
      throw Error("ConfigParse",
                  "n_genuine_synth too small for a nonempty validation split");
    }
    if (n_imposter < 1) throw Error("ConfigParse", "n_imposter must be >= 1");
    train.validate();
  }
};

/// Auxiliary-split material shared by every enrollment: raw rows with
/// attributes, per-identity centroids and the identity lists per gender.
struct AuxiliaryData {
  std::vector<Embedding> embeddings;
  std::vector<Attribute> attributes;
  std::vector<IdentityId> identities;
  std::map<IdentityId, Embedding> centroids;
  std::vector<std::size_t> female_rows;
  std::vector<std::size_t> male_rows;
  std::vector<IdentityId> female_identities;
  std::vector<IdentityId> male_identities;

  bool empty() const { return embeddings.empty(); }
};

inline AuxiliaryData build_auxiliary(const synth::Corpus& corpus) {
  AuxiliaryData aux;
  for (const auto& r : corpus.manifest.rows) {
    if (r.split != Split::Auxiliary) continue;
    aux.embeddings.push_back(corpus.embeddings[r.row]);
    aux.attributes.push_back(r.attribute);
    aux.identities.push_back(r.identity);
    if (r.attribute == Attribute::Female) {
      aux.female_rows.push_back(aux.embeddings.size() - 1);
    } else {
      aux.male_rows.push_back(aux.embeddings.size() - 1);
    }
  }
  if (aux.empty()) return aux;
  aux.centroids = kde::compute_centroids(aux.embeddings, aux.identities);
  std::map<IdentityId, Attribute> attr_of;
  for (std::size_t i = 0; i < aux.identities.size(); ++i) {
    attr_of.emplace(aux.identities[i], aux.attributes[i]);
  }
  for (const auto& [id, attr] : attr_of) {
    (attr == Attribute::Female ? aux.female_identities : aux.male_identities).push_back(id);
  }
  return aux;
}

/// Fits the two attribute KDEs from the auxiliary split (centroids,
/// residuals, attribute split, cross-validated bandwidth).
struct FittedKdes {
  kde::KdeModel female;
  kde::KdeModel male;
};

inline FittedKdes fit_auxiliary_kdes(const AuxiliaryData& aux, int cv_folds = 5,
                                     std::size_t grid_size = 20, double grid_lo = 0.05,
                                     double grid_hi = 2.0) {
  if (aux.empty()) throw KdeUnavailable("auxiliary split is empty");
  if (aux.female_rows.empty() || aux.male_rows.empty()) {
    throw KdeUnavailable("auxiliary split must contain both attribute groups");
  }
  auto residuals =
      kde::normalize_residuals(aux.embeddings, aux.identities, aux.attributes, aux.centroids);
  FittedKdes out;
  for (Attribute attr : {Attribute::Female, Attribute::Male}) {
    auto rows = kde::rows_with_attribute(residuals, attr);
    auto grid = kde::default_bandwidth_grid(rows, grid_size, grid_lo, grid_hi);
    auto model = kde::fit_kde(std::move(rows), attr, cv_folds, grid);
    (attr == Attribute::Female ? out.female : out.male) = std::move(model);
  }
  return out;
}

struct EnrollResult {
  ModelTemplate tmpl;
  net::TrainReport report;
  std::uint64_t stored_bytes = 0;
  double wall_time_seconds = 0.0;
};

/// Digest of the training configuration embedded in every template so
/// evaluation reports are self-describing.
inline std::string enrollment_digest(const EnrollmentConfig& cfg) {
  std::ostringstream ss;
  ss.precision(17);
  const auto& t = cfg.train;
  ss << "b=" << cfg.balancing_factor << ";ng=" << cfg.n_genuine_synth
     << ";ni=" << cfg.n_imposter << ";src=" << to_string(cfg.imposter_source)
     << ";ep=" << t.max_epochs << ";bs=" << t.batch_size << ";lr=" << t.lr_max
     << ";wd=" << t.weight_decay << ";b1=" << t.beta1 << ";b2=" << t.beta2
     << ";eps=" << t.epsilon << ";pat=" << t.early_stop_patience << ";md=" << t.min_delta
     << ";ps=" << t.pct_start << ";df=" << t.div_factor << ";fdf=" << t.final_div_factor
     << ";vf=" << t.validation_fraction;
  return to_hex(fnv1a64(ss.str()));
}

namespace detail {

/// Imposter pool with the configured source, attribute-balanced by the
/// same balancing factor as the genuine pool.
inline std::vector<Embedding> build_imposters(const AuxiliaryData& aux,
                                              const FittedKdes& kdes,
                                              const EnrollmentConfig& cfg, Rng& rng) {
  std::size_t n_raw = 0;
  std::size_t n_synth = 0;
  switch (cfg.imposter_source) {
    case ImposterSource::AuxiliaryRaw: n_raw = cfg.n_imposter; break;
    case ImposterSource::SyntheticAroundAuxiliaryCentroids: n_synth = cfg.n_imposter; break;
    case ImposterSource::Mixed:
      n_raw = cfg.n_imposter / 2;
      n_synth = cfg.n_imposter - n_raw;
      break;
  }

  std::vector<Embedding> out;
  out.reserve(cfg.n_imposter);

  auto raw_split = static_cast<std::size_t>(
      round_half_even(cfg.balancing_factor * static_cast<double>(n_raw)));
  raw_split = std::min(raw_split, n_raw);
  for (std::size_t i = 0; i < n_raw; ++i) {
    const auto& rows = (i < raw_split) ? aux.male_rows : aux.female_rows;
    if (rows.empty()) {
      throw KdeUnavailable("auxiliary split lacks one attribute group for imposters");
    }
    out.push_back(aux.embeddings[rows[rng.index(rows.size())]]);
  }

  auto synth_split = static_cast<std::size_t>(
      round_half_even(cfg.balancing_factor * static_cast<double>(n_synth)));
  synth_split = std::min(synth_split, n_synth);
  for (std::size_t i = 0; i < n_synth; ++i) {
    bool male = i < synth_split;
    const auto& ids = male ? aux.male_identities : aux.female_identities;
    const kde::KdeModel& model = male ? kdes.male : kdes.female;
    if (ids.empty()) {
      throw KdeUnavailable("auxiliary split lacks one attribute group for imposters");
    }
    const Embedding& centroid = aux.centroids.at(ids[rng.index(ids.size())]);
    Matrix<float> res = kde::sample_residuals(model, 1, rng);
    Embedding e(centroid.size());
    const float* r = res.row(0);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = centroid[k] + r[k];
    out.push_back(std::move(e));
  }
  rng.shuffle(out);
  return out;
}

}  // namespace detail

/// Full enrollment of one identity: synthesize the balanced genuine pool
/// around the single reference, assemble imposters, train the
/// personalized network, persist the template. Deterministic given the
/// master seed; the per-identity stream is derived from seed and
/// identity so enrollments commute.
inline EnrollResult enroll_identity(const Embedding& reference, const IdentityId& id,
                                    const FittedKdes& kdes, const AuxiliaryData& aux,
                                    const EnrollmentConfig& cfg, std::uint64_t master_seed,
                                    TemplateStore* store = nullptr) {
  cfg.validate();
  if (aux.empty()) throw KdeUnavailable("auxiliary split is empty");
  if (store != nullptr && !cfg.overwrite && store->exists(id)) throw AlreadyEnrolled(id);
  auto start = std::chrono::steady_clock::now();

  Rng rng(mix_seed(master_seed, fnv1a64(id)));

  std::vector<Embedding> genuine;
  try {
    genuine = kde::synth_templates(reference, &kdes.female, &kdes.male, cfg.balancing_factor,
                                   cfg.n_genuine_synth, rng);
  } catch (const kde::MissingKde& e) {
    throw KdeUnavailable(e.what());
  }
  genuine.push_back(reference);  // the only certified-genuine sample

  std::vector<Embedding> imposters = detail::build_imposters(aux, kdes, cfg, rng);

  net::TrainConfig train_cfg = cfg.train;
  train_cfg.seed = rng.next_u64();
  auto dims = std::vector<std::uint32_t>(kTemplateLayerDims.begin(), kTemplateLayerDims.end());
  auto mlp = net::Mlp<float>::initialized(dims, rng);
  net::TrainReport report = net::train(mlp, genuine, imposters, train_cfg);

  EnrollResult result;
  result.tmpl = net::template_from_mlp(std::move(mlp), id,
                                       static_cast<float>(cfg.balancing_factor),
                                       enrollment_digest(cfg));
  result.report = report;
  if (store != nullptr) {
    result.stored_bytes = store->save(result.tmpl, cfg.overwrite);
  }
  result.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace mote::enroll
