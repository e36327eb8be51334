#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mote/common.hpp"
#include "mote/linalg.hpp"
#include "mote/net.hpp"
#include "mote/types.hpp"

namespace mote::attack {

struct EmptyGallery : Error {
  EmptyGallery() : Error("EmptyGallery", "attack gallery needs probes of both genders") {}
};

struct MissingTruth : Error {
  explicit MissingTruth(const IdentityId& id)
      : Error("MissingTruth", "no truth label for identity " + id) {}
};

/// Known-attribute auxiliary samples the adversary compares against.
struct AttackGallery {
  std::vector<Embedding> female;
  std::vector<Embedding> male;

  void require_valid() const {
    if (female.empty() || male.empty()) throw EmptyGallery();
  }
};

struct AttackResult {
  std::map<IdentityId, Attribute> predictions;
  double balanced_accuracy = 0.0;
  std::map<Attribute, std::size_t> histogram;
};

/// Mean of per-class recalls.
inline double balanced_accuracy(const std::map<IdentityId, Attribute>& predictions,
                                const std::map<IdentityId, Attribute>& truth) {
  std::map<Attribute, std::pair<std::size_t, std::size_t>> per_class;  // (hits, total)
  for (const auto& [id, predicted] : predictions) {
    auto it = truth.find(id);
    if (it == truth.end()) throw MissingTruth(id);
    auto& [hits, total] = per_class[it->second];
    hits += (predicted == it->second) ? 1 : 0;
    ++total;
  }
  if (per_class.empty()) throw MissingTruth("(no predictions)");
  double acc = 0.0;
  for (const auto& [attr, counts] : per_class) {
    acc += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return acc / static_cast<double>(per_class.size());
}

namespace detail {

/// Predicts the gender with the higher mean comparison score; exact ties
/// go to Female so a constant scorer degrades to a single-class
/// prediction rather than an arbitrary one.
inline AttackResult from_mean_scores(const std::map<IdentityId, std::pair<double, double>>& means,
                                     const std::map<IdentityId, Attribute>& truth) {
  AttackResult out;
  out.histogram[Attribute::Female] = 0;
  out.histogram[Attribute::Male] = 0;
  for (const auto& [id, fm] : means) {
    Attribute predicted = fm.second > fm.first ? Attribute::Male : Attribute::Female;
    out.predictions.emplace(id, predicted);
    ++out.histogram[predicted];
  }
  out.balanced_accuracy = balanced_accuracy(out.predictions, truth);
  return out;
}

}  // namespace detail

/// Inference attack on stored vector templates: cosine similarity of the
/// target against every gallery probe, decision by the higher per-gender
/// mean.
inline AttackResult attack_vector_baseline(const std::map<IdentityId, Embedding>& targets,
                                           const AttackGallery& gallery,
                                           const std::map<IdentityId, Attribute>& truth) {
  gallery.require_valid();
  std::map<IdentityId, std::pair<double, double>> means;
  for (const auto& [id, target] : targets) {
    double female = 0.0;
    for (const auto& p : gallery.female) {
      female += cosine_similarity(target, p);
    }
    female /= static_cast<double>(gallery.female.size());
    double male = 0.0;
    for (const auto& p : gallery.male) {
      male += cosine_similarity(target, p);
    }
    male /= static_cast<double>(gallery.male.size());
    means.emplace(id, std::pair{female, male});
  }
  return detail::from_mean_scores(means, truth);
}

/// The same attack adapted to model templates: the adversary only
/// observes the black-box scores of each stored classifier on the
/// gallery probes.
inline AttackResult attack_mote(const std::map<IdentityId, ModelTemplate>& templates,
                                const AttackGallery& gallery,
                                const std::map<IdentityId, Attribute>& truth) {
  gallery.require_valid();
  auto to_matrix = [](const std::vector<Embedding>& v) {
    Matrix<float> m(v.size(), v.empty() ? 0 : v[0].size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::copy(v[i].begin(), v[i].end(), m.row(i));
    }
    return m;
  };
  Matrix<float> female = to_matrix(gallery.female);
  Matrix<float> male = to_matrix(gallery.male);

  std::map<IdentityId, std::pair<double, double>> means;
  for (const auto& [id, tmpl] : templates) {
    net::Mlp<float> mlp = net::mlp_from_template(tmpl);
    auto mean_score = [&](const Matrix<float>& probes) {
      auto logits = net::forward_batch(mlp, probes, /*train_mode=*/false);
      double total = 0.0;
      for (float z : logits) total += net::sigmoid(static_cast<double>(z));
      return total / static_cast<double>(logits.size());
    };
    means.emplace(id, std::pair{mean_score(female), mean_score(male)});
  }
  return detail::from_mean_scores(means, truth);
}

}  // namespace mote::attack
