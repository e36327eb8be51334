#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mote/common.hpp"
#include "mote/types.hpp"

namespace mote::eval {

struct EmptyScoreSet : Error {
  explicit EmptyScoreSet(const std::string& msg) : Error("EmptyScoreSet", msg) {}
};

struct SingleGroup : Error {
  SingleGroup() : Error("SingleGroup", "fairness metrics need at least two groups") {}
};

struct ScoredPair {
  double score = 0.0;
  Attribute attribute = Attribute::Female;
};

/// Genuine and imposter comparison scores with attribute tags (the
/// attribute of the enrolled identity the comparison was made against).
struct ScoreSet {
  std::vector<ScoredPair> genuine;
  std::vector<ScoredPair> imposter;

  void require_nonempty() const {
    if (genuine.empty() || imposter.empty()) {
      throw EmptyScoreSet("score set needs both genuine and imposter scores");
    }
  }
};

struct Rates {
  double fmr = 0.0;
  double fnmr = 0.0;
};

/// fmr = fraction of imposter scores >= tau; fnmr = fraction of genuine
/// scores < tau.
inline Rates rates_at_threshold(const ScoreSet& s, double tau) {
  s.require_nonempty();
  std::size_t fm = 0;
  for (const auto& p : s.imposter) fm += (p.score >= tau) ? 1 : 0;
  std::size_t fnm = 0;
  for (const auto& p : s.genuine) fnm += (p.score < tau) ? 1 : 0;
  return {static_cast<double>(fm) / static_cast<double>(s.imposter.size()),
          static_cast<double>(fnm) / static_cast<double>(s.genuine.size())};
}

struct ThresholdResult {
  double tau = 0.5;
  double achieved_fmr = 0.0;
  bool resolution_warning = false;
};

/// Smallest candidate threshold whose FMR does not exceed the target.
/// Candidates are the midpoints between consecutive distinct imposter
/// scores plus one below the minimum and one above the maximum. Sets the
/// resolution warning when fewer than 1/target imposter scores exist.
inline ThresholdResult threshold_at_fmr(const ScoreSet& s, double target_fmr) {
  s.require_nonempty();
  if (!(target_fmr > 0.0 && target_fmr <= 1.0)) {
    throw EmptyScoreSet("target FMR must be in (0,1]");
  }
  std::vector<double> scores;
  scores.reserve(s.imposter.size());
  for (const auto& p : s.imposter) scores.push_back(p.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  std::vector<double> candidates;
  candidates.reserve(scores.size() + 1);
  candidates.push_back(scores.front() - 0.5 * std::max(1e-12, std::abs(scores.front()) * 1e-6));
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    candidates.push_back(0.5 * (scores[i] + scores[i + 1]));
  }
  candidates.push_back(scores.back() + 0.5 * std::max(1e-12, std::abs(scores.back()) * 1e-6));

  ThresholdResult out;
  out.resolution_warning =
      static_cast<double>(s.imposter.size()) < 1.0 / target_fmr;
  for (double tau : candidates) {
    double fmr = rates_at_threshold(s, tau).fmr;
    if (fmr <= target_fmr) {
      out.tau = tau;
      out.achieved_fmr = fmr;
      return out;
    }
  }
  // Unreachable: the top candidate always yields FMR 0.
  out.tau = candidates.back();
  out.achieved_fmr = 0.0;
  return out;
}

struct RocResult {
  std::vector<std::pair<double, double>> curve;  // (fmr, fnmr)
  double auc = 0.0;
};

/// Empirical ROC swept over all distinct scores; AUC by the rank
/// statistic (probability a random genuine outscores a random imposter,
/// ties counted one half) via midranks.
inline RocResult roc_auc(const ScoreSet& s) {
  s.require_nonempty();
  RocResult out;

  // AUC from midranks over the pooled sample.
  struct Tagged {
    double score;
    bool genuine;
  };
  std::vector<Tagged> pool;
  pool.reserve(s.genuine.size() + s.imposter.size());
  for (const auto& p : s.genuine) pool.push_back({p.score, true});
  for (const auto& p : s.imposter) pool.push_back({p.score, false});
  std::sort(pool.begin(), pool.end(),
            [](const Tagged& a, const Tagged& b) { return a.score < b.score; });
  double rank_sum_genuine = 0.0;
  std::size_t i = 0;
  while (i < pool.size()) {
    std::size_t j = i;
    while (j < pool.size() && pool[j].score == pool[i].score) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (pool[k].genuine) rank_sum_genuine += midrank;
    }
    i = j;
  }
  double ng = static_cast<double>(s.genuine.size());
  double ni = static_cast<double>(s.imposter.size());
  out.auc = (rank_sum_genuine - ng * (ng + 1.0) / 2.0) / (ng * ni);

  // Piecewise-constant curve over the distinct thresholds.
  std::vector<double> thresholds;
  thresholds.reserve(pool.size());
  for (const auto& t : pool) thresholds.push_back(t.score);
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<double> genuine_sorted, imposter_sorted;
  genuine_sorted.reserve(s.genuine.size());
  imposter_sorted.reserve(s.imposter.size());
  for (const auto& p : s.genuine) genuine_sorted.push_back(p.score);
  for (const auto& p : s.imposter) imposter_sorted.push_back(p.score);
  std::sort(genuine_sorted.begin(), genuine_sorted.end());
  std::sort(imposter_sorted.begin(), imposter_sorted.end());
  auto frac_below = [](const std::vector<double>& v, double tau) {
    auto it = std::lower_bound(v.begin(), v.end(), tau);
    return static_cast<double>(it - v.begin()) / static_cast<double>(v.size());
  };
  out.curve.reserve(thresholds.size());
  for (double tau : thresholds) {
    double fnmr = frac_below(genuine_sorted, tau);
    double fmr = 1.0 - frac_below(imposter_sorted, tau);
    out.curve.emplace_back(fmr, fnmr);
  }
  return out;
}

/// Fraction of correctly decided pairs at threshold tau.
inline double pair_accuracy(const ScoreSet& s, double tau) {
  s.require_nonempty();
  std::size_t correct = 0;
  for (const auto& p : s.genuine) correct += (p.score >= tau) ? 1 : 0;
  for (const auto& p : s.imposter) correct += (p.score < tau) ? 1 : 0;
  return static_cast<double>(correct) /
         static_cast<double>(s.genuine.size() + s.imposter.size());
}

/// Per-attribute (FMR, FNMR) at tau. Groups with no scores of one kind
/// are dropped from that rate's aggregation by reporting them as absent.
inline std::map<Attribute, Rates> per_group_rates(const ScoreSet& s, double tau) {
  s.require_nonempty();
  std::map<Attribute, std::pair<std::size_t, std::size_t>> imp;  // (over tau, total)
  std::map<Attribute, std::pair<std::size_t, std::size_t>> gen;  // (under tau, total)
  for (const auto& p : s.imposter) {
    auto& [over, total] = imp[p.attribute];
    over += (p.score >= tau) ? 1 : 0;
    ++total;
  }
  for (const auto& p : s.genuine) {
    auto& [under, total] = gen[p.attribute];
    under += (p.score < tau) ? 1 : 0;
    ++total;
  }
  std::map<Attribute, Rates> out;
  for (const auto& [attr, counts] : imp) {
    out[attr].fmr = static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  for (const auto& [attr, counts] : gen) {
    out[attr].fnmr = static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return out;
}

/// FDR = 1 - alpha * max |FMR_i - FMR_j| - (1 - alpha) * max |FNMR_i - FNMR_j|.
inline double fdr(const std::map<Attribute, Rates>& per_group, double alpha = 0.5) {
  if (per_group.size() < 2) throw SingleGroup();
  double max_fmr_gap = 0.0;
  double max_fnmr_gap = 0.0;
  for (auto a = per_group.begin(); a != per_group.end(); ++a) {
    for (auto b = std::next(a); b != per_group.end(); ++b) {
      max_fmr_gap = std::max(max_fmr_gap, std::abs(a->second.fmr - b->second.fmr));
      max_fnmr_gap = std::max(max_fnmr_gap, std::abs(a->second.fnmr - b->second.fnmr));
    }
  }
  return 1.0 - alpha * max_fmr_gap - (1.0 - alpha) * max_fnmr_gap;
}

/// Bias-corrected Gini coefficient, defined as 0 when the mean is 0.
inline double gini(std::span<const double> x) {
  std::size_t n = x.size();
  if (n < 2) throw SingleGroup();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  if (mean == 0.0) return 0.0;
  double abs_diff_sum = 0.0;
  for (double a : x)
    for (double b : x) abs_diff_sum += std::abs(a - b);
  double g = abs_diff_sum / (2.0 * static_cast<double>(n) * static_cast<double>(n) * mean);
  return g * static_cast<double>(n) / static_cast<double>(n - 1);
}

/// iGARBE = 1 - (alpha * G(FMRs) + (1 - alpha) * G(FNMRs)).
inline double igarbe(const std::map<Attribute, Rates>& per_group, double alpha = 0.5) {
  if (per_group.size() < 2) throw SingleGroup();
  std::vector<double> fmrs, fnmrs;
  for (const auto& [attr, r] : per_group) {
    fmrs.push_back(r.fmr);
    fnmrs.push_back(r.fnmr);
  }
  return 1.0 - (alpha * gini(fmrs) + (1.0 - alpha) * gini(fnmrs));
}

}  // namespace mote::eval
