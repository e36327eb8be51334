#pragma once

#include <span>
#include <string>

#include "mote/net.hpp"
#include "mote/types.hpp"

namespace mote::verify {

enum class Outcome { Genuine, Impostor };

inline const char* to_string(Outcome o) {
  return o == Outcome::Genuine ? "Genuine" : "Impostor";
}

struct Decision {
  double score = 0.0;
  double threshold = 0.0;
  Outcome outcome = Outcome::Impostor;
};

/// Sigmoid of the eval-mode forward logit. Deterministic: no dropout at
/// inference.
inline double score(const net::Mlp<float>& mlp, std::span<const float> probe) {
  float logit = net::forward(mlp, probe, /*train_mode=*/false);
  return net::sigmoid(static_cast<double>(logit));
}

inline double score(const ModelTemplate& t, const Embedding& probe) {
  return score(net::mlp_from_template(t), probe);
}

/// Threshold rule: genuine if and only if the score reaches tau
/// (boundary inclusive).
inline Decision decide(double s, double tau) {
  return {s, tau, s >= tau ? Outcome::Genuine : Outcome::Impostor};
}

}  // namespace mote::verify
