#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mote/common.hpp"
#include "mote/linalg.hpp"
#include "mote/types.hpp"

namespace mote::net {

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg) : Error("DimensionMismatch", msg) {}
};

struct StaleCache : Error {
  StaleCache() : Error("StaleCache", "forward cache does not match this network") {}
};

struct StepOutOfRange : Error {
  StepOutOfRange(std::uint64_t step, std::uint64_t total)
      : Error("StepOutOfRange", "scheduler step " + std::to_string(step) +
                                    " outside [0, " + std::to_string(total) + ")") {}
};

struct EmptyClass : Error {
  explicit EmptyClass(const std::string& msg) : Error("EmptyClass", msg) {}
};

struct TrainingDiverged : Error {
  explicit TrainingDiverged(const std::string& msg) : Error("TrainingDiverged", msg) {}
};

enum class Activation { Relu, Identity };

/// Feed-forward binary classifier: hidden layers with ReLU and inverted
/// dropout, one linear output unit. Parameters live in a single flat
/// vector in layer order (W1 row-major, b1, W2, b2, ...), which is also
/// the on-disk template layout.
template <typename T>
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(std::vector<std::uint32_t> dims, T dropout_rate = T(0.5),
               Activation hidden_activation = Activation::Relu)
      : dims_(std::move(dims)), dropout_rate_(dropout_rate), activation_(hidden_activation) {
    if (dims_.size() < 2) throw DimensionMismatch("network needs at least two layers");
    if (dims_.back() != 1) throw DimensionMismatch("output layer width must be 1");
    offsets_.reserve(layer_count());
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      offsets_.push_back(off);
      off += static_cast<std::size_t>(dims_[l]) * dims_[l + 1] + dims_[l + 1];
    }
    params_.assign(off, T(0));
  }

  /// Glorot-uniform weights, zero biases.
  static Mlp initialized(std::vector<std::uint32_t> dims, Rng& rng, T dropout_rate = T(0.5),
                         Activation act = Activation::Relu) {
    Mlp mlp(std::move(dims), dropout_rate, act);
    for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
      double bound = std::sqrt(6.0 / (static_cast<double>(mlp.dims_[l]) + mlp.dims_[l + 1]));
      auto w = mlp.weight_span(l);
      for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    return mlp;
  }

  const std::vector<std::uint32_t>& dims() const { return dims_; }
  std::size_t layer_count() const { return dims_.size() - 1; }
  std::uint32_t input_dim() const { return dims_.front(); }
  T dropout_rate() const { return dropout_rate_; }
  Activation hidden_activation() const { return activation_; }

  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }

  std::span<T> weight_span(std::size_t layer) {
    return {params_.data() + offsets_[layer],
            static_cast<std::size_t>(dims_[layer]) * dims_[layer + 1]};
  }
  std::span<const T> weight_span(std::size_t layer) const {
    return {params_.data() + offsets_[layer],
            static_cast<std::size_t>(dims_[layer]) * dims_[layer + 1]};
  }
  std::span<T> bias_span(std::size_t layer) {
    return {params_.data() + offsets_[layer] +
                static_cast<std::size_t>(dims_[layer]) * dims_[layer + 1],
            dims_[layer + 1]};
  }
  std::span<const T> bias_span(std::size_t layer) const {
    return {params_.data() + offsets_[layer] +
                static_cast<std::size_t>(dims_[layer]) * dims_[layer + 1],
            dims_[layer + 1]};
  }

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(dims_[layer]) * dims_[layer + 1];
  }

 private:
  std::vector<std::uint32_t> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<T> params_;
  T dropout_rate_ = T(0.5);
  Activation activation_ = Activation::Relu;
};

/// Everything backward() needs from the matching forward() call.
template <typename T>
struct ForwardCache {
  std::vector<std::uint32_t> dims;
  std::size_t batch = 0;
  bool train_mode = false;
  std::vector<Matrix<T>> inputs;      // input to each layer (post drop/act)
  std::vector<Matrix<T>> preacts;     // z of each hidden layer
  std::vector<Matrix<T>> drop_masks;  // scaled keep masks per hidden layer
};

/// Batched forward pass; x is batch x input_dim. Dropout is inverted
/// (kept units scaled by 1/(1-rate)) and only active in train mode, where
/// an RNG is required.
template <typename T>
std::vector<T> forward_batch(const Mlp<T>& mlp, const Matrix<T>& x, bool train_mode,
                             Rng* rng = nullptr, ForwardCache<T>* cache = nullptr) {
  if (x.cols != mlp.input_dim()) {
    throw DimensionMismatch("input has " + std::to_string(x.cols) + " features, expected " +
                            std::to_string(mlp.input_dim()));
  }
  if (train_mode && mlp.dropout_rate() > T(0) && rng == nullptr) {
    throw DimensionMismatch("train-mode forward needs an RNG for dropout");
  }
  if (cache) {
    cache->dims = mlp.dims();
    cache->batch = x.rows;
    cache->train_mode = train_mode;
    cache->inputs.clear();
    cache->preacts.clear();
    cache->drop_masks.clear();
  }

  Matrix<T> current = x;
  Matrix<T> z;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    if (cache) cache->inputs.push_back(current);
    std::uint32_t out_dim = mlp.dims()[l + 1];
    auto w = mlp.weight_span(l);
    auto b = mlp.bias_span(l);
    gemm_row_dot_raw(current.data.data(), current.rows, current.cols, w.data(), out_dim, z);
    for (std::size_t i = 0; i < z.rows; ++i) {
      T* zr = z.row(i);
      for (std::uint32_t o = 0; o < out_dim; ++o) zr[o] += b[o];
    }

    bool hidden = (l + 1 < mlp.layer_count());
    if (!hidden) {
      current = std::move(z);
      break;
    }
    if (cache) cache->preacts.push_back(z);
    Matrix<T> a(z.rows, z.cols);
    if (mlp.hidden_activation() == Activation::Relu) {
      for (std::size_t i = 0; i < z.data.size(); ++i) {
        a.data[i] = z.data[i] > T(0) ? z.data[i] : T(0);
      }
    } else {
      a.data = z.data;
    }
    if (train_mode && mlp.dropout_rate() > T(0)) {
      T keep = T(1) - mlp.dropout_rate();
      T scale = T(1) / keep;
      Matrix<T> mask(a.rows, a.cols);
      for (std::size_t i = 0; i < a.data.size(); ++i) {
        mask.data[i] = (rng->next_unit() < static_cast<double>(keep)) ? scale : T(0);
        a.data[i] *= mask.data[i];
      }
      if (cache) cache->drop_masks.push_back(std::move(mask));
    } else if (cache) {
      cache->drop_masks.emplace_back();
    }
    current = std::move(a);
  }

  std::vector<T> logits(current.rows);
  for (std::size_t i = 0; i < current.rows; ++i) logits[i] = current.at(i, 0);
  return logits;
}

/// Single-sample forward; returns the raw logit.
template <typename T>
T forward(const Mlp<T>& mlp, std::span<const T> x, bool train_mode, Rng* rng = nullptr,
          ForwardCache<T>* cache = nullptr) {
  Matrix<T> m(1, x.size());
  std::copy(x.begin(), x.end(), m.row(0));
  return forward_batch(mlp, m, train_mode, rng, cache)[0];
}

template <typename T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  T e = std::exp(z);
  return e / (T(1) + e);
}

/// Numerically stable binary cross-entropy on a raw logit:
/// loss = max(z,0) - z*y + log(1 + exp(-|z|)), d loss / d z = sigmoid(z) - y.
template <typename T>
std::pair<T, T> bce_with_logits(T logit, int label) {
  T y = static_cast<T>(label);
  T loss = std::max(logit, T(0)) - logit * y + std::log1p(std::exp(-std::abs(logit)));
  T grad = sigmoid(logit) - y;
  return {loss, grad};
}

template <typename T>
struct Gradients {
  std::vector<T> flat;  // same layout as Mlp::params()
};

/// Backpropagation through the cached forward pass. dlogits carries
/// d loss / d logit per sample; gradients come back in the flat parameter
/// layout. Dropout masks are reused from the forward pass.
template <typename T>
Gradients<T> backward_batch(const Mlp<T>& mlp, const ForwardCache<T>& cache,
                            const std::vector<T>& dlogits) {
  if (cache.dims != mlp.dims() || cache.inputs.size() != mlp.layer_count()) {
    throw StaleCache();
  }
  if (dlogits.size() != cache.batch) {
    throw DimensionMismatch("dlogits length does not match the cached batch");
  }

  Gradients<T> grads;
  grads.flat.assign(mlp.params().size(), T(0));

  Matrix<T> dz(cache.batch, 1);
  for (std::size_t i = 0; i < cache.batch; ++i) dz.at(i, 0) = dlogits[i];

  for (std::size_t l = mlp.layer_count(); l-- > 0;) {
    const Matrix<T>& x = cache.inputs[l];
    std::uint32_t out_dim = mlp.dims()[l + 1];
    std::uint32_t in_dim = mlp.dims()[l];

    // dW[o][k] = sum_n dz[n][o] * x[n][k]; db[o] = sum_n dz[n][o]
    Matrix<T> dzt = transposed(dz);
    Matrix<T> xt = transposed(x);
    Matrix<T> dw;
    gemm_row_dot(dzt, xt, dw);

    std::size_t w_off = mlp.weight_offset(l);
    std::copy(dw.data.begin(), dw.data.end(),
              grads.flat.begin() + static_cast<std::ptrdiff_t>(w_off));
    std::size_t b_off = mlp.bias_offset(l);
    for (std::uint32_t o = 0; o < out_dim; ++o) {
      double acc = 0.0;
      for (std::size_t n = 0; n < cache.batch; ++n) acc += static_cast<double>(dz.at(n, o));
      grads.flat[b_off + o] = static_cast<T>(acc);
    }

    if (l == 0) break;

    // dX = dz . W, then back through dropout and the activation.
    Matrix<T> weights(out_dim, in_dim);
    auto w = mlp.weight_span(l);
    weights.data.assign(w.begin(), w.end());
    Matrix<T> wt = transposed(weights);
    Matrix<T> dx;
    gemm_row_dot(dz, wt, dx);

    const Matrix<T>& mask = cache.drop_masks[l - 1];
    if (mask.rows > 0) {
      for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= mask.data[i];
    }
    if (mlp.hidden_activation() == Activation::Relu) {
      const Matrix<T>& z = cache.preacts[l - 1];
      for (std::size_t i = 0; i < dx.data.size(); ++i) {
        if (!(z.data[i] > T(0))) dx.data[i] = T(0);
      }
    }
    dz = std::move(dx);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Adam with decoupled weight decay
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, T(0)), v(n, T(0)) {}
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-3;
};

/// One optimizer step. Weight decay is decoupled: parameters shrink by
/// lr * weight_decay * theta before the moment update sees the gradient.
template <typename T>
void adam_step(std::vector<T>& params, const std::vector<T>& grads, AdamState<T>& state,
               double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimensionMismatch("parameter, gradient and state sizes differ");
  }
  state.t += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double p = static_cast<double>(params[i]);
    double g = static_cast<double>(grads[i]);
    p -= lr * cfg.weight_decay * p;
    double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    double mhat = m / bc1;
    double vhat = v / bc2;
    p -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    params[i] = static_cast<T>(p);
  }
}

// ---------------------------------------------------------------------------
// One-cycle learning-rate schedule
// ---------------------------------------------------------------------------

/// Cosine rise from lr_max/div_factor to lr_max over the first pct_start
/// of the cycle, then cosine fall to lr_max/final_div_factor.
inline double onecycle_lr(std::uint64_t step, std::uint64_t total_steps, double lr_max,
                          double pct_start = 0.3, double div_factor = 25.0,
                          double final_div_factor = 1e4) {
  if (step >= total_steps) throw StepOutOfRange(step, total_steps);
  double lo = lr_max / div_factor;
  double fin = lr_max / final_div_factor;
  if (total_steps == 1) return lr_max;
  auto peak = static_cast<std::uint64_t>(
      std::clamp<double>(std::nearbyint(pct_start * static_cast<double>(total_steps)), 1.0,
                         static_cast<double>(total_steps - 2)));
  constexpr double kPi = 3.14159265358979323846;
  if (step <= peak) {
    double t = static_cast<double>(step) / static_cast<double>(peak);
    return lo + (lr_max - lo) * 0.5 * (1.0 - std::cos(kPi * t));
  }
  double t = static_cast<double>(step - peak) / static_cast<double>(total_steps - 1 - peak);
  return fin + (lr_max - fin) * 0.5 * (1.0 + std::cos(kPi * t));
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::uint32_t max_epochs = 100;
  std::uint32_t batch_size = 128;
  double lr_max = 1e-2;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint32_t early_stop_patience = 10;
  double min_delta = 1e-4;
  double pct_start = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    if (max_epochs == 0 || batch_size == 0) {
      throw EmptyClass("max_epochs and batch_size must be positive");
    }
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw EmptyClass("validation_fraction must be in (0,1)");
    }
    if (!(lr_max > 0.0) || weight_decay < 0.0 || early_stop_patience == 0) {
      throw EmptyClass("invalid optimizer settings");
    }
  }
};

struct TrainReport {
  std::uint32_t epochs_run = 0;
  double best_val_loss = 0.0;
  double final_train_loss = 0.0;
  double wall_time_seconds = 0.0;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_val_loss;
};

namespace detail {

template <typename T>
Matrix<T> to_matrix(std::span<const Embedding> rows, std::span<const std::size_t> pick) {
  Matrix<T> out(pick.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < pick.size(); ++i) {
    const Embedding& e = rows[pick[i]];
    T* dst = out.row(i);
    for (std::size_t k = 0; k < e.size(); ++k) dst[k] = static_cast<T>(e[k]);
  }
  return out;
}

/// Cycles through a class's sample indices in seeded shuffled order,
/// reshuffling on wrap; falls back to with-replacement draws when the
/// class is smaller than one batch half.
class BalancedSampler {
 public:
  BalancedSampler(std::size_t count, std::size_t per_batch, Rng& rng)
      : count_(count), per_batch_(per_batch), rng_(rng), order_(count) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
  }

  void fill(std::vector<std::size_t>& out) {
    out.clear();
    if (count_ < per_batch_) {
      for (std::size_t i = 0; i < per_batch_; ++i) out.push_back(rng_.index(count_));
      return;
    }
    for (std::size_t i = 0; i < per_batch_; ++i) {
      if (cursor_ == count_) {
        rng_.shuffle(order_);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
  }

 private:
  std::size_t count_;
  std::size_t per_batch_;
  Rng& rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

template <typename T>
double mean_bce(const Mlp<T>& mlp, const Matrix<T>& x, std::span<const int> labels) {
  if (x.rows == 0) return 0.0;
  auto logits = forward_batch(mlp, x, /*train_mode=*/false);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    total += static_cast<double>(bce_with_logits(logits[i], labels[i]).first);
  }
  return total / static_cast<double>(logits.size());
}

}  // namespace detail

/// Trains the network on balanced genuine/imposter batches (half of the
/// batch from each class, drawn with replacement when a class is small),
/// Adam with decoupled weight decay under a one-cycle schedule, early
/// stopping on held-out validation loss, best-epoch weights restored.
template <typename T>
TrainReport train(Mlp<T>& mlp, std::span<const Embedding> genuine,
                  std::span<const Embedding> imposter, const TrainConfig& cfg) {
  cfg.validate();
  if (genuine.empty()) throw EmptyClass("genuine class is empty");
  if (imposter.empty()) throw EmptyClass("imposter class is empty");
  auto start = std::chrono::steady_clock::now();

  Rng rng(mix_seed(cfg.seed, 0x7261494eull));

  // Per-class validation holdout.
  auto split = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    auto n_val = static_cast<std::size_t>(round_half_even(cfg.validation_fraction * n));
    if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    if (n < 2) n_val = 0;
    std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    return std::pair{tr, val};
  };
  auto [gen_train, gen_val] = split(genuine.size());
  auto [imp_train, imp_val] = split(imposter.size());

  Matrix<T> val_x;
  std::vector<int> val_labels;
  {
    Matrix<T> gv = detail::to_matrix<T>(genuine, gen_val);
    Matrix<T> iv = detail::to_matrix<T>(imposter, imp_val);
    val_x = Matrix<T>(gv.rows + iv.rows, mlp.input_dim());
    std::copy(gv.data.begin(), gv.data.end(), val_x.data.begin());
    std::copy(iv.data.begin(), iv.data.end(),
              val_x.data.begin() + static_cast<std::ptrdiff_t>(gv.data.size()));
    val_labels.assign(gv.rows, 1);
    val_labels.insert(val_labels.end(), iv.rows, 0);
  }

  const std::size_t half = std::max<std::size_t>(1, cfg.batch_size / 2);
  const std::size_t batches_per_epoch = std::max<std::size_t>(
      1, (gen_train.size() + imp_train.size() + cfg.batch_size - 1) / cfg.batch_size);
  const std::uint64_t total_steps = static_cast<std::uint64_t>(cfg.max_epochs) * batches_per_epoch;

  detail::BalancedSampler gen_sampler(gen_train.size(), half, rng);
  detail::BalancedSampler imp_sampler(imp_train.size(), half, rng);

  AdamState<T> state(mlp.params().size());
  AdamConfig adam{cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay};

  TrainReport report;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<T> best_params = mlp.params();
  std::uint32_t since_improvement = 0;
  std::uint64_t step = 0;

  std::vector<std::size_t> gpick, ipick;
  Matrix<T> batch_x(half * 2, mlp.input_dim());
  std::vector<int> batch_labels(half * 2);
  ForwardCache<T> cache;

  for (std::uint32_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      gen_sampler.fill(gpick);
      imp_sampler.fill(ipick);
      for (std::size_t i = 0; i < half; ++i) {
        const Embedding& e = genuine[gen_train[gpick[i]]];
        T* dst = batch_x.row(i);
        for (std::size_t k = 0; k < e.size(); ++k) dst[k] = static_cast<T>(e[k]);
        batch_labels[i] = 1;
      }
      for (std::size_t i = 0; i < half; ++i) {
        const Embedding& e = imposter[imp_train[ipick[i]]];
        T* dst = batch_x.row(half + i);
        for (std::size_t k = 0; k < e.size(); ++k) dst[k] = static_cast<T>(e[k]);
        batch_labels[half + i] = 0;
      }

      auto logits = forward_batch(mlp, batch_x, /*train_mode=*/true, &rng, &cache);
      double loss = 0.0;
      std::vector<T> dlogits(logits.size());
      for (std::size_t i = 0; i < logits.size(); ++i) {
        auto [l, g] = bce_with_logits(logits[i], batch_labels[i]);
        loss += static_cast<double>(l);
        dlogits[i] = g / static_cast<T>(logits.size());
      }
      loss /= static_cast<double>(logits.size());
      if (!std::isfinite(loss)) throw TrainingDiverged("non-finite training loss");
      epoch_loss += loss;

      auto grads = backward_batch(mlp, cache, dlogits);
      double lr = onecycle_lr(step, total_steps, cfg.lr_max, cfg.pct_start, cfg.div_factor,
                              cfg.final_div_factor);
      adam_step(mlp.params(), grads.flat, state, lr, adam);
      ++step;
    }
    epoch_loss /= static_cast<double>(batches_per_epoch);

    double val_loss = val_x.rows > 0 ? detail::mean_bce(mlp, val_x, val_labels) : epoch_loss;
    if (!std::isfinite(val_loss)) throw TrainingDiverged("non-finite validation loss");
    report.epoch_train_loss.push_back(epoch_loss);
    report.epoch_val_loss.push_back(val_loss);
    report.epochs_run = epoch + 1;
    report.final_train_loss = epoch_loss;

    if (val_loss < best_val - cfg.min_delta) {
      best_val = val_loss;
      best_params = mlp.params();
      since_improvement = 0;
    } else {
      ++since_improvement;
      if (since_improvement >= cfg.early_stop_patience) break;
    }
  }

  mlp.params() = best_params;
  report.best_val_loss = best_val;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Template <-> network bridging
// ---------------------------------------------------------------------------

inline Mlp<float> mlp_from_template(const ModelTemplate& t) {
  t.validate();
  Mlp<float> mlp(std::vector<std::uint32_t>(t.layer_dims.begin(), t.layer_dims.end()));
  mlp.params() = t.weights;
  return mlp;
}

inline ModelTemplate template_from_mlp(const Mlp<float>& mlp, IdentityId identity,
                                       float balancing_factor, std::string digest) {
  ModelTemplate t;
  t.identity = std::move(identity);
  if (mlp.dims().size() != 4) throw InvalidTemplate("template networks have 4 layer dims");
  std::copy(mlp.dims().begin(), mlp.dims().end(), t.layer_dims.begin());
  t.weights = mlp.params();
  t.balancing_factor = balancing_factor;
  t.train_config_digest = std::move(digest);
  t.validate();
  return t;
}

}  // namespace mote::net
