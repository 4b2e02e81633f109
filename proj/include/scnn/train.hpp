#pragma once

// SGD with classical momentum, the two-stage learning-rate schedule, training
// with per-epoch validation and best-checkpoint selection, and the
// finite-difference gradient check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "scnn/network.hpp"

namespace scnn {

struct TrainConfig {
  int batch_size = 8;
  int epochs = 200;
  int lr_switch_epoch = 100;  // epochs 1..switch use lr_initial, the rest lr_final
  double lr_initial = 0.1;
  double lr_final = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  double lr_at(int epoch) const { return epoch <= lr_switch_epoch ? lr_initial : lr_final; }

  void validate() const {
    if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (lr_switch_epoch < 0 || lr_switch_epoch > epochs) throw ValidationError("train: lr switch epoch outside [0, epochs]");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("train: momentum must lie in [0, 1)");
    if (!(lr_initial > 0.0) || !(lr_final > 0.0)) throw ValidationError("train: learning rates must be positive");
  }
};

template <class T>
struct OptimizerState {
  std::vector<std::vector<T>> velocity;  // one buffer per model tensor (empty for buffers)
  double momentum = 0.9;
  double lr = 0.1;

  OptimizerState() = default;
  OptimizerState(const Model<T>& m, double momentum_, double lr_) : momentum(momentum_), lr(lr_) {
    for (const auto& t : m.tensors) velocity.emplace_back(t.trainable ? t.size() : 0, T(0));
  }
};

// v <- momentum v + g ; p <- p - lr v.
template <class T>
void sgd_step(Model<T>& m, OptimizerState<T>& st) {
  if (st.velocity.size() != m.tensors.size()) throw InternalError("sgd_step: optimizer state does not match model");
  for (std::size_t i = 0; i < m.tensors.size(); ++i) {
    auto& t = m.tensors[i];
    if (!t.trainable) continue;
    auto& v = st.velocity[i];
    if (t.grad.size() != t.size() || v.size() != t.size()) throw InternalError("sgd_step: shape mismatch for " + t.name);
    for (std::size_t e = 0; e < t.size(); ++e) {
      v[e] = static_cast<T>(st.momentum * v[e] + t.grad[e]);
      t.values[e] = static_cast<T>(t.values[e] - st.lr * v[e]);
    }
  }
}

// Mean loss of a batch; fills parameter gradients.
template <class T>
double loss_and_gradients(Model<T>& m, const std::vector<const Example*>& batch, bool update_running,
                          const ForwardOptions& base = {}) {
  m.zero_grad();
  Tape<T> tape;
  ForwardOptions opt = base;
  opt.train = true;
  opt.update_running = update_running;
  auto fo = forward(tape, m, batch, opt);
  std::vector<int> labels;
  for (auto* e : batch) labels.push_back(e->label);
  auto loss = softmax_cross_entropy(tape, fo.logits, labels);
  tape.backward(loss);
  return static_cast<double>(tape.value(loss)[0]);
}

template <class T>
double batch_loss(Model<T>& m, const std::vector<const Example*>& batch, bool train_mode) {
  Tape<T> tape;
  ForwardOptions opt;
  opt.train = train_mode;
  auto fo = forward(tape, m, batch, opt);
  std::vector<int> labels;
  for (auto* e : batch) labels.push_back(e->label);
  return static_cast<double>(tape.value(softmax_cross_entropy(tape, fo.logits, labels))[0]);
}

// Predict class 1 iff p1 >= 0.5.
template <class T>
double accuracy(Model<T>& m, const std::vector<const Example*>& xs) {
  if (xs.empty()) return 0.0;
  auto p = predict_positive(m, xs);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) ok += ((p[i] >= 0.5 ? 1 : 0) == xs[i]->label);
  return static_cast<double>(ok) / static_cast<double>(xs.size());
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

inline std::string history_csv(const std::vector<EpochRecord>& h) {
  std::string out = "epoch,train_loss,val_acc,lr\n";
  char line[160];
  for (const auto& r : h) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_acc, r.lr);
    out += line;
  }
  return out;
}

template <class T>
struct TrainResult {
  Model<T> best;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_acc = -1.0;
};

template <class T>
TrainResult<T> train(Model<T> model, const std::vector<const Example*>& train_set, const std::vector<const Example*>& val_set,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw ValidationError("train: training and validation sets must be nonempty");
  for (const auto* sets : {&train_set, &val_set})
    for (auto* e : *sets)
      if (e->label != 0 && e->label != 1) throw ValidationError("train: labels must be 0 or 1");

  TrainResult<T> result;
  OptimizerState<T> opt(model, cfg.momentum, cfg.lr_initial);
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    model.training = true;
    opt.lr = cfg.lr_at(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x5u, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int batch_index = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      std::vector<const Example*> batch;
      for (std::size_t i = s; i < std::min(order.size(), s + static_cast<std::size_t>(cfg.batch_size)); ++i)
        batch.push_back(train_set[order[i]]);
      double loss = loss_and_gradients(model, batch, true);
      if (!std::isfinite(loss))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      total += loss * static_cast<double>(batch.size());
      sgd_step(model, opt);
    }
    model.training = false;
    EpochRecord rec{epoch, total / static_cast<double>(order.size()), accuracy(model, val_set), opt.lr};
    result.history.push_back(rec);
    if (rec.val_acc > result.best_val_acc) {
      result.best_val_acc = rec.val_acc;
      result.best_epoch = epoch;
      result.best = model;
    }
  }
  result.best.training = false;
  return result;
}

// Max relative error |a - f| / max(|a|, |f|, floor) between analytic and
// central-difference gradients of the mean batch loss (train-mode batch
// statistics, running statistics untouched). floor = 1e-3 * max|a| (at least
// 1e-7), so entries that are zero analytically, such as a conv bias feeding a
// batch norm, are judged against round-off of the difference quotient rather
// than against zero. Above `max_checked` scalar parameters a seeded subsample
// is checked.
inline constexpr double gradient_error_floor = 1e-7;
inline constexpr double gradient_floor_fraction = 1e-3;

struct GradientCheck {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

inline GradientCheck finite_diff_check(Model<double>& m, const std::vector<const Example*>& batch, double step,
                                       std::uint64_t seed = 0, std::size_t max_checked = 10000,
                                       const ForwardOptions& base = {}) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  loss_and_gradients(m, batch, false, base);
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < m.tensors.size(); ++t)
    if (m.tensors[t].trainable)
      for (std::size_t e = 0; e < m.tensors[t].size(); ++e) coords.emplace_back(t, e);
  if (coords.size() > max_checked) {
    std::mt19937_64 rng(derive_seed(seed, 0xfd));
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_checked);
    std::sort(coords.begin(), coords.end());
  }
  auto eval = [&] {
    Tape<double> tape;
    ForwardOptions opt = base;
    opt.train = true;
    opt.update_running = false;
    auto fo = forward(tape, m, batch, opt);
    std::vector<int> labels;
    for (auto* e : batch) labels.push_back(e->label);
    return tape.value(softmax_cross_entropy(tape, fo.logits, labels))[0];
  };
  double gmax = 0.0;
  for (const auto& t : m.tensors)
    if (t.trainable)
      for (double g : t.grad) gmax = std::max(gmax, std::abs(g));
  const double floor = std::max(gradient_error_floor, gradient_floor_fraction * gmax);
  GradientCheck out;
  for (auto [t, e] : coords) {
    auto& p = m.tensors[t];
    const double orig = p.values[e];
    p.values[e] = orig + step;
    const double lp = eval();
    p.values[e] = orig - step;
    const double lm = eval();
    p.values[e] = orig;
    const double fd = (lp - lm) / (2.0 * step), an = p.grad[e];
    const double err = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), floor});
    if (err > out.max_relative_error) {
      out.max_relative_error = err;
      out.worst_parameter = p.name + "[" + std::to_string(e) + "]";
    }
    ++out.checked;
  }
  return out;
}

}  // namespace scnn
