#pragma once

// Forward passes for the three model kinds, plus the unbatched helpers
// (wgap on an SO3Signal, fc_softmax on a feature vector).

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "scnn/layers.hpp"
#include "scnn/model.hpp"

namespace scnn {

// One subject. Spherical and planar models read the two hemisphere matrices
// (2b x 2b each); linear models read `left` as a feature vector.
struct Example {
  std::vector<double> left, right;
  int label = 0;
};

struct ForwardOptions {
  bool train = false;
  bool update_running = false;
  std::vector<double> pooling_weights;  // per-beta wGAP weights; empty = sin(beta) weights
};

template <class T>
struct ForwardOutput {
  Var<T> logits;
  Var<T> trunk;  // last post-ReLU trunk map, rows (left..., right...); invalid for linear models
};

template <class T>
ForwardOutput<T> forward(Tape<T>& tape, Model<T>& m, const std::vector<const Example*>& batch, const ForwardOptions& opt) {
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  const Architecture& a = m.arch;
  const std::size_t B = batch.size();
  ForwardOutput<T> out;
  if (a.kind == ModelKind::linear) {
    const std::size_t F = static_cast<std::size_t>(a.features);
    std::vector<T> x(B * F);
    for (std::size_t b = 0; b < B; ++b) {
      if (batch[b]->left.size() != F) throw std::invalid_argument("forward: feature vector length mismatch");
      std::copy(batch[b]->left.begin(), batch[b]->left.end(), x.begin() + static_cast<std::ptrdiff_t>(b * F));
    }
    auto xv = tape.leaf({B, F}, std::move(x));
    out.logits = linear(tape, xv, tape.parameter(m.get("fc.weight")), tape.parameter(m.get("fc.bias")));
    return out;
  }

  const std::size_t n = static_cast<std::size_t>(2 * a.input_bandwidth), plane = n * n;
  std::vector<T> x(2 * B * plane);
  for (std::size_t b = 0; b < B; ++b) {
    if (batch[b]->left.size() != plane || batch[b]->right.size() != plane)
      throw std::invalid_argument("forward: hemisphere matrix must be " + std::to_string(n) + "x" + std::to_string(n));
    std::copy(batch[b]->left.begin(), batch[b]->left.end(), x.begin() + static_cast<std::ptrdiff_t>(b * plane));
    std::copy(batch[b]->right.begin(), batch[b]->right.end(), x.begin() + static_cast<std::ptrdiff_t>((B + b) * plane));
  }
  Var<T> h = tape.leaf({2 * B, 1, n, n}, std::move(x));
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const std::string idx = std::to_string(i);
    const int bw = a.layers[i].bandwidth;
    if (a.kind == ModelKind::spherical) {
      const std::string p = (i == 0 ? "s2conv" : "so3conv") + idx;
      auto k = tape.parameter(m.get(p + ".kernel"));
      auto bias = tape.parameter(m.get(p + ".bias"));
      h = (i == 0) ? s2_conv(tape, h, k, bias, bw) : so3_conv(tape, h, k, bias, bw);
    } else {
      h = conv2d(tape, h, tape.parameter(m.get("conv" + idx + ".weight")), tape.parameter(m.get("conv" + idx + ".bias")));
    }
    const std::string bn = "bn" + idx;
    h = batch_norm(tape, h, tape.parameter(m.get(bn + ".gamma")), tape.parameter(m.get(bn + ".beta")), m.get(bn + ".running_mean"),
                   m.get(bn + ".running_var"), opt.train, opt.update_running);
    h = relu(tape, h);
  }
  out.trunk = h;
  Var<T> pooled;
  if (a.kind == ModelKind::spherical) {
    const int bl = a.layers.back().bandwidth;
    pooled = wgap(tape, h, opt.pooling_weights.empty() ? wgap_weights(bl) : opt.pooling_weights);
  } else {
    pooled = global_average(tape, h);
  }
  auto feats = pair_concat(tape, pooled);
  out.logits = linear(tape, feats, tape.parameter(m.get("fc.weight")), tape.parameter(m.get("fc.bias")));
  return out;
}

// Class probabilities per example, eval mode, in chunks of `chunk`.
template <class T>
std::vector<std::vector<double>> predict_proba(Model<T>& m, const std::vector<const Example*>& xs, std::size_t chunk = 16) {
  std::vector<std::vector<double>> out;
  out.reserve(xs.size());
  for (std::size_t s = 0; s < xs.size(); s += chunk) {
    std::vector<const Example*> batch(xs.begin() + static_cast<std::ptrdiff_t>(s),
                                      xs.begin() + static_cast<std::ptrdiff_t>(std::min(xs.size(), s + chunk)));
    Tape<T> tape;
    auto fo = forward(tape, m, batch, ForwardOptions{});
    const auto& z = tape.value(fo.logits);
    const std::size_t K = static_cast<std::size_t>(m.arch.classes);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      std::vector<double> zd(z.begin() + static_cast<std::ptrdiff_t>(b * K), z.begin() + static_cast<std::ptrdiff_t>((b + 1) * K));
      out.push_back(softmax_row(zd.data(), K));
    }
  }
  return out;
}

template <class T>
std::vector<double> predict_positive(Model<T>& m, const std::vector<const Example*>& xs) {
  std::vector<double> p;
  for (auto& row : predict_proba(m, xs)) p.push_back(row[1]);
  return p;
}

inline std::vector<const Example*> pointers(const std::vector<Example>& xs) {
  std::vector<const Example*> p;
  p.reserve(xs.size());
  for (const auto& x : xs) p.push_back(&x);
  return p;
}

// out_c = (1/(2b)^2) sum_{alpha, gamma} sum_beta w_beta f(c, alpha, beta, gamma).
inline std::vector<double> wgap(const SO3Signal& f, const std::vector<double>& weights) {
  const std::size_t N = static_cast<std::size_t>(f.size());
  if (weights.size() != N) throw std::invalid_argument("wgap: weights must have one entry per beta");
  std::vector<double> out(static_cast<std::size_t>(f.channels));
  for (int c = 0; c < f.channels; ++c) {
    double s = 0.0;
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t g = 0; g < N; ++g) s += weights[j] * f.at(c, static_cast<int>(a), static_cast<int>(j), static_cast<int>(g));
    out[static_cast<std::size_t>(c)] = s / static_cast<double>(N * N);
  }
  return out;
}

// softmax(W x + b); W is classes x features, row-major.
inline std::vector<double> fc_softmax(const std::vector<double>& weights, const std::vector<double>& bias,
                                      const std::vector<double>& features) {
  const std::size_t K = bias.size(), F = features.size();
  if (weights.size() != K * F) throw std::invalid_argument("fc_softmax: weight shape does not match features");
  std::vector<double> z(K);
  for (std::size_t k = 0; k < K; ++k) {
    double s = bias[k];
    for (std::size_t f = 0; f < F; ++f) s += weights[k * F + f] * features[f];
    z[k] = s;
  }
  return softmax_row(z.data(), K);
}

}  // namespace scnn
