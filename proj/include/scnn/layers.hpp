#pragma once

// Differentiable operations recorded on a Tape. Activations are batched
// tensors: S2 maps [B, C, 2b, 2b], SO(3) maps [B, C, 2b, 2b, 2b], planar maps
// [B, C, H, W], features [B, F]. Spectral work is carried out in double
// whatever the activation scalar T.

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

#include "scnn/conv.hpp"
#include "scnn/tape.hpp"

namespace scnn {

template <class T>
using Var = typename Tape<T>::Var;

struct BatchNormConfig {
  double eps = 1e-5;
  double momentum = 0.1;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

template <class T>
std::vector<double> to_double(const T* p, std::size_t n) {
  return std::vector<double>(p, p + n);
}

// Complex parameters are stored as interleaved (re, im) pairs.
template <class T>
std::vector<cplx> to_complex(const std::vector<T>& v) {
  std::vector<cplx> z(v.size() / 2);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = {static_cast<double>(v[2 * i]), static_cast<double>(v[2 * i + 1])};
  return z;
}

}  // namespace detail

// S2 correlation. kernel: [out, in, L*L, 2], bias: [out].
template <class T>
Var<T> s2_conv(Tape<T>& tape, Var<T> x, Var<T> kernel, Var<T> bias, int out_bandwidth) {
  const Shape xs = tape.shape(x), ks = tape.shape(kernel);
  detail::require(xs.size() == 4 && xs[2] == xs[3] && xs[2] % 2 == 0, "s2_conv: input must be [B, C, 2b, 2b]");
  const int B = static_cast<int>(xs[0]), cin = static_cast<int>(xs[1]), bin = static_cast<int>(xs[2] / 2);
  const int cout = static_cast<int>(ks[0]);
  detail::require(ks.size() == 4 && static_cast<int>(ks[1]) == cin &&
                      ks[2] == static_cast<std::size_t>(out_bandwidth) * out_bandwidth && ks[3] == 2,
                  "s2_conv: kernel shape " + shape_string(ks) + " does not match input " + shape_string(xs));
  auto layer = std::make_shared<S2ConvLayer>(cin, cout, bin, out_bandwidth);
  layer->kernel = detail::to_complex(tape.value(kernel));
  for (int o = 0; o < cout; ++o) layer->bias[static_cast<std::size_t>(o)] = tape.value(bias)[static_cast<std::size_t>(o)];
  auto ksym = std::make_shared<std::vector<cplx>>(symmetric_kernel(*layer));

  const std::size_t in_sz = static_cast<std::size_t>(cin) * 4 * bin * bin;
  const std::size_t out_sz = static_cast<std::size_t>(cout) * 8 * out_bandwidth * out_bandwidth * out_bandwidth;
  auto fhat = std::make_shared<std::vector<std::vector<cplx>>>(static_cast<std::size_t>(B));
  std::vector<T> out(static_cast<std::size_t>(B) * out_sz);
  std::vector<double> yd(out_sz);
  for (int b = 0; b < B; ++b) {
    auto xd = detail::to_double(tape.value(x).data() + b * in_sz, in_sz);
    s2_conv_forward(*layer, *ksym, xd.data(), yd.data(), (*fhat)[static_cast<std::size_t>(b)]);
    std::copy(yd.begin(), yd.end(), out.begin() + static_cast<std::ptrdiff_t>(b * out_sz));
  }
  const std::size_t n2 = static_cast<std::size_t>(2 * out_bandwidth);
  Var<T> y = tape.output({xs[0], static_cast<std::size_t>(cout), n2, n2, n2}, std::move(out));
  tape.set_backward(y, [&tape, x, kernel, bias, y, layer, ksym, fhat, B, in_sz, out_sz] {
    std::vector<cplx> gk(layer->kernel.size());
    std::vector<double> gb(layer->bias.size()), gx(in_sz);
    const auto& gy = tape.grad(y);
    auto& gxv = tape.grad(x);
    for (int b = 0; b < B; ++b) {
      auto g = detail::to_double(gy.data() + b * out_sz, out_sz);
      std::fill(gx.begin(), gx.end(), 0.0);
      s2_conv_backward(*layer, *ksym, (*fhat)[static_cast<std::size_t>(b)], g.data(), gx.data(), gk.data(), gb.data());
      for (std::size_t e = 0; e < in_sz; ++e) gxv[b * in_sz + e] += static_cast<T>(gx[e]);
    }
    for (std::size_t p = 0; p < gk.size(); p += layer->kernel_stride()) s2_make_real(gk.data() + p, layer->out_bandwidth);
    auto& gkv = tape.grad(kernel);
    for (std::size_t i = 0; i < gk.size(); ++i) {
      gkv[2 * i] += static_cast<T>(gk[i].real());
      gkv[2 * i + 1] += static_cast<T>(gk[i].imag());
    }
    auto& gbv = tape.grad(bias);
    for (std::size_t i = 0; i < gb.size(); ++i) gbv[i] += static_cast<T>(gb[i]);
  });
  return y;
}

// SO(3) correlation. kernel: [out, in, sum (2l+1)^2, 2], bias: [out].
template <class T>
Var<T> so3_conv(Tape<T>& tape, Var<T> x, Var<T> kernel, Var<T> bias, int out_bandwidth) {
  const Shape xs = tape.shape(x), ks = tape.shape(kernel);
  detail::require(xs.size() == 5 && xs[2] == xs[3] && xs[3] == xs[4] && xs[2] % 2 == 0,
                  "so3_conv: input must be [B, C, 2b, 2b, 2b]");
  const int B = static_cast<int>(xs[0]), cin = static_cast<int>(xs[1]), bin = static_cast<int>(xs[2] / 2);
  const int cout = static_cast<int>(ks[0]);
  detail::require(ks.size() == 4 && static_cast<int>(ks[1]) == cin && ks[2] == so3_spectrum_size(out_bandwidth) && ks[3] == 2,
                  "so3_conv: kernel shape " + shape_string(ks) + " does not match input " + shape_string(xs));
  auto layer = std::make_shared<SO3ConvLayer>(cin, cout, bin, out_bandwidth);
  layer->kernel = detail::to_complex(tape.value(kernel));
  for (int o = 0; o < cout; ++o) layer->bias[static_cast<std::size_t>(o)] = tape.value(bias)[static_cast<std::size_t>(o)];
  auto ksym = std::make_shared<std::vector<cplx>>(symmetric_kernel(*layer));

  const std::size_t in_sz = static_cast<std::size_t>(cin) * 8 * bin * bin * bin;
  const std::size_t out_sz = static_cast<std::size_t>(cout) * 8 * out_bandwidth * out_bandwidth * out_bandwidth;
  auto fhat = std::make_shared<std::vector<std::vector<cplx>>>(static_cast<std::size_t>(B));
  std::vector<T> out(static_cast<std::size_t>(B) * out_sz);
  std::vector<double> yd(out_sz);
  for (int b = 0; b < B; ++b) {
    auto xd = detail::to_double(tape.value(x).data() + b * in_sz, in_sz);
    so3_conv_forward(*layer, *ksym, xd.data(), yd.data(), (*fhat)[static_cast<std::size_t>(b)]);
    std::copy(yd.begin(), yd.end(), out.begin() + static_cast<std::ptrdiff_t>(b * out_sz));
  }
  const std::size_t n2 = static_cast<std::size_t>(2 * out_bandwidth);
  Var<T> y = tape.output({xs[0], static_cast<std::size_t>(cout), n2, n2, n2}, std::move(out));
  tape.set_backward(y, [&tape, x, kernel, bias, y, layer, ksym, fhat, B, in_sz, out_sz] {
    std::vector<cplx> gk(layer->kernel.size());
    std::vector<double> gb(layer->bias.size()), gx(in_sz);
    const auto& gy = tape.grad(y);
    auto& gxv = tape.grad(x);
    for (int b = 0; b < B; ++b) {
      auto g = detail::to_double(gy.data() + b * out_sz, out_sz);
      std::fill(gx.begin(), gx.end(), 0.0);
      so3_conv_backward(*layer, *ksym, (*fhat)[static_cast<std::size_t>(b)], g.data(), gx.data(), gk.data(), gb.data());
      for (std::size_t e = 0; e < in_sz; ++e) gxv[b * in_sz + e] += static_cast<T>(gx[e]);
    }
    for (std::size_t p = 0; p < gk.size(); p += layer->kernel_stride()) so3_make_real(gk.data() + p, layer->out_bandwidth);
    auto& gkv = tape.grad(kernel);
    for (std::size_t i = 0; i < gk.size(); ++i) {
      gkv[2 * i] += static_cast<T>(gk[i].real());
      gkv[2 * i + 1] += static_cast<T>(gk[i].imag());
    }
    auto& gbv = tape.grad(bias);
    for (std::size_t i = 0; i < gb.size(); ++i) gbv[i] += static_cast<T>(gb[i]);
  });
  return y;
}

// Batch norm over every axis except the channel axis (axis 1).
// Running statistics are updated in place when `update_running` is set.
template <class T>
Var<T> batch_norm(Tape<T>& tape, Var<T> x, Var<T> gamma, Var<T> beta, Tensor<T>& running_mean, Tensor<T>& running_var,
                  bool train, bool update_running, const BatchNormConfig& cfg = {}) {
  const Shape xs = tape.shape(x);
  detail::require(xs.size() >= 2, "batch_norm: input needs a channel axis");
  const std::size_t B = xs[0], C = xs[1], S = shape_size(xs) / (B * C);
  const std::size_t count = B * S;
  const auto& xv = tape.value(x);
  const auto& g = tape.value(gamma);
  const auto& bt = tape.value(beta);
  detail::require(g.size() == C && bt.size() == C && running_mean.size() == C && running_var.size() == C,
                  "batch_norm: parameter size does not match channel count");
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(C);
  std::vector<T> out(xv.size());
  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (train) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t e = 0; e < S; ++e) s += xv[(b * C + c) * S + e];
      mean = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t e = 0; e < S; ++e) {
          double d = xv[(b * C + c) * S + e] - mean;
          v += d * d;
        }
      var = v / static_cast<double>(count);
      if (update_running) {
        double unbiased = count > 1 ? v / static_cast<double>(count - 1) : var;
        running_mean.values[c] = static_cast<T>((1.0 - cfg.momentum) * running_mean.values[c] + cfg.momentum * mean);
        running_var.values[c] = static_cast<T>((1.0 - cfg.momentum) * running_var.values[c] + cfg.momentum * unbiased);
      }
    } else {
      mean = running_mean.values[c];
      var = running_var.values[c];
    }
    const double is = 1.0 / std::sqrt(var + cfg.eps);
    (*inv_std)[c] = is;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t e = 0; e < S; ++e) {
        const std::size_t i = (b * C + c) * S + e;
        const double h = (xv[i] - mean) * is;
        (*xhat)[i] = h;
        out[i] = static_cast<T>(h * g[c] + bt[c]);
      }
  }
  Var<T> y = tape.output(xs, std::move(out));
  tape.set_backward(y, [&tape, x, gamma, beta, y, xhat, inv_std, B, C, S, count, train] {
    const auto& gy = tape.grad(y);
    const auto& gv = tape.value(gamma);
    auto& gx = tape.grad(x);
    auto& gg = tape.grad(gamma);
    auto& gbt = tape.grad(beta);
    for (std::size_t c = 0; c < C; ++c) {
      double sdy = 0.0, sdyh = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t e = 0; e < S; ++e) {
          const std::size_t i = (b * C + c) * S + e;
          sdy += gy[i];
          sdyh += gy[i] * (*xhat)[i];
        }
      gg[c] += static_cast<T>(sdyh);
      gbt[c] += static_cast<T>(sdy);
      const double gam = gv[c], is = (*inv_std)[c], n = static_cast<double>(count);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t e = 0; e < S; ++e) {
          const std::size_t i = (b * C + c) * S + e;
          double d = train ? gam * is * (gy[i] - sdy / n - (*xhat)[i] * sdyh / n) : gam * is * gy[i];
          gx[i] += static_cast<T>(d);
        }
    }
  });
  return y;
}

template <class T>
Var<T> relu(Tape<T>& tape, Var<T> x) {
  const auto& xv = tape.value(x);
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] <= T(0) ? T(0) : xv[i];  // NaN passes through
  Var<T> y = tape.output(tape.shape(x), std::move(out));
  tape.set_backward(y, [&tape, x, y] {
    const auto& xv = tape.value(x);
    const auto& gy = tape.grad(y);
    auto& gx = tape.grad(x);
    for (std::size_t i = 0; i < xv.size(); ++i)
      if (xv[i] > T(0)) gx[i] += gy[i];
  });
  return y;
}

// Weighted global average over [B, C, 2b(alpha), 2b(beta), 2b(gamma)] with
// per-beta weights summing to one. Output [B, C].
template <class T>
Var<T> wgap(Tape<T>& tape, Var<T> x, const std::vector<double>& beta_weights) {
  const Shape xs = tape.shape(x);
  detail::require(xs.size() == 5 && beta_weights.size() == xs[3], "wgap: weights must have one entry per beta");
  const std::size_t B = xs[0], C = xs[1], N = xs[2];
  const double norm = 1.0 / static_cast<double>(N * N);
  const auto& xv = tape.value(x);
  std::vector<T> out(B * C);
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    double s = 0.0;
    const T* p = xv.data() + bc * N * N * N;
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t j = 0; j < N; ++j) {
        double row = 0.0;
        for (std::size_t g = 0; g < N; ++g) row += p[(a * N + j) * N + g];
        s += beta_weights[j] * row;
      }
    out[bc] = static_cast<T>(s * norm);
  }
  Var<T> y = tape.output({B, C}, std::move(out));
  tape.set_backward(y, [&tape, x, y, beta_weights, B, C, N, norm] {
    const auto& gy = tape.grad(y);
    auto& gx = tape.grad(x);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      T* p = gx.data() + bc * N * N * N;
      for (std::size_t a = 0; a < N; ++a)
        for (std::size_t j = 0; j < N; ++j) {
          const T v = static_cast<T>(gy[bc] * beta_weights[j] * norm);
          for (std::size_t g = 0; g < N; ++g) p[(a * N + j) * N + g] += v;
        }
    }
  });
  return y;
}

// 3x3 convolution, stride 2, zero padding 1. x [B, Cin, H, W], w [Cout, Cin, 3, 3].
template <class T>
Var<T> conv2d(Tape<T>& tape, Var<T> x, Var<T> weight, Var<T> bias) {
  const Shape xs = tape.shape(x), ws = tape.shape(weight);
  detail::require(xs.size() == 4 && ws.size() == 4 && ws[1] == xs[1] && ws[2] == 3 && ws[3] == 3,
                  "conv2d: weight " + shape_string(ws) + " does not match input " + shape_string(xs));
  const std::size_t B = xs[0], Ci = xs[1], H = xs[2], W = xs[3], Co = ws[0];
  const std::size_t Ho = (H + 1) / 2, Wo = (W + 1) / 2;
  const auto& xv = tape.value(x);
  const auto& wv = tape.value(weight);
  const auto& bv = tape.value(bias);
  std::vector<T> out(B * Co * Ho * Wo);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Co; ++o)
      for (std::size_t r = 0; r < Ho; ++r)
        for (std::size_t c = 0; c < Wo; ++c) {
          double s = bv[o];
          for (std::size_t i = 0; i < Ci; ++i)
            for (int dr = 0; dr < 3; ++dr) {
              const long rr = static_cast<long>(2 * r) + dr - 1;
              if (rr < 0 || rr >= static_cast<long>(H)) continue;
              for (int dc = 0; dc < 3; ++dc) {
                const long cc = static_cast<long>(2 * c) + dc - 1;
                if (cc < 0 || cc >= static_cast<long>(W)) continue;
                s += static_cast<double>(wv[((o * Ci + i) * 3 + dr) * 3 + dc]) * xv[((b * Ci + i) * H + rr) * W + cc];
              }
            }
          out[((b * Co + o) * Ho + r) * Wo + c] = static_cast<T>(s);
        }
  Var<T> y = tape.output({B, Co, Ho, Wo}, std::move(out));
  tape.set_backward(y, [&tape, x, weight, bias, y, B, Ci, H, W, Co, Ho, Wo] {
    const auto& xv = tape.value(x);
    const auto& wv = tape.value(weight);
    const auto& gy = tape.grad(y);
    auto& gx = tape.grad(x);
    auto& gw = tape.grad(weight);
    auto& gb = tape.grad(bias);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t o = 0; o < Co; ++o)
        for (std::size_t r = 0; r < Ho; ++r)
          for (std::size_t c = 0; c < Wo; ++c) {
            const T g = gy[((b * Co + o) * Ho + r) * Wo + c];
            gb[o] += g;
            for (std::size_t i = 0; i < Ci; ++i)
              for (int dr = 0; dr < 3; ++dr) {
                const long rr = static_cast<long>(2 * r) + dr - 1;
                if (rr < 0 || rr >= static_cast<long>(H)) continue;
                for (int dc = 0; dc < 3; ++dc) {
                  const long cc = static_cast<long>(2 * c) + dc - 1;
                  if (cc < 0 || cc >= static_cast<long>(W)) continue;
                  const std::size_t wi = ((o * Ci + i) * 3 + dr) * 3 + dc, xi = ((b * Ci + i) * H + rr) * W + cc;
                  gw[wi] += g * xv[xi];
                  gx[xi] += g * wv[wi];
                }
              }
          }
  });
  return y;
}

// Uniform mean over all spatial axes. [B, C, ...] -> [B, C].
template <class T>
Var<T> global_average(Tape<T>& tape, Var<T> x) {
  const Shape xs = tape.shape(x);
  const std::size_t B = xs[0], C = xs[1], S = shape_size(xs) / (B * C);
  const auto& xv = tape.value(x);
  std::vector<T> out(B * C);
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    double s = 0.0;
    for (std::size_t e = 0; e < S; ++e) s += xv[bc * S + e];
    out[bc] = static_cast<T>(s / static_cast<double>(S));
  }
  Var<T> y = tape.output({B, C}, std::move(out));
  tape.set_backward(y, [&tape, x, y, B, C, S] {
    const auto& gy = tape.grad(y);
    auto& gx = tape.grad(x);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
      const T v = static_cast<T>(gy[bc] / static_cast<double>(S));
      for (std::size_t e = 0; e < S; ++e) gx[bc * S + e] += v;
    }
  });
  return y;
}

// [2B, C] features of stacked (left; right) examples -> [B, 2C] rows (left | right).
template <class T>
Var<T> pair_concat(Tape<T>& tape, Var<T> x) {
  const Shape xs = tape.shape(x);
  detail::require(xs.size() == 2 && xs[0] % 2 == 0, "pair_concat: expects [2B, C]");
  const std::size_t B = xs[0] / 2, C = xs[1];
  const auto& xv = tape.value(x);
  std::vector<T> out(2 * B * C);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      out[b * 2 * C + c] = xv[b * C + c];
      out[b * 2 * C + C + c] = xv[(B + b) * C + c];
    }
  Var<T> y = tape.output({B, 2 * C}, std::move(out));
  tape.set_backward(y, [&tape, x, y, B, C] {
    const auto& gy = tape.grad(y);
    auto& gx = tape.grad(x);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        gx[b * C + c] += gy[b * 2 * C + c];
        gx[(B + b) * C + c] += gy[b * 2 * C + C + c];
      }
  });
  return y;
}

// logits = x W^T + b. x [B, F], W [K, F], b [K].
template <class T>
Var<T> linear(Tape<T>& tape, Var<T> x, Var<T> weight, Var<T> bias) {
  const Shape xs = tape.shape(x), ws = tape.shape(weight);
  detail::require(xs.size() == 2 && ws.size() == 2 && ws[1] == xs[1],
                  "linear: weight " + shape_string(ws) + " does not match features " + shape_string(xs));
  const std::size_t B = xs[0], F = xs[1], K = ws[0];
  const auto& xv = tape.value(x);
  const auto& wv = tape.value(weight);
  const auto& bv = tape.value(bias);
  std::vector<T> out(B * K);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K; ++k) {
      double s = bv[k];
      for (std::size_t f = 0; f < F; ++f) s += static_cast<double>(wv[k * F + f]) * xv[b * F + f];
      out[b * K + k] = static_cast<T>(s);
    }
  Var<T> y = tape.output({B, K}, std::move(out));
  tape.set_backward(y, [&tape, x, weight, bias, y, B, F, K] {
    const auto& xv = tape.value(x);
    const auto& wv = tape.value(weight);
    const auto& gy = tape.grad(y);
    auto& gx = tape.grad(x);
    auto& gw = tape.grad(weight);
    auto& gb = tape.grad(bias);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t k = 0; k < K; ++k) {
        const T g = gy[b * K + k];
        gb[k] += g;
        for (std::size_t f = 0; f < F; ++f) {
          gw[k * F + f] += g * xv[b * F + f];
          gx[b * F + f] += g * wv[k * F + f];
        }
      }
  });
  return y;
}

// Row-wise softmax, computed in double.
inline std::vector<double> softmax_row(const double* z, std::size_t K) {
  double mx = z[0];
  for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, z[k]);
  std::vector<double> p(K);
  double s = 0.0;
  for (std::size_t k = 0; k < K; ++k) s += (p[k] = std::exp(z[k] - mx));
  for (double& v : p) v /= s;
  return p;
}

inline constexpr double probability_floor = 1e-12;

// -log(max(p[label], floor)).
inline double cross_entropy(const std::vector<double>& probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) throw std::invalid_argument("cross_entropy: label out of range");
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], probability_floor));
}

// Mean softmax cross-entropy over the batch; a scalar. probs receives the
// per-row class probabilities.
template <class T>
Var<T> softmax_cross_entropy(Tape<T>& tape, Var<T> logits, const std::vector<int>& labels, std::vector<double>* probs = nullptr) {
  const Shape ls = tape.shape(logits);
  detail::require(ls.size() == 2 && ls[0] == labels.size(), "softmax_cross_entropy: one label per row required");
  const std::size_t B = ls[0], K = ls[1];
  const auto& z = tape.value(logits);
  auto p = std::make_shared<std::vector<double>>(B * K);
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> zd(z.begin() + static_cast<std::ptrdiff_t>(b * K), z.begin() + static_cast<std::ptrdiff_t>((b + 1) * K));
    auto row = softmax_row(zd.data(), K);
    std::copy(row.begin(), row.end(), p->begin() + static_cast<std::ptrdiff_t>(b * K));
    loss += cross_entropy(row, labels[b]);
  }
  if (probs) *probs = *p;
  Var<T> y = tape.output({1}, {static_cast<T>(loss / static_cast<double>(B))});
  tape.set_backward(y, [&tape, logits, y, p, labels, B, K] {
    const double g = tape.grad(y)[0] / static_cast<double>(B);
    auto& gz = tape.grad(logits);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t k = 0; k < K; ++k)
        gz[b * K + k] += static_cast<T>(g * ((*p)[b * K + k] - (static_cast<int>(k) == labels[b] ? 1.0 : 0.0)));
  });
  return y;
}

}  // namespace scnn
