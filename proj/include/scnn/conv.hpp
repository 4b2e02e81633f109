#pragma once

// Spectral S2 and SO(3) correlations.
//
//   S2:    g(R) = int_S2 psi(R^{-1} x) f(x) dx
//          block(l)[m, n] = (8 pi^2 / (2l+1)) conj(f_lm) psi_ln
//   SO(3): g(R) = int_SO3 psi(R^{-1} Q) f(Q) dQ
//          block(l) = F(l) Psi(l)^H
//
// Both outputs are left-translation equivariant. Kernels are free complex
// spectra; before use they are projected onto the spectra of real functions
// so that every output is real.

#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "scnn/spectral.hpp"

namespace scnn {

struct S2ConvLayer {
  int in_channels = 0, out_channels = 0, in_bandwidth = 0, out_bandwidth = 0;
  std::vector<cplx> kernel;  // (out, in, l*l + l + m)
  std::vector<double> bias;

  S2ConvLayer() = default;
  S2ConvLayer(int in_c, int out_c, int in_b, int out_b)
      : in_channels(in_c), out_channels(out_c), in_bandwidth(in_b), out_bandwidth(out_b),
        kernel(static_cast<std::size_t>(in_c) * out_c * out_b * out_b), bias(static_cast<std::size_t>(out_c)) {
    if (in_c < 1 || out_c < 1 || out_b < 1 || out_b > in_b) throw std::invalid_argument("S2ConvLayer: bad shape");
  }

  std::size_t kernel_stride() const { return static_cast<std::size_t>(out_bandwidth) * out_bandwidth; }
  cplx* k(int o, int i) { return kernel.data() + (static_cast<std::size_t>(o) * in_channels + i) * kernel_stride(); }
  const cplx* k(int o, int i) const {
    return kernel.data() + (static_cast<std::size_t>(o) * in_channels + i) * kernel_stride();
  }
  std::size_t parameter_count() const { return 2 * kernel.size() + bias.size(); }
};

struct SO3ConvLayer {
  int in_channels = 0, out_channels = 0, in_bandwidth = 0, out_bandwidth = 0;
  std::vector<cplx> kernel;  // (out, in, l, m, n)
  std::vector<double> bias;

  SO3ConvLayer() = default;
  SO3ConvLayer(int in_c, int out_c, int in_b, int out_b)
      : in_channels(in_c), out_channels(out_c), in_bandwidth(in_b), out_bandwidth(out_b),
        kernel(static_cast<std::size_t>(in_c) * out_c * so3_spectrum_size(out_b)), bias(static_cast<std::size_t>(out_c)) {
    if (in_c < 1 || out_c < 1 || out_b < 1 || out_b > in_b) throw std::invalid_argument("SO3ConvLayer: bad shape");
  }

  std::size_t kernel_stride() const { return so3_spectrum_size(out_bandwidth); }
  cplx* k(int o, int i) { return kernel.data() + (static_cast<std::size_t>(o) * in_channels + i) * kernel_stride(); }
  const cplx* k(int o, int i) const {
    return kernel.data() + (static_cast<std::size_t>(o) * in_channels + i) * kernel_stride();
  }
  std::size_t parameter_count() const { return 2 * kernel.size() + bias.size(); }
};

// Fan-in scaled Gaussian spectra; biases zero.
inline void init_s2_kernel(S2ConvLayer& layer, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(1.0 / (4.0 * pi * layer.in_channels)));
  for (auto& z : layer.kernel) z = {g(rng), g(rng)};
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

inline void init_so3_kernel(SO3ConvLayer& layer, std::mt19937_64& rng) {
  for (int o = 0; o < layer.out_channels; ++o)
    for (int i = 0; i < layer.in_channels; ++i) {
      cplx* k = layer.k(o, i);
      for (int l = 0; l < layer.out_bandwidth; ++l) {
        std::normal_distribution<double> g(0.0, std::sqrt(1.0 / ((2.0 * l + 1.0) * layer.in_channels)));
        const std::size_t n = static_cast<std::size_t>((2 * l + 1) * (2 * l + 1));
        for (std::size_t e = 0; e < n; ++e) k[so3_block_offset(l) + e] = {g(rng), g(rng)};
      }
    }
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

// Kernels projected onto real-function spectra.
inline std::vector<cplx> symmetric_kernel(const S2ConvLayer& layer) {
  std::vector<cplx> k = layer.kernel;
  for (std::size_t p = 0; p < k.size(); p += layer.kernel_stride()) s2_make_real(k.data() + p, layer.out_bandwidth);
  return k;
}

inline std::vector<cplx> symmetric_kernel(const SO3ConvLayer& layer) {
  std::vector<cplx> k = layer.kernel;
  for (std::size_t p = 0; p < k.size(); p += layer.kernel_stride()) so3_make_real(k.data() + p, layer.out_bandwidth);
  return k;
}

namespace detail {

// Imaginary parts of a raw synthesis are dropped; the spectra are symmetric.
inline void add_real(const std::vector<cplx>& z, double bias, double* out) {
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i].real() + bias;
}

}  // namespace detail

// One example. x: in_c x (2 b_in)^2; out: out_c x (2 b_out)^3. fhat receives
// the input spectra (in_c x L^2) for the backward pass.
inline void s2_conv_forward(const S2ConvLayer& layer, const std::vector<cplx>& ksym, const double* x, double* out,
                            std::vector<cplx>& fhat) {
  const int bi = layer.in_bandwidth, bo = layer.out_bandwidth, L = bo;
  const std::size_t in_sz = static_cast<std::size_t>(4) * bi * bi, out_sz = static_cast<std::size_t>(8) * bo * bo * bo;
  const std::size_t Ls = static_cast<std::size_t>(L) * L;
  auto w = make_grid(bi).sht_weights;
  fhat.assign(static_cast<std::size_t>(layer.in_channels) * Ls, cplx{});
  std::vector<cplx> buf(in_sz);
  for (int i = 0; i < layer.in_channels; ++i) {
    std::copy(x + i * in_sz, x + (i + 1) * in_sz, buf.begin());
    detail::s2_analysis(buf.data(), bi, L, w.data(), fhat.data() + i * Ls);
  }
  std::vector<cplx> H(so3_spectrum_size(L)), y(out_sz);
  for (int o = 0; o < layer.out_channels; ++o) {
    std::fill(H.begin(), H.end(), cplx{});
    for (int i = 0; i < layer.in_channels; ++i) {
      const cplx* f = fhat.data() + i * Ls;
      const cplx* psi = ksym.data() + (static_cast<std::size_t>(o) * layer.in_channels + i) * Ls;
      for (int l = 0; l < L; ++l) {
        cplx* blk = H.data() + so3_block_offset(l);
        for (int m = -l; m <= l; ++m) {
          const cplx fm = std::conj(f[s2_index(l, m)]);
          for (int n = -l; n <= l; ++n) blk[block_index(l, m, n)] += fm * psi[s2_index(l, n)];
        }
      }
    }
    detail::so3_synthesis(H.data(), bo, L, nullptr, nullptr, y.data());
    detail::add_real(y, layer.bias[static_cast<std::size_t>(o)], out + o * out_sz);
  }
}

// Accumulates gradients; gkernel is with respect to the symmetric kernel.
inline void s2_conv_backward(const S2ConvLayer& layer, const std::vector<cplx>& ksym, const std::vector<cplx>& fhat,
                             const double* gout, double* gx, cplx* gkernel, double* gbias) {
  const int bi = layer.in_bandwidth, bo = layer.out_bandwidth, L = bo;
  const std::size_t in_sz = static_cast<std::size_t>(4) * bi * bi, out_sz = static_cast<std::size_t>(8) * bo * bo * bo;
  const std::size_t Ls = static_cast<std::size_t>(L) * L;
  std::vector<double> ones(static_cast<std::size_t>(2 * bo), 1.0);
  std::vector<cplx> buf(out_sz), gH(so3_spectrum_size(L));
  std::vector<cplx> gf(static_cast<std::size_t>(layer.in_channels) * Ls, cplx{});
  for (int o = 0; o < layer.out_channels; ++o) {
    const double* g = gout + o * out_sz;
    double sb = 0.0;
    for (std::size_t e = 0; e < out_sz; ++e) {
      buf[e] = g[e];
      sb += g[e];
    }
    gbias[o] += sb;
    detail::so3_analysis(buf.data(), bo, L, ones.data(), nullptr, gH.data());
    for (int i = 0; i < layer.in_channels; ++i) {
      const std::size_t kidx = (static_cast<std::size_t>(o) * layer.in_channels + i) * Ls;
      const cplx* f = fhat.data() + i * Ls;
      const cplx* psi = ksym.data() + kidx;
      cplx* gpsi = gkernel + kidx;
      cplx* gfi = gf.data() + i * Ls;
      for (int l = 0; l < L; ++l) {
        const cplx* blk = gH.data() + so3_block_offset(l);
        for (int m = -l; m <= l; ++m)
          for (int n = -l; n <= l; ++n) {
            const cplx gmn = blk[block_index(l, m, n)];
            gpsi[s2_index(l, n)] += f[s2_index(l, m)] * gmn;
            gfi[s2_index(l, m)] += psi[s2_index(l, n)] * std::conj(gmn);
          }
      }
    }
  }
  if (gx == nullptr) return;
  auto w = make_grid(bi).sht_weights;
  std::vector<cplx> xs(in_sz);
  for (int i = 0; i < layer.in_channels; ++i) {
    detail::s2_synthesis(gf.data() + i * Ls, bi, L, w.data(), xs.data());
    for (std::size_t e = 0; e < in_sz; ++e) gx[i * in_sz + e] += xs[e].real();
  }
}

inline void so3_conv_forward(const SO3ConvLayer& layer, const std::vector<cplx>& ksym, const double* x, double* out,
                             std::vector<cplx>& fhat) {
  const int bi = layer.in_bandwidth, bo = layer.out_bandwidth, L = bo;
  const std::size_t in_sz = static_cast<std::size_t>(8) * bi * bi * bi, out_sz = static_cast<std::size_t>(8) * bo * bo * bo;
  const std::size_t S = so3_spectrum_size(L);
  auto q = so3_quadrature_weights(bi);
  auto scale = so3_degree_scales(L);
  fhat.assign(static_cast<std::size_t>(layer.in_channels) * S, cplx{});
  std::vector<cplx> buf(in_sz);
  for (int i = 0; i < layer.in_channels; ++i) {
    std::copy(x + i * in_sz, x + (i + 1) * in_sz, buf.begin());
    detail::so3_analysis(buf.data(), bi, L, q.data(), nullptr, fhat.data() + i * S);
  }
  std::vector<cplx> G(S), y(out_sz);
  for (int o = 0; o < layer.out_channels; ++o) {
    std::fill(G.begin(), G.end(), cplx{});
    for (int i = 0; i < layer.in_channels; ++i) {
      const cplx* F = fhat.data() + i * S;
      const cplx* psi = ksym.data() + (static_cast<std::size_t>(o) * layer.in_channels + i) * S;
      for (int l = 0; l < L; ++l) {
        const std::size_t off = so3_block_offset(l);
        const int d = 2 * l + 1;
        for (int k = 0; k < d; ++k)
          for (int m = 0; m < d; ++m) {
            cplx acc{};
            for (int n = 0; n < d; ++n) acc += F[off + k * d + n] * std::conj(psi[off + m * d + n]);
            G[off + k * d + m] += acc;
          }
      }
    }
    detail::so3_synthesis(G.data(), bo, L, scale.data(), nullptr, y.data());
    detail::add_real(y, layer.bias[static_cast<std::size_t>(o)], out + o * out_sz);
  }
}

inline void so3_conv_backward(const SO3ConvLayer& layer, const std::vector<cplx>& ksym, const std::vector<cplx>& fhat,
                              const double* gout, double* gx, cplx* gkernel, double* gbias) {
  const int bi = layer.in_bandwidth, bo = layer.out_bandwidth, L = bo;
  const std::size_t in_sz = static_cast<std::size_t>(8) * bi * bi * bi, out_sz = static_cast<std::size_t>(8) * bo * bo * bo;
  const std::size_t S = so3_spectrum_size(L);
  std::vector<double> ones(static_cast<std::size_t>(2 * bo), 1.0);
  auto scale = so3_degree_scales(L);
  std::vector<cplx> buf(out_sz), gG(S);
  std::vector<cplx> gF(static_cast<std::size_t>(layer.in_channels) * S, cplx{});
  for (int o = 0; o < layer.out_channels; ++o) {
    const double* g = gout + o * out_sz;
    double sb = 0.0;
    for (std::size_t e = 0; e < out_sz; ++e) {
      buf[e] = g[e];
      sb += g[e];
    }
    gbias[o] += sb;
    detail::so3_analysis(buf.data(), bo, L, ones.data(), scale.data(), gG.data());
    for (int i = 0; i < layer.in_channels; ++i) {
      const std::size_t kidx = (static_cast<std::size_t>(o) * layer.in_channels + i) * S;
      const cplx* F = fhat.data() + i * S;
      const cplx* psi = ksym.data() + kidx;
      cplx* gpsi = gkernel + kidx;
      cplx* gFi = gF.data() + i * S;
      for (int l = 0; l < L; ++l) {
        const std::size_t off = so3_block_offset(l);
        const int d = 2 * l + 1;
        // gF += gG Psi ; gPsi += gG^H F
        for (int k = 0; k < d; ++k)
          for (int n = 0; n < d; ++n) {
            cplx acc{};
            for (int m = 0; m < d; ++m) acc += gG[off + k * d + m] * psi[off + m * d + n];
            gFi[off + k * d + n] += acc;
          }
        for (int m = 0; m < d; ++m)
          for (int n = 0; n < d; ++n) {
            cplx acc{};
            for (int k = 0; k < d; ++k) acc += std::conj(gG[off + k * d + m]) * F[off + k * d + n];
            gpsi[off + m * d + n] += acc;
          }
      }
    }
  }
  if (gx == nullptr) return;
  auto q = so3_quadrature_weights(bi);
  std::vector<cplx> xs(in_sz);
  for (int i = 0; i < layer.in_channels; ++i) {
    detail::so3_synthesis(gF.data() + i * S, bi, L, nullptr, q.data(), xs.data());
    for (std::size_t e = 0; e < in_sz; ++e) gx[i * in_sz + e] += xs[e].real();
  }
}

inline SO3Signal s2_conv(const S2ConvLayer& layer, const SphereSignal& f) {
  if (f.bandwidth != layer.in_bandwidth || f.channels != layer.in_channels)
    throw std::invalid_argument("s2_conv: input shape " + std::to_string(f.channels) + "x b" + std::to_string(f.bandwidth) +
                                " does not match layer " + std::to_string(layer.in_channels) + "x b" +
                                std::to_string(layer.in_bandwidth));
  SO3Signal out(layer.out_channels, layer.out_bandwidth);
  std::vector<cplx> fhat;
  s2_conv_forward(layer, symmetric_kernel(layer), f.values.data(), out.values.data(), fhat);
  return out;
}

inline SO3Signal so3_conv(const SO3ConvLayer& layer, const SO3Signal& f) {
  if (f.bandwidth != layer.in_bandwidth || f.channels != layer.in_channels)
    throw std::invalid_argument("so3_conv: input shape " + std::to_string(f.channels) + "x b" + std::to_string(f.bandwidth) +
                                " does not match layer " + std::to_string(layer.in_channels) + "x b" +
                                std::to_string(layer.in_bandwidth));
  SO3Signal out(layer.out_channels, layer.out_bandwidth);
  std::vector<cplx> fhat;
  so3_conv_forward(layer, symmetric_kernel(layer), f.values.data(), out.values.data(), fhat);
  return out;
}

}  // namespace scnn
