#pragma once

// Spherical harmonic transform (SHT) and SO(3) Fourier transform on the
// Driscoll-Healy grids, their adjoints, and spectral rotation.
//
// Normalisation, in one place:
//   S2:    f(b, a) = sum_lm F_lm Y_l^m(b, a), Y orthonormal on the unit sphere,
//          F_lm = int f conj(Y_l^m) dOmega.
//   SO(3): f(R) = sum_l (2l+1)/(8 pi^2) sum_mn F^l_mn D^l_mn(R),
//          F^l_mn = int f conj(D^l_mn) dR, dR = sin(b) da db dg (volume 8 pi^2).
// Hence Parseval reads int |f|^2 dR = sum_l (2l+1)/(8 pi^2) |F^l|_F^2.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "scnn/core.hpp"
#include "scnn/fft.hpp"
#include "scnn/sphere_grid.hpp"
#include "scnn/wigner.hpp"

namespace scnn {

struct S2Spectrum {
  int channels = 0;
  int max_degree = 0;
  std::vector<cplx> coeffs;  // (channel, l, m), l*l + l + m within a channel

  S2Spectrum() = default;
  S2Spectrum(int c, int L) : channels(c), max_degree(L), coeffs(static_cast<std::size_t>(c) * L * L) {}

  std::size_t per_channel() const { return static_cast<std::size_t>(max_degree) * max_degree; }
  cplx& at(int c, int l, int m) { return coeffs[static_cast<std::size_t>(c) * per_channel() + s2_index(l, m)]; }
  cplx at(int c, int l, int m) const { return coeffs[static_cast<std::size_t>(c) * per_channel() + s2_index(l, m)]; }
  cplx* channel(int c) { return coeffs.data() + static_cast<std::size_t>(c) * per_channel(); }
  const cplx* channel(int c) const { return coeffs.data() + static_cast<std::size_t>(c) * per_channel(); }
};

struct SO3Spectrum {
  int channels = 0;
  int max_degree = 0;
  std::vector<cplx> coeffs;  // (channel, l, m, n), blocks of (2l+1)^2 per channel

  SO3Spectrum() = default;
  SO3Spectrum(int c, int L) : channels(c), max_degree(L), coeffs(static_cast<std::size_t>(c) * so3_spectrum_size(L)) {}

  std::size_t per_channel() const { return so3_spectrum_size(max_degree); }
  std::size_t index(int c, int l, int m, int n) const {
    return static_cast<std::size_t>(c) * per_channel() + so3_block_offset(l) + block_index(l, m, n);
  }
  cplx& at(int c, int l, int m, int n) { return coeffs[index(c, l, m, n)]; }
  cplx at(int c, int l, int m, int n) const { return coeffs[index(c, l, m, n)]; }
  cplx* channel(int c) { return coeffs.data() + static_cast<std::size_t>(c) * per_channel(); }
  const cplx* channel(int c) const { return coeffs.data() + static_cast<std::size_t>(c) * per_channel(); }
};

// Imaginary parts above this are a broken conjugate symmetry, not round-off.
inline constexpr double imaginary_residue_limit = 1e-6;

inline double so3_degree_scale(int l) { return (2.0 * l + 1.0) / (8.0 * pi * pi); }

inline std::vector<double> so3_degree_scales(int L) {
  std::vector<double> s(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) s[static_cast<std::size_t>(l)] = so3_degree_scale(l);
  return s;
}

// Per-beta SO(3) quadrature weights (DH weight times alpha and gamma spacing).
inline std::vector<double> so3_quadrature_weights(int b) {
  auto w = dh_weights(b);
  for (double& x : w) x *= (pi / b) * (pi / b);
  return w;
}

namespace detail {

inline int wrap_index(int m, int n) { return m < 0 ? m + n : m; }

// out_lm = sum_j w_j lambda_lm(beta_j) sum_k x(j, k) e^{-i m alpha_k}, l < L.
inline void s2_analysis(const cplx* x, int b, int L, const double* beta_weights, cplx* out) {
  const int N = 2 * b;
  std::vector<cplx> buf(x, x + static_cast<std::size_t>(N) * N);
  fft::transform_rows(buf.data(), N, N, fft::Sign::minus);
  auto leg = legendre_table(b, L);
  std::fill(out, out + static_cast<std::size_t>(L) * L, cplx{});
  for (int j = 0; j < N; ++j) {
    const double w = beta_weights[j];
    const double* lam = leg->at(j);
    const cplx* row = buf.data() + static_cast<std::size_t>(j) * N;
    for (int l = 0; l < L; ++l)
      for (int m = -l; m <= l; ++m) out[s2_index(l, m)] += w * lam[s2_index(l, m)] * row[wrap_index(m, N)];
  }
}

// x(j, k) = v_j sum_lm c_lm lambda_lm(beta_j) e^{i m alpha_k}; v = 1 if null.
inline void s2_synthesis(const cplx* c, int b, int L, const double* beta_weights, cplx* x) {
  const int N = 2 * b;
  auto leg = legendre_table(b, L);
  std::fill(x, x + static_cast<std::size_t>(N) * N, cplx{});
  for (int j = 0; j < N; ++j) {
    const double* lam = leg->at(j);
    cplx* row = x + static_cast<std::size_t>(j) * N;
    const double v = beta_weights ? beta_weights[j] : 1.0;
    for (int m = -(L - 1); m < L; ++m) {
      cplx acc{};
      for (int l = std::abs(m); l < L; ++l) acc += c[s2_index(l, m)] * lam[s2_index(l, m)];
      row[wrap_index(m, N)] = v * acc;
    }
  }
  fft::transform_rows(x, N, N, fft::Sign::plus);
}

// out^l_mn = s_l sum_j w_j d^l_mn(beta_j) sum_{a,g} x(a, j, g) e^{i m alpha_a} e^{i n gamma_g}.
inline void so3_analysis(const cplx* x, int b, int L, const double* beta_weights, const double* degree_scale, cplx* out) {
  const int N = 2 * b;
  const std::size_t plane = static_cast<std::size_t>(N) * N;
  std::vector<cplx> buf(plane * static_cast<std::size_t>(N));
  for (int a = 0; a < N; ++a)
    for (int j = 0; j < N; ++j)
      for (int g = 0; g < N; ++g)
        buf[static_cast<std::size_t>(j) * plane + static_cast<std::size_t>(a) * N + static_cast<std::size_t>(g)] =
            x[(static_cast<std::size_t>(a) * N + static_cast<std::size_t>(j)) * N + static_cast<std::size_t>(g)];
  fft::transform_planes(buf.data(), N, N, fft::Sign::plus);
  auto tables = wigner_tables(b, L);
  std::fill(out, out + so3_spectrum_size(L), cplx{});
  for (int j = 0; j < N; ++j) {
    const double w = beta_weights[j];
    const double* d = tables->at(j);
    const cplx* p = buf.data() + static_cast<std::size_t>(j) * plane;
    for (int l = 0; l < L; ++l) {
      const std::size_t off = so3_block_offset(l);
      for (int m = -l; m <= l; ++m) {
        const cplx* prow = p + static_cast<std::size_t>(wrap_index(m, N)) * N;
        const std::size_t base = off + block_index(l, m, -l);
        for (int n = -l; n <= l; ++n) {
          const std::size_t k = base + static_cast<std::size_t>(n + l);
          out[k] += w * d[k] * prow[wrap_index(n, N)];
        }
      }
    }
  }
  if (degree_scale)
    for (int l = 0; l < L; ++l) {
      const std::size_t off = so3_block_offset(l), len = static_cast<std::size_t>((2 * l + 1) * (2 * l + 1));
      for (std::size_t k = 0; k < len; ++k) out[off + k] *= degree_scale[l];
    }
}

// x(a, j, g) = v_j sum_l s_l sum_mn c^l_mn d^l_mn(beta_j) e^{-i m alpha_a} e^{-i n gamma_g}.
inline void so3_synthesis(const cplx* c, int b, int L, const double* degree_scale, const double* beta_weights, cplx* x) {
  const int N = 2 * b;
  const std::size_t plane = static_cast<std::size_t>(N) * N;
  std::vector<cplx> buf(plane * static_cast<std::size_t>(N));
  auto tables = wigner_tables(b, L);
  for (int j = 0; j < N; ++j) {
    const double* d = tables->at(j);
    cplx* p = buf.data() + static_cast<std::size_t>(j) * plane;
    const double v = beta_weights ? beta_weights[j] : 1.0;
    for (int l = 0; l < L; ++l) {
      const double s = (degree_scale ? degree_scale[l] : 1.0) * v;
      const std::size_t off = so3_block_offset(l);
      for (int m = -l; m <= l; ++m) {
        cplx* prow = p + static_cast<std::size_t>(wrap_index(m, N)) * N;
        const std::size_t base = off + block_index(l, m, -l);
        for (int n = -l; n <= l; ++n) {
          const std::size_t k = base + static_cast<std::size_t>(n + l);
          prow[wrap_index(n, N)] += s * d[k] * c[k];
        }
      }
    }
  }
  fft::transform_planes(buf.data(), N, N, fft::Sign::minus);
  for (int a = 0; a < N; ++a)
    for (int j = 0; j < N; ++j)
      for (int g = 0; g < N; ++g)
        x[(static_cast<std::size_t>(a) * N + static_cast<std::size_t>(j)) * N + static_cast<std::size_t>(g)] =
            buf[static_cast<std::size_t>(j) * plane + static_cast<std::size_t>(a) * N + static_cast<std::size_t>(g)];
}

inline void take_real(const std::vector<cplx>& z, double* out, bool check) {
  double residue = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = z[i].real();
    residue = std::max(residue, std::abs(z[i].imag()));
  }
  if (check && residue > imaginary_residue_limit)
    throw InternalError("inverse transform: imaginary residue " + std::to_string(residue) +
                        " (spectrum is not conjugate-symmetric)");
}

inline void check_degree(int max_degree, int bandwidth, const char* who) {
  if (max_degree < 1 || max_degree > bandwidth)
    throw std::invalid_argument(std::string(who) + ": max_degree must lie in [1, bandwidth]");
}

}  // namespace detail

// Forward SHT; coefficients for l < max_degree (default: the bandwidth).
inline S2Spectrum sht_forward(const SphereSignal& f, int max_degree = 0) {
  const int b = f.bandwidth;
  const int L = max_degree == 0 ? b : max_degree;
  detail::check_degree(L, b, "sht_forward");
  auto w = make_grid(b).sht_weights;
  S2Spectrum out(f.channels, L);
  std::vector<cplx> x(f.channel_size());
  for (int c = 0; c < f.channels; ++c) {
    const double* src = f.values.data() + static_cast<std::size_t>(c) * f.channel_size();
    std::copy(src, src + f.channel_size(), x.begin());
    detail::s2_analysis(x.data(), b, L, w.data(), out.channel(c));
  }
  return out;
}

inline SphereSignal sht_inverse(const S2Spectrum& F, int bandwidth) {
  detail::check_degree(F.max_degree, bandwidth, "sht_inverse");
  SphereSignal out(F.channels, bandwidth);
  std::vector<cplx> x(out.channel_size());
  for (int c = 0; c < F.channels; ++c) {
    detail::s2_synthesis(F.channel(c), bandwidth, F.max_degree, nullptr, x.data());
    detail::take_real(x, out.values.data() + static_cast<std::size_t>(c) * out.channel_size(), true);
  }
  return out;
}

// Adjoint of sht_forward for the Euclidean pairings Re<F, G> = Re sum conj(F) G
// on spectra and <f, g> = sum f g on real grid samples.
inline SphereSignal sht_forward_adjoint(const S2Spectrum& F, int bandwidth) {
  detail::check_degree(F.max_degree, bandwidth, "sht_forward_adjoint");
  auto w = make_grid(bandwidth).sht_weights;
  SphereSignal out(F.channels, bandwidth);
  std::vector<cplx> x(out.channel_size());
  for (int c = 0; c < F.channels; ++c) {
    detail::s2_synthesis(F.channel(c), bandwidth, F.max_degree, w.data(), x.data());
    detail::take_real(x, out.values.data() + static_cast<std::size_t>(c) * out.channel_size(), false);
  }
  return out;
}

// Adjoint of the real part of the synthesis, same pairings as above.
inline S2Spectrum sht_inverse_adjoint(const SphereSignal& f, int max_degree) {
  const int b = f.bandwidth;
  detail::check_degree(max_degree, b, "sht_inverse_adjoint");
  std::vector<double> ones(static_cast<std::size_t>(2 * b), 1.0);
  S2Spectrum out(f.channels, max_degree);
  std::vector<cplx> x(f.channel_size());
  for (int c = 0; c < f.channels; ++c) {
    const double* src = f.values.data() + static_cast<std::size_t>(c) * f.channel_size();
    std::copy(src, src + f.channel_size(), x.begin());
    detail::s2_analysis(x.data(), b, max_degree, ones.data(), out.channel(c));
  }
  return out;
}

inline SO3Spectrum so3_ft_forward(const SO3Signal& f, int max_degree = 0) {
  const int b = f.bandwidth;
  const int L = max_degree == 0 ? b : max_degree;
  detail::check_degree(L, b, "so3_ft_forward");
  auto w = so3_quadrature_weights(b);
  SO3Spectrum out(f.channels, L);
  std::vector<cplx> x(f.channel_size());
  for (int c = 0; c < f.channels; ++c) {
    const double* src = f.values.data() + static_cast<std::size_t>(c) * f.channel_size();
    std::copy(src, src + f.channel_size(), x.begin());
    detail::so3_analysis(x.data(), b, L, w.data(), nullptr, out.channel(c));
  }
  return out;
}

inline SO3Signal so3_ft_inverse(const SO3Spectrum& F, int bandwidth) {
  detail::check_degree(F.max_degree, bandwidth, "so3_ft_inverse");
  auto s = so3_degree_scales(F.max_degree);
  SO3Signal out(F.channels, bandwidth);
  std::vector<cplx> x(out.channel_size());
  for (int c = 0; c < F.channels; ++c) {
    detail::so3_synthesis(F.channel(c), bandwidth, F.max_degree, s.data(), nullptr, x.data());
    detail::take_real(x, out.values.data() + static_cast<std::size_t>(c) * out.channel_size(), true);
  }
  return out;
}

inline SO3Signal so3_ft_forward_adjoint(const SO3Spectrum& F, int bandwidth) {
  detail::check_degree(F.max_degree, bandwidth, "so3_ft_forward_adjoint");
  auto w = so3_quadrature_weights(bandwidth);
  SO3Signal out(F.channels, bandwidth);
  std::vector<cplx> x(out.channel_size());
  for (int c = 0; c < F.channels; ++c) {
    detail::so3_synthesis(F.channel(c), bandwidth, F.max_degree, nullptr, w.data(), x.data());
    detail::take_real(x, out.values.data() + static_cast<std::size_t>(c) * out.channel_size(), false);
  }
  return out;
}

inline SO3Spectrum so3_ft_inverse_adjoint(const SO3Signal& f, int max_degree) {
  const int b = f.bandwidth;
  detail::check_degree(max_degree, b, "so3_ft_inverse_adjoint");
  std::vector<double> ones(static_cast<std::size_t>(2 * b), 1.0);
  auto s = so3_degree_scales(max_degree);
  SO3Spectrum out(f.channels, max_degree);
  std::vector<cplx> x(f.channel_size());
  for (int c = 0; c < f.channels; ++c) {
    const double* src = f.values.data() + static_cast<std::size_t>(c) * f.channel_size();
    std::copy(src, src + f.channel_size(), x.begin());
    detail::so3_analysis(x.data(), b, max_degree, ones.data(), s.data(), out.channel(c));
  }
  return out;
}

// Direct synthesis of every channel at one point. Slow; for checks away
// from the grid.
inline std::vector<double> s2_evaluate(const S2Spectrum& F, double beta, double alpha) {
  const int L = F.max_degree;
  auto d = wigner_d_blocks(L, beta);
  std::vector<double> v(static_cast<std::size_t>(F.channels), 0.0);
  for (int l = 0; l < L; ++l) {
    const double* blk = d.data() + so3_block_offset(l);
    const double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * pi));
    for (int m = -l; m <= l; ++m) {
      const cplx y = norm * blk[block_index(l, m, 0)] * std::polar(1.0, m * alpha);
      for (int c = 0; c < F.channels; ++c) v[static_cast<std::size_t>(c)] += (F.at(c, l, m) * y).real();
    }
  }
  return v;
}

inline std::vector<double> so3_evaluate(const SO3Spectrum& F, const EulerZYZ& e) {
  const int L = F.max_degree;
  auto d = wigner_d_blocks(L, e.beta());
  std::vector<double> v(static_cast<std::size_t>(F.channels), 0.0);
  for (int l = 0; l < L; ++l) {
    const double* blk = d.data() + so3_block_offset(l);
    for (int m = -l; m <= l; ++m)
      for (int n = -l; n <= l; ++n) {
        const cplx D = so3_degree_scale(l) * blk[block_index(l, m, n)] * std::polar(1.0, -m * e.alpha() - n * e.gamma());
        for (int c = 0; c < F.channels; ++c) v[static_cast<std::size_t>(c)] += (F.at(c, l, m, n) * D).real();
      }
  }
  return v;
}

// Projection onto spectra of real functions: F_{l,-m} = (-1)^m conj(F_lm).
inline void s2_make_real(cplx* c, int L) {
  for (int l = 0; l < L; ++l)
    for (int m = 0; m <= l; ++m) {
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      cplx& p = c[s2_index(l, m)];
      cplx& q = c[s2_index(l, -m)];
      cplx v = 0.5 * (p + sign * std::conj(q));
      p = v;
      q = sign * std::conj(v);
    }
}

// Projection onto spectra of real SO(3) functions: F_{-m,-n} = (-1)^(m-n) conj(F_mn).
inline void so3_make_real(cplx* c, int L) {
  for (int l = 0; l < L; ++l) {
    cplx* blk = c + so3_block_offset(l);
    for (int m = -l; m <= l; ++m)
      for (int n = -l; n <= l; ++n) {
        const std::size_t i = block_index(l, m, n), k = block_index(l, -m, -n);
        if (k < i) continue;
        const double sign = ((m - n) % 2 == 0) ? 1.0 : -1.0;
        cplx v = 0.5 * (blk[i] + sign * std::conj(blk[k]));
        blk[i] = v;
        blk[k] = sign * std::conj(v);
      }
  }
}

struct RotationOptions {
  // Test-of-tests switch: flips the sign of one Wigner entry so the
  // equivariance checks can be seen to fail.
  bool flip_wigner_sign = false;
};

namespace detail {
inline std::vector<double> rotation_blocks(int L, double beta, const RotationOptions& opt) {
  auto d = wigner_d_blocks(L, beta);
  if (opt.flip_wigner_sign && L > 1) d[so3_block_offset(1) + block_index(1, 1, 0)] *= -1.0;
  return d;
}
}  // namespace detail

// Spectrum of x -> f(R^{-1} x): F'_lm = sum_n D^l_mn(R) F_ln.
inline S2Spectrum rotate_spectrum(const S2Spectrum& F, const EulerZYZ& e, const RotationOptions& opt = {}) {
  const int L = F.max_degree;
  auto d = detail::rotation_blocks(L, e.beta(), opt);
  S2Spectrum out(F.channels, L);
  for (int c = 0; c < F.channels; ++c)
    for (int l = 0; l < L; ++l) {
      const double* blk = d.data() + so3_block_offset(l);
      for (int m = -l; m <= l; ++m) {
        cplx acc{};
        for (int n = -l; n <= l; ++n)
          acc += blk[block_index(l, m, n)] * std::polar(1.0, -n * e.gamma()) * F.at(c, l, n);
        out.at(c, l, m) = std::polar(1.0, -m * e.alpha()) * acc;
      }
    }
  return out;
}

// Spectrum of R -> f(Q^{-1} R): block(l) <- conj(D^l(Q)) block(l).
inline SO3Spectrum rotate_spectrum(const SO3Spectrum& F, const EulerZYZ& e, const RotationOptions& opt = {}) {
  const int L = F.max_degree;
  auto d = detail::rotation_blocks(L, e.beta(), opt);
  SO3Spectrum out(F.channels, L);
  for (int c = 0; c < F.channels; ++c)
    for (int l = 0; l < L; ++l) {
      const double* blk = d.data() + so3_block_offset(l);
      for (int k = -l; k <= l; ++k) {
        const cplx phase_k = std::polar(1.0, k * e.alpha());
        for (int n = -l; n <= l; ++n) {
          cplx acc{};
          for (int m = -l; m <= l; ++m)
            acc += blk[block_index(l, k, m)] * std::polar(1.0, m * e.gamma()) * F.at(c, l, m, n);
          out.at(c, l, k, n) = phase_k * acc;
        }
      }
    }
  return out;
}

}  // namespace scnn
