#pragma once

// Property checks shared by the verify command and the test binaries:
// transform round trips, Wigner orthogonality, layer equivariance against
// direct point evaluation, gradient checks and the pairwise AUC.

#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "scnn/conv.hpp"
#include "scnn/evaluation.hpp"
#include "scnn/rotation.hpp"

namespace scnn {

inline S2Spectrum random_real_s2_spectrum(int channels, int L, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  S2Spectrum F(channels, L);
  for (auto& z : F.coeffs) z = {g(rng), g(rng)};
  for (int c = 0; c < channels; ++c) s2_make_real(F.channel(c), L);
  return F;
}

inline SO3Spectrum random_real_so3_spectrum(int channels, int L, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  SO3Spectrum F(channels, L);
  for (auto& z : F.coeffs) z = {g(rng), g(rng)};
  for (int c = 0; c < channels; ++c) so3_make_real(F.channel(c), L);
  return F;
}

inline EulerZYZ random_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {2.0 * pi * u(rng), std::acos(1.0 - 2.0 * u(rng)), 2.0 * pi * u(rng)};
}

inline double max_abs_difference(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Max abs error of signal -> spectrum -> signal on a random band-limited signal.
inline double sht_roundtrip_error(int b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto f = sht_inverse(random_real_s2_spectrum(1, b, rng), b);
  return max_abs_difference(f.values, sht_inverse(sht_forward(f), b).values);
}

inline double so3_roundtrip_error(int b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto f = so3_ft_inverse(random_real_so3_spectrum(1, b, rng), b);
  return max_abs_difference(f.values, so3_ft_inverse(so3_ft_forward(f), b).values);
}

// max |d(l, beta) d(l, beta)^T - I| over l <= max_l and a few betas.
inline double wigner_orthogonality_error(int max_l) {
  double err = 0.0;
  for (double beta : {0.3, 1.1, pi / 2, 2.2, 3.0}) {
    auto d = wigner_d_blocks(max_l + 1, beta);
    for (int l = 0; l <= max_l; ++l) {
      const double* blk = d.data() + so3_block_offset(l);
      for (int m = -l; m <= l; ++m)
        for (int k = -l; k <= l; ++k) {
          double s = 0.0;
          for (int n = -l; n <= l; ++n) s += blk[block_index(l, m, n)] * blk[block_index(l, k, n)];
          err = std::max(err, std::abs(s - (m == k ? 1.0 : 0.0)));
        }
    }
  }
  return err;
}

inline double relative_l2(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

// Expected left translation of an SO(3) map, read off its spectrum at
// R^{-1} Q for every grid point Q.
inline std::vector<double> translated_by_evaluation(const SO3Signal& y, const EulerZYZ& r) {
  const int b = y.bandwidth, n = y.size();
  auto Y = so3_ft_forward(y);
  auto grid = make_grid(b);
  const Mat3 Rinv = transpose(euler_to_matrix(r));
  SO3Signal out(y.channels, b);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t a) {
    for (int j = 0; j < n; ++j)
      for (int g = 0; g < n; ++g) {
        const Mat3 Q = euler_to_matrix(EulerZYZ(grid.alphas[a], grid.betas[static_cast<std::size_t>(j)], grid.alphas[static_cast<std::size_t>(g)]));
        auto v = so3_evaluate(Y, matrix_to_euler(Rinv * Q));
        for (int c = 0; c < y.channels; ++c) out.at(c, static_cast<int>(a), j, g) = v[static_cast<std::size_t>(c)];
      }
  });
  return out.values;
}

// Relative L2 between conv(rotate(f)) and the translated conv(f); the input
// is rotated by the code under test, the output by direct evaluation.
inline double s2_equivariance_error(const S2ConvLayer& layer, std::uint64_t seed, const RotationOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  auto f = sht_inverse(random_real_s2_spectrum(layer.in_channels, layer.in_bandwidth, rng), layer.in_bandwidth);
  const EulerZYZ r = random_rotation(rng);
  auto got = s2_conv(layer, rotate_sphere_signal(f, r, opt));
  return relative_l2(got.values, translated_by_evaluation(s2_conv(layer, f), r));
}

inline double so3_equivariance_error(const SO3ConvLayer& layer, std::uint64_t seed, const RotationOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  auto f = so3_ft_inverse(random_real_so3_spectrum(layer.in_channels, layer.in_bandwidth, rng), layer.in_bandwidth);
  const EulerZYZ r = random_rotation(rng);
  auto got = so3_conv(layer, rotate_so3_signal(f, r, opt));
  return relative_l2(got.values, translated_by_evaluation(so3_conv(layer, f), r));
}

// Fraction of (positive, negative) pairs ranked correctly, ties counted half.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  if (pairs == 0) throw UndefinedMetricError("pairwise_auc: need both classes");
  return wins / static_cast<double>(pairs);
}

// Largest |trapezoid - pairwise| over `instances` random problems of size up
// to max_n, half of them with heavily tied scores.
inline double auc_oracle_error(int instances, int max_n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double err = 0.0;
  for (int t = 0; t < instances; ++t) {
    std::uniform_int_distribution<int> size(2, max_n);
    const int n = size(rng);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> y(static_cast<std::size_t>(n));
    std::uniform_real_distribution<double> u;
    std::uniform_int_distribution<int> coarse(0, 9);
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = t % 2 ? coarse(rng) / 10.0 : u(rng);
      y[static_cast<std::size_t>(i)] = u(rng) < 0.4 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    err = std::max(err, std::abs(roc_auc(s, y).auc - pairwise_auc(s, y)));
  }
  return err;
}

// Random examples shaped for `arch`, labels alternating.
inline std::vector<Example> random_examples(const Architecture& arch, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(2.5, 0.5);
  const std::size_t plane = arch.kind == ModelKind::linear ? static_cast<std::size_t>(arch.features)
                                                          : static_cast<std::size_t>(4 * arch.input_bandwidth * arch.input_bandwidth);
  std::vector<Example> xs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& e = xs[static_cast<std::size_t>(i)];
    e.left.resize(plane);
    for (double& v : e.left) v = g(rng);
    if (arch.kind != ModelKind::linear) {
      e.right.resize(plane);
      for (double& v : e.right) v = g(rng);
    }
    e.label = i % 2;
  }
  return xs;
}

// Finite-difference check of a freshly built 64-bit model on random inputs.
inline GradientCheck model_gradient_check(const Architecture& arch, std::uint64_t seed, double step = 1e-5) {
  auto m = build_model<double>(arch, seed);
  auto xs = random_examples(arch, 3, derive_seed(seed, 0x9d));
  return finite_diff_check(m, pointers(xs), step, seed);
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

}  // namespace scnn
