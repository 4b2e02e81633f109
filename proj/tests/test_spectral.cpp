#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scnn/rotation.hpp"
#include "scnn/spectral.hpp"
#include "scnn/wigner.hpp"

using namespace scnn;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

// Explicit factorial sum for d^l_mn(beta).
double wigner_sum(int l, int m, int n, double beta) {
  const double c = std::cos(beta / 2), s = std::sin(beta / 2);
  double pre = std::sqrt(factorial(l + m) * factorial(l - m) * factorial(l + n) * factorial(l - n));
  double acc = 0;
  for (int k = std::max(0, n - m); k <= std::min(l + n, l - m); ++k) {
    double sign = ((m - n + k) % 2 == 0) ? 1.0 : -1.0;
    acc += sign * std::pow(c, 2 * l + n - m - 2 * k) * std::pow(s, m - n + 2 * k) /
           (factorial(l + n - k) * factorial(k) * factorial(m - n + k) * factorial(l - m - k));
  }
  return pre * acc;
}

S2Spectrum random_real_spectrum(int channels, int L, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  S2Spectrum F(channels, L);
  for (auto& z : F.coeffs) z = {g(rng), g(rng)};
  for (int c = 0; c < channels; ++c) s2_make_real(F.channel(c), L);
  return F;
}

SO3Spectrum random_real_so3(int channels, int L, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  SO3Spectrum F(channels, L);
  for (auto& z : F.coeffs) z = {g(rng), g(rng)};
  for (int c = 0; c < channels; ++c) so3_make_real(F.channel(c), L);
  return F;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Wigner, ScalarAndDegreeOne) {
  EXPECT_NEAR(wigner_d(0, 1.1)(0, 0), 1.0, 1e-15);
  for (double beta : {0.0, 0.3, 1.7, pi}) EXPECT_NEAR(wigner_d(1, beta)(0, 0), std::cos(beta), 1e-14);
}

TEST(Wigner, MatchesFactorialSum) {
  for (int l : {1, 2, 5, 9}) {
    auto d = wigner_d(l, 0.7);
    for (int m = -l; m <= l; ++m)
      for (int n = -l; n <= l; ++n) EXPECT_NEAR(d(m, n), wigner_sum(l, m, n, 0.7), 1e-10) << l << " " << m << " " << n;
  }
}

TEST(Wigner, IdentityAtZeroAndOrthogonal) {
  for (int l : {0, 3, 12}) {
    auto d0 = wigner_d(l, 0.0);
    auto d = wigner_d(l, 2.3);
    for (int m = -l; m <= l; ++m)
      for (int n = -l; n <= l; ++n) {
        EXPECT_NEAR(d0(m, n), m == n ? 1.0 : 0.0, 1e-12);
        double s = 0;
        for (int k = -l; k <= l; ++k) s += d(m, k) * d(n, k);
        EXPECT_NEAR(s, m == n ? 1.0 : 0.0, 1e-10);
      }
  }
}

TEST(Sht, ConstantSignal) {
  SphereSignal f(1, 8);
  std::fill(f.values.begin(), f.values.end(), 1.0);
  auto F = sht_forward(f);
  for (int l = 0; l < 8; ++l)
    for (int m = -l; m <= l; ++m) {
      cplx expect = (l == 0) ? cplx{std::sqrt(4 * pi), 0} : cplx{};
      EXPECT_NEAR(std::abs(F.at(0, l, m) - expect), 0.0, 1e-10);
    }
  auto g = sht_inverse(F, 8);
  EXPECT_LT(max_abs_diff(f.values, g.values), 1e-12);
}

TEST(Sht, RealPartOfY32) {
  const int b = 8;
  auto grid = make_grid(b);
  SphereSignal f(1, b);
  for (int j = 0; j < 2 * b; ++j)
    for (int k = 0; k < 2 * b; ++k)
      f.at(0, j, k) = std::sph_legendre(3, 2, grid.betas[j]) * std::cos(2 * grid.alphas[k]);
  auto F = sht_forward(f);
  for (int l = 0; l < b; ++l)
    for (int m = -l; m <= l; ++m) {
      cplx expect{};
      if (l == 3 && std::abs(m) == 2) expect = 0.5;  // Re Y = (Y_3^2 + Y_3^-2)/2 for even m
      EXPECT_NEAR(std::abs(F.at(0, l, m) - expect), 0.0, 1e-10) << l << " " << m;
    }
}

TEST(Sht, RoundtripAndConjugateSymmetry) {
  std::mt19937_64 rng(3);
  for (int b : {2, 4, 8, 16}) {
    auto F = random_real_spectrum(2, b, rng);
    auto f = sht_inverse(F, b);
    auto G = sht_forward(f);
    for (std::size_t i = 0; i < F.coeffs.size(); ++i) EXPECT_NEAR(std::abs(F.coeffs[i] - G.coeffs[i]), 0.0, 1e-10);
    auto g = sht_inverse(G, b);
    EXPECT_LT(max_abs_diff(f.values, g.values), 1e-10);
    for (int l = 0; l < b; ++l)
      for (int m = 0; m <= l; ++m) {
        double sign = (m % 2 == 0) ? 1.0 : -1.0;
        EXPECT_NEAR(std::abs(G.at(1, l, -m) - sign * std::conj(G.at(1, l, m))), 0.0, 1e-10);
      }
  }
}

TEST(Sht, ImaginaryResidueIsAnError) {
  S2Spectrum F(1, 4);
  F.at(0, 1, 1) = {1.0, 0.0};
  EXPECT_THROW(sht_inverse(F, 4), InternalError);
}

TEST(Sht, Adjoints) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const int b = 6, L = 5;
  SphereSignal u(1, b);
  for (double& x : u.values) x = g(rng);
  S2Spectrum v(1, L);
  for (auto& z : v.coeffs) z = {g(rng), g(rng)};
  auto Fu = sht_forward(u, L);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < v.coeffs.size(); ++i) lhs += (std::conj(Fu.coeffs[i]) * v.coeffs[i]).real();
  auto Av = sht_forward_adjoint(v, b);
  for (std::size_t i = 0; i < u.values.size(); ++i) rhs += u.values[i] * Av.values[i];
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));

  // inverse (real part) vs its adjoint
  for (int c = 0; c < 1; ++c) s2_make_real(v.channel(c), L);
  auto iv = sht_inverse(v, b);
  auto Bu = sht_inverse_adjoint(u, L);
  lhs = rhs = 0;
  for (std::size_t i = 0; i < u.values.size(); ++i) lhs += iv.values[i] * u.values[i];
  for (std::size_t i = 0; i < v.coeffs.size(); ++i) rhs += (std::conj(v.coeffs[i]) * Bu.coeffs[i]).real();
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST(So3Ft, ConstantAndCosBeta) {
  const int b = 4;
  SO3Signal f(1, b);
  std::fill(f.values.begin(), f.values.end(), 1.0);
  auto F = so3_ft_forward(f);
  EXPECT_NEAR(F.at(0, 0, 0, 0).real(), 8 * pi * pi, 1e-10);
  for (std::size_t i = 1; i < F.coeffs.size(); ++i) EXPECT_LT(std::abs(F.coeffs[i]), 1e-10);

  auto grid = make_grid(b);
  for (int a = 0; a < 2 * b; ++a)
    for (int j = 0; j < 2 * b; ++j)
      for (int g = 0; g < 2 * b; ++g) f.at(0, a, j, g) = std::cos(grid.betas[j]);
  F = so3_ft_forward(f);
  for (int l = 0; l < b; ++l)
    for (int m = -l; m <= l; ++m)
      for (int n = -l; n <= l; ++n) {
        if (l == 1 && m == 0 && n == 0) {
          EXPECT_NEAR(F.at(0, 1, 0, 0).real(), 8 * pi * pi / 3, 1e-10);
        } else {
          EXPECT_LT(std::abs(F.at(0, l, m, n)), 1e-10);
        }
      }
}

TEST(So3Ft, RoundtripAndParseval) {
  std::mt19937_64 rng(7);
  for (int b : {2, 4, 8}) {
    auto F = random_real_so3(1, b, rng);
    auto f = so3_ft_inverse(F, b);
    auto G = so3_ft_forward(f);
    double err = 0;
    for (std::size_t i = 0; i < F.coeffs.size(); ++i) err = std::max(err, std::abs(F.coeffs[i] - G.coeffs[i]));
    EXPECT_LT(err, 1e-9);
    auto g = so3_ft_inverse(G, b);
    EXPECT_LT(max_abs_diff(f.values, g.values), 1e-9);

    auto q = so3_quadrature_weights(b);
    double energy = 0;
    for (int a = 0; a < 2 * b; ++a)
      for (int j = 0; j < 2 * b; ++j)
        for (int k = 0; k < 2 * b; ++k) energy += q[j] * f.at(0, a, j, k) * f.at(0, a, j, k);
    double spec = 0;
    for (int l = 0; l < b; ++l)
      for (int m = -l; m <= l; ++m)
        for (int n = -l; n <= l; ++n) spec += so3_degree_scale(l) * std::norm(F.at(0, l, m, n));
    EXPECT_NEAR(energy, spec, 1e-9 * spec);
  }
}

TEST(So3Ft, Adjoints) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  const int b = 4, L = 3;
  SO3Signal u(1, b);
  for (double& x : u.values) x = g(rng);
  SO3Spectrum v(1, L);
  for (auto& z : v.coeffs) z = {g(rng), g(rng)};
  auto Fu = so3_ft_forward(u, L);
  auto Av = so3_ft_forward_adjoint(v, b);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < v.coeffs.size(); ++i) lhs += (std::conj(Fu.coeffs[i]) * v.coeffs[i]).real();
  for (std::size_t i = 0; i < u.values.size(); ++i) rhs += u.values[i] * Av.values[i];
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));

  so3_make_real(v.channel(0), L);
  auto iv = so3_ft_inverse(v, b);
  auto Bu = so3_ft_inverse_adjoint(u, L);
  lhs = rhs = 0;
  for (std::size_t i = 0; i < u.values.size(); ++i) lhs += iv.values[i] * u.values[i];
  for (std::size_t i = 0; i < v.coeffs.size(); ++i) rhs += (std::conj(v.coeffs[i]) * Bu.coeffs[i]).real();
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST(So3Ft, Linearity) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  const int b = 4;
  SO3Signal f(1, b), h(1, b), s(1, b);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    f.values[i] = g(rng);
    h.values[i] = g(rng);
    s.values[i] = 2.5 * f.values[i] + h.values[i];
  }
  auto F = so3_ft_forward(f), H = so3_ft_forward(h), S = so3_ft_forward(s);
  for (std::size_t i = 0; i < F.coeffs.size(); ++i) EXPECT_NEAR(std::abs(2.5 * F.coeffs[i] + H.coeffs[i] - S.coeffs[i]), 0.0, 1e-10);
}

TEST(Rotation, SphereSignalMatchesAnalyticBump) {
  // Band-limited zonal bump around the north pole: sum_l a_l P_l(cos angle).
  const int b = 8;
  auto grid = make_grid(b);
  auto bump = [](const Vec3& axis, const Vec3& p) {
    double c = dot(axis, p), s = 0;
    for (int l = 0; l < 6; ++l) s += std::exp(-0.2 * l * (l + 1)) * (2 * l + 1) * std::legendre(l, c);
    return s;
  };
  SphereSignal f(1, b);
  for (int j = 0; j < 2 * b; ++j)
    for (int k = 0; k < 2 * b; ++k) f.at(0, j, k) = bump({0, 0, 1}, grid.point(j, k));
  EulerZYZ e(0.0, pi / 2, 0.0);
  auto r = rotate_sphere_signal(f, e);
  auto R = euler_to_matrix(e);
  Vec3 moved = R * Vec3{0, 0, 1};
  double err = 0;
  for (int j = 0; j < 2 * b; ++j)
    for (int k = 0; k < 2 * b; ++k) err = std::max(err, std::abs(r.at(0, j, k) - bump(moved, grid.point(j, k))));
  EXPECT_LT(err, 1e-8);
}

TEST(Rotation, GroupActionAndIdentity) {
  std::mt19937_64 rng(13);
  const int b = 8;
  auto f = sht_inverse(random_real_spectrum(1, b, rng), b);
  auto same = rotate_sphere_signal(f, EulerZYZ{});
  EXPECT_LT(max_abs_diff(f.values, same.values), 1e-10);
  EulerZYZ e1(0.4, 1.1, 2.0), e2(5.0, 0.3, 1.2);
  auto a = rotate_sphere_signal(rotate_sphere_signal(f, e1), e2);
  auto c = rotate_sphere_signal(f, compose(e2, e1));
  EXPECT_LT(max_abs_diff(a.values, c.values), 1e-8);
}

TEST(Rotation, So3LeftTranslationMatchesPointwise) {
  // f(Q^{-1} R) evaluated by direct synthesis at rotated Euler angles.
  std::mt19937_64 rng(17);
  const int b = 4;
  auto F = random_real_so3(1, b, rng);
  auto f = so3_ft_inverse(F, b);
  EulerZYZ q(0.7, 1.3, 2.9);
  auto g = rotate_so3_signal(f, q);
  auto grid = make_grid(b);
  auto Qinv = transpose(euler_to_matrix(q));
  double err = 0;
  for (int a = 0; a < 2 * b; a += 3)
    for (int j = 0; j < 2 * b; j += 2)
      for (int k = 0; k < 2 * b; k += 3) {
        auto e = matrix_to_euler(Qinv * euler_to_matrix(EulerZYZ(grid.alphas[a], grid.betas[j], grid.alphas[k])));
        double v = 0;
        for (int l = 0; l < b; ++l) {
          auto d = wigner_d(l, e.beta());
          for (int m = -l; m <= l; ++m)
            for (int n = -l; n <= l; ++n)
              v += so3_degree_scale(l) *
                   (F.at(0, l, m, n) * std::polar(d(m, n), -m * e.alpha() - n * e.gamma())).real();
        }
        err = std::max(err, std::abs(v - g.at(0, a, j, k)));
      }
  EXPECT_LT(err, 1e-9);
}
