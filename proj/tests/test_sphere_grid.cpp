#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scnn/checks.hpp"
#include "scnn/rotation.hpp"
#include "scnn/sphere_grid.hpp"

using namespace scnn;

namespace {

// Plain triple loop, independent of Mat3's operator*.
Mat3 multiply(const Mat3& x, const Mat3& y) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += x(i, k) * y(k, j);
      r(i, j) = s;
    }
  return r;
}

Mat3 factor_z(double t) {
  Mat3 m;
  m(0, 0) = std::cos(t), m(0, 1) = -std::sin(t), m(0, 2) = 0;
  m(1, 0) = std::sin(t), m(1, 1) = std::cos(t), m(1, 2) = 0;
  m(2, 0) = 0, m(2, 1) = 0, m(2, 2) = 1;
  return m;
}

Mat3 factor_y(double t) {
  Mat3 m;
  m(0, 0) = std::cos(t), m(0, 1) = 0, m(0, 2) = std::sin(t);
  m(1, 0) = 0, m(1, 1) = 1, m(1, 2) = 0;
  m(2, 0) = -std::sin(t), m(2, 1) = 0, m(2, 2) = std::cos(t);
  return m;
}

double matrix_distance(const Mat3& a, const Mat3& b) {
  double m = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

}  // namespace

TEST(Grid, BandwidthOne) {
  auto g = make_grid(1);
  ASSERT_EQ(g.betas.size(), 2u);
  EXPECT_NEAR(g.betas[0], pi / 4, 1e-15);
  EXPECT_NEAR(g.betas[1], 3 * pi / 4, 1e-15);
  EXPECT_DOUBLE_EQ(g.alphas[0], 0.0);
  EXPECT_NEAR(g.alphas[1], pi, 1e-15);
  auto w = wgap_weights(g);
  EXPECT_NEAR(w[0], 0.5, 1e-15);
  EXPECT_NEAR(w[1], 0.5, 1e-15);
}

TEST(Grid, PaperSizeAndRejectsZero) {
  auto g = make_grid(64);
  EXPECT_EQ(g.betas.size(), 128u);
  EXPECT_EQ(g.alphas.size(), 128u);
  EXPECT_THROW(make_grid(0), std::invalid_argument);
}

TEST(Grid, AreaAndSymmetry) {
  for (int b : {1, 2, 8, 16}) {
    auto g = make_grid(b);
    double area = 0;
    for (double w : g.sht_weights) area += w * 2 * b;
    EXPECT_NEAR(area, 4 * pi, 1e-12) << b;
    for (int j = 0; j < 2 * b; ++j) {
      EXPECT_NEAR(g.betas[static_cast<std::size_t>(j)] + g.betas[static_cast<std::size_t>(2 * b - 1 - j)], pi, 1e-12);
      if (j > 0) EXPECT_GT(g.betas[static_cast<std::size_t>(j)], g.betas[static_cast<std::size_t>(j - 1)]);
      EXPECT_NEAR(g.alphas[static_cast<std::size_t>(j)], pi * j / b, 1e-15);
    }
  }
}

TEST(Grid, QuadratureIsExactBelowTwoB) {
  // int cos^k(beta) sin(beta) d beta over [0, pi] = 2/(k+1) for even k.
  const int b = 8;
  auto w = dh_weights(b);
  auto g = make_grid(b);
  for (int k = 0; k < 2 * b; k += 2) {
    double s = 0;
    for (int j = 0; j < 2 * b; ++j) s += w[static_cast<std::size_t>(j)] * std::pow(std::cos(g.betas[static_cast<std::size_t>(j)]), k);
    EXPECT_NEAR(s, 2.0 / (k + 1), 1e-12) << k;
  }
}

TEST(Grid, WgapWeights) {
  for (int b : {1, 3, 8, 16}) {
    auto w = wgap_weights(b);
    double s = 0;
    for (double x : w) {
      EXPECT_GE(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
  auto w = wgap_weights(8);
  auto best = std::max_element(w.begin(), w.end()) - w.begin();
  EXPECT_TRUE(best == 7 || best == 8);
  EXPECT_NEAR(w[7], w[8], 1e-15);
}

TEST(Euler, Ranges) {
  EulerZYZ e(-0.5, 1.0, 7.0);
  EXPECT_NEAR(e.alpha(), 2 * pi - 0.5, 1e-12);
  EXPECT_NEAR(e.gamma(), 7.0 - 2 * pi, 1e-12);
  EXPECT_THROW(EulerZYZ(0, -0.1, 0), std::invalid_argument);
  EXPECT_THROW(EulerZYZ(0, pi + 0.1, 0), std::invalid_argument);
}

TEST(Euler, Matrices) {
  EXPECT_LT(matrix_distance(euler_to_matrix({0, 0, 0}), Mat3::identity()), 1e-15);
  Vec3 p = euler_to_matrix({0, pi / 2, 0}) * Vec3{0, 0, 1};
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_NEAR(p[1], 0.0, 1e-15);
  EXPECT_NEAR(p[2], 0.0, 1e-15);
  EulerZYZ e(pi / 3, pi / 4, pi / 5);
  Mat3 want = multiply(multiply(factor_z(pi / 3), factor_y(pi / 4)), factor_z(pi / 5));
  Mat3 got = euler_to_matrix(e);
  EXPECT_LT(matrix_distance(got, want), 1e-15);
  EXPECT_NEAR(determinant(got), 1.0, 1e-14);
  EXPECT_LT(matrix_distance(multiply(got, transpose(got)), Mat3::identity()), 1e-15);
}

TEST(Euler, RoundTripCompositionAndGimbal) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    auto e = random_rotation(rng);
    EXPECT_LT(matrix_distance(euler_to_matrix(matrix_to_euler(euler_to_matrix(e))), euler_to_matrix(e)), 1e-12);
    EXPECT_LT(matrix_distance(euler_to_matrix(compose(e, EulerZYZ{})), euler_to_matrix(e)), 1e-12);
    EXPECT_LT(matrix_distance(euler_to_matrix(compose(e, inverse(e))), Mat3::identity()), 1e-12);
  }
  auto g = matrix_to_euler(euler_to_matrix({0.4, 0.0, 0.3}));
  EXPECT_DOUBLE_EQ(g.gamma(), 0.0);
  EXPECT_NEAR(g.alpha(), 0.7, 1e-12);
}

TEST(Rotate, IdentityAndConstant) {
  std::mt19937_64 rng(5);
  const int b = 8;
  auto f = sht_inverse(random_real_s2_spectrum(1, b, rng), b);
  EXPECT_LT(max_abs_difference(rotate_sphere_signal(f, {}).values, f.values), 1e-10);
  SphereSignal c(1, b);
  for (double& v : c.values) v = 2.5;
  EXPECT_LT(max_abs_difference(rotate_sphere_signal(c, random_rotation(rng)).values, c.values), 1e-10);
}

TEST(Rotate, BumpArgmaxMovesToNearestGridPoint) {
  const int b = 8;
  auto grid = make_grid(b);
  // Band-limited zonal bump, resampled brute-force at the rotated points.
  auto bump = [](const Vec3& axis, const Vec3& p) {
    double s = 0, c = dot(axis, p);
    for (int l = 0; l < 8; ++l) s += std::exp(-0.1 * l * (l + 1)) * (2 * l + 1) * std::legendre(l, c);
    return s;
  };
  SphereSignal f(1, b);
  for (int j = 0; j < 2 * b; ++j)
    for (int k = 0; k < 2 * b; ++k) f.at(0, j, k) = bump({0, 0, 1}, grid.point(j, k));
  auto r = rotate_sphere_signal(f, {0, pi / 2, 0});
  int bj = 0, bk = 0, nj = 0, nk = 0;
  double best = -1e300, near = 1e300;
  for (int j = 0; j < 2 * b; ++j)
    for (int k = 0; k < 2 * b; ++k) {
      if (r.at(0, j, k) > best) best = r.at(0, j, k), bj = j, bk = k;
      const double d = angle_between(grid.point(j, k), {1, 0, 0});
      if (d < near) near = d, nj = j, nk = k;
      EXPECT_NEAR(r.at(0, j, k), bump({1, 0, 0}, grid.point(j, k)), 1e-8);
    }
  EXPECT_NEAR(angle_between(grid.point(bj, bk), {1, 0, 0}), angle_between(grid.point(nj, nk), {1, 0, 0}), 1e-12);
}

TEST(Rotate, PreservesQuadratureMean) {
  std::mt19937_64 rng(9);
  const int b = 8;
  auto grid = make_grid(b);
  auto f = sht_inverse(random_real_s2_spectrum(1, b, rng), b);
  auto mean = [&](const SphereSignal& s) {
    double m = 0;
    for (int j = 0; j < 2 * b; ++j)
      for (int k = 0; k < 2 * b; ++k) m += grid.sht_weights[static_cast<std::size_t>(j)] * s.at(0, j, k);
    return m;
  };
  EXPECT_NEAR(mean(rotate_sphere_signal(f, random_rotation(rng))), mean(f), 1e-9);
}

TEST(Signals, ShapesAndValidation) {
  SphereSignal s(2, 3);
  EXPECT_EQ(s.values.size(), 2u * 36u);
  s.values[5] = std::nan("");
  EXPECT_THROW(s.validate(), ValidationError);
  SO3Signal q(1, 2);
  EXPECT_EQ(q.values.size(), 64u);
  EXPECT_EQ(q.index(0, 1, 2, 3), 1u * 16 + 2 * 4 + 3);
  EXPECT_THROW(SphereSignal(0, 2), std::invalid_argument);
}

TEST(Seeds, DeriveSeedSeparatesStreams) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
}
