#pragma once

// Equiangular Driscoll-Healy grids on S2 and SO(3), Euler ZYZ rotations and
// the signal containers sampled on those grids.

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "scnn/core.hpp"

namespace scnn {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Great-circle distance between unit vectors. atan2 form stays accurate for
// nearly coincident and nearly antipodal points.
inline double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(norm(cross(a, b)), dot(a, b)); }

// Unit vector at polar angle beta, azimuth alpha.
inline Vec3 sphere_point(double beta, double alpha) {
  return {std::sin(beta) * std::cos(alpha), std::sin(beta) * std::sin(alpha), std::cos(beta)};
}

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> a{};

  double& operator()(int r, int c) { return a[static_cast<std::size_t>(3 * r + c)]; }
  double operator()(int r, int c) const { return a[static_cast<std::size_t>(3 * r + c)]; }

  static Mat3 identity() {
    Mat3 m;
    m(0, 0) = m(1, 1) = m(2, 2) = 1.0;
    return m;
  }
};

inline Mat3 operator*(const Mat3& x, const Mat3& y) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += x(i, k) * y(k, j);
      r(i, j) = s;
    }
  return r;
}

inline Vec3 operator*(const Mat3& m, const Vec3& v) {
  return {m(0, 0) * v[0] + m(0, 1) * v[1] + m(0, 2) * v[2], m(1, 0) * v[0] + m(1, 1) * v[1] + m(1, 2) * v[2],
          m(2, 0) * v[0] + m(2, 1) * v[1] + m(2, 2) * v[2]};
}

inline Mat3 transpose(const Mat3& m) {
  Mat3 t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t(i, j) = m(j, i);
  return t;
}

inline double determinant(const Mat3& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

inline Mat3 rot_z(double t) {
  Mat3 m = Mat3::identity();
  m(0, 0) = std::cos(t);
  m(0, 1) = -std::sin(t);
  m(1, 0) = std::sin(t);
  m(1, 1) = std::cos(t);
  return m;
}

inline Mat3 rot_y(double t) {
  Mat3 m = Mat3::identity();
  m(0, 0) = std::cos(t);
  m(0, 2) = std::sin(t);
  m(2, 0) = -std::sin(t);
  m(2, 2) = std::cos(t);
  return m;
}

// Rodrigues rotation by `angle` about `axis`.
inline Mat3 axis_angle(const Vec3& axis, double angle) {
  double n = norm(axis);
  Vec3 u{axis[0] / n, axis[1] / n, axis[2] / n};
  double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Mat3 m;
  m(0, 0) = c + u[0] * u[0] * t;
  m(0, 1) = u[0] * u[1] * t - u[2] * s;
  m(0, 2) = u[0] * u[2] * t + u[1] * s;
  m(1, 0) = u[1] * u[0] * t + u[2] * s;
  m(1, 1) = c + u[1] * u[1] * t;
  m(1, 2) = u[1] * u[2] * t - u[0] * s;
  m(2, 0) = u[2] * u[0] * t - u[1] * s;
  m(2, 1) = u[2] * u[1] * t + u[0] * s;
  m(2, 2) = c + u[2] * u[2] * t;
  return m;
}

inline double wrap_two_pi(double x) {
  double r = std::fmod(x, 2.0 * pi);
  if (r < 0.0) r += 2.0 * pi;
  if (r >= 2.0 * pi) r = 0.0;
  return r;
}

// Rotation Z(alpha) Y(beta) Z(gamma). alpha and gamma are wrapped into
// [0, 2pi); beta outside [0, pi] is rejected.
class EulerZYZ {
public:
  EulerZYZ() = default;
  EulerZYZ(double alpha, double beta, double gamma) : alpha_(wrap_two_pi(alpha)), beta_(beta), gamma_(wrap_two_pi(gamma)) {
    if (!(beta >= 0.0 && beta <= pi)) throw std::invalid_argument("EulerZYZ: beta outside [0, pi]: " + std::to_string(beta));
  }

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }

private:
  double alpha_ = 0.0, beta_ = 0.0, gamma_ = 0.0;
};

inline Mat3 euler_to_matrix(const EulerZYZ& e) { return rot_z(e.alpha()) * rot_y(e.beta()) * rot_z(e.gamma()); }

// Inverse of euler_to_matrix. Near the gimbal poles only alpha +/- gamma is
// determined; gamma is set to 0 there.
inline EulerZYZ matrix_to_euler(const Mat3& r) {
  constexpr double gimbal = 1e-12;
  double c = std::clamp(r(2, 2), -1.0, 1.0);
  double s = std::hypot(r(0, 2), r(1, 2));
  if (s < gimbal) {
    if (c > 0.0) return {std::atan2(r(1, 0), r(0, 0)), 0.0, 0.0};
    return {std::atan2(-r(1, 0), -r(0, 0)), pi, 0.0};
  }
  double beta = std::atan2(s, c);
  return {std::atan2(r(1, 2), r(0, 2)), beta, std::atan2(r(2, 1), -r(2, 0))};
}

// Rotation outer * inner (inner applied first).
inline EulerZYZ compose(const EulerZYZ& outer, const EulerZYZ& inner) {
  return matrix_to_euler(euler_to_matrix(outer) * euler_to_matrix(inner));
}

inline EulerZYZ inverse(const EulerZYZ& e) { return matrix_to_euler(transpose(euler_to_matrix(e))); }

// Driscoll-Healy quadrature weights on beta_j = pi(2j+1)/(4b); they sum to 2
// and integrate sin(beta)-weighted band-limited products exactly.
inline std::vector<double> dh_weights(int b) {
  std::vector<double> w(static_cast<std::size_t>(2 * b));
  for (int j = 0; j < 2 * b; ++j) {
    double theta = pi * (2 * j + 1) / (4.0 * b);
    double s = 0.0;
    for (int k = 0; k < b; ++k) s += std::sin((2 * k + 1) * theta) / (2 * k + 1);
    w[static_cast<std::size_t>(j)] = (2.0 / b) * std::sin(theta) * s;
  }
  return w;
}

struct SphereGrid {
  int bandwidth = 0;
  std::vector<double> betas;        // 2b polar angles
  std::vector<double> alphas;       // 2b azimuths
  std::vector<double> sht_weights;  // per-beta quadrature weight incl. alpha spacing
  std::vector<double> sin_weights;  // sin(beta_j)

  int size() const { return 2 * bandwidth; }
  Vec3 point(int j, int k) const {
    return sphere_point(betas[static_cast<std::size_t>(j)], alphas[static_cast<std::size_t>(k)]);
  }
};

inline SphereGrid make_grid(int bandwidth) {
  if (bandwidth < 1) throw std::invalid_argument("make_grid: bandwidth must be >= 1");
  SphereGrid g;
  g.bandwidth = bandwidth;
  const int n = 2 * bandwidth;
  auto dh = dh_weights(bandwidth);
  for (int j = 0; j < n; ++j) {
    double beta = pi * (2 * j + 1) / (4.0 * bandwidth);
    g.betas.push_back(beta);
    g.alphas.push_back(pi * j / bandwidth);
    g.sht_weights.push_back(dh[static_cast<std::size_t>(j)] * pi / bandwidth);
    g.sin_weights.push_back(std::sin(beta));
  }
  return g;
}

// Per-beta pooling weights: sin(beta_j) normalised to sum to one.
inline std::vector<double> wgap_weights(const SphereGrid& grid) {
  std::vector<double> w = grid.sin_weights;
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

inline std::vector<double> wgap_weights(int bandwidth) { return wgap_weights(make_grid(bandwidth)); }

// Quadrature weights normalised to sum to one (exact-integration analogue of
// wgap_weights).
inline std::vector<double> dh_mean_weights(int bandwidth) {
  auto w = dh_weights(bandwidth);
  for (double& x : w) x /= 2.0;
  return w;
}

// c x 2b x 2b samples in (channel, beta, alpha) order.
struct SphereSignal {
  int channels = 0;
  int bandwidth = 0;
  std::vector<double> values;

  SphereSignal() = default;
  SphereSignal(int c, int b) : channels(c), bandwidth(b), values(static_cast<std::size_t>(c) * 4 * b * b, 0.0) {
    if (c < 1 || b < 1) throw std::invalid_argument("SphereSignal: channels and bandwidth must be positive");
  }

  int size() const { return 2 * bandwidth; }
  std::size_t channel_size() const { return static_cast<std::size_t>(4) * bandwidth * bandwidth; }
  std::size_t index(int c, int j, int k) const {
    return (static_cast<std::size_t>(c) * size() + static_cast<std::size_t>(j)) * size() + static_cast<std::size_t>(k);
  }
  double& at(int c, int j, int k) { return values[index(c, j, k)]; }
  double at(int c, int j, int k) const { return values[index(c, j, k)]; }

  void validate() const {
    if (values.size() != static_cast<std::size_t>(channels) * channel_size())
      throw ValidationError("SphereSignal: value count does not match shape");
    for (double v : values)
      if (!std::isfinite(v)) throw ValidationError("SphereSignal: non-finite value");
  }
};

// c x 2b x 2b x 2b samples in (channel, alpha, beta, gamma) order.
struct SO3Signal {
  int channels = 0;
  int bandwidth = 0;
  std::vector<double> values;

  SO3Signal() = default;
  SO3Signal(int c, int b) : channels(c), bandwidth(b), values(static_cast<std::size_t>(c) * 8 * b * b * b, 0.0) {
    if (c < 1 || b < 1) throw std::invalid_argument("SO3Signal: channels and bandwidth must be positive");
  }

  int size() const { return 2 * bandwidth; }
  std::size_t channel_size() const { return static_cast<std::size_t>(8) * bandwidth * bandwidth * bandwidth; }
  std::size_t index(int c, int a, int j, int g) const {
    std::size_t n = static_cast<std::size_t>(size());
    return ((static_cast<std::size_t>(c) * n + static_cast<std::size_t>(a)) * n + static_cast<std::size_t>(j)) * n +
           static_cast<std::size_t>(g);
  }
  double& at(int c, int a, int j, int g) { return values[index(c, a, j, g)]; }
  double at(int c, int a, int j, int g) const { return values[index(c, a, j, g)]; }

  void validate() const {
    if (values.size() != static_cast<std::size_t>(channels) * channel_size())
      throw ValidationError("SO3Signal: value count does not match shape");
    for (double v : values)
      if (!std::isfinite(v)) throw ValidationError("SO3Signal: non-finite value");
  }
};

}  // namespace scnn
