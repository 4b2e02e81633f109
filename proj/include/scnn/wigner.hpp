#pragma once

// Little Wigner d-matrices d^l_mn(beta) and the per-grid tables used by the
// spherical and rotation-group transforms.
//
// Convention: d^l_mn(beta) = <l m| exp(-i beta J_y) |l n>, so that
// D^l_mn(a, b, g) = exp(-i m a) d^l_mn(b) exp(-i n g) and, with
// Condon-Shortley spherical harmonics, Y_l^m(b, a) = sqrt((2l+1)/4pi) d^l_m0(b) e^{ima}.
//
// Entries are generated by the three-term recursion in l at fixed (m, n),
// seeded at l0 = max(|m|, |n|) where the explicit sum has a single term.

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "scnn/core.hpp"
#include "scnn/sphere_grid.hpp"

namespace scnn {

// Offset of degree-l block inside a concatenation of (2l'+1)^2 blocks, l' < l.
constexpr std::size_t so3_block_offset(int l) {
  return static_cast<std::size_t>(l) * (4 * static_cast<std::size_t>(l) * l - 1) / 3;
}
constexpr std::size_t so3_spectrum_size(int max_degree) { return so3_block_offset(max_degree); }

// Index of (m, n) inside block l.
constexpr std::size_t block_index(int l, int m, int n) {
  return static_cast<std::size_t>(m + l) * static_cast<std::size_t>(2 * l + 1) + static_cast<std::size_t>(n + l);
}

constexpr std::size_t s2_index(int l, int m) { return static_cast<std::size_t>(l * l + l + m); }

namespace detail {

// Single-term closed form valid at l = max(|m|, |n|).
inline double wigner_d_seed(int l, int m, int n, double beta) {
  const int s = std::max(0, n - m);
  const int pc = 2 * l + n - m - 2 * s;  // power of cos(beta/2)
  const int ps = m - n + 2 * s;          // power of sin(beta/2)
  const double c = std::cos(beta / 2.0), sn = std::sin(beta / 2.0);
  if ((pc > 0 && c == 0.0) || (ps > 0 && sn == 0.0)) return 0.0;
  auto lf = [](int k) { return std::lgamma(static_cast<double>(k) + 1.0); };
  double log_mag = 0.5 * (lf(l + m) + lf(l - m) + lf(l + n) + lf(l - n)) - lf(l + n - s) - lf(s) - lf(m - n + s) - lf(l - m - s);
  if (pc > 0) log_mag += pc * std::log(std::abs(c));
  if (ps > 0) log_mag += ps * std::log(std::abs(sn));
  double sign = ((m - n + s) % 2 == 0) ? 1.0 : -1.0;
  if (pc % 2 == 1 && c < 0.0) sign = -sign;
  if (ps % 2 == 1 && sn < 0.0) sign = -sign;
  return sign * std::exp(log_mag);
}

// Writes d^l_mn(beta) into out[l - l0] for l0 <= l < l_end.
inline void wigner_d_column(int m, int n, int l_end, double beta, double* out) {
  const int l0 = std::max(std::abs(m), std::abs(n));
  if (l0 >= l_end) return;
  const double cb = std::cos(beta);
  double prev = 0.0;
  double cur = wigner_d_seed(l0, m, n, beta);
  out[0] = cur;
  const double mm = static_cast<double>(m) * m, nn = static_cast<double>(n) * n;
  for (int l = l0; l + 1 < l_end; ++l) {
    const double lp = l + 1.0;
    const double denom = std::sqrt((lp * lp - mm) * (lp * lp - nn));
    double next;
    if (l == 0) {
      next = cb * cur;
    } else {
      const double a = lp * (2.0 * l + 1.0) / denom;
      const double shift = static_cast<double>(m) * n / (static_cast<double>(l) * lp);
      const double bcoef = lp * std::sqrt((l * static_cast<double>(l) - mm) * (l * static_cast<double>(l) - nn)) / (l * denom);
      next = a * (cb - shift) * cur - bcoef * prev;
    }
    prev = cur;
    cur = next;
    out[l + 1 - l0] = cur;
  }
}

}  // namespace detail

// (2l+1) x (2l+1) matrix indexed by (m, n) in [-l, l].
struct WignerMatrix {
  int l = 0;
  std::vector<double> values;

  double operator()(int m, int n) const { return values[block_index(l, m, n)]; }
  int dim() const { return 2 * l + 1; }
};

// Full little-d matrix of degree l.
inline WignerMatrix wigner_d(int l, double beta) {
  if (l < 0) throw std::invalid_argument("wigner_d: negative degree");
  WignerMatrix w{l, std::vector<double>(static_cast<std::size_t>((2 * l + 1) * (2 * l + 1)))};
  std::vector<double> col(static_cast<std::size_t>(l + 1));
  for (int m = -l; m <= l; ++m)
    for (int n = -l; n <= l; ++n) {
      detail::wigner_d_column(m, n, l + 1, beta, col.data());
      int l0 = std::max(std::abs(m), std::abs(n));
      w.values[block_index(l, m, n)] = col[static_cast<std::size_t>(l - l0)];
    }
  return w;
}

// All blocks l < max_degree at one beta, concatenated in SO(3)-spectrum layout.
inline std::vector<double> wigner_d_blocks(int max_degree, double beta) {
  std::vector<double> out(so3_spectrum_size(max_degree));
  std::vector<double> col(static_cast<std::size_t>(std::max(1, max_degree)));
  for (int m = -(max_degree - 1); m < max_degree; ++m)
    for (int n = -(max_degree - 1); n < max_degree; ++n) {
      int l0 = std::max(std::abs(m), std::abs(n));
      detail::wigner_d_column(m, n, max_degree, beta, col.data());
      for (int l = l0; l < max_degree; ++l) out[so3_block_offset(l) + block_index(l, m, n)] = col[static_cast<std::size_t>(l - l0)];
    }
  return out;
}

// d^l(beta_j) for every grid beta of bandwidth b and every l < max_degree.
class WignerTables {
public:
  WignerTables(int bandwidth, int max_degree) : bandwidth_(bandwidth), max_degree_(max_degree) {
    if (bandwidth < 1 || max_degree < 1 || max_degree > bandwidth)
      throw std::invalid_argument("WignerTables: need 1 <= max_degree <= bandwidth");
    auto grid = make_grid(bandwidth);
    stride_ = so3_spectrum_size(max_degree);
    table_.reserve(stride_ * grid.betas.size());
    for (double beta : grid.betas) {
      auto blocks = wigner_d_blocks(max_degree, beta);
      table_.insert(table_.end(), blocks.begin(), blocks.end());
    }
  }

  int bandwidth() const { return bandwidth_; }
  int max_degree() const { return max_degree_; }

  // Block-concatenated d-matrices at grid beta j.
  const double* at(int j) const { return table_.data() + stride_ * static_cast<std::size_t>(j); }
  double d(int l, int m, int n, int j) const { return at(j)[so3_block_offset(l) + block_index(l, m, n)]; }

private:
  int bandwidth_;
  int max_degree_;
  std::size_t stride_ = 0;
  std::vector<double> table_;
};

// Normalised associated Legendre values lambda_lm(beta_j) =
// sqrt((2l+1)/4pi) d^l_m0(beta_j), layout [j][l*l + l + m].
class LegendreTable {
public:
  LegendreTable(int bandwidth, int max_degree) : bandwidth_(bandwidth), max_degree_(max_degree) {
    if (bandwidth < 1 || max_degree < 1 || max_degree > bandwidth)
      throw std::invalid_argument("LegendreTable: need 1 <= max_degree <= bandwidth");
    auto grid = make_grid(bandwidth);
    stride_ = static_cast<std::size_t>(max_degree) * max_degree;
    table_.assign(stride_ * grid.betas.size(), 0.0);
    std::vector<double> col(static_cast<std::size_t>(max_degree));
    for (std::size_t j = 0; j < grid.betas.size(); ++j) {
      double* row = table_.data() + stride_ * j;
      for (int m = -(max_degree - 1); m < max_degree; ++m) {
        detail::wigner_d_column(m, 0, max_degree, grid.betas[j], col.data());
        for (int l = std::abs(m); l < max_degree; ++l)
          row[s2_index(l, m)] = std::sqrt((2.0 * l + 1.0) / (4.0 * pi)) * col[static_cast<std::size_t>(l - std::abs(m))];
      }
    }
  }

  int bandwidth() const { return bandwidth_; }
  int max_degree() const { return max_degree_; }
  const double* at(int j) const { return table_.data() + stride_ * static_cast<std::size_t>(j); }

private:
  int bandwidth_;
  int max_degree_;
  std::size_t stride_ = 0;
  std::vector<double> table_;
};

namespace detail {

template <class Table>
std::shared_ptr<const Table> cached_table(int bandwidth, int max_degree) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const Table>> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(bandwidth, max_degree);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto table = std::make_shared<const Table>(bandwidth, max_degree);
  cache.emplace(key, table);
  return table;
}

}  // namespace detail

inline std::shared_ptr<const WignerTables> wigner_tables(int bandwidth, int max_degree) {
  return detail::cached_table<WignerTables>(bandwidth, max_degree);
}

inline std::shared_ptr<const LegendreTable> legendre_table(int bandwidth, int max_degree) {
  return detail::cached_table<LegendreTable>(bandwidth, max_degree);
}

}  // namespace scnn
