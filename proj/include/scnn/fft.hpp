#pragma once

// Thin FFTW wrapper: cached in-place batched 1D and 2D complex transforms.
// Plans use FFTW_ESTIMATE | FFTW_UNALIGNED so the chosen algorithm, and hence
// every bit of the output, is independent of timing and buffer alignment.

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <tuple>

#include "scnn/core.hpp"

namespace scnn::fft {

enum class Sign : int { minus = FFTW_FORWARD, plus = FFTW_BACKWARD };

namespace detail {

struct PlanKey {
  int rank, n, howmany, sign;
  auto operator<=>(const PlanKey&) const = default;
};

inline fftw_plan plan_for(const PlanKey& key) {
  static std::mutex mutex;
  static std::map<PlanKey, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto it = plans.find(key);
  if (it != plans.end()) return it->second;
  const int per = key.rank == 1 ? key.n : key.n * key.n;
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(per * key.howmany)));
  int dims[2] = {key.n, key.n};
  fftw_plan p = fftw_plan_many_dft(key.rank, dims, key.howmany, buf, nullptr, 1, per, buf, nullptr, 1, per, key.sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  if (p == nullptr) throw InternalError("fftw: plan creation failed");
  plans.emplace(key, p);
  return p;
}

}  // namespace detail

// In place: data[r*n + k] <- sum_t data[r*n + t] exp(sign * 2 pi i t k / n), r < howmany.
inline void transform_rows(cplx* data, int n, int howmany, Sign sign) {
  fftw_plan p = detail::plan_for({1, n, howmany, static_cast<int>(sign)});
  auto* d = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(p, d, d);
}

// In place 2D n x n transform on each of `howmany` contiguous planes.
inline void transform_planes(cplx* data, int n, int howmany, Sign sign) {
  fftw_plan p = detail::plan_for({2, n, howmany, static_cast<int>(sign)});
  auto* d = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(p, d, d);
}

}  // namespace scnn::fft
