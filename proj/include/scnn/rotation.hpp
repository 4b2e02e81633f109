#pragma once

// Rotation of band-limited grid signals, done spectrally so that it is exact
// below the bandwidth. Used as the oracle in equivariance checks.

#include "scnn/spectral.hpp"

namespace scnn {

// x -> f(R^{-1} x) on the same grid.
inline SphereSignal rotate_sphere_signal(const SphereSignal& f, const EulerZYZ& e, const RotationOptions& opt = {}) {
  auto F = rotate_spectrum(sht_forward(f), e, opt);
  if (opt.flip_wigner_sign)  // keep the broken rotation real so it fails by value
    for (int c = 0; c < F.channels; ++c) s2_make_real(F.channel(c), F.max_degree);
  return sht_inverse(F, f.bandwidth);
}

// Left translation R -> f(Q^{-1} R).
inline SO3Signal rotate_so3_signal(const SO3Signal& f, const EulerZYZ& e, const RotationOptions& opt = {}) {
  auto F = rotate_spectrum(so3_ft_forward(f), e, opt);
  if (opt.flip_wigner_sign)
    for (int c = 0; c < F.channels; ++c) so3_make_real(F.channel(c), F.max_degree);
  return so3_ft_inverse(F, f.bandwidth);
}

}  // namespace scnn
