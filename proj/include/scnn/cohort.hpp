#pragma once

// Synthetic two-hemisphere thickness cohorts with class-dependent regional
// thinning. Every subject draws from its own derived seed, so generation order
// and thread count do not affect the result.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "scnn/rotation.hpp"
#include "scnn/signal_io.hpp"

namespace scnn {

struct AtrophySite {
  Hemisphere hemisphere = Hemisphere::left;
  Vec3 center{0, 0, 1};
  double radius = 0.5;  // angular, radians
  double depth = 0.8;   // mm at class multiplier 1
};

struct Demographics {
  double age_mean = 75.0, age_std = 7.0;
  double male_share = 0.5;
};

struct CohortSpec {
  std::array<int, 4> counts{151, 114, 136, 188};  // CN, MCI-s, MCI-p, AD
  int bandwidth = 16;
  double base_mean = 2.5;          // mm
  double smooth_amplitude = 0.1;   // RMS of the random smooth field, mm
  int smooth_degree = 8;           // highest degree of the smooth field
  std::vector<AtrophySite> sites = default_sites();
  std::array<double, 4> class_multiplier{0.0, 0.35, 0.65, 1.0};
  double depth_jitter = 0.1;  // std of the per-subject, per-site relative depth jitter
  double noise_std = 0.1;     // mm, i.i.d. per grid sample
  double misregistration_std = 0.0;  // radians
  double min_thickness = 0.5;
  std::array<Demographics, 4> demographics{{{75.64, 5.25, 74.0 / 151.0},
                                            {74.90, 7.33, 72.0 / 114.0},
                                            {74.69, 6.95, 85.0 / 136.0},
                                            {75.18, 7.50, 99.0 / 188.0}}};
  std::uint64_t seed = 0;

  // One medial-temporal-like and one parietal-like site per hemisphere, both
  // at points of the coarsest trunk grid (b = 2) so localisation is scorable.
  static std::vector<AtrophySite> default_sites() {
    std::vector<AtrophySite> s;
    for (auto h : {Hemisphere::left, Hemisphere::right}) {
      s.push_back({h, sphere_point(5.0 * pi / 8.0, pi), 0.5, 0.8});
      s.push_back({h, sphere_point(3.0 * pi / 8.0, pi / 2.0), 0.5, 0.8});
    }
    return s;
  }

  int total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }

  void validate() const {
    for (int c : counts)
      if (c < 0) throw ValidationError("cohort: class counts must be >= 0");
    if (bandwidth < 1) throw ValidationError("cohort: bandwidth must be >= 1");
    if (smooth_degree < 0) throw ValidationError("cohort: smooth_degree must be >= 0");
    if (!(noise_std >= 0.0) || !(smooth_amplitude >= 0.0) || !(misregistration_std >= 0.0) || !(depth_jitter >= 0.0))
      throw ValidationError("cohort: standard deviations must be >= 0");
    for (const auto& s : sites) {
      if (!(s.radius > 0.0 && s.radius < pi)) throw ValidationError("cohort: site radius must lie in (0, pi)");
      if (!(s.depth >= 0.0)) throw ValidationError("cohort: site depth must be >= 0");
      if (!(norm(s.center) > 0.0)) throw ValidationError("cohort: site center must be nonzero");
    }
    for (const auto& d : demographics)
      if (!(d.age_std >= 0.0) || !(d.male_share >= 0.0 && d.male_share <= 1.0)) throw ValidationError("cohort: bad demographics");
  }
};

// Age ~ N(mean, std) truncated to [55, 95] by rejection; gender ~ Bernoulli.
inline std::pair<double, char> demographic_sampler(const CohortSpec& spec, Diagnosis d, std::mt19937_64& rng) {
  const auto& dm = spec.demographics[static_cast<std::size_t>(d)];
  double age = dm.age_mean;
  if (dm.age_std > 0.0) {
    std::normal_distribution<double> g(dm.age_mean, dm.age_std);
    do {
      age = g(rng);
    } while (age < 55.0 || age > 95.0);
  }
  std::bernoulli_distribution male(dm.male_share);
  return {age, male(rng) ? 'M' : 'F'};
}

// Axis uniform on the sphere, angle ~ N(0, std); identity when std is 0.
inline EulerZYZ random_misregistration(std::mt19937_64& rng, double std) {
  std::normal_distribution<double> n01;
  Vec3 axis{n01(rng), n01(rng), n01(rng)};
  const double angle = std * n01(rng);
  if (!(std > 0.0) || !(norm(axis) > 0.0)) return {};
  return matrix_to_euler(axis_angle(axis, angle));
}

struct Subject {
  SubjectRecord record;
  SphereSignal left, right;
};

inline double bump(const Vec3& center, const Vec3& x, double radius) {
  const double a = angle_between(center, x) / radius;
  return std::exp(-a * a);
}

// Subject `index` of the cohort; `extra` is composed after the subject's own
// misregistration (used for test-time rotations).
inline Subject generate_subject(const CohortSpec& spec, Diagnosis d, std::size_t index, const EulerZYZ& extra = {}) {
  std::mt19937_64 rng(derive_seed(spec.seed, 0xc0401, index));
  std::normal_distribution<double> n01;
  Subject s;
  s.record.id = "sub" + std::to_string(index);
  s.record.label = d;
  std::tie(s.record.age, s.record.gender) = demographic_sampler(spec, d, rng);

  EulerZYZ rot = extra;
  if (spec.misregistration_std > 0.0) rot = compose(extra, random_misregistration(rng, spec.misregistration_std));
  const Mat3 R = euler_to_matrix(rot);

  const int b = spec.bandwidth;
  const int L = std::min(b, spec.smooth_degree + 1);
  const double sigma = L > 1 ? spec.smooth_amplitude * std::sqrt(4.0 * pi / (L * L - 1.0)) : 0.0;
  auto grid = make_grid(b);
  for (auto h : {Hemisphere::left, Hemisphere::right}) {
    S2Spectrum F(1, L);
    for (int l = 1; l < L; ++l) {
      F.at(0, l, 0) = sigma * n01(rng);
      for (int m = 1; m <= l; ++m) {
        cplx c = sigma / std::sqrt(2.0) * cplx{n01(rng), n01(rng)};
        F.at(0, l, m) = c;
        F.at(0, l, -m) = ((m % 2 == 0) ? 1.0 : -1.0) * std::conj(c);
      }
    }
    F.at(0, 0, 0) = spec.base_mean * std::sqrt(4.0 * pi);
    SphereSignal f = sht_inverse(rotate_spectrum(F, rot), b);
    for (const auto& site : spec.sites) {
      if (site.hemisphere != h) continue;
      const double depth = site.depth * spec.class_multiplier[static_cast<std::size_t>(d)] * (1.0 + spec.depth_jitter * n01(rng));
      const Vec3 c = R * Vec3{site.center[0] / norm(site.center), site.center[1] / norm(site.center), site.center[2] / norm(site.center)};
      for (int j = 0; j < grid.size(); ++j)
        for (int k = 0; k < grid.size(); ++k) f.at(0, j, k) -= depth * bump(c, grid.point(j, k), site.radius);
    }
    for (double& v : f.values) v = std::max(spec.min_thickness, v + spec.noise_std * n01(rng));
    (h == Hemisphere::left ? s.left : s.right) = std::move(f);
  }
  return s;
}

// Class order CN, MCI-s, MCI-p, AD; subject index runs across classes.
inline std::vector<Subject> generate_cohort(const CohortSpec& spec, int threads = num_threads()) {
  spec.validate();
  std::vector<Diagnosis> labels;
  for (std::size_t c = 0; c < 4; ++c)
    for (int i = 0; i < spec.counts[c]; ++i) labels.push_back(all_diagnoses[c]);
  std::vector<Subject> out(labels.size());
  parallel_for(
      labels.size(), [&](std::size_t i) { out[i] = generate_subject(spec, labels[i], i); }, threads);
  return out;
}

// Writes signals/<id>_L.sphs, signals/<id>_R.sphs and manifest.csv under dir.
// Manifest paths are relative to dir.
inline std::vector<SubjectRecord> write_cohort(std::vector<Subject>& subjects, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "signals", ec);
  if (ec) throw ValidationError("cannot create " + dir + ": " + ec.message());
  std::vector<SubjectRecord> rows;
  for (auto& s : subjects) {
    s.record.left_path = "signals/" + s.record.id + "_L.sphs";
    s.record.right_path = "signals/" + s.record.id + "_R.sphs";
    save_sphere_signal(s.left, Hemisphere::left, (fs::path(dir) / s.record.left_path).string());
    save_sphere_signal(s.right, Hemisphere::right, (fs::path(dir) / s.record.right_path).string());
    rows.push_back(s.record);
  }
  save_manifest(rows, (fs::path(dir) / "manifest.csv").string());
  return rows;
}

// Non-learned score: mean thickness inside the sites (lower = more atrophy),
// negated so that higher means more likely diseased.
inline double site_thickness_score(const CohortSpec& spec, const Subject& s) {
  auto grid = make_grid(s.left.bandwidth);
  double sum = 0.0;
  int count = 0;
  for (const auto& site : spec.sites) {
    const SphereSignal& f = site.hemisphere == Hemisphere::left ? s.left : s.right;
    for (int j = 0; j < grid.size(); ++j)
      for (int k = 0; k < grid.size(); ++k)
        if (angle_between(site.center, grid.point(j, k)) < site.radius) {
          sum += f.at(0, j, k);
          ++count;
        }
  }
  return count ? -sum / count : 0.0;
}

}  // namespace scnn
