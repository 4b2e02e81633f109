#include <gtest/gtest.h>

#include <filesystem>

#include "scnn/checks.hpp"
#include "scnn/cohort.hpp"
#include "scnn/evaluation.hpp"

using namespace scnn;

namespace {

CohortSpec noiseless() {
  CohortSpec s;
  s.counts = {1, 1, 1, 1};
  s.bandwidth = 8;
  s.smooth_amplitude = 0;
  s.depth_jitter = 0;
  s.noise_std = 0;
  s.seed = 3;
  return s;
}

// base - sum of class-scaled Gaussian bumps around the (rotated) site centres.
double expected_thickness(const CohortSpec& spec, Diagnosis d, Hemisphere h, const Vec3& x, const Mat3& R) {
  double v = spec.base_mean;
  for (const auto& s : spec.sites) {
    if (s.hemisphere != h) continue;
    const Vec3 c = R * s.center;
    const double t = std::acos(std::clamp(dot(c, x), -1.0, 1.0)) / s.radius;
    v -= s.depth * spec.class_multiplier[static_cast<std::size_t>(d)] * std::exp(-t * t);
  }
  return std::max(v, spec.min_thickness);
}

double rotation_angle(const Mat3& m) { return std::acos(std::clamp((m(0, 0) + m(1, 1) + m(2, 2) - 1.0) / 2.0, -1.0, 1.0)); }

}  // namespace

TEST(Cohort, CountsOrderAndIds) {
  CohortSpec s;
  s.counts = {3, 0, 2, 4};
  s.bandwidth = 4;
  auto c = generate_cohort(s);
  ASSERT_EQ(c.size(), 9u);
  EXPECT_EQ(c[0].record.label, Diagnosis::CN);
  EXPECT_EQ(c[3].record.label, Diagnosis::MCI_p);
  EXPECT_EQ(c[8].record.label, Diagnosis::AD);
  EXPECT_EQ(c[5].record.id, "sub5");
  EXPECT_EQ(c[2].left.bandwidth, 4);
}

TEST(Cohort, DeterministicAndSeedSensitive) {
  CohortSpec s;
  s.counts = {2, 0, 0, 2};
  s.seed = 17;
  auto a = generate_cohort(s, 1), b = generate_cohort(s, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].left.values, b[i].left.values);
    EXPECT_EQ(a[i].right.values, b[i].right.values);
    EXPECT_EQ(a[i].record.age, b[i].record.age);
  }
  s.seed = 18;
  auto c = generate_cohort(s);
  EXPECT_NE(a[0].left.values, c[0].left.values);
}

TEST(Cohort, NoiselessSubjectsFollowClosedForm) {
  auto spec = noiseless();
  auto grid = make_grid(spec.bandwidth);
  for (auto d : all_diagnoses) {
    auto s = generate_subject(spec, d, 0);
    for (auto h : {Hemisphere::left, Hemisphere::right}) {
      const auto& f = h == Hemisphere::left ? s.left : s.right;
      for (int j = 0; j < grid.size(); ++j)
        for (int k = 0; k < grid.size(); ++k)
          ASSERT_NEAR(f.at(0, j, k), expected_thickness(spec, d, h, grid.point(j, k), Mat3::identity()), 1e-12);
    }
  }
}

TEST(Cohort, ExtraRotationMovesTheSites) {
  auto spec = noiseless();
  auto grid = make_grid(spec.bandwidth);
  const EulerZYZ e(0.3, 0.9, -0.4);
  auto s = generate_subject(spec, Diagnosis::AD, 2, e);
  for (int j = 0; j < grid.size(); ++j)
    for (int k = 0; k < grid.size(); ++k)
      ASSERT_NEAR(s.left.at(0, j, k), expected_thickness(spec, Diagnosis::AD, Hemisphere::left, grid.point(j, k), euler_to_matrix(e)), 1e-12);
}

TEST(Cohort, ThicknessIsClamped) {
  auto spec = noiseless();
  for (auto& s : spec.sites) s.depth = 10;
  auto s = generate_subject(spec, Diagnosis::AD, 0);
  double lo = 1e300;
  for (double v : s.left.values) lo = std::min(lo, v);
  EXPECT_DOUBLE_EQ(lo, spec.min_thickness);
}

TEST(Cohort, SmoothFieldAmplitude) {
  auto spec = noiseless();
  spec.sites.clear();
  spec.smooth_amplitude = 0.2;
  spec.counts = {200, 0, 0, 0};
  auto grid = make_grid(spec.bandwidth);
  double var = 0;
  for (const auto& s : generate_cohort(spec)) {
    double m = 0, q = 0;
    for (int j = 0; j < grid.size(); ++j)
      for (int k = 0; k < grid.size(); ++k) {
        const double v = s.left.at(0, j, k) - spec.base_mean;
        m += grid.sht_weights[static_cast<std::size_t>(j)] * v;
        q += grid.sht_weights[static_cast<std::size_t>(j)] * v * v;
      }
    EXPECT_NEAR(m, 0.0, 1e-12);
    var += q / (4 * pi);
  }
  EXPECT_NEAR(std::sqrt(var / 200), 0.2, 0.02);
}

TEST(Cohort, DemographicsRespectBounds) {
  CohortSpec spec;
  spec.bandwidth = 2;
  auto c = generate_cohort(spec);
  int male = 0;
  for (const auto& s : c) {
    EXPECT_GE(s.record.age, 55.0);
    EXPECT_LE(s.record.age, 95.0);
    male += s.record.gender == 'M';
  }
  EXPECT_NEAR(static_cast<double>(male) / static_cast<double>(c.size()), 0.56, 0.07);
}

TEST(Cohort, DefaultCohortIsSeparableBySiteThickness) {
  CohortSpec spec;
  spec.counts = {89, 0, 0, 111};
  spec.seed = 1;
  std::vector<double> score;
  std::vector<int> y;
  for (const auto& s : generate_cohort(spec)) {
    score.push_back(site_thickness_score(spec, s));
    y.push_back(s.record.label == Diagnosis::AD);
  }
  EXPECT_GT(roc_auc(score, y).auc, 0.95);
}

TEST(Cohort, Validation) {
  CohortSpec s;
  s.counts[1] = -1;
  EXPECT_THROW(s.validate(), ValidationError);
  s = CohortSpec{};
  s.noise_std = -0.1;
  EXPECT_THROW(generate_cohort(s), ValidationError);
  s = CohortSpec{};
  s.sites[0].radius = 0;
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Cohort, WriteAndReload) {
  auto spec = noiseless();
  auto subjects = generate_cohort(spec);
  const auto dir = (std::filesystem::temp_directory_path() / "scnn_cohort_test").string();
  std::filesystem::remove_all(dir);
  auto rows = write_cohort(subjects, dir);
  auto back = load_manifest(dir + "/manifest.csv");
  ASSERT_EQ(back.size(), 4u);
  EXPECT_EQ(back[3].label, Diagnosis::AD);
  auto sig = load_sphere_signal(dir + "/" + back[3].right_path);
  EXPECT_EQ(sig.hemisphere, Hemisphere::right);
  EXPECT_EQ(sig.signal.values, subjects[3].right.values);
  std::filesystem::remove_all(dir);
}

TEST(Misregistration, AngleDistribution) {
  std::mt19937_64 rng(5);
  auto id = random_misregistration(rng, 0.0);
  EXPECT_NEAR(rotation_angle(euler_to_matrix(id)), 0.0, 1e-7);
  double sum = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) sum += rotation_angle(euler_to_matrix(random_misregistration(rng, 0.2)));
  // E|N(0, s)| = s sqrt(2/pi)
  EXPECT_NEAR(sum / n, 0.2 * std::sqrt(2 / pi), 0.006);
}
