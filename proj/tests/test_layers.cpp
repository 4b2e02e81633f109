#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "scnn/checks.hpp"

using namespace scnn;

namespace {

double rel_max(const std::vector<double>& got, const std::vector<double>& want) {
  double m = 0, s = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    m = std::max(m, std::abs(got[i] - want[i]));
    s = std::max(s, std::abs(want[i]));
  }
  return m / s;
}

SphereSignal random_sphere(int c, int b, std::mt19937_64& rng) { return sht_inverse(random_real_s2_spectrum(c, b, rng), b); }
SO3Signal random_so3(int c, int b, std::mt19937_64& rng) { return so3_ft_inverse(random_real_so3_spectrum(c, b, rng), b); }

template <class L>
void randomize(L& layer, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  for (auto& z : layer.kernel) z = {g(rng), g(rng)};
  for (auto& b : layer.bias) b = g(rng);
}

}  // namespace

TEST(S2Conv, PaperShapeAndParameterCount) {
  S2ConvLayer l(1, 32, 64, 32);
  EXPECT_EQ(l.parameter_count(), 65568u);
  S2ConvLayer small(1, 2, 4, 2);
  auto y = s2_conv(small, SphereSignal(1, 4));
  EXPECT_EQ(y.channels, 2);
  EXPECT_EQ(y.bandwidth, 2);
  EXPECT_THROW(s2_conv(small, SphereSignal(1, 3)), std::invalid_argument);
  EXPECT_THROW(s2_conv(small, SphereSignal(2, 4)), std::invalid_argument);
  EXPECT_THROW(S2ConvLayer(1, 1, 2, 3), std::invalid_argument);
}

TEST(S2Conv, ZeroKernelGivesZero) {
  std::mt19937_64 rng(1);
  S2ConvLayer l(2, 3, 4, 4);
  auto y = s2_conv(l, random_sphere(2, 4, rng));
  for (double v : y.values) EXPECT_EQ(v, 0.0);
}

TEST(S2Conv, DegreeZeroKernelGivesScaledMean) {
  std::mt19937_64 rng(2);
  S2ConvLayer l(1, 1, 4, 4);
  l.k(0, 0)[0] = 1.0;
  auto f = random_sphere(1, 4, rng);
  auto y = s2_conv(l, f);
  auto g = make_grid(4);
  double integral = 0;
  for (int j = 0; j < 8; ++j)
    for (int k = 0; k < 8; ++k) integral += g.sht_weights[static_cast<std::size_t>(j)] * f.at(0, j, k);
  // psi = Y_0^0 = 1/sqrt(4 pi) everywhere.
  for (double v : y.values) EXPECT_NEAR(v, integral / std::sqrt(4 * pi), 1e-12);
}

TEST(S2Conv, MatchesQuadratureIntegral) {
  std::mt19937_64 rng(3);
  for (int bo : {2, 4}) {
    S2ConvLayer l(2, 2, 4, bo);
    randomize(l, rng);
    auto f = random_sphere(2, 4, rng);
    EXPECT_LT(rel_max(s2_conv(l, f).values, oracle::s2_conv_quadrature(l, f).values), 1e-6) << bo;
  }
}

TEST(SO3Conv, MatchesQuadratureIntegral) {
  std::mt19937_64 rng(4);
  SO3ConvLayer l(2, 2, 4, 3);
  randomize(l, rng);
  auto f = random_so3(2, 4, rng);
  EXPECT_LT(rel_max(so3_conv(l, f).values, oracle::so3_conv_quadrature(l, f).values), 1e-6);
}

TEST(SO3Conv, IdentityKernelTruncates) {
  // Psi(l) = I convolves with the delta at the identity.
  std::mt19937_64 rng(5);
  SO3ConvLayer l(1, 1, 4, 2);
  for (int ll = 0; ll < 2; ++ll)
    for (int m = -ll; m <= ll; ++m) l.k(0, 0)[so3_block_offset(ll) + block_index(ll, m, m)] = 1.0;
  auto f = random_so3(1, 4, rng);
  auto F = so3_ft_forward(f);
  SO3Spectrum T(1, 2);
  for (int ll = 0; ll < 2; ++ll)
    for (int m = -ll; m <= ll; ++m)
      for (int n = -ll; n <= ll; ++n) T.at(0, ll, m, n) = F.at(0, ll, m, n);
  EXPECT_LT(max_abs_difference(so3_conv(l, f).values, so3_ft_inverse(T, 2).values), 1e-9);
}

TEST(SO3Conv, PaperShapeAndCounts) {
  SO3ConvLayer l(32, 64, 32, 16);
  std::size_t blocks = 0;
  for (int ll = 0; ll < 16; ++ll) blocks += static_cast<std::size_t>((2 * ll + 1) * (2 * ll + 1));
  EXPECT_EQ(l.parameter_count(), 2 * 32 * 64 * blocks + 64);
  SO3ConvLayer small(2, 3, 4, 2);
  auto y = so3_conv(small, SO3Signal(2, 4));
  EXPECT_EQ(y.values.size(), 3u * 64u);
  EXPECT_THROW(so3_conv(small, SO3Signal(2, 2)), std::invalid_argument);
}

TEST(Conv, Linearity) {
  std::mt19937_64 rng(6);
  S2ConvLayer l(1, 2, 4, 3);
  randomize(l, rng);
  std::fill(l.bias.begin(), l.bias.end(), 0.0);
  auto f = random_sphere(1, 4, rng), g = random_sphere(1, 4, rng);
  SphereSignal h(1, 4);
  for (std::size_t i = 0; i < h.values.size(); ++i) h.values[i] = 2 * f.values[i] - 3 * g.values[i];
  auto yf = s2_conv(l, f), yg = s2_conv(l, g), yh = s2_conv(l, h);
  std::vector<double> comb(yf.values.size());
  for (std::size_t i = 0; i < comb.size(); ++i) comb[i] = 2 * yf.values[i] - 3 * yg.values[i];
  EXPECT_LT(max_abs_difference(yh.values, comb), 1e-10);

  // Linear in the kernel too.
  S2ConvLayer a = l, b = l, c = l;
  randomize(b, rng);
  std::fill(b.bias.begin(), b.bias.end(), 0.0);
  for (std::size_t i = 0; i < c.kernel.size(); ++i) c.kernel[i] = a.kernel[i] + b.kernel[i];
  auto ya = s2_conv(a, f), yb = s2_conv(b, f), yc = s2_conv(c, f);
  for (std::size_t i = 0; i < comb.size(); ++i) comb[i] = ya.values[i] + yb.values[i];
  EXPECT_LT(max_abs_difference(yc.values, comb), 1e-10);
}

TEST(Conv, EquivarianceAtDeskScale) {
  std::mt19937_64 rng(7);
  S2ConvLayer s2(1, 8, 16, 8);
  init_s2_kernel(s2, rng);
  SO3ConvLayer so3(8, 16, 8, 4);
  init_so3_kernel(so3, rng);
  for (int t = 0; t < 3; ++t) {
    EXPECT_LT(s2_equivariance_error(s2, static_cast<std::uint64_t>(t)), 1e-6);
    EXPECT_LT(so3_equivariance_error(so3, static_cast<std::uint64_t>(t)), 1e-6);
  }
}

TEST(Conv, BrokenWignerSignIsDetected) {
  std::mt19937_64 rng(8);
  S2ConvLayer s2(1, 2, 4, 4);
  init_s2_kernel(s2, rng);
  EXPECT_GT(s2_equivariance_error(s2, 1, RotationOptions{true}), 1e-3);
}

TEST(BatchNorm, TrainModeNormalizes) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(3.0, 2.0);
  Tape<double> tape;
  std::vector<double> x(4 * 3 * 8);
  for (double& v : x) v = g(rng);
  Tensor<double> rm{"rm", {3}, {0, 0, 0}, {}, false}, rv{"rv", {3}, {1, 1, 1}, {}, false};
  auto xv = tape.leaf({4, 3, 8}, x);
  auto y = batch_norm(tape, xv, tape.leaf({3}, {1, 1, 1}), tape.leaf({3}, {0, 0, 0}), rm, rv, true, true);
  const auto& yv = tape.value(y);
  for (int c = 0; c < 3; ++c) {
    double m = 0, s = 0, xm = 0, xs = 0;
    for (int b = 0; b < 4; ++b)
      for (int k = 0; k < 8; ++k) {
        m += yv[static_cast<std::size_t>((b * 3 + c) * 8 + k)];
        xm += x[static_cast<std::size_t>((b * 3 + c) * 8 + k)];
      }
    m /= 32, xm /= 32;
    for (int b = 0; b < 4; ++b)
      for (int k = 0; k < 8; ++k) {
        s += std::pow(yv[static_cast<std::size_t>((b * 3 + c) * 8 + k)] - m, 2);
        xs += std::pow(x[static_cast<std::size_t>((b * 3 + c) * 8 + k)] - xm, 2);
      }
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(s / 32, 1.0, 1e-4);  // eps = 1e-5 against variance ~4
    EXPECT_NEAR(rm.values[static_cast<std::size_t>(c)], 0.1 * xm, 1e-12);
    EXPECT_NEAR(rv.values[static_cast<std::size_t>(c)], 0.9 + 0.1 * xs / 31, 1e-12);
  }
}

TEST(BatchNorm, ConstantChannelGivesZero) {
  Tape<double> tape;
  Tensor<double> rm{"rm", {1}, {0}, {}, false}, rv{"rv", {1}, {1}, {}, false};
  auto y = batch_norm(tape, tape.leaf({2, 1, 4}, std::vector<double>(8, 5.0)), tape.leaf({1}, {1}), tape.leaf({1}, {0}), rm, rv, true, false);
  for (double v : tape.value(y)) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(rm.values[0], 0.0);
}

TEST(BatchNorm, EvalModeFormula) {
  Tape<double> tape;
  Tensor<double> rm{"rm", {2}, {1.0, -2.0}, {}, false}, rv{"rv", {2}, {4.0, 0.25}, {}, false};
  std::vector<double> x{0.5, 1.5, 3.0, -1.0, 2.0, 0.0, 1.0, 7.0};
  auto y = batch_norm(tape, tape.leaf({2, 2, 2}, x), tape.leaf({2}, {2.0, 0.5}), tape.leaf({2}, {0.1, -0.3}), rm, rv, false, false);
  const auto& yv = tape.value(y);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t c = (i / 2) % 2;
    const double want = (x[i] - rm.values[c]) / std::sqrt(rv.values[c] + 1e-5) * (c ? 0.5 : 2.0) + (c ? -0.3 : 0.1);
    EXPECT_NEAR(yv[i], want, 1e-14);
  }
}

TEST(Relu, Elementwise) {
  Tape<double> tape;
  std::vector<double> x{-2, -0.5, 0, 0.5, 3, -1e-9};
  auto y = tape.value(relu(tape, tape.leaf({6}, x)));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], std::max(0.0, x[i]));
}

TEST(Wgap, ConstantAndCosine) {
  const int b = 4;
  auto w = wgap_weights(b);
  SO3Signal c(3, b);
  for (double& v : c.values) v = 1.7;
  for (double v : wgap(c, w)) EXPECT_NEAR(v, 1.7, 1e-14);
  auto g = make_grid(b);
  SO3Signal f(1, b);
  double want = 0;
  for (int j = 0; j < 2 * b; ++j) want += w[static_cast<std::size_t>(j)] * std::cos(g.betas[static_cast<std::size_t>(j)]);
  for (int a = 0; a < 2 * b; ++a)
    for (int j = 0; j < 2 * b; ++j)
      for (int k = 0; k < 2 * b; ++k) f.at(0, a, j, k) = std::cos(g.betas[static_cast<std::size_t>(j)]);
  EXPECT_NEAR(wgap(f, w)[0], want, 1e-15);
  EXPECT_EQ(wgap(SO3Signal(128, 8), wgap_weights(8)).size(), 128u);
  EXPECT_THROW(wgap(f, wgap_weights(2)), std::invalid_argument);
}

TEST(Wgap, TapeMatchesDirect) {
  std::mt19937_64 rng(10);
  auto f = random_so3(2, 3, rng);
  Tape<double> tape;
  auto w = wgap_weights(3);
  auto y = tape.value(wgap(tape, tape.leaf({1, 2, 6, 6, 6}, f.values), w));
  auto d = wgap(f, w);
  EXPECT_NEAR(y[0], d[0], 1e-14);
  EXPECT_NEAR(y[1], d[1], 1e-14);
}

TEST(Wgap, InvariantForLinearTrunk) {
  // Conv-only trunk, no ReLU: pooled features with exact quadrature weights
  // do not change under rotation of the input.
  std::mt19937_64 rng(11);
  S2ConvLayer s2(1, 3, 8, 4);
  init_s2_kernel(s2, rng);
  SO3ConvLayer so3(3, 4, 4, 2);
  init_so3_kernel(so3, rng);
  auto f = random_sphere(1, 8, rng);
  auto trunk = [&](const SphereSignal& x) { return wgap(so3_conv(so3, s2_conv(s2, x)), dh_mean_weights(2)); };
  auto a = trunk(f), b = trunk(rotate_sphere_signal(f, random_rotation(rng)));
  EXPECT_LT(relative_l2(b, a), 1e-5);
}

TEST(Wgap, ReluTrunkInvariantUnderAlphaShift) {
  // A z-rotation by one alpha step of the coarsest trunk grid shifts every
  // layer's grid by whole steps, so the trunk with ReLU is exactly invariant.
  auto arch = desk_preset().spherical;
  auto m = build_model<double>(arch, 3);
  auto xs = random_examples(arch, 1, 4);
  Example shifted = xs[0];
  const int n = 2 * arch.input_bandwidth, step = arch.input_bandwidth / arch.layers.back().bandwidth;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      shifted.left[static_cast<std::size_t>(j * n + (k + step) % n)] = xs[0].left[static_cast<std::size_t>(j * n + k)];
      shifted.right[static_cast<std::size_t>(j * n + (k + step) % n)] = xs[0].right[static_cast<std::size_t>(j * n + k)];
    }
  m.training = false;
  auto p = predict_proba(m, {&xs[0], &shifted});
  EXPECT_NEAR(p[0][1], p[1][1], 1e-10);
}

TEST(FcSoftmax, Basics) {
  auto p = fc_softmax(std::vector<double>(2 * 4, 0.0), {0, 0}, {1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  double prev = 0.5;
  for (double t : {1.0, 3.0, 6.0, 10.0}) {
    auto q = fc_softmax({1, -1}, {0, 0}, {t});
    EXPECT_GT(q[0], prev);
    EXPECT_NEAR(q[0] + q[1], 1.0, 1e-12);
    prev = q[0];
  }
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  std::vector<double> W(2 * 6), x(6);
  for (double& v : W) v = g(rng);
  for (double& v : x) v = g(rng);
  auto r = fc_softmax(W, {0.3, -0.2}, x);
  long double z0 = 0.3L, z1 = -0.2L;
  for (int i = 0; i < 6; ++i) z0 += static_cast<long double>(W[static_cast<std::size_t>(i)]) * x[static_cast<std::size_t>(i)],
                                  z1 += static_cast<long double>(W[static_cast<std::size_t>(6 + i)]) * x[static_cast<std::size_t>(i)];
  const long double p0 = 1.0L / (1.0L + std::exp(z1 - z0));
  EXPECT_NEAR(r[0], static_cast<double>(p0), 1e-12);
}

TEST(Model, CountsAndParity) {
  auto fc = build_linear_model<double>(256, 0);
  EXPECT_EQ(count_parameters(fc), 514u);
  auto paper = paper_preset();
  EXPECT_EQ(count_parameters(allocate_model<float>(paper.spherical)) > 0, true);
  // Desk counts as a regression anchor.
  EXPECT_EQ(count_parameters(allocate_model<float>(desk_preset().spherical)), 33066u);
  EXPECT_EQ(count_parameters(allocate_model<float>(desk_preset().planar)), 23778u);
}

TEST(Model, PaperShapes) {
  auto m = allocate_model<float>(paper_preset().spherical);
  EXPECT_EQ(m.get("s2conv0.kernel").shape, (Shape{32, 1, 32 * 32, 2}));
  EXPECT_EQ(m.get("fc.weight").shape, (Shape{2, 256}));
  auto p = allocate_model<float>(paper_preset().planar);
  EXPECT_EQ(p.get("conv2.weight").shape, (Shape{256, 128, 3, 3}));
  // 128 -> 64 -> 32 -> 16 under stride 2, pad 1.
  Tape<float> tape;
  auto x = tape.leaf({1, 1, 128, 128}, std::vector<float>(128 * 128, 1.0f));
  auto y = conv2d(tape, x, tape.parameter(p.get("conv0.weight")), tape.parameter(p.get("conv0.bias")));
  EXPECT_EQ(tape.shape(y), (Shape{1, 64, 64, 64}));
}

TEST(Model, ForwardOutputsAndHemisphereOrder) {
  auto arch = desk_preset().spherical;
  auto m = build_model<double>(arch, 5);
  auto xs = random_examples(arch, 1, 6);
  m.training = false;
  auto p = predict_proba(m, {&xs[0]});
  EXPECT_NEAR(p[0][0] + p[0][1], 1.0, 1e-12);
  Example swapped{xs[0].right, xs[0].left, 0};
  auto q = predict_proba(m, {&swapped});
  EXPECT_GT(std::abs(p[0][1] - q[0][1]), 1e-9);
  auto again = predict_proba(m, {&xs[0]});
  EXPECT_EQ(p[0][1], again[0][1]);
}

TEST(Model, ZeroNetworkIsUndecided) {
  for (auto arch : {tiny_preset().spherical, tiny_preset().planar}) {
    auto m = allocate_model<double>(arch);
    m.training = false;
    auto xs = random_examples(arch, 1, 7);
    auto p = predict_proba(m, {&xs[0]});
    EXPECT_DOUBLE_EQ(p[0][0], 0.5);
  }
}

TEST(Model, CheckpointRoundTripIsBitExact) {
  auto m = build_model<float>(desk_preset().spherical, 8);
  m.get("bn0.running_mean").values[0] = 0.125f;
  auto bytes = serialize_model(m);
  auto r = deserialize_model<float>(bytes);
  EXPECT_EQ(serialize_model(r), bytes);
  EXPECT_EQ(r.arch.to_text(), m.arch.to_text());
  ASSERT_EQ(r.tensors.size(), m.tensors.size());
  for (std::size_t i = 0; i < r.tensors.size(); ++i) EXPECT_EQ(r.tensors[i].values, m.tensors[i].values);
  EXPECT_THROW(deserialize_model<float>(bytes.substr(0, bytes.size() - 3)), ParseError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_model<float>(bad), ParseError);
}

TEST(Model, ArchitectureText) {
  auto a = desk_preset().spherical;
  EXPECT_EQ(a.to_text(), "kind=spherical;input_bandwidth=16;layers=8x8,4x16,2x32;classes=2");
  EXPECT_EQ(Architecture::parse(a.to_text()).to_text(), a.to_text());
  EXPECT_THROW(Architecture::parse("kind=round"), ValidationError);
}
