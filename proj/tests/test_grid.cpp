#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "semeda/grid.hpp"

using namespace semeda;

namespace {

Grid random_grid(std::vector<std::size_t> shape, std::uint64_t seed, double scale = 1.0) {
  Grid g(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : g.data()) v = n(rng);
  return g;
}

/// Direct zero-padded cross-correlation, one output element at a time.
Grid naive_conv(const Grid& in, const Grid& k, const Grid& b, int stride) {
  const std::size_t cin = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t cout = k.dim(0), ks = k.dim(2);
  const auto s = static_cast<std::size_t>(stride);
  const std::size_t oh = (h + s - 1) / s, ow = (w + s - 1) / s;
  const auto pad = static_cast<long>(ks / 2);
  Grid out({cout, oh, ow});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = b[o];
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t ky = 0; ky < ks; ++ky)
            for (std::size_t kx = 0; kx < ks; ++kx) {
              const long iy = static_cast<long>(y * s + ky) - pad;
              const long ix = static_cast<long>(x * s + kx) - pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
              acc += k[((o * cin + c) * ks + ky) * ks + kx] * in.at(c, static_cast<std::size_t>(iy),
                                                                   static_cast<std::size_t>(ix));
            }
        out.at(o, y, x) = acc;
      }
  return out;
}

/// Evaluates the half-pixel bilinear formula directly for one output pixel.
double bilinear_formula(const Grid& in, std::size_t c, std::size_t oy, std::size_t ox, int f) {
  auto coord = [&](std::size_t d, std::size_t n) {
    const double s = (static_cast<double>(d) + 0.5) / f - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(n - 1));
  };
  const double sy = coord(oy, in.dim(1)), sx = coord(ox, in.dim(2));
  const auto y0 = static_cast<std::size_t>(std::floor(sy)), x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min(y0 + 1, in.dim(1) - 1), x1 = std::min(x0 + 1, in.dim(2) - 1);
  const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
  return (1 - fy) * ((1 - fx) * in.at(c, y0, x0) + fx * in.at(c, y0, x1)) +
         fy * ((1 - fx) * in.at(c, y1, x0) + fx * in.at(c, y1, x1));
}

}  // namespace

TEST(Grid, RejectsDataShapeMismatch) {
  EXPECT_THROW(Grid({2, 2}, std::vector<double>{1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST(Conv2d, OneByOneIdentityKernelIsIdentity) {
  const Grid in = random_grid({1, 5, 7}, 1);
  const Grid out = conv2d(in, Grid({1, 1, 1, 1}, 1.0), Grid({1}), 1);
  ASSERT_TRUE(out.same_shape(in));
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_NEAR(out[i], in[i], 1e-15);
}

TEST(Conv2d, MultiChannelIdentityKernelIsIdentity) {
  const Grid in = random_grid({3, 6, 6}, 2);
  Grid k({3, 3, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) k[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0;
  const Grid out = conv2d(in, k, Grid({3}), 1);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_NEAR(out[i], in[i], 1e-15);
}

TEST(Conv2d, AllOnesKernelOnOnesCountsInBoundsTaps) {
  const Grid out = conv2d(Grid({1, 3, 3}, 1.0), Grid({1, 1, 3, 3}, 1.0), Grid({1}), 1);
  const double expected[3][3] = {{4, 6, 4}, {6, 9, 6}, {4, 6, 4}};
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) EXPECT_DOUBLE_EQ(out.at(0, y, x), expected[y][x]);
}

TEST(Conv2d, ZeroKernelGivesBias) {
  const Grid out = conv2d(random_grid({2, 4, 4}, 3), Grid({3, 2, 3, 3}), Grid({3}, std::vector<double>{1.5, -2, 0}), 1);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(out[c * 16 + i], c == 0 ? 1.5 : (c == 1 ? -2.0 : 0.0));
}

TEST(Conv2d, MatchesDirectLoopOnRandomShapes) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t cin = 1 + rng() % 33, cout = 1 + rng() % 33, ks = rng() % 2 ? 3 : 1;
    const std::size_t h = 1 + rng() % 12, w = 1 + rng() % 12;
    const int stride = 1 + static_cast<int>(rng() % 2);
    const Grid in = random_grid({cin, h, w}, rng()), k = random_grid({cout, cin, ks, ks}, rng());
    const Grid b = random_grid({cout}, rng());
    const Grid got = conv2d(in, k, b, stride), want = naive_conv(in, k, b, stride);
    ASSERT_TRUE(got.same_shape(want)) << shape_string(got.shape());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-10) << "trial " << trial;
  }
}

TEST(Conv2d, StrideTwoRoundsOutputUp) {
  const Grid out = conv2d(Grid({1, 5, 7}), Grid({2, 1, 3, 3}), Grid({2}), 2);
  EXPECT_EQ(out.shape(), (std::vector<std::size_t>{2, 3, 4}));
}

TEST(Conv2d, ChannelMismatchNamesBothShapes) {
  try {
    conv2d(Grid({2, 4, 4}), Grid({1, 3, 3, 3}), Grid({1}), 1);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x4x4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("1x3x3x3"), std::string::npos) << msg;
  }
}

TEST(Conv2d, EvenKernelRejected) {
  EXPECT_THROW(conv2d(Grid({1, 4, 4}), Grid({1, 1, 2, 2}), Grid({1}), 1), std::invalid_argument);
}

TEST(Relu, SignCases) {
  const Grid out = relu(Grid({3}, std::vector<double>{-1, 0, 2}));
  EXPECT_EQ(out, Grid({3}, std::vector<double>({0, 0, 2})));
  const Grid pos({4}, std::vector<double>{0, 1, 2.5, 7});
  EXPECT_EQ(relu(pos), pos);
}

TEST(ChannelSoftmax, UniformLogitsGiveOneOverC) {
  const Grid out = channel_softmax(Grid({4, 2, 3}, 0.7));
  for (double v : out.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(ChannelSoftmax, ClosedFormLn3) {
  const Grid out = channel_softmax(Grid({2, 1, 1}, std::vector<double>{0.0, std::log(3.0)}));
  EXPECT_NEAR(out[0], 0.25, 1e-15);
  EXPECT_NEAR(out[1], 0.75, 1e-15);
}

TEST(ChannelSoftmax, ShiftInvariantAndNormalised) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Grid in = random_grid({5, 4, 6}, seed, 30.0);
    Grid shifted = in;
    for (std::size_t p = 0; p < 24; ++p) {
      const double shift = static_cast<double>(p) * 3.7 - 40.0;
      for (std::size_t c = 0; c < 5; ++c) shifted[c * 24 + p] += shift;
    }
    const Grid a = channel_softmax(in), b = channel_softmax(shifted);
    for (std::size_t p = 0; p < 24; ++p) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        sum += a[c * 24 + p];
        EXPECT_NEAR(a[c * 24 + p], b[c * 24 + p], 1e-12);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(ChannelSoftmax, ExtremeLogitsStayFinite) {
  const Grid out = channel_softmax(Grid({2, 1, 1}, std::vector<double>{1000.0, -1000.0}));
  EXPECT_TRUE(out.all_finite());
  EXPECT_DOUBLE_EQ(out[0], 1.0);
}

TEST(BilinearUpsample, ConstantsStayConstant) {
  for (int f : {1, 2, 3, 5}) {
    const Grid out = bilinear_upsample(Grid({2, 3, 4}, -1.25), f);
    EXPECT_EQ(out.shape(), (std::vector<std::size_t>{2, 3u * f, 4u * f}));
    for (double v : out.data()) EXPECT_DOUBLE_EQ(v, -1.25);
  }
}

TEST(BilinearUpsample, FactorOneIsIdentity) {
  const Grid in = random_grid({3, 5, 4}, 9);
  EXPECT_EQ(bilinear_upsample(in, 1), in);
}

TEST(BilinearUpsample, TwoByTwoMatchesFormula) {
  const Grid in({1, 2, 2}, std::vector<double>{0, 1, 2, 3});
  const Grid out = bilinear_upsample(in, 2);
  // Rows of the 4x4 result, from the half-pixel formula by hand.
  const double expected[4][4] = {{0, 0.25, 0.75, 1},
                                 {0.5, 0.75, 1.25, 1.5},
                                 {1.5, 1.75, 2.25, 2.5},
                                 {2, 2.25, 2.75, 3}};
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      EXPECT_DOUBLE_EQ(out.at(0, y, x), expected[y][x]);
      EXPECT_DOUBLE_EQ(out.at(0, y, x), bilinear_formula(in, 0, y, x, 2));
    }
}

TEST(BilinearUpsample, RandomInputsMatchFormulaAndKeepBounds) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int f = 1 + static_cast<int>(rng() % 4);
    const Grid in = random_grid({1 + rng() % 3, 1 + rng() % 6, 1 + rng() % 6}, rng());
    const Grid out = bilinear_upsample(in, f);
    const auto [lo, hi] = std::minmax_element(in.data().begin(), in.data().end());
    for (std::size_t c = 0; c < out.dim(0); ++c)
      for (std::size_t y = 0; y < out.dim(1); ++y)
        for (std::size_t x = 0; x < out.dim(2); ++x) {
          const double v = out.at(c, y, x);
          ASSERT_NEAR(v, bilinear_formula(in, c, y, x, f), 1e-12);
          ASSERT_GE(v, *lo - 1e-12);
          ASSERT_LE(v, *hi + 1e-12);
        }
  }
}

TEST(BilinearUpsample, RejectsNonPositiveFactor) {
  EXPECT_THROW(bilinear_upsample(Grid({1, 2, 2}), 0), std::invalid_argument);
}

TEST(Gemm, AllTranspositionsMatchNaiveProduct) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (std::size_t m : {1u, 2u, 16u, 32u})
    for (std::size_t nn : {1u, 45u, 288u, 1024u})
      for (std::size_t k : {1u, 16u, 288u})
        for (int form = 0; form < 4; ++form) {
          const bool ta = form & 2, tb = form & 1;
          std::vector<double> a(m * k), b(k * nn), c(m * nn), ref;
          for (auto* v : {&a, &b, &c})
            for (auto& x : *v) x = n(rng);
          ref = c;
          detail::gemm(ta, tb, m, nn, k, a.data(), b.data(), 0.5, c.data());
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < nn; ++j) {
              double s = 0.5 * ref[i * nn + j];
              for (std::size_t q = 0; q < k; ++q) s += (ta ? a[q * m + i] : a[i * k + q]) * (tb ? b[j * k + q] : b[q * nn + j]);
              ASSERT_NEAR(c[i * nn + j], s, 1e-9) << m << "x" << nn << "x" << k << " form " << form;
            }
        }
}
