#include <gtest/gtest.h>

#include <cstring>

#include "generators.hpp"
#include "oracles.hpp"
#include "rgk/attention.hpp"

using rgk::AttentionMode;
using rgk::FeatureMap;
using rgk::Layout;
using rgk::Matrix;
using rgk::TokenGrid;

namespace {

rgk::AttentionState trained_state(std::uint64_t seed, rgk::AttentionShape shape = gen::small_shape()) {
  auto s = rgk::AttentionState::fresh(shape, seed);
  s.randomize_output(seed + 1);
  return s;
}

Layout two_boxes() {
  Layout l;
  l.objects = {{{0.125, 0.1875, 0.625, 0.75}, "a grey cat curled up", 0},
               {{0.375, 0.3125, 0.875, 0.875}, "a golden dog", 1}};
  return l;
}

bool rows_equal(const Matrix& a, const Matrix& b, std::size_t r) {
  const auto x = a.row(r), y = b.row(r);
  return std::equal(x.begin(), x.end(), y.begin());
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.values().size() == b.values().size() &&
         std::memcmp(a.values().data(), b.values().data(), a.values().size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Kernel, SingleHeadMatchesScalarSoftmax) {
  // 1 query, 3 keys, d = 3: weights are softmax(q.k / sqrt(3)).
  Matrix q(1, 3), k(3, 3), v(3, 3);
  const double qs[] = {0.3, -0.2, 0.5};
  const double ks[3][3] = {{0.1, 0.4, -0.3}, {0.9, 0.0, 0.2}, {-0.5, 0.7, 0.6}};
  const double vs[3][3] = {{1, 2, 3}, {-1, 0, 4}, {2, -3, 1}};
  for (int j = 0; j < 3; ++j) {
    q(0, j) = qs[j];
    for (int i = 0; i < 3; ++i) {
      k(i, j) = ks[i][j];
      v(i, j) = vs[i][j];
    }
  }
  std::vector<double> logits;
  for (int i = 0; i < 3; ++i) {
    double dot = 0.0;
    for (int j = 0; j < 3; ++j) dot += qs[j] * ks[i][j];
    logits.push_back(dot / std::sqrt(3.0));
  }
  const auto p = oracle::softmax(logits);
  const auto out = rgk::attention_kernel(q, k, v, 1);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(out(0, j), p[0] * vs[0][j] + p[1] * vs[1][j] + p[2] * vs[2][j], 1e-15);
  }
}

TEST(Kernel, SaturatedLogitsStayFinite) {
  Matrix q(1, 2, 1e4), k(2, 2), v(2, 2);
  k(0, 0) = 1e4;
  k(1, 1) = -1e4;
  v(0, 0) = 7;
  v(1, 0) = -7;
  const auto out = rgk::attention_kernel(q, k, v, 1);
  EXPECT_TRUE(rgk::all_finite(out));
  EXPECT_DOUBLE_EQ(out(0, 0), 7.0);
}

TEST(Kernel, RejectsBadShapes) {
  Matrix q(1, 4), k(2, 4), v(2, 4);
  EXPECT_THROW(rgk::attention_kernel(q, k, v, 3), std::invalid_argument);
  EXPECT_THROW(rgk::attention_kernel(q, Matrix(0, 4), Matrix(0, 4), 1), std::invalid_argument);
  EXPECT_THROW(rgk::attention_kernel(q, Matrix(2, 3), v, 1), std::invalid_argument);
}

TEST(State, FreshShapesAndZeroOutput) {
  const auto s = rgk::AttentionState::fresh({}, 1);
  EXPECT_EQ(s.w_q.rows(), 64u);
  EXPECT_EQ(s.w_k.rows(), 96u);
  EXPECT_EQ(s.w_out.cols(), 64u);
  for (double w : s.w_out.values()) EXPECT_EQ(w, 0.0);
  EXPECT_THROW(rgk::AttentionState::fresh({64, 64, 5, 64, 32}, 1), std::invalid_argument);
  EXPECT_THROW(rgk::AttentionState::fresh({64, 64, 4, 64, 12}, 1), std::invalid_argument);
}

TEST(Forward, MatchesScalarOracle) {
  rgk::Rng rng(41);
  for (int i = 0; i < 40; ++i) {
    const auto l = gen::layout(rng, 5);
    const auto g = gen::grid(rng, 8);
    const auto s = trained_state(100 + i);
    const auto f = FeatureMap::random(g, s.shape.channels, 200 + i);
    const auto got = rgk::regional_forward(f, l, s);
    EXPECT_LT(oracle::max_rel_error(got.values, oracle::attention(f, l, s)), 1e-9);
  }
}

TEST(Forward, MatchesNaiveForward) {
  rgk::Rng rng(42);
  for (int i = 0; i < 40; ++i) {
    const auto l = gen::layout(rng, 6);
    const auto g = gen::grid(rng, 10);
    const auto s = trained_state(300 + i);
    const auto f = FeatureMap::random(g, s.shape.channels, 400 + i);
    const auto a = rgk::regional_forward(f, l, s);
    const auto b = rgk::naive_forward(f, l, s);
    std::vector<std::vector<double>> want(g.size());
    for (std::size_t t = 0; t < g.size(); ++t) want[t].assign(b.values.row(t).begin(), b.values.row(t).end());
    EXPECT_LT(oracle::max_rel_error(a.values, want), 1e-9);
  }
}

TEST(Forward, ZeroInitGivesExactZeros) {
  rgk::Rng rng(43);
  for (int i = 0; i < 20; ++i) {
    const auto s = rgk::AttentionState::fresh(gen::small_shape(), i);
    const auto f = FeatureMap::random(gen::grid(rng, 12), s.shape.channels, i);
    for (auto mode : {AttentionMode::full, AttentionMode::no_reorg_avg, AttentionMode::no_box_indicator}) {
      const auto out = rgk::regional_forward(f, gen::layout(rng, 6), s, mode);
      for (double v : out.values.values()) {
        ASSERT_EQ(v, 0.0);
        ASSERT_FALSE(std::signbit(v));
      }
    }
  }
}

TEST(Forward, EveryRowWrittenOnceAndFinite) {
  rgk::Rng rng(44);
  for (int i = 0; i < 60; ++i) {
    const auto s = trained_state(500 + i);
    const auto f = FeatureMap::random(gen::grid(rng, 12), s.shape.channels, i);
    for (auto mode : {AttentionMode::full, AttentionMode::no_reorg_avg, AttentionMode::no_box_indicator}) {
      const auto out = rgk::regional_forward(f, gen::layout(rng, 8), s, mode);
      for (auto w : out.writes) ASSERT_EQ(w, 1u);
      ASSERT_TRUE(rgk::all_finite(out.values));
    }
  }
}

TEST(Forward, RegionOrderDoesNotChangeOutput) {
  rgk::Rng rng(45);
  for (int i = 0; i < 40; ++i) {
    const auto l = gen::layout(rng, 6);
    const auto g = gen::grid(rng, 12);
    const auto s = trained_state(600 + i);
    const auto f = FeatureMap::random(g, s.shape.channels, i);
    const auto base = rgk::regional_forward(f, l, s);
    rgk::ForwardOptions opts;
    opts.region_order.resize(base.regions.size());
    std::iota(opts.region_order.rbegin(), opts.region_order.rend(), std::size_t{0});
    EXPECT_TRUE(bitwise_equal(base.values, rgk::regional_forward(f, l, s, AttentionMode::full, opts).values));
  }
  rgk::ForwardOptions bad;
  bad.region_order = {0, 0};
  const auto s = trained_state(1);
  EXPECT_THROW(rgk::regional_forward(FeatureMap::random(TokenGrid(2, 2), 16, 1), Layout{}, s,
                                     AttentionMode::full, bad),
               std::invalid_argument);
}

TEST(Forward, TextChangeStaysInsideItsBox) {
  rgk::Rng rng(46);
  for (int i = 0; i < 60; ++i) {
    auto l = gen::layout(rng, 5);
    if (l.objects.empty()) continue;
    const auto g = gen::grid(rng, 12);
    const auto s = trained_state(700 + i);
    const auto f = FeatureMap::random(g, s.shape.channels, i);
    const auto before = rgk::regional_forward(f, l, s);
    const auto target = static_cast<std::size_t>(rng.uniform_int(0, l.objects.size() - 1));
    l.objects[target].text += " glowing";
    const auto after = rgk::regional_forward(f, l, s);
    const auto inside = rgk::rasterize_box(l.objects[target].box, g);
    for (std::size_t t = 0; t < g.size(); ++t) {
      if (!std::binary_search(inside.begin(), inside.end(), t)) {
        ASSERT_TRUE(rows_equal(before.values, after.values, t));
      } else {
        ASSERT_FALSE(rows_equal(before.values, after.values, t));
      }
    }
  }
}

TEST(Forward, OverlapDependsOnBothTexts) {
  const auto l = two_boxes();
  const TokenGrid g(16, 16);
  const auto overlap = rgk::reorganize(l, g).regions[1].tokens;
  const auto s = trained_state(800);
  const auto f = FeatureMap::random(g, s.shape.channels, 801);
  const auto base = rgk::regional_forward(f, l, s);
  for (int which : {0, 1}) {
    auto changed = l;
    changed.objects[which].text = "a completely different thing";
    const auto out = rgk::regional_forward(f, changed, s);
    for (auto t : overlap) EXPECT_FALSE(rows_equal(base.values, out.values, t));
  }
}

TEST(Forward, AveragingModeAgreesWithFullOnSingleCoverage) {
  const auto l = two_boxes();
  const TokenGrid g(16, 16);
  const auto p = rgk::reorganize(l, g);
  const auto s = trained_state(900);
  const auto f = FeatureMap::random(g, s.shape.channels, 901);
  const auto full = rgk::regional_forward(f, l, s);
  const auto avg = rgk::regional_forward(f, l, s, AttentionMode::no_reorg_avg);
  for (std::size_t r = 0; r < p.regions.size(); ++r) {
    for (auto t : p.regions[r].tokens) {
      if (p.regions[r].objects.size() == 2) {
        EXPECT_FALSE(rows_equal(full.values, avg.values, t));
      } else {
        EXPECT_TRUE(rows_equal(full.values, avg.values, t));
      }
    }
  }
}

TEST(Forward, NoIndicatorUsesTextRowsOnly) {
  rgk::Rng rng(47);
  const auto l = gen::layout(rng, 4);
  const auto s = trained_state(950);
  auto truncated = s;
  truncated.shape.box_dim = 0;
  truncated.w_k = Matrix(s.shape.text_dim, s.shape.dim);
  truncated.w_v = Matrix(s.shape.text_dim, s.shape.dim);
  for (std::size_t r = 0; r < s.shape.text_dim; ++r)
    for (std::size_t c = 0; c < s.shape.dim; ++c) {
      truncated.w_k(r, c) = s.w_k(r, c);
      truncated.w_v(r, c) = s.w_v(r, c);
    }
  const auto f = FeatureMap::random(TokenGrid(8, 8), s.shape.channels, 3);
  const auto a = rgk::regional_forward(f, l, s, AttentionMode::no_box_indicator);
  const auto b = rgk::regional_forward(f, l, truncated, AttentionMode::full);
  EXPECT_TRUE(bitwise_equal(a.values, b.values));
}

TEST(Forward, RejectsBadInputs) {
  const auto s = trained_state(1);
  auto f = FeatureMap::random(TokenGrid(4, 4), s.shape.channels, 1);
  EXPECT_THROW(rgk::regional_forward(FeatureMap::random(TokenGrid(4, 4), 8, 1), Layout{}, s),
               std::invalid_argument);
  Layout bad;
  bad.objects = {{{0.5, 0, 0.2, 1}, "x", 0}};
  EXPECT_THROW(rgk::regional_forward(f, bad, s), rgk::ValidationError);
  f.values(3, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(rgk::regional_forward(f, Layout{}, s), rgk::ValidationError);
  f.values(3, 2) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(rgk::naive_forward(f, Layout{}, s), rgk::ValidationError);
}

TEST(Forward, DiagnosticsDescribeRegions) {
  const auto s = trained_state(2);
  const auto f = FeatureMap::random(TokenGrid(16, 16), s.shape.channels, 2);
  const auto out = rgk::regional_forward(f, two_boxes(), s);
  ASSERT_EQ(out.regions.size(), 4u);
  // [bos] a grey cat curled up [sep] a golden dog [eos]
  EXPECT_EQ(out.regions[1].sequence_length, 11u);
  EXPECT_EQ(out.regions[3].sequence_length, 1u);
  EXPECT_EQ(out.regions[1].tokens, 28u);
}
