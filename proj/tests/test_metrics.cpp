#include <gtest/gtest.h>

#include <filesystem>

#include "generators.hpp"
#include "oracles.hpp"
#include "rgk/io.hpp"
#include "rgk/metrics.hpp"

using rgk::BoundingBox;
using rgk::ImageRaster;
using rgk::Layout;

namespace {

// Returns the same vector for image and text, so every score is 100.
class MirrorEmbedder final : public rgk::EmbedderBackend {
 public:
  std::vector<double> embed_image(const ImageRaster&, const rgk::ObjectRef& r) const override {
    return vec(r);
  }
  std::vector<double> embed_text(const std::string&, const rgk::ObjectRef& r) const override {
    return vec(r);
  }

 private:
  static std::vector<double> vec(const rgk::ObjectRef& r) { return {1.0 + r.object_id, 2.0, -0.5}; }
};

class FailingSegmenter final : public rgk::SegmenterBackend {
 public:
  rgk::BinaryMask mask(const ImageRaster&, const BoundingBox&, const rgk::ObjectRef&) const override {
    throw std::runtime_error("model offline");
  }
};

Layout one_object(BoundingBox b, int w = 100, int h = 100) {
  Layout l;
  l.image_width = w;
  l.image_height = h;
  l.objects = {{b, "a thing", 0}};
  return l;
}

}  // namespace

TEST(SamIou, FullBoxMaskScoresHundred) {
  const auto img = ImageRaster::filled(100, 100, 0, 0, 0);
  const auto r = rgk::sam_iou_score(img, one_object({0.2, 0.2, 0.6, 0.7}), rgk::RectangleSegmenter());
  ASSERT_TRUE(r.objects[0].score);
  EXPECT_DOUBLE_EQ(*r.objects[0].score, 100.0);
  EXPECT_DOUBLE_EQ(*r.corpus_mean, 100.0);
}

TEST(SamIou, FullMaskIsExactOffThePixelGrid) {
  const auto img = ImageRaster::filled(131, 77, 0, 0, 0);
  rgk::Rng rng(62);
  for (int i = 0; i < 50; ++i) {
    const double x1 = rng.uniform(0.0, 0.5), y1 = rng.uniform(0.0, 0.5);
    const BoundingBox b{x1, y1, x1 + rng.uniform(0.25, 0.5), y1 + rng.uniform(0.25, 0.5)};
    const auto r = rgk::sam_iou_score(img, one_object(b, 131, 77), rgk::RectangleSegmenter(), {0.0, 1.0});
    EXPECT_EQ(*r.objects[0].score, 100.0);
  }
}

TEST(SamIou, HalfBoxMaskScoresFifty) {
  // Boxes of at least 150 px keep the half-pixel rounding under one point.
  const auto img = ImageRaster::filled(509, 503, 0, 0, 0);
  rgk::Rng rng(61);
  for (int i = 0; i < 50; ++i) {
    const double x1 = rng.uniform(0.0, 0.3), y1 = rng.uniform(0.0, 0.3);
    const BoundingBox b{x1, y1, x1 + rng.uniform(0.3, 0.6), y1 + rng.uniform(0.3, 0.6)};
    const auto r = rgk::sam_iou_score(img, one_object(b, 509, 503), rgk::RectangleSegmenter(0.5, 1.0),
                                      {0.0, 1.0});
    EXPECT_NEAR(*r.objects[0].score, 50.0, 1.0);
  }
}

TEST(SamIou, EmptyMaskScoresZeroAndBackendErrorsAreRecorded) {
  const auto img = ImageRaster::filled(50, 50, 0, 0, 0);
  auto r = rgk::sam_iou_score(img, one_object({0.1, 0.1, 0.6, 0.6}, 50, 50),
                              rgk::RectangleSegmenter(0.0, 0.0));
  EXPECT_DOUBLE_EQ(*r.objects[0].score, 0.0);
  r = rgk::sam_iou_score(img, one_object({0.1, 0.1, 0.6, 0.6}, 50, 50), FailingSegmenter());
  EXPECT_TRUE(r.objects[0].filtered);
  EXPECT_EQ(r.objects[0].reason, "backend_error: model offline");
  EXPECT_FALSE(r.corpus_mean.has_value());
}

TEST(CropClip, IdenticalVectorsScoreHundred) {
  const auto img = ImageRaster::filled(64, 64, 10, 20, 30);
  Layout l = one_object({0.1, 0.1, 0.5, 0.5}, 64, 64);
  l.objects.push_back({{0.4, 0.3, 0.9, 0.8}, "another", 1});
  const auto r = rgk::crop_clip_score(img, l, MirrorEmbedder());
  for (const auto& o : r.objects) EXPECT_NEAR(*o.score, 100.0, 1e-12);
  EXPECT_EQ(r.samples[0].kept, 2u);
}

TEST(CropClip, OutsidePixelsDoNotMatter) {
  rgk::Rng rng(62);
  rgk::HashEmbedderBackend embedder(32, 7);
  for (int i = 0; i < 30; ++i) {
    auto img = ImageRaster::filled(40, 40, 0, 0, 0);
    for (auto& px : img.rgb) px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const auto l = one_object({0.25, 0.25, 0.75, 0.75}, 40, 40);
    const auto before = rgk::crop_clip_score(img, l, embedder);
    const auto rect = rgk::pixel_rect(l.objects[0].box, 40, 40);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        if (x < rect.x0 || x >= rect.x1 || y < rect.y0 || y >= rect.y1)
          img.rgb[(y * 40 + x) * 3] ^= 0xff;
    EXPECT_EQ(*before.objects[0].score, *rgk::crop_clip_score(img, l, embedder).objects[0].score);
    img.rgb[(rect.y0 * 40 + rect.x0) * 3] ^= 0xff;
    EXPECT_NE(*before.objects[0].score, *rgk::crop_clip_score(img, l, embedder).objects[0].score);
  }
}

TEST(CropClip, ExternalReferencesAreCroppedByName) {
  const auto img = ImageRaster::external(200, 100, "sample7");
  const auto c = rgk::crop(img, {0.1, 0.2, 0.5, 0.9});
  EXPECT_EQ(c.width, 80);
  EXPECT_EQ(c.height, 70);
  EXPECT_EQ(c.reference, "sample7[20:100,20:90]");
}

TEST(CropClip, FileBackendLooksUpKeys) {
  std::map<std::string, std::vector<double>> table = {{"s:0:image", {1, 0}}, {"s:0:text", {1, 1}}};
  rgk::FileEmbedderBackend backend(table);
  const auto r = rgk::crop_clip_score(ImageRaster::external(10, 10, "s"),
                                      one_object({0, 0, 0.5, 0.5}, 10, 10), backend, {}, "s");
  EXPECT_NEAR(*r.objects[0].score, 100.0 / std::sqrt(2.0), 1e-12);
  const auto missing = rgk::crop_clip_score(ImageRaster::external(10, 10, "t"),
                                            one_object({0, 0, 0.5, 0.5}, 10, 10), backend, {}, "t");
  EXPECT_TRUE(missing.objects[0].filtered);
}

TEST(SizeFilter, StrictInequalitiesAtBoundaries) {
  // 0.25 x 0.2 = 0.05 exactly and 0.5 x 1 = 0.5 exactly are both kept.
  EXPECT_TRUE(rgk::size_filter({0, 0, 0.25, 0.2}).keep);
  EXPECT_TRUE(rgk::size_filter({0, 0, 0.5, 1.0}).keep);
  const auto small = rgk::size_filter({0, 0, 0.25, 0.19});
  EXPECT_FALSE(small.keep);
  EXPECT_EQ(small.reason, "small");
  const auto large = rgk::size_filter({0, 0, 0.51, 1.0});
  EXPECT_FALSE(large.keep);
  EXPECT_EQ(large.reason, "large");
  EXPECT_THROW(rgk::size_filter({0, 0, 1, 1}, {0.6, 0.5}), rgk::ValidationError);
}

TEST(SizeFilter, NarrowingBoundsNeverScoresMore) {
  rgk::Rng rng(63);
  for (int i = 0; i < 200; ++i) {
    const auto b = gen::box(rng);
    const double lo = rng.uniform(0.0, 0.4), hi = rng.uniform(0.5, 1.0);
    const rgk::FilterBounds wide{lo, hi};
    const rgk::FilterBounds narrow{rng.uniform(lo, 0.45), rng.uniform(0.5, hi)};
    if (rgk::size_filter(b, narrow).keep) {
      EXPECT_TRUE(rgk::size_filter(b, wide).keep);
    }
  }
}

TEST(Iou, SymmetricBoundedAndReflexive) {
  rgk::Rng rng(64);
  for (int i = 0; i < 500; ++i) {
    const auto a = gen::box(rng), b = gen::box(rng);
    const double ab = rgk::iou(a, b);
    EXPECT_EQ(ab, rgk::iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_DOUBLE_EQ(rgk::iou(a, a), 1.0);
  }
}

TEST(Circumscribe, MatchesScanOracle) {
  rgk::Rng rng(65);
  for (int i = 0; i < 300; ++i) {
    const int w = static_cast<int>(rng.uniform_int(1, 30)), h = static_cast<int>(rng.uniform_int(1, 30));
    rgk::BinaryMask m(w, h);
    const auto fill = rng.uniform(0.0, 0.05);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (rng.uniform() < fill) m.set(x, y);
    const auto got = rgk::circumscribed_rectangle(m);
    const auto want = oracle::mask_bounds(m);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (!want) continue;
    EXPECT_DOUBLE_EQ(got->x1, want->x0 / double(w));
    EXPECT_DOUBLE_EQ(got->y1, want->y0 / double(h));
    EXPECT_DOUBLE_EQ(got->x2, want->x1 / double(w));
    EXPECT_DOUBLE_EQ(got->y2, want->y1 / double(h));
  }
  EXPECT_THROW(rgk::circumscribed_rectangle(rgk::BinaryMask(0, 3)), rgk::ValidationError);
}

TEST(Pearson, ExactFixtures) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  EXPECT_NEAR(rgk::pearson(x, std::vector<double>{2, 4, 6, 8, 10}), 1.0, 1e-12);
  EXPECT_NEAR(rgk::pearson(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0, 1e-12);
  // Hand computed: Sxy = 8, Sxx = Syy = 10.
  EXPECT_NEAR(rgk::pearson(x, std::vector<double>{1, 3, 2, 5, 4}), 0.8, 1e-12);
  EXPECT_NEAR(rgk::pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 0.5, 1e-12);
}

TEST(Pearson, MatchesLonghandOracleAndAffineInvariance) {
  rgk::Rng rng(66);
  for (int i = 0; i < 200; ++i) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 40));
    std::vector<double> x(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = rng.normal();
      y[k] = 0.5 * x[k] + rng.normal();
    }
    const double r = rgk::pearson(x, y);
    EXPECT_NEAR(r, oracle::pearson(x, y), 1e-12);
    const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5.0, 5.0);
    std::vector<double> xt(n);
    for (std::size_t k = 0; k < n; ++k) xt[k] = a * x[k] + b;
    EXPECT_NEAR(rgk::pearson(xt, y), r, 1e-12);
  }
}

TEST(Pearson, RejectsDegenerateInput) {
  EXPECT_THROW(rgk::pearson(std::vector<double>{1}, std::vector<double>{2}), rgk::ValidationError);
  EXPECT_THROW(rgk::pearson(std::vector<double>{1, 2}, std::vector<double>{2}), rgk::ValidationError);
  EXPECT_THROW(rgk::pearson(std::vector<double>{1, 1}, std::vector<double>{2, 3}), rgk::ValidationError);
}

TEST(Reliability, FilteringDropsOutOfRangeObjects) {
  const std::vector<double> metric = {1, 2, 3, 4, 5, 6};
  const std::vector<double> human = {1, 2, 3, 4, 50, -40};
  const std::vector<double> areas = {0.1, 0.2, 0.3, 0.4, 0.01, 0.9};
  const auto r = rgk::reliability(metric, human, areas);
  EXPECT_EQ(r.kept, 4u);
  ASSERT_TRUE(r.filtered);
  EXPECT_NEAR(*r.filtered, 1.0, 1e-12);
  EXPECT_LT(r.all, 0.5);
}

TEST(Report, CorpusMeanIsMeanOfSampleMeans) {
  const auto img = ImageRaster::filled(20, 20, 0, 0, 0);
  auto a = rgk::sam_iou_score(img, one_object({0, 0, 0.5, 0.5}, 20, 20), rgk::RectangleSegmenter(), {}, "a");
  Layout two = one_object({0, 0, 0.5, 0.5}, 20, 20);
  two.objects.push_back({{0.5, 0.5, 1.0, 1.0}, "b", 1});
  auto b = rgk::sam_iou_score(img, two, rgk::RectangleSegmenter(0.5, 1.0), {}, "b");
  const std::vector<rgk::MetricReport> both = {a, b};
  const auto merged = rgk::merge_reports(both);
  ASSERT_EQ(merged.samples.size(), 2u);
  EXPECT_DOUBLE_EQ(*merged.corpus_mean, (100.0 + *merged.samples[1].mean) / 2.0);
  EXPECT_DOUBLE_EQ(*merged.samples[1].mean, 50.0);
}

TEST(Report, JsonRoundTrip) {
  const auto img = ImageRaster::filled(20, 20, 0, 0, 0);
  Layout l = one_object({0, 0, 0.5, 0.5}, 20, 20);
  l.objects.push_back({{0, 0, 0.1, 0.1}, "tiny", 1});
  const auto r = rgk::sam_iou_score(img, l, rgk::RectangleSegmenter(), {}, "x");
  const auto back = rgk::report_from_json(rgk::report_to_json(r));
  EXPECT_EQ(rgk::to_canonical_json(rgk::report_to_json(back)),
            rgk::to_canonical_json(rgk::report_to_json(r)));
  EXPECT_TRUE(back.objects[1].filtered);
  EXPECT_EQ(back.objects[1].reason, "small");
}

TEST(Masks, PgmRoundTripThroughFileSegmenter) {
  const auto dir = std::filesystem::temp_directory_path() / "rgk_mask_test";
  std::filesystem::create_directories(dir);
  rgk::BinaryMask m(10, 10);
  for (int y = 2; y < 6; ++y)
    for (int x = 3; x < 8; ++x) m.set(x, y);
  rgk::write_file_atomic(dir / "s_0.pgm", rgk::encode_pgm_mask(m));
  const auto back = rgk::read_pgm_mask(dir / "s_0.pgm");
  EXPECT_EQ(back.pixels, m.pixels);
  const auto r = rgk::sam_iou_score(ImageRaster::external(10, 10, "s"),
                                    one_object({0.3, 0.2, 0.8, 0.6}, 10, 10),
                                    rgk::FileSegmenterBackend(dir), {}, "s");
  EXPECT_NEAR(*r.objects[0].score, 100.0, 1e-9);
  std::filesystem::remove_all(dir);
}
