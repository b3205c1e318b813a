#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rgk/error.hpp"
#include "rgk/layout.hpp"
#include "rgk/pnm.hpp"
#include "rgk/random.hpp"

namespace rgk {

/// RGB8 image, or a named reference to an image held elsewhere (no pixels).
struct ImageRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
  std::string reference;

  static ImageRaster external(int width, int height, std::string reference) {
    return {width, height, {}, std::move(reference)};
  }
  static ImageRaster filled(int width, int height, std::uint8_t r, std::uint8_t g,
                            std::uint8_t b) {
    ImageRaster img{width, height, {}, {}};
    img.rgb.reserve(static_cast<std::size_t>(width) * height * 3);
    for (int i = 0; i < width * height; ++i) img.rgb.insert(img.rgb.end(), {r, g, b});
    return img;
  }

  bool has_pixels() const { return !rgb.empty(); }
};

/// Pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

namespace detail {

inline std::pair<int, int> pixel_span(double lo, double hi, int size) {
  int a = std::clamp(static_cast<int>(std::lround(lo * size)), 0, size);
  int b = std::clamp(static_cast<int>(std::lround(hi * size)), 0, size);
  if (b <= a) {
    if (a >= size) a = size - 1;
    b = a + 1;
  }
  return {a, b};
}

}  // namespace detail

/// Pixels covered by a normalized box: edges rounded half away from zero,
/// at least one pixel on each side.
inline PixelRect pixel_rect(const BoundingBox& box, int width, int height) {
  const auto [x0, x1] = detail::pixel_span(box.x1, box.x2, width);
  const auto [y0, y1] = detail::pixel_span(box.y1, box.y2, height);
  return {x0, y0, x1, y1};
}

/// The box after snapping to the pixel edges of a width x height image.
inline BoundingBox snap_to_pixels(const BoundingBox& box, int width, int height) {
  const auto r = pixel_rect(box, width, height);
  const double w = width, h = height;
  return {r.x0 / w, r.y0 / h, r.x1 / w, r.y1 / h};
}

inline ImageRaster crop(const ImageRaster& image, const BoundingBox& box) {
  const auto r = pixel_rect(box, image.width, image.height);
  ImageRaster out;
  out.width = r.width();
  out.height = r.height();
  if (!image.has_pixels()) {
    out.reference = image.reference + "[" + std::to_string(r.x0) + ":" + std::to_string(r.x1) +
                    "," + std::to_string(r.y0) + ":" + std::to_string(r.y1) + "]";
    return out;
  }
  out.rgb.reserve(static_cast<std::size_t>(out.width) * out.height * 3);
  for (int y = r.y0; y < r.y1; ++y) {
    const auto row = image.rgb.begin() + (static_cast<std::ptrdiff_t>(y) * image.width + r.x0) * 3;
    out.rgb.insert(out.rgb.end(), row, row + static_cast<std::ptrdiff_t>(out.width) * 3);
  }
  return out;
}

/// Identifies one object of one evaluated sample.
struct ObjectRef {
  std::string sample_id;
  int object_id = 0;

  std::string key(std::string_view what) const {
    return sample_id + ":" + std::to_string(object_id) + ":" + std::string(what);
  }
};

/// Image/text encoder pair sharing one embedding space.
class EmbedderBackend {
 public:
  virtual ~EmbedderBackend() = default;
  virtual std::vector<double> embed_image(const ImageRaster& crop, const ObjectRef& ref) const = 0;
  virtual std::vector<double> embed_text(const std::string& label, const ObjectRef& ref) const = 0;
};

/// Produces a mask of the object inside `box`, at image resolution.
class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual BinaryMask mask(const ImageRaster& image, const BoundingBox& box,
                          const ObjectRef& ref) const = 0;
};

namespace detail {

inline std::vector<double> hashed_vector(std::uint64_t key, std::size_t dim) {
  Rng rng(key);
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace detail

/// Deterministic embeddings keyed on crop content (or reference name) and
/// label text. Scores are only meaningful for plumbing tests.
class HashEmbedderBackend final : public EmbedderBackend {
 public:
  explicit HashEmbedderBackend(std::size_t dim = 64, std::uint64_t seed = 0)
      : dim_(dim), seed_(seed) {}

  std::vector<double> embed_image(const ImageRaster& crop, const ObjectRef&) const override {
    std::uint64_t h = fnv1a(std::to_string(crop.width) + "x" + std::to_string(crop.height));
    if (crop.has_pixels()) {
      h = fnv1a(std::string_view(reinterpret_cast<const char*>(crop.rgb.data()), crop.rgb.size()),
                h);
    } else {
      h = fnv1a(crop.reference, h);
    }
    return detail::hashed_vector(mix_seed(seed_, h), dim_);
  }

  std::vector<double> embed_text(const std::string& label, const ObjectRef&) const override {
    return detail::hashed_vector(mix_seed(seed_ ^ 0x74657874ULL, fnv1a(label)), dim_);
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Precomputed embeddings looked up as "<sample>:<object>:image" and
/// "<sample>:<object>:text".
class FileEmbedderBackend final : public EmbedderBackend {
 public:
  explicit FileEmbedderBackend(std::map<std::string, std::vector<double>> table)
      : table_(std::move(table)) {}

  std::vector<double> embed_image(const ImageRaster&, const ObjectRef& ref) const override {
    return lookup(ref.key("image"));
  }
  std::vector<double> embed_text(const std::string&, const ObjectRef& ref) const override {
    return lookup(ref.key("text"));
  }

 private:
  std::vector<double> lookup(const std::string& key) const {
    const auto it = table_.find(key);
    if (it == table_.end()) throw ValidationError("no embedding for " + key);
    return it->second;
  }

  std::map<std::string, std::vector<double>> table_;
};

/// Fills the leading fraction of the box's pixel rectangle along each axis.
/// With the defaults the mask is exactly the box.
class RectangleSegmenter final : public SegmenterBackend {
 public:
  explicit RectangleSegmenter(double fill_x = 1.0, double fill_y = 1.0)
      : fill_x_(fill_x), fill_y_(fill_y) {}

  BinaryMask mask(const ImageRaster& image, const BoundingBox& box,
                  const ObjectRef&) const override {
    BinaryMask m(image.width, image.height);
    const auto r = pixel_rect(box, image.width, image.height);
    const int w = static_cast<int>(std::lround(fill_x_ * r.width()));
    const int h = static_cast<int>(std::lround(fill_y_ * r.height()));
    for (int y = r.y0; y < r.y0 + h; ++y) {
      for (int x = r.x0; x < r.x0 + w; ++x) m.set(x, y);
    }
    return m;
  }

 private:
  double fill_x_;
  double fill_y_;
};

/// Reads "<sample>_<object>.pgm" masks from a directory.
class FileSegmenterBackend final : public SegmenterBackend {
 public:
  explicit FileSegmenterBackend(std::filesystem::path dir) : dir_(std::move(dir)) {}

  BinaryMask mask(const ImageRaster& image, const BoundingBox&,
                  const ObjectRef& ref) const override {
    auto m = read_pgm_mask(dir_ / (ref.sample_id + "_" + std::to_string(ref.object_id) + ".pgm"));
    if (m.width != image.width || m.height != image.height) {
      throw ValidationError("mask for " + ref.key("mask") + " is " + std::to_string(m.width) +
                            "x" + std::to_string(m.height) + ", image is " +
                            std::to_string(image.width) + "x" + std::to_string(image.height));
    }
    return m;
  }

 private:
  std::filesystem::path dir_;
};

struct FilterBounds {
  double lower = 0.05;
  double upper = 0.50;

  void validate() const {
    if (!(0.0 <= lower && lower < upper && upper <= 1.0)) {
      throw ValidationError("filter bounds must satisfy 0 <= lower < upper <= 1");
    }
  }
};

struct SizeDecision {
  bool keep = true;
  std::string reason;  // "small", "large" or empty
};

/// Drops objects whose area fraction is strictly below `lower` or strictly
/// above `upper`; the bounds themselves are kept.
inline SizeDecision size_filter(const BoundingBox& box, const FilterBounds& bounds = {}) {
  bounds.validate();
  const double area = box_area_fraction(box);
  if (area < bounds.lower) return {false, "small"};
  if (area > bounds.upper) return {false, "large"};
  return {true, {}};
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ValidationError("cosine similarity: dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw ValidationError("cosine similarity: zero vector");
  const double cos = dot / (std::sqrt(na) * std::sqrt(nb));
  if (!std::isfinite(cos)) throw ValidationError("cosine similarity: non-finite embedding");
  return std::clamp(cos, -1.0, 1.0);
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.width() * a.height() + b.width() * b.height() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Tightest box (normalized, pixel-edge aligned) containing every
/// foreground pixel; nullopt for an empty mask.
inline std::optional<BoundingBox> circumscribed_rectangle(const BinaryMask& mask) {
  if (mask.width <= 0 || mask.height <= 0) {
    throw ValidationError("circumscribed_rectangle: mask has no pixels");
  }
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  const double w = mask.width, h = mask.height;
  return BoundingBox{x0 / w, y0 / h, (x1 + 1) / w, (y1 + 1) / h};
}

enum class ScoreKind { crop_clip, sam_iou };

inline std::string_view score_kind_name(ScoreKind k) {
  return k == ScoreKind::crop_clip ? "cropclip" : "samiou";
}

inline ScoreKind parse_score_kind(std::string_view s) {
  if (s == "cropclip") return ScoreKind::crop_clip;
  if (s == "samiou") return ScoreKind::sam_iou;
  throw ValidationError("unknown score kind '" + std::string(s) + "'");
}

struct ObjectScore {
  std::string sample_id;
  int object_id = 0;
  BoundingBox box;
  std::string label;
  std::optional<double> score;  // x100 scale; empty when filtered
  bool filtered = false;
  std::string reason;
};

struct SampleScore {
  std::string sample_id;
  std::optional<double> mean;  // empty when every object was filtered
  std::size_t kept = 0;
};

struct MetricReport {
  ScoreKind kind = ScoreKind::crop_clip;
  std::vector<ObjectScore> objects;
  std::vector<SampleScore> samples;
  std::optional<double> corpus_mean;
};

/// Per-sample mean over unfiltered objects, then the corpus mean over
/// samples that kept at least one object. Samples keep first-seen order.
inline MetricReport summarize(ScoreKind kind, std::vector<ObjectScore> objects) {
  MetricReport report;
  report.kind = kind;
  report.objects = std::move(objects);

  std::vector<std::string> order;
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& o : report.objects) {
    if (!acc.contains(o.sample_id)) order.push_back(o.sample_id);
    auto& [sum, n] = acc[o.sample_id];
    if (!o.filtered && o.score) {
      sum += *o.score;
      ++n;
    }
  }
  double corpus = 0.0;
  std::size_t scored = 0;
  for (const auto& id : order) {
    const auto [sum, n] = acc[id];
    SampleScore s{id, std::nullopt, n};
    if (n > 0) {
      s.mean = sum / static_cast<double>(n);
      corpus += *s.mean;
      ++scored;
    }
    report.samples.push_back(std::move(s));
  }
  if (scored > 0) report.corpus_mean = corpus / static_cast<double>(scored);
  return report;
}

/// Concatenates per-sample reports of the same kind and re-aggregates.
inline MetricReport merge_reports(std::span<const MetricReport> reports) {
  if (reports.empty()) return summarize(ScoreKind::crop_clip, {});
  std::vector<ObjectScore> all;
  for (const auto& r : reports) {
    if (r.kind != reports.front().kind) throw ValidationError("cannot merge reports of different kinds");
    all.insert(all.end(), r.objects.begin(), r.objects.end());
  }
  return summarize(reports.front().kind, std::move(all));
}

namespace detail {

template <typename ScoreFn>
MetricReport score_objects(ScoreKind kind, const Layout& layout, const FilterBounds& bounds,
                           const std::string& sample_id, ScoreFn&& score_one) {
  bounds.validate();
  std::vector<ObjectScore> scores;
  for (const auto& obj : layout.objects) {
    ObjectScore s{sample_id, obj.id, obj.box, obj.text, std::nullopt, false, {}};
    const auto decision = size_filter(obj.box, bounds);
    if (!decision.keep) {
      s.filtered = true;
      s.reason = decision.reason;
    } else {
      try {
        s.score = score_one(obj, ObjectRef{sample_id, obj.id});
      } catch (const std::exception& e) {
        s.filtered = true;
        s.reason = std::string("backend_error: ") + e.what();
      }
    }
    scores.push_back(std::move(s));
  }
  return summarize(kind, std::move(scores));
}

}  // namespace detail

/// Cosine similarity x100 between each kept object's crop and its label.
inline MetricReport crop_clip_score(const ImageRaster& image, const Layout& layout,
                                    const EmbedderBackend& embedder,
                                    const FilterBounds& bounds = {},
                                    const std::string& sample_id = "0") {
  return detail::score_objects(
      ScoreKind::crop_clip, layout, bounds, sample_id,
      [&](const DescriptionTuple& obj, const ObjectRef& ref) {
        const auto image_vec = embedder.embed_image(crop(image, obj.box), ref);
        const auto text_vec = embedder.embed_text(obj.text, ref);
        return 100.0 * cosine_similarity(image_vec, text_vec);
      });
}

/// IoU x100 between each kept layout box, snapped to the pixel grid, and the
/// circumscribed rectangle of the segmenter's mask; an empty mask scores 0.
inline MetricReport sam_iou_score(const ImageRaster& image, const Layout& layout,
                                  const SegmenterBackend& segmenter,
                                  const FilterBounds& bounds = {},
                                  const std::string& sample_id = "0") {
  return detail::score_objects(
      ScoreKind::sam_iou, layout, bounds, sample_id,
      [&](const DescriptionTuple& obj, const ObjectRef& ref) {
        const auto mask = segmenter.mask(image, obj.box, ref);
        if (mask.width != image.width || mask.height != image.height) {
          throw ValidationError("mask dimensions differ from image");
        }
        const auto generated = circumscribed_rectangle(mask);
        const auto target = snap_to_pixels(obj.box, image.width, image.height);
        return generated ? 100.0 * iou(target, *generated) : 0.0;
      });
}

/// Product-moment correlation coefficient.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("pearson: lengths differ");
  if (xs.size() < 2) throw ValidationError("pearson: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw ValidationError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct Reliability {
  double all = 0.0;
  std::optional<double> filtered;  // empty when fewer than two objects survive
  std::size_t kept = 0;
};

/// Agreement between automatic scores and human ratings before and after
/// the size filter (area_fractions[i] belongs to the i-th rated object).
inline Reliability reliability(std::span<const double> metric, std::span<const double> human,
                               std::span<const double> area_fractions,
                               const FilterBounds& bounds = {}) {
  if (area_fractions.size() != metric.size()) {
    throw ValidationError("reliability: one area per rated object required");
  }
  bounds.validate();
  Reliability r;
  r.all = pearson(metric, human);
  std::vector<double> m, h;
  for (std::size_t i = 0; i < metric.size(); ++i) {
    const double a = area_fractions[i];
    if (a < bounds.lower || a > bounds.upper) continue;
    m.push_back(metric[i]);
    h.push_back(human[i]);
  }
  r.kept = m.size();
  if (m.size() >= 2) r.filtered = pearson(m, h);
  return r;
}

}  // namespace rgk
