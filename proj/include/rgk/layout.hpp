#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rgk/error.hpp"

namespace rgk {

/// Axis-aligned box in normalized image coordinates, each a fraction of the
/// image width (x) or height (y). A valid box satisfies
/// 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1.
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }

  bool valid() const {
    return 0.0 <= x1 && x1 < x2 && x2 <= 1.0 && 0.0 <= y1 && y1 < y2 && y2 <= 1.0;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// One (box, text) pair of a layout. `id` is the object's index in its layout.
struct DescriptionTuple {
  BoundingBox box;
  std::string text;
  int id = 0;

  friend bool operator==(const DescriptionTuple&, const DescriptionTuple&) = default;
};

struct Layout {
  int image_width = 512;
  int image_height = 512;
  std::optional<std::string> caption;
  std::vector<DescriptionTuple> objects;

  friend bool operator==(const Layout&, const Layout&) = default;
};

/// H x W grid of visual tokens, indexed row-major.
class TokenGrid {
 public:
  TokenGrid() = default;
  TokenGrid(std::size_t height, std::size_t width) : height_(height), width_(width) {
    if (height == 0 || width == 0) {
      throw std::invalid_argument("TokenGrid: dimensions must be positive");
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return height_ * width_; }

  std::size_t index(std::size_t row, std::size_t col) const { return row * width_ + col; }
  std::size_t row_of(std::size_t index) const { return index / width_; }
  std::size_t col_of(std::size_t index) const { return index % width_; }

  double center_x(std::size_t col) const {
    return (static_cast<double>(col) + 0.5) / static_cast<double>(width_);
  }
  double center_y(std::size_t row) const {
    return (static_cast<double>(row) + 0.5) / static_cast<double>(height_);
  }

  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;

 private:
  std::size_t height_ = 1;
  std::size_t width_ = 1;
};

/// Sorted, duplicate-free token indices.
using TokenMask = std::vector<std::size_t>;

struct Violation {
  std::optional<int> object_id;
  std::string rule;

  friend bool operator==(const Violation&, const Violation&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\n\r\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

// Half-open [lo, hi) membership, closed at the far image edge.
inline bool axis_contains(double lo, double hi, double c) {
  return lo <= c && (c < hi || (hi >= 1.0 && c <= hi));
}

// [first, last) cells along one axis whose centers the interval contains.
// The closed-form estimate is corrected against the exact predicate so the
// result agrees with a per-cell test bit for bit.
inline std::pair<std::size_t, std::size_t> axis_span(double lo, double hi, std::size_t n) {
  if (!(lo < hi)) return {0, 0};
  const auto count = static_cast<std::ptrdiff_t>(n);
  const double scale = static_cast<double>(n);
  auto in = [&](std::ptrdiff_t i) {
    return axis_contains(lo, hi, (static_cast<double>(i) + 0.5) / scale);
  };
  auto estimate = [&](double v) {
    const double e = std::ceil(v * scale - 0.5);
    return static_cast<std::ptrdiff_t>(std::clamp(e, 0.0, scale));
  };
  std::ptrdiff_t first = estimate(lo);
  while (first > 0 && in(first - 1)) --first;
  while (first < count && !in(first)) ++first;
  std::ptrdiff_t last = std::max(first, estimate(hi));
  while (last < count && in(last)) ++last;
  while (last > first && !in(last - 1)) --last;
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
}

}  // namespace detail

/// True when the token center (cx, cy) falls in the box under the half-open
/// rule used for all token membership.
inline bool center_in_box(double cx, double cy, const BoundingBox& box) {
  return detail::axis_contains(box.x1, box.x2, cx) && detail::axis_contains(box.y1, box.y2, cy);
}

/// Lists every broken invariant. An empty result means the layout is valid.
inline std::vector<Violation> validate_layout(const Layout& layout) {
  std::vector<Violation> out;
  if (layout.image_width <= 0) out.push_back({std::nullopt, "image_width > 0"});
  if (layout.image_height <= 0) out.push_back({std::nullopt, "image_height > 0"});
  for (std::size_t i = 0; i < layout.objects.size(); ++i) {
    const auto& obj = layout.objects[i];
    const auto& b = obj.box;
    auto flag = [&](bool ok, const char* rule) {
      if (!ok) out.push_back({obj.id, rule});
    };
    flag(0.0 <= b.x1, "0 <= x1");
    flag(b.x1 < b.x2, "x1 < x2");
    flag(b.x2 <= 1.0, "x2 <= 1");
    flag(0.0 <= b.y1, "0 <= y1");
    flag(b.y1 < b.y2, "y1 < y2");
    flag(b.y2 <= 1.0, "y2 <= 1");
    flag(!detail::trim(obj.text).empty(), "text non-empty");
    flag(obj.id == static_cast<int>(i), "ids contiguous from 0");
  }
  return out;
}

inline std::string describe(const Violation& v) {
  return v.object_id ? "object " + std::to_string(*v.object_id) + ": " + v.rule : v.rule;
}

/// Tokens whose centers lie in the box. May be empty for thin boxes.
inline TokenMask rasterize_box(const BoundingBox& box, const TokenGrid& grid) {
  const auto [c0, c1] = detail::axis_span(box.x1, box.x2, grid.width());
  const auto [r0, r1] = detail::axis_span(box.y1, box.y2, grid.height());
  TokenMask mask;
  if (c0 >= c1 || r0 >= r1) return mask;
  mask.reserve((c1 - c0) * (r1 - r0));
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t c = c0; c < c1; ++c) mask.push_back(grid.index(r, c));
  }
  return mask;
}

inline double box_area_fraction(const BoundingBox& box) {
  return std::clamp(box.width() * box.height(), 0.0, 1.0);
}

/// Intersects every box with `crop` and re-expresses survivors in crop
/// coordinates. A box is dropped when less than `retention_threshold` of
/// its area survives (or none of it does). Ids are re-indexed in order.
inline Layout crop_layout(const Layout& layout, const BoundingBox& crop,
                          double retention_threshold = 0.3) {
  if (!(crop.width() > 0.0) || !(crop.height() > 0.0)) {
    throw ValidationError("crop_layout: crop has zero area");
  }
  if (!(retention_threshold >= 0.0 && retention_threshold <= 1.0)) {
    throw ValidationError("crop_layout: retention threshold must be in [0, 1]");
  }
  Layout out;
  out.caption = layout.caption;
  out.image_width = std::max(1, static_cast<int>(std::lround(crop.width() * layout.image_width)));
  out.image_height =
      std::max(1, static_cast<int>(std::lround(crop.height() * layout.image_height)));

  const double cw = crop.width();
  const double ch = crop.height();
  for (const auto& obj : layout.objects) {
    const double ix1 = std::max(obj.box.x1, crop.x1);
    const double iy1 = std::max(obj.box.y1, crop.y1);
    const double ix2 = std::min(obj.box.x2, crop.x2);
    const double iy2 = std::min(obj.box.y2, crop.y2);
    if (!(ix1 < ix2 && iy1 < iy2)) continue;
    const double retained = ((ix2 - ix1) * (iy2 - iy1)) / (obj.box.width() * obj.box.height());
    if (retained < retention_threshold) continue;

    BoundingBox box{std::clamp((ix1 - crop.x1) / cw, 0.0, 1.0),
                    std::clamp((iy1 - crop.y1) / ch, 0.0, 1.0),
                    std::clamp((ix2 - crop.x1) / cw, 0.0, 1.0),
                    std::clamp((iy2 - crop.y1) / ch, 0.0, 1.0)};
    out.objects.push_back({box, obj.text, static_cast<int>(out.objects.size())});
  }
  return out;
}

}  // namespace rgk
