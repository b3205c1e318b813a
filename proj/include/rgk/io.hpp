#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rgk/attention.hpp"
#include "rgk/error.hpp"
#include "rgk/format.hpp"
#include "rgk/layout.hpp"
#include "rgk/metrics.hpp"
#include "rgk/region.hpp"
#include "rgk/text_stats.hpp"

namespace rgk {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes through a sibling temp file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

// ---------------------------------------------------------------------------
// Canonical JSON: sorted keys, compact, floats with 9 significant digits.
// ---------------------------------------------------------------------------

namespace detail {

inline void dump_canonical(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out.push_back('{');
      bool first = true;
      for (const auto& [key, value] : j.items()) {  // std::map keeps keys sorted
        if (!first) out.push_back(',');
        first = false;
        out += json(key).dump();
        out.push_back(':');
        dump_canonical(value, out);
      }
      out.push_back('}');
      break;
    }
    case json::value_t::array: {
      out.push_back('[');
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out.push_back(',');
        dump_canonical(j[i], out);
      }
      out.push_back(']');
      break;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
      } else {
        out += format_sig9(v);
      }
      break;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

inline std::string to_canonical_json(const json& j) {
  std::string out;
  detail::dump_canonical(j, out);
  out.push_back('\n');
  return out;
}

inline json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Layout files: {"image_size": [W, H], "caption": "...",
//                "objects": [{"bbox": [x1, y1, x2, y2], "label": "..."}]}
// with pixel coordinates.
// ---------------------------------------------------------------------------

struct LayoutLoad {
  Layout layout;
  std::vector<std::string> warnings;
};

namespace detail {

inline void check_fields(const json& obj, std::initializer_list<std::string_view> known,
                         const std::string& where, bool strict,
                         std::vector<std::string>& warnings) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (ok) continue;
    const auto msg = where + ": unknown field '" + key + "'";
    if (strict) throw ValidationError(msg);
    warnings.push_back(msg);
  }
}

inline double finite_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ValidationError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(where + ": non-finite number");
  return v;
}

}  // namespace detail

/// Parses and normalizes a layout. Unknown fields are errors when `strict`,
/// warnings otherwise. Invariant checks are left to validate_layout.
inline LayoutLoad parse_layout(const json& j, bool strict = true) {
  LayoutLoad result;
  if (!j.is_object()) throw ValidationError("layout: expected a JSON object");
  detail::check_fields(j, {"image_size", "caption", "objects"}, "layout", strict,
                       result.warnings);

  const auto size = j.find("image_size");
  if (size == j.end() || !size->is_array() || size->size() != 2 ||
      !(*size)[0].is_number_integer() || !(*size)[1].is_number_integer()) {
    throw ValidationError("layout: image_size must be [width, height] integers");
  }
  auto& layout = result.layout;
  layout.image_width = (*size)[0].get<int>();
  layout.image_height = (*size)[1].get<int>();
  if (layout.image_width <= 0 || layout.image_height <= 0) {
    throw ValidationError("layout: image_size must be positive");
  }
  if (const auto cap = j.find("caption"); cap != j.end() && !cap->is_null()) {
    if (!cap->is_string()) throw ValidationError("layout: caption must be a string");
    layout.caption = cap->get<std::string>();
  }

  const auto objects = j.find("objects");
  if (objects == j.end()) return result;
  if (!objects->is_array()) throw ValidationError("layout: objects must be an array");
  const double w = layout.image_width;
  const double h = layout.image_height;
  for (std::size_t i = 0; i < objects->size(); ++i) {
    const auto& o = (*objects)[i];
    const std::string where = "layout: objects[" + std::to_string(i) + "]";
    if (!o.is_object()) throw ValidationError(where + ": expected an object");
    detail::check_fields(o, {"bbox", "label"}, where, strict, result.warnings);
    const auto bbox = o.find("bbox");
    if (bbox == o.end() || !bbox->is_array() || bbox->size() != 4) {
      throw ValidationError(where + ": bbox must be [x1, y1, x2, y2]");
    }
    const auto label = o.find("label");
    if (label == o.end() || !label->is_string()) {
      throw ValidationError(where + ": label must be a string");
    }
    BoundingBox box{detail::finite_number((*bbox)[0], where) / w,
                    detail::finite_number((*bbox)[1], where) / h,
                    detail::finite_number((*bbox)[2], where) / w,
                    detail::finite_number((*bbox)[3], where) / h};
    layout.objects.push_back({box, label->get<std::string>(), static_cast<int>(i)});
  }
  return result;
}

/// Reads, parses and validates a layout file.
inline LayoutLoad load_layout(const std::filesystem::path& path, bool strict = true) {
  auto result = parse_layout(parse_json(read_file(path), path.string()), strict);
  if (const auto v = validate_layout(result.layout); !v.empty()) {
    std::string msg = path.string() + ": invalid layout";
    for (const auto& x : v) msg += "; " + describe(x);
    throw ValidationError(msg);
  }
  return result;
}

inline json layout_to_json(const Layout& layout) {
  json objects = json::array();
  const double w = layout.image_width;
  const double h = layout.image_height;
  for (const auto& o : layout.objects) {
    objects.push_back({{"bbox", {o.box.x1 * w, o.box.y1 * h, o.box.x2 * w, o.box.y2 * h}},
                       {"label", o.text}});
  }
  json j = {{"image_size", {layout.image_width, layout.image_height}}, {"objects", objects}};
  if (layout.caption) j["caption"] = *layout.caption;
  return j;
}

// ---------------------------------------------------------------------------
// Partitions
// ---------------------------------------------------------------------------

inline std::string_view region_kind(const Region& r) {
  if (r.objects.empty()) return "background";
  return r.objects.size() == 1 ? "single" : "overlap";
}

inline json partition_to_json(const RegionPartition& p) {
  json regions = json::array();
  for (std::size_t i = 0; i < p.regions.size(); ++i) {
    const auto& r = p.regions[i];
    regions.push_back({{"index", i},
                       {"kind", region_kind(r)},
                       {"objects", r.objects},
                       {"token_count", r.tokens.size()},
                       {"tokens", r.tokens}});
  }
  return {{"grid", {{"height", p.grid.height()}, {"width", p.grid.width()}}},
          {"regions", regions},
          {"skipped_objects", p.skipped_objects},
          {"token_to_region", p.token_to_region}};
}

// ---------------------------------------------------------------------------
// Feature files: uint32 H, W, C then H*W*C float32, all little-endian,
// tokens row-major.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_features(const TokenGrid& grid, const Matrix& values) {
  if (values.rows() != grid.size()) throw std::invalid_argument("feature rows do not match grid");
  std::string out;
  out.reserve(12 + values.values().size() * 4);
  detail::put_u32(out, static_cast<std::uint32_t>(grid.height()));
  detail::put_u32(out, static_cast<std::uint32_t>(grid.width()));
  detail::put_u32(out, static_cast<std::uint32_t>(values.cols()));
  for (double v : values.values()) {
    detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

inline FeatureMap decode_features(std::string_view bytes, std::string_view what = "features") {
  if (bytes.size() < 12) throw IoError(std::string(what) + ": truncated header");
  const std::uint64_t h = detail::get_u32(bytes, 0);
  const std::uint64_t w = detail::get_u32(bytes, 4);
  const std::uint64_t c = detail::get_u32(bytes, 8);
  if (h == 0 || w == 0 || c == 0) throw ValidationError(std::string(what) + ": zero-size feature map");
  if (bytes.size() != 12 + 4 * h * w * c) {
    throw IoError(std::string(what) + ": expected " + std::to_string(12 + 4 * h * w * c) +
                  " bytes, found " + std::to_string(bytes.size()));
  }
  FeatureMap f{TokenGrid(h, w), Matrix(h * w, c)};
  auto dst = f.values.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = std::bit_cast<float>(detail::get_u32(bytes, 12 + 4 * i));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Embedding files: {"key": [numbers...]}
// ---------------------------------------------------------------------------

inline std::map<std::string, std::vector<double>> load_embeddings(
    const std::filesystem::path& path) {
  const auto j = parse_json(read_file(path), path.string());
  if (!j.is_object()) throw ValidationError(path.string() + ": expected an object of vectors");
  std::map<std::string, std::vector<double>> out;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_array() || value.empty()) {
      throw ValidationError(path.string() + ": '" + key + "' is not a vector");
    }
    std::vector<double> v;
    for (const auto& x : value) v.push_back(detail::finite_number(x, path.string() + ": " + key));
    out.emplace(key, std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metric reports
// ---------------------------------------------------------------------------

namespace detail {

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(); }

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

inline json report_to_json(const MetricReport& report) {
  json samples = json::array();
  for (const auto& s : report.samples) {
    json objects = json::array();
    for (const auto& o : report.objects) {
      if (o.sample_id != s.sample_id) continue;
      objects.push_back({{"object_id", o.object_id},
                         {"label", o.label},
                         {"box", {o.box.x1, o.box.y1, o.box.x2, o.box.y2}},
                         {"score", detail::optional_number(o.score)},
                         {"filtered", o.filtered},
                         {"reason", o.reason}});
    }
    samples.push_back({{"sample_id", s.sample_id},
                       {"mean", detail::optional_number(s.mean)},
                       {"kept", s.kept},
                       {"objects", objects}});
  }
  return {{"kind", score_kind_name(report.kind)},
          {"corpus_mean", detail::optional_number(report.corpus_mean)},
          {"samples", samples}};
}

inline MetricReport report_from_json(const json& j) {
  try {
    const auto kind = parse_score_kind(j.at("kind").get<std::string>());
    std::vector<ObjectScore> objects;
    for (const auto& s : j.at("samples")) {
      const auto sample_id = s.at("sample_id").get<std::string>();
      for (const auto& o : s.at("objects")) {
        const auto& b = o.at("box");
        ObjectScore x;
        x.sample_id = sample_id;
        x.object_id = o.at("object_id").get<int>();
        x.label = o.at("label").get<std::string>();
        x.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                 b.at(3).get<double>()};
        if (!o.at("score").is_null()) x.score = o.at("score").get<double>();
        x.filtered = o.at("filtered").get<bool>();
        x.reason = o.at("reason").get<std::string>();
        objects.push_back(std::move(x));
      }
    }
    return summarize(kind, std::move(objects));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("metric report: ") + e.what());
  }
}

inline std::string report_to_csv(const MetricReport& report) {
  std::ostringstream os;
  os << "sample_id,object_id,kind,label,x1,y1,x2,y2,score,filtered,reason\n";
  for (const auto& o : report.objects) {
    os << detail::csv_field(o.sample_id) << ',' << o.object_id << ','
       << score_kind_name(report.kind) << ',' << detail::csv_field(o.label) << ','
       << format_sig9(o.box.x1) << ',' << format_sig9(o.box.y1) << ',' << format_sig9(o.box.x2)
       << ',' << format_sig9(o.box.y2) << ',' << (o.score ? format_sig9(*o.score) : "") << ','
       << (o.filtered ? 1 : 0) << ',' << detail::csv_field(o.reason) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Attention diagnostics
// ---------------------------------------------------------------------------

inline json diagnostics_to_json(const AttentionOutput& out) {
  json regions = json::array();
  for (const auto& r : out.regions) {
    regions.push_back({{"objects", r.objects},
                       {"tokens", r.tokens},
                       {"sequence_length", r.sequence_length}});
  }
  double sum_sq = 0.0;
  double max_abs = 0.0;
  for (double v : out.values.values()) {
    sum_sq += v * v;
    max_abs = std::max(max_abs, std::abs(v));
  }
  return {{"regions", regions},
          {"output_l2", std::sqrt(sum_sq)},
          {"output_max_abs", max_abs},
          {"rows", out.values.rows()},
          {"channels", out.values.cols()}};
}

}  // namespace rgk
