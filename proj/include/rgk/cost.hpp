#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rgk/attention.hpp"
#include "rgk/error.hpp"
#include "rgk/format.hpp"
#include "rgk/layout.hpp"
#include "rgk/matrix.hpp"
#include "rgk/random.hpp"
#include "rgk/region.hpp"

namespace rgk {

enum class Variant { regional_cross, extended_self, per_object_cross };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::regional_cross: return "regional_cross";
    case Variant::extended_self: return "extended_self";
    case Variant::per_object_cross: return "per_object_cross";
  }
  return "";
}

inline Variant parse_variant(std::string_view name) {
  if (name == "regional_cross") return Variant::regional_cross;
  if (name == "extended_self") return Variant::extended_self;
  if (name == "per_object_cross") return Variant::per_object_cross;
  throw ValidationError("unknown variant '" + std::string(name) + "'");
}

/// One cross-attention call: `tokens` queries against `sequence` keys.
struct Segment {
  std::uint64_t tokens = 0;
  std::uint64_t sequence = 0;
};

/// Shape of one layout-conditioning attention layer.
///
/// extended_self ignores `segments`: visual and grounding tokens are
/// concatenated into one self-attention of length N + T_total.
/// regional_cross expects one segment per region (token counts summing to
/// N); per_object_cross one segment per object with its box token count.
struct AttentionConfig {
  Variant variant = Variant::regional_cross;
  std::uint64_t tokens = 0;         // N
  std::uint64_t channels = 0;       // C
  std::uint64_t dim = 0;            // d
  std::uint64_t heads = 1;          // h
  std::uint64_t text_tokens = 0;    // T_total
  std::uint64_t kv_channels = 0;    // input width of K/V projections in cross variants
  std::uint64_t objects = 0;
  std::vector<Segment> segments;
};

/// Multiply-accumulates count as 2 FLOPs; softmax and normalization are
/// not counted.
struct CostReport {
  std::uint64_t projection = 0;
  std::uint64_t attention = 0;
  std::uint64_t output = 0;

  std::uint64_t total() const { return projection + attention + output; }
};

inline void validate_config(const AttentionConfig& c) {
  if (c.tokens == 0 || c.channels == 0 || c.dim == 0 || c.heads == 0 || c.text_tokens == 0) {
    throw ValidationError("attention config: N, C, d, heads and T_total must be positive");
  }
  if (c.dim % c.heads != 0) throw ValidationError("attention config: heads must divide d");
  if (c.variant == Variant::extended_self) return;
  if (c.kv_channels == 0) throw ValidationError("attention config: kv_channels must be positive");
  std::uint64_t covered = 0;
  for (const auto& s : c.segments) {
    if (s.tokens == 0 || s.sequence == 0) {
      throw ValidationError("attention config: empty segment");
    }
    covered += s.tokens;
  }
  if (c.variant == Variant::regional_cross && covered != c.tokens) {
    throw ValidationError("attention config: region token counts sum to " +
                          std::to_string(covered) + ", expected N = " + std::to_string(c.tokens));
  }
}

/// K/V projection plus score and weighted-sum cost of one segment
/// (the query projection and output projection are counted separately).
inline CostReport segment_flops(const AttentionConfig& c, const Segment& s) {
  CostReport r;
  r.projection = 2 * s.sequence * c.kv_channels * c.dim * 2;
  r.attention = 2 * (s.tokens * s.sequence * c.dim * 2);
  return r;
}

inline CostReport flops(const AttentionConfig& c) {
  validate_config(c);
  CostReport r;
  if (c.variant == Variant::extended_self) {
    const std::uint64_t len = c.tokens + c.text_tokens;
    r.projection = 3 * len * c.channels * c.dim * 2;
    r.attention = 2 * (len * len * c.dim * 2);
    r.output = len * c.dim * c.channels * 2;
    return r;
  }
  std::uint64_t queried = 0;
  for (const auto& s : c.segments) {
    const auto part = segment_flops(c, s);
    r.projection += part.projection;
    r.attention += part.attention;
    queried += s.tokens;
  }
  // Regional queries are projected once for the whole map; per-object
  // queries are projected per box, so overlaps count twice.
  const std::uint64_t q_rows = c.variant == Variant::regional_cross ? c.tokens : queried;
  r.projection += q_rows * c.channels * c.dim * 2;
  r.output = q_rows * c.dim * c.channels * 2;
  return r;
}

/// Grounded sequence length for a region covered by objects with the given
/// word counts: [bos] words [sep] ... [eos], or a lone null token.
inline std::uint64_t grounded_length(std::span<const std::uint64_t> word_counts) {
  if (word_counts.empty()) return 1;
  std::uint64_t len = 2 + (word_counts.size() - 1);
  for (auto w : word_counts) len += w;
  return len;
}

/// Builds a config from a real partition of `layout` on `grid`, where
/// object i contributes words_per_object[i] text tokens.
inline AttentionConfig make_config(Variant variant, const TokenGrid& grid, const Layout& layout,
                                   std::span<const std::uint64_t> words_per_object,
                                   std::uint64_t channels, std::uint64_t dim,
                                   std::uint64_t heads, std::uint64_t kv_channels) {
  if (words_per_object.size() != layout.objects.size()) {
    throw std::invalid_argument("make_config: one word count per object required");
  }
  AttentionConfig c;
  c.variant = variant;
  c.tokens = grid.size();
  c.channels = channels;
  c.dim = dim;
  c.heads = heads;
  c.kv_channels = kv_channels;
  c.objects = layout.objects.size();
  c.text_tokens = std::accumulate(words_per_object.begin(), words_per_object.end(),
                                  std::uint64_t{0});
  if (variant == Variant::regional_cross) {
    for (const auto& region : reorganize(layout, grid).regions) {
      std::vector<std::uint64_t> words;
      for (int id : region.objects) words.push_back(words_per_object[id]);
      c.segments.push_back({region.tokens.size(), grounded_length(words)});
    }
  } else if (variant == Variant::per_object_cross) {
    for (std::size_t i = 0; i < layout.objects.size(); ++i) {
      const auto mask = rasterize_box(layout.objects[i].box, grid);
      if (mask.empty()) continue;
      const std::uint64_t words[] = {words_per_object[i]};
      c.segments.push_back({mask.size(), grounded_length(words)});
    }
  }
  return c;
}

/// Fixed layout of k boxes along the diagonal, each overlapping the next.
inline Layout canonical_layout(std::size_t objects) {
  Layout layout;
  for (std::size_t i = 0; i < objects; ++i) {
    const double offset = 0.4 * static_cast<double>(i) / static_cast<double>(objects);
    const double lo = 0.1 + offset;
    layout.objects.push_back({{lo, lo, lo + 0.45, lo + 0.45},
                              "object " + std::to_string(i),
                              static_cast<int>(i)});
  }
  return layout;
}

/// Spreads `total` words over `objects` as evenly as possible, earlier
/// objects taking the remainder.
inline std::vector<std::uint64_t> split_words(std::uint64_t total, std::size_t objects) {
  std::vector<std::uint64_t> out(objects, objects ? total / objects : 0);
  for (std::size_t i = 0; objects && i < total % objects; ++i) ++out[i];
  return out;
}

/// Config over canonical_layout(objects) on an H x W grid.
inline AttentionConfig canonical_config(Variant variant, const TokenGrid& grid,
                                        std::size_t objects, std::uint64_t text_tokens,
                                        std::uint64_t channels, std::uint64_t dim,
                                        std::uint64_t heads, std::uint64_t kv_channels = 0) {
  const auto words = split_words(text_tokens, objects);
  auto c = make_config(variant, grid, canonical_layout(objects), words, channels, dim, heads,
                       kv_channels ? kv_channels : channels);
  c.text_tokens = text_tokens;
  return c;
}

struct BenchmarkStats {
  std::size_t repetitions = 0;
  double median_s = 0.0;
  double mean_s = 0.0;
  double min_s = 0.0;
  double max_s = 0.0;
};

namespace detail {

struct SyntheticLayer {
  Matrix w_q, w_k, w_v, w_out, w_kv_k, w_kv_v;
  Matrix visual;                     // N x C, or (N + T) x C for self-attention
  std::vector<Matrix> grounding;     // per segment: m x kv
  std::vector<Matrix> segment_queries;  // per-object variant only: n x C
};

inline SyntheticLayer make_synthetic_layer(const AttentionConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticLayer s;
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.channels));
  s.w_q = Matrix::random_normal(c.channels, c.dim, rng, scale);
  s.w_out = Matrix::random_normal(c.dim, c.channels, rng, scale);
  if (c.variant == Variant::extended_self) {
    s.w_k = Matrix::random_normal(c.channels, c.dim, rng, scale);
    s.w_v = Matrix::random_normal(c.channels, c.dim, rng, scale);
    s.visual = Matrix::random_normal(c.tokens + c.text_tokens, c.channels, rng, 1.0);
    return s;
  }
  const double kv_scale = 1.0 / std::sqrt(static_cast<double>(c.kv_channels));
  s.w_kv_k = Matrix::random_normal(c.kv_channels, c.dim, rng, kv_scale);
  s.w_kv_v = Matrix::random_normal(c.kv_channels, c.dim, rng, kv_scale);
  s.visual = Matrix::random_normal(c.tokens, c.channels, rng, 1.0);
  for (const auto& seg : c.segments) {
    s.grounding.push_back(Matrix::random_normal(seg.sequence, c.kv_channels, rng, 1.0));
    if (c.variant == Variant::per_object_cross) {
      s.segment_queries.push_back(Matrix::random_normal(seg.tokens, c.channels, rng, 1.0));
    }
  }
  return s;
}

// One forward pass with the config's shapes; returns a checksum so the work
// cannot be optimized away.
inline double run_synthetic_layer(const AttentionConfig& c, const SyntheticLayer& s) {
  double checksum = 0.0;
  if (c.variant == Variant::extended_self) {
    const Matrix q = matmul(s.visual, s.w_q);
    const Matrix k = matmul(s.visual, s.w_k);
    const Matrix v = matmul(s.visual, s.w_v);
    const Matrix o = matmul(attention_kernel(q, k, v, c.heads), s.w_out);
    return o(0, 0);
  }
  if (c.variant == Variant::regional_cross) {
    const Matrix q = matmul(s.visual, s.w_q);
    std::size_t first = 0;
    for (std::size_t i = 0; i < c.segments.size(); ++i) {
      const auto& seg = c.segments[i];
      std::vector<std::size_t> rows(seg.tokens);
      std::iota(rows.begin(), rows.end(), first);
      first += seg.tokens;
      const Matrix k = matmul(s.grounding[i], s.w_kv_k);
      const Matrix v = matmul(s.grounding[i], s.w_kv_v);
      const Matrix o = matmul(attention_kernel(gather_rows(q, rows), k, v, c.heads), s.w_out);
      checksum += o(0, 0);
    }
    return checksum;
  }
  for (std::size_t i = 0; i < c.segments.size(); ++i) {
    const Matrix q = matmul(s.segment_queries[i], s.w_q);
    const Matrix k = matmul(s.grounding[i], s.w_kv_k);
    const Matrix v = matmul(s.grounding[i], s.w_kv_v);
    const Matrix o = matmul(attention_kernel(q, k, v, c.heads), s.w_out);
    checksum += o(0, 0);
  }
  return checksum;
}

}  // namespace detail

/// Times `repetitions` forward passes over seeded random inputs shaped by
/// the config. Warm-up passes are excluded from the statistics.
inline BenchmarkStats benchmark(const AttentionConfig& config, std::size_t repetitions = 20,
                                std::uint64_t seed = 0, std::size_t warmup = 1) {
  validate_config(config);
  if (repetitions == 0) throw ValidationError("benchmark: repetitions must be >= 1");
  const auto layer = detail::make_synthetic_layer(config, seed);

  volatile double sink = 0.0;
  for (std::size_t i = 0; i < warmup; ++i) sink = sink + detail::run_synthetic_layer(config, layer);

  std::vector<double> samples;
  samples.reserve(repetitions);
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto start = std::chrono::steady_clock::now();
    sink = sink + detail::run_synthetic_layer(config, layer);
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double>(stop - start).count());
  }

  BenchmarkStats stats;
  stats.repetitions = repetitions;
  stats.mean_s = std::accumulate(samples.begin(), samples.end(), 0.0) /
                 static_cast<double>(samples.size());
  std::sort(samples.begin(), samples.end());
  stats.min_s = samples.front();
  stats.max_s = samples.back();
  const std::size_t mid = samples.size() / 2;
  stats.median_s = samples.size() % 2 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
  return stats;
}

struct SweepRow {
  AttentionConfig config;
  CostReport cost;
  std::optional<double> time_median_s;
};

/// Evaluates the FLOPs model for each config, and times it when
/// `repetitions` > 0.
inline std::vector<SweepRow> sweep(std::span<const AttentionConfig> configs,
                                   std::size_t repetitions = 0, std::uint64_t seed = 0) {
  std::vector<SweepRow> rows;
  rows.reserve(configs.size());
  for (const auto& c : configs) {
    SweepRow row{c, flops(c), std::nullopt};
    if (repetitions > 0) row.time_median_s = benchmark(c, repetitions, seed).median_s;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline constexpr std::string_view kSweepCsvHeader =
    "variant,N,C,d,heads,objects,T_total,flops_total,time_median_s";

inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  os << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    const auto& c = r.config;
    os << variant_name(c.variant) << ',' << c.tokens << ',' << c.channels << ',' << c.dim << ','
       << c.heads << ',' << c.objects << ',' << c.text_tokens << ',' << r.cost.total() << ','
       << (r.time_median_s ? format_sig9(*r.time_median_s) : std::string{}) << '\n';
  }
}

/// Grids of 16x16 to 64x64 at 640 channels (the 32x32 / 640-channel layer
/// of a 512px SD1.5 UNet is included), 2 and 5 objects, all variants.
inline std::vector<AttentionConfig> default_sweep_configs() {
  std::vector<AttentionConfig> out;
  for (std::size_t side : {16, 32, 64}) {
    for (std::size_t objects : {2, 5}) {
      for (auto v : {Variant::regional_cross, Variant::extended_self, Variant::per_object_cross}) {
        out.push_back(canonical_config(v, TokenGrid(side, side), objects, 77, 640, 640, 8));
      }
    }
  }
  return out;
}

}  // namespace rgk
