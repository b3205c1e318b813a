#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rgk/error.hpp"
#include "rgk/grounding.hpp"
#include "rgk/layout.hpp"
#include "rgk/matrix.hpp"
#include "rgk/random.hpp"
#include "rgk/region.hpp"

namespace rgk {

/// Visual tokens of one feature map: grid.size() rows by C channels.
struct FeatureMap {
  TokenGrid grid;
  Matrix values;

  static FeatureMap random(const TokenGrid& grid, std::size_t channels, std::uint64_t seed) {
    Rng rng(seed);
    return {grid, Matrix::random_normal(grid.size(), channels, rng, 1.0)};
  }
};

enum class AttentionMode { full, no_reorg_avg, no_box_indicator };

inline std::string_view mode_name(AttentionMode m) {
  switch (m) {
    case AttentionMode::full: return "full";
    case AttentionMode::no_reorg_avg: return "no_reorg_avg";
    case AttentionMode::no_box_indicator: return "no_box_indicator";
  }
  return "";
}

inline AttentionMode parse_mode(std::string_view name) {
  if (name == "full") return AttentionMode::full;
  if (name == "no_reorg_avg") return AttentionMode::no_reorg_avg;
  if (name == "no_box_indicator") return AttentionMode::no_box_indicator;
  throw ValidationError("unknown attention mode '" + std::string(name) + "'");
}

struct AttentionShape {
  std::size_t channels = 64;   // C, visual feature width
  std::size_t dim = 64;        // d, attention width
  std::size_t heads = 4;       // h, must divide d
  std::size_t text_dim = 64;   // D_t
  std::size_t box_dim = 32;    // D_b, multiple of 8

  std::size_t kv_channels() const { return text_dim + box_dim; }
};

/// Weights of one regional cross-attention layer.
/// w_q: C x d, w_k / w_v: (D_t + D_b) x d, w_out: d x C.
struct AttentionState {
  AttentionShape shape;
  Matrix w_q;
  Matrix w_k;
  Matrix w_v;
  Matrix w_out;
  NullEmbedding null_embedding;
  std::shared_ptr<const TextEmbedder> embedder;

  /// Output projection starts at zero so the layer contributes nothing
  /// until trained. Other weights are N(0, 1/fan_in).
  static AttentionState fresh(const AttentionShape& shape, std::uint64_t seed,
                              std::shared_ptr<const TextEmbedder> embedder = nullptr) {
    if (shape.channels == 0 || shape.dim == 0 || shape.heads == 0) {
      throw std::invalid_argument("attention shape must be positive");
    }
    if (shape.dim % shape.heads != 0) {
      throw std::invalid_argument("heads must divide the attention dimension");
    }
    if (shape.box_dim % 8 != 0) throw std::invalid_argument("box_dim must be divisible by 8");
    if (!embedder) embedder = std::make_shared<HashTextEmbedder>(shape.text_dim, seed);
    if (embedder->dim() != shape.text_dim) {
      throw std::invalid_argument("embedder dimension does not match text_dim");
    }

    Rng rng(seed);
    AttentionState s;
    s.shape = shape;
    const double q_scale = 1.0 / std::sqrt(static_cast<double>(shape.channels));
    const double kv_scale = 1.0 / std::sqrt(static_cast<double>(shape.kv_channels()));
    s.w_q = Matrix::random_normal(shape.channels, shape.dim, rng, q_scale);
    s.w_k = Matrix::random_normal(shape.kv_channels(), shape.dim, rng, kv_scale);
    s.w_v = Matrix::random_normal(shape.kv_channels(), shape.dim, rng, kv_scale);
    s.w_out = Matrix(shape.dim, shape.channels, 0.0);
    s.null_embedding = NullEmbedding::seeded(shape.text_dim, mix_seed(seed, 0x6e756c6cULL));
    s.embedder = std::move(embedder);
    return s;
  }

  /// Replaces the zero output projection with N(0, 1/d) weights, standing in
  /// for a trained layer.
  void randomize_output(std::uint64_t seed) {
    Rng rng(seed);
    w_out = Matrix::random_normal(shape.dim, shape.channels, rng,
                                  1.0 / std::sqrt(static_cast<double>(shape.dim)));
  }
};

struct RegionDiagnostic {
  CoveringSet objects;
  std::size_t tokens = 0;
  std::size_t sequence_length = 0;
};

/// Residual contribution of the layer; callers add it to their features.
struct AttentionOutput {
  Matrix values;
  std::vector<RegionDiagnostic> regions;
  // Number of times each token row was written; 1 everywhere on success.
  std::vector<std::uint32_t> writes;
};

struct ForwardOptions {
  // Processing order of regions; empty means natural order. Must be a
  // permutation of the region indices when given.
  std::vector<std::size_t> region_order;
};

/// Multi-head scaled dot-product attention of queries q (n x d) over keys k
/// and values v (m x d). Softmax is stabilized by subtracting the row max.
inline Matrix attention_kernel(const Matrix& q, const Matrix& k, const Matrix& v,
                               std::size_t heads) {
  const std::size_t d = q.cols();
  if (heads == 0 || d % heads != 0) {
    throw std::invalid_argument("attention_kernel: heads must divide d");
  }
  if (k.rows() == 0) throw std::invalid_argument("attention_kernel: no keys");
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw std::invalid_argument("attention_kernel: shape mismatch");
  }
  const std::size_t m = k.rows();
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix out(q.rows(), d);
  std::vector<double> weights(m);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const auto qi = q.row(i);
    auto oi = out.row(i);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      double max_logit = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        const auto kj = k.row(j);
        double dot = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dot += qi[off + c] * kj[off + c];
        weights[j] = dot * scale;
        max_logit = std::max(max_logit, weights[j]);
      }
      double total = 0.0;
      for (double& w : weights) {
        w = std::exp(w - max_logit);
        total += w;
      }
      for (std::size_t j = 0; j < m; ++j) {
        const double w = weights[j] / total;
        const auto vj = v.row(j);
        for (std::size_t c = 0; c < dh; ++c) oi[off + c] += w * vj[off + c];
      }
    }
  }
  return out;
}

namespace detail {

inline void check_forward_inputs(const FeatureMap& features, const Layout& layout,
                                 const AttentionState& state) {
  if (features.values.rows() != features.grid.size()) {
    throw std::invalid_argument("feature rows " + std::to_string(features.values.rows()) +
                                " do not match grid size " +
                                std::to_string(features.grid.size()));
  }
  if (features.values.cols() != state.shape.channels) {
    throw std::invalid_argument("feature channels " + std::to_string(features.values.cols()) +
                                " do not match state channels " +
                                std::to_string(state.shape.channels));
  }
  if (state.w_q.rows() != state.shape.channels || state.w_q.cols() != state.shape.dim ||
      state.w_k.rows() != state.shape.kv_channels() || state.w_k.cols() != state.shape.dim ||
      state.w_v.rows() != state.shape.kv_channels() || state.w_v.cols() != state.shape.dim ||
      state.w_out.rows() != state.shape.dim || state.w_out.cols() != state.shape.channels ||
      !state.embedder) {
    throw std::invalid_argument("attention state is inconsistent with its shape");
  }
  if (!all_finite(features.values)) throw ValidationError("features contain NaN or Inf");
  if (const auto v = validate_layout(layout); !v.empty()) {
    throw ValidationError("invalid layout: " + describe(v.front()));
  }
}

// Attends `query_rows` of the projected queries to one grounded sequence and
// returns the rows projected back to C channels.
inline Matrix attend_sequence(const Matrix& queries, const GroundedSequence& seq,
                              const AttentionState& state) {
  const Matrix keys = matmul_leading(seq.tokens, state.w_k);
  const Matrix vals = matmul_leading(seq.tokens, state.w_v);
  return matmul(attention_kernel(queries, keys, vals, state.shape.heads), state.w_out);
}

inline std::vector<std::size_t> checked_order(const ForwardOptions& options, std::size_t count) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.region_order.empty()) return order;
  auto given = options.region_order;
  std::sort(given.begin(), given.end());
  if (given != order) throw std::invalid_argument("region_order is not a permutation");
  return options.region_order;
}

}  // namespace detail

/// The regional cross-attention layer.
///
/// full: the grid is partitioned by covering set; each region's tokens
/// attend to the grounded sequence of exactly the objects covering it
/// (the null token for background), and results are scattered back.
///
/// no_reorg_avg: each object attends over its own box alone; tokens under
/// several boxes take the mean of those outputs and uncovered tokens attend
/// the null token.
///
/// no_box_indicator: as full, with the box channels left out of the
/// grounded sequences (only the text rows of w_k / w_v are used).
inline AttentionOutput regional_forward(const FeatureMap& features, const Layout& layout,
                                        const AttentionState& state,
                                        AttentionMode mode = AttentionMode::full,
                                        const ForwardOptions& options = {}) {
  detail::check_forward_inputs(features, layout, state);
  const std::size_t n = features.grid.size();
  const Matrix queries = matmul(features.values, state.w_q);

  AttentionOutput out;
  out.values = Matrix(n, state.shape.channels);
  out.writes.assign(n, 0);

  if (mode == AttentionMode::no_reorg_avg) {
    Matrix sum(n, state.shape.channels);
    std::vector<std::uint32_t> count(n, 0);
    for (const auto& obj : layout.objects) {
      const auto mask = rasterize_box(obj.box, features.grid);
      if (mask.empty()) continue;
      const auto seq = encode_region(std::span(&obj, 1), *state.embedder, state.null_embedding,
                                     state.shape.box_dim, true);
      const Matrix rows = detail::attend_sequence(gather_rows(queries, mask), seq, state);
      for (std::size_t i = 0; i < mask.size(); ++i) {
        auto dst = sum.row(mask[i]);
        const auto src = rows.row(i);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        ++count[mask[i]];
      }
      out.regions.push_back({{obj.id}, mask.size(), seq.size()});
    }

    TokenMask uncovered;
    for (std::size_t t = 0; t < n; ++t) {
      if (count[t] == 0) uncovered.push_back(t);
    }
    if (!uncovered.empty()) {
      const auto seq = encode_region({}, *state.embedder, state.null_embedding,
                                     state.shape.box_dim, true);
      const Matrix rows = detail::attend_sequence(gather_rows(queries, uncovered), seq, state);
      for (std::size_t i = 0; i < uncovered.size(); ++i) {
        const auto src = rows.row(i);
        std::copy(src.begin(), src.end(), sum.row(uncovered[i]).begin());
        count[uncovered[i]] = 1;
      }
      out.regions.push_back({{}, uncovered.size(), seq.size()});
    }

    for (std::size_t t = 0; t < n; ++t) {
      const auto src = sum.row(t);
      auto dst = out.values.row(t);
      const double k = static_cast<double>(count[t]);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = src[c] / k;
      ++out.writes[t];
    }
    return out;
  }

  const bool box_indicator = mode != AttentionMode::no_box_indicator;
  const RegionPartition partition = reorganize(layout, features.grid);
  out.regions.resize(partition.regions.size());
  for (std::size_t r : detail::checked_order(options, partition.regions.size())) {
    const auto& tokens = select_visual(partition, r);
    const auto descriptions = select_descriptions(layout, partition, r);
    const auto seq = encode_region(descriptions, *state.embedder, state.null_embedding,
                                   state.shape.box_dim, box_indicator);
    const Matrix rows = detail::attend_sequence(gather_rows(queries, tokens), seq, state);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto src = rows.row(i);
      std::copy(src.begin(), src.end(), out.values.row(tokens[i]).begin());
      ++out.writes[tokens[i]];
    }
    out.regions[r] = {partition.regions[r].objects, tokens.size(), seq.size()};
  }
  return out;
}

/// Reference implementation of the full mode: every token is handled on its
/// own with scalar loops, without partitioning or batching.
inline AttentionOutput naive_forward(const FeatureMap& features, const Layout& layout,
                                     const AttentionState& state) {
  detail::check_forward_inputs(features, layout, state);
  const auto& grid = features.grid;
  const auto& sh = state.shape;
  const std::size_t dh = sh.dim / sh.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionOutput out;
  out.values = Matrix(grid.size(), sh.channels);
  out.writes.assign(grid.size(), 0);

  std::vector<double> q(sh.dim);
  std::vector<double> attended(sh.dim);
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const double cx = grid.center_x(grid.col_of(t));
    const double cy = grid.center_y(grid.row_of(t));
    std::vector<DescriptionTuple> covering;
    for (const auto& obj : layout.objects) {
      if (center_in_box(cx, cy, obj.box)) covering.push_back(obj);
    }
    std::sort(covering.begin(), covering.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    const auto seq = encode_region(covering, *state.embedder, state.null_embedding, sh.box_dim);
    const std::size_t m = seq.size();

    for (std::size_t j = 0; j < sh.dim; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < sh.channels; ++c) acc += features.values(t, c) * state.w_q(c, j);
      q[j] = acc;
    }
    std::vector<double> keys(m * sh.dim, 0.0);
    std::vector<double> vals(m * sh.dim, 0.0);
    for (std::size_t s = 0; s < m; ++s) {
      for (std::size_t j = 0; j < sh.dim; ++j) {
        double kacc = 0.0;
        double vacc = 0.0;
        for (std::size_t i = 0; i < seq.tokens.cols(); ++i) {
          kacc += seq.tokens(s, i) * state.w_k(i, j);
          vacc += seq.tokens(s, i) * state.w_v(i, j);
        }
        keys[s * sh.dim + j] = kacc;
        vals[s * sh.dim + j] = vacc;
      }
    }

    std::vector<double> logits(m);
    for (std::size_t h = 0; h < sh.heads; ++h) {
      double max_logit = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < m; ++s) {
        double dot = 0.0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) dot += q[c] * keys[s * sh.dim + c];
        logits[s] = dot * scale;
        max_logit = std::max(max_logit, logits[s]);
      }
      double z = 0.0;
      for (std::size_t s = 0; s < m; ++s) z += std::exp(logits[s] - max_logit);
      for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
        double acc = 0.0;
        for (std::size_t s = 0; s < m; ++s) {
          acc += std::exp(logits[s] - max_logit) / z * vals[s * sh.dim + c];
        }
        attended[c] = acc;
      }
    }

    for (std::size_t c = 0; c < sh.channels; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < sh.dim; ++j) acc += attended[j] * state.w_out(j, c);
      out.values(t, c) = acc;
    }
    ++out.writes[t];
  }
  return out;
}

}  // namespace rgk
