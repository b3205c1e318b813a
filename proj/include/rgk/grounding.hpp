#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rgk/error.hpp"
#include "rgk/layout.hpp"
#include "rgk/matrix.hpp"
#include "rgk/random.hpp"
#include "rgk/text.hpp"

namespace rgk {

enum class SpecialToken { bos, sep, eos };

inline std::string_view special_token_name(SpecialToken t) {
  switch (t) {
    case SpecialToken::bos: return "[bos]";
    case SpecialToken::sep: return "[sep]";
    case SpecialToken::eos: return "[eos]";
  }
  return "";
}

/// Maps word tokens to fixed unit-norm vectors of dimension dim().
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::string_view token) const = 0;
  virtual std::vector<double> special(SpecialToken token) const = 0;
};

namespace detail {

inline void normalize(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError("cannot normalize a zero or non-finite vector");
  }
  for (double& x : v) x /= norm;
}

}  // namespace detail

/// Deterministic stand-in for a pretrained text encoder: each token string
/// seeds a Gaussian draw that is normalized to unit length.
class HashTextEmbedder final : public TextEmbedder {
 public:
  explicit HashTextEmbedder(std::size_t dim = 64, std::uint64_t seed = 0)
      : dim_(dim), seed_(seed) {
    if (dim < 8) throw std::invalid_argument("HashTextEmbedder: dim must be >= 8");
  }

  std::size_t dim() const override { return dim_; }

  std::vector<double> embed(std::string_view token) const override {
    Rng rng(mix_seed(seed_, fnv1a(token)));
    std::vector<double> v(dim_);
    for (double& x : v) x = rng.normal();
    detail::normalize(v);
    return v;
  }

  // Bracketed names never survive tokenize(), so specials cannot collide
  // with word tokens.
  std::vector<double> special(SpecialToken token) const override {
    return embed(special_token_name(token));
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Embeddings supplied from a table, e.g. exported from a real encoder.
/// Must contain "[bos]", "[sep]" and "[eos]"; rows are normalized on load.
class TableTextEmbedder final : public TextEmbedder {
 public:
  explicit TableTextEmbedder(std::map<std::string, std::vector<double>> table)
      : table_(std::move(table)) {
    if (table_.empty()) throw ValidationError("embedding table is empty");
    dim_ = table_.begin()->second.size();
    if (dim_ < 8) throw ValidationError("embedding dimension must be >= 8");
    for (auto& [key, vec] : table_) {
      if (vec.size() != dim_) {
        throw ValidationError("embedding for '" + key + "' has dimension " +
                              std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
      }
      detail::normalize(vec);
    }
    for (auto t : {SpecialToken::bos, SpecialToken::sep, SpecialToken::eos}) {
      if (!table_.contains(std::string(special_token_name(t)))) {
        throw ValidationError("embedding table lacks " + std::string(special_token_name(t)));
      }
    }
  }

  std::size_t dim() const override { return dim_; }

  std::vector<double> embed(std::string_view token) const override {
    const auto it = table_.find(std::string(token));
    if (it == table_.end()) {
      throw ValidationError("no embedding for token '" + std::string(token) + "'");
    }
    return it->second;
  }

  std::vector<double> special(SpecialToken token) const override {
    return embed(special_token_name(token));
  }

 private:
  std::map<std::string, std::vector<double>> table_;
  std::size_t dim_ = 0;
};

/// Substitute description for regions no object covers.
struct NullEmbedding {
  std::vector<double> values;

  static NullEmbedding seeded(std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    NullEmbedding n;
    n.values.resize(dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& x : n.values) x = scale * rng.normal();
    return n;
  }
};

enum class TokenKind { bos, text, sep, eos, null };

inline std::string_view token_kind_name(TokenKind k) {
  switch (k) {
    case TokenKind::bos: return "bos";
    case TokenKind::text: return "text";
    case TokenKind::sep: return "sep";
    case TokenKind::eos: return "eos";
    case TokenKind::null: return "null";
  }
  return "";
}

/// Key/value sequence for one region: each row is text channels followed
/// by box-indicator channels.
struct GroundedSequence {
  Matrix tokens;
  std::vector<TokenKind> kinds;
  std::vector<std::optional<int>> source_object;
  std::size_t text_dim = 0;
  std::size_t box_dim = 0;

  std::size_t size() const { return kinds.size(); }

  friend bool operator==(const GroundedSequence&, const GroundedSequence&) = default;
};

/// Transformer-style sinusoidal encoding of one scalar into `channels`
/// interleaved sin/cos values.
inline std::vector<double> sinusoidal_encoding(double value, std::size_t channels) {
  if (channels % 2 != 0) throw std::invalid_argument("sinusoidal_encoding: channels must be even");
  std::vector<double> pe(channels);
  for (std::size_t k = 0; 2 * k < channels; ++k) {
    const double exponent = static_cast<double>(2 * k) / static_cast<double>(channels);
    const double angle = value / std::pow(10000.0, exponent);
    pe[2 * k] = std::sin(angle);
    pe[2 * k + 1] = std::cos(angle);
  }
  return pe;
}

/// Encodes x1, y1, x2, y2 with box_dim / 4 channels each, in that order.
/// The box is not validated, so degenerate test vectors are accepted.
inline std::vector<double> sinusoidal_box_encoding(const BoundingBox& box, std::size_t box_dim) {
  if (box_dim % 8 != 0) {
    throw std::invalid_argument("sinusoidal_box_encoding: box_dim must be divisible by 8, got " +
                                std::to_string(box_dim));
  }
  const std::size_t per = box_dim / 4;
  std::vector<double> out;
  out.reserve(box_dim);
  for (double c : {box.x1, box.y1, box.x2, box.y2}) {
    const auto pe = sinusoidal_encoding(c, per);
    out.insert(out.end(), pe.begin(), pe.end());
  }
  return out;
}

/// Builds [bos] words(o1) [sep] words(o2) ... [eos] for the given
/// descriptions (in the given order), or a single null token when there
/// are none. Word tokens carry their object's box encoding; special and
/// null tokens carry -1 in every box channel. With the indicator off the
/// box channels are omitted.
inline GroundedSequence encode_region(std::span<const DescriptionTuple> descriptions,
                                      const TextEmbedder& embedder, const NullEmbedding& null,
                                      std::size_t box_dim, bool use_box_indicator = true) {
  if (null.values.size() != embedder.dim()) {
    throw std::invalid_argument("null embedding dimension does not match embedder");
  }
  if (box_dim % 8 != 0) {
    throw std::invalid_argument("encode_region: box_dim must be divisible by 8");
  }

  GroundedSequence seq;
  seq.text_dim = embedder.dim();
  seq.box_dim = use_box_indicator ? box_dim : 0;

  struct Row {
    std::vector<double> text;
    const std::vector<double>* box;  // nullptr -> all -1
    TokenKind kind;
    std::optional<int> source;
  };
  std::vector<Row> rows;

  if (descriptions.empty()) {
    rows.push_back({null.values, nullptr, TokenKind::null, std::nullopt});
  }

  std::vector<std::vector<double>> boxes;
  boxes.reserve(descriptions.size());
  for (const auto& d : descriptions) {
    boxes.push_back(seq.box_dim ? sinusoidal_box_encoding(d.box, seq.box_dim)
                                : std::vector<double>{});
  }

  if (!descriptions.empty()) {
    rows.push_back({embedder.special(SpecialToken::bos), nullptr, TokenKind::bos, std::nullopt});
    for (std::size_t i = 0; i < descriptions.size(); ++i) {
      if (i > 0) {
        rows.push_back(
            {embedder.special(SpecialToken::sep), nullptr, TokenKind::sep, std::nullopt});
      }
      for (const auto& word : tokenize(descriptions[i].text)) {
        rows.push_back({embedder.embed(word), &boxes[i], TokenKind::text, descriptions[i].id});
      }
    }
    rows.push_back({embedder.special(SpecialToken::eos), nullptr, TokenKind::eos, std::nullopt});
  }

  seq.tokens = Matrix(rows.size(), seq.text_dim + seq.box_dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto dst = seq.tokens.row(r);
    std::copy(rows[r].text.begin(), rows[r].text.end(), dst.begin());
    for (std::size_t c = 0; c < seq.box_dim; ++c) {
      dst[seq.text_dim + c] = rows[r].box ? (*rows[r].box)[c] : -1.0;
    }
    seq.kinds.push_back(rows[r].kind);
    seq.source_object.push_back(rows[r].source);
  }
  return seq;
}

}  // namespace rgk
