#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgk/error.hpp"
#include "rgk/layout.hpp"
#include "rgk/random.hpp"

namespace rgk {

/// Object descriptions spanning every complexity (easy/medium/hard) and
/// length (phrase/short/long) bucket.
inline const std::vector<std::string>& default_vocabulary() {
  static const std::vector<std::string> vocab = {
      // easy phrases
      "a red apple",
      "a small brown dog",
      "the old green door",
      "a cup of hot tea",
      "two cats on a mat",
      // medium phrases
      "A wooden chair. It has a colorful seat.",
      "The dog sleeps. It is an animal friend.",
      "A red bag. It holds an umbrella.",
      // hard phrases
      "an elegant victorian armchair",
      "a beautiful antique porcelain vase",
      "an industrial metallic cabinet",
      // easy short sentences
      "A dog sits. It is brown. The sun is out. It is warm.",
      "The cat naps. The rug is red. A cup is on the desk.",
      "A man walks. He has a hat. The hat is blue.",
      // medium short sentences
      "a small brown dog sits on the red mat near the door",
      "a tall man in a black coat holds a cup of tea",
      "the white boat floats on the calm lake under a gray sky",
      // hard short sentences
      "an elegant woman wearing a beautiful dress stands beside the wooden table",
      "a colorful parrot is sitting on a decorative branch near the window",
      "a delicate porcelain teapot with an intricate floral pattern",
      // easy long sentences
      "A dog runs. It is fast. The grass is green. The sky is blue. A boy waves.",
      "The red car is parked. A man is near it. He holds a bag. The road is wet.",
      "A bird sings. The tree is tall. Its leaves are green. The day is warm and bright.",
      // medium long sentences
      "a small white dog with a red collar sits on the soft green grass near the old fence",
      "a young girl in a blue dress holds a kite as the wind blows over the hill",
      "the old man in a brown hat reads a book on a bench in the park at noon",
      // hard long sentences
      "a beautiful woman in a long red dress walks along the quiet beach while holding an "
      "umbrella",
      "an old wooden cabinet with decorative carvings stands against the wall beside a large "
      "window in the living room",
      "a curious orange kitten is investigating a colorful collection of yarn balls scattered "
      "across the polished floor",
  };
  return vocab;
}

struct GeneratorOptions {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::size_t min_objects = 1;
  std::size_t max_objects = 6;
  // Probability that a new box is centered inside an earlier one.
  double overlap_bias = 0.3;
  int image_width = 512;
  int image_height = 512;

  void validate() const {
    if (min_objects > max_objects) throw ValidationError("min_objects exceeds max_objects");
    if (!(overlap_bias >= 0.0 && overlap_bias <= 1.0)) {
      throw ValidationError("overlap_bias must be in [0, 1]");
    }
    if (image_width < 2 || image_height < 2) throw ValidationError("image too small");
  }
};

namespace detail {

// Integer pixel interval of length ~`extent` (fraction) around `center`.
inline std::pair<int, int> pixel_interval(double center, double extent, int size) {
  const int len = std::max(1, static_cast<int>(std::lround(extent * size)));
  int lo = static_cast<int>(std::lround(center * size - len / 2.0));
  lo = std::clamp(lo, 0, size - len);
  return {lo, lo + len};
}

}  // namespace detail

/// Seeded synthetic layouts with pixel-aligned boxes and labels drawn
/// uniformly from `vocabulary`.
inline std::vector<Layout> generate_layouts(const GeneratorOptions& options,
                                            std::span<const std::string> vocabulary) {
  options.validate();
  if (options.count > 0 && vocabulary.empty()) throw ValidationError("vocabulary is empty");
  Rng rng(options.seed);
  std::vector<Layout> out;
  out.reserve(options.count);
  for (std::size_t n = 0; n < options.count; ++n) {
    Layout layout;
    layout.image_width = options.image_width;
    layout.image_height = options.image_height;
    const auto objects = static_cast<std::size_t>(rng.uniform_int(
        static_cast<std::int64_t>(options.min_objects), static_cast<std::int64_t>(options.max_objects)));
    for (std::size_t i = 0; i < objects; ++i) {
      double cx = rng.uniform();
      double cy = rng.uniform();
      if (i > 0 && rng.uniform() < options.overlap_bias) {
        const auto& anchor =
            layout.objects[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))].box;
        cx = rng.uniform(anchor.x1, anchor.x2);
        cy = rng.uniform(anchor.y1, anchor.y2);
      }
      const auto [x1, x2] = detail::pixel_interval(cx, rng.uniform(0.1, 0.6), layout.image_width);
      const auto [y1, y2] = detail::pixel_interval(cy, rng.uniform(0.1, 0.6), layout.image_height);
      const auto& label =
          vocabulary[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(vocabulary.size()) - 1))];
      const double w = layout.image_width;
      const double h = layout.image_height;
      layout.objects.push_back({{x1 / w, y1 / h, x2 / w, y2 / h}, label, static_cast<int>(i)});
    }
    layout.caption = "a synthetic scene with " + std::to_string(objects) +
                     (objects == 1 ? " object" : " objects");
    out.push_back(std::move(layout));
  }
  return out;
}

}  // namespace rgk
