#pragma once

// Umbrella header.

#include "rgk/attention.hpp"
#include "rgk/cost.hpp"
#include "rgk/error.hpp"
#include "rgk/format.hpp"
#include "rgk/grounding.hpp"
#include "rgk/io.hpp"
#include "rgk/layout.hpp"
#include "rgk/matrix.hpp"
#include "rgk/metrics.hpp"
#include "rgk/pnm.hpp"
#include "rgk/random.hpp"
#include "rgk/region.hpp"
#include "rgk/synth.hpp"
#include "rgk/text.hpp"
#include "rgk/text_stats.hpp"

namespace rgk {
inline constexpr const char* kVersion = "0.1.0";
}
