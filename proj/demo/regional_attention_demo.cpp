// Partitions a layout (the bundled two-object example unless a path is
// given), runs one regional attention pass and prints what each region
// attended to.

#include <cstdio>

#include "rgk/rgk.hpp"

int main(int argc, char** argv) {
  const rgk::Layout layout = rgk::load_layout(argc > 1 ? argv[1] : RGK_DEMO_LAYOUT).layout;

  const rgk::TokenGrid grid(16, 16);
  const auto partition = rgk::reorganize(layout, grid);
  for (std::size_t r = 0; r < partition.regions.size(); ++r) {
    const auto& region = partition.regions[r];
    std::printf("region %zu: %-10s %3zu tokens, objects:", r,
                std::string(rgk::region_kind(region)).c_str(), region.tokens.size());
    for (int id : region.objects) std::printf(" %d", id);
    std::printf("\n");
  }

  auto state = rgk::AttentionState::fresh({}, 7);
  state.randomize_output(8);
  const auto features = rgk::FeatureMap::random(grid, state.shape.channels, 9);
  const auto out = rgk::regional_forward(features, layout, state);
  for (const auto& d : out.regions) {
    std::printf("attended %3zu tokens to a %2zu-token grounded sequence\n", d.tokens,
                d.sequence_length);
  }
  return 0;
}
