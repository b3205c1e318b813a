#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgk/layout.hpp"

namespace rgk {

/// Ascending ids of the objects whose boxes cover a token. Empty means
/// background.
using CoveringSet = std::vector<int>;

struct Region {
  CoveringSet objects;
  TokenMask tokens;

  bool background() const { return objects.empty(); }
};

/// Mutually exclusive regions that together cover every token of the grid.
/// Tokens sharing a covering set form one region even when spatially
/// disconnected. Regions are ordered lexicographically by covering set with
/// the background last.
struct RegionPartition {
  TokenGrid grid;
  std::vector<Region> regions;
  std::vector<std::size_t> token_to_region;
  // Objects whose boxes contain no token center on this grid.
  std::vector<int> skipped_objects;
};

namespace detail {

struct CoveringOrder {
  bool operator()(const CoveringSet& a, const CoveringSet& b) const {
    if (a.empty() != b.empty()) return b.empty();
    return a < b;
  }
};

inline const Region& region_at(const RegionPartition& partition, std::size_t index) {
  if (index >= partition.regions.size()) {
    throw std::out_of_range("region index " + std::to_string(index) + " out of range (" +
                            std::to_string(partition.regions.size()) + " regions)");
  }
  return partition.regions[index];
}

}  // namespace detail

inline RegionPartition reorganize(const Layout& layout, const TokenGrid& grid) {
  RegionPartition partition;
  partition.grid = grid;

  std::vector<CoveringSet> cover(grid.size());
  for (const auto& obj : layout.objects) {
    const auto mask = rasterize_box(obj.box, grid);
    if (mask.empty()) partition.skipped_objects.push_back(obj.id);
    for (auto t : mask) cover[t].push_back(obj.id);
  }

  std::map<CoveringSet, TokenMask, detail::CoveringOrder> groups;
  for (std::size_t t = 0; t < cover.size(); ++t) {
    std::sort(cover[t].begin(), cover[t].end());
    groups[cover[t]].push_back(t);
  }

  partition.token_to_region.assign(grid.size(), 0);
  partition.regions.reserve(groups.size());
  for (auto& [objects, tokens] : groups) {
    const std::size_t index = partition.regions.size();
    for (auto t : tokens) partition.token_to_region[t] = index;
    partition.regions.push_back({objects, std::move(tokens)});
  }
  return partition;
}

/// Visual tokens located in the region.
inline const TokenMask& select_visual(const RegionPartition& partition, std::size_t region_index) {
  return detail::region_at(partition, region_index).tokens;
}

/// Descriptions whose objects cover the region, ascending by id.
inline std::vector<DescriptionTuple> select_descriptions(const Layout& layout,
                                                         const RegionPartition& partition,
                                                         std::size_t region_index) {
  const auto& region = detail::region_at(partition, region_index);
  std::vector<DescriptionTuple> out;
  out.reserve(region.objects.size());
  for (int id : region.objects) {
    const auto it = std::find_if(layout.objects.begin(), layout.objects.end(),
                                 [id](const DescriptionTuple& d) { return d.id == id; });
    if (it == layout.objects.end()) {
      throw std::invalid_argument("partition refers to object " + std::to_string(id) +
                                  " missing from layout");
    }
    out.push_back(*it);
  }
  return out;
}

}  // namespace rgk
