#pragma once

#include <string>
#include <vector>

#include "marc/relgraph.hpp"

namespace marc {

struct EntityRole {
  std::string name;
  int count = 0;
};

// Layout of the flat observation vector: per entity, x, y followed by
// feature_width non-spatial features. Entity order follows roles.
struct ObsSchema {
  std::vector<EntityRole> roles;
  int feature_width = 0;
  bool grid = true;
  int grid_width = 0;
  int grid_height = 0;
  double world_half_width = 1.0;
  int empty_feature_index = -1;  // slot used by the full-grid ablation

  int entity_count() const {
    int n = 0;
    for (const auto& r : roles) n += r.count;
    return n;
  }
  int obs_length() const { return entity_count() * (2 + feature_width); }
  // Position scale for coordinate-augmented encoders.
  double coord_scale() const {
    if (grid) return static_cast<double>(grid_width > grid_height ? grid_width : grid_height);
    return world_half_width;
  }
};

std::vector<Entity> extract_entities(const std::vector<double>& obs, const ObsSchema& schema);

// Full-grid ablation over an extracted observation.
std::vector<Entity> grid_entities_from_obs(const std::vector<double>& obs, const ObsSchema& schema);

}  // namespace marc
