#include "marc/schema.hpp"

#include <stdexcept>

namespace marc {

std::vector<Entity> extract_entities(const std::vector<double>& obs, const ObsSchema& schema) {
  const int n = schema.entity_count();
  const int stride = 2 + schema.feature_width;
  if (static_cast<int>(obs.size()) != n * stride)
    throw std::invalid_argument("extract_entities: observation length " + std::to_string(obs.size()) +
                                " does not match schema (" + std::to_string(n * stride) + ")");
  std::vector<Entity> out(n);
  for (int i = 0; i < n; ++i) {
    out[i].entity_id = i;
    out[i].x = obs[static_cast<size_t>(i) * stride];
    out[i].y = obs[static_cast<size_t>(i) * stride + 1];
    out[i].features.assign(obs.begin() + static_cast<size_t>(i) * stride + 2,
                           obs.begin() + static_cast<size_t>(i + 1) * stride);
  }
  return out;
}

std::vector<Entity> grid_entities_from_obs(const std::vector<double>& obs, const ObsSchema& schema) {
  if (!schema.grid) throw std::invalid_argument("grid_entities_from_obs: not a grid environment");
  if (schema.empty_feature_index < 0)
    throw std::invalid_argument("grid_entities_from_obs: schema has no empty-type slot");
  return grid_as_entities(extract_entities(obs, schema), schema.grid_width, schema.grid_height,
                          schema.feature_width, schema.empty_feature_index);
}

}  // namespace marc
