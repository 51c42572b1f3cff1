#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "marc/matrix.hpp"

namespace marc {

// An agent or environment object. Position lives outside the feature vector;
// only the features enter the graph's node matrix.
struct Entity {
  double x = 0.0;
  double y = 0.0;
  std::vector<double> features;
  int entity_id = 0;
};

// Pure binary spatial predicate over two positions.
struct RelationType {
  std::string name;
  std::function<bool(double xa, double ya, double xb, double yb)> predicate;
};

struct RelationSet {
  std::vector<RelationType> relations;
  int size() const { return static_cast<int>(relations.size()); }
};

struct RelationalGraph {
  std::vector<Entity> entities;
  Matrix feature_matrix;  // d x |V|, column j = entities[j].features
  // Per relation, directed (source, target) index pairs; no self-edges.
  std::vector<std::vector<std::pair<int, int>>> edges;
};

struct RelationOptions {
  // A disjunctive adjacency (|dx| <= 1 OR |dy| <= 1) links arbitrarily
  // distant same-band entities; the default is the conjunctive Chebyshev
  // neighborhood. Set verbatim_or for the disjunctive form.
  bool adjacency_verbatim_or = false;
  // "aligned" defaults to exact co-location; row_or_col switches to
  // same-row-or-same-column.
  bool aligned_row_or_col = false;
  // Euclidean adjacency threshold for the continuous presets.
  double continuous_adjacency_rho = 0.15;
};

bool eval_relation(const RelationType& rel, double xa, double ya, double xb, double yb);

// Presets: default (6), local (8), all (14), continuous-default (5),
// continuous-octagonal (9).
RelationSet relation_preset(const std::string& name, const RelationOptions& opts = {});
std::vector<std::string> relation_preset_names();

RelationalGraph build_graph(const std::vector<Entity>& entities, const RelationSet& rels);

// Full-grid ablation: one entity per cell, empty cells typed via
// empty_feature_index. Occupied cells keep their original entities.
std::vector<Entity> grid_as_entities(const std::vector<Entity>& occupied, int width, int height,
                                     int feature_width, int empty_feature_index);

}  // namespace marc
