#include "marc/relgraph.hpp"

#include <cmath>
#include <stdexcept>

namespace marc {

bool eval_relation(const RelationType& rel, double xa, double ya, double xb, double yb) {
  if (!std::isfinite(xa) || !std::isfinite(ya) || !std::isfinite(xb) || !std::isfinite(yb))
    throw std::domain_error("eval_relation: non-finite position");
  return rel.predicate(xa, ya, xb, yb);
}

namespace {

RelationType make(std::string name, std::function<bool(double, double, double, double)> f) {
  return RelationType{std::move(name), std::move(f)};
}

std::vector<RelationType> remote_relations() {
  return {
      make("left", [](double xa, double, double xb, double) { return xa < xb; }),
      make("right", [](double xa, double, double xb, double) { return xa > xb; }),
      make("top", [](double, double ya, double, double yb) { return ya > yb; }),
      make("bottom", [](double, double ya, double, double yb) { return ya < yb; }),
  };
}

RelationType adjacent_grid(const RelationOptions& o) {
  if (o.adjacency_verbatim_or)
    return make("adjacent", [](double xa, double ya, double xb, double yb) {
      return std::abs(xa - xb) <= 1.0 || std::abs(ya - yb) <= 1.0;
    });
  return make("adjacent", [](double xa, double ya, double xb, double yb) {
    return std::abs(xa - xb) <= 1.0 && std::abs(ya - yb) <= 1.0;
  });
}

RelationType aligned(const RelationOptions& o) {
  if (o.aligned_row_or_col)
    return make("aligned", [](double xa, double ya, double xb, double yb) { return xa == xb || ya == yb; });
  return make("aligned", [](double xa, double ya, double xb, double yb) { return xa == xb && ya == yb; });
}

std::vector<RelationType> local_relations() {
  auto at = [](double dx, double dy) {
    return [dx, dy](double xa, double ya, double xb, double yb) { return xa == xb + dx && ya == yb + dy; };
  };
  return {
      make("leftAdj", at(-1, 0)),
      make("rightAdj", at(1, 0)),
      make("topAdj", at(0, 1)),
      make("topLeftAdj", at(-1, 1)),
      make("topRightAdj", at(1, 1)),
      make("bottomAdj", at(0, -1)),
      make("bottomLeftAdj", at(-1, -1)),
      make("bottomRightAdj", at(1, -1)),
  };
}

RelationType adjacent_continuous(double rho) {
  return make("adjacent", [rho](double xa, double ya, double xb, double yb) {
    return std::hypot(xa - xb, ya - yb) <= rho;
  });
}

// Angle of (b - a) binned into 8 half-open 45-degree sectors centered on the
// compass/diagonal directions; boundary angles fall in the counterclockwise
// sector. Co-located pairs carry no octagonal relation.
std::vector<RelationType> octagonal_relations() {
  static const char* names[8] = {"east", "northEast", "north", "northWest",
                                 "west", "southWest", "south", "southEast"};
  std::vector<RelationType> out;
  for (int k = 0; k < 8; ++k) {
    out.push_back(make(names[k], [k](double xa, double ya, double xb, double yb) {
      const double dx = xb - xa, dy = yb - ya;
      if (dx == 0.0 && dy == 0.0) return false;
      double deg = std::atan2(dy, dx) * 180.0 / M_PI;
      if (deg < 0.0) deg += 360.0;
      const int sector = static_cast<int>(std::floor((deg + 22.5) / 45.0)) % 8;
      return sector == k;
    }));
  }
  return out;
}

}  // namespace

std::vector<std::string> relation_preset_names() {
  return {"default", "local", "all", "continuous-default", "continuous-octagonal"};
}

RelationSet relation_preset(const std::string& name, const RelationOptions& opts) {
  RelationSet set;
  if (name == "default" || name == "all") {
    set.relations.push_back(adjacent_grid(opts));
    set.relations.push_back(aligned(opts));
    for (auto& r : remote_relations()) set.relations.push_back(std::move(r));
    if (name == "all")
      for (auto& r : local_relations()) set.relations.push_back(std::move(r));
  } else if (name == "local") {
    set.relations = local_relations();
  } else if (name == "continuous-default") {
    set.relations.push_back(adjacent_continuous(opts.continuous_adjacency_rho));
    for (auto& r : remote_relations()) set.relations.push_back(std::move(r));
  } else if (name == "continuous-octagonal") {
    set.relations = octagonal_relations();
    set.relations.push_back(adjacent_continuous(opts.continuous_adjacency_rho));
  } else {
    std::string valid;
    for (const auto& n : relation_preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("relation_preset: unknown preset '" + name + "' (valid: " + valid + ")");
  }
  return set;
}

RelationalGraph build_graph(const std::vector<Entity>& entities, const RelationSet& rels) {
  if (entities.empty()) throw std::invalid_argument("build_graph: needs at least one entity");
  const int n = static_cast<int>(entities.size());
  const int d = static_cast<int>(entities[0].features.size());
  RelationalGraph g;
  g.entities = entities;
  g.feature_matrix = Matrix(d, n);
  for (int j = 0; j < n; ++j) {
    if (static_cast<int>(entities[j].features.size()) != d)
      throw std::invalid_argument("build_graph: inconsistent feature widths");
    for (int i = 0; i < d; ++i) g.feature_matrix(i, j) = entities[j].features[i];
  }
  g.edges.resize(rels.relations.size());
  for (size_t r = 0; r < rels.relations.size(); ++r) {
    const RelationType& rel = rels.relations[r];
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v) {
        if (u == v) continue;
        if (eval_relation(rel, entities[u].x, entities[u].y, entities[v].x, entities[v].y))
          g.edges[r].emplace_back(u, v);
      }
  }
  return g;
}

std::vector<Entity> grid_as_entities(const std::vector<Entity>& occupied, int width, int height,
                                     int feature_width, int empty_feature_index) {
  if (width < 1 || height < 1) throw std::invalid_argument("grid_as_entities: empty grid");
  std::vector<std::vector<bool>> used(width, std::vector<bool>(height, false));
  std::vector<Entity> out;
  for (const Entity& e : occupied) {
    const double ix = std::floor(e.x), iy = std::floor(e.y);
    if (ix != e.x || iy != e.y || e.x < 0 || e.y < 0 || e.x >= width || e.y >= height)
      throw std::invalid_argument("grid_as_entities: non-grid entity position");
    used[static_cast<int>(e.x)][static_cast<int>(e.y)] = true;
    out.push_back(e);
  }
  for (int x = 0; x < width; ++x)
    for (int y = 0; y < height; ++y) {
      if (used[x][y]) continue;
      Entity e;
      e.x = x;
      e.y = y;
      e.features.assign(feature_width, 0.0);
      e.features[empty_feature_index] = 1.0;
      out.push_back(e);
    }
  for (size_t i = 0; i < out.size(); ++i) out[i].entity_id = static_cast<int>(i);
  return out;
}

}  // namespace marc
