#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "marc/relgraph.hpp"
#include "marc/rng.hpp"

using namespace marc;

namespace {

const RelationType& find_relation(const RelationSet& set, const std::string& name) {
  for (const auto& r : set.relations)
    if (r.name == name) return r;
  throw std::runtime_error("no relation named " + name);
}

Entity at(double x, double y, std::vector<double> f = {1.0}) {
  Entity e;
  e.x = x;
  e.y = y;
  e.features = std::move(f);
  return e;
}

using EdgeSet = std::set<std::pair<int, int>>;

std::vector<EdgeSet> edge_sets(const RelationalGraph& g) {
  std::vector<EdgeSet> out;
  for (const auto& es : g.edges) out.emplace_back(es.begin(), es.end());
  return out;
}

}  // namespace

TEST_CASE("golden predicate table") {
  RelationOptions dflt;
  RelationSet grid = relation_preset("all", dflt);
  RelationOptions orv = dflt;
  orv.adjacency_verbatim_or = true;
  orv.aligned_row_or_col = true;
  RelationSet grid_or = relation_preset("default", orv);
  RelationSet cont = relation_preset("continuous-octagonal", dflt);

  struct Row {
    const RelationSet* set;
    const char* rel;
    double xa, ya, xb, yb;
    bool want;
  };
  // Pairs are evaluated as predicate(source a, target b).
  const Row rows[] = {
      // adjacent: Chebyshev distance <= 1 (conjunctive form)
      {&grid, "adjacent", 2, 2, 3, 2, true},
      {&grid, "adjacent", 2, 2, 3, 3, true},
      {&grid, "adjacent", 2, 2, 2, 2, true},
      {&grid, "adjacent", 2, 2, 4, 2, false},
      {&grid, "adjacent", 2, 2, 3, 4, false},
      {&grid, "adjacent", 0, 0, 1, -1, true},
      // verbatim disjunctive form links same-band entities at any distance
      {&grid_or, "adjacent", 2, 2, 9, 2, true},
      {&grid_or, "adjacent", 2, 2, 9, 3, true},
      {&grid_or, "adjacent", 2, 2, 9, 4, false},
      {&grid_or, "adjacent", 2, 2, 4, 9, false},
      // aligned: exact co-location by default
      {&grid, "aligned", 3, 4, 3, 4, true},
      {&grid, "aligned", 3, 4, 3, 5, false},
      {&grid, "aligned", 3, 4, 4, 4, false},
      // aligned: row-or-column variant
      {&grid_or, "aligned", 3, 4, 3, 9, true},
      {&grid_or, "aligned", 3, 4, 9, 4, true},
      {&grid_or, "aligned", 3, 4, 5, 6, false},
      // remote directions: a left of b means a.x < b.x
      {&grid, "left", 1, 5, 4, 0, true},
      {&grid, "left", 4, 5, 1, 0, false},
      {&grid, "left", 4, 5, 4, 0, false},
      {&grid, "right", 4, 5, 1, 0, true},
      {&grid, "right", 1, 5, 4, 0, false},
      {&grid, "top", 0, 5, 9, 2, true},
      {&grid, "top", 0, 2, 9, 5, false},
      {&grid, "top", 0, 2, 9, 2, false},
      {&grid, "bottom", 0, 2, 9, 5, true},
      {&grid, "bottom", 0, 5, 9, 2, false},
      // one-step displaced relations: a is <dir> of b by exactly one cell
      {&grid, "leftAdj", 2, 3, 3, 3, true},
      {&grid, "leftAdj", 3, 3, 2, 3, false},
      {&grid, "leftAdj", 1, 3, 3, 3, false},
      {&grid, "rightAdj", 3, 3, 2, 3, true},
      {&grid, "rightAdj", 2, 3, 3, 3, false},
      {&grid, "topAdj", 3, 4, 3, 3, true},
      {&grid, "topAdj", 3, 3, 3, 4, false},
      {&grid, "bottomAdj", 3, 3, 3, 4, true},
      {&grid, "bottomAdj", 3, 4, 3, 3, false},
      {&grid, "topLeftAdj", 2, 4, 3, 3, true},
      {&grid, "topLeftAdj", 4, 4, 3, 3, false},
      {&grid, "topRightAdj", 4, 4, 3, 3, true},
      {&grid, "topRightAdj", 2, 4, 3, 3, false},
      {&grid, "bottomLeftAdj", 2, 2, 3, 3, true},
      {&grid, "bottomLeftAdj", 4, 2, 3, 3, false},
      {&grid, "bottomRightAdj", 4, 2, 3, 3, true},
      {&grid, "bottomRightAdj", 2, 2, 3, 3, false},
      // continuous adjacency: Euclidean distance <= rho (0.15 default)
      {&cont, "adjacent", 0.0, 0.0, 0.1, 0.1, true},
      {&cont, "adjacent", 0.0, 0.0, 0.15, 0.0, true},
      {&cont, "adjacent", 0.0, 0.0, 0.2, 0.0, false},
      {&cont, "adjacent", 0.5, 0.5, 0.5, 0.5, true},
      // octagonal sectors of the direction from a to b, 45 degrees each;
      // boundary angles fall in the counterclockwise sector
      {&cont, "east", 0, 0, 1, 0, true},
      {&cont, "east", 0, 0, 1, 0.3, true},   // 16.7 degrees
      {&cont, "east", 0, 0, -1, 0, false},
      {&cont, "northEast", 0, 0, 1, 1, true},
      {&cont, "northEast", 0, 0, 1, std::tan(22.5 * M_PI / 180.0), true},  // boundary goes CCW
      {&cont, "east", 0, 0, 1, std::tan(22.5 * M_PI / 180.0), false},
      {&cont, "north", 0, 0, 0, 2, true},
      {&cont, "north", 0, 0, 0.1, 2, true},
      {&cont, "northWest", 0, 0, -1, 1, true},
      {&cont, "west", 0, 0, -3, 0, true},
      {&cont, "west", 0, 0, -3, -0.2, true},
      {&cont, "southWest", 0, 0, -1, -1, true},
      {&cont, "south", 0, 0, 0, -1, true},
      {&cont, "southEast", 0, 0, 1, -1, true},
      {&cont, "southEast", 0, 0, 0, -1, false},
      {&cont, "east", 0, 0, 0, 0, false},  // co-located: no octagonal relation
      {&cont, "north", 0, 0, 0, 0, false},
  };
  for (const Row& r : rows) {
    CAPTURE(r.rel);
    CAPTURE(r.xa);
    CAPTURE(r.ya);
    CAPTURE(r.xb);
    CAPTURE(r.yb);
    CHECK(eval_relation(find_relation(*r.set, r.rel), r.xa, r.ya, r.xb, r.yb) == r.want);
  }
}

TEST_CASE("octagonal sectors partition every non-coincident pair") {
  RelationSet cont = relation_preset("continuous-octagonal");
  Rng rng(31);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double xa = d(rng), ya = d(rng), xb = d(rng), yb = d(rng);
    if (xa == xb && ya == yb) continue;
    int hits = 0;
    for (const auto& rel : cont.relations)
      if (rel.name != "adjacent" && eval_relation(rel, xa, ya, xb, yb)) ++hits;
    CHECK(hits == 1);
  }
}

TEST_CASE("preset sizes and unknown preset") {
  CHECK(relation_preset("default").size() == 6);
  CHECK(relation_preset("local").size() == 8);
  CHECK(relation_preset("all").size() == 14);
  CHECK(relation_preset("continuous-default").size() == 5);
  CHECK(relation_preset("continuous-octagonal").size() == 9);
  CHECK_THROWS_AS(relation_preset("diagonal"), std::invalid_argument);
  CHECK(relation_preset_names().size() == 5);
}

TEST_CASE("build_graph matches a brute-force oracle and has no self edges") {
  RelationSet set = relation_preset("all");
  std::vector<Entity> ents = {at(0, 0), at(1, 0), at(1, 1), at(3, 2), at(0, 2), at(3, 2)};
  RelationalGraph g = build_graph(ents, set);
  REQUIRE(g.edges.size() == set.relations.size());
  for (size_t r = 0; r < set.relations.size(); ++r) {
    EdgeSet want;
    for (int u = 0; u < (int)ents.size(); ++u)
      for (int v = 0; v < (int)ents.size(); ++v)
        if (u != v && set.relations[r].predicate(ents[u].x, ents[u].y, ents[v].x, ents[v].y))
          want.emplace(u, v);
    EdgeSet got(g.edges[r].begin(), g.edges[r].end());
    CAPTURE(set.relations[r].name);
    CHECK(got == want);
    for (const auto& [u, v] : got) CHECK(u != v);
  }
}

TEST_CASE("feature matrix stores one entity per column") {
  std::vector<Entity> ents = {at(0, 0, {1, 2, 3}), at(1, 0, {4, 5, 6})};
  RelationalGraph g = build_graph(ents, relation_preset("default"));
  REQUIRE(g.feature_matrix.rows == 3);
  REQUIRE(g.feature_matrix.cols == 2);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 3; ++i) CHECK(g.feature_matrix(i, j) == ents[j].features[i]);
  CHECK_THROWS_AS(build_graph({at(0, 0, {1}), at(1, 1, {1, 2})}, relation_preset("default")),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_graph({}, relation_preset("default")), std::invalid_argument);
}

TEST_CASE("edges are invariant under translation") {
  Rng rng(5);
  std::uniform_int_distribution<int> cell(0, 9);
  for (const char* preset : {"default", "local", "all"}) {
    RelationSet set = relation_preset(preset);
    std::vector<Entity> ents;
    for (int i = 0; i < 7; ++i) ents.push_back(at(cell(rng), cell(rng)));
    auto base = edge_sets(build_graph(ents, set));
    for (auto [dx, dy] : {std::pair{3.0, -2.0}, {-11.0, 7.0}}) {
      std::vector<Entity> moved = ents;
      for (Entity& e : moved) {
        e.x += dx;
        e.y += dy;
      }
      CHECK(edge_sets(build_graph(moved, set)) == base);
    }
  }
  // continuous presets under arbitrary real offsets
  std::uniform_real_distribution<double> pos(-1.0, 1.0);
  for (const char* preset : {"continuous-default", "continuous-octagonal"}) {
    RelationSet set = relation_preset(preset);
    std::vector<Entity> ents;
    for (int i = 0; i < 7; ++i) ents.push_back(at(pos(rng), pos(rng)));
    auto base = edge_sets(build_graph(ents, set));
    std::vector<Entity> moved = ents;
    for (Entity& e : moved) {
      e.x += 0.731;
      e.y -= 1.277;
    }
    CHECK(edge_sets(build_graph(moved, set)) == base);
  }
}

TEST_CASE("edges commute with entity permutation") {
  Rng rng(8);
  std::uniform_int_distribution<int> cell(0, 5);
  RelationSet set = relation_preset("all");
  std::vector<Entity> ents;
  for (int i = 0; i < 6; ++i) ents.push_back(at(cell(rng), cell(rng)));
  auto base = edge_sets(build_graph(ents, set));

  std::vector<int> perm = {3, 0, 5, 1, 4, 2};  // perm[i] = new index of old entity i
  std::vector<Entity> shuffled(ents.size());
  for (size_t i = 0; i < ents.size(); ++i) shuffled[perm[i]] = ents[i];
  auto got = edge_sets(build_graph(shuffled, set));

  for (size_t r = 0; r < base.size(); ++r) {
    EdgeSet mapped;
    for (const auto& [u, v] : base[r]) mapped.emplace(perm[u], perm[v]);
    CHECK(got[r] == mapped);
  }
}

TEST_CASE("eval_relation rejects non-finite positions") {
  RelationSet set = relation_preset("default");
  CHECK_THROWS_AS(eval_relation(set.relations[0], std::nan(""), 0, 1, 1), std::domain_error);
  CHECK_THROWS_AS(eval_relation(set.relations[0], 0, 0, std::numeric_limits<double>::infinity(), 1),
                  std::domain_error);
}

TEST_CASE("grid_as_entities fills every empty cell with a typed placeholder") {
  std::vector<Entity> occ = {at(1, 2, {1, 0, 0}), at(0, 0, {0, 1, 0})};
  auto all = grid_as_entities(occ, 3, 4, 3, 2);
  CHECK(all.size() == 12);
  // occupied entities come first, unchanged
  CHECK(all[0].x == 1);
  CHECK(all[0].y == 2);
  CHECK(all[0].features == std::vector<double>{1, 0, 0});
  std::set<std::pair<int, int>> seen;
  int empties = 0;
  for (const Entity& e : all) {
    CHECK(seen.emplace((int)e.x, (int)e.y).second);  // each cell exactly once
    if (e.features == std::vector<double>{0, 0, 1}) ++empties;
  }
  CHECK(empties == 10);
  for (size_t i = 0; i < all.size(); ++i) CHECK(all[i].entity_id == (int)i);
  CHECK_THROWS_AS(grid_as_entities({at(0.5, 0, {1})}, 3, 3, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(grid_as_entities({at(5, 0, {1})}, 3, 3, 1, 0), std::invalid_argument);
}
