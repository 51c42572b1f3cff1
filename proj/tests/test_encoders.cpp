#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "marc/encoder.hpp"

#include "encoder_oracle.hpp"
#include "marc/relgraph.hpp"
#include "marc/rng.hpp"
#include "marc/tape.hpp"

using namespace marc;

namespace {

using marc::testing::Oracle;

std::vector<Entity> random_entities(int n, Rng& rng, int d = 3, int span = 5) {
  std::uniform_int_distribution<int> cell(0, span);
  std::uniform_real_distribution<double> feat(-1.0, 1.0);
  std::vector<Entity> out;
  for (int i = 0; i < n; ++i) {
    Entity e;
    e.x = cell(rng);
    e.y = cell(rng);
    e.features.resize(d);
    for (double& v : e.features) v = feat(rng);
    e.entity_id = i;
    out.push_back(e);
  }
  return out;
}

Matrix encode_value(const Encoder& enc, const RelationalGraph& g) {
  Tape t;
  return t.value(enc.encode_one(t, g));
}

}  // namespace

TEST_CASE("encoders match the scalar-loop oracle") {
  Rng rng(404);
  RelationSet rels = relation_preset("default");
  for (const char* arch : {"rgcn", "gat", "rgat"}) {
    for (bool self_loop : {false, true}) {
      if (self_loop && std::string(arch) != "rgat") continue;
      EncoderConfig cfg;
      cfg.arch = arch;
      cfg.layers = 2;
      cfg.embed_dim = 6;
      cfg.rgat_self_loop = self_loop;
      Encoder enc(cfg, 3, 5.0, rels, rng);
      Oracle oracle{enc, 5.0};
      for (int trial = 0; trial < 5; ++trial) {
        RelationalGraph g = build_graph(random_entities(4 + trial, rng), rels);
        Matrix got = encode_value(enc, g);
        Matrix want = oracle.encode(g);
        REQUIRE(got.rows == 6);
        for (int i = 0; i < 6; ++i) {
          CAPTURE(arch);
          CAPTURE(self_loop);
          CAPTURE(trial);
          CHECK(got(i, 0) == doctest::Approx(want(i, 0)).epsilon(1e-11));
        }
      }
    }
  }
}

TEST_CASE("grouped batch equals per-graph reference for mixed sizes") {
  Rng rng(77);
  RelationSet rels = relation_preset("default");
  for (const char* arch : {"rgcn", "gat", "rgat"}) {
    EncoderConfig cfg;
    cfg.arch = arch;
    cfg.embed_dim = 8;
    Encoder enc(cfg, 3, 5.0, rels, rng);
    std::vector<RelationalGraph> graphs;
    for (int n : {4, 7, 5, 8, 4}) graphs.push_back(build_graph(random_entities(n, rng), rels));
    std::vector<const RelationalGraph*> ptrs;
    for (const auto& g : graphs) ptrs.push_back(&g);
    Tape t;
    const Matrix& batched = t.value(enc.encode(t, ptrs));
    REQUIRE(batched.cols == (int)graphs.size());
    for (size_t j = 0; j < graphs.size(); ++j) {
      Matrix one = encode_value(enc, graphs[j]);
      for (int i = 0; i < 8; ++i) {
        CAPTURE(arch);
        CAPTURE(j);
        CHECK(batched(i, j) == doctest::Approx(one(i, 0)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("embedding is invariant to entity order") {
  Rng rng(48);
  RelationSet rels = relation_preset("default");
  for (const char* arch : {"rgcn", "gat", "rgat"}) {
    EncoderConfig cfg;
    cfg.arch = arch;
    cfg.embed_dim = 8;
    Encoder enc(cfg, 3, 5.0, rels, rng);
    std::vector<Entity> ents = random_entities(6, rng);
    Matrix base = encode_value(enc, build_graph(ents, rels));
    std::vector<Entity> rev(ents.rbegin(), ents.rend());
    Matrix flipped = encode_value(enc, build_graph(rev, rels));
    for (int i = 0; i < 8; ++i) {
      CAPTURE(arch);
      CHECK(base(i, 0) == doctest::Approx(flipped(i, 0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("relational variants ignore absolute position; plain attention does not") {
  Rng rng(66);
  RelationSet rels = relation_preset("default");
  std::vector<Entity> ents = random_entities(6, rng);
  std::vector<Entity> moved = ents;
  for (Entity& e : moved) {
    e.x += 13;
    e.y -= 4;
  }
  for (const char* arch : {"rgcn", "rgat"}) {
    EncoderConfig cfg;
    cfg.arch = arch;
    cfg.embed_dim = 8;
    Encoder enc(cfg, 3, 5.0, rels, rng);
    Matrix a = encode_value(enc, build_graph(ents, rels));
    Matrix b = encode_value(enc, build_graph(moved, rels));
    for (int i = 0; i < 8; ++i) {
      CAPTURE(arch);
      CHECK(a(i, 0) == doctest::Approx(b(i, 0)).epsilon(1e-12));
    }
  }
  // gat consumes raw coordinates, so a translation shows up in the output
  EncoderConfig cfg;
  cfg.arch = "gat";
  cfg.embed_dim = 8;
  Encoder enc(cfg, 3, 5.0, rels, rng);
  Matrix a = encode_value(enc, build_graph(ents, rels));
  Matrix b = encode_value(enc, build_graph(moved, rels));
  double diff = 0.0;
  for (int i = 0; i < 8; ++i) diff = std::max(diff, std::abs(a(i, 0) - b(i, 0)));
  CHECK(diff > 1e-9);
}

TEST_CASE("identity sigma makes the single-entity map affine") {
  Rng rng(21);
  RelationSet rels = relation_preset("default");
  EncoderConfig cfg;
  cfg.identity_sigma = true;
  cfg.embed_dim = 5;
  Encoder enc(cfg, 3, 5.0, rels, rng);
  auto enc_feats = [&](std::vector<double> f) {
    Entity e;
    e.x = 2;
    e.y = 2;
    e.features = std::move(f);
    return encode_value(enc, build_graph({e}, rels));
  };
  Matrix gx = enc_feats({0.3, -0.7, 1.1});
  Matrix gy = enc_feats({-0.2, 0.5, 0.4});
  Matrix gxy = enc_feats({0.1, -0.2, 1.5});
  Matrix g0 = enc_feats({0.0, 0.0, 0.0});
  // affine map: g(x+y) - g(x) - g(y) + g(0) == 0
  for (int i = 0; i < 5; ++i)
    CHECK(gxy(i, 0) - gx(i, 0) - gy(i, 0) + g0(i, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("rgat without incoming edges yields a zero embedding; self loop restores signal") {
  Rng rng(12);
  RelationSet rels = relation_preset("local");  // a lone entity has no local edges
  Entity e;
  e.x = 2;
  e.y = 2;
  e.features = {1.0, -0.5, 0.25};
  EncoderConfig cfg;
  cfg.arch = "rgat";
  cfg.embed_dim = 6;
  Encoder no_self(cfg, 3, 5.0, rels, rng);
  Matrix z = encode_value(no_self, build_graph({e}, rels));
  for (int i = 0; i < 6; ++i) CHECK(z(i, 0) == 0.0);

  cfg.rgat_self_loop = true;
  Encoder with_self(cfg, 3, 5.0, rels, rng);
  Matrix nz = encode_value(with_self, build_graph({e}, rels));
  double mag = 0.0;
  for (int i = 0; i < 6; ++i) mag = std::max(mag, std::abs(nz(i, 0)));
  CHECK(mag > 1e-9);
}

TEST_CASE("gradients reach every encoder parameter") {
  Rng rng(3);
  RelationSet rels = relation_preset("default");
  for (const char* arch : {"rgcn", "gat", "rgat"}) {
    EncoderConfig cfg;
    cfg.arch = arch;
    cfg.embed_dim = 6;
    Encoder enc(cfg, 3, 5.0, rels, rng);
    // every relation of the preset fires at least once: a co-located pair
    // (aligned), an adjacent pair, and spread-out entities for the remote ones
    std::vector<Entity> ents = random_entities(6, rng);
    ents[1].x = ents[0].x;
    ents[1].y = ents[0].y;
    ents[2].x = ents[0].x + 1;
    ents[2].y = ents[0].y;
    ents[3].x = ents[0].x - 2;
    ents[4].y = ents[0].y + 2;
    ents[5].y = ents[0].y - 2;
    RelationalGraph g0 = build_graph(ents, rels);
    RelationalGraph g1 = build_graph(random_entities(5, rng), rels);
    Tape t;
    t.backward(t.sum(enc.encode(t, {&g0, &g1})));
    for (const Param& p : enc.params().all()) {
      double mag = 0.0;
      for (double g : t.grad(t.leaf(p.value)).data) {
        CHECK(std::isfinite(g));
        mag = std::max(mag, std::abs(g));
      }
      CAPTURE(arch);
      CAPTURE(p.name);
      CHECK(mag > 0.0);
    }
  }
}

TEST_CASE("constructor and encode reject bad input") {
  Rng rng(1);
  RelationSet rels = relation_preset("default");
  EncoderConfig cfg;
  cfg.arch = "transformer";
  CHECK_THROWS_AS(Encoder(cfg, 3, 5.0, rels, rng), std::invalid_argument);
  cfg.arch = "rgcn";
  cfg.layers = 0;
  CHECK_THROWS_AS(Encoder(cfg, 3, 5.0, rels, rng), std::invalid_argument);
  cfg.layers = 2;
  CHECK_THROWS_AS(Encoder(cfg, 3, 5.0, RelationSet{}, rng), std::invalid_argument);

  Encoder enc(cfg, 3, 5.0, rels, rng);
  Tape t;
  CHECK_THROWS_AS(enc.encode(t, {}), std::invalid_argument);
  RelationalGraph g = build_graph(random_entities(4, rng, /*d=*/5), rels);
  CHECK_THROWS_AS(enc.encode_one(t, g), std::invalid_argument);  // feature width mismatch
}
