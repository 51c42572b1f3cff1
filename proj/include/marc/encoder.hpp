#pragma once

#include <deque>
#include <string>
#include <vector>

#include "marc/adam.hpp"
#include "marc/relgraph.hpp"
#include "marc/rng.hpp"
#include "marc/tape.hpp"

namespace marc {

struct Param {
  std::string name;
  Matrix value;
  AdamState adam;
};

// Named parameter collection. Backed by a deque so references returned by
// at() stay valid while parameters are added.
class ParamSet {
 public:
  Matrix& add(const std::string& name, Matrix value);
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  bool has(const std::string& name) const;
  std::deque<Param>& all() { return params_; }
  const std::deque<Param>& all() const { return params_; }
  size_t scalar_count() const;

 private:
  std::deque<Param> params_;
};

struct EncoderConfig {
  std::string arch = "rgcn";  // rgcn | gat | rgat
  int layers = 2;
  int embed_dim = 48;
  double leaky_slope = 0.01;
  bool rgat_self_loop = false;   // extra dedicated self relation for rgat
  bool identity_sigma = false;   // test hook: drop the nonlinearity
};

// Observation encoder: entity embedding, graph message-passing layers, and a
// feature-wise max-pool over entities. Output is one embedding column per
// input graph; it depends on neither entity order nor absolute positions
// (rgcn/rgat) and is size-agnostic in the number of entities.
class Encoder {
 public:
  // coord_scale normalizes coordinates for the gat variant, which appends
  // them to every layer input (a plain attention graph is blind to space
  // otherwise).
  Encoder(const EncoderConfig& cfg, int feature_width, double coord_scale,
          RelationSet relations, Rng& rng);

  const EncoderConfig& config() const { return cfg_; }
  const RelationSet& relations() const { return relations_; }
  int out_dim() const { return cfg_.embed_dim; }
  int feature_width() const { return feature_width_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Batched encoding, one output column per graph (embed_dim x B). For rgcn
  // this runs a grouped fast path with O(layers * relations) tape nodes; the
  // attention variants fall back to per-graph encoding.
  Var encode(Tape& t, const std::vector<const RelationalGraph*>& graphs) const;

  // Straightforward per-graph encoding (embed_dim x 1). Serves as the
  // reference implementation the fast path is tested and benchmarked against.
  Var encode_one(Tape& t, const RelationalGraph& g) const;

 private:
  Var activate(Tape& t, Var v) const;
  Var embed(Tape& t, Var features) const;
  Var rgcn_layer_one(Tape& t, Var h, const RelationalGraph& g, int layer) const;
  Var gat_layer_one(Tape& t, Var h, const RelationalGraph& g, int layer) const;
  Var rgat_layer_one(Tape& t, Var h, const RelationalGraph& g, int layer) const;

  EncoderConfig cfg_;
  int feature_width_;
  double coord_scale_;
  RelationSet relations_;
  ParamSet params_;
};

// In-neighbour averaged adjacency for one relation: A[u][v] = 1/|N_r(v)| for
// each edge (u,v), so that (Z A) column v averages the in-neighbourhood.
Matrix normalized_adjacency(const RelationalGraph& g, int relation);

}  // namespace marc
