#include "marc/encoder.hpp"

#include <memory>
#include <stdexcept>

namespace marc {

Matrix& ParamSet::add(const std::string& name, Matrix value) {
  if (has(name)) throw std::invalid_argument("parameter '" + name + "' already exists");
  params_.push_back({name, std::move(value), {}});
  return params_.back().value;
}

Matrix& ParamSet::at(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p.value;
  throw std::out_of_range("no parameter named '" + name + "'");
}

const Matrix& ParamSet::at(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw std::out_of_range("no parameter named '" + name + "'");
}

bool ParamSet::has(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

size_t ParamSet::scalar_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.value.data.size();
  return n;
}

Matrix normalized_adjacency(const RelationalGraph& g, int relation) {
  const int n = static_cast<int>(g.entities.size());
  Matrix a(n, n);
  std::vector<int> indeg(n, 0);
  for (const auto& [u, v] : g.edges.at(relation)) indeg[v] += 1;
  for (const auto& [u, v] : g.edges.at(relation)) a(u, v) = 1.0 / indeg[v];
  return a;
}

namespace {

std::string layer_key(int layer, const std::string& leaf) {
  return "l" + std::to_string(layer) + "." + leaf;
}

}  // namespace

Encoder::Encoder(const EncoderConfig& cfg, int feature_width, double coord_scale,
                 RelationSet relations, Rng& rng)
    : cfg_(cfg), feature_width_(feature_width), coord_scale_(coord_scale),
      relations_(std::move(relations)) {
  if (cfg.arch != "rgcn" && cfg.arch != "gat" && cfg.arch != "rgat")
    throw std::invalid_argument("encoder: unknown architecture '" + cfg.arch + "' (rgcn|gat|rgat)");
  if (cfg.layers < 1) throw std::invalid_argument("encoder: needs at least one layer");
  if (cfg.embed_dim < 1) throw std::invalid_argument("encoder: embed_dim must be positive");
  if (feature_width < 1) throw std::invalid_argument("encoder: feature width must be positive");
  if ((cfg.arch == "rgcn" || cfg.arch == "rgat") && relations_.size() == 0)
    throw std::invalid_argument("encoder: " + cfg.arch + " needs a non-empty relation set");

  const int k = cfg.embed_dim;
  params_.add("embed.W", init_uniform(k, feature_width, feature_width, rng));
  params_.add("embed.b", init_uniform(k, 1, feature_width, rng));
  for (int l = 0; l < cfg.layers; ++l) {
    if (cfg_.arch == "rgcn") {
      params_.add(layer_key(l, "W0"), init_uniform(k, k, k, rng));
      for (const auto& r : relations_.relations)
        params_.add(layer_key(l, "W." + r.name), init_uniform(k, k, k, rng));
    } else if (cfg_.arch == "gat") {
      params_.add(layer_key(l, "W"), init_uniform(k, k + 2, k + 2, rng));
      params_.add(layer_key(l, "q"), init_uniform(k, 1, k, rng));
      params_.add(layer_key(l, "k"), init_uniform(k, 1, k, rng));
    } else {
      std::vector<std::string> names;
      for (const auto& r : relations_.relations) names.push_back(r.name);
      if (cfg_.rgat_self_loop) names.push_back("self");
      for (const auto& name : names) {
        params_.add(layer_key(l, "W." + name), init_uniform(k, k, k, rng));
        params_.add(layer_key(l, "q." + name), init_uniform(k, 1, k, rng));
        params_.add(layer_key(l, "k." + name), init_uniform(k, 1, k, rng));
      }
    }
  }
}

Var Encoder::activate(Tape& t, Var v) const {
  return cfg_.identity_sigma ? v : t.leaky_relu(v, cfg_.leaky_slope);
}

Var Encoder::embed(Tape& t, Var features) const {
  Var h = t.add_col_broadcast(t.matmul(t.leaf(params_.at("embed.W")), features),
                              t.leaf(params_.at("embed.b")));
  return activate(t, h);
}

Var Encoder::encode(Tape& t, const std::vector<const RelationalGraph*>& graphs) const {
  if (graphs.empty()) throw std::invalid_argument("encode: empty graph batch");
  if (cfg_.arch != "rgcn") {
    std::vector<Var> cols;
    cols.reserve(graphs.size());
    for (const RelationalGraph* g : graphs) cols.push_back(encode_one(t, *g));
    return t.hstack(cols);
  }

  // Grouped fast path: concatenate all graphs column-wise and carry the
  // per-relation per-graph averaged adjacencies alongside.
  const int d = feature_width_;
  std::vector<int> offsets(graphs.size() + 1, 0);
  for (size_t i = 0; i < graphs.size(); ++i) {
    const RelationalGraph& g = *graphs[i];
    if (g.feature_matrix.rows != d)
      throw std::invalid_argument("encode: graph has feature width " +
                                  std::to_string(g.feature_matrix.rows) + ", encoder expects " +
                                  std::to_string(d));
    offsets[i + 1] = offsets[i] + g.feature_matrix.cols;
  }
  Matrix features(d, offsets.back());
  for (size_t i = 0; i < graphs.size(); ++i) {
    const Matrix& f = graphs[i]->feature_matrix;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < f.cols; ++c) features(r, offsets[i] + c) = f(r, c);
  }

  std::vector<std::shared_ptr<const std::vector<Matrix>>> adj(relations_.size());
  for (int r = 0; r < relations_.size(); ++r) {
    auto mats = std::make_shared<std::vector<Matrix>>();
    mats->reserve(graphs.size());
    for (const RelationalGraph* g : graphs) mats->push_back(normalized_adjacency(*g, r));
    adj[r] = std::move(mats);
  }

  Var h = embed(t, t.constant(std::move(features)));
  for (int l = 0; l < cfg_.layers; ++l) {
    Var acc = t.matmul(t.leaf(params_.at(layer_key(l, "W0"))), h);
    for (int r = 0; r < relations_.size(); ++r) {
      Var pooled = t.group_matmul_right(h, adj[r], offsets);
      Var wr = t.leaf(params_.at(layer_key(l, "W." + relations_.relations[r].name)));
      acc = t.add(acc, t.matmul(wr, pooled));
    }
    h = activate(t, acc);
  }
  return t.group_max_pool(h, offsets);
}

Var Encoder::encode_one(Tape& t, const RelationalGraph& g) const {
  if (g.entities.empty()) throw std::invalid_argument("encode: graph without entities");
  if (g.feature_matrix.rows != feature_width_)
    throw std::invalid_argument("encode: graph has feature width " +
                                std::to_string(g.feature_matrix.rows) + ", encoder expects " +
                                std::to_string(feature_width_));
  Var h = embed(t, t.constant(g.feature_matrix));
  for (int l = 0; l < cfg_.layers; ++l) {
    if (cfg_.arch == "rgcn")
      h = rgcn_layer_one(t, h, g, l);
    else if (cfg_.arch == "gat")
      h = gat_layer_one(t, h, g, l);
    else
      h = rgat_layer_one(t, h, g, l);
  }
  return t.max_cols(h);
}

Var Encoder::rgcn_layer_one(Tape& t, Var h, const RelationalGraph& g, int layer) const {
  Var acc = t.matmul(t.leaf(params_.at(layer_key(layer, "W0"))), h);
  for (int r = 0; r < relations_.size(); ++r) {
    if (g.edges.at(r).empty()) continue;
    Var a = t.constant(normalized_adjacency(g, r));
    Var wr = t.leaf(params_.at(layer_key(layer, "W." + relations_.relations[r].name)));
    acc = t.add(acc, t.matmul(wr, t.matmul(h, a)));
  }
  return activate(t, acc);
}

Var Encoder::gat_layer_one(Tape& t, Var h, const RelationalGraph& g, int layer) const {
  const int n = static_cast<int>(g.entities.size());
  // Attention runs over the complete graph (self included) and carries no
  // relational structure, so scaled coordinates ride along as extra rows.
  Matrix coords(2, n);
  for (int j = 0; j < n; ++j) {
    coords(0, j) = g.entities[j].x / coord_scale_;
    coords(1, j) = g.entities[j].y / coord_scale_;
  }
  Var hc = t.vstack(h, t.constant(std::move(coords)));
  Var hp = t.matmul(t.leaf(params_.at(layer_key(layer, "W"))), hc);
  Var sq = t.matmul(t.transpose(t.leaf(params_.at(layer_key(layer, "q")))), hp);  // 1 x n
  Var sk = t.matmul(t.transpose(t.leaf(params_.at(layer_key(layer, "k")))), hp);  // 1 x n
  Var ones_col = t.constant(Matrix(n, 1, 1.0));
  Var ones_row = t.constant(Matrix(1, n, 1.0));
  // logits[u][v] = k's score of source u + q's score of target v
  Var logits = t.leaky_relu(t.add(t.matmul(t.transpose(sk), ones_row), t.matmul(ones_col, sq)),
                            cfg_.leaky_slope);
  Var att = t.softmax_cols(logits);
  return activate(t, t.matmul(hp, att));
}

Var Encoder::rgat_layer_one(Tape& t, Var h, const RelationalGraph& g, int layer) const {
  const int n = static_cast<int>(g.entities.size());
  const int nrel = relations_.size() + (cfg_.rgat_self_loop ? 1 : 0);

  // One softmax per target over all incoming (relation, source) pairs. The
  // mask rows are laid out target-major: row v, column r*n + u.
  auto mask = std::make_shared<Matrix>(n, nrel * n);
  for (int r = 0; r < relations_.size(); ++r)
    for (const auto& [u, v] : g.edges.at(r)) (*mask)(v, r * n + u) = 1.0;
  if (cfg_.rgat_self_loop) {
    const int r = relations_.size();
    for (int v = 0; v < n; ++v) (*mask)(v, r * n + v) = 1.0;
  }

  std::vector<Var> projected(nrel), logit_blocks(nrel);
  Var ones_col = t.constant(Matrix(n, 1, 1.0));
  Var ones_row = t.constant(Matrix(1, n, 1.0));
  for (int r = 0; r < nrel; ++r) {
    const std::string name = r < relations_.size() ? relations_.relations[r].name : "self";
    projected[r] = t.matmul(t.leaf(params_.at(layer_key(layer, "W." + name))), h);
    Var sq = t.matmul(t.transpose(t.leaf(params_.at(layer_key(layer, "q." + name)))), projected[r]);
    Var sk = t.matmul(t.transpose(t.leaf(params_.at(layer_key(layer, "k." + name)))), projected[r]);
    // block[v][u] = score of source u + score of target v, matching the mask layout
    logit_blocks[r] = t.add(t.matmul(t.transpose(sq), ones_row), t.matmul(ones_col, sk));
  }
  Var att = t.masked_softmax_rows(t.leaky_relu(t.hstack(logit_blocks), cfg_.leaky_slope),
                                  mask);  // n x (nrel*n), rows sum to 1

  Var acc;
  for (int r = 0; r < nrel; ++r) {
    // message to v = sum_u att[v, r*n+u] * projected_r[:, u]
    Var m = t.matmul(projected[r], t.transpose(t.slice_cols(att, r * n, n)));
    acc = r == 0 ? m : t.add(acc, m);
  }
  // An entity with no incoming edge of any relation gets a zero message.
  return activate(t, acc);
}

}  // namespace marc
