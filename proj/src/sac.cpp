#include "marc/sac.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <stdexcept>

namespace marc {

// ---------------------------------------------------------------------------
// Replay buffer and running statistics

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer: capacity must be positive");
  data_.reserve(std::min<size_t>(capacity, 1 << 16));
}

void ReplayBuffer::add(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);  // overwrite the oldest entry
    next_ = (next_ + 1) % capacity_;
  }
}

std::vector<size_t> ReplayBuffer::sample_indices(int batch, Rng& rng) const {
  if (data_.empty()) throw std::logic_error("replay buffer: cannot sample from an empty buffer");
  std::uniform_int_distribution<size_t> d(0, data_.size() - 1);
  std::vector<size_t> idx(batch);
  for (auto& i : idx) i = d(rng);
  return idx;
}

void RunningStat::add(double x) {
  count += 1;
  const double delta = x - mean;
  mean += delta / count;
  m2 += delta * (x - mean);
}

double RunningStat::stddev() const { return std::sqrt(variance()); }

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double cdf = 0.0;
  for (size_t a = 0; a < probs.size(); ++a) {
    cdf += probs[a];
    if (r < cdf) return static_cast<int>(a);
  }
  return static_cast<int>(probs.size()) - 1;
}

// ---------------------------------------------------------------------------
// Dense network helpers

void add_dense_params(ParamSet& params, const std::string& prefix, int layers, int in_dim,
                      int hidden, int out_dim, Rng& rng) {
  if (layers < 1) throw std::invalid_argument("dense: needs at least one layer");
  for (int l = 1; l <= layers; ++l) {
    const int in = l == 1 ? in_dim : hidden;
    const int out = l == layers ? out_dim : hidden;
    params.add(prefix + ".W" + std::to_string(l), init_uniform(out, in, in, rng));
    params.add(prefix + ".b" + std::to_string(l), init_uniform(out, 1, in, rng));
  }
}

Var dense_forward(Tape& t, const ParamSet& params, const std::string& prefix, int layers,
                  Var input, double slope) {
  Var h = input;
  for (int l = 1; l <= layers; ++l) {
    h = t.add_col_broadcast(t.matmul(t.leaf(params.at(prefix + ".W" + std::to_string(l))), h),
                            t.leaf(params.at(prefix + ".b" + std::to_string(l))));
    if (l < layers) h = t.leaky_relu(h, slope);
  }
  return h;
}

void copy_values(ParamSet& dst, const ParamSet& src) {
  for (const auto& p : src.all()) {
    Matrix& d = dst.at(p.name);
    if (!d.same_shape(p.value))
      throw std::invalid_argument("copy_values: shape mismatch on '" + p.name + "' (" +
                                  d.shape_str() + " vs " + p.value.shape_str() + ")");
    d.data = p.value.data;
  }
}

void soft_update(ParamSet& dst, const ParamSet& src, double tau) {
  for (const auto& p : src.all()) {
    Matrix& d = dst.at(p.name);
    for (size_t i = 0; i < d.data.size(); ++i)
      d.data[i] = (1.0 - tau) * d.data[i] + tau * p.value.data[i];
  }
}

// ---------------------------------------------------------------------------
// Learner

MarcLearner::MarcLearner(const SacConfig& cfg, const EncoderConfig& enc_cfg,
                         const RelationSet& relations, const ObsSchema& schema, int num_agents,
                         int num_actions, Rng& init_rng)
    : cfg_(cfg), schema_(schema), num_agents_(num_agents), num_actions_(num_actions),
      relations_(relations), buffer_(cfg.buffer_capacity), episode_return_(num_agents, 0.0) {
  if (num_agents < 1 || num_actions < 2)
    throw std::invalid_argument("learner: needs at least one agent and two actions");
  if (cfg.batch_size < 1 || cfg.update_interval < 1 || cfg.updates_per_interval < 1)
    throw std::invalid_argument("learner: batch size and update cadence must be positive");
  if (cfg.full_grid_entities && !schema.grid)
    throw std::invalid_argument("learner: full-grid entities need a grid observation schema");

  encoder_ = std::make_unique<Encoder>(enc_cfg, schema.feature_width, schema.coord_scale(),
                                       relations_, init_rng);
  target_encoder_ = std::make_unique<Encoder>(enc_cfg, schema.feature_width, schema.coord_scale(),
                                              relations_, init_rng);
  copy_values(target_encoder_->params(), encoder_->params());

  const int head_in = enc_cfg.embed_dim + (num_agents - 1) * num_actions;
  const int obs_len = schema.obs_length();
  for (int i = 0; i < num_agents; ++i) {
    critic_.emplace_back();
    add_dense_params(critic_.back(), "f", cfg.critic_head_layers, head_in, cfg.hidden,
                     num_actions, init_rng);
    target_critic_.emplace_back();
    add_dense_params(target_critic_.back(), "f", cfg.critic_head_layers, head_in, cfg.hidden,
                     num_actions, init_rng);
    copy_values(target_critic_.back(), critic_.back());

    policy_.emplace_back();
    add_dense_params(policy_.back(), "pi", cfg.policy_layers, obs_len, cfg.hidden, num_actions,
                     init_rng);
    target_policy_.emplace_back();
    add_dense_params(target_policy_.back(), "pi", cfg.policy_layers, obs_len, cfg.hidden,
                     num_actions, init_rng);
    copy_values(target_policy_.back(), policy_.back());
  }
}

double MarcLearner::reward_scale() const {
  if (!cfg_.reward_normalization) return 1.0;
  const double sd = return_stat_.stddev();
  return sd > 1e-6 ? sd : 1.0;
}

RelationalGraph MarcLearner::graph_of(const std::vector<double>& obs) const {
  auto entities = cfg_.full_grid_entities ? grid_entities_from_obs(obs, schema_)
                                          : extract_entities(obs, schema_);
  return build_graph(entities, relations_);
}

Matrix MarcLearner::policy_probs_batch(const ParamSet& params, int agent, const Matrix& obs) const {
  (void)agent;
  Tape t;
  Var logits = dense_forward(t, params, "pi", cfg_.policy_layers, t.leaf(obs),
                             encoder_->config().leaky_slope);
  return t.value(t.softmax_cols(logits));
}

std::vector<int> MarcLearner::act(const std::vector<double>& obs, Rng& rng, bool greedy,
                                  int agent_count) const {
  const int n = agent_count < 0 ? num_agents_ : agent_count;
  std::vector<double> padded = obs;
  padded.resize(schema_.obs_length(), 0.0);
  Matrix col(schema_.obs_length(), 1);
  for (int i = 0; i < col.rows; ++i) col(i, 0) = padded[i];

  std::vector<int> actions(n);
  for (int i = 0; i < n; ++i) {
    const Matrix probs = policy_probs_batch(policy_[i % num_agents_], i, col);
    if (greedy) {
      int best = 0;
      for (int a = 1; a < num_actions_; ++a)
        if (probs(a, 0) > probs(best, 0)) best = a;
      actions[i] = best;
    } else {
      std::vector<double> p(num_actions_);
      for (int a = 0; a < num_actions_; ++a) p[a] = probs(a, 0);
      actions[i] = sample_categorical(p, rng);
    }
  }
  return actions;
}

std::vector<double> MarcLearner::policy_probs(int agent, const std::vector<double>& obs) const {
  std::vector<double> padded = obs;
  padded.resize(schema_.obs_length(), 0.0);
  Matrix col(schema_.obs_length(), 1);
  for (int i = 0; i < col.rows; ++i) col(i, 0) = padded[i];
  const Matrix probs = policy_probs_batch(policy_[agent % num_agents_], agent, col);
  std::vector<double> out(num_actions_);
  for (int a = 0; a < num_actions_; ++a) out[a] = probs(a, 0);
  return out;
}

void MarcLearner::observe(Transition t) {
  if (static_cast<int>(t.rewards.size()) != num_agents_ ||
      static_cast<int>(t.actions.size()) != num_agents_)
    throw std::invalid_argument("observe: transition arity does not match the agent count");
  for (int i = 0; i < num_agents_; ++i) episode_return_[i] += t.rewards[i];
  const bool episode_over = t.done || t.truncated;
  buffer_.add(std::move(t));
  if (episode_over) {
    for (int i = 0; i < num_agents_; ++i) {
      return_stat_.add(episode_return_[i]);
      episode_return_[i] = 0.0;
    }
  }
}

MarcLearner::Batch MarcLearner::assemble(const std::vector<size_t>& idx) const {
  Batch b;
  b.idx = idx;
  const int len = schema_.obs_length();
  const int B = static_cast<int>(idx.size());
  b.obs = Matrix(len, B);
  b.next_obs = Matrix(len, B);
  b.graphs.reserve(B);
  b.next_graphs.reserve(B);
  for (int s = 0; s < B; ++s) {
    const Transition& tr = buffer_[idx[s]];
    if (static_cast<int>(tr.obs.size()) != len)
      throw std::logic_error("assemble: stored observation length " +
                             std::to_string(tr.obs.size()) + " does not match schema length " +
                             std::to_string(len));
    for (int r = 0; r < len; ++r) {
      b.obs(r, s) = tr.obs[r];
      b.next_obs(r, s) = tr.next_obs[r];
    }
    b.graphs.push_back(graph_of(tr.obs));
    b.next_graphs.push_back(graph_of(tr.next_obs));
  }
  for (const auto& g : b.graphs) b.graph_ptrs.push_back(&g);
  for (const auto& g : b.next_graphs) b.next_graph_ptrs.push_back(&g);
  return b;
}

Var MarcLearner::critic_head(Tape& t, const ParamSet& params, int agent, Var encoding,
                             const std::vector<std::vector<int>>& actions) const {
  const int B = static_cast<int>(actions.front().size());
  Matrix onehot((num_agents_ - 1) * num_actions_, B);
  int row = 0;
  for (int j = 0; j < num_agents_; ++j) {
    if (j == agent) continue;
    for (int s = 0; s < B; ++s) onehot(row + actions[j][s], s) = 1.0;
    row += num_actions_;
  }
  Var in = num_agents_ > 1 ? t.vstack(encoding, t.constant(std::move(onehot))) : encoding;
  return dense_forward(t, params, "f", cfg_.critic_head_layers, in,
                       encoder_->config().leaky_slope);
}

Matrix MarcLearner::target_y(const Batch& b, Rng& rng) const {
  const int B = static_cast<int>(b.idx.size());
  const double scale = reward_scale();

  // Next-step action distribution of each target policy.
  std::vector<Matrix> probs(num_agents_);
  for (int i = 0; i < num_agents_; ++i)
    probs[i] = policy_probs_batch(target_policy_[i], i, b.next_obs);

  std::vector<std::vector<int>> next_actions(num_agents_, std::vector<int>(B));
  std::vector<double> p(num_actions_);
  for (int s = 0; s < B; ++s)
    for (int i = 0; i < num_agents_; ++i) {
      for (int a = 0; a < num_actions_; ++a) p[a] = probs[i](a, s);
      next_actions[i][s] = sample_categorical(p, rng);
    }

  Tape t;
  Var enc = target_encoder_->encode(t, b.next_graph_ptrs);
  Matrix y(num_agents_, B);
  for (int i = 0; i < num_agents_; ++i) {
    const Matrix& q = t.value(critic_head(t, target_critic_[i], i, enc, next_actions));
    for (int s = 0; s < B; ++s) {
      const Transition& tr = buffer_[b.idx[s]];
      double future = 0.0;
      if (!tr.done) {
        if (cfg_.sample_next_action) {
          const int a = next_actions[i][s];
          future = soft_future(q(a, s), cfg_.alpha, probs[i](a, s));
        } else {
          // Analytic expectation over the agent's own next action.
          for (int a = 0; a < num_actions_; ++a)
            if (probs[i](a, s) > 0.0)
              future += probs[i](a, s) * soft_future(q(a, s), cfg_.alpha, probs[i](a, s));
        }
      }
      y(i, s) = soft_target(tr.rewards[i], scale, cfg_.gamma, tr.done, future);
    }
  }
  return y;
}

double MarcLearner::critic_pass(const Batch& b, const Matrix& y, GradMap* grads) const {
  const int B = static_cast<int>(b.idx.size());
  std::vector<std::vector<int>> actions(num_agents_, std::vector<int>(B));
  for (int i = 0; i < num_agents_; ++i)
    for (int s = 0; s < B; ++s) actions[i][s] = buffer_[b.idx[s]].actions[i];

  Tape t;
  Var enc = encoder_->encode(t, b.graph_ptrs);
  Var loss;
  for (int i = 0; i < num_agents_; ++i) {
    Var q = critic_head(t, critic_[i], i, enc, actions);
    Var sel = t.select_per_column(q, actions[i]);
    Matrix yi(1, B);
    for (int s = 0; s < B; ++s) yi(0, s) = y(i, s);
    Var diff = t.sub(sel, t.constant(std::move(yi)));
    Var li = t.scale(t.sum(t.mul(diff, diff)), 1.0 / B);
    loss = i == 0 ? li : t.add(loss, li);
  }
  const double loss_val = t.value(loss)(0, 0);
  if (grads) {
    t.backward(loss);
    for (const auto& p : encoder_->params().all()) (*grads)[&p.value] = t.grad(t.leaf(p.value));
    for (int i = 0; i < num_agents_; ++i)
      for (const auto& p : critic_[i].all()) (*grads)[&p.value] = t.grad(t.leaf(p.value));
  }
  return loss_val;
}

double MarcLearner::critic_update(const Batch& b, const Matrix& y) {
  GradMap grads;
  const double loss_val = critic_pass(b, y, &grads);
  const AdamConfig adam{cfg_.lr};
  for (auto& p : encoder_->params().all()) adam_step(p.value, grads.at(&p.value), p.adam, adam);
  for (int i = 0; i < num_agents_; ++i)
    for (auto& p : critic_[i].all()) adam_step(p.value, grads.at(&p.value), p.adam, adam);
  return loss_val;
}

std::pair<double, double> MarcLearner::policy_pass(const Batch& b, Rng& rng, GradMap* grads) const {
  const int B = static_cast<int>(b.idx.size());

  // Fresh joint actions from the current policies; Q is evaluated with them
  // and enters the policy objective as a constant.
  std::vector<Matrix> probs(num_agents_);
  for (int i = 0; i < num_agents_; ++i)
    probs[i] = policy_probs_batch(policy_[i], i, b.obs);
  std::vector<std::vector<int>> new_actions(num_agents_, std::vector<int>(B));
  std::vector<double> pv(num_actions_);
  for (int s = 0; s < B; ++s)
    for (int i = 0; i < num_agents_; ++i) {
      for (int a = 0; a < num_actions_; ++a) pv[a] = probs[i](a, s);
      new_actions[i][s] = sample_categorical(pv, rng);
    }

  std::vector<Matrix> qvals(num_agents_);
  {
    Tape tq;
    Var enc = encoder_->encode(tq, b.graph_ptrs);
    for (int i = 0; i < num_agents_; ++i)
      qvals[i] = tq.value(critic_head(tq, critic_[i], i, enc, new_actions));
  }

  Tape t;
  Var obs_in = t.leaf(b.obs);
  Var loss;
  double entropy = 0.0;
  for (int i = 0; i < num_agents_; ++i) {
    Var logits = dense_forward(t, policy_[i], "pi", cfg_.policy_layers, obs_in,
                               encoder_->config().leaky_slope);
    Var logp = t.log_softmax_cols(logits);
    Var p = t.exp(logp);

    const Matrix& pm = t.value(p);
    const Matrix& lpm = t.value(logp);
    for (int s = 0; s < B; ++s)
      for (int a = 0; a < num_actions_; ++a) entropy -= pm(a, s) * lpm(a, s);

    Var li;
    if (!cfg_.sampled_policy_gradient) {
      // Exact expectation over own actions:
      //   L_i = -E_b sum_a pi(a) (Q_i(a) - alpha log pi(a)).
      // A detached policy-weighted baseline would cancel exactly here
      // (sum_a grad pi(a) = 0), so none is subtracted.
      Var inner = t.mul(p, t.sub(t.constant(qvals[i]), t.scale(logp, cfg_.alpha)));
      li = t.scale(t.sum(inner), -1.0 / B);
    } else {
      // Score-function estimator on the sampled own action with the
      // policy-weighted value baseline.
      Matrix coeff(1, B);
      for (int s = 0; s < B; ++s) {
        const int a = new_actions[i][s];
        double baseline = 0.0;
        for (int k = 0; k < num_actions_; ++k) baseline += pm(k, s) * qvals[i](k, s);
        coeff(0, s) = cfg_.alpha * lpm(a, s) - qvals[i](a, s) + baseline;
      }
      Var sel = t.select_per_column(logp, new_actions[i]);
      li = t.scale(t.sum(t.mul(t.constant(std::move(coeff)), sel)), 1.0 / B);
    }
    loss = i == 0 ? li : t.add(loss, li);
  }
  const double loss_val = t.value(loss)(0, 0);
  if (grads) {
    t.backward(loss);
    for (int i = 0; i < num_agents_; ++i)
      for (const auto& p : policy_[i].all()) (*grads)[&p.value] = t.grad(t.leaf(p.value));
  }
  return {loss_val, entropy / (num_agents_ * B)};
}

std::pair<double, double> MarcLearner::policy_update(const Batch& b, Rng& rng) {
  GradMap grads;
  const auto [loss_val, entropy] = policy_pass(b, rng, &grads);
  const AdamConfig adam{cfg_.lr};
  for (int i = 0; i < num_agents_; ++i)
    for (auto& p : policy_[i].all()) adam_step(p.value, grads.at(&p.value), p.adam, adam);
  return {loss_val, entropy};
}

Matrix MarcLearner::target_probe(const std::vector<size_t>& idx, uint64_t sample_seed) const {
  Rng rng(sample_seed);
  return target_y(assemble(idx), rng);
}

double MarcLearner::critic_loss_probe(const std::vector<size_t>& idx, const Matrix& y,
                                      GradMap* grads) const {
  return critic_pass(assemble(idx), y, grads);
}

double MarcLearner::policy_loss_probe(const std::vector<size_t>& idx, uint64_t action_seed,
                                      GradMap* grads) const {
  Rng rng(action_seed);
  return policy_pass(assemble(idx), rng, grads).first;
}

namespace {
// Phase timings on stderr when MARC_LOG_LEVEL=debug.
bool debug_timing() {
  static const bool on = [] {
    const char* v = std::getenv("MARC_LOG_LEVEL");
    return v && std::string(v) == "debug";
  }();
  return on;
}

double timed(const char* what, const std::function<double()>& fn) {
  if (!debug_timing()) return fn();
  const auto t0 = std::chrono::steady_clock::now();
  const double out = fn();
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "[debug] " << what << " " << ms << " ms\n";
  return out;
}
}  // namespace

UpdateStats MarcLearner::update_round(Rng& rng) {
  if (!ready())
    throw std::logic_error("update_round: buffer holds " + std::to_string(buffer_.size()) +
                           " transitions, batch size is " + std::to_string(cfg_.batch_size));
  UpdateStats stats;
  for (int k = 0; k < cfg_.updates_per_interval; ++k) {
    Batch b;
    timed("assemble", [&] { b = assemble(buffer_.sample_indices(cfg_.batch_size, rng)); return 0.0; });
    Matrix y;
    timed("target_y", [&] { y = target_y(b, rng); return 0.0; });
    stats.critic_loss += timed("critic_update", [&] { return critic_update(b, y); });
    double ent = 0.0;
    stats.policy_loss += timed("policy_update", [&] {
      auto [pl, e] = policy_update(b, rng);
      ent = e;
      return pl;
    });
    stats.entropy += ent;
  }
  stats.critic_loss /= cfg_.updates_per_interval;
  stats.policy_loss /= cfg_.updates_per_interval;
  stats.entropy /= cfg_.updates_per_interval;

  soft_update(target_encoder_->params(), encoder_->params(), cfg_.tau);
  for (int i = 0; i < num_agents_; ++i) {
    soft_update(target_critic_[i], critic_[i], cfg_.tau);
    soft_update(target_policy_[i], policy_[i], cfg_.tau);
  }
  return stats;
}

std::vector<std::pair<std::string, ParamSet*>> MarcLearner::named_param_sets() {
  std::vector<std::pair<std::string, ParamSet*>> out;
  out.emplace_back("encoder", &encoder_->params());
  out.emplace_back("target_encoder", &target_encoder_->params());
  for (int i = 0; i < num_agents_; ++i) {
    const std::string n = std::to_string(i);
    out.emplace_back("critic" + n, &critic_[i]);
    out.emplace_back("target_critic" + n, &target_critic_[i]);
    out.emplace_back("policy" + n, &policy_[i]);
    out.emplace_back("target_policy" + n, &target_policy_[i]);
  }
  return out;
}

}  // namespace marc
