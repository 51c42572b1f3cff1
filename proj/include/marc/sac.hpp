#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "marc/encoder.hpp"
#include "marc/env.hpp"
#include "marc/relgraph.hpp"
#include "marc/rng.hpp"
#include "marc/schema.hpp"

namespace marc {

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.001;
  double alpha = 0.01;
  double lr = 0.001;
  int batch_size = 1024;
  int update_interval = 100;       // environment steps between update rounds
  int updates_per_interval = 4;
  int hidden = 128;                // policy and critic-head width
  int policy_layers = 3;
  int critic_head_layers = 2;
  int buffer_capacity = 100000;
  bool reward_normalization = true;
  // Score-function policy gradient with a value baseline instead of the
  // default exact expectation over own actions.
  bool sampled_policy_gradient = false;
  // Target entropy term from a joint sample of the target policies; false
  // replaces the own-action sample with its analytic expectation.
  bool sample_next_action = true;
  // Ablation: every grid cell becomes an entity (one-hot "empty" filler).
  bool full_grid_entities = false;
};

struct Transition {
  std::vector<double> obs;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> next_obs;
  bool done = false;       // terminal: no bootstrapping
  bool truncated = false;  // cutoff: bootstrap continues
};

// Fixed-capacity FIFO ring; sampling is uniform with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);
  void add(Transition t);
  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }
  const Transition& operator[](size_t i) const { return data_[i]; }
  std::vector<size_t> sample_indices(int batch, Rng& rng) const;

 private:
  size_t capacity_;
  size_t next_ = 0;
  std::vector<Transition> data_;
};

// Welford accumulator; the reward normalizer divides by the running standard
// deviation of per-agent episode returns.
struct RunningStat {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double x);
  double variance() const { return count > 1 ? m2 / (count - 1) : 0.0; }
  double stddev() const;
};

// Entropy-regularized value of one own-action candidate under the target
// critic: Q̄(a) - α log π̄(a).
inline double soft_future(double q, double alpha, double prob) {
  return q - alpha * std::log(std::max(prob, 1e-300));
}

// Per-agent regression target: scaled reward plus discounted soft future
// value; terminal transitions do not bootstrap.
inline double soft_target(double reward, double scale, double gamma, bool done, double future) {
  return reward / scale + (done ? 0.0 : gamma * future);
}

struct UpdateStats {
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;  // mean policy entropy over agents and samples
};

// Multi-layer dense network helper. Parameters are named
// "<prefix>.W<l>"/"<prefix>.b<l>" for l in [1, layers]; hidden activations
// are LeakyReLU and the output is linear.
Var dense_forward(Tape& t, const ParamSet& params, const std::string& prefix, int layers,
                  Var input, double slope);
void add_dense_params(ParamSet& params, const std::string& prefix, int layers, int in_dim,
                      int hidden, int out_dim, Rng& rng);

// Copies values (not optimizer state) from src into dst; both must hold the
// same parameter names and shapes.
void copy_values(ParamSet& dst, const ParamSet& src);
// Polyak tracking: dst <- (1 - tau) * dst + tau * src.
void soft_update(ParamSet& dst, const ParamSet& src, double tau);

// The learner: one shared relational encoder inside every agent's critic,
// per-agent critic heads over [encoding ‖ one-hot other-agent actions], and
// per-agent dense policies over the raw observation vector.
class MarcLearner {
 public:
  MarcLearner(const SacConfig& cfg, const EncoderConfig& enc_cfg, const RelationSet& relations,
              const ObsSchema& schema, int num_agents, int num_actions, Rng& init_rng);

  const SacConfig& config() const { return cfg_; }
  int num_agents() const { return num_agents_; }
  int num_actions() const { return num_actions_; }
  const ObsSchema& schema() const { return schema_; }

  // Sampled (or greedy argmax) actions from the current policies. The
  // observation is padded/truncated to the trained input length, and agents
  // beyond the trained count reuse policies cyclically, so a checkpoint
  // evaluates on variants with a different entity/agent count.
  std::vector<int> act(const std::vector<double>& obs, Rng& rng, bool greedy = false,
                       int agent_count = -1) const;
  std::vector<double> policy_probs(int agent, const std::vector<double>& obs) const;

  void observe(Transition t);  // stores the transition, tracks return stats
  size_t buffer_size() const { return buffer_.size(); }
  bool ready() const { return static_cast<int>(buffer_.size()) >= cfg_.batch_size; }
  // One update round: updates_per_interval x (critic + policy on a fresh
  // batch), then one soft update of all targets.
  UpdateStats update_round(Rng& rng);

  double reward_scale() const;
  Encoder& encoder() { return *encoder_; }
  const Encoder& encoder() const { return *encoder_; }

  // Checkpoint surface: every named parameter set, online and target.
  std::vector<std::pair<std::string, ParamSet*>> named_param_sets();

  RunningStat& return_stat() { return return_stat_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  // Objective probes for gradient verification: loss values and analytic
  // parameter gradients on explicit buffer indices, with no optimizer step.
  // The update path drives the exact same passes.
  using GradMap = std::map<const Matrix*, Matrix>;
  Matrix target_probe(const std::vector<size_t>& idx, uint64_t sample_seed) const;
  double critic_loss_probe(const std::vector<size_t>& idx, const Matrix& y,
                           GradMap* grads = nullptr) const;
  double policy_loss_probe(const std::vector<size_t>& idx, uint64_t action_seed,
                           GradMap* grads = nullptr) const;

 private:
  struct Batch {
    std::vector<size_t> idx;
    Matrix obs;       // obs_len x B
    Matrix next_obs;  // obs_len x B
    std::vector<RelationalGraph> graphs, next_graphs;
    std::vector<const RelationalGraph*> graph_ptrs, next_graph_ptrs;
  };
  Batch assemble(const std::vector<size_t>& idx) const;
  RelationalGraph graph_of(const std::vector<double>& obs) const;
  Matrix target_y(const Batch& b, Rng& rng) const;  // num_agents x B
  double critic_pass(const Batch& b, const Matrix& y, GradMap* grads) const;
  std::pair<double, double> policy_pass(const Batch& b, Rng& rng, GradMap* grads) const;
  double critic_update(const Batch& b, const Matrix& y);
  std::pair<double, double> policy_update(const Batch& b, Rng& rng);  // loss, entropy
  Var critic_head(Tape& t, const ParamSet& params, int agent, Var encoding,
                  const std::vector<std::vector<int>>& actions) const;
  Matrix policy_probs_batch(const ParamSet& params, int agent, const Matrix& obs) const;

  SacConfig cfg_;
  ObsSchema schema_;
  int num_agents_;
  int num_actions_;
  RelationSet relations_;
  std::unique_ptr<Encoder> encoder_, target_encoder_;
  std::vector<ParamSet> critic_, target_critic_;  // heads, per agent
  std::vector<ParamSet> policy_, target_policy_;
  ReplayBuffer buffer_;
  RunningStat return_stat_;
  std::vector<double> episode_return_;  // per agent, running
};

// CDF-inversion categorical sample; deterministic for a given engine state.
int sample_categorical(const std::vector<double>& probs, Rng& rng);

}  // namespace marc
