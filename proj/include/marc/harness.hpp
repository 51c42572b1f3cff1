#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "marc/env.hpp"
#include "marc/sac.hpp"

namespace marc {

// ---------------------------------------------------------------------------
// Logging (level from MARC_LOG_LEVEL: debug|info|warn|error, default info)

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };
LogLevel log_level();
void log(LogLevel level, const std::string& msg);

// ---------------------------------------------------------------------------
// key = value configuration files ('#' comments, dotted keys)

class KeyValues {
 public:
  static KeyValues from_file(const std::string& path);
  static KeyValues from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Keys that were never read by any getter; used to reject typos.
  std::vector<std::string> unread_keys() const;
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> read_;
};

struct RunConfig {
  EnvConfig env;
  SacConfig sac;
  EncoderConfig encoder;
  std::string relation_preset = "default";  // continuous envs default to continuous-default
  RelationOptions relation_options;
  unsigned long long seed = 1;
  long long total_steps = 300000;
  int log_interval = 100;      // env steps between metrics rows
  int return_window = 100;     // episodes in the running return mean
  // Optional early stop: halt once the windowed mean return reaches this.
  std::optional<double> stop_return;
  std::string out_dir = "runs/run";
};

RunConfig resolve_run_config(const KeyValues& kv);
// Inverse of resolve_run_config; round-trips every field.
KeyValues config_to_kv(const RunConfig& cfg);
void write_resolved_config(const RunConfig& cfg, const std::string& path);
RelationSet relations_for(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Checkpoints (JSON, exact double round-trip)

void save_checkpoint(const std::string& path, MarcLearner& learner, const RunConfig& cfg,
                     long long env_step, const std::string& rng_state);

struct Checkpoint {
  RunConfig cfg;
  long long env_step = 0;
  std::string rng_state;
  int num_agents = 0;
  int num_actions = 0;
  // Builds a learner with restored parameters, optimizer moments and return
  // statistics.
  std::unique_ptr<MarcLearner> build() const;

  std::string raw;  // retained JSON payload
};
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Training and evaluation

struct TrainResult {
  long long env_steps = 0;
  long long episodes = 0;
  double final_return_mean = 0.0;  // windowed mean at the end
  bool stopped_early = false;
  std::string metrics_path;
  std::string checkpoint_path;
};

// Runs the full loop: act, store, update every update_interval steps, metrics
// row every log_interval steps, checkpoint and resolved config at the end.
// Deterministic for a fixed config (byte-identical metrics file).
TrainResult train_run(const RunConfig& cfg);

struct EvalResult {
  double return_mean = 0.0;  // per-agent mean episode return, averaged
  double return_std = 0.0;   // std across episodes
  double success_mean = 0.0;
  long long episodes = 0;
};

EvalResult evaluate(MarcLearner& learner, Env& env, int episodes, Rng& rng, bool greedy = true);
// Uniform-random actions; the oracle baseline that smoke learning must beat.
EvalResult random_baseline(const EnvConfig& env_cfg, int episodes, unsigned long long seed);

// ---------------------------------------------------------------------------
// Metrics aggregation and plotting

// Aligns metrics CSVs by env_step and writes step,mean,lo,hi with a 95%
// confidence band (1.96 * std / sqrt(n); the band collapses for n = 1).
void aggregate_metrics(const std::vector<std::string>& csv_paths, const std::string& column,
                       const std::string& out_path);
// Mean polyline plus confidence polygon, written as a standalone SVG.
void write_svg_plot(const std::string& aggregate_csv, const std::string& out_path,
                    const std::string& title);

std::string format_double(double v);  // shortest exact round-trip decimal

}  // namespace marc
