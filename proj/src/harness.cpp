#include "marc/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace marc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Logging

LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("MARC_LOG_LEVEL");
    const std::string v = env ? env : "info";
    if (v == "debug") return LogLevel::kDebug;
    if (v == "info") return LogLevel::kInfo;
    if (v == "warn") return LogLevel::kWarn;
    if (v == "error") return LogLevel::kError;
    std::cerr << "[warn] unknown MARC_LOG_LEVEL '" << v << "', using info\n";
    return LogLevel::kInfo;
  }();
  return level;
}

void log(LogLevel level, const std::string& msg) {
  if (level < log_level()) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

std::string format_double(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, p);
}

// ---------------------------------------------------------------------------
// KeyValues

namespace {
std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace

KeyValues KeyValues::from_string(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no += 1;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

void KeyValues::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool KeyValues::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValues::get_str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  read_[key] = true;
  return it->second;
}

int KeyValues::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  read_[key] = true;
  try {
    size_t pos = 0;
    // parse as double first so "1e5" works for counts
    const double d = std::stod(it->second, &pos);
    if (pos != it->second.size() || d != std::floor(d))
      throw std::invalid_argument("not an integer");
    return static_cast<int>(d);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': '" + it->second + "' is not an integer");
  }
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  read_[key] = true;
  try {
    size_t pos = 0;
    const double d = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': '" + it->second + "' is not a number");
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  read_[key] = true;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::invalid_argument("config key '" + key + "': '" + it->second + "' is not a boolean");
}

std::vector<std::string> KeyValues::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!read_.count(k)) out.push_back(k);
  return out;
}

// ---------------------------------------------------------------------------
// RunConfig resolution

RunConfig resolve_run_config(const KeyValues& kv) {
  RunConfig c;
  c.env.name = kv.get_str("env.name", c.env.name);
  c.env.width = kv.get_int("env.width", c.env.width);
  c.env.height = kv.get_int("env.height", c.env.height);
  c.env.step_limit = kv.get_int("env.step_limit", c.env.step_limit);
  c.env.cpp_pickers = kv.get_int("env.cpp_pickers", c.env.cpp_pickers);
  c.env.cpp_droppers = kv.get_int("env.cpp_droppers", c.env.cpp_droppers);
  c.env.cpp_boxes = kv.get_int("env.cpp_boxes", c.env.cpp_boxes);
  c.env.cpp_goals = kv.get_int("env.cpp_goals", c.env.cpp_goals);
  c.env.cpp_step_penalty = kv.get_double("env.cpp_step_penalty", c.env.cpp_step_penalty);
  c.env.cpp_pass_reward = kv.get_double("env.cpp_pass_reward", c.env.cpp_pass_reward);
  c.env.cpp_repeat_pass_penalty =
      kv.get_double("env.cpp_repeat_pass_penalty", c.env.cpp_repeat_pass_penalty);
  c.env.cpp_completion_bonus = kv.get_double("env.cpp_completion_bonus", c.env.cpp_completion_bonus);
  c.env.lbf_agents = kv.get_int("env.lbf_agents", c.env.lbf_agents);
  c.env.lbf_fruits = kv.get_int("env.lbf_fruits", c.env.lbf_fruits);
  c.env.lbf_coop = kv.get_bool("env.lbf_coop", c.env.lbf_coop);
  c.env.lbf_max_agent_level = kv.get_int("env.lbf_max_agent_level", c.env.lbf_max_agent_level);
  c.env.wolf_predators = kv.get_int("env.wolf_predators", c.env.wolf_predators);
  c.env.wolf_prey = kv.get_int("env.wolf_prey", c.env.wolf_prey);
  c.env.wolf_capture_base = kv.get_double("env.wolf_capture_base", c.env.wolf_capture_base);
  c.env.target_agents = kv.get_int("env.target_agents", c.env.target_agents);
  c.env.target_obstacles = kv.get_int("env.target_obstacles", c.env.target_obstacles);
  c.env.target_dt = kv.get_double("env.target_dt", c.env.target_dt);
  c.env.target_damping = kv.get_double("env.target_damping", c.env.target_damping);
  c.env.target_max_speed = kv.get_double("env.target_max_speed", c.env.target_max_speed);
  c.env.target_accel = kv.get_double("env.target_accel", c.env.target_accel);
  c.env.target_agent_radius = kv.get_double("env.target_agent_radius", c.env.target_agent_radius);
  c.env.target_obstacle_radius =
      kv.get_double("env.target_obstacle_radius", c.env.target_obstacle_radius);
  c.env.target_obstacle_speed =
      kv.get_double("env.target_obstacle_speed", c.env.target_obstacle_speed);
  c.env.target_collision_penalty =
      kv.get_double("env.target_collision_penalty", c.env.target_collision_penalty);
  c.env.target_distance_weight =
      kv.get_double("env.target_distance_weight", c.env.target_distance_weight);
  c.env.target_world_half_width =
      kv.get_double("env.target_world_half_width", c.env.target_world_half_width);

  c.sac.gamma = kv.get_double("train.gamma", c.sac.gamma);
  c.sac.tau = kv.get_double("train.tau", c.sac.tau);
  c.sac.alpha = kv.get_double("train.alpha", c.sac.alpha);
  c.sac.lr = kv.get_double("train.lr", c.sac.lr);
  c.sac.batch_size = kv.get_int("train.batch_size", c.sac.batch_size);
  c.sac.update_interval = kv.get_int("train.update_interval", c.sac.update_interval);
  c.sac.updates_per_interval = kv.get_int("train.updates_per_interval", c.sac.updates_per_interval);
  c.sac.hidden = kv.get_int("train.hidden", c.sac.hidden);
  c.sac.policy_layers = kv.get_int("train.policy_layers", c.sac.policy_layers);
  c.sac.critic_head_layers = kv.get_int("train.critic_head_layers", c.sac.critic_head_layers);
  c.sac.buffer_capacity = kv.get_int("train.buffer_capacity", c.sac.buffer_capacity);
  c.sac.reward_normalization = kv.get_bool("train.reward_normalization", c.sac.reward_normalization);
  c.sac.sampled_policy_gradient =
      kv.get_bool("train.sampled_policy_gradient", c.sac.sampled_policy_gradient);
  c.sac.sample_next_action = kv.get_bool("train.sample_next_action", c.sac.sample_next_action);
  c.sac.full_grid_entities = kv.get_bool("train.full_grid_entities", c.sac.full_grid_entities);

  c.encoder.arch = kv.get_str("encoder.arch", c.encoder.arch);
  c.encoder.layers = kv.get_int("encoder.layers", c.encoder.layers);
  c.encoder.embed_dim = kv.get_int("encoder.embed_dim", c.encoder.embed_dim);
  c.encoder.leaky_slope = kv.get_double("encoder.leaky_slope", c.encoder.leaky_slope);
  c.encoder.rgat_self_loop = kv.get_bool("encoder.rgat_self_loop", c.encoder.rgat_self_loop);

  const std::string default_preset = c.env.name == "target" ? "continuous-default" : "default";
  c.relation_preset = kv.get_str("relations.preset", default_preset);
  c.relation_options.adjacency_verbatim_or =
      kv.get_bool("relations.adjacency_verbatim_or", c.relation_options.adjacency_verbatim_or);
  c.relation_options.aligned_row_or_col =
      kv.get_bool("relations.aligned_row_or_col", c.relation_options.aligned_row_or_col);
  c.relation_options.continuous_adjacency_rho =
      kv.get_double("relations.rho", c.relation_options.continuous_adjacency_rho);

  c.seed = static_cast<unsigned long long>(kv.get_double("run.seed", static_cast<double>(c.seed)));
  c.total_steps = static_cast<long long>(kv.get_double("run.total_steps", static_cast<double>(c.total_steps)));
  c.log_interval = kv.get_int("run.log_interval", c.log_interval);
  c.return_window = kv.get_int("run.return_window", c.return_window);
  if (kv.has("run.stop_return")) c.stop_return = kv.get_double("run.stop_return", 0.0);
  c.out_dir = kv.get_str("run.out_dir", c.out_dir);

  const auto unread = kv.unread_keys();
  if (!unread.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unread) msg += " " + k;
    throw std::invalid_argument(msg);
  }
  return c;
}

namespace {
std::map<std::string, std::string> config_entries(const RunConfig& c) {
  std::map<std::string, std::string> m;
  auto d = [](double v) { return format_double(v); };
  m["env.name"] = c.env.name;
  m["env.width"] = std::to_string(c.env.width);
  m["env.height"] = std::to_string(c.env.height);
  m["env.step_limit"] = std::to_string(c.env.step_limit);
  m["env.cpp_pickers"] = std::to_string(c.env.cpp_pickers);
  m["env.cpp_droppers"] = std::to_string(c.env.cpp_droppers);
  m["env.cpp_boxes"] = std::to_string(c.env.cpp_boxes);
  m["env.cpp_goals"] = std::to_string(c.env.cpp_goals);
  m["env.cpp_step_penalty"] = d(c.env.cpp_step_penalty);
  m["env.cpp_pass_reward"] = d(c.env.cpp_pass_reward);
  m["env.cpp_repeat_pass_penalty"] = d(c.env.cpp_repeat_pass_penalty);
  m["env.cpp_completion_bonus"] = d(c.env.cpp_completion_bonus);
  m["env.lbf_agents"] = std::to_string(c.env.lbf_agents);
  m["env.lbf_fruits"] = std::to_string(c.env.lbf_fruits);
  m["env.lbf_coop"] = c.env.lbf_coop ? "true" : "false";
  m["env.lbf_max_agent_level"] = std::to_string(c.env.lbf_max_agent_level);
  m["env.wolf_predators"] = std::to_string(c.env.wolf_predators);
  m["env.wolf_prey"] = std::to_string(c.env.wolf_prey);
  m["env.wolf_capture_base"] = d(c.env.wolf_capture_base);
  m["env.target_agents"] = std::to_string(c.env.target_agents);
  m["env.target_obstacles"] = std::to_string(c.env.target_obstacles);
  m["env.target_dt"] = d(c.env.target_dt);
  m["env.target_damping"] = d(c.env.target_damping);
  m["env.target_max_speed"] = d(c.env.target_max_speed);
  m["env.target_accel"] = d(c.env.target_accel);
  m["env.target_agent_radius"] = d(c.env.target_agent_radius);
  m["env.target_obstacle_radius"] = d(c.env.target_obstacle_radius);
  m["env.target_obstacle_speed"] = d(c.env.target_obstacle_speed);
  m["env.target_collision_penalty"] = d(c.env.target_collision_penalty);
  m["env.target_distance_weight"] = d(c.env.target_distance_weight);
  m["env.target_world_half_width"] = d(c.env.target_world_half_width);
  m["train.gamma"] = d(c.sac.gamma);
  m["train.tau"] = d(c.sac.tau);
  m["train.alpha"] = d(c.sac.alpha);
  m["train.lr"] = d(c.sac.lr);
  m["train.batch_size"] = std::to_string(c.sac.batch_size);
  m["train.update_interval"] = std::to_string(c.sac.update_interval);
  m["train.updates_per_interval"] = std::to_string(c.sac.updates_per_interval);
  m["train.hidden"] = std::to_string(c.sac.hidden);
  m["train.policy_layers"] = std::to_string(c.sac.policy_layers);
  m["train.critic_head_layers"] = std::to_string(c.sac.critic_head_layers);
  m["train.buffer_capacity"] = std::to_string(c.sac.buffer_capacity);
  m["train.reward_normalization"] = c.sac.reward_normalization ? "true" : "false";
  m["train.sampled_policy_gradient"] = c.sac.sampled_policy_gradient ? "true" : "false";
  m["train.sample_next_action"] = c.sac.sample_next_action ? "true" : "false";
  m["train.full_grid_entities"] = c.sac.full_grid_entities ? "true" : "false";
  m["encoder.arch"] = c.encoder.arch;
  m["encoder.layers"] = std::to_string(c.encoder.layers);
  m["encoder.embed_dim"] = std::to_string(c.encoder.embed_dim);
  m["encoder.leaky_slope"] = d(c.encoder.leaky_slope);
  m["encoder.rgat_self_loop"] = c.encoder.rgat_self_loop ? "true" : "false";
  m["relations.preset"] = c.relation_preset;
  m["relations.adjacency_verbatim_or"] = c.relation_options.adjacency_verbatim_or ? "true" : "false";
  m["relations.aligned_row_or_col"] = c.relation_options.aligned_row_or_col ? "true" : "false";
  m["relations.rho"] = d(c.relation_options.continuous_adjacency_rho);
  m["run.seed"] = std::to_string(c.seed);
  m["run.total_steps"] = std::to_string(c.total_steps);
  m["run.log_interval"] = std::to_string(c.log_interval);
  m["run.return_window"] = std::to_string(c.return_window);
  if (c.stop_return) m["run.stop_return"] = d(*c.stop_return);
  m["run.out_dir"] = c.out_dir;
  return m;
}
}  // namespace

KeyValues config_to_kv(const RunConfig& cfg) {
  KeyValues kv;
  for (const auto& [k, v] : config_entries(cfg)) kv.set(k, v);
  return kv;
}

void write_resolved_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config to '" + path + "'");
  for (const auto& [k, v] : config_entries(cfg)) out << k << " = " << v << "\n";
}

RelationSet relations_for(const RunConfig& cfg) {
  return relation_preset(cfg.relation_preset, cfg.relation_options);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != static_cast<size_t>(m.rows) * m.cols)
    throw std::runtime_error("checkpoint: matrix data length does not match its shape");
  return m;
}
}  // namespace

void save_checkpoint(const std::string& path, MarcLearner& learner, const RunConfig& cfg,
                     long long env_step, const std::string& rng_state) {
  json j;
  j["format"] = "marc-checkpoint-v1";
  j["config"] = config_entries(cfg);
  j["env_step"] = env_step;
  j["rng_state"] = rng_state;
  j["num_agents"] = learner.num_agents();
  j["num_actions"] = learner.num_actions();
  j["return_stat"] = {{"count", learner.return_stat().count},
                      {"mean", learner.return_stat().mean},
                      {"m2", learner.return_stat().m2}};
  json sets = json::object();
  for (auto& [name, ps] : learner.named_param_sets()) {
    json arr = json::array();
    for (const auto& p : ps->all()) {
      json pj{{"name", p.name}, {"value", matrix_to_json(p.value)}, {"t", p.adam.t}};
      if (p.adam.t > 0) {
        pj["m"] = matrix_to_json(p.adam.m);
        pj["v"] = matrix_to_json(p.adam.v);
      }
      arr.push_back(std::move(pj));
    }
    sets[name] = std::move(arr);
  }
  j["param_sets"] = std::move(sets);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint to '" + path + "'");
  out << j.dump();
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  Checkpoint ck;
  ck.raw = buf.str();
  json j = json::parse(ck.raw);
  if (j.value("format", "") != "marc-checkpoint-v1")
    throw std::runtime_error("checkpoint '" + path + "' has unknown format '" +
                             j.value("format", "<missing>") + "'");
  KeyValues kv;
  for (auto& [k, v] : j.at("config").items()) kv.set(k, v.get<std::string>());
  ck.cfg = resolve_run_config(kv);
  ck.env_step = j.at("env_step").get<long long>();
  ck.rng_state = j.at("rng_state").get<std::string>();
  ck.num_agents = j.at("num_agents").get<int>();
  ck.num_actions = j.at("num_actions").get<int>();
  return ck;
}

std::unique_ptr<MarcLearner> Checkpoint::build() const {
  auto env = make_env(cfg.env);
  Rng init(sub_seed(cfg.seed, 0));
  auto learner = std::make_unique<MarcLearner>(cfg.sac, cfg.encoder, relations_for(cfg),
                                               env->schema(), num_agents, num_actions, init);
  json j = json::parse(raw);
  learner->return_stat().count = j.at("return_stat").at("count").get<long long>();
  learner->return_stat().mean = j.at("return_stat").at("mean").get<double>();
  learner->return_stat().m2 = j.at("return_stat").at("m2").get<double>();
  const json& sets = j.at("param_sets");
  for (auto& [name, ps] : learner->named_param_sets()) {
    const json& arr = sets.at(name);
    size_t k = 0;
    for (auto& p : ps->all()) {
      if (k >= arr.size()) throw std::runtime_error("checkpoint: param set '" + name + "' too short");
      const json& pj = arr[k++];
      if (pj.at("name").get<std::string>() != p.name)
        throw std::runtime_error("checkpoint: expected parameter '" + p.name + "' in set '" + name +
                                 "', found '" + pj.at("name").get<std::string>() + "'");
      Matrix v = matrix_from_json(pj.at("value"));
      if (!v.same_shape(p.value))
        throw std::runtime_error("checkpoint: shape mismatch on '" + name + "." + p.name + "'");
      p.value = std::move(v);
      p.adam.t = pj.at("t").get<long>();
      if (p.adam.t > 0) {
        p.adam.m = matrix_from_json(pj.at("m"));
        p.adam.v = matrix_from_json(pj.at("v"));
      }
    }
  }
  return learner;
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult train_run(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  auto env = make_env(cfg.env);
  Rng init_rng(sub_seed(cfg.seed, 0));
  Rng env_rng(sub_seed(cfg.seed, 1));
  Rng act_rng(sub_seed(cfg.seed, 2));
  Rng update_rng(sub_seed(cfg.seed, 3));

  MarcLearner learner(cfg.sac, cfg.encoder, relations_for(cfg), env->schema(), env->num_agents(),
                      env->num_actions(), init_rng);

  const std::string metrics_path = cfg.out_dir + "/metrics.csv";
  std::ofstream metrics(metrics_path);
  if (!metrics) throw std::runtime_error("cannot write metrics to '" + metrics_path + "'");
  metrics << "env_step,episodes,return_mean,ep_len_mean,success_mean,critic_loss,policy_loss,entropy\n";

  std::deque<double> win_return, win_len, win_success;
  auto win_push = [&cfg](std::deque<double>& w, double v) {
    w.push_back(v);
    if (static_cast<int>(w.size()) > cfg.return_window) w.pop_front();
  };
  auto mean_of = [](const std::deque<double>& w) {
    if (w.empty()) return 0.0;
    double s = 0.0;
    for (double v : w) s += v;
    return s / w.size();
  };

  std::vector<double> obs = env->reset(env_rng);
  double ep_return = 0.0;
  long long ep_len = 0, episodes = 0;
  UpdateStats last{};
  TrainResult result;
  result.metrics_path = metrics_path;

  for (long long step = 1; step <= cfg.total_steps; ++step) {
    const std::vector<int> actions = learner.act(obs, act_rng);
    StepResult res = env->step(actions, env_rng);
    Transition tr;
    tr.obs = obs;
    tr.actions = actions;
    tr.rewards = res.rewards;
    tr.next_obs = res.obs;
    tr.done = res.done;
    tr.truncated = res.truncated;
    learner.observe(std::move(tr));

    double r_mean = 0.0;
    for (double r : res.rewards) r_mean += r;
    ep_return += r_mean / env->num_agents();
    ep_len += 1;
    obs = std::move(res.obs);

    if (res.done || res.truncated) {
      episodes += 1;
      win_push(win_return, ep_return);
      win_push(win_len, static_cast<double>(ep_len));
      win_push(win_success, res.success);
      ep_return = 0.0;
      ep_len = 0;
      obs = env->reset(env_rng);
    }

    if (step % cfg.sac.update_interval == 0 && learner.ready()) last = learner.update_round(update_rng);

    if (step % cfg.log_interval == 0) {
      metrics << step << "," << episodes << "," << format_double(mean_of(win_return)) << ","
              << format_double(mean_of(win_len)) << "," << format_double(mean_of(win_success)) << ","
              << format_double(last.critic_loss) << "," << format_double(last.policy_loss) << ","
              << format_double(last.entropy) << "\n";
    }
    if (step % 10000 == 0)
      log(LogLevel::kInfo, "step " + std::to_string(step) + "/" + std::to_string(cfg.total_steps) +
                               " episodes " + std::to_string(episodes) + " return " +
                               format_double(mean_of(win_return)));

    if (cfg.stop_return && static_cast<int>(win_return.size()) >= cfg.return_window &&
        mean_of(win_return) >= *cfg.stop_return) {
      result.stopped_early = true;
      result.env_steps = step;
      log(LogLevel::kInfo, "early stop at step " + std::to_string(step) + ": windowed return " +
                               format_double(mean_of(win_return)) + " reached " +
                               format_double(*cfg.stop_return));
      break;
    }
    result.env_steps = step;
  }

  result.episodes = episodes;
  result.final_return_mean = mean_of(win_return);
  result.checkpoint_path = cfg.out_dir + "/checkpoint.json";
  save_checkpoint(result.checkpoint_path, learner, cfg, result.env_steps, rng_to_string(env_rng));
  write_resolved_config(cfg, cfg.out_dir + "/config.resolved");
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {
template <typename ActFn>
EvalResult run_episodes(Env& env, int episodes, Rng& rng, ActFn act) {
  EvalResult res;
  res.episodes = episodes;
  std::vector<double> returns;
  for (int e = 0; e < episodes; ++e) {
    std::vector<double> obs = env.reset(rng);
    double ep_return = 0.0;
    double success = 0.0;
    while (true) {
      StepResult sr = env.step(act(obs), rng);
      double r = 0.0;
      for (double v : sr.rewards) r += v;
      ep_return += r / env.num_agents();
      success = sr.success;
      obs = std::move(sr.obs);
      if (sr.done || sr.truncated) break;
    }
    returns.push_back(ep_return);
    res.success_mean += success;
  }
  res.success_mean /= episodes;
  double m = 0.0;
  for (double r : returns) m += r;
  m /= returns.size();
  double var = 0.0;
  for (double r : returns) var += (r - m) * (r - m);
  res.return_mean = m;
  res.return_std = returns.size() > 1 ? std::sqrt(var / (returns.size() - 1)) : 0.0;
  return res;
}
}  // namespace

EvalResult evaluate(MarcLearner& learner, Env& env, int episodes, Rng& rng, bool greedy) {
  return run_episodes(env, episodes, rng, [&](const std::vector<double>& obs) {
    return learner.act(obs, rng, greedy, env.num_agents());
  });
}

EvalResult random_baseline(const EnvConfig& env_cfg, int episodes, unsigned long long seed) {
  auto env = make_env(env_cfg);
  Rng rng(sub_seed(seed, 7));
  std::uniform_int_distribution<int> d(0, env->num_actions() - 1);
  return run_episodes(*env, episodes, rng, [&](const std::vector<double>&) {
    std::vector<int> a(env->num_agents());
    for (int& x : a) x = d(rng);
    return a;
  });
}

// ---------------------------------------------------------------------------
// Aggregation and plotting

namespace {
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path + "' is empty");
  std::istringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) csv.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != csv.header.size())
      throw std::runtime_error("'" + path + "': ragged row with " + std::to_string(row.size()) +
                               " cells");
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

size_t column_index(const Csv& csv, const std::string& name, const std::string& path) {
  for (size_t i = 0; i < csv.header.size(); ++i)
    if (csv.header[i] == name) return i;
  throw std::runtime_error("'" + path + "' has no column '" + name + "'");
}
}  // namespace

void aggregate_metrics(const std::vector<std::string>& csv_paths, const std::string& column,
                       const std::string& out_path) {
  if (csv_paths.empty()) throw std::invalid_argument("aggregate: no input files");
  std::map<long long, std::vector<double>> by_step;
  for (const auto& path : csv_paths) {
    Csv csv = read_csv(path);
    const size_t step_col = column_index(csv, "env_step", path);
    const size_t val_col = column_index(csv, column, path);
    for (const auto& row : csv.rows)
      by_step[static_cast<long long>(row[step_col])].push_back(row[val_col]);
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  out << "env_step,mean,lo,hi,n\n";
  for (const auto& [step, vals] : by_step) {
    if (vals.size() != csv_paths.size()) continue;  // keep steps present in every run
    double m = 0.0;
    for (double v : vals) m += v;
    m /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - m) * (v - m);
    const double sd = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1)) : 0.0;
    const double ci = vals.size() > 1 ? 1.96 * sd / std::sqrt(static_cast<double>(vals.size())) : 0.0;
    out << step << "," << format_double(m) << "," << format_double(m - ci) << ","
        << format_double(m + ci) << "," << vals.size() << "\n";
  }
}

void write_svg_plot(const std::string& aggregate_csv, const std::string& out_path,
                    const std::string& title) {
  Csv csv = read_csv(aggregate_csv);
  const size_t sc = column_index(csv, "env_step", aggregate_csv);
  const size_t mc = column_index(csv, "mean", aggregate_csv);
  const size_t lc = column_index(csv, "lo", aggregate_csv);
  const size_t hc = column_index(csv, "hi", aggregate_csv);
  if (csv.rows.empty()) throw std::runtime_error("plot: '" + aggregate_csv + "' has no data rows");

  double xmin = csv.rows.front()[sc], xmax = csv.rows.back()[sc];
  double ymin = csv.rows.front()[lc], ymax = csv.rows.front()[hc];
  for (const auto& r : csv.rows) {
    ymin = std::min(ymin, r[lc]);
    ymax = std::max(ymax, r[hc]);
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double W = 640, H = 400, ml = 70, mr = 20, mt = 40, mb = 50;
  auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto Y = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };
  auto pt = [&](double x, double y) { return format_double(X(x)) + "," + format_double(Y(y)) + " "; };

  std::string band, line;
  for (const auto& r : csv.rows) band += pt(r[sc], r[hc]);
  for (auto it = csv.rows.rbegin(); it != csv.rows.rend(); ++it) band += pt((*it)[sc], (*it)[lc]);
  for (const auto& r : csv.rows) line += pt(r[sc], r[mc]);

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
      << "</text>\n"
      << "<polygon points=\"" << band << "\" fill=\"#4c72b0\" fill-opacity=\"0.25\" stroke=\"none\"/>\n"
      << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"1.5\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << ml << "\" y=\"" << H - mb + 20 << "\" font-size=\"12\">"
      << format_double(xmin) << "</text>\n"
      << "<text x=\"" << W - mr << "\" y=\"" << H - mb + 20
      << "\" text-anchor=\"end\" font-size=\"12\">" << format_double(xmax) << "</text>\n"
      << "<text x=\"" << ml - 6 << "\" y=\"" << H - mb << "\" text-anchor=\"end\" font-size=\"12\">"
      << format_double(ymin) << "</text>\n"
      << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4 << "\" text-anchor=\"end\" font-size=\"12\">"
      << format_double(ymax) << "</text>\n"
      << "<text x=\"" << (W + ml - mr) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">environment steps</text>\n"
      << "</svg>\n";
}

}  // namespace marc
