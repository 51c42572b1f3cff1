#include "marc/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace marc {

namespace {

constexpr int kUp = 0, kDown = 1, kLeft = 2, kRight = 3;

struct Cell {
  int x = 0, y = 0;
};

int dx_of(int action) { return action == kLeft ? -1 : action == kRight ? 1 : 0; }
int dy_of(int action) { return action == kUp ? 1 : action == kDown ? -1 : 0; }

void check_actions(const std::vector<int>& actions, int n_agents, int n_actions) {
  if (static_cast<int>(actions.size()) != n_agents)
    throw std::invalid_argument("step: expected " + std::to_string(n_agents) + " actions, got " +
                                std::to_string(actions.size()));
  for (int a : actions)
    if (a < 0 || a >= n_actions)
      throw std::invalid_argument("step: action index " + std::to_string(a) + " outside [0," +
                                  std::to_string(n_actions) + ")");
}

// Distinct random cells, uniformly without replacement.
std::vector<Cell> place_distinct(int count, int width, int height, Rng& rng) {
  const int cells = width * height;
  if (count > cells)
    throw std::invalid_argument("reset: " + std::to_string(count) + " entities do not fit on a " +
                                std::to_string(width) + "x" + std::to_string(height) + " grid");
  std::vector<int> idx(cells);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> d(i, cells - 1);
    std::swap(idx[i], idx[d(rng)]);
  }
  std::vector<Cell> out(count);
  for (int i = 0; i < count; ++i) out[i] = {idx[i] % width, idx[i] / width};
  return out;
}

// Simultaneous grid movement: a move succeeds iff the target is in bounds,
// not blocked, not occupied by any agent's current cell, and not targeted by
// another mover. Conflicting moves all cancel.
void resolve_moves(std::vector<Cell>& agents, const std::vector<int>& actions,
                   const std::function<bool(int, int)>& blocked, int width, int height) {
  const int n = static_cast<int>(agents.size());
  std::vector<Cell> want(n);
  std::vector<bool> moving(n, false);
  for (int i = 0; i < n; ++i) {
    want[i] = agents[i];
    if (actions[i] > kRight) continue;
    const int tx = agents[i].x + dx_of(actions[i]);
    const int ty = agents[i].y + dy_of(actions[i]);
    if (tx < 0 || ty < 0 || tx >= width || ty >= height) continue;
    if (blocked(tx, ty)) continue;
    bool occupied = false;
    for (int j = 0; j < n; ++j)
      if (j != i && agents[j].x == tx && agents[j].y == ty) occupied = true;
    if (occupied) continue;
    want[i] = {tx, ty};
    moving[i] = true;
  }
  for (int i = 0; i < n; ++i) {
    if (!moving[i]) continue;
    for (int j = 0; j < n; ++j)
      if (j != i && moving[j] && want[j].x == want[i].x && want[j].y == want[i].y) {
        moving[i] = false;
        break;
      }
  }
  for (int i = 0; i < n; ++i)
    if (moving[i]) agents[i] = want[i];
}

bool orth_adjacent(const Cell& a, const Cell& b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y) == 1;
}

// ---------------------------------------------------------------------------
// Collaborative Pick and Place

class CppEnv : public Env {
 public:
  explicit CppEnv(const EnvConfig& cfg) : cfg_(cfg) {
    if (cfg.cpp_pickers < 1 || cfg.cpp_droppers < 1)
      throw std::invalid_argument("cpp: needs at least one picker and one delivery agent");
    if (cfg.step_limit < 1) throw std::invalid_argument("cpp: step limit must be positive");
    schema_.roles = {{"picker", cfg.cpp_pickers},
                     {"delivery", cfg.cpp_droppers},
                     {"box", cfg.cpp_boxes},
                     {"goal", cfg.cpp_goals}};
    schema_.feature_width = 7;  // is_agent is_box is_goal is_picker is_delivery carrying is_empty
    schema_.empty_feature_index = 6;
    schema_.grid = true;
    schema_.grid_width = cfg.width;
    schema_.grid_height = cfg.height;
  }

  const ObsSchema& schema() const override { return schema_; }
  int num_agents() const override { return cfg_.cpp_pickers + cfg_.cpp_droppers; }
  int num_actions() const override { return 6; }  // up down left right pass wait

  std::vector<double> reset(Rng& rng) override {
    const int n_agents = num_agents();
    auto cells = place_distinct(n_agents + cfg_.cpp_boxes + cfg_.cpp_goals, cfg_.width, cfg_.height, rng);
    agents_.assign(n_agents, {});
    for (int i = 0; i < n_agents; ++i) agents_[i] = {cells[i], i < cfg_.cpp_pickers, -1};
    boxes_.assign(cfg_.cpp_boxes, {});
    for (int i = 0; i < cfg_.cpp_boxes; ++i) boxes_[i].pos = cells[n_agents + i];
    goals_.assign(cfg_.cpp_goals, {});
    for (int i = 0; i < cfg_.cpp_goals; ++i) goals_[i].pos = cells[n_agents + cfg_.cpp_boxes + i];
    step_ = 0;
    delivered_ = 0;
    return observe();
  }

  StepResult step(const std::vector<int>& actions, Rng&) override {
    const int n = num_agents();
    check_actions(actions, n, num_actions());
    StepResult res;
    res.rewards.assign(n, cfg_.cpp_step_penalty);

    std::vector<Cell> pos(n);
    for (int i = 0; i < n; ++i) pos[i] = agents_[i].pos;
    resolve_moves(pos, actions, [](int, int) { return false; }, cfg_.width, cfg_.height);
    for (int i = 0; i < n; ++i) agents_[i].pos = pos[i];
    for (auto& b : boxes_)
      if (b.carried_by >= 0) b.pos = agents_[b.carried_by].pos;

    // Passes: picker -> adjacent empty-handed delivery agent.
    for (int i = 0; i < n; ++i) {
      if (actions[i] != 4) continue;
      if (!agents_[i].picker || agents_[i].carrying < 0) continue;
      int receiver = -1;
      for (int j = 0; j < n; ++j)
        if (!agents_[j].picker && agents_[j].carrying < 0 && orth_adjacent(agents_[i].pos, agents_[j].pos)) {
          receiver = j;
          break;
        }
      if (receiver < 0) continue;
      const int b = agents_[i].carrying;
      agents_[i].carrying = -1;
      agents_[receiver].carrying = b;
      boxes_[b].carried_by = receiver;
      boxes_[b].pos = agents_[receiver].pos;
      const double r = boxes_[b].passes == 0 ? cfg_.cpp_pass_reward : cfg_.cpp_repeat_pass_penalty;
      boxes_[b].passes += 1;
      res.rewards[i] += r;
      res.rewards[receiver] += r;
    }

    // Auto-pickup for empty-handed pickers standing on a free box.
    for (int i = 0; i < n; ++i) {
      if (!agents_[i].picker || agents_[i].carrying >= 0) continue;
      for (int b = 0; b < static_cast<int>(boxes_.size()); ++b)
        if (boxes_[b].carried_by < 0 && !boxes_[b].delivered && boxes_[b].pos.x == agents_[i].pos.x &&
            boxes_[b].pos.y == agents_[i].pos.y) {
          agents_[i].carrying = b;
          boxes_[b].carried_by = i;
          break;
        }
    }

    // Auto-drop on a free goal, which locks it.
    for (int i = 0; i < n; ++i) {
      if (agents_[i].picker || agents_[i].carrying < 0) continue;
      for (auto& g : goals_)
        if (!g.locked && g.pos.x == agents_[i].pos.x && g.pos.y == agents_[i].pos.y) {
          const int b = agents_[i].carrying;
          agents_[i].carrying = -1;
          boxes_[b].carried_by = -1;
          boxes_[b].delivered = true;
          boxes_[b].pos = g.pos;
          g.locked = true;
          delivered_ += 1;
          break;
        }
    }

    step_ += 1;
    if (delivered_ == static_cast<int>(boxes_.size())) {
      for (double& r : res.rewards) r += cfg_.cpp_completion_bonus;
      res.done = true;
    } else if (step_ >= cfg_.step_limit) {
      res.truncated = true;
    }
    res.success = boxes_.empty() ? 1.0 : static_cast<double>(delivered_) / boxes_.size();
    res.obs = observe();
    return res;
  }

 private:
  struct Agent {
    Cell pos;
    bool picker = false;
    int carrying = -1;
  };
  struct Box {
    Cell pos;
    int carried_by = -1;
    bool delivered = false;
    int passes = 0;
  };
  struct Goal {
    Cell pos;
    bool locked = false;
  };

  std::vector<double> observe() const {
    std::vector<double> o;
    o.reserve(schema_.obs_length());
    auto put = [&o](double x, double y, std::initializer_list<double> f) {
      o.push_back(x);
      o.push_back(y);
      o.insert(o.end(), f);
    };
    for (const auto& a : agents_)
      put(a.pos.x, a.pos.y,
          {1, 0, 0, a.picker ? 1.0 : 0.0, a.picker ? 0.0 : 1.0, a.carrying >= 0 ? 1.0 : 0.0, 0});
    for (const auto& b : boxes_) put(b.pos.x, b.pos.y, {0, 1, 0, 0, 0, 0, 0});
    for (const auto& g : goals_) put(g.pos.x, g.pos.y, {0, 0, 1, 0, 0, 0, 0});
    return o;
  }

  EnvConfig cfg_;
  ObsSchema schema_;
  std::vector<Agent> agents_;
  std::vector<Box> boxes_;
  std::vector<Goal> goals_;
  int step_ = 0;
  int delivered_ = 0;
};

// ---------------------------------------------------------------------------
// Level-Based Foraging with trees

class LbfEnv : public Env {
 public:
  explicit LbfEnv(const EnvConfig& cfg) : cfg_(cfg) {
    if (cfg.lbf_agents < 1 || cfg.lbf_fruits < 0) throw std::invalid_argument("lbf: bad counts");
    schema_.roles = {{"agent", cfg.lbf_agents}, {"fruit", cfg.lbf_fruits}};
    schema_.feature_width = 5;  // is_agent is_fruit is_tree level is_empty
    schema_.empty_feature_index = 4;
    schema_.grid = true;
    schema_.grid_width = cfg.width;
    schema_.grid_height = cfg.height;
  }

  const ObsSchema& schema() const override { return schema_; }
  int num_agents() const override { return cfg_.lbf_agents; }
  int num_actions() const override { return 6; }  // up down left right load noop

  std::vector<double> reset(Rng& rng) override {
    auto cells = place_distinct(cfg_.lbf_agents + cfg_.lbf_fruits, cfg_.width, cfg_.height, rng);
    agents_.assign(cfg_.lbf_agents, {});
    std::uniform_int_distribution<int> lvl(1, cfg_.lbf_max_agent_level);
    int level_sum = 0, level_max = 0;
    for (int i = 0; i < cfg_.lbf_agents; ++i) {
      agents_[i].pos = cells[i];
      agents_[i].level = lvl(rng);
      level_sum += agents_[i].level;
      level_max = std::max(level_max, agents_[i].level);
    }
    fruits_.assign(cfg_.lbf_fruits, {});
    initial_fruit_level_sum_ = 0;
    for (int i = 0; i < cfg_.lbf_fruits; ++i) {
      fruits_[i].pos = cells[cfg_.lbf_agents + i];
      if (cfg_.lbf_coop) {
        const int lo = std::min(level_max + 1, level_sum);
        std::uniform_int_distribution<int> fl(lo, level_sum);
        fruits_[i].level = fl(rng);
      } else {
        std::uniform_int_distribution<int> fl(1, std::max(1, level_max));
        fruits_[i].level = fl(rng);
      }
      initial_fruit_level_sum_ += fruits_[i].level;
    }
    step_ = 0;
    episode_return_ = 0.0;
    return observe();
  }

  StepResult step(const std::vector<int>& actions, Rng&) override {
    const int n = num_agents();
    check_actions(actions, n, num_actions());
    StepResult res;
    res.rewards.assign(n, 0.0);

    std::vector<Cell> pos(n);
    for (int i = 0; i < n; ++i) pos[i] = agents_[i].pos;
    auto blocked = [this](int x, int y) {
      for (const auto& f : fruits_)
        if (f.pos.x == x && f.pos.y == y) return true;  // fruit or tree
      return false;
    };
    resolve_moves(pos, actions, blocked, cfg_.width, cfg_.height);
    for (int i = 0; i < n; ++i) agents_[i].pos = pos[i];

    // Cooperative loading: adjacent agents issuing "load" pool their levels.
    for (auto& f : fruits_) {
      if (f.collected) continue;
      std::vector<int> loaders;
      int level_sum = 0;
      for (int i = 0; i < n; ++i)
        if (actions[i] == 4 && orth_adjacent(agents_[i].pos, f.pos)) {
          loaders.push_back(i);
          level_sum += agents_[i].level;
        }
      if (loaders.empty() || level_sum < f.level) continue;
      f.collected = true;  // the cell becomes a tree
      for (int i : loaders) {
        const double r = (static_cast<double>(agents_[i].level) / level_sum) *
                         (static_cast<double>(f.level) / initial_fruit_level_sum_);
        res.rewards[i] += r;
        episode_return_ += r;
      }
    }

    step_ += 1;
    bool all = true;
    for (const auto& f : fruits_) all = all && f.collected;
    if (all && !fruits_.empty())
      res.done = true;
    else if (step_ >= cfg_.step_limit)
      res.truncated = true;
    res.success = episode_return_;
    res.obs = observe();
    return res;
  }

 private:
  struct Agent {
    Cell pos;
    int level = 1;
  };
  struct Fruit {
    Cell pos;
    int level = 1;
    bool collected = false;
  };

  std::vector<double> observe() const {
    std::vector<double> o;
    o.reserve(schema_.obs_length());
    for (const auto& a : agents_) {
      o.insert(o.end(), {static_cast<double>(a.pos.x), static_cast<double>(a.pos.y), 1, 0, 0,
                         static_cast<double>(a.level), 0});
    }
    for (const auto& f : fruits_) {
      const double lvl = f.collected ? -1.0 : static_cast<double>(f.level);
      o.insert(o.end(), {static_cast<double>(f.pos.x), static_cast<double>(f.pos.y), 0,
                         f.collected ? 0.0 : 1.0, f.collected ? 1.0 : 0.0, lvl, 0});
    }
    return o;
  }

  EnvConfig cfg_;
  ObsSchema schema_;
  std::vector<Agent> agents_;
  std::vector<Fruit> fruits_;
  int initial_fruit_level_sum_ = 0;
  int step_ = 0;
  double episode_return_ = 0.0;
};

// ---------------------------------------------------------------------------
// Wolfpack

class WolfpackEnv : public Env {
 public:
  explicit WolfpackEnv(const EnvConfig& cfg) : cfg_(cfg) {
    if (cfg.wolf_predators < 2) throw std::invalid_argument("wolfpack: needs at least two predators");
    schema_.roles = {{"predator", cfg.wolf_predators}, {"prey", cfg.wolf_prey}};
    schema_.feature_width = 3;  // is_predator is_prey is_empty
    schema_.empty_feature_index = 2;
    schema_.grid = true;
    schema_.grid_width = cfg.width;
    schema_.grid_height = cfg.height;
  }

  const ObsSchema& schema() const override { return schema_; }
  int num_agents() const override { return cfg_.wolf_predators; }
  int num_actions() const override { return 5; }  // up down left right stay

  std::vector<double> reset(Rng& rng) override {
    auto cells = place_distinct(cfg_.wolf_predators + cfg_.wolf_prey, cfg_.width, cfg_.height, rng);
    predators_.assign(cells.begin(), cells.begin() + cfg_.wolf_predators);
    prey_.assign(cells.begin() + cfg_.wolf_predators, cells.end());
    step_ = 0;
    captures_ = 0;
    return observe();
  }

  StepResult step(const std::vector<int>& actions, Rng& rng) override {
    const int n = num_agents();
    check_actions(actions, n, num_actions());
    StepResult res;
    res.rewards.assign(n, 0.0);

    auto prey_blocked = [this](int x, int y) {
      for (const auto& p : prey_)
        if (p.x == x && p.y == y) return true;
      return false;
    };
    resolve_moves(predators_, actions, prey_blocked, cfg_.width, cfg_.height);

    // Prey move one at a time under the scripted policy.
    for (size_t pi = 0; pi < prey_.size(); ++pi) {
      PreyView view;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy) {
          const int x = prey_[pi].x + dx, y = prey_[pi].y + dy;
          bool blocked = x < 0 || y < 0 || x >= cfg_.width || y >= cfg_.height;
          bool predator = false;
          if (!blocked) {
            for (const auto& p : predators_)
              if (p.x == x && p.y == y) {
                blocked = true;
                predator = true;
              }
            for (size_t pj = 0; pj < prey_.size(); ++pj)
              if (pj != pi && prey_[pj].x == x && prey_[pj].y == y) blocked = true;
          }
          view.blocked[dx + 1][dy + 1] = blocked;
          view.predator[dx + 1][dy + 1] = predator;
        }
      const int a = scripted_prey_policy(view, rng);
      prey_[pi].x += dx_of(a);
      prey_[pi].y += dy_of(a);
    }

    // Capture: at least two orthogonally adjacent predators form a pack.
    for (auto& p : prey_) {
      std::vector<int> pack;
      for (int i = 0; i < n; ++i)
        if (orth_adjacent(predators_[i], p)) pack.push_back(i);
      if (static_cast<int>(pack.size()) < 2) continue;
      for (int i : pack) res.rewards[i] += cfg_.wolf_capture_base * pack.size();
      captures_ += 1;
      p = respawn(rng);
    }

    step_ += 1;
    if (step_ >= cfg_.step_limit) res.truncated = true;
    res.success = captures_;
    res.obs = observe();
    return res;
  }

 private:
  Cell respawn(Rng& rng) {
    std::vector<Cell> free;
    for (int x = 0; x < cfg_.width; ++x)
      for (int y = 0; y < cfg_.height; ++y) {
        bool used = false;
        for (const auto& p : predators_) used = used || (p.x == x && p.y == y);
        for (const auto& p : prey_) used = used || (p.x == x && p.y == y);
        if (!used) free.push_back({x, y});
      }
    if (free.empty()) throw std::runtime_error("wolfpack: no free cell for prey respawn");
    std::uniform_int_distribution<size_t> d(0, free.size() - 1);
    return free[d(rng)];
  }

  std::vector<double> observe() const {
    std::vector<double> o;
    o.reserve(schema_.obs_length());
    for (const auto& p : predators_)
      o.insert(o.end(), {static_cast<double>(p.x), static_cast<double>(p.y), 1, 0, 0});
    for (const auto& p : prey_)
      o.insert(o.end(), {static_cast<double>(p.x), static_cast<double>(p.y), 0, 1, 0});
    return o;
  }

  EnvConfig cfg_;
  ObsSchema schema_;
  std::vector<Cell> predators_;
  std::vector<Cell> prey_;
  int step_ = 0;
  int captures_ = 0;
};

// ---------------------------------------------------------------------------
// Target (continuous, double-integrator)

class TargetEnv : public Env {
 public:
  explicit TargetEnv(const EnvConfig& cfg) : cfg_(cfg) {
    if (cfg.target_agents < 1) throw std::invalid_argument("target: needs at least one agent");
    schema_.roles = {{"agent", cfg.target_agents},
                     {"landmark", cfg.target_agents},
                     {"obstacle", cfg.target_obstacles}};
    schema_.feature_width = 5;  // vx vy is_agent is_landmark is_obstacle
    schema_.grid = false;
    schema_.world_half_width = cfg.target_world_half_width;
  }

  const ObsSchema& schema() const override { return schema_; }
  int num_agents() const override { return cfg_.target_agents; }
  int num_actions() const override { return 5; }  // noop +x -x +y -y

  std::vector<double> reset(Rng& rng) override {
    const double hw = cfg_.target_world_half_width;
    std::uniform_real_distribution<double> upos(-0.9 * hw, 0.9 * hw);
    std::uniform_real_distribution<double> uang(0.0, 2.0 * M_PI);
    auto body = [&](double vx, double vy) {
      Body b;
      b.x = upos(rng);
      b.y = upos(rng);
      b.vx = vx;
      b.vy = vy;
      return b;
    };
    agents_.clear();
    landmarks_.clear();
    obstacles_.clear();
    for (int i = 0; i < cfg_.target_agents; ++i) agents_.push_back(body(0, 0));
    for (int i = 0; i < cfg_.target_agents; ++i) landmarks_.push_back(body(0, 0));
    for (int i = 0; i < cfg_.target_obstacles; ++i) {
      const double a = uang(rng);
      obstacles_.push_back(body(cfg_.target_obstacle_speed * std::cos(a),
                                cfg_.target_obstacle_speed * std::sin(a)));
    }
    step_ = 0;
    mean_distance_ = 0.0;
    return observe();
  }

  StepResult step(const std::vector<int>& actions, Rng&) override {
    const int n = num_agents();
    check_actions(actions, n, num_actions());
    StepResult res;
    res.rewards.assign(n, 0.0);
    const double dt = cfg_.target_dt, hw = cfg_.target_world_half_width;

    for (int i = 0; i < n; ++i) {
      double fx = 0, fy = 0;
      switch (actions[i]) {
        case 1: fx = 1; break;
        case 2: fx = -1; break;
        case 3: fy = 1; break;
        case 4: fy = -1; break;
        default: break;
      }
      Body& b = agents_[i];
      b.vx = b.vx * (1.0 - cfg_.target_damping) + fx * cfg_.target_accel * dt;
      b.vy = b.vy * (1.0 - cfg_.target_damping) + fy * cfg_.target_accel * dt;
      const double sp = std::hypot(b.vx, b.vy);
      if (sp > cfg_.target_max_speed) {
        b.vx *= cfg_.target_max_speed / sp;
        b.vy *= cfg_.target_max_speed / sp;
      }
      b.x = std::clamp(b.x + b.vx * dt, -hw, hw);
      b.y = std::clamp(b.y + b.vy * dt, -hw, hw);
    }
    for (Body& o : obstacles_) {
      o.x += o.vx * dt;
      o.y += o.vy * dt;
      if (o.x < -hw || o.x > hw) {
        o.vx = -o.vx;
        o.x = std::clamp(o.x, -hw, hw);
      }
      if (o.y < -hw || o.y > hw) {
        o.vy = -o.vy;
        o.y = std::clamp(o.y, -hw, hw);
      }
    }

    double dist_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = std::hypot(agents_[i].x - landmarks_[i].x, agents_[i].y - landmarks_[i].y);
      dist_sum += d;
      res.rewards[i] -= cfg_.target_distance_weight * d;
      for (int j = 0; j < n; ++j)
        if (j != i && std::hypot(agents_[i].x - agents_[j].x, agents_[i].y - agents_[j].y) <
                          2.0 * cfg_.target_agent_radius)
          res.rewards[i] += cfg_.target_collision_penalty;
      for (const Body& o : obstacles_)
        if (std::hypot(agents_[i].x - o.x, agents_[i].y - o.y) <
            cfg_.target_agent_radius + cfg_.target_obstacle_radius)
          res.rewards[i] += cfg_.target_collision_penalty;
    }
    mean_distance_ = dist_sum / n;

    step_ += 1;
    if (step_ >= cfg_.step_limit) res.truncated = true;
    res.success = mean_distance_;
    res.obs = observe();
    return res;
  }

 private:
  struct Body {
    double x = 0, y = 0, vx = 0, vy = 0;
  };

  std::vector<double> observe() const {
    std::vector<double> o;
    o.reserve(schema_.obs_length());
    for (const auto& b : agents_) o.insert(o.end(), {b.x, b.y, b.vx, b.vy, 1, 0, 0});
    for (const auto& b : landmarks_) o.insert(o.end(), {b.x, b.y, 0.0, 0.0, 0, 1, 0});
    for (const auto& b : obstacles_) o.insert(o.end(), {b.x, b.y, b.vx, b.vy, 0, 0, 1});
    return o;
  }

  EnvConfig cfg_;
  ObsSchema schema_;
  std::vector<Body> agents_;
  std::vector<Body> landmarks_;
  std::vector<Body> obstacles_;
  int step_ = 0;
  double mean_distance_ = 0.0;
};

}  // namespace

int scripted_prey_policy(const PreyView& view, Rng& rng) {
  // Candidate moves from the prey's cell; view center is [1][1].
  struct Move {
    int action, dx, dy;
  };
  static const Move moves[4] = {{kUp, 0, 1}, {kDown, 0, -1}, {kLeft, -1, 0}, {kRight, 1, 0}};
  std::vector<Move> free;
  for (const Move& m : moves)
    if (!view.blocked[m.dx + 1][m.dy + 1]) free.push_back(m);
  if (free.empty()) return 4;

  std::vector<std::pair<int, int>> preds;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      if (view.predator[dx + 1][dy + 1]) preds.emplace_back(dx, dy);

  if (preds.empty()) {
    std::uniform_int_distribution<size_t> d(0, free.size() - 1);
    return free[d(rng)].action;
  }
  // Evade: maximize the distance to the nearest visible predator.
  int best_score = -1;
  std::vector<Move> best;
  for (const Move& m : free) {
    int nearest = 1 << 20;
    for (const auto& [px, py] : preds)
      nearest = std::min(nearest, std::abs(m.dx - px) + std::abs(m.dy - py));
    if (nearest > best_score) {
      best_score = nearest;
      best.clear();
    }
    if (nearest == best_score) best.push_back(m);
  }
  std::uniform_int_distribution<size_t> d(0, best.size() - 1);
  return best[d(rng)].action;
}

std::unique_ptr<Env> make_env(const EnvConfig& cfg) {
  if (cfg.step_limit < 1) throw std::invalid_argument("env: step limit must be positive");
  if (cfg.name == "cpp") return std::make_unique<CppEnv>(cfg);
  if (cfg.name == "lbf") return std::make_unique<LbfEnv>(cfg);
  if (cfg.name == "wolfpack") return std::make_unique<WolfpackEnv>(cfg);
  if (cfg.name == "target") return std::make_unique<TargetEnv>(cfg);
  throw std::invalid_argument("make_env: unknown environment '" + cfg.name + "' (cpp|lbf|wolfpack|target)");
}

}  // namespace marc
