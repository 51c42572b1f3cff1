#pragma once

#include <memory>
#include <string>
#include <vector>

#include "marc/rng.hpp"
#include "marc/schema.hpp"

namespace marc {

struct EnvConfig {
  std::string name = "cpp";  // cpp | lbf | wolfpack | target
  int width = 10;
  int height = 10;
  int step_limit = 50;

  // cpp
  int cpp_pickers = 2;
  int cpp_droppers = 2;
  int cpp_boxes = 3;
  int cpp_goals = 3;
  double cpp_step_penalty = -0.1;
  double cpp_pass_reward = 0.5;
  double cpp_repeat_pass_penalty = -1.0;
  double cpp_completion_bonus = 1.0;

  // lbf
  int lbf_agents = 4;
  int lbf_fruits = 4;
  bool lbf_coop = true;
  int lbf_max_agent_level = 2;

  // wolfpack
  int wolf_predators = 3;
  int wolf_prey = 2;
  double wolf_capture_base = 1.0;

  // target (continuous)
  int target_agents = 3;
  int target_obstacles = 3;
  double target_dt = 0.1;
  double target_damping = 0.25;
  double target_max_speed = 1.0;
  double target_accel = 1.0;
  double target_agent_radius = 0.05;
  double target_obstacle_radius = 0.1;
  double target_obstacle_speed = 0.1;
  double target_collision_penalty = -1.0;
  double target_distance_weight = 1.0;
  double target_world_half_width = 1.0;
};

struct StepResult {
  std::vector<double> obs;  // shared by all agents (full observability)
  std::vector<double> rewards;
  bool done = false;       // environment-terminal (task solved)
  bool truncated = false;  // step-limit cutoff
  double success = 0.0;    // env-specific episode success metric so far
};

class Env {
 public:
  virtual ~Env() = default;
  virtual const ObsSchema& schema() const = 0;
  virtual int num_agents() const = 0;
  virtual int num_actions() const = 0;
  virtual std::vector<double> reset(Rng& rng) = 0;
  virtual StepResult step(const std::vector<int>& actions, Rng& rng) = 0;
};

std::unique_ptr<Env> make_env(const EnvConfig& cfg);

// Scripted evasive prey. The view is the 3x3 occupancy window centered on
// the prey, indexed [dx+1][dy+1]; blocked marks out-of-bounds or occupied
// cells. Returns 0=up(+y) 1=down 2=left 3=right 4=stay.
struct PreyView {
  bool blocked[3][3] = {};
  bool predator[3][3] = {};
};
int scripted_prey_policy(const PreyView& view, Rng& rng);

}  // namespace marc
