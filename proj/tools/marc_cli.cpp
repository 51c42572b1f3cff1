#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "marc/harness.hpp"

namespace {

using namespace marc;

KeyValues kv_from_args(const std::string& config_path, const std::vector<std::string>& sets) {
  KeyValues kv = config_path.empty() ? KeyValues{} : KeyValues::from_file(config_path);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return kv;
}

void apply_sets(KeyValues& kv, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
}

void require_fresh_or_force(const std::string& out_dir, bool force) {
  const std::string metrics = out_dir + "/metrics.csv";
  if (!force && std::filesystem::exists(metrics))
    throw std::runtime_error("'" + metrics + "' already exists; pass --force to overwrite");
}

int run_train(RunConfig cfg, bool force) {
  require_fresh_or_force(cfg.out_dir, force);
  TrainResult r = train_run(cfg);
  std::cout << "steps " << r.env_steps << " episodes " << r.episodes << " final_return "
            << format_double(r.final_return_mean) << (r.stopped_early ? " (early stop)" : "")
            << "\nmetrics " << r.metrics_path << "\ncheckpoint " << r.checkpoint_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relational-critic multi-agent soft actor-critic"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, out_path, column = "return_mean", title = "return";
  std::string axis;
  std::vector<std::string> sets, inputs;
  int episodes = 100;
  unsigned long long seed = 1;
  bool force = false, stochastic = false;

  auto add_cfg = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value configuration file");
    cmd->add_option("--set", sets, "override, key=value (repeatable)");
  };

  auto* train = app.add_subcommand("train", "Train a run and write metrics plus a checkpoint");
  add_cfg(train);
  train->add_flag("--force", force, "overwrite existing run outputs");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; --set can change the environment");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
  eval->add_option("--set", sets, "environment override, key=value (repeatable)");
  eval->add_option("--episodes", episodes, "episodes to run");
  eval->add_option("--seed", seed, "evaluation seed");
  eval->add_flag("--stochastic", stochastic, "sample actions instead of argmax");

  auto* baseline = app.add_subcommand("baseline", "Uniform-random return statistics");
  add_cfg(baseline);
  baseline->add_option("--episodes", episodes, "episodes to run");
  baseline->add_option("--seed", seed, "baseline seed");

  auto* ablate = app.add_subcommand("ablate", "Train a single-axis variant of a base config");
  add_cfg(ablate);
  ablate->add_option("--axis", axis,
                     "one of: gat, rgat, local-relations, all-relations, full-grid, sampled-pg")
      ->required();
  ablate->add_flag("--force", force, "overwrite existing run outputs");

  auto* plot = app.add_subcommand("plot", "Aggregate metrics CSVs and render an SVG curve");
  plot->add_option("--input", inputs, "metrics.csv files (one per seed)")->required();
  plot->add_option("--column", column, "metrics column to plot");
  plot->add_option("--out", out_path, "output SVG path")->required();
  plot->add_option("--title", title, "plot title");

  auto* rollout = app.add_subcommand("rollout", "Print one greedy episode from a checkpoint");
  rollout->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
  rollout->add_option("--seed", seed, "episode seed");

  auto* graph = app.add_subcommand("graph", "Show the relational graph of a reset observation");
  add_cfg(graph);
  graph->add_option("--seed", seed, "reset seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_train(resolve_run_config(kv_from_args(config_path, sets)), force);

    if (eval->parsed()) {
      Checkpoint ck = load_checkpoint(ckpt_path);
      KeyValues kv = config_to_kv(ck.cfg);
      apply_sets(kv, sets);
      RunConfig cfg = resolve_run_config(kv);
      auto env = make_env(cfg.env);
      auto learner = ck.build();
      Rng rng(sub_seed(seed, 11));
      EvalResult r = evaluate(*learner, *env, episodes, rng, !stochastic);
      std::cout << "episodes " << r.episodes << " return_mean " << format_double(r.return_mean)
                << " return_std " << format_double(r.return_std) << " success_mean "
                << format_double(r.success_mean) << "\n";
      return 0;
    }

    if (baseline->parsed()) {
      RunConfig cfg = resolve_run_config(kv_from_args(config_path, sets));
      EvalResult r = random_baseline(cfg.env, episodes, seed);
      std::cout << "episodes " << r.episodes << " return_mean " << format_double(r.return_mean)
                << " return_std " << format_double(r.return_std) << " success_mean "
                << format_double(r.success_mean) << "\n";
      return 0;
    }

    if (ablate->parsed()) {
      KeyValues kv = kv_from_args(config_path, sets);
      if (axis == "gat" || axis == "rgat")
        kv.set("encoder.arch", axis);
      else if (axis == "local-relations")
        kv.set("relations.preset", "local");
      else if (axis == "all-relations")
        kv.set("relations.preset", "all");
      else if (axis == "full-grid")
        kv.set("train.full_grid_entities", "true");
      else if (axis == "sampled-pg")
        kv.set("train.sampled_policy_gradient", "true");
      else
        throw std::invalid_argument("unknown ablation axis '" + axis + "'");
      RunConfig cfg = resolve_run_config(kv);
      if (!kv.has("run.out_dir")) cfg.out_dir += "-" + axis;
      else cfg.out_dir = kv.get_str("run.out_dir", cfg.out_dir);
      return run_train(cfg, force);
    }

    if (plot->parsed()) {
      const std::string agg = out_path + ".csv";
      aggregate_metrics(inputs, column, agg);
      write_svg_plot(agg, out_path, title);
      std::cout << "wrote " << agg << " and " << out_path << "\n";
      return 0;
    }

    if (rollout->parsed()) {
      Checkpoint ck = load_checkpoint(ckpt_path);
      auto env = make_env(ck.cfg.env);
      auto learner = ck.build();
      Rng rng(sub_seed(seed, 13));
      std::vector<double> obs = env->reset(rng);
      double ret = 0.0;
      for (int step = 1;; ++step) {
        const auto actions = learner->act(obs, rng, /*greedy=*/true, env->num_agents());
        StepResult sr = env->step(actions, rng);
        std::cout << "step " << step << " actions";
        for (int a : actions) std::cout << " " << a;
        std::cout << " rewards";
        for (double r : sr.rewards) std::cout << " " << format_double(r);
        std::cout << "\n";
        for (double r : sr.rewards) ret += r / env->num_agents();
        obs = std::move(sr.obs);
        if (sr.done || sr.truncated) break;
      }
      std::cout << "episode return " << format_double(ret) << "\n";
      return 0;
    }

    if (graph->parsed()) {
      RunConfig cfg = resolve_run_config(kv_from_args(config_path, sets));
      auto env = make_env(cfg.env);
      Rng rng(sub_seed(seed, 17));
      const auto obs = env->reset(rng);
      const auto entities = extract_entities(obs, env->schema());
      const RelationSet rels = relations_for(cfg);
      const RelationalGraph g = build_graph(entities, rels);
      for (size_t j = 0; j < g.entities.size(); ++j)
        std::cout << "entity " << j << " at (" << format_double(g.entities[j].x) << ", "
                  << format_double(g.entities[j].y) << ")\n";
      for (int r = 0; r < rels.size(); ++r) {
        std::cout << rels.relations[r].name << ":";
        for (const auto& [u, v] : g.edges[r]) std::cout << " " << u << "->" << v;
        std::cout << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
