#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "marc/harness.hpp"

using namespace marc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("marc-test-" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

RunConfig tiny_lbf_config(const std::string& out_dir, unsigned long long seed = 11) {
  KeyValues kv = KeyValues::from_string(
      "env.name = lbf\n"
      "env.width = 5\n"
      "env.height = 5\n"
      "env.lbf_agents = 2\n"
      "env.lbf_fruits = 1\n"
      "train.batch_size = 32\n"
      "train.hidden = 8\n"
      "train.update_interval = 50\n"
      "train.updates_per_interval = 1\n"
      "encoder.embed_dim = 8\n"
      "run.total_steps = 400\n"
      "run.log_interval = 100\n"
      "run.return_window = 5\n");
  RunConfig cfg = resolve_run_config(kv);
  cfg.seed = seed;
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_CASE("key=value parsing") {
  KeyValues kv = KeyValues::from_string(
      "# comment line\n"
      "env.name = wolfpack\n"
      "sac.gamma = 0.95\n"
      "run.total_steps = 1234\n"
      "sac.reward_normalization = false\n"
      "\n"
      "  run.out_dir = /tmp/x  \n");
  CHECK(kv.get_str("env.name", "cpp") == "wolfpack");
  CHECK(kv.get_double("sac.gamma", 0.99) == 0.95);
  CHECK(kv.get_int("run.total_steps", 0) == 1234);
  CHECK(kv.get_bool("sac.reward_normalization", true) == false);
  CHECK(kv.get_str("run.out_dir", "") == "/tmp/x");
  CHECK(kv.get_str("missing.key", "fallback") == "fallback");
  CHECK(kv.unread_keys().empty());

  KeyValues typo = KeyValues::from_string("env.naem = cpp\n");
  CHECK(typo.unread_keys() == std::vector<std::string>{"env.naem"});
  // resolve_run_config reads every valid key, so a typo is fatal
  CHECK_THROWS_AS(resolve_run_config(typo), std::invalid_argument);
}

TEST_CASE("config round-trips through config_to_kv") {
  KeyValues kv = KeyValues::from_string(
      "env.name = wolfpack\n"
      "env.width = 7\n"
      "train.alpha = 0.05\n"
      "train.sampled_policy_gradient = true\n"
      "encoder.arch = rgat\n"
      "encoder.rgat_self_loop = true\n"
      "relations.preset = local\n"
      "run.seed = 99\n"
      "run.stop_return = 1.25\n");
  RunConfig cfg = resolve_run_config(kv);
  CHECK(cfg.env.name == "wolfpack");
  CHECK(cfg.env.width == 7);
  CHECK(cfg.sac.alpha == 0.05);
  CHECK(cfg.sac.sampled_policy_gradient);
  CHECK(cfg.encoder.arch == "rgat");
  CHECK(cfg.relation_preset == "local");
  CHECK(cfg.seed == 99);
  REQUIRE(cfg.stop_return.has_value());
  CHECK(*cfg.stop_return == 1.25);

  // inverse: resolve(config_to_kv(cfg)) reproduces the struct
  RunConfig twice = resolve_run_config(config_to_kv(cfg));
  CHECK(config_to_kv(twice).entries() == config_to_kv(cfg).entries());

  // defaults: continuous env picks the continuous relation preset
  RunConfig tgt = resolve_run_config(KeyValues::from_string("env.name = target\n"));
  CHECK(tgt.relation_preset == "continuous-default");
  CHECK(relations_for(tgt).size() == 5);
}

TEST_CASE("format_double round-trips exactly") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 123456.789, 0.0, -0.0, 2.980000000000001}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("training writes metrics, a checkpoint, and the resolved config") {
  TempDir dir("train");
  RunConfig cfg = tiny_lbf_config(dir / "run");
  TrainResult res = train_run(cfg);
  CHECK(res.env_steps == 400);
  CHECK(res.episodes > 0);
  CHECK(fs::exists(res.metrics_path));
  CHECK(fs::exists(res.checkpoint_path));
  CHECK(fs::exists(fs::path(dir / "run") / "config.resolved"));

  std::ifstream in(res.metrics_path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "env_step,episodes,return_mean,ep_len_mean,success_mean,critic_loss,policy_loss,entropy");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 4);  // 400 steps / log_interval 100

  // the resolved config reloads to the identical run
  RunConfig back = resolve_run_config(KeyValues::from_file((fs::path(dir / "run") / "config.resolved").string()));
  CHECK(config_to_kv(back).entries() == config_to_kv(cfg).entries());
}

TEST_CASE("identical seeds give byte-identical metrics; different seeds differ") {
  TempDir dir("determinism");
  RunConfig a = tiny_lbf_config(dir / "a", 21);
  RunConfig b = tiny_lbf_config(dir / "b", 21);
  RunConfig c = tiny_lbf_config(dir / "c", 22);
  const std::string ma = slurp(train_run(a).metrics_path);
  const std::string mb = slurp(train_run(b).metrics_path);
  const std::string mc = slurp(train_run(c).metrics_path);
  CHECK(ma == mb);
  CHECK(ma != mc);
}

TEST_CASE("checkpoint round-trip restores parameters, moments, and stats exactly") {
  TempDir dir("ckpt");
  RunConfig cfg = tiny_lbf_config(dir / "run");
  TrainResult res = train_run(cfg);

  Checkpoint ck = load_checkpoint(res.checkpoint_path);
  CHECK(ck.env_step == 400);
  CHECK(ck.num_agents == 2);
  CHECK(ck.num_actions == 6);
  auto learner = ck.build();

  // saving the rebuilt learner reproduces the file byte for byte
  save_checkpoint(dir / "again.json", *learner, ck.cfg, ck.env_step, ck.rng_state);
  CHECK(slurp(dir / "again.json") == slurp(res.checkpoint_path));

  // restored policies given identical rng act identically, greedy and sampled
  auto learner2 = ck.build();
  std::vector<double> obs(learner->schema().obs_length(), 0.5);
  Rng r1(3), r2(3);
  CHECK(learner->act(obs, r1) == learner2->act(obs, r2));
  CHECK(learner->act(obs, r1, true) == learner2->act(obs, r2, true));

  CHECK_THROWS(load_checkpoint(dir / "missing.json"));
}

TEST_CASE("evaluation and the random baseline") {
  TempDir dir("eval");
  RunConfig cfg = tiny_lbf_config(dir / "run");
  TrainResult res = train_run(cfg);
  auto learner = load_checkpoint(res.checkpoint_path).build();
  auto env = make_env(cfg.env);
  Rng rng(7);
  EvalResult ev = evaluate(*learner, *env, 20, rng);
  CHECK(ev.episodes == 20);
  CHECK(std::isfinite(ev.return_mean));
  CHECK(ev.return_std >= 0.0);

  EvalResult base1 = random_baseline(cfg.env, 50, 13);
  EvalResult base2 = random_baseline(cfg.env, 50, 13);
  CHECK(base1.return_mean == base2.return_mean);  // seeded, reproducible
  CHECK(base1.return_std == base2.return_std);
  CHECK(base1.episodes == 50);
}

TEST_CASE("metrics aggregation aligns runs and computes the confidence band") {
  TempDir dir("agg");
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name);
    out << "env_step,episodes,return_mean\n" << body;
    return dir / name;
  };
  // step 300 missing from the second run: dropped from the aggregate
  auto p1 = write("a.csv", "100,1,1.0\n200,2,2.0\n300,3,9.0\n");
  auto p2 = write("b.csv", "100,1,3.0\n200,2,4.0\n");
  aggregate_metrics({p1, p2}, "return_mean", dir / "agg.csv");

  std::ifstream in(dir / "agg.csv");
  std::string header, row1, row2, extra;
  std::getline(in, header);
  CHECK(header == "env_step,mean,lo,hi,n");
  std::getline(in, row1);
  std::getline(in, row2);
  CHECK(!std::getline(in, extra));

  auto parse = [](const std::string& row) {
    std::vector<double> vals;
    std::istringstream is(row);
    for (std::string cell; std::getline(is, cell, ',');) vals.push_back(std::stod(cell));
    return vals;
  };
  auto r1 = parse(row1);
  REQUIRE(r1.size() == 5);
  CHECK(r1[0] == 100);
  CHECK(r1[1] == doctest::Approx(2.0));  // mean of 1 and 3
  // 95% band: mean +- 1.96 * std / sqrt(2), std = sqrt(2)
  CHECK(r1[2] == doctest::Approx(2.0 - 1.96));
  CHECK(r1[3] == doctest::Approx(2.0 + 1.96));
  CHECK(r1[4] == 2);
  CHECK(parse(row2)[0] == 200);

  // single run: band collapses to the mean
  aggregate_metrics({p1}, "return_mean", dir / "one.csv");
  std::ifstream one(dir / "one.csv");
  std::getline(one, header);
  std::getline(one, row1);
  auto s1 = parse(row1);
  CHECK(s1[1] == s1[2]);
  CHECK(s1[1] == s1[3]);

  CHECK_THROWS(aggregate_metrics({p1}, "no_such_column", dir / "bad.csv"));
  CHECK_THROWS(aggregate_metrics({dir / "missing.csv"}, "return_mean", dir / "bad.csv"));
}

TEST_CASE("svg plotting is deterministic and well-formed") {
  TempDir dir("plot");
  {
    std::ofstream out(dir / "agg.csv");
    out << "env_step,mean,lo,hi,n\n100,1.0,0.5,1.5,2\n200,2.0,1.25,2.75,2\n300,1.5,1.0,2.0,2\n";
  }
  write_svg_plot(dir / "agg.csv", dir / "p1.svg", "returns");
  write_svg_plot(dir / "agg.csv", dir / "p2.svg", "returns");
  const std::string svg = slurp(dir / "p1.svg");
  CHECK(svg == slurp(dir / "p2.svg"));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("returns") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("<polygon") != std::string::npos);
}
