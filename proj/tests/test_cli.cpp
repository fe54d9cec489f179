#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "sbbts/cli/commands.hpp"
#include "sbbts/cli/io.hpp"
#include "sbbts/errors.hpp"
#include "sbbts/log.hpp"

using namespace sbbts;
using namespace sbbts::cli;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "sbbts");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sbbts_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig tiny_config() {
  RunConfig c;
  c.model.outer_iterations = 1;
  c.model.epochs = 2;
  c.model.batch_size = 8;
  c.model.d_model = 8;
  c.model.n_head = 2;
  c.model.ffn_mult = 2;
  c.model.euler_steps = 4;
  c.heston.paths = 16;
  c.heston.length = 12;
  c.generate.paths = 16;
  return c;
}

std::string write_config(const fs::path& dir, const RunConfig& c) {
  const std::string path = (dir / "config.json").string();
  write_text(path, run_config_to_json(c).dump(2));
  return path;
}

}  // namespace

TEST_CASE("run config json") {
  RunConfig c = tiny_config();
  c.seed = 99;
  c.factors.baseline = "sbbts";
  c.heston.ranges.kappa = {1.0, 2.0};
  const RunConfig back = run_config_from_json(run_config_to_json(c));
  CHECK(back.seed == 99);
  CHECK(back.factors.baseline == "sbbts");
  CHECK(back.heston.ranges.kappa.hi == 2.0);
  CHECK(back.model.d_model == 8);
  CHECK(run_config_to_json(back) == run_config_to_json(c));

  auto j = run_config_to_json(c);
  j["heston"]["bogus"] = 1;
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"mystery", true}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"model", {{"beta", "big"}}}}), ConfigError);
  const RunConfig partial = run_config_from_json(nlohmann::json{{"seed", 5}});
  CHECK(partial.seed == 5);
  CHECK(partial.heston.paths == 5000);
}

TEST_CASE("paths csv") {
  const fs::path dir = scratch("csv");
  const std::string path = (dir / "p.csv").string();
  stochastic::TimeSeriesDataset d(stochastic::TimeGrid::uniform(2), 2, 2, {0.1, 1, 0.2, 2, 0.3, 3, 1.5, 4, 1e-17, 5, -2, 6});
  write_paths_csv(path, d, {"X", "v"});
  const PathTable t = read_paths_csv(path);
  CHECK(t.columns == std::vector<std::string>{"X", "v"});
  CHECK(t.data.values == d.values);
  CHECK(t.data.grid == d.grid);
  CHECK(format_double(0.1) == "0.1");

  auto bad = [&](const std::string& text) {
    write_text(path, text);
    return path;
  };
  CHECK_THROWS_AS(read_paths_csv(bad("date,X,path_id\n0,1,0\n1,2,0\n")), SchemaError);
  CHECK_THROWS_AS(read_paths_csv(bad("date_index,X,path_id\n0,1,0\n1,2\n")), SchemaError);
  CHECK_THROWS_AS(read_paths_csv(bad("date_index,X,path_id\n0,1,0\n2,2,0\n")), DataError);
  CHECK_THROWS_AS(read_paths_csv(bad("date_index,X,path_id\n0,1,0\n1,abc,0\n")), DataError);
  CHECK_THROWS_AS(read_paths_csv(bad("date_index,X,path_id\n0,1,0\n1,2,0\n0,1,1\n")), DataError);
  CHECK_THROWS_AS(read_paths_csv(bad("date_index,X,path_id\n0,1,0\n")), DataError);
  CHECK_THROWS_AS(read_paths_csv(bad("")), DataError);
  CHECK_THROWS_AS(read_paths_csv((dir / "missing.csv").string()), IoError);

  write_text(path, "A,B\n0.01,-0.02\n0.03,0.00\n");
  const ReturnsTable r = read_returns_csv(path);
  CHECK(r.instruments == std::vector<std::string>{"A", "B"});
  CHECK(r.values(1, 0) == 0.03);
  CHECK_THROWS_AS(read_returns_csv(bad("A,B\n0.1\n")), SchemaError);
}

TEST_CASE("command line pipeline") {
  log::set_quiet(true);
  const fs::path dir = scratch("pipeline");
  const std::string cfg = write_config(dir, tiny_config());
  const std::string a = (dir / "a").string(), b = (dir / "b").string();

  CHECK(run({"simulate-heston", "--config", cfg, "--seed", "3", "--out", a}) == kExitOk);
  CHECK(fs::exists(fs::path(a) / "paths.csv"));
  CHECK(fs::exists(fs::path(a) / "truth.csv"));
  CHECK(fs::exists(fs::path(a) / "resolved_config.json"));
  const std::string data = (fs::path(a) / "paths.csv").string();

  for (const auto& [out, threads] : {std::pair{a, "1"}, std::pair{b, "3"}}) {
    CHECK(run({"train", "--config", cfg, "--seed", "4", "--threads", threads, "--data", data, "--out", out}) == kExitOk);
    CHECK(run({"generate", "--config", cfg, "--seed", "5", "--threads", threads, "--checkpoint",
               (fs::path(out) / "checkpoint.sbbts").string(), "--out", out}) == kExitOk);
  }
  for (const char* f : {"checkpoint.sbbts", "loss.csv", "synthetic.csv"})
    CHECK(read_text((fs::path(a) / f).string()) == read_text((fs::path(b) / f).string()));

  const std::string synth = (fs::path(a) / "synthetic.csv").string();
  CHECK(run({"eval", "--config", cfg, "--real", data, "--synth", data, "--out", a}) == kExitOk);
  const auto report = nlohmann::json::parse(read_text((fs::path(a) / "eval_report.json").string()));
  CHECK(report["metrics"]["X.gap.var95"] == 0.0);
  CHECK(report["metrics"]["v.gap.qv_std"] == 0.0);
  CHECK(run({"eval", "--config", cfg, "--real", data, "--synth", synth, "--out", b}) == kExitOk);
  CHECK(run({"heston-bench", "--config", cfg, "--real", data, "--synth", synth, "--synth-sb", synth, "--out", a}) == kExitOk);
  CHECK(fs::exists(fs::path(a) / "heston_report.json"));

  // Resume checks the grid and the architecture.
  CHECK(run({"train", "--config", cfg, "--data", data, "--out", b, "--resume",
             (fs::path(a) / "checkpoint.sbbts").string()}) == kExitOk);
  RunConfig wider = tiny_config();
  wider.model.d_model = 16;
  const fs::path wdir = scratch("wider");
  CHECK(run({"train", "--config", write_config(wdir, wider), "--data", data, "--out", wdir.string(), "--resume",
             (fs::path(a) / "checkpoint.sbbts").string()}) == kExitConfig);

  // Exit codes.
  CHECK(run({"train", "--config", cfg, "--data", data, "--out", b, "--beta", "5"}) == kExitConfig);
  CHECK(run({"train", "--config", cfg, "--data", (dir / "nope.csv").string(), "--out", b}) == kExitData);
  CHECK(run({"train", "--config", cfg, "--out", b}) == kExitConfig);
  CHECK(run({"frobnicate"}) == kExitConfig);
  write_text((dir / "bad.json").string(), "{\"model\": {\"colour\": 1}}");
  CHECK(run({"train", "--config", (dir / "bad.json").string(), "--data", data, "--out", b}) == kExitConfig);
  write_text((dir / "broken.json").string(), "{ not json");
  CHECK(run({"train", "--config", (dir / "broken.json").string(), "--data", data, "--out", b}) == kExitConfig);
  log::set_quiet(false);
}

TEST_CASE("factor commands") {
  log::set_quiet(true);
  const fs::path dir = scratch("factors");
  std::string csv = "A,B,C,D\n";
  stochastic::RandomSource rng(1);
  for (int r = 0; r < 270; ++r) {
    const double f = 0.01 * rng.normal();
    for (int j = 0; j < 4; ++j) csv += format_double(f + 0.005 * rng.normal()) + (j < 3 ? "," : "\n");
  }
  const std::string returns = (dir / "returns.csv").string();
  write_text(returns, csv);
  RunConfig c = tiny_config();
  c.factors.m = 2;
  c.factors.k = 2;
  c.factors.window = 20;
  c.factors.stride = 25;
  const std::string cfg = write_config(dir, c);
  const std::string out = (dir / "out").string();
  CHECK(run({"factor-fit", "--config", cfg, "--returns", returns, "--out", out}) == kExitOk);
  const auto fm = nlohmann::json::parse(read_text((fs::path(out) / "factor_model.json").string()));
  std::vector<std::string> names;
  const auto model = factor_model_from_json(fm, &names);
  CHECK(names == std::vector<std::string>{"A", "B", "C", "D"});
  CHECK(model.pca.components() == 2);
  CHECK(run({"augment", "--config", cfg, "--returns", returns, "--copies", "2", "--out", out}) == kExitOk);
  CHECK(fs::exists(fs::path(out) / "augment_inputs.csv"));
  CHECK(fs::exists(fs::path(out) / "augment_targets.csv"));
  CHECK(run({"augment", "--config", cfg, "--returns", returns, "--baseline", "magic", "--out", out}) == kExitConfig);
  auto broken = fm;
  broken["loadings"] = std::vector<double>{1.0};
  CHECK_THROWS_AS(factor_model_from_json(broken), SchemaError);
  log::set_quiet(false);
}
