#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "abibench/checkpoint.hpp"
#include "abibench/harness.hpp"

using namespace abibench;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "abibench_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

harness::TrainConfig tiny_gaussian(harness::Method method, double lambda, std::uint64_t seed) {
  harness::TrainConfig cfg = harness::default_config(sim::Family::Gaussian2d, method);
  cfg.lambda = lambda;
  cfg.seed = seed;
  cfg.scenario.obs_per_dataset = 40;
  cfg.n_sim = 160;
  cfg.n_obs = 160;
  cfg.eval.n_test = 5;
  cfg.eval.n_posterior = 12;
  cfg.eval.inld_per_dataset = 3;
  return cfg;
}

harness::TrainConfig tiny_camera(harness::Method method, double lambda, std::uint64_t seed) {
  harness::TrainConfig cfg = harness::default_config(sim::Family::Camera, method);
  cfg.lambda = lambda;
  cfg.seed = seed;
  cfg.n_sim = 64;
  cfg.n_obs = 32;
  cfg.batch = 32;
  cfg.epochs = 1;
  cfg.eval.n_test = 4;
  cfg.eval.n_posterior = 6;
  cfg.eval.inld_per_dataset = 2;
  return cfg;
}

}  // namespace

TEST_CASE("method names round-trip") {
  using harness::Method;
  for (const Method m : {Method::Npe, Method::Nnpe, Method::NpeMmd, Method::NpeDann})
    CHECK(harness::method_from_name(harness::method_name(m)) == m);
  CHECK(harness::method_name(Method::NpeMmd) == "npe_mmd");
  CHECK_THROWS_AS(harness::method_from_name("npe_gan"), ConfigError);
}

TEST_CASE("family defaults define the training budgets") {
  const harness::TrainConfig g = harness::default_config(sim::Family::Gaussian2d,
                                                         harness::Method::Npe);
  CHECK(g.n_sim == 49920);
  CHECK(g.batch == 32);
  CHECK(g.epochs == 1);
  CHECK(g.steps_per_epoch() == 1560);
  CHECK(g.total_steps() == 1560);
  CHECK(g.base_lr == 5e-4);
  CHECK(g.weight_decay == 0.0);

  const harness::TrainConfig c = harness::default_config(sim::Family::Camera,
                                                         harness::Method::Npe);
  CHECK(c.n_sim == 50000);
  CHECK(c.n_obs == 1000);
  CHECK(c.epochs == 20);
  CHECK(c.weight_decay == 1e-4);

  const harness::TrainConfig cm = harness::default_config(sim::Family::Camera,
                                                          harness::Method::NpeMmd);
  CHECK(cm.batch == 128);
  CHECK(cm.epochs == 80);
}

TEST_CASE("train configs survive the JSON round trip and hash canonically") {
  harness::TrainConfig cfg = tiny_gaussian(harness::Method::NpeMmd, 1.0, 42);
  cfg.scenario.variant = sim::Variant::Contamination;
  cfg.scenario.contamination_eps = 0.2;

  const json j = harness::config_to_json(cfg);
  const harness::TrainConfig back = harness::config_from_json(j);
  CHECK(harness::config_to_json(back).dump() == j.dump());
  CHECK(harness::config_hash(back) == harness::config_hash(cfg));
  CHECK(harness::config_hash(cfg).size() == 16);

  harness::TrainConfig other_seed = cfg;
  other_seed.seed = 43;
  CHECK(harness::config_hash(other_seed) != harness::config_hash(cfg));
  harness::TrainConfig other_lambda = cfg;
  other_lambda.lambda = 10.0;
  CHECK(harness::config_hash(other_lambda) != harness::config_hash(cfg));
}

TEST_CASE("config validation rejects unusable settings") {
  const json scenario = sim::scenario_to_json(sim::ScenarioSpec{});
  CHECK_THROWS_AS(harness::config_from_json(json::array()), ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(json::object()), ConfigError);

  auto with = [&](const json& patch) {
    json j = patch;
    j["scenario"] = scenario;
    return j;
  };
  CHECK_THROWS_AS(harness::config_from_json(with({{"lambda", -1.0}})), ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(with({{"train", {{"batch", 0}}}})), ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(with({{"train", {{"n_sim", 8}}}})), ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(with({{"train", {{"base_lr", 0.0}}}})), ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(with({{"kernel", {{"scales", json::array()}}}})),
                  ConfigError);
  CHECK_THROWS_AS(harness::config_from_json(with({{"eval", {{"n_posterior", 1}}}})), ConfigError);
  // UDA with a live penalty needs at least one observed batch.
  CHECK_THROWS_AS(harness::config_from_json(with({{"method", "npe_mmd"},
                                                  {"lambda", 1.0},
                                                  {"train", {{"n_obs", 8}}}})),
                  ConfigError);
  // The same budget is fine when the penalty is switched off.
  CHECK_NOTHROW(harness::config_from_json(with({{"method", "npe_mmd"},
                                                {"lambda", 0.0},
                                                {"train", {{"n_obs", 8}}}})));
}

TEST_CASE("training writes a reloadable record and is fully deterministic") {
  const harness::TrainConfig cfg = tiny_gaussian(harness::Method::Npe, 0.0, 7);
  const fs::path dir_a = fresh_dir("train_a");
  const harness::RunRecord rec = harness::train(cfg, dir_a);

  CHECK(rec.loss_trace.size() == 5);  // 160 / 32 steps
  for (double v : rec.loss_trace) CHECK(std::isfinite(v));
  CHECK(rec.wall_seconds >= 0.0);
  CHECK(fs::exists(dir_a / "record.json"));
  CHECK(fs::exists(dir_a / "checkpoint.bin"));

  const harness::RunRecord loaded = harness::load_record(dir_a);
  CHECK(loaded.hash == rec.hash);
  CHECK(loaded.loss_trace == rec.loss_trace);
  CHECK(harness::config_to_json(loaded.config).dump() ==
        harness::config_to_json(cfg).dump());

  // A second run of the same config reproduces the trace and every weight.
  const fs::path dir_b = fresh_dir("train_b");
  const harness::RunRecord again = harness::train(cfg, dir_b);
  CHECK(again.loss_trace == rec.loss_trace);
  const harness::Checkpoint ck_a = harness::load_checkpoint(dir_a / "checkpoint.bin");
  const harness::Checkpoint ck_b = harness::load_checkpoint(dir_b / "checkpoint.bin");
  REQUIRE(ck_a.params.size() == ck_b.params.size());
  for (const auto& [name, value] : ck_a.params) {
    REQUIRE(ck_b.params.count(name) == 1);
    CHECK((value - ck_b.params.at(name)).cwiseAbs().maxCoeff() == 0.0);
  }

  CHECK_THROWS_AS(harness::load_record(fresh_dir("no_record")), DataError);
}

TEST_CASE("a zero penalty weight cannot change the trained weights") {
  const std::uint64_t seed = 11;
  const fs::path d_npe = fresh_dir("lz_npe");
  const fs::path d_mmd = fresh_dir("lz_mmd");
  const fs::path d_dann = fresh_dir("lz_dann");
  harness::train(tiny_gaussian(harness::Method::Npe, 0.0, seed), d_npe);
  harness::train(tiny_gaussian(harness::Method::NpeMmd, 0.0, seed), d_mmd);
  harness::train(tiny_gaussian(harness::Method::NpeDann, 0.0, seed), d_dann);

  const harness::Checkpoint ref = harness::load_checkpoint(d_npe / "checkpoint.bin");
  for (const fs::path& dir : {d_mmd, d_dann}) {
    const harness::Checkpoint other = harness::load_checkpoint(dir / "checkpoint.bin");
    for (const auto& [name, value] : ref.params) {
      REQUIRE(other.params.count(name) == 1);
      CHECK((value - other.params.at(name)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("noise-augmented training runs and stays finite") {
  const fs::path dir = fresh_dir("train_nnpe");
  const harness::RunRecord rec =
      harness::train(tiny_gaussian(harness::Method::Nnpe, 0.0, 3), dir);
  CHECK(rec.loss_trace.size() == 5);
  for (double v : rec.loss_trace) CHECK(std::isfinite(v));
}

TEST_CASE("checkpoints round-trip parameters bit for bit") {
  const fs::path dir = fresh_dir("checkpoints");
  rng::RngStream rs(1, "ckpt");
  ad::ParamStore params;
  params["a.w"] = rs.normal_matrix(3, 5);
  params["a.b"] = rs.normal_matrix(1, 5);
  params["z"] = rs.normal_matrix(7, 1);
  const json config = {{"method", "npe"}, {"seed", 4}};

  const fs::path path = dir / "model.bin";
  harness::save_checkpoint(path, params, config, "deadbeefdeadbeef");
  const harness::Checkpoint back = harness::load_checkpoint(path);
  CHECK(back.config_hash == "deadbeefdeadbeef");
  CHECK(back.config.dump() == config.dump());
  REQUIRE(back.params.size() == params.size());
  for (const auto& [name, value] : params)
    CHECK((value - back.params.at(name)).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(harness::load_checkpoint(dir / "absent.bin"), DataError);

  std::ofstream(dir / "garbage.bin", std::ios::binary) << "not a checkpoint at all";
  CHECK_THROWS_AS(harness::load_checkpoint(dir / "garbage.bin"), DataError);

  const std::string full = slurp(path);
  std::ofstream(dir / "cut.bin", std::ios::binary)
      << full.substr(0, full.size() - 16);
  CHECK_THROWS_AS(harness::load_checkpoint(dir / "cut.bin"), DataError);
}

TEST_CASE("evaluation is deterministic and reports the full metric set") {
  const harness::TrainConfig cfg = tiny_gaussian(harness::Method::Npe, 0.0, 19);
  const fs::path dir = fresh_dir("eval_gaussian");
  harness::train(cfg, dir);

  sim::ScenarioSpec shifted = cfg.scenario;
  shifted.variant = sim::Variant::Contamination;
  shifted.contamination_eps = 0.2;

  const metrics::MetricsReport a = harness::evaluate(dir, shifted, cfg.eval);
  const metrics::MetricsReport b = harness::evaluate(dir, shifted, cfg.eval);
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    CHECK(a.values[i].first == b.values[i].first);
    CHECK(a.values[i].second == b.values[i].second);
  }

  const std::vector<std::string> expected{"nrmse", "ece",  "pc",
                                          "ppd",   "ssdd", "inld",
                                          "rmse_to_analytic", "mmd_to_analytic"};
  REQUIRE(a.values.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(a.values[i].first == expected[i]);
    CHECK(std::isfinite(a.values[i].second));
  }
  CHECK(a.method == "npe");
  CHECK(a.scenario == "gaussian2d/contamination");
  CHECK(a.variant_param == 0.2);
  CHECK(a.seed == 19);

  // The in-memory overload agrees with the directory overload.
  const harness::RunRecord rec = harness::load_record(dir);
  const harness::Checkpoint ck = harness::load_checkpoint(rec.checkpoint_path);
  model::PosteriorModel m = harness::build_model(rec.config);
  for (auto& [name, value] : m.params) value = ck.params.at(name);
  const metrics::MetricsReport c = harness::evaluate(rec, m, shifted, cfg.eval);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values[i].second == c.values[i].second);

  sim::ScenarioSpec wrong_family;
  wrong_family.family = sim::Family::Camera;
  wrong_family.variant = sim::Variant::SaltPepper;
  CHECK_THROWS_AS(harness::evaluate(dir, wrong_family, cfg.eval), ConfigError);
}

TEST_CASE("image runs evaluate fresh or against the seen observed pool") {
  const harness::TrainConfig cfg = tiny_camera(harness::Method::NpeMmd, 0.1, 5);
  const fs::path dir = fresh_dir("eval_camera");
  const harness::RunRecord rec = harness::train(cfg, dir);
  CHECK(rec.loss_trace.size() == 2);  // 64 / 32 steps, one epoch
  for (double v : rec.loss_trace) CHECK(std::isfinite(v));

  sim::ScenarioSpec noisy = cfg.scenario;
  noisy.variant = sim::Variant::SaltPepper;

  const metrics::MetricsReport fresh = harness::evaluate(dir, noisy, cfg.eval);
  const std::vector<std::string> expected{"nrmse", "ece", "pc", "ppd", "ssdd", "inld"};
  REQUIRE(fresh.values.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(fresh.values[i].first == expected[i]);
    CHECK(std::isfinite(fresh.values[i].second));
  }
  CHECK(fresh.method == "npe_mmd@0.1");

  harness::EvalConfig seen = cfg.eval;
  seen.observed_seen = true;
  const metrics::MetricsReport replay = harness::evaluate(dir, noisy, seen);
  CHECK(std::isfinite(replay.value("ssdd")));
  const metrics::MetricsReport replay2 = harness::evaluate(dir, noisy, seen);
  CHECK(replay.value("ssdd") == replay2.value("ssdd"));

  harness::EvalConfig too_many = seen;
  too_many.n_test = cfg.n_obs + 1;
  CHECK_THROWS_AS(harness::evaluate(dir, noisy, too_many), ConfigError);
}

TEST_CASE("manifests parse from JSON") {
  const json j = {{"base", {{"train", {{"n_sim", 160}}}}},
                  {"scenarios", json::array({sim::scenario_to_json(sim::ScenarioSpec{})})},
                  {"methods", json::array({"npe", json{{"method", "npe_mmd"},
                                                       {"lambda", 1.0}}})},
                  {"seeds", json::array({1, 2, 3})}};
  const harness::GridManifest man = harness::manifest_from_json(j);
  CHECK(man.scenarios.size() == 1);
  REQUIRE(man.methods.size() == 2);
  CHECK(man.methods[0].method == harness::Method::Npe);
  CHECK(man.methods[0].lambda == 0.0);
  CHECK(man.methods[1].method == harness::Method::NpeMmd);
  CHECK(man.methods[1].lambda == 1.0);
  CHECK(man.seeds == std::vector<std::uint64_t>{1, 2, 3});

  const harness::TrainConfig cell =
      harness::cell_config(man, man.scenarios[0], man.methods[1], 2);
  CHECK(cell.n_sim == 160);
  CHECK(cell.method == harness::Method::NpeMmd);
  CHECK(cell.lambda == 1.0);
  CHECK(cell.seed == 2);

  CHECK_THROWS_AS(harness::manifest_from_json(json::array()), ConfigError);
  CHECK_THROWS_AS(harness::manifest_from_json(json{{"scenarios", json::array()}}), ConfigError);
  json bad_method = j;
  bad_method["methods"] = json::array({json::array()});
  CHECK_THROWS_AS(harness::manifest_from_json(bad_method), ConfigError);
}

TEST_CASE("grids run, resume, and reproduce their reports byte for byte") {
  harness::GridManifest man;
  man.base_overrides = {{"train", {{"n_sim", 160}, {"n_obs", 160}}},
                        {"eval", {{"n_test", 5}, {"n_posterior", 12},
                                  {"inld_per_dataset", 3}}}};
  sim::ScenarioSpec spec;
  spec.obs_per_dataset = 40;
  man.scenarios = {spec};
  man.methods = {harness::MethodSpec{harness::Method::Npe, 0.0},
                 harness::MethodSpec{harness::Method::NpeMmd, 0.1}};
  man.seeds = {1, 2};

  const fs::path out = fresh_dir("grid");
  const harness::GridResult first = harness::run_grid(man, out, 1);
  CHECK(first.trained == 4);
  CHECK(first.reused == 0);
  CHECK(first.failed == 0);
  for (const char* name : {"cells.csv", "aggregate.csv", "aggregate.json", "radar.json"})
    CHECK(fs::exists(out / name));

  const std::string cells_csv = slurp(out / "cells.csv");
  const std::string agg_csv = slurp(out / "aggregate.csv");
  const std::string radar_text = slurp(out / "radar.json");
  // header + 4 cells x 8 metrics
  CHECK(std::count(cells_csv.begin(), cells_csv.end(), '\n') == 33);
  CHECK(agg_csv.rfind("scenario,method,lambda,metric,mean,sd,n_seeds\n", 0) == 0);
  CHECK(std::count(agg_csv.begin(), agg_csv.end(), '\n') == 17);

  const json agg = json::parse(slurp(out / "aggregate.json"));
  REQUIRE(agg.is_array());
  CHECK(agg.size() == 16);
  for (const json& row : agg) CHECK(row.at("n_seeds").get<int>() == 2);

  // Radar normalization: the extreme method maps to +-1 per metric.
  const json radar = json::parse(radar_text);
  REQUIRE(radar.contains("gaussian2d/well_specified"));
  for (const auto& [metric, methods_obj] : radar.at("gaussian2d/well_specified").items()) {
    double max_abs = 0.0;
    for (const auto& [method, value] : methods_obj.items())
      max_abs = std::max(max_abs, std::abs(value.get<double>()));
    if (max_abs > 0.0) CHECK(max_abs == 1.0);
  }

  // A clean rerun reuses everything and reproduces the bytes.
  const harness::GridResult second = harness::run_grid(man, out, 1);
  CHECK(second.trained == 0);
  CHECK(second.reused == 4);
  CHECK(second.failed == 0);
  CHECK(slurp(out / "cells.csv") == cells_csv);
  CHECK(slurp(out / "aggregate.csv") == agg_csv);
  CHECK(slurp(out / "radar.json") == radar_text);

  // Simulate an interrupted run: one cell loses its completion marker.
  fs::directory_iterator it(out / "cells");
  REQUIRE(it != fs::directory_iterator{});
  fs::remove(it->path() / "record.json");
  const harness::GridResult resumed = harness::run_grid(man, out, 1);
  CHECK(resumed.trained == 1);
  CHECK(resumed.reused == 3);
  CHECK(slurp(out / "cells.csv") == cells_csv);
  CHECK(slurp(out / "aggregate.csv") == agg_csv);
  CHECK(slurp(out / "radar.json") == radar_text);
}

TEST_CASE("duplicate cells collapse onto one run") {
  harness::GridManifest man;
  man.base_overrides = {{"train", {{"n_sim", 160}, {"n_obs", 160}}},
                        {"eval", {{"n_test", 5}, {"n_posterior", 12},
                                  {"inld_per_dataset", 3}}}};
  sim::ScenarioSpec spec;
  spec.obs_per_dataset = 40;
  man.scenarios = {spec};
  man.methods = {harness::MethodSpec{harness::Method::Npe, 0.0}};
  man.seeds = {1, 1};

  const fs::path out = fresh_dir("grid_dup");
  const harness::GridResult res = harness::run_grid(man, out, 1);
  CHECK(res.trained == 1);
  CHECK(res.reused == 0);
  CHECK(res.failed == 0);
  const std::string cells_csv = slurp(out / "cells.csv");
  // Both manifest rows report, but only one run directory exists.
  CHECK(std::count(cells_csv.begin(), cells_csv.end(), '\n') == 17);
  std::size_t dirs = 0;
  for (const auto& entry : fs::directory_iterator(out / "cells"))
    dirs += entry.is_directory() ? 1 : 0;
  CHECK(dirs == 1);
}

TEST_CASE("grid failures are captured per cell without aborting the sweep") {
  harness::GridManifest man;
  man.base_overrides = {{"train", {{"n_sim", 64}, {"n_obs", 32}, {"batch", 32},
                                   {"epochs", 1}}},
                        {"eval", {{"n_test", 4}, {"n_posterior", 6},
                                  {"inld_per_dataset", 2}}}};
  sim::ScenarioSpec broken;
  broken.family = sim::Family::Camera;
  broken.variant = sim::Variant::SaltPepper;
  broken.source_images = "/nonexistent/images.idx";
  man.scenarios = {broken};
  man.methods = {harness::MethodSpec{harness::Method::Npe, 0.0}};
  man.seeds = {1};

  const fs::path out = fresh_dir("grid_fail");
  const harness::GridResult res = harness::run_grid(man, out, 1);
  CHECK(res.failed == 1);
  CHECK(res.trained == 0);
  bool found_error = false;
  for (const auto& entry : fs::directory_iterator(out / "cells"))
    found_error = found_error || fs::exists(entry.path() / "error.txt");
  CHECK(found_error);
  // Reports still exist, just without the failed cell.
  CHECK(slurp(out / "cells.csv") == metrics::csv_header() + "\n");
}

TEST_CASE("grid rejects empty manifests and bad worker counts") {
  harness::GridManifest empty;
  CHECK_THROWS_AS(harness::run_grid(empty, fresh_dir("grid_empty"), 1), ConfigError);

  harness::GridManifest man;
  man.scenarios = {sim::ScenarioSpec{}};
  man.methods = {harness::MethodSpec{}};
  man.seeds = {1};
  CHECK_THROWS_AS(harness::run_grid(man, fresh_dir("grid_workers"), 0), ConfigError);
}
