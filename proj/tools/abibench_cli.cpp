#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "abibench/checkpoint.hpp"
#include "abibench/harness.hpp"

namespace {

using namespace abibench;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

std::string default_out_dir() {
  const char* env = std::getenv("ABIBENCH_OUT_DIR");
  return env != nullptr && *env != '\0' ? std::string(env) : std::string("out");
}

int run_train(const std::string& config_path, const std::string& out_dir) {
  const harness::TrainConfig cfg = harness::config_from_json(load_json(config_path));
  const std::string hash = harness::config_hash(cfg);
  const std::filesystem::path run_dir = std::filesystem::path(out_dir) / hash;
  const harness::RunRecord record = harness::train(cfg, run_dir);
  std::printf("trained %s on %s: %zu steps, final loss %.6g, %.1f s\n",
              harness::method_name(cfg.method).c_str(), cfg.scenario.name().c_str(),
              record.loss_trace.size(),
              record.loss_trace.empty() ? 0.0 : record.loss_trace.back(),
              record.wall_seconds);
  std::printf("run dir: %s\n", run_dir.string().c_str());
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& scenario_path, long n_test,
             long n_posterior, bool observed_seen) {
  std::filesystem::path run_dir(checkpoint);
  if (std::filesystem::is_regular_file(run_dir)) run_dir = run_dir.parent_path();
  const harness::RunRecord record = harness::load_record(run_dir);
  const sim::ScenarioSpec scenario = sim::scenario_from_json(load_json(scenario_path));
  harness::EvalConfig ecfg = record.config.eval;
  if (n_test > 0) ecfg.n_test = n_test;
  if (n_posterior > 0) ecfg.n_posterior = n_posterior;
  ecfg.observed_seen = observed_seen;
  const metrics::MetricsReport report = harness::evaluate(run_dir, scenario, ecfg);
  std::cout << metrics::csv_header() << "\n" << metrics::csv_rows(report);
  return 0;
}

int run_grid_cmd(const std::string& manifest_path, const std::string& out_dir, int workers) {
  const harness::GridManifest manifest = harness::manifest_from_json(load_json(manifest_path));
  const harness::GridResult result = harness::run_grid(manifest, out_dir, workers);
  std::printf("grid done: %d trained, %d reused, %d failed\n", result.trained, result.reused,
              result.failed);
  std::printf("reports: %s/{cells.csv,aggregate.csv,aggregate.json,radar.json}\n",
              out_dir.c_str());
  return result.failed == 0 ? 0 : 1;
}

int run_report(const std::string& in_dir, const std::string& format) {
  std::filesystem::path path(in_dir);
  if (format == "csv") {
    path /= "aggregate.csv";
  } else if (format == "json") {
    path /= "aggregate.json";
  } else if (format == "radar") {
    path /= "radar.json";
  } else {
    throw ConfigError("unknown report format: " + format);
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("no report at " + path.string() + " (run `grid` first)");
  std::cout << in.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"benchmark harness for robust amortized Bayesian inference"};
  app.require_subcommand(1);
  const std::string out_default = default_out_dir();

  std::string config_path;
  std::string train_out = out_default;
  CLI::App* train_cmd = app.add_subcommand("train", "train one configuration");
  train_cmd->add_option("--config", config_path, "train config JSON")->required();
  train_cmd->add_option("--out", train_out, "output directory (default: $ABIBENCH_OUT_DIR or ./out)");

  std::string checkpoint;
  std::string scenario_path;
  long n_test = 0;
  long n_posterior = 0;
  bool observed_seen = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a trained run against a scenario");
  eval_cmd->add_option("--checkpoint", checkpoint, "run directory or checkpoint.bin path")
      ->required();
  eval_cmd->add_option("--scenario", scenario_path, "scenario JSON")->required();
  eval_cmd->add_option("--n-test", n_test, "override number of test datasets");
  eval_cmd->add_option("--n-posterior", n_posterior, "override posterior draws per dataset");
  eval_cmd->add_flag("--observed-seen", observed_seen,
                     "evaluate on the pool the run trained against (image family)");

  std::string manifest_path;
  std::string grid_out = out_default;
  int workers = 1;
  CLI::App* grid_cmd = app.add_subcommand("grid", "train and evaluate a manifest of cells");
  grid_cmd->add_option("--manifest", manifest_path, "grid manifest JSON")->required();
  grid_cmd->add_option("--out", grid_out, "output directory (default: $ABIBENCH_OUT_DIR or ./out)");
  grid_cmd->add_option("--workers", workers, "concurrent cells")->check(CLI::PositiveNumber);

  std::string report_in = out_default;
  std::string report_format = "csv";
  CLI::App* report_cmd = app.add_subcommand("report", "print grid reports");
  report_cmd->add_option("--in", report_in, "grid output directory");
  report_cmd->add_option("--format", report_format, "csv, json, or radar");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train_cmd->parsed()) return run_train(config_path, train_out);
    if (eval_cmd->parsed()) return run_eval(checkpoint, scenario_path, n_test, n_posterior,
                                            observed_seen);
    if (grid_cmd->parsed()) return run_grid_cmd(manifest_path, grid_out, workers);
    if (report_cmd->parsed()) return run_report(report_in, report_format);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
