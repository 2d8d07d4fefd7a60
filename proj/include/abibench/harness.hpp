#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "abibench/losses.hpp"
#include "abibench/metrics.hpp"
#include "abibench/model.hpp"
#include "abibench/simulators.hpp"

namespace abibench::harness {

enum class Method { Npe, Nnpe, NpeMmd, NpeDann };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// Evaluation protocol: how many held-out datasets, how many posterior draws
// per dataset, and whether the "observed" side reuses the pool the run was
// trained against (only meaningful for the image family's pooled training).
struct EvalConfig {
  Eigen::Index n_test = 100;
  Eigen::Index n_posterior = 100;
  Eigen::Index inld_per_dataset = 10;
  bool observed_seen = false;
};

struct TrainConfig {
  Method method = Method::Npe;
  double lambda = 0.0;
  std::uint64_t seed = 1;
  sim::ScenarioSpec scenario;

  long n_sim = 49920;   // simulated training examples
  long n_obs = 49920;   // observed-domain examples available to UDA methods
  int batch = 32;
  int epochs = 1;       // >1 only makes sense for pooled (image) training
  double base_lr = 5e-4;
  double weight_decay = 0.0;
  double clip_norm = 10.0;
  double grl_weight = 1.0;

  kernels::KernelSpec kernel;
  losses::NnpeConfig nnpe;

  // Architecture overrides; zero means the family default.
  Eigen::Index summary_dim = 0;
  int flow_layers = 0;
  int flow_width = 0;

  EvalConfig eval;

  long steps_per_epoch() const { return n_sim / batch; }
  long total_steps() const { return static_cast<long>(epochs) * steps_per_epoch(); }
  losses::UdaConfig uda() const { return {lambda, kernel, grl_weight}; }
};

// Family defaults: the 2-D task trains online for one epoch over n_sim fresh
// draws; the image task trains for several epochs over a fixed pool.
TrainConfig default_config(sim::Family family, Method method);

nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);
// Hash of the canonical (sorted-key) JSON dump; names run directories.
std::string config_hash(const TrainConfig& cfg);

model::PosteriorModel build_model(const TrainConfig& cfg);

struct RunRecord {
  TrainConfig config;
  std::string hash;
  std::vector<double> loss_trace;  // one entry per optimizer step
  double wall_seconds = 0.0;
  std::filesystem::path checkpoint_path;
};

// Trains one configuration and writes checkpoint.bin + record.json into
// run_dir (created if needed).
RunRecord train(const TrainConfig& cfg, const std::filesystem::path& run_dir);

RunRecord load_record(const std::filesystem::path& run_dir);

// Evaluates a trained run against `scenario` (which may differ from the
// training scenario: the data-generating process for the observed side).
metrics::MetricsReport evaluate(const RunRecord& record, const model::PosteriorModel& m,
                                const sim::ScenarioSpec& scenario, const EvalConfig& eval);
metrics::MetricsReport evaluate(const std::filesystem::path& run_dir,
                                const sim::ScenarioSpec& scenario, const EvalConfig& eval);

struct MethodSpec {
  Method method = Method::Npe;
  double lambda = 0.0;
  std::string label() const;
};

struct GridManifest {
  nlohmann::json base_overrides;  // merged over family defaults per cell
  std::vector<sim::ScenarioSpec> scenarios;
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds;
};

GridManifest manifest_from_json(const nlohmann::json& j);
TrainConfig cell_config(const GridManifest& manifest, const sim::ScenarioSpec& scenario,
                        const MethodSpec& method, std::uint64_t seed);

struct GridResult {
  int trained = 0;
  int reused = 0;
  int failed = 0;
};

// Runs every (scenario, method, seed) cell, resuming over completed cell
// directories, then writes cells.csv, aggregate.csv, and radar.json.
// Outputs are byte-identical across reruns and across interrupted resumes.
GridResult run_grid(const GridManifest& manifest, const std::filesystem::path& out_dir,
                    int workers);

}  // namespace abibench::harness
