#include "abibench/harness.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>

#include "abibench/checkpoint.hpp"
#include "abibench/optimizer.hpp"

namespace abibench::harness {

using nlohmann::json;

namespace {

constexpr const char* kCheckpointFile = "checkpoint.bin";
constexpr const char* kRecordFile = "record.json";

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::Npe: return "npe";
    case Method::Nnpe: return "nnpe";
    case Method::NpeMmd: return "npe_mmd";
    case Method::NpeDann: return "npe_dann";
  }
  throw ConfigError("unknown method value");
}

Method method_from_name(const std::string& name) {
  if (name == "npe") return Method::Npe;
  if (name == "nnpe") return Method::Nnpe;
  if (name == "npe_mmd") return Method::NpeMmd;
  if (name == "npe_dann") return Method::NpeDann;
  throw ConfigError("unknown method: " + name);
}

TrainConfig default_config(sim::Family family, Method method) {
  TrainConfig cfg;
  cfg.method = method;
  cfg.scenario = sim::ScenarioSpec{};
  cfg.scenario.family = family;
  if (family == sim::Family::Gaussian2d) {
    cfg.n_sim = 49920;
    cfg.n_obs = 49920;
    cfg.batch = 32;
    cfg.epochs = 1;
    cfg.weight_decay = 0.0;
  } else {
    cfg.n_sim = 50000;
    cfg.n_obs = 1000;
    cfg.batch = 32;
    cfg.epochs = 20;
    cfg.weight_decay = 1e-4;
    if (method == Method::NpeMmd) {
      cfg.batch = 128;
      cfg.epochs = 80;
    }
  }
  return cfg;
}

json config_to_json(const TrainConfig& cfg) {
  json j;
  j["method"] = method_name(cfg.method);
  j["lambda"] = cfg.lambda;
  j["seed"] = cfg.seed;
  j["scenario"] = sim::scenario_to_json(cfg.scenario);
  j["train"] = {{"n_sim", cfg.n_sim},
                {"n_obs", cfg.n_obs},
                {"batch", cfg.batch},
                {"epochs", cfg.epochs},
                {"base_lr", cfg.base_lr},
                {"weight_decay", cfg.weight_decay},
                {"clip_norm", cfg.clip_norm},
                {"grl_weight", cfg.grl_weight}};
  j["kernel"] = {{"scales", cfg.kernel.scales}};
  j["nnpe"] = {{"spike_scale", cfg.nnpe.spike_scale},
               {"slab_scale", cfg.nnpe.slab_scale},
               {"bernoulli_p", cfg.nnpe.bernoulli_p}};
  j["arch"] = {{"summary_dim", cfg.summary_dim},
               {"flow_layers", cfg.flow_layers},
               {"flow_width", cfg.flow_width}};
  j["eval"] = {{"n_test", cfg.eval.n_test},
               {"n_posterior", cfg.eval.n_posterior},
               {"inld_per_dataset", cfg.eval.inld_per_dataset},
               {"observed_seen", cfg.eval.observed_seen}};
  return j;
}

TrainConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  if (!j.contains("scenario")) throw ConfigError("train config needs a scenario");
  const sim::ScenarioSpec scenario = sim::scenario_from_json(j.at("scenario"));
  const Method method = method_from_name(j.value("method", std::string("npe")));

  TrainConfig cfg = default_config(scenario.family, method);
  cfg.scenario = scenario;
  cfg.lambda = j.value("lambda", cfg.lambda);
  cfg.seed = j.value("seed", cfg.seed);

  if (j.contains("train")) {
    const json& t = j.at("train");
    cfg.n_sim = t.value("n_sim", cfg.n_sim);
    cfg.n_obs = t.value("n_obs", cfg.n_obs);
    cfg.batch = t.value("batch", cfg.batch);
    cfg.epochs = t.value("epochs", cfg.epochs);
    cfg.base_lr = t.value("base_lr", cfg.base_lr);
    cfg.weight_decay = t.value("weight_decay", cfg.weight_decay);
    cfg.clip_norm = t.value("clip_norm", cfg.clip_norm);
    cfg.grl_weight = t.value("grl_weight", cfg.grl_weight);
  }
  if (j.contains("kernel")) {
    cfg.kernel.scales = j.at("kernel").value("scales", cfg.kernel.scales);
  }
  if (j.contains("nnpe")) {
    const json& n = j.at("nnpe");
    cfg.nnpe.spike_scale = n.value("spike_scale", cfg.nnpe.spike_scale);
    cfg.nnpe.slab_scale = n.value("slab_scale", cfg.nnpe.slab_scale);
    cfg.nnpe.bernoulli_p = n.value("bernoulli_p", cfg.nnpe.bernoulli_p);
  }
  if (j.contains("arch")) {
    const json& a = j.at("arch");
    cfg.summary_dim = a.value("summary_dim", cfg.summary_dim);
    cfg.flow_layers = a.value("flow_layers", cfg.flow_layers);
    cfg.flow_width = a.value("flow_width", cfg.flow_width);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    cfg.eval.n_test = e.value("n_test", cfg.eval.n_test);
    cfg.eval.n_posterior = e.value("n_posterior", cfg.eval.n_posterior);
    cfg.eval.inld_per_dataset = e.value("inld_per_dataset", cfg.eval.inld_per_dataset);
    cfg.eval.observed_seen = e.value("observed_seen", cfg.eval.observed_seen);
  }

  if (cfg.lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (cfg.batch <= 0) throw ConfigError("batch must be positive");
  if (cfg.epochs <= 0) throw ConfigError("epochs must be positive");
  if (cfg.n_sim < cfg.batch)
    throw ConfigError("budget/batch mismatch: n_sim must be at least one batch");
  const bool uda = cfg.method == Method::NpeMmd || cfg.method == Method::NpeDann;
  if (uda && cfg.lambda > 0.0 && cfg.n_obs < cfg.batch)
    throw ConfigError("budget/batch mismatch: n_obs must be at least one batch");
  if (cfg.base_lr <= 0.0) throw ConfigError("base_lr must be positive");
  if (cfg.clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
  if (cfg.kernel.scales.empty()) throw ConfigError("kernel needs at least one scale");
  for (double s : cfg.kernel.scales)
    if (s <= 0.0) throw ConfigError("kernel scales must be positive");
  if (cfg.eval.n_test <= 0) throw ConfigError("eval.n_test must be positive");
  if (cfg.eval.n_posterior < 2) throw ConfigError("eval.n_posterior must be at least 2");
  if (cfg.eval.inld_per_dataset <= 0)
    throw ConfigError("eval.inld_per_dataset must be positive");
  if (cfg.summary_dim < 0 || cfg.flow_layers < 0 || cfg.flow_width < 0)
    throw ConfigError("arch overrides must be non-negative");
  return cfg;
}

std::string config_hash(const TrainConfig& cfg) {
  const std::uint64_t h = rng::fnv1a64(config_to_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

model::PosteriorModel build_model(const TrainConfig& cfg) {
  model::PosteriorModel m;
  if (cfg.scenario.is_gaussian()) {
    m.kind = model::SummaryKind::DeepSet;
    if (cfg.summary_dim > 0) m.deepset.summary_dim = cfg.summary_dim;
    m.flow.param_dim = 2;
    m.flow.cond_dim = m.deepset.summary_dim;
    m.flow.n_layers = cfg.flow_layers > 0 ? cfg.flow_layers : 3;
    m.classifier.hidden_layers = 2;
  } else {
    m.kind = model::SummaryKind::Conv;
    if (cfg.summary_dim > 0) m.conv.summary_dim = cfg.summary_dim;
    m.flow.param_dim = static_cast<Eigen::Index>(m.conv.image_hw * m.conv.image_hw);
    m.flow.cond_dim = m.conv.summary_dim;
    m.flow.n_layers = cfg.flow_layers > 0 ? cfg.flow_layers : 6;
    m.classifier.hidden_layers = 3;
  }
  if (cfg.flow_width > 0) m.flow.width = cfg.flow_width;
  m.flow.perm_seed = rng::derive_seed(cfg.seed, "flow-perms");
  m.classifier.input_dim = m.summary_dim();
  m.has_classifier = cfg.method == Method::NpeDann;
  model::init_model(m, cfg.seed);
  return m;
}

namespace {

struct ObservedPool {
  Matrix theta;  // n_obs x J
  Matrix x;      // n_obs x J (camera datasets are single flat images)
};

// The observed pool the image benchmark trains against. Non-shift variants
// keep consuming the base source (so IDX-backed pools never overlap the
// training images); the prior-shift variant opens its own source.
ObservedPool camera_observed_pool(const TrainConfig& cfg, sim::ImageSource& base_src) {
  rng::RngStream obs_stream(cfg.seed, "train-obs");
  std::optional<sim::ImageSource> shift_src;
  sim::ImageSource* src = &base_src;
  if (cfg.scenario.variant == sim::Variant::ImagePriorShift) {
    shift_src.emplace(sim::make_image_source(cfg.scenario, cfg.seed));
    src = &*shift_src;
  }
  ObservedPool pool;
  pool.theta = sim::sample_prior(cfg.scenario, cfg.n_obs, obs_stream, src);
  pool.x.resize(cfg.n_obs, pool.theta.cols());
  for (Eigen::Index i = 0; i < pool.theta.rows(); ++i)
    pool.x.row(i) = sim::simulate_dataset(pool.theta.row(i), cfg.scenario, obs_stream);
  return pool;
}

std::vector<Matrix> rows_as_datasets(const Matrix& pool, const std::vector<long>& idx,
                                     long begin, long count) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k)
    out.push_back(pool.row(idx[static_cast<std::size_t>(begin + k)]));
  return out;
}

}  // namespace

RunRecord train(const TrainConfig& cfg, const std::filesystem::path& run_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(run_dir);

  model::PosteriorModel m = build_model(cfg);
  const bool uda =
      (cfg.method == Method::NpeMmd || cfg.method == Method::NpeDann) && cfg.lambda > 0.0;
  const long total = cfg.total_steps();

  opt::AdamConfig acfg;
  acfg.base_lr = cfg.base_lr;
  acfg.total_steps = total;
  acfg.weight_decay = cfg.weight_decay;
  acfg.clip_norm = cfg.clip_norm;
  opt::Adam adam(acfg);

  rng::RngStream sim_stream(cfg.seed, "train-sim");
  rng::RngStream nnpe_stream(cfg.seed, "train-nnpe");
  const sim::ScenarioSpec assumed = cfg.scenario.assumed();

  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(total));

  long step_index = 0;
  auto step_once = [&](const losses::SimulationBatch& batch, const std::vector<Matrix>& observed) {
    try {
      ad::Graph g;
      ad::Var loss;
      switch (cfg.method) {
        case Method::Npe:
        case Method::Nnpe:
          loss = losses::npe_loss(g, m, batch);
          break;
        case Method::NpeMmd:
          loss = losses::npe_mmd_loss(g, m, batch, observed, cfg.uda());
          break;
        case Method::NpeDann:
          loss = losses::npe_dann_loss(g, m, batch, observed, cfg.uda());
          break;
      }
      const double value = loss.value()(0, 0);
      ad::GradMap grads = g.backward(loss);
      adam.step(m.params, std::move(grads));
      trace.push_back(value);
    } catch (const NumericalError& e) {
      throw NumericalError("training step " + std::to_string(step_index) + ": " + e.what());
    }
    ++step_index;
  };

  if (cfg.scenario.is_gaussian()) {
    // Online mode: every batch is freshly simulated, observed batches are
    // fresh draws from the scenario's data-generating process.
    rng::RngStream obs_stream(cfg.seed, "train-obs");
    for (long step = 0; step < total; ++step) {
      losses::SimulationBatch batch;
      batch.theta = sim::sample_prior(assumed, cfg.batch, sim_stream);
      batch.datasets.reserve(static_cast<std::size_t>(cfg.batch));
      for (int b = 0; b < cfg.batch; ++b)
        batch.datasets.push_back(sim::simulate_dataset(batch.theta.row(b), assumed, sim_stream));
      if (cfg.method == Method::Nnpe) batch = losses::nnpe_augment(batch, cfg.nnpe, nnpe_stream);

      std::vector<Matrix> observed;
      if (uda) {
        const Matrix theta_obs = sim::sample_prior(cfg.scenario, cfg.batch, obs_stream);
        observed.reserve(static_cast<std::size_t>(cfg.batch));
        for (int b = 0; b < cfg.batch; ++b)
          observed.push_back(sim::simulate_dataset(theta_obs.row(b), cfg.scenario, obs_stream));
      }
      step_once(batch, observed);
    }
  } else {
    // Pooled mode: a fixed simulated pool revisited over epochs and a fixed
    // observed pool sampled with replacement.
    sim::ImageSource base_src = sim::make_assumed_image_source(cfg.scenario, cfg.seed);
    const Matrix theta_pool = sim::sample_prior(assumed, cfg.n_sim, sim_stream, &base_src);
    Matrix x_pool(cfg.n_sim, theta_pool.cols());
    for (Eigen::Index i = 0; i < theta_pool.rows(); ++i)
      x_pool.row(i) = sim::simulate_dataset(theta_pool.row(i), assumed, sim_stream);

    Matrix obs_pool;
    if (uda) obs_pool = camera_observed_pool(cfg, base_src).x;

    rng::RngStream shuffle_stream(cfg.seed, "train-shuffle");
    rng::RngStream pick_stream(cfg.seed, "train-obs-pick");
    std::vector<long> order(static_cast<std::size_t>(cfg.n_sim));
    std::iota(order.begin(), order.end(), 0L);
    std::vector<long> obs_idx(static_cast<std::size_t>(cfg.batch));
    const long per_epoch = cfg.steps_per_epoch();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      shuffle_stream.shuffle(order);
      for (long s = 0; s < per_epoch; ++s) {
        const long begin = s * cfg.batch;
        losses::SimulationBatch batch;
        batch.theta.resize(cfg.batch, theta_pool.cols());
        for (int b = 0; b < cfg.batch; ++b)
          batch.theta.row(b) = theta_pool.row(order[static_cast<std::size_t>(begin + b)]);
        batch.datasets = rows_as_datasets(x_pool, order, begin, cfg.batch);
        if (cfg.method == Method::Nnpe)
          batch = losses::nnpe_augment(batch, cfg.nnpe, nnpe_stream);

        std::vector<Matrix> observed;
        if (uda) {
          for (int b = 0; b < cfg.batch; ++b)
            obs_idx[static_cast<std::size_t>(b)] = pick_stream.uniform_int(0, cfg.n_obs - 1);
          observed = rows_as_datasets(obs_pool, obs_idx, 0, cfg.batch);
        }
        step_once(batch, observed);
      }
    }
  }

  RunRecord record;
  record.config = cfg;
  record.hash = config_hash(cfg);
  record.loss_trace = std::move(trace);
  record.checkpoint_path = run_dir / kCheckpointFile;
  save_checkpoint(record.checkpoint_path, m.params, config_to_json(cfg), record.hash);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json rec_json;
  rec_json["config"] = config_to_json(cfg);
  rec_json["config_hash"] = record.hash;
  rec_json["loss_trace"] = record.loss_trace;
  rec_json["wall_seconds"] = record.wall_seconds;
  rec_json["checkpoint"] = kCheckpointFile;
  write_text_file(run_dir / kRecordFile, rec_json.dump(2) + "\n");
  return record;
}

RunRecord load_record(const std::filesystem::path& run_dir) {
  const json j = load_json_file(run_dir / kRecordFile);
  RunRecord record;
  record.config = config_from_json(j.at("config"));
  record.hash = j.value("config_hash", std::string());
  if (record.hash != config_hash(record.config))
    throw DataError("record config hash mismatch in " + run_dir.string());
  record.loss_trace = j.value("loss_trace", std::vector<double>{});
  record.wall_seconds = j.value("wall_seconds", 0.0);
  record.checkpoint_path = run_dir / j.value("checkpoint", std::string(kCheckpointFile));
  if (!std::filesystem::exists(record.checkpoint_path))
    throw DataError("record references a missing checkpoint: " +
                    record.checkpoint_path.string());
  return record;
}

namespace {

std::string method_label(const TrainConfig& cfg) {
  MethodSpec spec{cfg.method, cfg.lambda};
  return spec.label();
}

// How many images the training run consumed from the base and shifted
// sources, so IDX-backed evaluation can stay disjoint from training data.
long base_source_consumed(const TrainConfig& cfg) {
  if (cfg.scenario.is_gaussian()) return 0;
  long n = cfg.n_sim;
  const bool uda =
      (cfg.method == Method::NpeMmd || cfg.method == Method::NpeDann) && cfg.lambda > 0.0;
  if (uda && cfg.scenario.variant != sim::Variant::ImagePriorShift) n += cfg.n_obs;
  return n;
}

long shift_source_consumed(const TrainConfig& cfg) {
  if (cfg.scenario.is_gaussian()) return 0;
  const bool uda =
      (cfg.method == Method::NpeMmd || cfg.method == Method::NpeDann) && cfg.lambda > 0.0;
  return (uda && cfg.scenario.variant == sim::Variant::ImagePriorShift) ? cfg.n_obs : 0;
}

}  // namespace

std::string MethodSpec::label() const {
  const bool uda = method == Method::NpeMmd || method == Method::NpeDann;
  if (uda && lambda > 0.0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s@%g", method_name(method).c_str(), lambda);
    return std::string(buf);
  }
  return method_name(method);
}

metrics::MetricsReport evaluate(const RunRecord& record, const model::PosteriorModel& m,
                                const sim::ScenarioSpec& scenario, const EvalConfig& eval) {
  const TrainConfig& tc = record.config;
  if (scenario.family != tc.scenario.family)
    throw ConfigError("evaluation scenario family does not match the trained model");

  const std::uint64_t seed = tc.seed;
  const sim::ScenarioSpec assumed = scenario.assumed();
  const Eigen::Index n_test = eval.n_test;

  metrics::EvalBundle b;
  if (scenario.is_gaussian()) {
    rng::RngStream data_stream(seed, "eval-data");
    b.theta_star = sim::sample_prior(scenario, n_test, data_stream);
    b.observations.reserve(static_cast<std::size_t>(n_test));
    for (Eigen::Index i = 0; i < n_test; ++i)
      b.observations.push_back(sim::simulate_dataset(b.theta_star.row(i), scenario, data_stream));
    b.analytic.reserve(static_cast<std::size_t>(n_test));
    for (Eigen::Index i = 0; i < n_test; ++i)
      b.analytic.push_back(sim::analytic_posterior(b.observations[static_cast<std::size_t>(i)]));
    // Contraction is measured against the prior the model was trained with.
    b.prior_variance = Vector::Constant(2, assumed.prior_scale);
  } else if (eval.observed_seen) {
    // Replays the training-time observed pool exactly: same sources, same
    // seed streams, same cursor position past the simulated pool.
    if (n_test > tc.n_obs)
      throw ConfigError("observed_seen evaluation needs n_test <= the trained n_obs pool");
    rng::RngStream replay(seed, "train-sim");
    sim::ImageSource base_src = sim::make_assumed_image_source(tc.scenario, seed);
    if (!base_src.procedural()) base_src.skip(tc.n_sim, replay);
    ObservedPool pool = camera_observed_pool(tc, base_src);
    b.theta_star = pool.theta.topRows(n_test);
    b.observations.reserve(static_cast<std::size_t>(n_test));
    for (Eigen::Index i = 0; i < n_test; ++i) b.observations.push_back(pool.x.row(i));
  } else {
    rng::RngStream data_stream(seed, "eval-data");
    sim::ImageSource src = sim::make_image_source(scenario, rng::derive_seed(seed, "eval-data"));
    if (!src.procedural()) {
      const bool shifted_source = scenario.variant == sim::Variant::ImagePriorShift &&
                                  !scenario.shift_images.empty();
      src.skip(shifted_source ? shift_source_consumed(tc) : base_source_consumed(tc),
               data_stream);
    }
    b.theta_star = sim::sample_prior(scenario, n_test, data_stream, &src);
    b.observations.reserve(static_cast<std::size_t>(n_test));
    for (Eigen::Index i = 0; i < n_test; ++i)
      b.observations.push_back(sim::simulate_dataset(b.theta_star.row(i), scenario, data_stream));
  }

  // For the camera family prior_variance stays empty: contraction falls back
  // to the empirical per-pixel variance, which skips degenerate background
  // pixels that carry no measurable information gain.
  b.summaries = model::summaries(m, b.observations);
  b.posterior_samples.reserve(static_cast<std::size_t>(n_test));
  for (Eigen::Index i = 0; i < n_test; ++i) {
    rng::RngStream draw_stream(seed, "eval-base", static_cast<std::uint64_t>(i));
    b.posterior_samples.push_back(
        model::posterior_sample(m, b.summaries.row(i), eval.n_posterior, draw_stream));
  }
  metrics::validate_bundle(b);

  // Simulated-side summaries for the summary-space domain distance.
  Matrix sim_summaries;
  {
    rng::RngStream sim_stream(seed, "eval-sim");
    std::vector<Matrix> sim_data;
    sim_data.reserve(static_cast<std::size_t>(n_test));
    if (scenario.is_gaussian()) {
      const Matrix theta_sim = sim::sample_prior(assumed, n_test, sim_stream);
      for (Eigen::Index i = 0; i < n_test; ++i)
        sim_data.push_back(sim::simulate_dataset(theta_sim.row(i), assumed, sim_stream));
    } else {
      sim::ImageSource src =
          sim::make_assumed_image_source(scenario, rng::derive_seed(seed, "eval-sim"));
      if (!src.procedural()) src.skip(base_source_consumed(tc), sim_stream);
      const Matrix theta_sim = sim::sample_prior(assumed, n_test, sim_stream, &src);
      for (Eigen::Index i = 0; i < n_test; ++i)
        sim_data.push_back(sim::simulate_dataset(theta_sim.row(i), assumed, sim_stream));
    }
    sim_summaries = model::summaries(m, sim_data);
  }

  // Reference parameters for the latent-space diagnostic.
  std::vector<Matrix> inld_refs;
  inld_refs.reserve(static_cast<std::size_t>(n_test));
  for (Eigen::Index i = 0; i < n_test; ++i) {
    if (scenario.is_gaussian()) {
      rng::RngStream ref_stream(seed, "eval-inld-ref", static_cast<std::uint64_t>(i));
      inld_refs.push_back(sim::analytic_posterior_sample(b.analytic[static_cast<std::size_t>(i)],
                                                         eval.inld_per_dataset, ref_stream));
    } else {
      inld_refs.push_back(b.theta_star.row(i).replicate(eval.inld_per_dataset, 1));
    }
  }

  metrics::MetricsReport report;
  report.method = method_label(tc);
  report.scenario = scenario.name();
  report.variant_param = scenario.variant_param();
  report.seed = tc.seed;
  report.config_hash = record.hash;

  const metrics::PpdDistance dist =
      scenario.is_gaussian() ? metrics::PpdDistance::Mmd : metrics::PpdDistance::ImageNrmse;
  report.values.emplace_back(
      "nrmse", scenario.is_gaussian() ? metrics::nrmse(b) : metrics::image_nrmse(b));
  report.values.emplace_back("ece", metrics::ece(b));
  report.values.emplace_back("pc", metrics::posterior_contraction(b));
  report.values.emplace_back("ppd", metrics::ppd(b, assumed, dist, tc.kernel, seed));
  report.values.emplace_back("ssdd", metrics::ssdd(sim_summaries, b.summaries, tc.kernel));
  report.values.emplace_back("inld", metrics::inld(m, b, inld_refs, tc.kernel, seed));
  if (scenario.is_gaussian()) {
    report.values.emplace_back("rmse_to_analytic", metrics::rmse_to_analytic(b));
    report.values.emplace_back("mmd_to_analytic", metrics::mmd2_to_analytic(b, tc.kernel, seed));
  }
  return report;
}

metrics::MetricsReport evaluate(const std::filesystem::path& run_dir,
                                const sim::ScenarioSpec& scenario, const EvalConfig& eval) {
  RunRecord record = load_record(run_dir);
  Checkpoint ckpt = load_checkpoint(record.checkpoint_path);
  model::PosteriorModel m = build_model(record.config);
  for (auto& [name, value] : m.params) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end()) throw DataError("checkpoint misses parameter: " + name);
    if (it->second.rows() != value.rows() || it->second.cols() != value.cols())
      throw DataError("checkpoint shape mismatch for parameter: " + name);
    value = it->second;
  }
  return evaluate(record, m, scenario, eval);
}

GridManifest manifest_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("manifest must be a JSON object");
  GridManifest man;
  man.base_overrides = j.value("base", json::object());
  if (!man.base_overrides.is_object()) throw ConfigError("manifest base must be an object");

  if (!j.contains("scenarios") || !j.at("scenarios").is_array() || j.at("scenarios").empty())
    throw ConfigError("manifest needs a non-empty scenarios array");
  for (const json& s : j.at("scenarios")) man.scenarios.push_back(sim::scenario_from_json(s));

  if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty())
    throw ConfigError("manifest needs a non-empty methods array");
  for (const json& mj : j.at("methods")) {
    MethodSpec spec;
    if (mj.is_string()) {
      spec.method = method_from_name(mj.get<std::string>());
    } else if (mj.is_object()) {
      spec.method = method_from_name(mj.at("method").get<std::string>());
      spec.lambda = mj.value("lambda", 0.0);
    } else {
      throw ConfigError("manifest methods entries must be strings or objects");
    }
    if (spec.lambda < 0.0) throw ConfigError("manifest lambda must be non-negative");
    man.methods.push_back(spec);
  }

  if (!j.contains("seeds") || !j.at("seeds").is_array() || j.at("seeds").empty())
    throw ConfigError("manifest needs a non-empty seeds array");
  for (const json& s : j.at("seeds")) man.seeds.push_back(s.get<std::uint64_t>());
  return man;
}

TrainConfig cell_config(const GridManifest& manifest, const sim::ScenarioSpec& scenario,
                        const MethodSpec& method, std::uint64_t seed) {
  json j = manifest.base_overrides;
  j["scenario"] = sim::scenario_to_json(scenario);
  j["method"] = method_name(method.method);
  j["lambda"] = method.lambda;
  j["seed"] = seed;
  return config_from_json(j);
}

}  // namespace abibench::harness
