#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "abibench/losses.hpp"
#include "abibench/optimizer.hpp"
#include "abibench/simulators.hpp"

using namespace abibench;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kTwoLog2 = 1.3862943611198906;

model::PosteriorModel small_model(bool with_classifier, std::uint64_t seed) {
  model::PosteriorModel m;
  m.kind = model::SummaryKind::DeepSet;
  m.flow.param_dim = 2;
  m.flow.cond_dim = m.deepset.summary_dim;
  m.flow.n_layers = 3;
  m.flow.width = 32;
  m.classifier.input_dim = m.deepset.summary_dim;
  m.classifier.width = 32;
  m.classifier.hidden_layers = 2;
  m.has_classifier = with_classifier;
  model::init_model(m, seed);
  return m;
}

losses::SimulationBatch gaussian_batch(int b, std::uint64_t seed, double shift = 0.0) {
  sim::ScenarioSpec s;
  s.obs_per_dataset = 20;
  rng::RngStream rs(seed, "batch");
  losses::SimulationBatch batch;
  batch.theta = sim::sample_prior(s, b, rs);
  batch.theta.array() += shift;
  for (int i = 0; i < b; ++i)
    batch.datasets.push_back(sim::simulate_dataset(batch.theta.row(i), s, rs));
  return batch;
}

void zero_flow_couplings(model::PosteriorModel& m) {
  for (int l = 0; l < m.flow.n_layers; ++l) {
    const std::string base = "flow.l" + std::to_string(l) + ".cond.";
    m.params.at(base + "w2").setZero();
    m.params.at(base + "b2").setZero();
  }
}

void zero_classifier(model::PosteriorModel& m) {
  for (auto& [name, value] : m.params)
    if (name.rfind("classifier.", 0) == 0) value.setZero();
}

// Domain-classifier loss recomputed outside the tape with fixed parameters.
double domain_loss_plain(const model::PosteriorModel& m, const losses::SimulationBatch& batch,
                         const std::vector<Matrix>& observed) {
  const Matrix s_sim = model::summaries(m, batch.datasets);
  const Matrix s_obs = model::summaries(m, observed);
  const Matrix l_sim = nets::classifier_logits(m.classifier, m.params, "classifier", s_sim);
  const Matrix l_obs = nets::classifier_logits(m.classifier, m.params, "classifier", s_obs);
  const auto softplus = [](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  };
  double acc = 0.0;
  for (Eigen::Index i = 0; i < l_sim.rows(); ++i) acc += softplus(-l_sim(i, 0));
  double loss = acc / static_cast<double>(l_sim.rows());
  acc = 0.0;
  for (Eigen::Index i = 0; i < l_obs.rows(); ++i) acc += softplus(l_obs(i, 0));
  return loss + acc / static_cast<double>(l_obs.rows());
}

}  // namespace

TEST_CASE("identity couplings pin the loss at the base log density") {
  model::PosteriorModel m = small_model(false, 3);
  zero_flow_couplings(m);
  losses::SimulationBatch batch = gaussian_batch(4, 7);
  batch.theta.setZero();
  ad::Graph g;
  const double loss = losses::npe_loss(g, m, batch).value()(0, 0);
  CHECK(loss == doctest::Approx(kLog2Pi).epsilon(1e-12));
}

TEST_CASE("duplicating the batch leaves the mean loss unchanged") {
  model::PosteriorModel m = small_model(false, 5);
  losses::SimulationBatch batch = gaussian_batch(6, 11);
  losses::SimulationBatch doubled;
  doubled.theta.resize(12, 2);
  doubled.theta << batch.theta, batch.theta;
  doubled.datasets = batch.datasets;
  doubled.datasets.insert(doubled.datasets.end(), batch.datasets.begin(), batch.datasets.end());

  ad::Graph g1;
  ad::Graph g2;
  const double single = losses::npe_loss(g1, m, batch).value()(0, 0);
  const double twice = losses::npe_loss(g2, m, doubled).value()(0, 0);
  CHECK(twice == doctest::Approx(single).epsilon(1e-14));
}

TEST_CASE("lambda zero collapses both composite losses onto plain NPE") {
  losses::SimulationBatch batch = gaussian_batch(5, 13);
  losses::SimulationBatch obs_batch = gaussian_batch(5, 17, 2.0);
  losses::UdaConfig uda;
  uda.lambda = 0.0;

  for (const bool dann : {false, true}) {
    model::PosteriorModel m = small_model(true, 23);
    ad::Graph g_ref;
    ad::Var ref = losses::npe_loss(g_ref, m, batch);
    ad::GradMap g1 = g_ref.backward(ref);

    ad::Graph g_uda;
    ad::Var composite = dann ? losses::npe_dann_loss(g_uda, m, batch, obs_batch.datasets, uda)
                             : losses::npe_mmd_loss(g_uda, m, batch, obs_batch.datasets, uda);
    CHECK(composite.value()(0, 0) == ref.value()(0, 0));
    ad::GradMap g2 = g_uda.backward(composite);
    for (const auto& [name, grad] : g1) {
      CHECK((grad - g2.at(name)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("the MMD composite decomposes exactly into its two terms") {
  model::PosteriorModel m = small_model(false, 29);
  losses::SimulationBatch batch = gaussian_batch(8, 31);
  losses::SimulationBatch obs_batch = gaussian_batch(8, 37, 10.0);
  losses::UdaConfig uda;
  uda.lambda = 10.0;

  ad::Graph g_npe;
  const double npe = losses::npe_loss(g_npe, m, batch).value()(0, 0);
  const Matrix s_sim = model::summaries(m, batch.datasets);
  const Matrix s_obs = model::summaries(m, obs_batch.datasets);
  const double penalty = kernels::mmd2_biased(s_sim, s_obs, uda.kernel);

  ad::Graph g;
  const double composite =
      losses::npe_mmd_loss(g, m, batch, obs_batch.datasets, uda).value()(0, 0);
  CHECK(composite == npe + uda.lambda * penalty);
  CHECK(penalty > 0.0);  // far-shifted observed data registers
}

TEST_CASE("a zeroed classifier prices the domain term at two log two") {
  model::PosteriorModel m = small_model(true, 41);
  zero_classifier(m);
  losses::SimulationBatch batch = gaussian_batch(6, 43);
  losses::SimulationBatch obs_batch = gaussian_batch(6, 47, 1.5);
  losses::UdaConfig uda;
  uda.lambda = 2.0;

  ad::Graph g_npe;
  const double npe = losses::npe_loss(g_npe, m, batch).value()(0, 0);
  ad::Graph g;
  const double composite =
      losses::npe_dann_loss(g, m, batch, obs_batch.datasets, uda).value()(0, 0);
  CHECK(composite == doctest::Approx(npe + 2.0 * kTwoLog2).epsilon(1e-12));
}

TEST_CASE("adversarial gradients move the two players in opposite directions") {
  model::PosteriorModel m = small_model(true, 53);
  losses::SimulationBatch batch = gaussian_batch(16, 59);
  losses::SimulationBatch obs_batch = gaussian_batch(16, 61, 3.0);
  losses::UdaConfig uda;
  uda.lambda = 1.0;

  ad::Graph g;
  ad::Var loss = losses::npe_dann_loss(g, m, batch, obs_batch.datasets, uda);
  ad::GradMap grads = g.backward(loss);
  ad::Graph g_ref;
  ad::GradMap npe_grads = g_ref.backward(losses::npe_loss(g_ref, m, batch));

  const double before = domain_loss_plain(m, batch, obs_batch.datasets);
  const double eta = 1e-3;

  // Descending the classifier gradient sharpens the domain classifier.
  model::PosteriorModel psi_step = m;
  for (auto& [name, value] : psi_step.params)
    if (name.rfind("classifier.", 0) == 0) value -= eta * grads.at(name);
  CHECK(domain_loss_plain(psi_step, batch, obs_batch.datasets) < before);

  // Isolate the domain contribution to the summary gradient (composite minus
  // plain NPE); descending it must confuse the classifier via the reversal.
  model::PosteriorModel phi_step = m;
  double domain_norm = 0.0;
  for (auto& [name, value] : phi_step.params) {
    if (name.rfind("summary.", 0) != 0) continue;
    const Matrix domain_part = grads.at(name) - npe_grads.at(name);
    domain_norm += domain_part.squaredNorm();
    value -= eta * domain_part;
  }
  CHECK(domain_norm > 0.0);
  CHECK(domain_loss_plain(phi_step, batch, obs_batch.datasets) > before);
}

TEST_CASE("spike-and-slab augmentation: zero scales change nothing") {
  losses::SimulationBatch batch = gaussian_batch(4, 67);
  losses::NnpeConfig cfg;
  cfg.spike_scale = 0.0;
  cfg.slab_scale = 0.0;
  rng::RngStream rs(1, "nnpe");
  const losses::SimulationBatch out = losses::nnpe_augment(batch, cfg, rs);
  CHECK((out.theta - batch.theta).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t i = 0; i < batch.datasets.size(); ++i)
    CHECK((out.datasets[i] - batch.datasets[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spike-and-slab augmentation: mixture statistics") {
  losses::SimulationBatch batch;
  batch.theta = Matrix::Zero(1, 2);
  batch.datasets.push_back(Matrix::Zero(50000, 2));  // 1e5 elements

  losses::NnpeConfig spikes_only;
  spikes_only.slab_scale = 0.0;
  rng::RngStream rs(2, "nnpe-spike");
  const losses::SimulationBatch out = losses::nnpe_augment(batch, spikes_only, rs);
  std::vector<double> deltas;
  for (Eigen::Index i = 0; i < 50000; ++i)
    for (int j = 0; j < 2; ++j)
      if (out.datasets[0](i, j) != 0.0) deltas.push_back(out.datasets[0](i, j));
  const double frac = static_cast<double>(deltas.size()) / 1e5;
  CHECK(frac == doctest::Approx(0.5).epsilon(0.02));
  double ss = 0.0;
  for (double d : deltas) ss += d * d;
  const double sd = std::sqrt(ss / static_cast<double>(deltas.size()));
  CHECK(sd == doctest::Approx(0.01).epsilon(0.05));

  losses::NnpeConfig slabs_only;
  slabs_only.spike_scale = 0.0;
  rng::RngStream rs2(3, "nnpe-slab");
  const losses::SimulationBatch slab_out = losses::nnpe_augment(batch, slabs_only, rs2);
  std::vector<double> slab_abs;
  for (Eigen::Index i = 0; i < 50000; ++i)
    for (int j = 0; j < 2; ++j)
      if (slab_out.datasets[0](i, j) != 0.0)
        slab_abs.push_back(std::abs(slab_out.datasets[0](i, j)));
  std::sort(slab_abs.begin(), slab_abs.end());
  const double median = slab_abs[slab_abs.size() / 2];
  // |0.25 Cauchy| has median 0.25.
  CHECK(median == doctest::Approx(0.25).epsilon(0.1));
}

TEST_CASE("loss preconditions are enforced") {
  model::PosteriorModel m = small_model(false, 71);
  losses::SimulationBatch empty;
  ad::Graph g;
  CHECK_THROWS_AS(losses::npe_loss(g, m, empty), ConfigError);

  losses::SimulationBatch mismatched = gaussian_batch(3, 73);
  mismatched.datasets.pop_back();
  ad::Graph g2;
  CHECK_THROWS_AS(losses::npe_loss(g2, m, mismatched), ConfigError);

  losses::SimulationBatch batch = gaussian_batch(3, 79);
  losses::UdaConfig uda;
  uda.lambda = 1.0;
  ad::Graph g3;
  CHECK_THROWS_AS(losses::npe_mmd_loss(g3, m, batch, {}, uda), ConfigError);
  ad::Graph g4;
  CHECK_THROWS_AS(losses::npe_dann_loss(g4, m, batch, batch.datasets, uda), ConfigError);
}
