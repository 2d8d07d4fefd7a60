#include "abibench/losses.hpp"

namespace abibench::model {

void init_model(PosteriorModel& m, std::uint64_t master_seed) {
  if (m.kind == SummaryKind::DeepSet)
    nets::init_deepset(m.params, "summary", m.deepset, master_seed);
  else
    nets::init_conv_summary(m.params, "summary", m.conv, master_seed);
  nets::init_flow(m.params, "flow", m.flow, master_seed);
  if (m.has_classifier) nets::init_classifier(m.params, "classifier", m.classifier, master_seed);
}

Matrix summary(const PosteriorModel& m, const Matrix& x) {
  if (m.kind == SummaryKind::DeepSet)
    return nets::deepset_forward(m.deepset, m.params, "summary", x);
  return nets::conv_summary_forward(m.conv, m.params, "summary", x);
}

ad::Var summary(ad::Graph& g, const PosteriorModel& m, const Matrix& x) {
  if (m.kind == SummaryKind::DeepSet)
    return nets::deepset_forward(g, m.deepset, m.params, "summary", x);
  return nets::conv_summary_forward(g, m.conv, m.params, "summary", x);
}

Matrix summaries(const PosteriorModel& m, const std::vector<Matrix>& xs) {
  if (xs.empty())
    throw ConfigError("summaries: no datasets");
  Matrix out(static_cast<Eigen::Index>(xs.size()), m.summary_dim());
  for (std::size_t i = 0; i < xs.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = summary(m, xs[i]).row(0);
  return out;
}

ad::Var summaries(ad::Graph& g, const PosteriorModel& m, const std::vector<Matrix>& xs) {
  if (xs.empty())
    throw ConfigError("summaries: no datasets");
  std::vector<ad::Var> rows;
  rows.reserve(xs.size());
  for (const Matrix& x : xs) rows.push_back(summary(g, m, x));
  return ad::vcat(rows);
}

Matrix posterior_sample(const PosteriorModel& m, const Matrix& summary_row,
                        Eigen::Index n_samples, rng::RngStream& rng) {
  return nets::flow_sample(m.flow, m.params, "flow", summary_row, n_samples, rng);
}

}  // namespace abibench::model

namespace abibench::losses {

namespace {

void check_batch(const model::PosteriorModel& m, const SimulationBatch& batch) {
  if (batch.datasets.empty())
    throw ConfigError("loss: empty batch");
  if (batch.theta.rows() != static_cast<Eigen::Index>(batch.datasets.size()))
    throw ConfigError("loss: theta rows and dataset count disagree");
  if (batch.theta.cols() != m.flow.param_dim)
    throw ConfigError("loss: parameter dimension mismatch");
}

ad::Var npe_term(ad::Graph& g, const model::PosteriorModel& m, const SimulationBatch& batch,
                 ad::Var sim_summaries) {
  ad::Var theta = g.input(batch.theta);
  ad::Var lp = nets::flow_log_prob(g, m.flow, m.params, "flow", theta, sim_summaries);
  return ad::scale(ad::mean(lp), -1.0);
}

}  // namespace

ad::Var npe_loss(ad::Graph& g, const model::PosteriorModel& m, const SimulationBatch& batch) {
  check_batch(m, batch);
  ad::Var s = model::summaries(g, m, batch.datasets);
  return npe_term(g, m, batch, s);
}

ad::Var npe_mmd_loss(ad::Graph& g, const model::PosteriorModel& m, const SimulationBatch& batch,
                     const std::vector<Matrix>& observed, const UdaConfig& cfg) {
  check_batch(m, batch);
  if (cfg.lambda == 0.0) return npe_loss(g, m, batch);
  if (observed.empty())
    throw ConfigError("npe_mmd_loss: no observed datasets");
  ad::Var s_sim = model::summaries(g, m, batch.datasets);
  ad::Var npe = npe_term(g, m, batch, s_sim);
  ad::Var s_obs = model::summaries(g, m, observed);
  ad::Var penalty = ad::mmd2(s_sim, s_obs, cfg.kernel);
  return ad::add(npe, ad::scale(penalty, cfg.lambda));
}

ad::Var npe_dann_loss(ad::Graph& g, const model::PosteriorModel& m, const SimulationBatch& batch,
                      const std::vector<Matrix>& observed, const UdaConfig& cfg) {
  check_batch(m, batch);
  if (cfg.lambda == 0.0) return npe_loss(g, m, batch);
  if (observed.empty())
    throw ConfigError("npe_dann_loss: no observed datasets");
  if (!m.has_classifier)
    throw ConfigError("npe_dann_loss: model has no domain classifier");
  ad::Var s_sim = model::summaries(g, m, batch.datasets);
  ad::Var npe = npe_term(g, m, batch, s_sim);
  ad::Var s_obs = model::summaries(g, m, observed);

  // -log sigma(z) = softplus(-z); -log(1 - sigma(z)) = softplus(z)
  ad::Var logit_sim = nets::classifier_logits(g, m.classifier, m.params, "classifier",
                                              ad::grad_reverse(s_sim, cfg.grl_weight));
  ad::Var logit_obs = nets::classifier_logits(g, m.classifier, m.params, "classifier",
                                              ad::grad_reverse(s_obs, cfg.grl_weight));
  ad::Var ld = ad::add(ad::mean(ad::softplus(ad::neg(logit_sim))),
                       ad::mean(ad::softplus(logit_obs)));
  return ad::add(npe, ad::scale(ld, cfg.lambda));
}

SimulationBatch nnpe_augment(const SimulationBatch& batch, const NnpeConfig& cfg,
                             rng::RngStream& rng) {
  if (cfg.bernoulli_p < 0.0 || cfg.bernoulli_p > 1.0)
    throw ConfigError("nnpe_augment: bernoulli_p must lie in [0, 1]");
  SimulationBatch out = batch;
  for (Matrix& x : out.datasets) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const bool spike = rng.bernoulli(cfg.bernoulli_p);
        const double noise =
            spike ? cfg.spike_scale * rng.normal() : cfg.slab_scale * rng.cauchy();
        x(i, j) += noise;
      }
    }
  }
  return out;
}

}  // namespace abibench::losses
