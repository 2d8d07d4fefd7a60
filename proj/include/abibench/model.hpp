#pragma once

#include "abibench/flow.hpp"
#include "abibench/networks.hpp"

namespace abibench::model {

enum class SummaryKind { DeepSet, Conv };

// Summary network phi plus conditional flow q (and optionally a domain
// classifier psi). Parameters share one store under the prefixes "summary",
// "flow" and "classifier".
struct PosteriorModel {
  SummaryKind kind = SummaryKind::DeepSet;
  nets::DeepSetConfig deepset;
  nets::ConvSummaryConfig conv;
  nets::FlowConfig flow;
  nets::ClassifierConfig classifier;
  bool has_classifier = false;
  ad::ParamStore params;

  Eigen::Index summary_dim() const {
    return kind == SummaryKind::DeepSet ? deepset.summary_dim : conv.summary_dim;
  }
};

void init_model(PosteriorModel& m, std::uint64_t master_seed);

Matrix summary(const PosteriorModel& m, const Matrix& x);
ad::Var summary(ad::Graph& g, const PosteriorModel& m, const Matrix& x);

// Stacks per-dataset summaries into an N x d matrix.
Matrix summaries(const PosteriorModel& m, const std::vector<Matrix>& xs);
ad::Var summaries(ad::Graph& g, const PosteriorModel& m, const std::vector<Matrix>& xs);

Matrix posterior_sample(const PosteriorModel& m, const Matrix& summary_row,
                        Eigen::Index n_samples, rng::RngStream& rng);

}  // namespace abibench::model
