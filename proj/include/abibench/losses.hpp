#pragma once

#include <vector>

#include "abibench/kernels.hpp"
#include "abibench/model.hpp"
#include "abibench/rng.hpp"

namespace abibench::losses {

// Paired prior draws and simulated datasets. For gaussian2d each dataset is
// an M x 2 exchangeable set; for the camera family a 1 x 256 flat image.
struct SimulationBatch {
  Matrix theta;                  // B x J
  std::vector<Matrix> datasets;  // B entries
};

struct UdaConfig {
  double lambda = 0.0;
  kernels::KernelSpec kernel;
  double grl_weight = 1.0;
};

struct NnpeConfig {
  double spike_scale = 0.01;
  double slab_scale = 0.25;
  double bernoulli_p = 0.5;
};

// Mean over the batch of -log q(theta | phi(x)).
ad::Var npe_loss(ad::Graph& g, const model::PosteriorModel& m, const SimulationBatch& batch);

// npe_loss + lambda * MMD^2 between simulated and observed summary batches.
// lambda = 0 reduces to npe_loss exactly.
ad::Var npe_mmd_loss(ad::Graph& g, const model::PosteriorModel& m, const SimulationBatch& batch,
                     const std::vector<Matrix>& observed, const UdaConfig& cfg);

// npe_loss + lambda * domain-classifier loss with summaries entering the
// classifier through a gradient-reversal layer (single-step minimax).
ad::Var npe_dann_loss(ad::Graph& g, const model::PosteriorModel& m, const SimulationBatch& batch,
                      const std::vector<Matrix>& observed, const UdaConfig& cfg);

// Spike-and-slab noise on every data point: with probability p additive
// spike_scale * N(0,1), otherwise slab_scale * standard Cauchy.
SimulationBatch nnpe_augment(const SimulationBatch& batch, const NnpeConfig& cfg,
                             rng::RngStream& rng);

}  // namespace abibench::losses
