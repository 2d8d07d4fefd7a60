#pragma once

#include <string>
#include <vector>

#include "abibench/networks.hpp"

namespace abibench::nets {

// Conditional affine coupling flow between parameter space and a standard
// normal base. Each layer permutes dimensions, feeds the pass-through half
// and the conditioning vector to a dense conditioner, and applies
// z2 = u2 * exp(s) + t with s = clamp * tanh(s_raw / clamp).
struct FlowConfig {
  Eigen::Index param_dim = 2;
  Eigen::Index cond_dim = 4;
  int n_layers = 3;
  Eigen::Index width = 128;
  double clamp = 1.9;
  std::uint64_t perm_seed = 1;

  Eigen::Index keep_dim() const { return param_dim / 2; }
  MlpConfig conditioner() const {
    const Eigen::Index out = 2 * (param_dim - keep_dim());
    return {{keep_dim() + cond_dim, width, width, out}, Activation::Relu};
  }
};

// Per-layer column permutations. J = 2 uses the fixed reversal; larger J uses
// seeded draws, re-rolled deterministically until every dimension lands in
// the transformed half at least once across the stack.
std::vector<std::vector<Eigen::Index>> flow_permutations(const FlowConfig& cfg);

void init_flow(ParamStore& store, const std::string& prefix, const FlowConfig& cfg,
               std::uint64_t master_seed);

struct FlowForward {
  Matrix z;        // B x J
  Matrix log_det;  // B x 1
};
struct FlowForwardVar {
  Var z;
  Var log_det;
};

FlowForward flow_forward(const FlowConfig& cfg, const ParamStore& store,
                         const std::string& prefix, const Matrix& theta, const Matrix& cond);
FlowForwardVar flow_forward(Graph& g, const FlowConfig& cfg, const ParamStore& store,
                            const std::string& prefix, Var theta, Var cond);

// Exact inverse; log_det is the log-determinant of the inverse map, i.e. the
// negative of the forward one at the matching point.
FlowForward flow_inverse(const FlowConfig& cfg, const ParamStore& store,
                         const std::string& prefix, const Matrix& z, const Matrix& cond);

// Per-sample log density under the flow: B x 1.
Matrix flow_log_prob(const FlowConfig& cfg, const ParamStore& store, const std::string& prefix,
                     const Matrix& theta, const Matrix& cond);
Var flow_log_prob(Graph& g, const FlowConfig& cfg, const ParamStore& store,
                  const std::string& prefix, Var theta, Var cond);

// n_samples posterior draws for one conditioning vector (1 x cond_dim).
Matrix flow_sample(const FlowConfig& cfg, const ParamStore& store, const std::string& prefix,
                   const Matrix& cond, Eigen::Index n_samples, rng::RngStream& rng);

}  // namespace abibench::nets
