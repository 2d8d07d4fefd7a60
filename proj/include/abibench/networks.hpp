#pragma once

#include <string>
#include <vector>

#include "abibench/autodiff.hpp"
#include "abibench/rng.hpp"

namespace abibench::nets {

using ad::Graph;
using ad::ParamStore;
using ad::Var;

enum class Activation { Tanh, Relu };

// Glorot-uniform init for a weight used as x * W with W of shape in x out.
Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, rng::RngStream& rng);

// Dense feed-forward stack. widths = [in, h1, ..., out]; the hidden
// activation is applied after every layer except the last, which stays
// linear. Parameters live under "<prefix>.w<i>" / "<prefix>.b<i>".
struct MlpConfig {
  std::vector<Eigen::Index> widths;
  Activation hidden = Activation::Relu;
};

// Each parameter is initialized from its own seed stream derived from the
// parameter name, so adding or removing sibling networks never shifts the
// draws of existing ones.
void init_mlp(ParamStore& store, const std::string& prefix, const MlpConfig& cfg,
              std::uint64_t master_seed);

Matrix mlp_forward(const MlpConfig& cfg, const ParamStore& store, const std::string& prefix,
                   const Matrix& in);
Var mlp_forward(Graph& g, const MlpConfig& cfg, const ParamStore& store,
                const std::string& prefix, Var in);

// Permutation-invariant summary network for exchangeable M x D datasets:
// a per-row MLP, exact mean pooling over rows, and an MLP head.
struct DeepSetConfig {
  Eigen::Index input_dim = 2;
  Eigen::Index row_width = 64;
  Eigen::Index head_width = 64;
  Eigen::Index summary_dim = 4;

  MlpConfig row_net() const {
    return {{input_dim, row_width, row_width}, Activation::Tanh};
  }
  MlpConfig head_net() const {
    return {{row_width, head_width, summary_dim}, Activation::Tanh};
  }
};

void init_deepset(ParamStore& store, const std::string& prefix, const DeepSetConfig& cfg,
                  std::uint64_t master_seed);
Matrix deepset_forward(const DeepSetConfig& cfg, const ParamStore& store,
                       const std::string& prefix, const Matrix& x);
Var deepset_forward(Graph& g, const DeepSetConfig& cfg, const ParamStore& store,
                    const std::string& prefix, const Matrix& x);

// Strided 3x3 convolution stack for square single-channel images, global
// average pooling, and a linear projection. Convolutions are expressed as
// gathers plus dense matmuls, so both the plain and taped paths share the
// same arithmetic.
struct ConvSummaryConfig {
  Eigen::Index image_hw = 16;
  std::vector<Eigen::Index> channels{16, 32, 32, 32};
  std::vector<Eigen::Index> strides{2, 2, 2, 1};
  Eigen::Index summary_dim = 32;
};

void init_conv_summary(ParamStore& store, const std::string& prefix,
                       const ConvSummaryConfig& cfg, std::uint64_t master_seed);
// x is a flat 1 x (hw*hw) image with values expected in [-1, 1]; out-of-range
// pixels are clipped with a warning to stderr (once per process).
Matrix conv_summary_forward(const ConvSummaryConfig& cfg, const ParamStore& store,
                            const std::string& prefix, const Matrix& x);
Var conv_summary_forward(Graph& g, const ConvSummaryConfig& cfg, const ParamStore& store,
                         const std::string& prefix, const Matrix& x);

// Domain classifier: an MLP from summary space to a single unbounded logit.
struct ClassifierConfig {
  Eigen::Index input_dim = 4;
  Eigen::Index width = 256;
  int hidden_layers = 2;

  MlpConfig net() const {
    std::vector<Eigen::Index> w{input_dim};
    for (int i = 0; i < hidden_layers; ++i) w.push_back(width);
    w.push_back(1);
    return {w, Activation::Relu};
  }
};

void init_classifier(ParamStore& store, const std::string& prefix, const ClassifierConfig& cfg,
                     std::uint64_t master_seed);
Matrix classifier_logits(const ClassifierConfig& cfg, const ParamStore& store,
                         const std::string& prefix, const Matrix& summaries);
Var classifier_logits(Graph& g, const ClassifierConfig& cfg, const ParamStore& store,
                      const std::string& prefix, Var summaries);

}  // namespace abibench::nets
