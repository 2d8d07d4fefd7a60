#include "abibench/networks.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

namespace abibench::nets {

Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, rng::RngStream& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return rng.uniform_matrix(fan_in, fan_out, -limit, limit);
}

namespace {

std::string wname(const std::string& prefix, int i) { return prefix + ".w" + std::to_string(i); }
std::string bname(const std::string& prefix, int i) { return prefix + ".b" + std::to_string(i); }

Matrix activate(const Matrix& x, Activation act) {
  if (act == Activation::Tanh) {
    Matrix y(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, j) = std::tanh(x(i, j));
    return y;
  }
  return x.cwiseMax(0.0);
}

Var activate(Var x, Activation act) {
  return act == Activation::Tanh ? ad::tanh(x) : ad::relu(x);
}

}  // namespace

void init_mlp(ParamStore& store, const std::string& prefix, const MlpConfig& cfg,
              std::uint64_t master_seed) {
  if (cfg.widths.size() < 2)
    throw ConfigError("init_mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < cfg.widths.size(); ++i) {
    const std::string w = wname(prefix, static_cast<int>(i));
    rng::RngStream ws(master_seed, "init:" + w);
    store[w] = glorot_uniform(cfg.widths[i], cfg.widths[i + 1], ws);
    store[bname(prefix, static_cast<int>(i))] =
        Matrix::Zero(1, cfg.widths[i + 1]);
  }
}

Matrix mlp_forward(const MlpConfig& cfg, const ParamStore& store, const std::string& prefix,
                   const Matrix& in) {
  if (in.cols() != cfg.widths.front())
    throw ConfigError("mlp_forward: input width mismatch for '" + prefix + "'");
  Matrix h = in;
  const std::size_t layers = cfg.widths.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    const Matrix& w = store.at(wname(prefix, static_cast<int>(i)));
    const Matrix& b = store.at(bname(prefix, static_cast<int>(i)));
    h = det_matmul(h, w).rowwise() + b.row(0);
    if (i + 1 < layers) h = activate(h, cfg.hidden);
  }
  return h;
}

Var mlp_forward(Graph& g, const MlpConfig& cfg, const ParamStore& store,
                const std::string& prefix, Var in) {
  if (in.cols() != cfg.widths.front())
    throw ConfigError("mlp_forward: input width mismatch for '" + prefix + "'");
  Var h = in;
  const std::size_t layers = cfg.widths.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    Var w = g.param(store, wname(prefix, static_cast<int>(i)));
    Var b = g.param(store, bname(prefix, static_cast<int>(i)));
    h = rowwise_add(matmul(h, w), b);
    if (i + 1 < layers) h = activate(h, cfg.hidden);
  }
  return h;
}

void init_deepset(ParamStore& store, const std::string& prefix, const DeepSetConfig& cfg,
                  std::uint64_t master_seed) {
  init_mlp(store, prefix + ".row", cfg.row_net(), master_seed);
  init_mlp(store, prefix + ".head", cfg.head_net(), master_seed);
}

namespace {

// The row net keeps its trailing activation: widths [D, W, W] with the
// activation applied after both layers, then pooling, then the head.
Matrix rownet_plain(const MlpConfig& cfg, const ParamStore& store, const std::string& prefix,
                    const Matrix& in) {
  Matrix h = mlp_forward(cfg, store, prefix, in);
  return activate(h, cfg.hidden);
}

Var rownet_tape(Graph& g, const MlpConfig& cfg, const ParamStore& store,
                const std::string& prefix, Var in) {
  return activate(mlp_forward(g, cfg, store, prefix, in), cfg.hidden);
}

std::vector<double> sorted_column(const Matrix& m, Eigen::Index j) {
  std::vector<double> col(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) col[static_cast<std::size_t>(i)] = m(i, j);
  std::sort(col.begin(), col.end());
  return col;
}

}  // namespace

Matrix deepset_forward(const DeepSetConfig& cfg, const ParamStore& store,
                       const std::string& prefix, const Matrix& x) {
  if (x.rows() == 0)
    throw ConfigError("deepset_forward: empty dataset");
  if (x.cols() != cfg.input_dim)
    throw ConfigError("deepset_forward: row dimension mismatch");
  const Matrix h = rownet_plain(cfg.row_net(), store, prefix + ".row", x);
  Matrix pooled(1, h.cols());
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    double s = 0.0;
    for (double v : sorted_column(h, j)) s += v;
    pooled(0, j) = s / static_cast<double>(h.rows());
  }
  return mlp_forward(cfg.head_net(), store, prefix + ".head", pooled);
}

Var deepset_forward(Graph& g, const DeepSetConfig& cfg, const ParamStore& store,
                    const std::string& prefix, const Matrix& x) {
  if (x.rows() == 0)
    throw ConfigError("deepset_forward: empty dataset");
  if (x.cols() != cfg.input_dim)
    throw ConfigError("deepset_forward: row dimension mismatch");
  Var h = rownet_tape(g, cfg.row_net(), store, prefix + ".row", g.input(x));
  Var pooled = ad::colmean_sorted(h);
  return mlp_forward(g, cfg.head_net(), store, prefix + ".head", pooled);
}

namespace {

// Gather indices implementing a 3x3 same-padded convolution step as nine
// row gathers over an (hw*hw) x C feature matrix. Index -1 selects a zero row.
std::vector<Eigen::Index> conv_offsets(Eigen::Index in_hw, Eigen::Index out_hw,
                                       Eigen::Index stride, int ky, int kx) {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(out_hw * out_hw));
  for (Eigen::Index oy = 0; oy < out_hw; ++oy) {
    for (Eigen::Index ox = 0; ox < out_hw; ++ox) {
      const Eigen::Index iy = oy * stride - 1 + ky;
      const Eigen::Index ix = ox * stride - 1 + kx;
      if (iy < 0 || iy >= in_hw || ix < 0 || ix >= in_hw)
        idx.push_back(-1);
      else
        idx.push_back(iy * in_hw + ix);
    }
  }
  return idx;
}

Eigen::Index conv_out_hw(Eigen::Index in_hw, Eigen::Index stride) {
  return (in_hw + 2 - 3) / stride + 1;
}

std::atomic<bool> warned_clip{false};

Matrix image_as_rows(const ConvSummaryConfig& cfg, const Matrix& x) {
  const Eigen::Index n = cfg.image_hw * cfg.image_hw;
  if (x.rows() != 1 || x.cols() != n)
    throw ConfigError("conv_summary_forward: expected a flat 1 x hw*hw image");
  Matrix img(n, 1);
  bool clipped = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = x(0, i);
    if (v < -1.0 || v > 1.0) {
      v = std::clamp(v, -1.0, 1.0);
      clipped = true;
    }
    img(i, 0) = v;
  }
  if (clipped && !warned_clip.exchange(true))
    std::cerr << "warning: conv summary input outside [-1, 1]; clipping\n";
  return img;
}

}  // namespace

void init_conv_summary(ParamStore& store, const std::string& prefix,
                       const ConvSummaryConfig& cfg, std::uint64_t master_seed) {
  if (cfg.channels.size() != cfg.strides.size())
    throw ConfigError("init_conv_summary: channels/strides size mismatch");
  Eigen::Index cin = 1;
  for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
    const std::string w = prefix + ".conv" + std::to_string(l) + ".w";
    rng::RngStream ws(master_seed, "init:" + w);
    store[w] = glorot_uniform(9 * cin, cfg.channels[l], ws);
    store[prefix + ".conv" + std::to_string(l) + ".b"] = Matrix::Zero(1, cfg.channels[l]);
    cin = cfg.channels[l];
  }
  const std::string w = prefix + ".proj.w";
  rng::RngStream ws(master_seed, "init:" + w);
  store[w] = glorot_uniform(cfg.channels.back(), cfg.summary_dim, ws);
  store[prefix + ".proj.b"] = Matrix::Zero(1, cfg.summary_dim);
}

Matrix conv_summary_forward(const ConvSummaryConfig& cfg, const ParamStore& store,
                            const std::string& prefix, const Matrix& x) {
  Matrix feat = image_as_rows(cfg, x);
  Eigen::Index hw = cfg.image_hw;
  for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
    const Eigen::Index out_hw = conv_out_hw(hw, cfg.strides[l]);
    Matrix patches(out_hw * out_hw, 9 * feat.cols());
    int col = 0;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const auto idx = conv_offsets(hw, out_hw, cfg.strides[l], ky, kx);
        for (std::size_t k = 0; k < idx.size(); ++k) {
          if (idx[k] < 0)
            patches.block(static_cast<Eigen::Index>(k), col * feat.cols(), 1, feat.cols())
                .setZero();
          else
            patches.block(static_cast<Eigen::Index>(k), col * feat.cols(), 1, feat.cols()) =
                feat.row(idx[k]);
        }
        ++col;
      }
    }
    const Matrix& w = store.at(prefix + ".conv" + std::to_string(l) + ".w");
    const Matrix& b = store.at(prefix + ".conv" + std::to_string(l) + ".b");
    feat = (det_matmul(patches, w).rowwise() + b.row(0)).cwiseMax(0.0);
    hw = out_hw;
  }
  Matrix pooled = feat.colwise().mean();
  const Matrix& w = store.at(prefix + ".proj.w");
  const Matrix& b = store.at(prefix + ".proj.b");
  return det_matmul(pooled, w).rowwise() + b.row(0);
}

Var conv_summary_forward(Graph& g, const ConvSummaryConfig& cfg, const ParamStore& store,
                         const std::string& prefix, const Matrix& x) {
  Var feat = g.input(image_as_rows(cfg, x));
  Eigen::Index hw = cfg.image_hw;
  for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
    const Eigen::Index out_hw = conv_out_hw(hw, cfg.strides[l]);
    std::vector<Var> taps;
    taps.reserve(9);
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx)
        taps.push_back(ad::gather_rows(feat, conv_offsets(hw, out_hw, cfg.strides[l], ky, kx)));
    Var patches = ad::hcat(taps);
    Var w = g.param(store, prefix + ".conv" + std::to_string(l) + ".w");
    Var b = g.param(store, prefix + ".conv" + std::to_string(l) + ".b");
    feat = ad::relu(rowwise_add(matmul(patches, w), b));
    hw = out_hw;
  }
  Var pooled = ad::colmean(feat);
  Var w = g.param(store, prefix + ".proj.w");
  Var b = g.param(store, prefix + ".proj.b");
  return rowwise_add(matmul(pooled, w), b);
}

void init_classifier(ParamStore& store, const std::string& prefix, const ClassifierConfig& cfg,
                     std::uint64_t master_seed) {
  init_mlp(store, prefix, cfg.net(), master_seed);
}

Matrix classifier_logits(const ClassifierConfig& cfg, const ParamStore& store,
                         const std::string& prefix, const Matrix& summaries) {
  return mlp_forward(cfg.net(), store, prefix, summaries);
}

Var classifier_logits(Graph& g, const ClassifierConfig& cfg, const ParamStore& store,
                      const std::string& prefix, Var summaries) {
  return mlp_forward(g, cfg.net(), store, prefix, summaries);
}

}  // namespace abibench::nets
