#include "abibench/flow.hpp"

#include <cmath>
#include <numeric>

namespace abibench::nets {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::string layer_prefix(const std::string& prefix, int layer) {
  return prefix + ".l" + std::to_string(layer) + ".cond";
}

std::vector<Eigen::Index> inverse_permutation(const std::vector<Eigen::Index>& perm) {
  std::vector<Eigen::Index> inv(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) inv[static_cast<std::size_t>(perm[j])] = j;
  return inv;
}

Matrix permute_cols_plain(const Matrix& x, const std::vector<Eigen::Index>& perm) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) y.col(j) = x.col(perm[static_cast<std::size_t>(j)]);
  return y;
}

Matrix bounded_scale(const Matrix& raw, double clamp) {
  // Multiply by the reciprocal (not divide) so the bits match the taped path,
  // which applies the clamp via scalar scaling.
  const double inv = 1.0 / clamp;
  Matrix s(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j)
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      s(i, j) = clamp * std::tanh(raw(i, j) * inv);
  return s;
}

// Element-wise std::exp. Eigen's vectorized exp may route elements through
// either a packet or a scalar kernel depending on destination alignment, which
// makes the last bit context-dependent; a plain loop does not.
Matrix cwise_exp(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, j) = std::exp(x(i, j));
  return y;
}

void check_flow_inputs(const FlowConfig& cfg, const Matrix& theta, const Matrix& cond,
                       const char* who) {
  if (theta.cols() != cfg.param_dim)
    throw ConfigError(std::string(who) + ": parameter dimension mismatch");
  if (cond.cols() != cfg.cond_dim)
    throw ConfigError(std::string(who) + ": conditioning dimension mismatch");
  if (theta.rows() != cond.rows())
    throw ConfigError(std::string(who) + ": batch sizes disagree");
}

}  // namespace

std::vector<std::vector<Eigen::Index>> flow_permutations(const FlowConfig& cfg) {
  const Eigen::Index J = cfg.param_dim;
  if (J < 2)
    throw ConfigError("flow_permutations: need at least two dimensions");
  std::vector<std::vector<Eigen::Index>> perms;
  if (J == 2) {
    for (int l = 0; l < cfg.n_layers; ++l) perms.push_back({1, 0});
    return perms;
  }
  const Eigen::Index k = cfg.keep_dim();
  for (std::uint64_t attempt = 0;; ++attempt) {
    perms.clear();
    std::vector<bool> transformed(static_cast<std::size_t>(J), false);
    for (int l = 0; l < cfg.n_layers; ++l) {
      std::vector<Eigen::Index> p(static_cast<std::size_t>(J));
      std::iota(p.begin(), p.end(), 0);
      rng::RngStream rs(cfg.perm_seed, "flow-perm",
                        static_cast<std::uint64_t>(l) + attempt * 1000003ULL);
      rs.shuffle(p);
      for (std::size_t j = static_cast<std::size_t>(k); j < p.size(); ++j)
        transformed[static_cast<std::size_t>(p[j])] = true;
      perms.push_back(std::move(p));
    }
    bool all = true;
    for (bool t : transformed) all = all && t;
    if (all) return perms;
  }
}

void init_flow(ParamStore& store, const std::string& prefix, const FlowConfig& cfg,
               std::uint64_t master_seed) {
  for (int l = 0; l < cfg.n_layers; ++l)
    init_mlp(store, layer_prefix(prefix, l), cfg.conditioner(), master_seed);
}

FlowForward flow_forward(const FlowConfig& cfg, const ParamStore& store,
                         const std::string& prefix, const Matrix& theta, const Matrix& cond) {
  check_flow_inputs(cfg, theta, cond, "flow_forward");
  const auto perms = flow_permutations(cfg);
  const Eigen::Index k = cfg.keep_dim();
  const Eigen::Index t_dim = cfg.param_dim - k;
  Matrix z = theta;
  Matrix log_det = Matrix::Zero(theta.rows(), 1);
  for (int l = 0; l < cfg.n_layers; ++l) {
    z = permute_cols_plain(z, perms[static_cast<std::size_t>(l)]);
    const Matrix u1 = z.leftCols(k);
    const Matrix u2 = z.rightCols(t_dim);
    Matrix cin(z.rows(), k + cfg.cond_dim);
    cin << u1, cond;
    const Matrix out = mlp_forward(cfg.conditioner(), store, layer_prefix(prefix, l), cin);
    const Matrix s = bounded_scale(out.leftCols(t_dim), cfg.clamp);
    const Matrix t = out.rightCols(t_dim);
    z.rightCols(t_dim) = u2.cwiseProduct(cwise_exp(s)) + t;
    log_det += s.rowwise().sum();
  }
  return {z, log_det};
}

FlowForwardVar flow_forward(Graph& g, const FlowConfig& cfg, const ParamStore& store,
                            const std::string& prefix, Var theta, Var cond) {
  check_flow_inputs(cfg, theta.value(), cond.value(), "flow_forward");
  const auto perms = flow_permutations(cfg);
  const Eigen::Index k = cfg.keep_dim();
  const Eigen::Index t_dim = cfg.param_dim - k;
  Var z = theta;
  Var log_det = g.input(Matrix::Zero(theta.rows(), 1));
  for (int l = 0; l < cfg.n_layers; ++l) {
    z = ad::permute_cols(z, perms[static_cast<std::size_t>(l)]);
    Var u1 = ad::cols(z, 0, k);
    Var u2 = ad::cols(z, k, t_dim);
    Var out = mlp_forward(g, cfg.conditioner(), store, layer_prefix(prefix, l),
                          ad::hcat(u1, cond));
    Var s = ad::scale(ad::tanh(ad::scale(ad::cols(out, 0, t_dim), 1.0 / cfg.clamp)), cfg.clamp);
    Var t = ad::cols(out, t_dim, t_dim);
    Var v2 = ad::add(ad::cwise_mul(u2, ad::exp(s)), t);
    z = ad::hcat(u1, v2);
    log_det = ad::add(log_det, ad::rowsum(s));
  }
  return {z, log_det};
}

FlowForward flow_inverse(const FlowConfig& cfg, const ParamStore& store,
                         const std::string& prefix, const Matrix& z, const Matrix& cond) {
  check_flow_inputs(cfg, z, cond, "flow_inverse");
  const auto perms = flow_permutations(cfg);
  const Eigen::Index k = cfg.keep_dim();
  const Eigen::Index t_dim = cfg.param_dim - k;
  Matrix x = z;
  Matrix log_det = Matrix::Zero(z.rows(), 1);
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const Matrix v1 = x.leftCols(k);
    const Matrix v2 = x.rightCols(t_dim);
    Matrix cin(x.rows(), k + cfg.cond_dim);
    cin << v1, cond;
    const Matrix out = mlp_forward(cfg.conditioner(), store, layer_prefix(prefix, l), cin);
    const Matrix s = bounded_scale(out.leftCols(t_dim), cfg.clamp);
    const Matrix t = out.rightCols(t_dim);
    x.rightCols(t_dim) = (v2 - t).cwiseProduct(cwise_exp(-s));
    log_det -= s.rowwise().sum();
    x = permute_cols_plain(x, inverse_permutation(perms[static_cast<std::size_t>(l)]));
  }
  return {x, log_det};
}

Matrix flow_log_prob(const FlowConfig& cfg, const ParamStore& store, const std::string& prefix,
                     const Matrix& theta, const Matrix& cond) {
  const FlowForward f = flow_forward(cfg, store, prefix, theta, cond);
  const double c = -0.5 * kLog2Pi * static_cast<double>(cfg.param_dim);
  Matrix lp = f.log_det;
  for (Eigen::Index i = 0; i < theta.rows(); ++i)
    lp(i, 0) += c - 0.5 * f.z.row(i).squaredNorm();
  return lp;
}

Var flow_log_prob(Graph& g, const FlowConfig& cfg, const ParamStore& store,
                  const std::string& prefix, Var theta, Var cond) {
  FlowForwardVar f = flow_forward(g, cfg, store, prefix, theta, cond);
  const double c = -0.5 * kLog2Pi * static_cast<double>(cfg.param_dim);
  Var quad = ad::scale(ad::rowsum(ad::cwise_mul(f.z, f.z)), -0.5);
  Var base = ad::add(quad, g.input(Matrix::Constant(theta.rows(), 1, c)));
  return ad::add(base, f.log_det);
}

Matrix flow_sample(const FlowConfig& cfg, const ParamStore& store, const std::string& prefix,
                   const Matrix& cond, Eigen::Index n_samples, rng::RngStream& rng) {
  if (cond.rows() != 1)
    throw ConfigError("flow_sample: expected a single conditioning row");
  const Matrix z = rng.normal_matrix(n_samples, cfg.param_dim);
  const Matrix cond_rep = cond.replicate(n_samples, 1);
  return flow_inverse(cfg, store, prefix, z, cond_rep).z;
}

}  // namespace abibench::nets
