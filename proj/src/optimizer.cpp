#include "abibench/optimizer.hpp"

#include <cmath>

namespace abibench::opt {

double cosine_decay_lr(long step, long total_steps, double base_lr) {
  if (total_steps <= 0)
    throw ConfigError("cosine_decay_lr: total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw ConfigError("cosine_decay_lr: step outside [0, total_steps]");
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * frac));
}

double clip_global_norm(ad::GradMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads) g *= s;
  }
  return norm;
}

void Adam::step(ad::ParamStore& params, ad::GradMap grads) {
  for (const auto& [name, g] : grads) {
    if (!g.allFinite())
      throw NumericalError("Adam: non-finite gradient for '" + name + "'");
    if (params.find(name) == params.end())
      throw ConfigError("Adam: gradient for unknown parameter '" + name + "'");
  }

  last_grad_norm_ = clip_global_norm(grads, cfg_.clip_norm);
  const double lr = cosine_decay_lr(t_, cfg_.total_steps, cfg_.base_lr);
  last_lr_ = lr;
  t_ += 1;

  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (auto& [name, g] : grads) {
    Matrix& p = params[name];
    if (p.rows() != g.rows() || p.cols() != g.cols())
      throw ConfigError("Adam: gradient shape mismatch for '" + name + "'");
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      m_[name] = Matrix::Zero(p.rows(), p.cols());
      v_[name] = Matrix::Zero(p.rows(), p.cols());
      mit = m_.find(name);
    }
    Matrix& m = mit->second;
    Matrix& v = v_[name];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Matrix mhat = m / bc1;
    const Matrix vhat = v / bc2;
    if (cfg_.weight_decay > 0.0) p -= lr * cfg_.weight_decay * p;
    p -= lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + cfg_.eps).matrix());
  }
}

}  // namespace abibench::opt
