#pragma once

#include <map>
#include <string>

#include "abibench/autodiff.hpp"
#include "abibench/common.hpp"

namespace abibench::opt {

// Cosine-decayed learning rate: base * 0.5 * (1 + cos(pi * step / total)).
// `step` counts completed optimizer steps, so the first step runs at base.
double cosine_decay_lr(long step, long total_steps, double base_lr);

// Scales all gradients by min(1, max_norm / global_norm). Returns the global
// norm before clipping.
double clip_global_norm(ad::GradMap& grads, double max_norm);

struct AdamConfig {
  double base_lr = 5e-4;
  long total_steps = 0;  // required for the cosine schedule
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // > 0 gives decoupled decay (AdamW)
  double clip_norm = 10.0;    // <= 0 disables clipping
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  // Applies one update in place. Moment slots are keyed by parameter name and
  // created on first use, so parameter sets may differ across models without
  // cross-talk.
  void step(ad::ParamStore& params, ad::GradMap grads);

  long steps_taken() const { return t_; }
  double last_lr() const { return last_lr_; }
  double last_grad_norm() const { return last_grad_norm_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  double last_lr_ = 0.0;
  double last_grad_norm_ = 0.0;
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
};

}  // namespace abibench::opt
