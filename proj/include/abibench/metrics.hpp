#pragma once

#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <vector>

#include "abibench/kernels.hpp"
#include "abibench/model.hpp"
#include "abibench/simulators.hpp"

namespace abibench::metrics {

// Everything the metric suite consumes for one evaluation set: ground-truth
// parameters, observed datasets, posterior sample sets, summaries, and the
// analytic reference when the family has one.
struct EvalBundle {
  Matrix theta_star;                        // N x J
  std::vector<Matrix> observations;         // N datasets
  std::vector<Matrix> posterior_samples;    // N sets, each S x J
  Matrix summaries;                         // N x d
  std::vector<sim::AnalyticPosterior> analytic;  // N entries or empty
  Vector prior_variance;                    // per-parameter; empty -> empirical
};

void validate_bundle(const EvalBundle& b);

// Order-independent reduction helpers (sorted summation), so deterministic
// metrics are exactly invariant to dataset and sample ordering.
double sorted_sum(std::vector<double> values);
double sorted_mean(std::vector<double> values);
// Linear interpolation between order statistics; values need not be sorted.
double quantile_linear(std::vector<double> values, double p);

// RMSE of posterior samples against theta*, scaled by the per-parameter
// range of theta* across the test set; averaged over parameters, then sets.
double nrmse(const EvalBundle& b);

// NRMSE for image-valued parameters: every pixel shares the nominal [-1, 1]
// range, so the per-pixel empirical range (exactly zero for constant
// background pixels) is replaced by the fixed range 2.
double image_nrmse(const EvalBundle& b);

// Median over n_levels central credible levels (linearly spaced on
// [0.005, 0.995]) of |empirical coverage - nominal|, averaged over
// parameters.
double ece(const EvalBundle& b, int n_levels = 20);

// Mean over sets and parameters of 1 - Var(samples) / PriorVar.  With an
// explicit prior_variance every entry must be positive; with the empirical
// fallback, parameters whose variance across theta_star sits below 1e-3 of
// the largest are excluded (degenerate coordinates measure no contraction).
double posterior_contraction(const EvalBundle& b);

enum class PpdDistance { Mmd, ImageNrmse };

// Re-simulates data for each posterior sample under the assumed model and
// averages the distance to the observation.
double ppd(const EvalBundle& b, const sim::ScenarioSpec& assumed, PpdDistance dist,
           const kernels::KernelSpec& kernel, std::uint64_t seed);

// Biased MMD^2 between pooled simulated and pooled observed summaries.
// Shares kernels::mmd2_biased with the losses bit for bit.
double ssdd(const Matrix& simulated_summaries, const Matrix& observed_summaries,
            const kernels::KernelSpec& kernel);

// Pushes reference parameters through the flow's forward direction and
// measures MMD^2 between the pooled latents and a standard normal sample of
// equal size.
double inld(const model::PosteriorModel& m, const EvalBundle& b,
            const std::vector<Matrix>& reference_theta, const kernels::KernelSpec& kernel,
            std::uint64_t seed);

// RMSE between posterior sample means and analytic posterior means.
double rmse_to_analytic(const EvalBundle& b);
// Mean per-set MMD^2 between posterior samples and analytic draws.
double mmd2_to_analytic(const EvalBundle& b, const kernels::KernelSpec& kernel,
                        std::uint64_t seed);

struct MetricsReport {
  std::string method;
  std::string scenario;
  double variant_param = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::pair<std::string, double>> values;

  double value(const std::string& name) const;
  bool has(const std::string& name) const;
};

std::string csv_header();
std::string csv_rows(const MetricsReport& r);
nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace abibench::metrics
