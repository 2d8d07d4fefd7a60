#include "abibench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

namespace abibench::metrics {

void validate_bundle(const EvalBundle& b) {
  const auto n = static_cast<std::size_t>(b.theta_star.rows());
  if (n == 0)
    throw ConfigError("metrics: empty evaluation bundle");
  if (b.observations.size() != n || b.posterior_samples.size() != n)
    throw ConfigError("metrics: bundle sizes disagree");
  if (b.summaries.rows() != b.theta_star.rows())
    throw ConfigError("metrics: summary rows disagree with theta*");
  for (const Matrix& s : b.posterior_samples) {
    if (s.rows() < 2)
      throw ConfigError("metrics: need at least two posterior samples per set");
    if (s.cols() != b.theta_star.cols())
      throw ConfigError("metrics: posterior sample dimension mismatch");
  }
  if (!b.analytic.empty() && b.analytic.size() != n)
    throw ConfigError("metrics: analytic posterior count mismatch");
}

double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

double sorted_mean(std::vector<double> values) {
  if (values.empty())
    throw ConfigError("sorted_mean: no values");
  const double n = static_cast<double>(values.size());
  return sorted_sum(std::move(values)) / n;
}

double quantile_linear(std::vector<double> values, double p) {
  if (values.empty())
    throw ConfigError("quantile_linear: no values");
  if (p < 0.0 || p > 1.0)
    throw ConfigError("quantile_linear: p outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

double nrmse(const EvalBundle& b) {
  validate_bundle(b);
  const Eigen::Index n = b.theta_star.rows();
  const Eigen::Index jdim = b.theta_star.cols();

  Vector range(jdim);
  for (Eigen::Index j = 0; j < jdim; ++j) {
    const double r = b.theta_star.col(j).maxCoeff() - b.theta_star.col(j).minCoeff();
    if (r <= 0.0)
      throw ConfigError("nrmse: zero parameter range across the test set");
    range(j) = r;
  }

  std::vector<double> per_set;
  per_set.reserve(static_cast<std::size_t>(n));
  std::vector<double> per_param(static_cast<std::size_t>(jdim));
  std::vector<double> sq;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Matrix& s = b.posterior_samples[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < jdim; ++j) {
      sq.clear();
      for (Eigen::Index k = 0; k < s.rows(); ++k) {
        const double d = s(k, j) - b.theta_star(i, j);
        sq.push_back(d * d);
      }
      per_param[static_cast<std::size_t>(j)] = std::sqrt(sorted_mean(sq)) / range(j);
    }
    per_set.push_back(sorted_mean(per_param));
  }
  return sorted_mean(std::move(per_set));
}

double image_nrmse(const EvalBundle& b) {
  validate_bundle(b);
  const Eigen::Index n = b.theta_star.rows();
  const Eigen::Index jdim = b.theta_star.cols();
  std::vector<double> per_set;
  per_set.reserve(static_cast<std::size_t>(n));
  std::vector<double> per_param(static_cast<std::size_t>(jdim));
  std::vector<double> sq;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Matrix& s = b.posterior_samples[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < jdim; ++j) {
      sq.clear();
      for (Eigen::Index k = 0; k < s.rows(); ++k) {
        const double d = s(k, j) - b.theta_star(i, j);
        sq.push_back(d * d);
      }
      per_param[static_cast<std::size_t>(j)] = std::sqrt(sorted_mean(sq)) / 2.0;
    }
    per_set.push_back(sorted_mean(per_param));
  }
  return sorted_mean(std::move(per_set));
}

double ece(const EvalBundle& b, int n_levels) {
  validate_bundle(b);
  if (n_levels < 1)
    throw ConfigError("ece: need at least one credible level");
  const Eigen::Index n = b.theta_star.rows();
  const Eigen::Index jdim = b.theta_star.cols();

  std::vector<double> levels(static_cast<std::size_t>(n_levels));
  for (int r = 0; r < n_levels; ++r) {
    const double f = n_levels == 1 ? 0.0
                                   : static_cast<double>(r) / static_cast<double>(n_levels - 1);
    levels[static_cast<std::size_t>(r)] = 0.005 + f * (0.995 - 0.005);
  }

  std::vector<double> per_param;
  std::vector<double> col;
  for (Eigen::Index j = 0; j < jdim; ++j) {
    std::vector<double> gaps;
    for (double alpha : levels) {
      long covered = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Matrix& s = b.posterior_samples[static_cast<std::size_t>(i)];
        col.assign(s.col(j).data(), s.col(j).data() + s.rows());
        const double lo = quantile_linear(col, (1.0 - alpha) / 2.0);
        const double hi = quantile_linear(col, (1.0 + alpha) / 2.0);
        const double t = b.theta_star(i, j);
        if (t >= lo && t <= hi) ++covered;
      }
      const double coverage = static_cast<double>(covered) / static_cast<double>(n);
      gaps.push_back(std::abs(coverage - alpha));
    }
    std::sort(gaps.begin(), gaps.end());
    const std::size_t half = gaps.size() / 2;
    const double median = gaps.size() % 2 == 1
                              ? gaps[half]
                              : 0.5 * (gaps[half - 1] + gaps[half]);
    per_param.push_back(median);
  }
  return sorted_mean(std::move(per_param));
}

namespace {

double sample_variance(const Matrix& s, Eigen::Index j) {
  const Eigen::Index k = s.rows();
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) vals.push_back(s(i, j));
  const double m = sorted_mean(vals);
  std::vector<double> sq;
  sq.reserve(vals.size());
  for (double v : vals) sq.push_back((v - m) * (v - m));
  return sorted_sum(std::move(sq)) / static_cast<double>(k - 1);
}

}  // namespace

double posterior_contraction(const EvalBundle& b) {
  validate_bundle(b);
  const Eigen::Index n = b.theta_star.rows();
  const Eigen::Index jdim = b.theta_star.cols();

  Vector prior_var(jdim);
  std::vector<Eigen::Index> active;
  if (b.prior_variance.size() == jdim) {
    for (Eigen::Index j = 0; j < jdim; ++j)
      if (b.prior_variance(j) <= 0.0)
        throw ConfigError("posterior_contraction: nonpositive prior variance");
    prior_var = b.prior_variance;
    for (Eigen::Index j = 0; j < jdim; ++j) active.push_back(j);
  } else {
    for (Eigen::Index j = 0; j < jdim; ++j) {
      std::vector<double> vals;
      vals.reserve(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) vals.push_back(b.theta_star(i, j));
      const double m = sorted_mean(vals);
      std::vector<double> sq;
      for (double v : vals) sq.push_back((v - m) * (v - m));
      prior_var(j) = sorted_sum(std::move(sq)) / static_cast<double>(n - 1);
    }
    // Parameters whose empirical prior variance is (almost) degenerate carry
    // no measurable contraction, and their near-zero denominators would swamp
    // the average; keep only coordinates above a relative variance floor.
    const double floor = 1e-3 * prior_var.maxCoeff();
    for (Eigen::Index j = 0; j < jdim; ++j)
      if (prior_var(j) > floor) active.push_back(j);
    if (active.empty())
      throw ConfigError("posterior_contraction: no parameter has positive prior variance");
  }

  std::vector<double> per_set;
  std::vector<double> per_param(active.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Matrix& s = b.posterior_samples[static_cast<std::size_t>(i)];
    for (std::size_t a = 0; a < active.size(); ++a)
      per_param[a] = 1.0 - sample_variance(s, active[a]) / prior_var(active[a]);
    per_set.push_back(sorted_mean(per_param));
  }
  return sorted_mean(std::move(per_set));
}

double ppd(const EvalBundle& b, const sim::ScenarioSpec& assumed, PpdDistance dist,
           const kernels::KernelSpec& kernel, std::uint64_t seed) {
  validate_bundle(b);
  if (assumed.variant != sim::Variant::WellSpecified)
    throw ConfigError("ppd: re-simulation must use the assumed (well-specified) model");
  if (dist == PpdDistance::Mmd && assumed.family != sim::Family::Gaussian2d)
    throw ConfigError("ppd: MMD distance applies to the gaussian2d family");
  if (dist == PpdDistance::ImageNrmse && assumed.family != sim::Family::Camera)
    throw ConfigError("ppd: image NRMSE distance applies to the camera family");

  const Eigen::Index n = b.theta_star.rows();
  std::vector<double> per_set;
  per_set.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    rng::RngStream rs(seed, "ppd", static_cast<std::uint64_t>(i));
    const Matrix& samples = b.posterior_samples[static_cast<std::size_t>(i)];
    const Matrix& x = b.observations[static_cast<std::size_t>(i)];
    std::vector<double> per_sample;
    per_sample.reserve(static_cast<std::size_t>(samples.rows()));
    for (Eigen::Index k = 0; k < samples.rows(); ++k) {
      const Matrix xhat = sim::simulate_dataset(samples.row(k), assumed, rs);
      if (dist == PpdDistance::Mmd) {
        per_sample.push_back(kernels::mmd2_biased(x, xhat, kernel));
      } else {
        // pixel RMSE over the nominal [-1, 1] range
        const double rmse = std::sqrt((x - xhat).squaredNorm() /
                                      static_cast<double>(x.size()));
        per_sample.push_back(rmse / 2.0);
      }
    }
    per_set.push_back(sorted_mean(std::move(per_sample)));
  }
  return sorted_mean(std::move(per_set));
}

double ssdd(const Matrix& simulated_summaries, const Matrix& observed_summaries,
            const kernels::KernelSpec& kernel) {
  return kernels::mmd2_biased(simulated_summaries, observed_summaries, kernel);
}

double inld(const model::PosteriorModel& m, const EvalBundle& b,
            const std::vector<Matrix>& reference_theta, const kernels::KernelSpec& kernel,
            std::uint64_t seed) {
  validate_bundle(b);
  if (reference_theta.size() != static_cast<std::size_t>(b.theta_star.rows()))
    throw ConfigError("inld: need one reference set per dataset");
  Eigen::Index total = 0;
  for (const Matrix& r : reference_theta) total += r.rows();
  if (total == 0)
    throw ConfigError("inld: empty reference sets");

  Matrix latents(total, m.flow.param_dim);
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < reference_theta.size(); ++i) {
    const Matrix& ref = reference_theta[i];
    if (ref.cols() != m.flow.param_dim)
      throw ConfigError("inld: reference dimension mismatch");
    const Matrix cond = b.summaries.row(static_cast<Eigen::Index>(i))
                            .replicate(ref.rows(), 1);
    latents.middleRows(off, ref.rows()) =
        nets::flow_forward(m.flow, m.params, "flow", ref, cond).z;
    off += ref.rows();
  }

  rng::RngStream rs(seed, "inld-base");
  const Matrix base = rs.normal_matrix(total, m.flow.param_dim);
  return kernels::mmd2_biased(latents, base, kernel);
}

double rmse_to_analytic(const EvalBundle& b) {
  validate_bundle(b);
  if (b.analytic.empty())
    throw ConfigError("rmse_to_analytic: no analytic posteriors in bundle");
  const Eigen::Index n = b.theta_star.rows();
  const Eigen::Index jdim = b.theta_star.cols();
  std::vector<double> per_set;
  per_set.reserve(static_cast<std::size_t>(n));
  std::vector<double> sq(static_cast<std::size_t>(jdim));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Matrix& s = b.posterior_samples[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < jdim; ++j) {
      std::vector<double> col;
      col.reserve(static_cast<std::size_t>(s.rows()));
      for (Eigen::Index k = 0; k < s.rows(); ++k) col.push_back(s(k, j));
      const double d = sorted_mean(col) - b.analytic[static_cast<std::size_t>(i)].mean(j);
      sq[static_cast<std::size_t>(j)] = d * d;
    }
    per_set.push_back(std::sqrt(sorted_mean(sq)));
  }
  return sorted_mean(std::move(per_set));
}

double mmd2_to_analytic(const EvalBundle& b, const kernels::KernelSpec& kernel,
                        std::uint64_t seed) {
  validate_bundle(b);
  if (b.analytic.empty())
    throw ConfigError("mmd2_to_analytic: no analytic posteriors in bundle");
  const Eigen::Index n = b.theta_star.rows();
  std::vector<double> per_set;
  per_set.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    rng::RngStream rs(seed, "analytic-draws", static_cast<std::uint64_t>(i));
    const Matrix& s = b.posterior_samples[static_cast<std::size_t>(i)];
    const Matrix ref = sim::analytic_posterior_sample(
        b.analytic[static_cast<std::size_t>(i)], s.rows(), rs);
    per_set.push_back(kernels::mmd2_biased(s, ref, kernel));
  }
  return sorted_mean(std::move(per_set));
}

double MetricsReport::value(const std::string& name) const {
  for (const auto& [k, v] : values)
    if (k == name) return v;
  throw ConfigError("metrics report has no entry '" + name + "'");
}

bool MetricsReport::has(const std::string& name) const {
  for (const auto& [k, v] : values)
    if (k == name) return true;
  return false;
}

std::string csv_header() { return "method,scenario,variant_param,seed,metric,value"; }

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string csv_rows(const MetricsReport& r) {
  std::string out;
  for (const auto& [name, v] : r.values) {
    out += r.method + "," + r.scenario + "," + fmt_double(r.variant_param) + "," +
           std::to_string(r.seed) + "," + name + "," + fmt_double(v) + "\n";
  }
  return out;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  // Values go out as an ordered array: a JSON object would come back with its
  // keys alphabetized, so reloaded reports would emit CSV rows in a different
  // order than freshly computed ones.
  nlohmann::json values = nlohmann::json::array();
  for (const auto& [name, v] : r.values)
    values.push_back(nlohmann::json{{"metric", name}, {"value", v}});
  return nlohmann::json{{"method", r.method},
                        {"scenario", r.scenario},
                        {"variant_param", r.variant_param},
                        {"seed", r.seed},
                        {"config_hash", r.config_hash},
                        {"values", values}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.method = j.at("method").get<std::string>();
  r.scenario = j.at("scenario").get<std::string>();
  r.variant_param = j.at("variant_param").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_hash = j.value("config_hash", "");
  const nlohmann::json& vals = j.at("values");
  if (!vals.is_array()) throw DataError("metrics report values must be an array");
  for (const nlohmann::json& e : vals)
    r.values.emplace_back(e.at("metric").get<std::string>(), e.at("value").get<double>());
  return r;
}

}  // namespace abibench::metrics
