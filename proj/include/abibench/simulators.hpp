#pragma once

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "abibench/common.hpp"
#include "abibench/rng.hpp"

namespace abibench::sim {

enum class Family { Gaussian2d, Camera };

enum class Variant {
  // gaussian2d
  WellSpecified,
  PriorLocation,
  PriorScale,
  LikelihoodScale,
  Contamination,
  // camera
  ImagePriorShift,
  ImageBlur,
  SaltPepper,
  RowBlackout,
};

// One benchmark cell: which generative family, which misspecification, and
// its knobs. The assumed (training) model is always the well-specified
// counterpart; the variant only shapes observed and evaluation data.
struct ScenarioSpec {
  Family family = Family::Gaussian2d;
  Variant variant = Variant::WellSpecified;
  int obs_per_dataset = 100;  // M, gaussian2d only

  // gaussian2d knobs
  Eigen::Vector2d prior_loc{0.0, 0.0};
  double prior_scale = 1.0;       // tau0, prior variance per component
  double likelihood_scale = 1.0;  // tau, likelihood variance per component
  double contamination_eps = 0.0;
  double contamination_c = 1.5;

  // camera knobs
  double sigma0 = 1.4;            // assumed blur width
  double blur_factor = 1.25;      // observed blur = factor * sigma0
  double salt_pepper_frac = 0.1;
  int blackout_rows = 2;
  int quantization = 256;
  std::string source_images;      // optional IDX path for the base image source
  std::string shift_images;       // optional IDX path for the shifted source

  bool is_gaussian() const { return family == Family::Gaussian2d; }
  ScenarioSpec assumed() const;
  std::string name() const;
  double variant_param() const;
};

std::string family_name(Family f);
std::string variant_name(Variant v);

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);

// Clean 16x16 images in [-1, 1] for the camera family: either decoded from
// an IDX file or rendered procedurally (never exhausts). The shifted source
// re-renders with smaller margins via a 2-pixel center crop.
class ImageSource {
 public:
  // Procedural source.
  ImageSource(std::uint64_t seed, bool shifted);
  // IDX-backed source; images are consumed sequentially.
  explicit ImageSource(const std::string& idx_path);

  Matrix draw(Eigen::Index n, rng::RngStream& rng);  // n x 256
  void skip(Eigen::Index n, rng::RngStream& rng);
  bool procedural() const { return pool_.empty(); }

 private:
  std::vector<Matrix> pool_;  // preprocessed 1 x 256 rows when IDX-backed
  std::size_t cursor_ = 0;
  bool shifted_ = false;
};

// The source the scenario draws its evaluation/observed parameters from
// (the shifted one for ImagePriorShift, the base one otherwise).
ImageSource make_image_source(const ScenarioSpec& spec, std::uint64_t seed);
// The source for the assumed model (always the base source).
ImageSource make_assumed_image_source(const ScenarioSpec& spec, std::uint64_t seed);

// n parameter draws: n x 2 locations (gaussian2d) or n x 256 clean images
// (camera; requires a source).
Matrix sample_prior(const ScenarioSpec& spec, Eigen::Index n, rng::RngStream& rng,
                    ImageSource* images = nullptr);

// One dataset conditioned on theta: M x 2 rows (gaussian2d) or a 1 x 256
// observation (camera). All variant distortions are applied here except the
// prior-side ones, which live in sample_prior.
Matrix simulate_dataset(const RowVector& theta, const ScenarioSpec& spec, rng::RngStream& rng);

// Conjugate posterior under the assumed model (prior N(0, I), likelihood
// N(theta, I)): mean = M xbar / (M + 1), cov = I / (M + 1).
struct AnalyticPosterior {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
};
AnalyticPosterior analytic_posterior(const Matrix& dataset);
Matrix analytic_posterior_sample(const AnalyticPosterior& post, Eigen::Index n,
                                 rng::RngStream& rng);

}  // namespace abibench::sim
