#include "abibench/simulators.hpp"

#include <nlohmann/json.hpp>

#include "abibench/camera.hpp"
#include "abibench/digits.hpp"
#include "abibench/idx.hpp"

namespace abibench::sim {

using nlohmann::json;

std::string family_name(Family f) {
  return f == Family::Gaussian2d ? "gaussian2d" : "camera";
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::WellSpecified: return "well_specified";
    case Variant::PriorLocation: return "prior_location";
    case Variant::PriorScale: return "prior_scale";
    case Variant::LikelihoodScale: return "likelihood_scale";
    case Variant::Contamination: return "contamination";
    case Variant::ImagePriorShift: return "image_prior_shift";
    case Variant::ImageBlur: return "image_blur";
    case Variant::SaltPepper: return "salt_pepper";
    case Variant::RowBlackout: return "row_blackout";
  }
  throw ConfigError("variant_name: unknown variant");
}

namespace {

Variant variant_from_name(const std::string& s) {
  for (Variant v : {Variant::WellSpecified, Variant::PriorLocation, Variant::PriorScale,
                    Variant::LikelihoodScale, Variant::Contamination, Variant::ImagePriorShift,
                    Variant::ImageBlur, Variant::SaltPepper, Variant::RowBlackout})
    if (variant_name(v) == s) return v;
  throw ConfigError("unknown scenario variant: " + s);
}

bool variant_matches_family(Family f, Variant v) {
  const bool gaussian_variant =
      v == Variant::WellSpecified || v == Variant::PriorLocation || v == Variant::PriorScale ||
      v == Variant::LikelihoodScale || v == Variant::Contamination;
  if (f == Family::Gaussian2d) return gaussian_variant;
  return v == Variant::WellSpecified || !gaussian_variant;
}

}  // namespace

ScenarioSpec ScenarioSpec::assumed() const {
  ScenarioSpec a = *this;
  a.variant = Variant::WellSpecified;
  a.prior_loc = Eigen::Vector2d::Zero();
  a.prior_scale = 1.0;
  a.likelihood_scale = 1.0;
  a.contamination_eps = 0.0;
  return a;
}

std::string ScenarioSpec::name() const {
  return family_name(family) + "/" + variant_name(variant);
}

double ScenarioSpec::variant_param() const {
  switch (variant) {
    case Variant::WellSpecified: return 0.0;
    case Variant::PriorLocation: return prior_loc(0);
    case Variant::PriorScale: return prior_scale;
    case Variant::LikelihoodScale: return likelihood_scale;
    case Variant::Contamination: return contamination_eps;
    case Variant::ImagePriorShift: return 0.0;
    case Variant::ImageBlur: return blur_factor;
    case Variant::SaltPepper: return salt_pepper_frac;
    case Variant::RowBlackout: return static_cast<double>(blackout_rows);
  }
  return 0.0;
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec s;
  const std::string fam = j.value("family", "gaussian2d");
  if (fam == "gaussian2d")
    s.family = Family::Gaussian2d;
  else if (fam == "camera")
    s.family = Family::Camera;
  else
    throw ConfigError("unknown simulator family: " + fam);

  s.variant = variant_from_name(j.value("variant", "well_specified"));
  if (!variant_matches_family(s.family, s.variant))
    throw ConfigError("variant '" + variant_name(s.variant) + "' does not belong to family '" +
                      fam + "'");

  s.obs_per_dataset = j.value("M", 100);
  if (s.obs_per_dataset <= 0 && s.family == Family::Gaussian2d)
    throw ConfigError("scenario: M must be positive");

  const json p = j.value("params", json::object());
  if (p.contains("mu0")) {
    const auto v = p.at("mu0").get<std::vector<double>>();
    if (v.size() != 2)
      throw ConfigError("scenario: mu0 must have two components");
    s.prior_loc << v[0], v[1];
  }
  s.prior_scale = p.value("tau0", s.prior_scale);
  s.likelihood_scale = p.value("tau", s.likelihood_scale);
  s.contamination_eps = p.value("epsilon", s.contamination_eps);
  s.contamination_c = p.value("c", s.contamination_c);
  s.sigma0 = p.value("sigma0", s.sigma0);
  s.blur_factor = p.value("factor", s.blur_factor);
  s.salt_pepper_frac = p.value("frac", s.salt_pepper_frac);
  s.blackout_rows = p.value("rows", s.blackout_rows);
  s.quantization = p.value("quantization", s.quantization);
  s.source_images = p.value("source_images", s.source_images);
  s.shift_images = p.value("shift_images", s.shift_images);

  if (s.prior_scale <= 0.0 || s.likelihood_scale <= 0.0)
    throw ConfigError("scenario: variance knobs must be positive");
  if (s.contamination_eps < 0.0 || s.contamination_eps > 1.0)
    throw ConfigError("scenario: epsilon must lie in [0, 1]");
  return s;
}

json scenario_to_json(const ScenarioSpec& s) {
  json p = json::object();
  p["mu0"] = {s.prior_loc(0), s.prior_loc(1)};
  p["tau0"] = s.prior_scale;
  p["tau"] = s.likelihood_scale;
  p["epsilon"] = s.contamination_eps;
  p["c"] = s.contamination_c;
  p["sigma0"] = s.sigma0;
  p["factor"] = s.blur_factor;
  p["frac"] = s.salt_pepper_frac;
  p["rows"] = s.blackout_rows;
  p["quantization"] = s.quantization;
  if (!s.source_images.empty()) p["source_images"] = s.source_images;
  if (!s.shift_images.empty()) p["shift_images"] = s.shift_images;
  return json{{"family", family_name(s.family)},
              {"variant", variant_name(s.variant)},
              {"M", s.obs_per_dataset},
              {"params", p}};
}

ImageSource::ImageSource(std::uint64_t, bool shifted) : shifted_(shifted) {}

ImageSource::ImageSource(const std::string& idx_path) {
  IdxImages data = load_idx_images(idx_path);
  if (data.height != 28 || data.width != 28)
    throw DataError("image source must hold 28x28 images: " + idx_path);
  pool_.reserve(data.images.size());
  for (const Matrix& img : data.images) pool_.push_back(downscale_antialias(img));
}

Matrix ImageSource::draw(Eigen::Index n, rng::RngStream& rng) {
  Matrix out(n, 256);
  if (!pool_.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (cursor_ >= pool_.size())
        throw DataError("image source exhausted after " + std::to_string(cursor_) + " draws");
      out.row(i) = pool_[cursor_++].row(0);
    }
    return out;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int digit = static_cast<int>(rng.uniform_int(0, 9));
    Matrix glyph = render_digit(digit, rng);
    if (shifted_) {
      // re-render with smaller margins: 2-pixel center crop, scaled back up
      Matrix cropped = glyph.block(2, 2, 24, 24);
      glyph = resize_bilinear(cropped, 28, 28);
    }
    out.row(i) = downscale_antialias(glyph).row(0);
  }
  return out;
}

void ImageSource::skip(Eigen::Index n, rng::RngStream& rng) {
  if (!pool_.empty()) {
    cursor_ += static_cast<std::size_t>(n);
    return;
  }
  draw(n, rng);
}

ImageSource make_image_source(const ScenarioSpec& spec, std::uint64_t seed) {
  if (spec.variant == Variant::ImagePriorShift) {
    if (!spec.shift_images.empty()) return ImageSource(spec.shift_images);
    return ImageSource(seed, /*shifted=*/true);
  }
  return make_assumed_image_source(spec, seed);
}

ImageSource make_assumed_image_source(const ScenarioSpec& spec, std::uint64_t seed) {
  if (!spec.source_images.empty()) return ImageSource(spec.source_images);
  return ImageSource(seed, /*shifted=*/false);
}

Matrix sample_prior(const ScenarioSpec& spec, Eigen::Index n, rng::RngStream& rng,
                    ImageSource* images) {
  if (spec.family == Family::Camera) {
    if (images == nullptr)
      throw ConfigError("sample_prior: camera family needs an image source");
    return images->draw(n, rng);
  }
  Matrix theta(n, 2);
  const double sd =
      spec.variant == Variant::PriorScale ? std::sqrt(spec.prior_scale) : 1.0;
  const Eigen::Vector2d loc =
      spec.variant == Variant::PriorLocation ? spec.prior_loc : Eigen::Vector2d::Zero();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) theta(i, j) = loc(j) + sd * rng.normal();
  return theta;
}

Matrix simulate_dataset(const RowVector& theta, const ScenarioSpec& spec, rng::RngStream& rng) {
  if (spec.family == Family::Camera) {
    if (theta.size() != 256)
      throw ConfigError("simulate_dataset: camera parameters must be flat 16x16 images");
    const double sigma =
        spec.variant == Variant::ImageBlur ? spec.blur_factor * spec.sigma0 : spec.sigma0;
    Matrix x = camera_forward(theta, 16, sigma, spec.quantization, rng);
    if (spec.variant == Variant::SaltPepper)
      x = salt_pepper(x, spec.salt_pepper_frac, rng);
    else if (spec.variant == Variant::RowBlackout)
      x = blackout_rows(x, 16, spec.blackout_rows, rng);
    return x;
  }

  if (theta.size() != 2)
    throw ConfigError("simulate_dataset: gaussian2d parameters are 2-d locations");
  const int m = spec.obs_per_dataset;
  if (m <= 0)
    throw ConfigError("simulate_dataset: M must be positive");
  const double sd =
      spec.variant == Variant::LikelihoodScale ? std::sqrt(spec.likelihood_scale) : 1.0;
  Matrix x(m, 2);
  for (int i = 0; i < m; ++i) {
    if (spec.variant == Variant::Contamination) {
      const double u = rng.uniform();
      if (u < spec.contamination_eps * 0.5) {
        x.row(i).setConstant(spec.contamination_c);
        continue;
      }
      if (u < spec.contamination_eps) {
        x.row(i).setConstant(-spec.contamination_c);
        continue;
      }
    }
    for (Eigen::Index j = 0; j < 2; ++j) x(i, j) = theta(j) + sd * rng.normal();
  }
  return x;
}

AnalyticPosterior analytic_posterior(const Matrix& dataset) {
  const Eigen::Index m = dataset.rows();
  if (m == 0)
    throw ConfigError("analytic_posterior: empty dataset");
  if (dataset.cols() != 2)
    throw ConfigError("analytic_posterior: expected M x 2 data");
  const double denom = static_cast<double>(m) + 1.0;
  AnalyticPosterior post;
  post.mean = dataset.colwise().sum().transpose() / denom;
  post.cov = Eigen::Matrix2d::Identity() / denom;
  return post;
}

Matrix analytic_posterior_sample(const AnalyticPosterior& post, Eigen::Index n,
                                 rng::RngStream& rng) {
  const double sd = std::sqrt(post.cov(0, 0));
  Matrix s(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) s(i, j) = post.mean(j) + sd * rng.normal();
  return s;
}

}  // namespace abibench::sim
