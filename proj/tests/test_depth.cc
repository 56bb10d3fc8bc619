#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "priorsfm/depth/depth_refiner.h"
#include "priorsfm/depth/depth_scale.h"
#include "priorsfm/depth/uncertainty.h"
#include "priorsfm/geometry/intrinsics.h"
#include "priorsfm/geometry/raster.h"
#include "priorsfm/util/errors.h"
#include "priorsfm/util/rng.h"
#include "priorsfm/util/stats.h"

using namespace priorsfm;

namespace {

Raster ConstantRaster(int width, int height, int channels, float value) {
  return Raster(width, height, channels, value);
}

Eigen::Vector3d SphericalNormal(double theta, double phi) {
  const double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

// A slanted plane observed by a pinhole camera with square pixels. Along any
// image row or column the inverse depth is an affine function, so one-sided
// differences of it equal the true derivative and the normal-integration
// residuals vanish identically.
struct PlaneScene {
  CameraIntrinsics intrinsics;
  Eigen::Vector3d normal;  // unit, facing the camera (negative z)
  double offset = 0.0;     // plane equation: normal . X = offset

  double NTilde(double u, double v) const {
    return normal.x() * (u - intrinsics.cx) + normal.y() * (v - intrinsics.cy) +
           normal.z() * intrinsics.fx;
  }
  double Depth(double u, double v) const {
    return offset * intrinsics.fx / NTilde(u, v);
  }
};

PlaneScene MakePlaneScene() {
  PlaneScene scene;
  scene.intrinsics = {40.0, 40.0, 15.5, 15.5, 32, 32};
  scene.normal = Eigen::Vector3d(0.25, -0.15, -0.95).normalized();
  scene.offset = 3.0 * scene.normal.z();  // passes through (0, 0, 3)
  return scene;
}

Raster PlaneDepthRaster(const PlaneScene& scene) {
  Raster depth(scene.intrinsics.width, scene.intrinsics.height, 1);
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      depth.at(u, v) = static_cast<float>(scene.Depth(u, v));
    }
  }
  return depth;
}

Raster ConstantNormalRaster(int width, int height, const Eigen::Vector3d& n) {
  Raster normals(width, height, 3);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      normals.at(u, v, 0) = static_cast<float>(n.x());
      normals.at(u, v, 1) = static_cast<float>(n.y());
      normals.at(u, v, 2) = static_cast<float>(n.z());
    }
  }
  return normals;
}

Raster ProportionalSigma(const Raster& depth, double fraction) {
  Raster sigma(depth.width(), depth.height(), 1);
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (depth.IsValid(u, v)) {
        sigma.at(u, v) = static_cast<float>(fraction * depth.at(u, v));
      }
    }
  }
  return sigma;
}

double DepthRmse(const Raster& depth,
                 const std::function<double(int, int)>& truth) {
  double sum = 0.0;
  int count = 0;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (!depth.IsValid(u, v)) continue;
      const double e = depth.at(u, v) - truth(u, v);
      sum += e * e;
      ++count;
    }
  }
  REQUIRE(count > 0);
  return std::sqrt(sum / count);
}

}  // namespace

TEST_CASE("depth uncertainty calibration takes the largest of three floors") {
  Raster depth(3, 1, 1);
  Raster raw(3, 1, 1);
  depth.at(0, 0) = 1.0f;   // raw 0.01 -> proportional floor 0.05 wins
  raw.at(0, 0) = 0.01f;
  depth.at(1, 0) = 10.0f;  // raw 0.8 beats both floors
  raw.at(1, 0) = 0.8f;
  depth.at(2, 0) = 0.1f;   // everything tiny -> absolute floor 0.02 wins
  raw.at(2, 0) = 0.0f;

  const Raster sigma = CalibrateDepthUncertainty(depth, raw, {});
  CHECK(sigma.at(0, 0) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(sigma.at(1, 0) == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(sigma.at(2, 0) == doctest::Approx(0.02).epsilon(1e-6));

  // Doubling the model multiplier is exact in binary floating point.
  UncertaintyCalibrationOptions scaled;
  scaled.scale = 2.0;
  const Raster sigma2 = CalibrateDepthUncertainty(depth, raw, scaled);
  CHECK(sigma2.at(1, 0) == 2.0f * raw.at(1, 0));
}

TEST_CASE("depth uncertainty calibration keeps invalid pixels invalid") {
  Raster depth(2, 1, 1);
  Raster raw(2, 1, 1);
  depth.at(0, 0) = 5.0f;
  raw.at(0, 0) = 0.1f;
  depth.at(1, 0) = 5.0f;  // raw stays NaN

  const Raster sigma = CalibrateDepthUncertainty(depth, raw, {});
  CHECK(sigma.IsValid(0, 0));
  CHECK_FALSE(sigma.IsValid(1, 0));

  Raster mismatched(3, 1, 1);
  CHECK_THROWS_AS(CalibrateDepthUncertainty(depth, mismatched, {}),
                  ShapeMismatchError);
}

TEST_CASE("normal uncertainty with flat depth gradient reduces to the angular "
          "covariance entry") {
  // At the principal point with zero log-depth gradient the u-residual
  // Jacobian is (1, 0, 0), so the variance is the top-left entry of the
  // Cartesian covariance: sigma^2 (cos^2 t cos^2 p + sin^2 t sin^2 p) =
  // sigma^2 / 2 at t = 45deg, p = 0.
  CameraIntrinsics cam{40.0, 40.0, 0.0, 0.0, 1, 1};
  Raster normals = ConstantNormalRaster(1, 1, SphericalNormal(kPi / 4.0, 0.0));
  Raster sigma = ConstantRaster(1, 1, 1, 0.1f);
  Raster gradient = ConstantRaster(1, 1, 2, 0.0f);

  const NormalResidualModel model =
      PropagateNormalUncertainty(normals, sigma, cam, &gradient, {});
  CHECK(model.variance_u.at(0, 0, 0) == doctest::Approx(0.005).epsilon(1e-5));
  CHECK(model.variance_v.at(0, 0, 0) == doctest::Approx(0.005).epsilon(1e-5));
  // Both one-sided channels carry the same central-difference value.
  CHECK(model.variance_u.at(0, 0, 0) == model.variance_u.at(0, 0, 1));
  CHECK(model.variance_v.at(0, 0, 0) == model.variance_v.at(0, 0, 1));
}

TEST_CASE("zero angular uncertainty clamps to the variance floor") {
  CameraIntrinsics cam{40.0, 40.0, 0.0, 0.0, 1, 1};
  Raster normals = ConstantNormalRaster(1, 1, SphericalNormal(1.1, 0.4));
  Raster sigma = ConstantRaster(1, 1, 1, 0.0f);

  const NormalResidualModel model =
      PropagateNormalUncertainty(normals, sigma, cam, nullptr, {});
  CHECK(model.variance_u.at(0, 0, 0) == static_cast<float>(1e-6));
  CHECK(model.variance_v.at(0, 0, 0) == static_cast<float>(1e-6));
}

TEST_CASE("camera-facing normals use the isotropic pole fallback") {
  // The spherical parametrization is singular at the poles; a fronto-parallel
  // surface patch sits exactly there. With the gradient approximation the
  // Jacobian is (1, 0, 0) and the isotropic covariance gives sigma^2.
  CameraIntrinsics cam{40.0, 40.0, 0.0, 0.0, 1, 1};
  Raster normals = ConstantNormalRaster(1, 1, {0.0, 0.0, -1.0});
  Raster sigma = ConstantRaster(1, 1, 1, 0.05f);

  const NormalResidualModel model =
      PropagateNormalUncertainty(normals, sigma, cam, nullptr, {});
  CHECK(model.variance_u.at(0, 0, 0) == doctest::Approx(0.0025).epsilon(1e-5));
  CHECK(model.variance_v.at(0, 0, 0) == doctest::Approx(0.0025).epsilon(1e-5));
}

TEST_CASE("propagated residual variance matches a Monte-Carlo simulation") {
  // Off-center pixel, general normal orientation, gradient taken from the
  // normal itself. The simulation draws angular perturbations and evaluates
  // the nonlinear residual directly, independently of the closed-form
  // Jacobian chain.
  CameraIntrinsics cam{40.0, 40.0, -18.0, -6.0, 1, 1};
  const double theta = 1.0;
  const double phi = 0.6;
  const double sigma_angular = 0.05;
  Raster normals = ConstantNormalRaster(1, 1, SphericalNormal(theta, phi));
  Raster sigma = ConstantRaster(1, 1, 1, static_cast<float>(sigma_angular));

  const NormalResidualModel model =
      PropagateNormalUncertainty(normals, sigma, cam, nullptr, {});

  // The gradient is frozen at the mean normal, exactly as in the model.
  const Eigen::Vector3d n_mean(normals.at(0, 0, 0), normals.at(0, 0, 1),
                               normals.at(0, 0, 2));
  const double du = 0.0 - cam.cx;
  const double dv = 0.0 - cam.cy;
  const auto n_tilde_u = [&](const Eigen::Vector3d& n) {
    return n.x() * du + n.y() * dv + n.z() * cam.fx;
  };
  const auto n_tilde_v = [&](const Eigen::Vector3d& n) {
    return n.x() * du + n.y() * dv + n.z() * cam.fy;
  };
  const double grad_u = -n_mean.x() / n_tilde_u(n_mean);
  const double grad_v = -n_mean.y() / n_tilde_v(n_mean);

  Rng rng(991);
  const int trials = 200000;
  double sum_u = 0.0, sum_sq_u = 0.0, sum_v = 0.0, sum_sq_v = 0.0;
  for (int i = 0; i < trials; ++i) {
    const double t = theta + sigma_angular * rng.Gaussian();
    const double p = phi + sigma_angular * rng.Gaussian();
    const Eigen::Vector3d n = SphericalNormal(t, p);
    const double r_u = n_tilde_u(n) * grad_u + n.x();
    const double r_v = n_tilde_v(n) * grad_v + n.y();
    sum_u += r_u;
    sum_sq_u += r_u * r_u;
    sum_v += r_v;
    sum_sq_v += r_v * r_v;
  }
  const double mean_u = sum_u / trials;
  const double mean_v = sum_v / trials;
  const double var_u = sum_sq_u / trials - mean_u * mean_u;
  const double var_v = sum_sq_v / trials - mean_v * mean_v;

  CHECK(model.variance_u.at(0, 0, 0) == doctest::Approx(var_u).epsilon(0.05));
  CHECK(model.variance_v.at(0, 0, 0) == doctest::Approx(var_v).epsilon(0.05));
}

TEST_CASE("propagated residual variance matches finite-difference Jacobians") {
  // Numerical derivatives of the residual with respect to the two angles,
  // squared and summed, must reproduce the closed-form propagation at every
  // pixel. Distinct focal lengths exercise both residual directions.
  CameraIntrinsics cam{47.0, 53.0, 4.2, 3.1, 9, 7};
  Raster normals(9, 7, 3);
  Raster sigma(9, 7, 1);
  Rng rng(17);
  for (int v = 0; v < 7; ++v) {
    for (int u = 0; u < 9; ++u) {
      const double theta = rng.Uniform(0.3, 2.0);
      const double phi = rng.Uniform(-kPi, kPi);
      const Eigen::Vector3d n = SphericalNormal(theta, phi);
      normals.at(u, v, 0) = static_cast<float>(n.x());
      normals.at(u, v, 1) = static_cast<float>(n.y());
      normals.at(u, v, 2) = static_cast<float>(n.z());
      sigma.at(u, v) = static_cast<float>(rng.Uniform(0.03, 0.1));
    }
  }

  const NormalResidualModel model =
      PropagateNormalUncertainty(normals, sigma, cam, nullptr, {});

  const double h = 1e-6;
  for (int v = 0; v < 7; ++v) {
    for (int u = 0; u < 9; ++u) {
      const Eigen::Vector3d n(normals.at(u, v, 0), normals.at(u, v, 1),
                              normals.at(u, v, 2));
      const double theta = std::acos(std::clamp(n.z(), -1.0, 1.0));
      const double phi = std::atan2(n.y(), n.x());
      const double du = u - cam.cx;
      const double dv = v - cam.cy;
      const auto residuals = [&](double t, double p, double* r_u, double* r_v) {
        const Eigen::Vector3d m = SphericalNormal(t, p);
        const double nt_u = m.x() * du + m.y() * dv + m.z() * cam.fx;
        const double nt_v = m.x() * du + m.y() * dv + m.z() * cam.fy;
        const double g_u = -n.x() / (n.x() * du + n.y() * dv + n.z() * cam.fx);
        const double g_v = -n.y() / (n.x() * du + n.y() * dv + n.z() * cam.fy);
        *r_u = nt_u * g_u + m.x();
        *r_v = nt_v * g_v + m.y();
      };
      double up_u, up_v, dn_u, dn_v, j_theta_u, j_theta_v, j_phi_u, j_phi_v;
      residuals(theta + h, phi, &up_u, &up_v);
      residuals(theta - h, phi, &dn_u, &dn_v);
      j_theta_u = (up_u - dn_u) / (2.0 * h);
      j_theta_v = (up_v - dn_v) / (2.0 * h);
      residuals(theta, phi + h, &up_u, &up_v);
      residuals(theta, phi - h, &dn_u, &dn_v);
      j_phi_u = (up_u - dn_u) / (2.0 * h);
      j_phi_v = (up_v - dn_v) / (2.0 * h);

      const double s2 = static_cast<double>(sigma.at(u, v)) * sigma.at(u, v);
      const double var_u =
          std::max(1e-6, s2 * (j_theta_u * j_theta_u + j_phi_u * j_phi_u));
      const double var_v =
          std::max(1e-6, s2 * (j_theta_v * j_theta_v + j_phi_v * j_phi_v));
      CHECK(model.variance_u.at(u, v, 0) ==
            doctest::Approx(var_u).epsilon(1e-4));
      CHECK(model.variance_v.at(u, v, 0) ==
            doctest::Approx(var_v).epsilon(1e-4));
    }
  }
}

TEST_CASE("invalid normals leave holes in the residual model") {
  CameraIntrinsics cam{40.0, 40.0, 1.0, 1.0, 3, 3};
  Raster normals = ConstantNormalRaster(3, 3, SphericalNormal(0.9, 0.2));
  normals.SetInvalid(1, 1);
  Raster sigma = ConstantRaster(3, 3, 1, 0.05f);

  const NormalResidualModel model =
      PropagateNormalUncertainty(normals, sigma, cam, nullptr, {});
  CHECK_FALSE(model.n_tilde.IsValid(1, 1));
  CHECK_FALSE(model.variance_u.IsValid(1, 1));
  CHECK(model.n_tilde.IsValid(0, 1));
  CHECK(model.variance_v.IsValid(2, 2));
}

TEST_CASE("flip consistency of identical maps returns the model uncertainty") {
  Raster normals = ConstantNormalRaster(2, 2, SphericalNormal(0.8, -0.3));
  Raster sigma_model = ConstantRaster(2, 2, 1, 0.07f);

  const Raster sigma = FlipConsistencyCovariance(normals, normals, sigma_model);
  for (int v = 0; v < 2; ++v) {
    for (int u = 0; u < 2; ++u) {
      CHECK(sigma.at(u, v) == 0.07f);
    }
  }
}

TEST_CASE("flip consistency of a symmetric polar split is delta root two") {
  // Estimates at theta +/- delta with equal azimuth deviate from their mean
  // by -/+ delta, so the angular covariance is diag(2 delta^2, 0) and its
  // dominant standard deviation is delta sqrt(2).
  const double theta = 0.9;
  const double phi = 0.4;
  const double delta = 0.05;
  Raster a = ConstantNormalRaster(1, 1, SphericalNormal(theta + delta, phi));
  Raster b = ConstantNormalRaster(1, 1, SphericalNormal(theta - delta, phi));
  Raster sigma_model = ConstantRaster(1, 1, 1, 0.001f);

  const Raster sigma = FlipConsistencyCovariance(a, b, sigma_model);
  CHECK(sigma.at(0, 0) ==
        doctest::Approx(delta * std::sqrt(2.0)).epsilon(1e-5));
}

TEST_CASE("flip consistency keeps the model value when it dominates") {
  Raster a = ConstantNormalRaster(1, 1, SphericalNormal(0.9, 0.4));
  Raster b = ConstantNormalRaster(1, 1, SphericalNormal(0.91, 0.41));
  Raster sigma_model = ConstantRaster(1, 1, 1, 1.0f);

  const Raster sigma = FlipConsistencyCovariance(a, b, sigma_model);
  CHECK(sigma.at(0, 0) == 1.0f);
}

TEST_CASE("flip consistency survives wildly disagreeing normals") {
  Raster a = ConstantNormalRaster(1, 1, {1.0, 0.0, 0.0});
  Raster b = ConstantNormalRaster(1, 1, {0.0, 1.0, 0.0});
  Raster sigma_model = ConstantRaster(1, 1, 1, 0.05f);

  const Raster sigma = FlipConsistencyCovariance(a, b, sigma_model);
  CHECK(sigma.IsValid(0, 0));
  CHECK(sigma.at(0, 0) >= 0.05f);
}

TEST_CASE("flip consistency passes the model through where one map is "
          "missing") {
  Raster a = ConstantNormalRaster(2, 1, SphericalNormal(0.7, 0.1));
  Raster b = ConstantNormalRaster(2, 1, SphericalNormal(0.7, 0.1));
  b.SetInvalid(1, 0);
  Raster sigma_model = ConstantRaster(2, 1, 1, 0.04f);

  const Raster sigma = FlipConsistencyCovariance(a, b, sigma_model);
  CHECK(sigma.at(0, 0) == 0.04f);
  CHECK(sigma.at(1, 0) == 0.04f);

  Raster mismatched = ConstantRaster(3, 1, 1, 0.04f);
  CHECK_THROWS_AS(FlipConsistencyCovariance(a, b, mismatched),
                  ShapeMismatchError);
}

TEST_CASE("depth scaling is the median of per-observation depth ratios") {
  Raster depth = ConstantRaster(4, 4, 1, 2.0f);
  std::vector<DepthScaleObservation> obs = {
      {{1.0, 1.0}, 4.0}, {{2.0, 2.0}, 4.0}, {{3.0, 1.0}, 8.0}};
  CHECK(ScaleDepth(depth, obs) == 2.0);
}

TEST_CASE("depth scaling equals the middle order statistic for odd counts") {
  Raster depth(8, 8, 1);
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      depth.at(u, v) = static_cast<float>(2.0 + 0.01 * u + 0.02 * v);
    }
  }
  Rng rng(23);
  std::vector<DepthScaleObservation> obs;
  std::vector<double> ratios;
  for (int i = 0; i < 7; ++i) {
    const int u = rng.UniformInt(0, 7);
    const int v = rng.UniformInt(0, 7);
    const double scene = rng.Uniform(1.0, 9.0);
    obs.push_back({{static_cast<double>(u), static_cast<double>(v)}, scene});
    ratios.push_back(scene / static_cast<double>(depth.at(u, v)));
  }
  std::sort(ratios.begin(), ratios.end());
  const double s = ScaleDepth(depth, obs);
  CHECK(s == ratios[3]);  // bit-exact: the returned scale IS a ratio

  // Even count: the average of the two central ratios, bit-for-bit.
  obs.push_back({{5.0, 5.0}, 3.3});
  ratios.push_back(3.3 / static_cast<double>(depth.at(5, 5)));
  std::sort(ratios.begin(), ratios.end());
  CHECK(ScaleDepth(depth, obs) == 0.5 * (ratios[3] + ratios[4]));

  // Halving the prior doubles the scale exactly (power-of-two arithmetic).
  Raster halved(8, 8, 1);
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      halved.at(u, v) = 0.5f * depth.at(u, v);
    }
  }
  CHECK(ScaleDepth(halved, obs) == 2.0 * ScaleDepth(depth, obs));
}

TEST_CASE("depth scaling skips unusable observations and may run out") {
  Raster depth = ConstantRaster(4, 4, 1, 2.0f);
  depth.SetInvalid(2, 2);
  std::vector<DepthScaleObservation> obs = {
      {{-5.0, 1.0}, 4.0},   // out of bounds
      {{2.2, 2.2}, 4.0},    // footprint touches the invalid pixel
      {{1.0, 1.0}, -1.0},   // non-positive scene depth
      {{0.5, 0.5}, 6.0},    // the only valid one: ratio 3
  };
  CHECK(ScaleDepth(depth, obs) == 3.0);

  obs.pop_back();
  CHECK_THROWS_AS(ScaleDepth(depth, obs), NoValidObservationsError);
}

TEST_CASE("refinement leaves an exactly consistent plane in place") {
  const PlaneScene scene = MakePlaneScene();
  Raster prior = PlaneDepthRaster(scene);
  prior.SetInvalid(5, 7);
  prior.SetInvalid(20, 3);
  prior.SetInvalid(20, 4);
  const Raster sigma_d = ProportionalSigma(prior, 0.05);
  Raster normals = ConstantNormalRaster(32, 32, scene.normal);
  Raster sigma_n = ConstantRaster(32, 32, 1, 0.05f);
  const NormalResidualModel model =
      PropagateNormalUncertainty(normals, sigma_n, scene.intrinsics, nullptr, {});

  const RefineDepthResult result =
      RefineDepth(prior, sigma_d, model, {}, nullptr, {});
  for (int v = 0; v < 32; ++v) {
    for (int u = 0; u < 32; ++u) {
      if (!prior.IsValid(u, v)) {
        CHECK_FALSE(result.depth.IsValid(u, v));
        continue;
      }
      CHECK(std::abs(result.depth.at(u, v) - prior.at(u, v)) <=
            1e-6 * prior.at(u, v));
    }
  }
}

TEST_CASE("refinement of an exactly consistent constant depth costs nothing") {
  // Depth 2.0 makes every arithmetic step exact: the inverse depth field is
  // bit-for-bit constant, all residuals are exactly zero, and the solver has
  // nothing to do.
  CameraIntrinsics cam{40.0, 40.0, 7.5, 7.5, 16, 16};
  Raster prior = ConstantRaster(16, 16, 1, 2.0f);
  const Raster sigma_d = ProportionalSigma(prior, 0.05);
  Raster normals = ConstantNormalRaster(16, 16, {0.0, 0.0, -1.0});
  Raster sigma_n = ConstantRaster(16, 16, 1, 0.05f);
  const NormalResidualModel model =
      PropagateNormalUncertainty(normals, sigma_n, cam, nullptr, {});

  const RefineDepthResult result =
      RefineDepth(prior, sigma_d, model, {}, nullptr, {});
  CHECK(result.final_cost == 0.0);
  CHECK(result.iterations == 0);
  for (int v = 0; v < 16; ++v) {
    for (int u = 0; u < 16; ++u) {
      CHECK(result.depth.at(u, v) == 2.0f);
    }
  }
}

namespace {

// The recurring noisy-plane refinement problem: smooth multiplicative bias on
// the prior, exact normals, exact anchors at deterministic pixels.
struct NoisyPlaneProblem {
  PlaneScene scene;
  Raster prior;
  Raster sigma_d;
  NormalResidualModel model;
  std::vector<DepthAnchor> anchors;
};

NoisyPlaneProblem MakeNoisyPlaneProblem() {
  NoisyPlaneProblem problem;
  problem.scene = MakePlaneScene();
  const int size = 32;
  problem.prior = Raster(size, size, 1);
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      const double bias =
          1.0 + 0.05 * std::sin(kPi * u / size) * std::cos(kPi * v / size);
      problem.prior.at(u, v) =
          static_cast<float>(problem.scene.Depth(u, v) * bias);
    }
  }
  problem.sigma_d = ProportionalSigma(problem.prior, 0.05);
  Raster normals = ConstantNormalRaster(size, size, problem.scene.normal);
  Raster sigma_n = ConstantRaster(size, size, 1, 0.08f);
  problem.model = PropagateNormalUncertainty(normals, sigma_n,
                                             problem.scene.intrinsics, nullptr,
                                             {});
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const int u = rng.UniformInt(0, size - 1);
    const int v = rng.UniformInt(0, size - 1);
    DepthAnchor anchor;
    anchor.pixel = {static_cast<double>(u), static_cast<double>(v)};
    anchor.target_depth = problem.scene.Depth(u, v);
    anchor.variance = 4e-4;
    problem.anchors.push_back(anchor);
  }
  return problem;
}

}  // namespace

TEST_CASE("refinement shrinks smooth depth bias using normals and anchors") {
  const NoisyPlaneProblem problem = MakeNoisyPlaneProblem();
  const auto truth = [&](int u, int v) { return problem.scene.Depth(u, v); };
  const double rmse_prior = DepthRmse(problem.prior, truth);

  const RefineDepthResult result = RefineDepth(
      problem.prior, problem.sigma_d, problem.model, problem.anchors, nullptr,
      {});
  const double rmse_refined = DepthRmse(result.depth, truth);
  CHECK(rmse_refined < 0.3 * rmse_prior);
  CHECK(result.final_cost > 0.0);
  CHECK(result.iterations >= 1);
}

TEST_CASE("refinement cost is non-increasing over accepted iterations") {
  // Truncating the deterministic solve after k outer iterations exposes the
  // internal iterate sequence; its costs must never go up.
  const NoisyPlaneProblem problem = MakeNoisyPlaneProblem();
  double previous = std::numeric_limits<double>::infinity();
  for (int cap : {1, 2, 3, 5, 8, 50}) {
    RefineDepthOptions options;
    options.max_outer_iterations = cap;
    const RefineDepthResult result = RefineDepth(
        problem.prior, problem.sigma_d, problem.model, problem.anchors,
        nullptr, options);
    CHECK(result.final_cost <= previous);
    previous = result.final_cost;
  }
}

TEST_CASE("refinement output scales with the scene scale") {
  // Scaling depths, depth uncertainties, anchor targets (and their variances
  // quadratically), and the anchor robust scale by the same factor must scale
  // the refined depth map by that factor.
  const NoisyPlaneProblem problem = MakeNoisyPlaneProblem();
  const double s = 2.0;

  Raster prior2(32, 32, 1);
  Raster sigma2(32, 32, 1);
  for (int v = 0; v < 32; ++v) {
    for (int u = 0; u < 32; ++u) {
      prior2.at(u, v) = static_cast<float>(s) * problem.prior.at(u, v);
      sigma2.at(u, v) = static_cast<float>(s) * problem.sigma_d.at(u, v);
    }
  }
  std::vector<DepthAnchor> anchors2 = problem.anchors;
  for (DepthAnchor& anchor : anchors2) {
    anchor.target_depth *= s;
    anchor.variance *= s * s;
  }
  RefineDepthOptions options2;
  options2.anchor_cauchy_scale *= s;

  const RefineDepthResult base = RefineDepth(
      problem.prior, problem.sigma_d, problem.model, problem.anchors, nullptr,
      {});
  const RefineDepthResult scaled = RefineDepth(
      prior2, sigma2, problem.model, anchors2, nullptr, options2);

  for (int v = 0; v < 32; ++v) {
    for (int u = 0; u < 32; ++u) {
      const double expected = s * base.depth.at(u, v);
      CHECK(std::abs(scaled.depth.at(u, v) - expected) <= 1e-6 * expected);
    }
  }
  CHECK(scaled.final_cost == doctest::Approx(base.final_cost).epsilon(1e-9));
}

TEST_CASE("refinement preserves a depth discontinuity between two planes") {
  // Fronto-parallel planes at depths 2 and 3 split at u = 16. The one-sided
  // residuals straddling the step are far beyond truncation and the bilateral
  // weights prefer the in-plane side, so the step must survive while the
  // smooth per-side bias is flattened out.
  const int size = 32;
  CameraIntrinsics cam{40.0, 40.0, 15.5, 15.5, size, size};
  const auto truth = [](int u, int) { return u < 16 ? 2.0 : 3.0; };
  Raster prior(size, size, 1);
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      const double bias =
          1.0 + 0.01 * std::sin(2.0 * kPi * u / 16.0) * std::cos(kPi * v / size);
      prior.at(u, v) = static_cast<float>(truth(u, v) * bias);
    }
  }
  const Raster sigma_d = ProportionalSigma(prior, 0.05);
  Raster normals = ConstantNormalRaster(size, size, {0.0, 0.0, -1.0});
  Raster sigma_n = ConstantRaster(size, size, 1, 0.05f);
  const NormalResidualModel model =
      PropagateNormalUncertainty(normals, sigma_n, cam, nullptr, {});
  std::vector<DepthAnchor> anchors;
  Rng rng(3);
  for (int i = 0; i < 6; ++i) {
    const int u_left = rng.UniformInt(0, 15);
    const int u_right = rng.UniformInt(16, 31);
    const int v_left = rng.UniformInt(0, 31);
    const int v_right = rng.UniformInt(0, 31);
    anchors.push_back({{static_cast<double>(u_left),
                        static_cast<double>(v_left)},
                       2.0,
                       4e-4});
    anchors.push_back({{static_cast<double>(u_right),
                        static_cast<double>(v_right)},
                       3.0,
                       4e-4});
  }

  const RefineDepthResult result =
      RefineDepth(prior, sigma_d, model, anchors, nullptr, {});

  const double step = 1.0;
  double sum_left = 0.0, sum_right = 0.0;
  double worst_edge = 0.0;
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      const double e = result.depth.at(u, v) - truth(u, v);
      if (u < 16) {
        sum_left += e * e;
      } else {
        sum_right += e * e;
      }
      if (u == 15 || u == 16) {
        worst_edge = std::max(worst_edge, std::abs(e));
      }
    }
  }
  const double rmse_left = std::sqrt(sum_left / (16.0 * size));
  const double rmse_right = std::sqrt(sum_right / (16.0 * size));
  CHECK(rmse_left < 0.01 * step);
  CHECK(rmse_right < 0.01 * step);
  CHECK(worst_edge < 0.02 * step);
}

TEST_CASE("a strong anchor pulls a loosely trusted prior toward its depth") {
  // No normals at all: only the prior and a single confident anchor act.
  Raster prior = ConstantRaster(9, 9, 1, 2.0f);
  Raster sigma_d = ConstantRaster(9, 9, 1, 2.0f);
  std::vector<DepthAnchor> anchors = {{{4.0, 4.0}, 3.0, 1e-4}};

  const RefineDepthResult result =
      RefineDepth(prior, sigma_d, NormalResidualModel{}, anchors, nullptr, {});
  CHECK(result.depth.at(4, 4) == doctest::Approx(3.0).epsilon(0.01));
  // Unconstrained far-away pixels stay at the prior.
  CHECK(result.depth.at(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("refinement starts from the explicit initialization when given") {
  // With the outer loop capped at zero iterations the result is the starting
  // point itself, which exposes whether the initialization override is used.
  const PlaneScene scene = MakePlaneScene();
  const Raster truth_raster = PlaneDepthRaster(scene);
  Raster prior(32, 32, 1);
  for (int v = 0; v < 32; ++v) {
    for (int u = 0; u < 32; ++u) {
      prior.at(u, v) = truth_raster.at(u, v) * 1.2f;
    }
  }
  const Raster sigma_d = ProportionalSigma(prior, 0.05);
  RefineDepthOptions frozen;
  frozen.max_outer_iterations = 0;

  const RefineDepthResult with_init = RefineDepth(
      prior, sigma_d, NormalResidualModel{}, {}, &truth_raster, frozen);
  const RefineDepthResult without_init =
      RefineDepth(prior, sigma_d, NormalResidualModel{}, {}, nullptr, frozen);
  for (int v = 0; v < 32; ++v) {
    for (int u = 0; u < 32; ++u) {
      CHECK(with_init.depth.at(u, v) == truth_raster.at(u, v));
      CHECK(without_init.depth.at(u, v) == prior.at(u, v));
    }
  }
}

TEST_CASE("refinement rejects mismatched raster shapes") {
  Raster prior = ConstantRaster(8, 8, 1, 2.0f);
  Raster sigma_wrong = ConstantRaster(9, 8, 1, 0.1f);
  CHECK_THROWS_AS(
      RefineDepth(prior, sigma_wrong, NormalResidualModel{}, {}, nullptr, {}),
      ShapeMismatchError);

  Raster sigma_d = ConstantRaster(8, 8, 1, 0.1f);
  CameraIntrinsics cam{40.0, 40.0, 3.5, 3.5, 9, 9};
  Raster normals = ConstantNormalRaster(9, 9, {0.0, 0.0, -1.0});
  Raster sigma_n = ConstantRaster(9, 9, 1, 0.05f);
  const NormalResidualModel model =
      PropagateNormalUncertainty(normals, sigma_n, cam, nullptr, {});
  CHECK_THROWS_AS(RefineDepth(prior, sigma_d, model, {}, nullptr, {}),
                  ShapeMismatchError);
}

TEST_CASE("refinement scheduling skips only small relative cost changes") {
  CHECK(ShouldSkipRefinement(0.0, 0.0));
  CHECK(ShouldSkipRefinement(100.0, 100.0));
  CHECK(ShouldSkipRefinement(100.0, 100.05));   // 5e-4 relative
  CHECK_FALSE(ShouldSkipRefinement(100.0, 110.0));
  CHECK_FALSE(ShouldSkipRefinement(1000.0, 1001.0));  // exactly the threshold
  CHECK_FALSE(ShouldSkipRefinement(0.0, 5.0));
}
