#include "priorsfm/depth/uncertainty.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "priorsfm/util/errors.h"
#include "priorsfm/util/stats.h"

namespace priorsfm {

namespace {

void CheckSameShape(const Raster& a, const Raster& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ShapeMismatchError(std::string(what) + ": raster sizes disagree");
  }
}

// Spherical angles of a unit normal: n = (sinθcosφ, sinθsinφ, cosθ).
void SphericalFromNormal(const Eigen::Vector3d& n, double* theta, double* phi) {
  *theta = std::acos(std::clamp(n.z(), -1.0, 1.0));
  *phi = std::atan2(n.y(), n.x());  // 0 at the poles by atan2(0,0) convention
}

Eigen::Vector3d NormalFromSpherical(double theta, double phi) {
  const double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

double WrapAngle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

}  // namespace

Raster CalibrateDepthUncertainty(const Raster& depth, const Raster& sigma_raw,
                                 const UncertaintyCalibrationOptions& options) {
  CheckSameShape(depth, sigma_raw, "calibrate depth uncertainty");
  Raster out(depth.width(), depth.height(), 1);
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (!depth.IsValid(u, v) || !sigma_raw.IsValid(u, v)) {
        continue;
      }
      const double scaled = options.scale * sigma_raw.at(u, v);
      const double proportional = options.depth_fraction * depth.at(u, v);
      out.at(u, v) = static_cast<float>(
          std::max({scaled, options.floor_abs, proportional}));
    }
  }
  return out;
}

NormalResidualModel PropagateNormalUncertainty(
    const Raster& normals, const Raster& sigma_angular,
    const CameraIntrinsics& intrinsics, const Raster* depth_gradient,
    const NormalPropagationOptions& options) {
  CheckSameShape(normals, sigma_angular, "propagate normal uncertainty");
  if (depth_gradient != nullptr) {
    CheckSameShape(normals, *depth_gradient, "propagate normal uncertainty");
  }
  const int w = normals.width();
  const int h = normals.height();
  NormalResidualModel model;
  model.n_tilde = Raster(w, h, 2);
  model.n_xy = Raster(w, h, 2);
  model.variance_u = Raster(w, h, 2);
  model.variance_v = Raster(w, h, 2);

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!normals.IsValid(u, v) || !sigma_angular.IsValid(u, v)) {
        continue;
      }
      const Eigen::Vector3d n(normals.at(u, v, 0), normals.at(u, v, 1),
                              normals.at(u, v, 2));
      const double du_px = u - intrinsics.cx;
      const double dv_px = v - intrinsics.cy;
      const double n_tilde_x =
          n.x() * du_px + n.y() * dv_px + n.z() * intrinsics.fx;
      const double n_tilde_y =
          n.x() * du_px + n.y() * dv_px + n.z() * intrinsics.fy;
      model.n_tilde.at(u, v, 0) = static_cast<float>(n_tilde_x);
      model.n_tilde.at(u, v, 1) = static_cast<float>(n_tilde_y);
      model.n_xy.at(u, v, 0) = static_cast<float>(n.x());
      model.n_xy.at(u, v, 1) = static_cast<float>(n.y());

      const double sigma = sigma_angular.at(u, v);
      const double sigma2 = sigma * sigma;

      double theta, phi;
      SphericalFromNormal(n, &theta, &phi);
      Eigen::Matrix3d cov_xyz;
      if (std::sin(theta) < options.pole_threshold) {
        // Azimuth is unconstrained at the poles; treat the angular noise as
        // isotropic in Cartesian space instead.
        cov_xyz = sigma2 * Eigen::Matrix3d::Identity();
      } else {
        Eigen::Matrix<double, 3, 2> j_xyz;
        j_xyz << std::cos(theta) * std::cos(phi), -std::sin(theta) * std::sin(phi),
            std::cos(theta) * std::sin(phi), std::sin(theta) * std::cos(phi),
            -std::sin(theta), 0.0;
        cov_xyz = j_xyz * sigma2 * j_xyz.transpose();
      }

      // Log-depth image gradients: supplied, or approximated from the normal
      // itself (the gradient a surface with this normal would have here).
      double grad_u, grad_v;
      if (depth_gradient != nullptr && depth_gradient->IsValid(u, v)) {
        grad_u = depth_gradient->at(u, v, 0);
        grad_v = depth_gradient->at(u, v, 1);
      } else {
        grad_u = -n.x() / n_tilde_x;
        grad_v = -n.y() / n_tilde_y;
        if (!std::isfinite(grad_u)) grad_u = 0.0;
        if (!std::isfinite(grad_v)) grad_v = 0.0;
      }

      const Eigen::RowVector3d j_u(du_px * grad_u + 1.0, dv_px * grad_u,
                                   grad_u * intrinsics.fx);
      const Eigen::RowVector3d j_v(du_px * grad_v, dv_px * grad_v + 1.0,
                                   grad_v * intrinsics.fy);
      const double var_u = std::max(options.variance_floor,
                                    (j_u * cov_xyz * j_u.transpose())(0, 0));
      const double var_v = std::max(options.variance_floor,
                                    (j_v * cov_xyz * j_v.transpose())(0, 0));
      model.variance_u.at(u, v, 0) = static_cast<float>(var_u);
      model.variance_u.at(u, v, 1) = static_cast<float>(var_u);
      model.variance_v.at(u, v, 0) = static_cast<float>(var_v);
      model.variance_v.at(u, v, 1) = static_cast<float>(var_v);
    }
  }
  return model;
}

Raster FlipConsistencyCovariance(const Raster& normals,
                                 const Raster& normals_unflipped,
                                 const Raster& sigma_model) {
  CheckSameShape(normals, normals_unflipped, "flip consistency");
  CheckSameShape(normals, sigma_model, "flip consistency");
  const int w = normals.width();
  const int h = normals.height();
  Raster out(w, h, 1);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const bool have_model = sigma_model.IsValid(u, v);
      const bool have_both =
          normals.IsValid(u, v) && normals_unflipped.IsValid(u, v);
      if (!have_both) {
        if (have_model) {
          out.at(u, v) = sigma_model.at(u, v);
        }
        continue;
      }
      const Eigen::Vector3d n1(normals.at(u, v, 0), normals.at(u, v, 1),
                               normals.at(u, v, 2));
      const Eigen::Vector3d n2(normals_unflipped.at(u, v, 0),
                               normals_unflipped.at(u, v, 1),
                               normals_unflipped.at(u, v, 2));
      double theta1, phi1, theta2, phi2;
      SphericalFromNormal(n1, &theta1, &phi1);
      SphericalFromNormal(n2, &theta2, &phi2);

      // Mean in spherical coordinates; azimuth averaged circularly so the
      // ±pi seam does not inflate the deviation.
      const double theta_mean = 0.5 * (theta1 + theta2);
      const double phi_mean =
          std::atan2(0.5 * (std::sin(phi1) + std::sin(phi2)),
                     0.5 * (std::cos(phi1) + std::cos(phi2)));
      const double d1_theta = theta1 - theta_mean;
      const double d2_theta = theta2 - theta_mean;
      const double d1_phi = WrapAngle(phi1 - phi_mean);
      const double d2_phi = WrapAngle(phi2 - phi_mean);

      Eigen::Matrix2d cov;
      cov(0, 0) = d1_theta * d1_theta + d2_theta * d2_theta;
      cov(0, 1) = d1_theta * d1_phi + d2_theta * d2_phi;
      cov(1, 0) = cov(0, 1);
      cov(1, 1) = d1_phi * d1_phi + d2_phi * d2_phi;

      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
      double flip_sigma = std::sqrt(std::max(0.0, eig.eigenvalues()(1)));
      if (!std::isfinite(flip_sigma)) {
        flip_sigma = 0.0;
      }
      const double model_sigma = have_model ? sigma_model.at(u, v) : 0.0;
      out.at(u, v) = static_cast<float>(std::max(model_sigma, flip_sigma));
    }
  }
  return out;
}

}  // namespace priorsfm
