#include "priorsfm/consistency/consistency_check.h"

#include <cmath>
#include <string>

#include "priorsfm/geometry/projection.h"
#include "priorsfm/util/errors.h"

namespace priorsfm {

namespace {

void RequireShape(const Raster& raster, int width, int height,
                  const std::string& what) {
  if (raster.empty() || raster.width() != width || raster.height() != height) {
    throw ShapeMismatchError(what + " raster is " +
                             std::to_string(raster.width()) + "x" +
                             std::to_string(raster.height()) + ", expected " +
                             std::to_string(width) + "x" +
                             std::to_string(height));
  }
}

// Valid, strictly positive sample or nothing.
bool PositiveSample(const Raster& raster, int u, int v, double* value) {
  if (!raster.IsValid(u, v)) return false;
  const double x = raster.at(u, v);
  if (!(x > 0.0)) return false;
  *value = x;
  return true;
}

// One direction of the violation count: a's stored surface against the
// buffer splatted into a.
long CountViolations(const Raster& depth, const Raster& sigma,
                     const DepthBuffer& buffer, double gamma) {
  long violations = 0;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      double stored = 0.0;
      double sigma_stored = 0.0;
      double reprojected = 0.0;
      double sigma_reprojected = 0.0;
      if (!PositiveSample(depth, u, v, &stored)) continue;
      if (!PositiveSample(sigma, u, v, &sigma_stored)) continue;
      if (!PositiveSample(buffer.depth, u, v, &reprojected)) continue;
      if (!PositiveSample(buffer.sigma, u, v, &sigma_reprojected)) continue;
      if (stored - reprojected > gamma * (sigma_stored + sigma_reprojected)) {
        ++violations;
      }
    }
  }
  return violations;
}

}  // namespace

DepthBuffer ReprojectDepth(const CameraIntrinsics& source_intrinsics,
                           const PoseSE3& source_pose,
                           const Raster& source_depth,
                           const Raster& source_sigma,
                           const CameraIntrinsics& target_intrinsics,
                           const PoseSE3& target_pose) {
  RequireShape(source_depth, source_intrinsics.width, source_intrinsics.height,
               "source depth");
  RequireShape(source_sigma, source_intrinsics.width, source_intrinsics.height,
               "source sigma");

  DepthBuffer buffer;
  buffer.depth =
      Raster(target_intrinsics.width, target_intrinsics.height, 1);
  buffer.sigma =
      Raster(target_intrinsics.width, target_intrinsics.height, 1);

  for (int v = 0; v < source_depth.height(); ++v) {
    for (int u = 0; u < source_depth.width(); ++u) {
      double depth = 0.0;
      double sigma = 0.0;
      if (!PositiveSample(source_depth, u, v, &depth)) continue;
      if (!PositiveSample(source_sigma, u, v, &sigma)) continue;
      const Eigen::Vector3d in_target = target_pose.Apply(
          Lift(source_intrinsics, source_pose, Eigen::Vector2d(u, v), depth));
      if (!(in_target.z() > 0.0)) continue;
      const Eigen::Vector2d pixel =
          target_intrinsics.PixelFromCamera(in_target);
      const int cu = static_cast<int>(std::lround(pixel.x()));
      const int cv = static_cast<int>(std::lround(pixel.y()));
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          const int qu = cu + du;
          const int qv = cv + dv;
          if (qu < 0 || qu >= target_intrinsics.width || qv < 0 ||
              qv >= target_intrinsics.height) {
            continue;
          }
          if (!buffer.depth.IsValid(qu, qv) ||
              in_target.z() < buffer.depth.at(qu, qv)) {
            buffer.depth.at(qu, qv) = static_cast<float>(in_target.z());
            buffer.sigma.at(qu, qv) = static_cast<float>(sigma);
          }
        }
      }
    }
  }
  buffer.covered_pixels = static_cast<int>(buffer.depth.NumValid());
  return buffer;
}

double InconsistencyRatio(const Raster& depth_a, const Raster& sigma_a,
                          const DepthBuffer& buffer_a, const Raster& depth_b,
                          const Raster& sigma_b, const DepthBuffer& buffer_b,
                          double gamma) {
  if (!(gamma > 0.0)) {
    throw ValidationError("inconsistency gamma must be positive");
  }
  RequireShape(sigma_a, depth_a.width(), depth_a.height(), "view a sigma");
  RequireShape(buffer_a.depth, depth_a.width(), depth_a.height(),
               "view a buffer");
  RequireShape(sigma_b, depth_b.width(), depth_b.height(), "view b sigma");
  RequireShape(buffer_b.depth, depth_b.width(), depth_b.height(),
               "view b buffer");

  const double area_a =
      static_cast<double>(depth_a.width()) * depth_a.height();
  const double area_b =
      static_cast<double>(depth_b.width()) * depth_b.height();
  return CountViolations(depth_a, sigma_a, buffer_a, gamma) / area_a +
         CountViolations(depth_b, sigma_b, buffer_b, gamma) / area_b;
}

Raster ConsistencyDiagnostic(const Raster& depth, const Raster& sigma,
                             const DepthBuffer& buffer, double gamma) {
  if (!(gamma > 0.0)) {
    throw ValidationError("inconsistency gamma must be positive");
  }
  RequireShape(sigma, depth.width(), depth.height(), "sigma");
  RequireShape(buffer.depth, depth.width(), depth.height(), "buffer");

  Raster labels(depth.width(), depth.height(), 1);
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      double stored = 0.0;
      double sigma_stored = 0.0;
      double reprojected = 0.0;
      double sigma_reprojected = 0.0;
      if (!PositiveSample(depth, u, v, &stored)) continue;
      if (!PositiveSample(sigma, u, v, &sigma_stored)) continue;
      if (!PositiveSample(buffer.depth, u, v, &reprojected)) continue;
      if (!PositiveSample(buffer.sigma, u, v, &sigma_reprojected)) continue;
      const double margin = gamma * (sigma_stored + sigma_reprojected);
      float label = 0.0f;
      if (stored - reprojected > margin) {
        label = 1.0f;
      } else if (reprojected - stored > margin) {
        label = 2.0f;
      }
      labels.at(u, v) = label;
    }
  }
  return labels;
}

namespace {

const ImageState& CheckedView(const Reconstruction& scene, int view_id) {
  const auto it = scene.images.find(view_id);
  if (it == scene.images.end() || !it->second.registered) {
    throw ValidationError("consistency check on unregistered view " +
                          std::to_string(view_id));
  }
  const ImageState& view = it->second;
  if (view.ActiveDepth().empty() || view.prior_sigma.empty()) {
    throw ValidationError("view " + std::to_string(view_id) +
                          " has no depth or sigma raster to verify");
  }
  return view;
}

}  // namespace

ViewCheckReport CheckView(const Reconstruction& scene, int view_id,
                          const ConsistencyOptions& options) {
  const ImageState& view = CheckedView(scene, view_id);

  ViewCheckReport report;
  for (const auto& [partner_id, partner_state] : scene.images) {
    if (partner_id == view_id || !partner_state.registered) continue;
    if (SharedAlivePointCount(scene, view_id, partner_id) == 0) continue;
    const ImageState& partner = CheckedView(scene, partner_id);

    const DepthBuffer into_partner = ReprojectDepth(
        view.intrinsics, view.pose, view.ActiveDepth(), view.prior_sigma,
        partner.intrinsics, partner.pose);
    const DepthBuffer into_view = ReprojectDepth(
        partner.intrinsics, partner.pose, partner.ActiveDepth(),
        partner.prior_sigma, view.intrinsics, view.pose);
    const double beta = InconsistencyRatio(
        partner.ActiveDepth(), partner.prior_sigma, into_partner,
        view.ActiveDepth(), view.prior_sigma, into_view, options.gamma);
    report.partners.push_back({partner_id, beta});
    if (beta > options.max_inconsistency) {
      report.conflicts.push_back({partner_id, beta});
    }
  }
  report.accepted = report.conflicts.empty();
  return report;
}

}  // namespace priorsfm
