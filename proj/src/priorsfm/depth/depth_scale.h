#ifndef PRIORSFM_DEPTH_DEPTH_SCALE_H_
#define PRIORSFM_DEPTH_DEPTH_SCALE_H_

#include <vector>

#include <Eigen/Core>

#include "priorsfm/geometry/raster.h"

namespace priorsfm {

// One keypoint whose scene point has a known depth in this camera.
struct DepthScaleObservation {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  // Depth of the triangulated/lifted scene point along this camera's axis.
  double scene_depth = 0.0;
};

// Robust scale aligning a monocular depth map with the current scene: the
// median over observations of scene_depth / interpolated prior depth.
// Observations landing outside the raster, on invalid pixels, or on
// non-positive depths are skipped; throws NoValidObservations when none
// survive. The caller multiplies the depth map (and any absolute uncertainty
// contributions) by the result.
double ScaleDepth(const Raster& depth,
                  const std::vector<DepthScaleObservation>& observations);

}  // namespace priorsfm

#endif  // PRIORSFM_DEPTH_DEPTH_SCALE_H_
