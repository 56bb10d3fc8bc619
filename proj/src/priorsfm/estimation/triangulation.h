#ifndef PRIORSFM_ESTIMATION_TRIANGULATION_H_
#define PRIORSFM_ESTIMATION_TRIANGULATION_H_

#include <vector>

#include <Eigen/Core>

#include "priorsfm/geometry/intrinsics.h"
#include "priorsfm/geometry/pose.h"

namespace priorsfm {

// One image observation of the point being triangulated.
struct TriangulationView {
  CameraIntrinsics intrinsics;
  PoseSE3 pose;
  Eigen::Vector2d pixel;
};

struct TriangulationResult {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  // Maximum pairwise angle (degrees) between the rays from the camera centers
  // to the refined point.
  double max_parallax_deg = 0.0;
  // Parallax below the caller's threshold. The point is still returned; the
  // caller decides whether to lift from depth instead.
  bool low_parallax = false;
  // Refined point has non-positive depth in at least one view, or the linear
  // system was unsolvable.
  bool behind_camera = false;
};

// Multi-view triangulation: pixel-space DLT followed by Gauss-Newton
// refinement of the total squared reprojection error.
TriangulationResult Triangulate(const std::vector<TriangulationView>& views,
                                double min_parallax_deg);

// Linear two-view triangulation in unit-depth camera coordinates with poses
// P_a = [I|0] and P_b = [R|t]. Used for cheirality scoring during essential
// matrix decomposition; returns false if the system is degenerate.
bool TriangulateNormalized(const PoseSE3& pose_ba, const Eigen::Vector2d& xa,
                           const Eigen::Vector2d& xb, Eigen::Vector3d* point);

}  // namespace priorsfm

#endif  // PRIORSFM_ESTIMATION_TRIANGULATION_H_
