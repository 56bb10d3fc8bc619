#ifndef PRIORSFM_CONSISTENCY_CONSISTENCY_CHECK_H_
#define PRIORSFM_CONSISTENCY_CONSISTENCY_CHECK_H_

#include <vector>

#include "priorsfm/geometry/intrinsics.h"
#include "priorsfm/geometry/pose.h"
#include "priorsfm/geometry/raster.h"
#include "priorsfm/scene/reconstruction.h"

namespace priorsfm {

// One view's depth map splatted into another view's image plane. Each valid
// source pixel is lifted, rigidly transformed, and written onto the 3x3
// neighborhood of its nearest target pixel; every target pixel keeps the
// smallest depth it received and the standard deviation that came with it.
// Pixels nothing landed on stay NaN.
struct DepthBuffer {
  Raster depth;
  Raster sigma;
  int covered_pixels = 0;

  bool Covered(int u, int v) const { return depth.IsValid(u, v); }
};

// Splats source's depth map into the target view. Source pixels are used only
// where both depth and sigma are valid and positive; samples landing behind
// the target camera are dropped. The sigma of a sample rides along unchanged
// (a rigid transform does not alter depth uncertainty magnitude). An empty
// buffer (no coverage) is a legal outcome. Throws ShapeMismatch when a raster
// disagrees with its camera's width/height.
DepthBuffer ReprojectDepth(const CameraIntrinsics& source_intrinsics,
                           const PoseSE3& source_pose,
                           const Raster& source_depth,
                           const Raster& source_sigma,
                           const CameraIntrinsics& target_intrinsics,
                           const PoseSE3& target_pose);

// Symmetric free-space violation ratio in [0, 2]:
//
//   beta = mean over a's pixels of 1[(D_a - D_{a<-b}) > gamma * (S_a + S_{a<-b})]
//        + mean over b's pixels of the mirrored term,
//
// where D_{a<-b} is the min-depth buffer of b splatted into a and S are
// standard deviations. The test is one-sided: only a reprojected surface
// landing strictly in front of the stored one counts (the other view claims
// geometry inside this view's observed free space); a buffer sample behind
// the stored surface is ordinary occlusion and is ignored. Each mean is
// normalized by the full image area, so uncovered pixels dilute the ratio
// rather than dropping out. Throws ValidationError for gamma <= 0 and
// ShapeMismatch for disagreeing raster sizes.
double InconsistencyRatio(const Raster& depth_a, const Raster& sigma_a,
                          const DepthBuffer& buffer_a, const Raster& depth_b,
                          const Raster& sigma_b, const DepthBuffer& buffer_b,
                          double gamma);

// Per-pixel label raster for one direction of the comparison: 0 = consistent,
// 1 = inconsistent (free-space violation), 2 = occluded (buffer behind the
// stored surface). Pixels with no stored depth, no sigma, or no buffer
// coverage are invalid.
Raster ConsistencyDiagnostic(const Raster& depth, const Raster& sigma,
                             const DepthBuffer& buffer, double gamma);

struct ConsistencyOptions {
  // Violation threshold in combined standard deviations.
  double gamma = 3.0;
  // Largest tolerated inconsistency ratio before a view is rejected.
  double max_inconsistency = 0.25;
};

struct PartnerInconsistency {
  int view_id = -1;
  double beta = 0.0;
};

struct ViewCheckReport {
  bool accepted = true;
  // Every overlapping registered view, with its ratio, in ascending id order.
  std::vector<PartnerInconsistency> partners;
  // The subset whose ratio exceeds the cap.
  std::vector<PartnerInconsistency> conflicts;
};

// Verifies one registered view against every registered view it shares alive
// scene points with, using the views' active depth maps and prior sigmas.
// The view is accepted when no partner's inconsistency ratio exceeds the cap;
// a view with no overlapping partners is vacuously accepted. Throws
// ValidationError when the view (or a partner) is unknown, unregistered, or
// lacks depth/sigma rasters.
ViewCheckReport CheckView(const Reconstruction& scene, int view_id,
                          const ConsistencyOptions& options);

}  // namespace priorsfm

#endif  // PRIORSFM_CONSISTENCY_CONSISTENCY_CHECK_H_
