#ifndef PRIORSFM_SCENE_RECONSTRUCTION_H_
#define PRIORSFM_SCENE_RECONSTRUCTION_H_

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "priorsfm/depth/uncertainty.h"
#include "priorsfm/geometry/intrinsics.h"
#include "priorsfm/geometry/pose.h"
#include "priorsfm/geometry/raster.h"

namespace priorsfm {

// Detected feature with its localization uncertainty (isotropic, pixels).
struct Keypoint {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double sigma_px = 1.0;
};

// One keypoint backing a scene point.
struct Observation {
  int image_id = 0;
  int keypoint_idx = 0;
};

// How a point entered the scene: multi-view triangulation, or lifting a
// single keypoint along its prior depth.
enum class PointProvenance { kTriangulated, kLifted };

struct ScenePoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::vector<Observation> track;
  PointProvenance provenance = PointProvenance::kTriangulated;
  bool alive = true;
};

// Everything the pipeline tracks per image. The prior rasters are stored
// already scaled to scene units (depth and sigma by the same median factor);
// the refined map, once produced, supersedes the prior wherever downstream
// consumers sample depth.
struct ImageState {
  CameraIntrinsics intrinsics;
  PoseSE3 pose;  // world -> camera; meaningful only while registered
  bool registered = false;
  std::vector<Keypoint> keypoints;
  double depth_scale = 1.0;
  Raster prior_depth;
  Raster prior_sigma;
  NormalResidualModel normal_model;
  Raster refined_depth;
  double refine_cost = -1.0;  // < 0 until the first refinement
  int registration_inliers = 0;

  bool HasDepthPrior() const { return !prior_depth.empty(); }

  // Refined map when available, scaled prior otherwise.
  const Raster& ActiveDepth() const {
    return refined_depth.empty() ? prior_depth : refined_depth;
  }
};

// The mutable scene state: images, points, and the keypoint-to-point index
// that keeps tracks consistent. A keypoint belongs to at most one alive
// point, and a point observes an image at most once; the mutators enforce
// both and throw ValidationError on violations.
class Reconstruction {
 public:
  std::map<int, ImageState> images;
  std::vector<int> registration_order;

  // Adds a point and indexes its track. Returns the point id.
  int AddPoint(ScenePoint point);

  // Extends an existing point's track by one observation.
  void AddObservation(int point_id, const Observation& obs);

  // Drops the given image's observation from a point's track. A point whose
  // track empties is retired.
  void RemoveObservation(int point_id, int image_id);

  // Retires a point: unindexes its track and marks it dead.
  void KillPoint(int point_id);

  // Point id currently holding this keypoint, or -1.
  int PointIdOf(int image_id, int keypoint_idx) const;

  const std::vector<ScenePoint>& points() const { return points_; }
  const ScenePoint& point(int id) const { return points_[id]; }
  ScenePoint& point(int id) { return points_[id]; }

  int NumRegistered() const;
  int NumAlivePoints() const;
  std::vector<int> RegisteredIds() const;

 private:
  std::vector<ScenePoint> points_;
  std::map<std::pair<int, int>, int> keypoint_to_point_;
};

// Depth sampled by harmonically blending the four bilinear neighbors: the
// inverse depths are averaged with the bilinear weights and inverted back.
// Exact on any raster whose inverse depth is affine in (u, v) -- slanted
// planes under a pinhole camera -- and the sampling counterpart of the
// inverse-depth parametrization used by depth refinement. Returns nullopt
// outside the raster or when any footprint cell is invalid or non-positive.
std::optional<double> InterpolateInverseDepth(const Raster& depth,
                                              const Eigen::Vector2d& px);

// Number of alive points whose track covers both images.
int SharedAlivePointCount(const Reconstruction& scene, int image_a,
                          int image_b);

}  // namespace priorsfm

#endif  // PRIORSFM_SCENE_RECONSTRUCTION_H_
