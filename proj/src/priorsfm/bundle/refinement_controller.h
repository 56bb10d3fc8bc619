#ifndef PRIORSFM_BUNDLE_REFINEMENT_CONTROLLER_H_
#define PRIORSFM_BUNDLE_REFINEMENT_CONTROLLER_H_

#include <vector>

#include <Eigen/Core>

#include "priorsfm/bundle/bundle_adjuster.h"
#include "priorsfm/depth/depth_refiner.h"
#include "priorsfm/scene/reconstruction.h"

namespace priorsfm {

// Which variance feeds the depth-coupling weights: the prior map's sigma at
// the keypoint plus the propagated point-depth variance (default), or the
// prior sigma alone.
enum class AnchorWeightMode { kCombined, kPriorOnly };

// Gauss-Newton position covariance of one point under its current track:
// inverse of the whitened information from reprojection rows plus, where the
// prior map supplies a variance at the keypoint, depth rows. Falls back to
// 1e6 * I for under-constrained points.
Eigen::Matrix3d PointPositionCovariance(const Reconstruction& scene,
                                        int point_id);

struct FilterOptions {
  double max_reproj_px = 4.0;
  double min_tri_angle_deg = 1.5;
};

struct FilterReport {
  int removed_observations = 0;
  int removed_points = 0;
};

// Structure filtering: drops observations that fail cheirality or reproject
// beyond max_reproj_px; retires points left with one observation and no
// depth anchor; retires multi-view points whose maximum pairwise
// triangulation angle stays below min_tri_angle_deg, unless a depth anchor
// constrains them (lifted and regularized points survive on the prior).
FilterReport FilterPoints(Reconstruction* scene, const FilterOptions& options);

enum class RefinementMode { kLocal, kGlobal };

struct RefinementSchedule {
  RefinementMode mode = RefinementMode::kGlobal;
  // Images whose depths are refined and whose poses stay variable in the
  // bundle; newest first for local schedules, all registered for global.
  std::vector<int> window_images;
  int rounds = 2;
};

// Counts captured at the last global refinement; zeros force a global.
struct ScheduleTrigger {
  int registered_at_last_global = 0;
  int points_at_last_global = 0;
};

struct ScheduleOptions {
  int local_window_size = 5;
  double global_growth_ratio = 1.1;
  int rounds = 2;
};

// Global when the registered-image or alive-point count grew by the growth
// ratio since the last global refinement, or while everything still fits in
// the local window; otherwise local over the newest image plus the most
// point-connected other registered images (ties by ascending id).
RefinementSchedule PlanRefinement(const Reconstruction& scene,
                                  const ScheduleTrigger& trigger,
                                  const ScheduleOptions& options);

struct AlternationOptions {
  RefineDepthOptions refine;
  BundleOptions bundle;
  FilterOptions filter;
  AnchorWeightMode anchor_weight_mode = AnchorWeightMode::kCombined;
  // A scope image whose refinement objective moved relatively less than this
  // since its last refinement keeps its map.
  double skip_threshold = 1e-3;
  // Ablations: disable the depth-refinement phase, or cut the depth-coupling
  // terms out of both phases.
  bool refine_depths = true;
  bool depth_regularization = true;
};

struct AlternationReport {
  // Joint objective over the residual blocks frozen at entry: the entry
  // value, then one value per completed round.
  std::vector<double> objective_trace;
  int images_refined = 0;
  int images_skipped = 0;
  int removed_observations = 0;
  int removed_points = 0;
  std::vector<BundleReport> bundle_reports;
};

// Block coordinate descent on the joint objective. Each round first refines
// the scope images' depth maps toward the current scene-point depths, then
// adjusts the scope poses and the points they observe against the refreshed
// maps, then filters structure. The depth-coupling variances are frozen at
// entry, so both phases descend the same objective and the reported trace is
// non-increasing (up to roundoff) while no structure is filtered. Throws
// ValidationError for fewer than two registered images or a scope listing an
// unregistered image.
AlternationReport AlternateRefinement(Reconstruction* scene,
                                      const RefinementSchedule& schedule,
                                      const AlternationOptions& options);

}  // namespace priorsfm

#endif  // PRIORSFM_BUNDLE_REFINEMENT_CONTROLLER_H_
