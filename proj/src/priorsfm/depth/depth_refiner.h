#ifndef PRIORSFM_DEPTH_DEPTH_REFINER_H_
#define PRIORSFM_DEPTH_DEPTH_REFINER_H_

#include <vector>

#include <Eigen/Core>

#include "priorsfm/depth/uncertainty.h"
#include "priorsfm/geometry/raster.h"

namespace priorsfm {

// Sparse depth constraint from a scene point observed in this image: when the
// refined map is sampled at `pixel`, its depth should match `target_depth`.
struct DepthAnchor {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double target_depth = 0.0;  // > 0
  double variance = 0.0;      // > 0
};

struct RefineDepthOptions {
  // Truncation of the whitened prior term, in standard deviations.
  double prior_truncation_sigma = 5.0;
  // Truncation of the whitened normal-integration terms, in standard
  // deviations.
  double integration_truncation_sigma = 5.0;
  // Cauchy scale of the anchor term, scene units.
  double anchor_cauchy_scale = 0.05;
  // Sharpness of the bilateral one-sided weighting.
  double bilateral_k = 2.0;
  int max_outer_iterations = 50;
  // Outer loop stops when the relative cost change drops below this.
  double relative_cost_tolerance = 1e-5;
  // Inner conjugate-gradient relative tolerance; warm-started.
  double cg_tolerance = 1e-8;
  int cg_max_iterations = 4000;
};

struct RefineDepthResult {
  Raster depth;
  double final_cost = 0.0;
  int iterations = 0;
};

// Refines a depth map against three signals: the (scaled) prior depth with
// per-pixel uncertainty, the surface-normal integration residuals, and sparse
// scene-point depth anchors. Internally optimizes the inverse depth, on which
// the integration residuals are linear and vanish exactly on planar surfaces;
// prior and anchor terms are relinearized every outer iteration. An iterate
// is accepted only if it strictly decreases the robust objective, so the
// reported cost sequence is non-increasing. `init` optionally overrides the
// prior as the starting point. Throws SolverFailure via SolverError when the
// initial cost is not finite.
RefineDepthResult RefineDepth(const Raster& depth_prior,
                              const Raster& sigma_depth,
                              const NormalResidualModel& normal_model,
                              const std::vector<DepthAnchor>& anchors,
                              const Raster* init,
                              const RefineDepthOptions& options);

// Whether a scheduled refinement can be skipped because the total cost moved
// less than `threshold` (relatively) since the previous call. Exactly equal
// costs are always skippable; a change landing exactly on the threshold runs.
bool ShouldSkipRefinement(double previous_cost, double current_cost,
                          double threshold = 1e-3);

}  // namespace priorsfm

#endif  // PRIORSFM_DEPTH_DEPTH_REFINER_H_
