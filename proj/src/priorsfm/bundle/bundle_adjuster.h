#ifndef PRIORSFM_BUNDLE_BUNDLE_ADJUSTER_H_
#define PRIORSFM_BUNDLE_BUNDLE_ADJUSTER_H_

#include <vector>

#include <Eigen/Core>

#include "priorsfm/geometry/intrinsics.h"
#include "priorsfm/geometry/pose.h"

namespace priorsfm {

struct BundleCamera {
  CameraIntrinsics intrinsics;
  PoseSE3 pose;
  // Fully fixed cameras hold the gauge (and, in local adjustments, the
  // surrounding reconstruction). A fixed camera's pose is never written.
  bool fixed = false;
  // Pins a single translation component (0/1/2, -1 for none) of an otherwise
  // free camera. Removes the scale gauge freedom when no depth constraints
  // are present to anchor it.
  int fixed_translation_axis = -1;
};

struct BundleObservation {
  int camera = 0;
  int point = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double sigma_px = 1.0;
};

// Depth regularizer row: the camera-frame depth of the point should match
// the depth sampled from the (fixed) refined map at the observed keypoint.
struct BundleDepthConstraint {
  int camera = 0;
  int point = 0;
  double measured_depth = 0.0;
  double sigma = 1.0;  // frozen for the whole solve
};

// Joint pose/point adjustment problem. Points are variable; cameras are
// variable unless flagged fixed. Valid problems have at least one fixed
// camera, every index in range, and every point referenced by at least one
// observation or depth constraint.
struct BundleProblem {
  std::vector<BundleCamera> cameras;
  std::vector<Eigen::Vector3d> points;
  std::vector<BundleObservation> observations;
  std::vector<BundleDepthConstraint> depth_constraints;
};

struct BundleOptions {
  // Reprojection loss, stated in raw pixels: quadratic to `transition`,
  // linear beyond, constant past sqrt(max_squared). Residuals are whitened
  // per observation, so the thresholds hold in pixel units for every sigma.
  double reproj_transition_px = 2.0;
  double reproj_max_squared_px = 16.0;
  // Cauchy scale of the depth rows, scene units.
  double depth_cauchy_scale = 0.05;
  // Multiplier on the depth rows; exactly 0 removes them from cost and
  // normal equations entirely, leaving a plain reprojection-only bundle.
  double depth_term_weight = 1.0;
  int max_iterations = 100;
  // An accepted step with a smaller relative decrease ends the solve.
  double relative_decrease_tolerance = 1e-6;
  // Infinity norm of the gradient below which the iterate counts as
  // stationary.
  double gradient_tolerance = 1e-12;
  double initial_lambda = 1e-4;
  double max_lambda = 1e10;
};

struct BundleReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  // Linearization rounds executed (0 when the start is already optimal).
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  // Initial cost followed by the cost after every accepted step; strictly
  // decreasing by construction.
  std::vector<double> accepted_costs;
};

// Robust cost of the problem at its current parameters: truncated smooth-L1
// on whitened reprojection errors plus Cauchy on whitened depth residuals.
// An observation behind its camera contributes the truncation plateau.
double EvaluateBundleCost(const BundleProblem& problem,
                          const BundleOptions& options);

// Levenberg-Marquardt minimization over the non-fixed poses and all points,
// writing the refined parameters back into the problem. Steps are accepted
// only on strict cost decrease. Fixed poses are returned bit-identical.
// Throws ValidationError / OutOfBoundsError for malformed problems and
// SolverError when the initial cost is not finite.
BundleReport SolveBundle(BundleProblem* problem, const BundleOptions& options);

}  // namespace priorsfm

#endif  // PRIORSFM_BUNDLE_BUNDLE_ADJUSTER_H_
