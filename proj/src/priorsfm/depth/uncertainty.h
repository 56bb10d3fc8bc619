#ifndef PRIORSFM_DEPTH_UNCERTAINTY_H_
#define PRIORSFM_DEPTH_UNCERTAINTY_H_

#include "priorsfm/geometry/intrinsics.h"
#include "priorsfm/geometry/raster.h"

namespace priorsfm {

struct UncertaintyCalibrationOptions {
  // Multiplier applied to the predicted standard deviations.
  double scale = 1.0;
  // Absolute lower bound on the calibrated standard deviation, scene units.
  double floor_abs = 0.02;
  // Depth-proportional uncertainty coefficient.
  double depth_fraction = 0.05;
};

// Per-pixel calibrated depth uncertainty:
//   sigma = max(scale * sigma_raw, floor_abs, depth_fraction * depth).
// Pixels invalid in either input stay invalid. Throws ShapeMismatch when the
// rasters disagree in size.
Raster CalibrateDepthUncertainty(const Raster& depth, const Raster& sigma_raw,
                                 const UncertaintyCalibrationOptions& options);

// Per-pixel ingredients of the one-sided surface-normal residuals
//   r_u± = ñ_x ∂u± w − n_x w,   r_v± = ñ_y ∂v± w − n_y w
// on the inverse depth w = 1/D, together with their propagated variances.
// All rasters share the image size; invalid input normals stay invalid.
struct NormalResidualModel {
  // Channel 0: ñ_x = n_x (u−cx) + n_y (v−cy) + n_z fx,
  // channel 1: ñ_y = n_x (u−cx) + n_y (v−cy) + n_z fy.
  Raster n_tilde;
  // Channels: n_x, n_y.
  Raster n_xy;
  // Channels: variance of the +u and −u residuals (equal under the
  // one-sided ≈ central approximation, kept separate for clarity).
  Raster variance_u;
  // Channels: variance of the +v and −v residuals.
  Raster variance_v;

  int width() const { return n_tilde.width(); }
  int height() const { return n_tilde.height(); }
};

struct NormalPropagationOptions {
  // Lower bound on each propagated residual variance.
  double variance_floor = 1e-6;
  // sin(theta) below which the spherical parametrization degenerates and the
  // angular covariance falls back to an isotropic Cartesian one.
  double pole_threshold = 1e-6;
};

// Propagates per-pixel isotropic angular normal uncertainty (radians, from
// sigma_angular) through the spherical-to-Cartesian Jacobian and then into
// the normal-residual space. depth_gradient optionally supplies the log-depth
// image gradients (2 channels: d/du, d/dv); when null they are approximated
// by -n_x/ñ_x and -n_y/ñ_y, which makes the result depth-independent.
NormalResidualModel PropagateNormalUncertainty(
    const Raster& normals, const Raster& sigma_angular,
    const CameraIntrinsics& intrinsics, const Raster* depth_gradient,
    const NormalPropagationOptions& options);

// Angular standard deviation from the disagreement between a normal map and
// the un-flipped normal map of the horizontally mirrored image: per pixel the
// spherical mean of the two estimates, the 2x2 angular covariance of their
// deviations, and sqrt of its largest eigenvalue. The result is the per-pixel
// maximum of that and sigma_model. Throws ShapeMismatch on size disagreement.
Raster FlipConsistencyCovariance(const Raster& normals,
                                 const Raster& normals_unflipped,
                                 const Raster& sigma_model);

}  // namespace priorsfm

#endif  // PRIORSFM_DEPTH_UNCERTAINTY_H_
