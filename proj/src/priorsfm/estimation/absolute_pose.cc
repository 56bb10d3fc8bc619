#include "priorsfm/estimation/absolute_pose.h"

#include <array>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "priorsfm/estimation/p3p.h"
#include "priorsfm/geometry/projection.h"
#include "priorsfm/util/errors.h"

namespace priorsfm {

namespace {

constexpr int kSampleSize = 3;

Eigen::Matrix3d Skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

int CountInliers(const CameraIntrinsics& cam, const PoseSE3& pose,
                 const std::vector<Observation2D3D>& observations,
                 double max_squared, std::vector<char>* mask) {
  int count = 0;
  for (size_t i = 0; i < observations.size(); ++i) {
    const Eigen::Vector3d p_cam = pose.Apply(observations[i].point);
    bool in = false;
    if (p_cam.z() > 0.0) {
      const Eigen::Vector2d proj = cam.PixelFromCamera(p_cam);
      in = (proj - observations[i].pixel).squaredNorm() < max_squared;
    }
    (*mask)[i] = in ? 1 : 0;
    count += in ? 1 : 0;
  }
  return count;
}

double WeightedCost(const CameraIntrinsics& cam, const PoseSE3& pose,
                    const std::vector<Observation2D3D>& observations,
                    const std::vector<char>& mask,
                    const std::vector<double>& weights) {
  double cost = 0.0;
  for (size_t i = 0; i < observations.size(); ++i) {
    if (!mask[i]) {
      continue;
    }
    const Eigen::Vector3d p_cam = pose.Apply(observations[i].point);
    if (p_cam.z() <= 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    const Eigen::Vector2d proj = cam.PixelFromCamera(p_cam);
    cost += weights[i] * (proj - observations[i].pixel).squaredNorm();
  }
  return cost;
}

// Levenberg-damped Gauss-Newton on the masked observations, minimizing the
// weighted squared reprojection error over the 6-dof pose.
PoseSE3 RefinePose(const CameraIntrinsics& cam, const PoseSE3& initial,
                   const std::vector<Observation2D3D>& observations,
                   const std::vector<char>& mask,
                   const std::vector<double>& weights) {
  PoseSE3 pose = initial;
  double cost = WeightedCost(cam, pose, observations, mask, weights);
  if (!std::isfinite(cost)) {
    return pose;
  }
  double lambda = 1e-6;
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (size_t i = 0; i < observations.size(); ++i) {
      if (!mask[i]) {
        continue;
      }
      const Eigen::Vector3d rotated = pose.q * observations[i].point;
      const Eigen::Vector3d p_cam = rotated + pose.t;
      const double inv_z = 1.0 / p_cam.z();
      const Eigen::Vector2d proj = cam.PixelFromCamera(p_cam);
      const Eigen::Vector2d res = proj - observations[i].pixel;
      Eigen::Matrix<double, 2, 3> j_proj;
      j_proj << cam.fx * inv_z, 0.0, -cam.fx * p_cam.x() * inv_z * inv_z, 0.0,
          cam.fy * inv_z, -cam.fy * p_cam.y() * inv_z * inv_z;
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = j_proj * (-Skew(rotated));
      j.rightCols<3>() = j_proj;
      jtj += weights[i] * j.transpose() * j;
      jtr += weights[i] * j.transpose() * res;
    }
    bool stepped = false;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::Matrix<double, 6, 6> damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal();
      const Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      PoseSE3 candidate = pose;
      candidate.Retract(step.head<3>(), step.tail<3>());
      const double candidate_cost =
          WeightedCost(cam, candidate, observations, mask, weights);
      if (candidate_cost < cost) {
        const double rel_drop = (cost - candidate_cost) / cost;
        pose = candidate;
        cost = candidate_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        stepped = true;
        if (rel_drop < 1e-12 || cost == 0.0) {
          return pose;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) {
      break;
    }
  }
  return pose;
}

}  // namespace

RansacResult EstimateAbsolutePose(const CameraIntrinsics& cam,
                                  const std::vector<Observation2D3D>& observations,
                                  const AbsolutePoseOptions& options, Rng& rng) {
  const int n = static_cast<int>(observations.size());
  if (n < kSampleSize + 1) {
    throw InsufficientMatchesError(
        "absolute pose needs at least 4 correspondences");
  }
  const double max_squared = options.max_error_px * options.max_error_px;

  RansacResult result;
  result.inlier_mask.assign(n, 0);

  std::vector<char> mask(n, 0);
  std::vector<char> best_mask(n, 0);
  PoseSE3 best_pose;
  int best_count = 0;
  int iteration_bound = options.max_iterations;
  int iter = 0;
  for (; iter < iteration_bound; ++iter) {
    const std::vector<int> sample = SampleDistinct(rng, n, kSampleSize);
    const std::array<Eigen::Vector3d, 3> world = {
        observations[sample[0]].point, observations[sample[1]].point,
        observations[sample[2]].point};
    const std::array<Eigen::Vector3d, 3> bearings = {
        cam.Ray(observations[sample[0]].pixel).normalized(),
        cam.Ray(observations[sample[1]].pixel).normalized(),
        cam.Ray(observations[sample[2]].pixel).normalized()};
    for (const PoseSE3& candidate : SolveP3P(world, bearings)) {
      const int count =
          CountInliers(cam, candidate, observations, max_squared, &mask);
      if (count > best_count) {
        best_count = count;
        best_mask = mask;
        best_pose = candidate;
        iteration_bound = std::min(
            options.max_iterations,
            AdaptiveIterationBound(options.confidence,
                                   static_cast<double>(count) / n, kSampleSize,
                                   options.max_iterations));
      }
    }
  }
  result.iterations = iter;
  if (best_count < kSampleSize + 1) {
    return result;  // no consensus beyond a minimal sample
  }

  // Whiten the refinement by the projected point uncertainty: depth variance
  // maps to roughly (f/z)^2 * var pixels^2 of positional slack.
  const double focal = 0.5 * (cam.fx + cam.fy);
  std::vector<double> weights(n, 1.0);
  for (int i = 0; i < n; ++i) {
    const double z = CameraDepth(best_pose, observations[i].point);
    if (z > 0.0 && observations[i].depth_variance > 0.0) {
      const double px_var =
          (focal / z) * (focal / z) * observations[i].depth_variance;
      weights[i] = 1.0 / (1.0 + px_var);
    }
  }
  const PoseSE3 refined =
      RefinePose(cam, best_pose, observations, best_mask, weights);
  const int refined_count =
      CountInliers(cam, refined, observations, max_squared, &mask);
  if (refined_count >= best_count) {
    best_count = refined_count;
    best_mask = mask;
    best_pose = refined;
  }

  result.pose = best_pose;
  result.inlier_mask = best_mask;
  result.num_inliers = best_count;
  result.success = best_count >= options.min_inliers;
  return result;
}

}  // namespace priorsfm
