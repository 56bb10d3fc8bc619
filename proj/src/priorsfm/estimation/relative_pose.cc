#include "priorsfm/estimation/relative_pose.h"

#include <cmath>

#include "priorsfm/estimation/essential.h"
#include "priorsfm/estimation/triangulation.h"
#include "priorsfm/util/errors.h"
#include "priorsfm/util/stats.h"

namespace priorsfm {

namespace {

constexpr int kSampleSize = 8;

int CountInliers(const Eigen::Matrix3d& fundamental,
                 const std::vector<Eigen::Vector2d>& pixels_a,
                 const std::vector<Eigen::Vector2d>& pixels_b,
                 double max_squared, std::vector<char>* mask) {
  int count = 0;
  for (size_t i = 0; i < pixels_a.size(); ++i) {
    const bool in =
        SampsonSquaredPx(fundamental, pixels_a[i], pixels_b[i]) < max_squared;
    (*mask)[i] = in ? 1 : 0;
    count += in ? 1 : 0;
  }
  return count;
}

}  // namespace

RelativePoseReport EstimateRelativePose(const CameraIntrinsics& cam_a,
                                        const CameraIntrinsics& cam_b,
                                        const std::vector<Eigen::Vector2d>& pixels_a,
                                        const std::vector<Eigen::Vector2d>& pixels_b,
                                        const RelativePoseOptions& options,
                                        Rng& rng) {
  const int n = static_cast<int>(pixels_a.size());
  if (n < kSampleSize || pixels_b.size() != pixels_a.size()) {
    throw InsufficientMatchesError(
        "relative pose needs at least 8 correspondences");
  }

  // Unit-depth camera coordinates for the solver; pixels for scoring.
  std::vector<Eigen::Vector2d> xa(n), xb(n);
  for (int i = 0; i < n; ++i) {
    xa[i] = cam_a.Ray(pixels_a[i]).head<2>();
    xb[i] = cam_b.Ray(pixels_b[i]).head<2>();
  }
  const Eigen::Matrix3d ka = cam_a.K();
  const Eigen::Matrix3d kb = cam_b.K();
  const double max_squared = options.max_sampson_px * options.max_sampson_px;

  RelativePoseReport report;
  report.ransac.inlier_mask.assign(n, 0);

  Eigen::Matrix3d best_essential = Eigen::Matrix3d::Zero();
  std::vector<char> mask(n, 0);
  std::vector<char> best_mask(n, 0);
  int best_count = 0;
  int iteration_bound = options.max_iterations;
  int iter = 0;
  std::vector<Eigen::Vector2d> sample_a(kSampleSize), sample_b(kSampleSize);
  for (; iter < iteration_bound; ++iter) {
    const std::vector<int> sample = SampleDistinct(rng, n, kSampleSize);
    for (int k = 0; k < kSampleSize; ++k) {
      sample_a[k] = xa[sample[k]];
      sample_b[k] = xb[sample[k]];
    }
    Eigen::Matrix3d essential;
    if (!EssentialEightPoint(sample_a, sample_b, &essential)) {
      continue;
    }
    const Eigen::Matrix3d fundamental =
        FundamentalFromEssential(essential, ka, kb);
    const int count =
        CountInliers(fundamental, pixels_a, pixels_b, max_squared, &mask);
    if (count > best_count) {
      best_count = count;
      best_mask = mask;
      best_essential = essential;
      iteration_bound = std::min(
          options.max_iterations,
          AdaptiveIterationBound(options.confidence,
                                 static_cast<double>(count) / n, kSampleSize,
                                 options.max_iterations));
    }
  }
  report.ransac.iterations = iter;

  if (best_count < kSampleSize) {
    return report;  // no usable consensus
  }

  // Re-fit on the consensus set and recount.
  std::vector<Eigen::Vector2d> in_a, in_b;
  in_a.reserve(best_count);
  in_b.reserve(best_count);
  for (int i = 0; i < n; ++i) {
    if (best_mask[i]) {
      in_a.push_back(xa[i]);
      in_b.push_back(xb[i]);
    }
  }
  Eigen::Matrix3d refit;
  if (EssentialEightPoint(in_a, in_b, &refit)) {
    const Eigen::Matrix3d fundamental = FundamentalFromEssential(refit, ka, kb);
    const int count =
        CountInliers(fundamental, pixels_a, pixels_b, max_squared, &mask);
    if (count >= best_count) {
      best_count = count;
      best_mask = mask;
      best_essential = refit;
    }
  }

  report.ransac.inlier_mask = best_mask;
  report.ransac.num_inliers = best_count;

  PoseSE3 pose_ba;
  const int cheirality_count =
      DecomposeEssential(best_essential, xa, xb, best_mask, &pose_ba);
  if (cheirality_count == 0) {
    report.degenerate = true;
    return report;
  }
  report.ransac.pose = pose_ba;

  // Parallax over inliers that triangulate in front of both cameras.
  std::vector<double> angles;
  angles.reserve(best_count);
  const Eigen::Vector3d center_b = pose_ba.Center();
  for (int i = 0; i < n; ++i) {
    if (!best_mask[i]) {
      continue;
    }
    Eigen::Vector3d point;
    if (!TriangulateNormalized(pose_ba, xa[i], xb[i], &point)) {
      continue;
    }
    if (point.z() <= 0.0 || pose_ba.Apply(point).z() <= 0.0) {
      continue;
    }
    angles.push_back(
        RadToDeg(AngleBetweenDirections(point, point - center_b)));
  }
  report.median_parallax_deg = angles.empty() ? 0.0 : Median(angles);
  report.ransac.success = best_count >= options.min_inliers;
  report.stable = report.ransac.success &&
                  report.median_parallax_deg >= options.min_parallax_deg;
  return report;
}

}  // namespace priorsfm
