#include "priorsfm/eval/pose_metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "priorsfm/util/errors.h"
#include "priorsfm/util/stats.h"

namespace priorsfm {

namespace {

// Largest distance between any two camera centers; the yardstick for
// deciding that a baseline is too short to have a direction.
double CameraSpan(const std::map<int, PoseSE3>& poses) {
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(poses.size());
  for (const auto& [id, pose] : poses) {
    centers.push_back(pose.Center());
  }
  double span = 0.0;
  for (size_t i = 0; i < centers.size(); ++i) {
    for (size_t j = i + 1; j < centers.size(); ++j) {
      span = std::max(span, (centers[i] - centers[j]).norm());
    }
  }
  return span;
}

}  // namespace

double RecallAt(const std::vector<PosePairError>& pair_errors,
                double threshold_deg) {
  if (pair_errors.empty()) {
    return 0.0;
  }
  int hits = 0;
  for (const PosePairError& pair : pair_errors) {
    if (pair.error_deg <= threshold_deg) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(pair_errors.size());
}

PoseAccuracyReport EvaluatePoses(const std::map<int, PoseSE3>& reference,
                                 const std::map<int, PoseSE3>& estimate,
                                 const std::vector<double>& thresholds_deg) {
  PoseAccuracyReport report;
  for (const auto& [id, pose] : reference) {
    if (estimate.count(id) > 0) {
      ++report.num_common;
    }
  }
  if (report.num_common < 2) {
    throw NoCommonImagesError("pose evaluation needs at least two images " +
                              std::string("present in both sets, got ") +
                              std::to_string(report.num_common));
  }

  const double ref_floor = 1e-6 * CameraSpan(reference);
  std::map<int, PoseSE3> common;
  for (const auto& [id, pose] : estimate) {
    if (reference.count(id) > 0) {
      common[id] = pose;
    }
  }
  const double est_floor = 1e-6 * CameraSpan(common);

  for (auto it_i = reference.begin(); it_i != reference.end(); ++it_i) {
    for (auto it_j = std::next(it_i); it_j != reference.end(); ++it_j) {
      PosePairError pair;
      pair.image_a = it_i->first;
      pair.image_b = it_j->first;
      const auto est_i = estimate.find(it_i->first);
      const auto est_j = estimate.find(it_j->first);
      if (est_i == estimate.end() || est_j == estimate.end()) {
        pair.error_deg = std::numeric_limits<double>::infinity();
        report.pair_errors.push_back(pair);
        continue;
      }
      // Relative motion from camera j to camera i in each set; a global
      // similarity applied to either set cancels here.
      const PoseSE3 rel_ref = it_i->second * it_j->second.Inverse();
      const PoseSE3 rel_est = est_i->second * est_j->second.Inverse();
      const double rotation_deg =
          RadToDeg(RotationAngleBetween(rel_ref.q, rel_est.q));
      double translation_deg = 0.0;
      if (rel_ref.t.norm() > ref_floor && rel_est.t.norm() > est_floor) {
        translation_deg = RadToDeg(AngleBetweenDirections(rel_ref.t, rel_est.t));
      }
      pair.error_deg = std::max(rotation_deg, translation_deg);
      report.pair_errors.push_back(pair);
    }
  }

  report.thresholds_deg = thresholds_deg;
  for (const double threshold : thresholds_deg) {
    report.auc.push_back(AreaUnderRecall(report.pair_errors, threshold));
  }
  return report;
}

double AreaUnderRecall(const std::vector<PosePairError>& pair_errors,
                       double threshold_deg) {
  if (!(threshold_deg > 0.0)) {
    throw ValidationError("pose-accuracy threshold must be positive, got " +
                          std::to_string(threshold_deg));
  }
  if (pair_errors.empty()) {
    return 0.0;
  }
  // Each pair is recalled on [error, threshold]; summing those interval
  // lengths integrates the piecewise-constant recall curve exactly.
  double mass = 0.0;
  for (const PosePairError& pair : pair_errors) {
    mass += std::max(0.0, threshold_deg - pair.error_deg);
  }
  return mass /
         (threshold_deg * static_cast<double>(pair_errors.size()));
}

}  // namespace priorsfm
