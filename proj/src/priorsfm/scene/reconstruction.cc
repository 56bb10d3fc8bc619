#include "priorsfm/scene/reconstruction.h"

#include <algorithm>
#include <string>

#include "priorsfm/util/errors.h"

namespace priorsfm {

namespace {

std::string KeypointName(const Observation& obs) {
  return "image " + std::to_string(obs.image_id) + " keypoint " +
         std::to_string(obs.keypoint_idx);
}

}  // namespace

int Reconstruction::AddPoint(ScenePoint point) {
  const int id = static_cast<int>(points_.size());
  for (const Observation& obs : point.track) {
    const auto key = std::make_pair(obs.image_id, obs.keypoint_idx);
    if (keypoint_to_point_.count(key) > 0) {
      throw ValidationError(KeypointName(obs) + " already backs point " +
                            std::to_string(keypoint_to_point_.at(key)));
    }
    keypoint_to_point_[key] = id;
  }
  points_.push_back(std::move(point));
  return id;
}

void Reconstruction::AddObservation(int point_id, const Observation& obs) {
  ScenePoint& point = points_[point_id];
  const auto key = std::make_pair(obs.image_id, obs.keypoint_idx);
  if (keypoint_to_point_.count(key) > 0) {
    throw ValidationError(KeypointName(obs) + " already backs point " +
                          std::to_string(keypoint_to_point_.at(key)));
  }
  for (const Observation& existing : point.track) {
    if (existing.image_id == obs.image_id) {
      throw ValidationError("point " + std::to_string(point_id) +
                            " already observes image " +
                            std::to_string(obs.image_id));
    }
  }
  keypoint_to_point_[key] = point_id;
  point.track.push_back(obs);
}

void Reconstruction::RemoveObservation(int point_id, int image_id) {
  ScenePoint& point = points_[point_id];
  for (auto it = point.track.begin(); it != point.track.end(); ++it) {
    if (it->image_id == image_id) {
      keypoint_to_point_.erase(
          std::make_pair(it->image_id, it->keypoint_idx));
      point.track.erase(it);
      if (point.track.empty()) {
        point.alive = false;
      }
      return;
    }
  }
}

void Reconstruction::KillPoint(int point_id) {
  ScenePoint& point = points_[point_id];
  for (const Observation& obs : point.track) {
    keypoint_to_point_.erase(std::make_pair(obs.image_id, obs.keypoint_idx));
  }
  point.track.clear();
  point.alive = false;
}

int Reconstruction::PointIdOf(int image_id, int keypoint_idx) const {
  const auto it =
      keypoint_to_point_.find(std::make_pair(image_id, keypoint_idx));
  return it == keypoint_to_point_.end() ? -1 : it->second;
}

int Reconstruction::NumRegistered() const {
  int count = 0;
  for (const auto& [id, image] : images) {
    if (image.registered) ++count;
  }
  return count;
}

int Reconstruction::NumAlivePoints() const {
  int count = 0;
  for (const ScenePoint& point : points_) {
    if (point.alive) ++count;
  }
  return count;
}

std::vector<int> Reconstruction::RegisteredIds() const {
  std::vector<int> ids;
  for (const auto& [id, image] : images) {
    if (image.registered) ids.push_back(id);
  }
  return ids;
}

std::optional<double> InterpolateInverseDepth(const Raster& depth,
                                              const Eigen::Vector2d& px) {
  const std::optional<BilinearFootprint> fp = depth.FootprintAt(px);
  if (!fp.has_value()) return std::nullopt;
  double blended_inverse = 0.0;
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const float d = depth.at(fp->cell_u[i], fp->cell_v[j]);
      if (!(d > 0.0f) || !std::isfinite(d)) return std::nullopt;
      blended_inverse += fp->weight_u[i] * fp->weight_v[j] / d;
    }
  }
  return 1.0 / blended_inverse;
}

int SharedAlivePointCount(const Reconstruction& scene, int image_a,
                          int image_b) {
  int count = 0;
  for (const ScenePoint& point : scene.points()) {
    if (!point.alive) continue;
    bool in_a = false;
    bool in_b = false;
    for (const Observation& obs : point.track) {
      in_a = in_a || obs.image_id == image_a;
      in_b = in_b || obs.image_id == image_b;
    }
    if (in_a && in_b) ++count;
  }
  return count;
}

}  // namespace priorsfm
