#include "priorsfm/bundle/refinement_controller.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "priorsfm/geometry/projection.h"
#include "priorsfm/util/errors.h"
#include "priorsfm/util/stats.h"

namespace priorsfm {

namespace {

// One frozen depth-coupling pair: scene point k observed at a keypoint of
// image i whose prior supplies depth and variance there. The sigma is fixed
// at alternation entry; targets and map samples stay live.
struct DepthLink {
  int point_id = 0;
  int image_id = 0;
  int keypoint_idx = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double sigma = 1.0;
};

struct FrozenObservation {
  int point_id = 0;
  int image_id = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double sigma_px = 1.0;
};

// Whether the prior rasters can serve a depth sample at this pixel through
// every refinement round: the refined map's valid set is exactly the pixels
// where prior depth and sigma are both valid, so requiring the footprint to
// be valid in both keeps a link usable forever.
bool PriorServesDepthAt(const ImageState& image, const Eigen::Vector2d& px,
                        double* sigma_prior) {
  const std::optional<double> depth =
      InterpolateInverseDepth(image.prior_depth, px);
  if (!depth.has_value()) return false;
  const std::optional<double> sigma =
      image.prior_sigma.TryInterpolateScalar(px);
  if (!sigma.has_value() || !(*sigma > 0.0)) return false;
  *sigma_prior = *sigma;
  return true;
}

// Prior + integration part of one image's refinement objective at its
// current map, without touching the map.
double RefinePartCost(const ImageState& image,
                      const RefineDepthOptions& refine_options) {
  RefineDepthOptions eval = refine_options;
  eval.max_outer_iterations = 0;
  const Raster& active = image.ActiveDepth();
  return RefineDepth(image.prior_depth, image.prior_sigma, image.normal_model,
                     {}, &active, eval)
      .final_cost;
}

}  // namespace

Eigen::Matrix3d PointPositionCovariance(const Reconstruction& scene,
                                        int point_id) {
  const ScenePoint& point = scene.point(point_id);
  Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
  for (const Observation& obs : point.track) {
    const auto image_it = scene.images.find(obs.image_id);
    if (image_it == scene.images.end() || !image_it->second.registered) {
      continue;
    }
    const ImageState& image = image_it->second;
    const Keypoint& kp = image.keypoints[obs.keypoint_idx];
    const Eigen::Vector3d p_cam = image.pose.Apply(point.position);
    if (!(p_cam.z() > 0.0)) continue;
    const double inv_z = 1.0 / p_cam.z();
    const CameraIntrinsics& cam = image.intrinsics;
    Eigen::Matrix<double, 2, 3> j_proj;
    j_proj << cam.fx * inv_z, 0.0, -cam.fx * p_cam.x() * inv_z * inv_z, 0.0,
        cam.fy * inv_z, -cam.fy * p_cam.y() * inv_z * inv_z;
    const Eigen::Matrix<double, 2, 3> j =
        j_proj * image.pose.R() / kp.sigma_px;
    info += j.transpose() * j;
    if (image.HasDepthPrior()) {
      const std::optional<double> sigma =
          image.prior_sigma.TryInterpolateScalar(kp.position);
      if (sigma.has_value() && *sigma > 0.0) {
        const Eigen::RowVector3d row = image.pose.R().row(2) / *sigma;
        info += row.transpose() * row;
      }
    }
  }
  if (info.allFinite()) {
    const double det = info.determinant();
    if (std::isfinite(det) && det > 1e-18) {
      const Eigen::Matrix3d cov = info.inverse();
      if (cov.allFinite()) return cov;
    }
  }
  return 1e6 * Eigen::Matrix3d::Identity();
}

namespace {

// Whether any surviving observation can draw a depth sample from its image's
// prior, which exempts the point from the triangulation-angle and
// track-length rules.
bool HasDepthAnchor(const Reconstruction& scene, const ScenePoint& point) {
  for (const Observation& obs : point.track) {
    const auto it = scene.images.find(obs.image_id);
    if (it == scene.images.end() || !it->second.registered ||
        !it->second.HasDepthPrior()) {
      continue;
    }
    const ImageState& image = it->second;
    double sigma_prior = 0.0;
    if (PriorServesDepthAt(image, image.keypoints[obs.keypoint_idx].position,
                           &sigma_prior)) {
      return true;
    }
  }
  return false;
}

}  // namespace

FilterReport FilterPoints(Reconstruction* scene,
                          const FilterOptions& options) {
  FilterReport report;
  const int num_points = static_cast<int>(scene->points().size());
  const double min_angle_rad = DegToRad(options.min_tri_angle_deg);
  for (int k = 0; k < num_points; ++k) {
    if (!scene->point(k).alive) continue;

    std::vector<int> drop_images;
    for (const Observation& obs : scene->point(k).track) {
      const auto it = scene->images.find(obs.image_id);
      if (it == scene->images.end() || !it->second.registered) continue;
      const ImageState& image = it->second;
      const Eigen::Vector3d p_cam =
          image.pose.Apply(scene->point(k).position);
      if (!(p_cam.z() > 0.0)) {
        drop_images.push_back(obs.image_id);
        continue;
      }
      const Eigen::Vector2d proj = image.intrinsics.PixelFromCamera(p_cam);
      const double error =
          (proj - image.keypoints[obs.keypoint_idx].position).norm();
      if (error > options.max_reproj_px) {
        drop_images.push_back(obs.image_id);
      }
    }
    for (const int image_id : drop_images) {
      scene->RemoveObservation(k, image_id);
      ++report.removed_observations;
    }
    if (!scene->point(k).alive) {
      ++report.removed_points;
      continue;
    }

    const ScenePoint& point = scene->point(k);
    const bool anchored = HasDepthAnchor(*scene, point);
    if (anchored) continue;
    if (static_cast<int>(point.track.size()) < 2) {
      scene->KillPoint(k);
      ++report.removed_points;
      continue;
    }
    std::vector<Eigen::Vector3d> centers;
    for (const Observation& obs : point.track) {
      const auto it = scene->images.find(obs.image_id);
      if (it != scene->images.end() && it->second.registered) {
        centers.push_back(it->second.pose.Center());
      }
    }
    double max_angle = 0.0;
    for (size_t a = 0; a < centers.size(); ++a) {
      for (size_t b2 = a + 1; b2 < centers.size(); ++b2) {
        max_angle = std::max(
            max_angle, AngleBetweenDirections(centers[a] - point.position,
                                              centers[b2] - point.position));
      }
    }
    if (max_angle < min_angle_rad) {
      scene->KillPoint(k);
      ++report.removed_points;
    }
  }
  return report;
}

RefinementSchedule PlanRefinement(const Reconstruction& scene,
                                  const ScheduleTrigger& trigger,
                                  const ScheduleOptions& options) {
  RefinementSchedule schedule;
  schedule.rounds = options.rounds;
  const int registered = scene.NumRegistered();
  const int alive = scene.NumAlivePoints();
  const bool global_due =
      registered <= options.local_window_size ||
      trigger.registered_at_last_global <= 0 ||
      registered >=
          options.global_growth_ratio * trigger.registered_at_last_global ||
      alive >= options.global_growth_ratio * trigger.points_at_last_global;
  if (global_due) {
    schedule.mode = RefinementMode::kGlobal;
    schedule.window_images = scene.RegisteredIds();
    return schedule;
  }

  schedule.mode = RefinementMode::kLocal;
  const int newest = scene.registration_order.back();
  std::map<int, int> shared;
  for (const ScenePoint& point : scene.points()) {
    if (!point.alive) continue;
    bool sees_newest = false;
    for (const Observation& obs : point.track) {
      sees_newest = sees_newest || obs.image_id == newest;
    }
    if (!sees_newest) continue;
    for (const Observation& obs : point.track) {
      if (obs.image_id != newest) ++shared[obs.image_id];
    }
  }
  std::vector<std::pair<int, int>> ranked;  // (count, id)
  for (const int id : scene.RegisteredIds()) {
    if (id != newest) ranked.emplace_back(shared.count(id) ? shared[id] : 0, id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  schedule.window_images.push_back(newest);
  for (const auto& [count, id] : ranked) {
    if (static_cast<int>(schedule.window_images.size()) >=
        options.local_window_size) {
      break;
    }
    schedule.window_images.push_back(id);
  }
  return schedule;
}

AlternationReport AlternateRefinement(Reconstruction* scene,
                                      const RefinementSchedule& schedule,
                                      const AlternationOptions& options) {
  if (scene->NumRegistered() < 2) {
    throw ValidationError(
        "alternating refinement requires at least two registered images");
  }
  if (schedule.window_images.empty()) {
    throw ValidationError("refinement schedule has an empty image window");
  }
  std::set<int> scope(schedule.window_images.begin(),
                      schedule.window_images.end());
  for (const int id : scope) {
    const auto it = scene->images.find(id);
    if (it == scene->images.end() || !it->second.registered) {
      throw ValidationError("refinement window lists unregistered image " +
                            std::to_string(id));
    }
  }

  // ---- Freeze the residual blocks and coupling variances at entry. ----
  std::vector<int> variable_points;
  std::vector<FrozenObservation> frozen_obs;
  std::vector<DepthLink> links;
  const int num_points = static_cast<int>(scene->points().size());
  for (int k = 0; k < num_points; ++k) {
    const ScenePoint& point = scene->point(k);
    if (!point.alive) continue;
    bool in_scope = false;
    for (const Observation& obs : point.track) {
      in_scope = in_scope || scope.count(obs.image_id) > 0;
    }
    if (!in_scope) continue;
    variable_points.push_back(k);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    bool cov_ready = false;
    for (const Observation& obs : point.track) {
      const auto it = scene->images.find(obs.image_id);
      if (it == scene->images.end() || !it->second.registered) continue;
      const ImageState& image = it->second;
      const Keypoint& kp = image.keypoints[obs.keypoint_idx];
      frozen_obs.push_back({k, obs.image_id, kp.position, kp.sigma_px});

      if (!options.depth_regularization || !image.HasDepthPrior()) continue;
      double sigma_prior = 0.0;
      if (!PriorServesDepthAt(image, kp.position, &sigma_prior)) continue;
      double variance = sigma_prior * sigma_prior;
      if (options.anchor_weight_mode == AnchorWeightMode::kCombined) {
        if (!cov_ready) {
          cov = PointPositionCovariance(*scene, k);
          cov_ready = true;
        }
        variance += PointDepthVariance(image.pose, cov);
      }
      links.push_back(
          {k, obs.image_id, obs.keypoint_idx, kp.position, std::sqrt(variance)});
    }
  }

  // Joint objective over the frozen blocks at the scene's current
  // parameters. Filtered blocks keep contributing (they sit on the robust
  // plateau once filtered), so the trace stays comparable across rounds.
  const auto evaluate_objective = [&]() {
    BundleProblem eval;
    std::map<int, int> camera_index;
    for (const FrozenObservation& obs : frozen_obs) camera_index[obs.image_id];
    for (const DepthLink& link : links) camera_index[link.image_id];
    for (auto& [image_id, index] : camera_index) {
      index = static_cast<int>(eval.cameras.size());
      const ImageState& image = scene->images.at(image_id);
      eval.cameras.push_back({image.intrinsics, image.pose, true, -1});
    }
    std::map<int, int> point_index;
    for (const int k : variable_points) {
      point_index[k] = static_cast<int>(eval.points.size());
      eval.points.push_back(scene->point(k).position);
    }
    for (const FrozenObservation& obs : frozen_obs) {
      eval.observations.push_back({camera_index.at(obs.image_id),
                                   point_index.at(obs.point_id), obs.pixel,
                                   obs.sigma_px});
    }
    for (const DepthLink& link : links) {
      const ImageState& image = scene->images.at(link.image_id);
      const std::optional<double> measured =
          InterpolateInverseDepth(image.ActiveDepth(), link.pixel);
      if (!measured.has_value()) continue;
      eval.depth_constraints.push_back({camera_index.at(link.image_id),
                                        point_index.at(link.point_id),
                                        *measured, link.sigma});
    }
    double objective = EvaluateBundleCost(eval, options.bundle);
    if (options.refine_depths) {
      for (const int id : schedule.window_images) {
        const ImageState& image = scene->images.at(id);
        if (image.HasDepthPrior()) {
          objective += RefinePartCost(image, options.refine);
        }
      }
    }
    return objective;
  };

  AlternationReport report;
  report.objective_trace.push_back(evaluate_objective());

  for (int round = 0; round < schedule.rounds; ++round) {
    // Phase 1: per-image depth refinement toward the current point depths.
    if (options.refine_depths) {
      for (const int image_id : schedule.window_images) {
        ImageState& image = scene->images.at(image_id);
        if (!image.HasDepthPrior()) continue;
        std::vector<DepthAnchor> anchors;
        for (const DepthLink& link : links) {
          if (link.image_id != image_id) continue;
          if (!scene->point(link.point_id).alive) continue;
          if (scene->PointIdOf(link.image_id, link.keypoint_idx) !=
              link.point_id) {
            continue;  // observation was filtered away
          }
          const double target =
              CameraDepth(image.pose, scene->point(link.point_id).position);
          if (!(target > 0.0) || !std::isfinite(target)) continue;
          anchors.push_back({link.pixel, target, link.sigma * link.sigma});
        }

        RefineDepthOptions eval_options = options.refine;
        eval_options.max_outer_iterations = 0;
        const Raster& active = image.ActiveDepth();
        const double current_cost =
            RefineDepth(image.prior_depth, image.prior_sigma,
                        image.normal_model, anchors, &active, eval_options)
                .final_cost;
        if (image.refine_cost >= 0.0 &&
            ShouldSkipRefinement(image.refine_cost, current_cost,
                                 options.skip_threshold)) {
          ++report.images_skipped;
          continue;
        }
        RefineDepthResult result =
            RefineDepth(image.prior_depth, image.prior_sigma,
                        image.normal_model, anchors, &active, options.refine);
        image.refined_depth = std::move(result.depth);
        image.refine_cost = result.final_cost;
        ++report.images_refined;
      }
    }

    // Phase 2: pose/point adjustment against the refreshed maps.
    BundleProblem problem;
    std::map<int, int> camera_index;
    std::vector<int> solve_points;
    for (const int k : variable_points) {
      if (!scene->point(k).alive) continue;
      solve_points.push_back(k);
      for (const Observation& obs : scene->point(k).track) {
        const auto it = scene->images.find(obs.image_id);
        if (it != scene->images.end() && it->second.registered) {
          camera_index[obs.image_id];
        }
      }
    }
    if (!solve_points.empty() && !camera_index.empty()) {
      std::vector<int> camera_ids;
      for (auto& [image_id, index] : camera_index) {
        index = static_cast<int>(camera_ids.size());
        camera_ids.push_back(image_id);
        const ImageState& image = scene->images.at(image_id);
        problem.cameras.push_back(
            {image.intrinsics, image.pose, scope.count(image_id) == 0, -1});
      }
      bool any_fixed = false;
      for (const BundleCamera& cam : problem.cameras) {
        any_fixed = any_fixed || cam.fixed;
      }
      if (!any_fixed) {
        for (const int id : scene->registration_order) {
          const auto it = camera_index.find(id);
          if (it != camera_index.end()) {
            problem.cameras[it->second].fixed = true;
            break;
          }
        }
      }
      std::map<int, int> point_index;
      for (const int k : solve_points) {
        point_index[k] = static_cast<int>(problem.points.size());
        problem.points.push_back(scene->point(k).position);
      }
      for (const int k : solve_points) {
        for (const Observation& obs : scene->point(k).track) {
          const auto it = camera_index.find(obs.image_id);
          if (it == camera_index.end()) continue;
          const ImageState& image = scene->images.at(obs.image_id);
          const Keypoint& kp = image.keypoints[obs.keypoint_idx];
          problem.observations.push_back(
              {it->second, point_index.at(k), kp.position, kp.sigma_px});
        }
      }
      for (const DepthLink& link : links) {
        if (point_index.count(link.point_id) == 0) continue;
        if (scene->PointIdOf(link.image_id, link.keypoint_idx) !=
            link.point_id) {
          continue;
        }
        const ImageState& image = scene->images.at(link.image_id);
        const std::optional<double> measured =
            InterpolateInverseDepth(image.ActiveDepth(), link.pixel);
        if (!measured.has_value()) continue;
        problem.depth_constraints.push_back({camera_index.at(link.image_id),
                                             point_index.at(link.point_id),
                                             *measured, link.sigma});
      }
      // With no depth rows the scene scale is free; pin one translation
      // component of the first free camera against the single gauge camera.
      if (problem.depth_constraints.empty()) {
        int num_fixed = 0;
        for (const BundleCamera& cam : problem.cameras) {
          num_fixed += cam.fixed ? 1 : 0;
        }
        if (num_fixed == 1) {
          for (BundleCamera& cam : problem.cameras) {
            if (cam.fixed) continue;
            int axis = 0;
            cam.pose.t.cwiseAbs().maxCoeff(&axis);
            cam.fixed_translation_axis = axis;
            break;
          }
        }
      }

      BundleReport bundle_report = SolveBundle(&problem, options.bundle);
      for (size_t c = 0; c < camera_ids.size(); ++c) {
        if (!problem.cameras[c].fixed) {
          scene->images.at(camera_ids[c]).pose = problem.cameras[c].pose;
        }
      }
      for (const auto& [k, index] : point_index) {
        scene->point(k).position = problem.points[index];
      }
      report.bundle_reports.push_back(std::move(bundle_report));
    }

    const FilterReport filtered = FilterPoints(scene, options.filter);
    report.removed_observations += filtered.removed_observations;
    report.removed_points += filtered.removed_points;

    report.objective_trace.push_back(evaluate_objective());
  }
  return report;
}

}  // namespace priorsfm
