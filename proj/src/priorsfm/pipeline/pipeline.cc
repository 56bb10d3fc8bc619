#include "priorsfm/pipeline/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <utility>

#include "priorsfm/consistency/consistency_check.h"
#include "priorsfm/estimation/absolute_pose.h"
#include "priorsfm/estimation/relative_pose.h"
#include "priorsfm/estimation/triangulation.h"
#include "priorsfm/geometry/projection.h"
#include "priorsfm/util/errors.h"

namespace priorsfm {

namespace {

std::string Num(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return buffer;
}

// All matches between the two images as (keypoint in a, keypoint in b),
// merged across blocks of either orientation, sorted and deduplicated so
// the result is independent of the matches file's ordering.
std::vector<std::pair<int, int>> CollectPairEntries(
    const std::vector<PairMatches>& matches, int image_a, int image_b) {
  std::vector<std::pair<int, int>> keypoint_pairs;
  for (const PairMatches& block : matches) {
    const bool forward = block.image_a == image_a && block.image_b == image_b;
    const bool reverse = block.image_a == image_b && block.image_b == image_a;
    if (!forward && !reverse) {
      continue;
    }
    for (const PairMatches::Entry& entry : block.entries) {
      keypoint_pairs.emplace_back(forward ? entry.idx_a : entry.idx_b,
                                  forward ? entry.idx_b : entry.idx_a);
    }
  }
  std::sort(keypoint_pairs.begin(), keypoint_pairs.end());
  keypoint_pairs.erase(
      std::unique(keypoint_pairs.begin(), keypoint_pairs.end()),
      keypoint_pairs.end());
  return keypoint_pairs;
}

// True when any keypoint of the track already owns an alive scene point.
bool TrackHasPoint(const Reconstruction& scene,
                   const std::vector<CorrespondenceGraph::Node>& track) {
  for (const CorrespondenceGraph::Node& node : track) {
    if (scene.PointIdOf(node.image_id, node.keypoint_idx) >= 0) {
      return true;
    }
  }
  return false;
}

}  // namespace

struct IncrementalPipeline::GatheredObservations {
  std::vector<Observation2D3D> observations;
  std::vector<int> point_ids;      // parallel to observations
  std::vector<int> keypoint_idxs;  // parallel to observations
};

IncrementalPipeline::IncrementalPipeline(SceneInputs inputs,
                                         const PipelineConfig& config)
    : config_(config),
      scene_(std::move(inputs.scene)),
      matches_(std::move(inputs.matches)),
      rng_(config.seed) {
  std::map<int, int> keypoint_counts;
  for (const auto& [image_id, image] : scene_.images) {
    keypoint_counts[image_id] = static_cast<int>(image.keypoints.size());
  }
  graph_.Build(keypoint_counts, matches_);
  base_scene_ = scene_;
}

void IncrementalPipeline::Log(const std::string& line) {
  events_.push_back(line);
}

double IncrementalPipeline::ApplyDepthScale(
    int image_id, const std::vector<DepthScaleObservation>& scale_obs) {
  ImageState& image = scene_.images.at(image_id);
  const double scale = ScaleDepth(image.prior_depth, scale_obs);
  for (float& value : image.prior_depth.data()) {
    value = static_cast<float>(value * scale);
  }
  for (float& value : image.prior_sigma.data()) {
    value = static_cast<float>(value * scale);
  }
  image.depth_scale = scale;
  Log("scale view=" + std::to_string(image_id) + " factor=" + Num(scale));
  return scale;
}

void IncrementalPipeline::RunRefinement(const RefinementSchedule& schedule) {
  const AlternationReport report =
      AlternateRefinement(&scene_, schedule, MakeAlternationOptions(config_));
  std::string line =
      schedule.mode == RefinementMode::kGlobal ? "refine scope=global"
                                               : "refine scope=local";
  line += " images=" + std::to_string(schedule.mode == RefinementMode::kGlobal
                                          ? scene_.NumRegistered()
                                          : static_cast<int>(
                                                schedule.window_images.size()));
  if (!report.objective_trace.empty()) {
    line += " objective=" + Num(report.objective_trace.back());
  }
  line += " skipped=" + std::to_string(report.images_skipped);
  Log(line);
}

void IncrementalPipeline::AugmentWithLiftedPoints(int image_id) {
  ImageState& image = scene_.images.at(image_id);
  const Raster& depth = image.ActiveDepth();
  // Candidates: tracked keypoints whose track is not yet represented by any
  // alive point, ordered by prior depth confidence.
  struct Candidate {
    double sigma = 0.0;
    int keypoint = 0;
    double depth = 0.0;
  };
  std::vector<Candidate> candidates;
  for (size_t k = 0; k < image.keypoints.size(); ++k) {
    const int keypoint = static_cast<int>(k);
    const int track_id = graph_.TrackIdOf(image_id, keypoint);
    if (track_id < 0) {
      continue;
    }
    if (TrackHasPoint(scene_, graph_.tracks()[track_id])) {
      continue;
    }
    const Eigen::Vector2d& pixel = image.keypoints[k].position;
    const std::optional<double> lifted_depth =
        InterpolateInverseDepth(depth, pixel);
    const std::optional<double> sigma =
        image.prior_sigma.TryInterpolateScalar(pixel);
    if (!lifted_depth.has_value() || !sigma.has_value() ||
        !(*lifted_depth > 0.0)) {
      continue;
    }
    candidates.push_back({*sigma, keypoint, *lifted_depth});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              return a.sigma != b.sigma ? a.sigma < b.sigma
                                        : a.keypoint < b.keypoint;
            });
  if (static_cast<int>(candidates.size()) > config_.lifted_budget) {
    candidates.resize(config_.lifted_budget);
  }
  int lifted = 0;
  for (const Candidate& candidate : candidates) {
    ScenePoint point;
    point.position =
        Lift(image.intrinsics, image.pose,
             image.keypoints[candidate.keypoint].position, candidate.depth);
    point.track = {{image_id, candidate.keypoint}};
    point.provenance = PointProvenance::kLifted;
    scene_.AddPoint(std::move(point));
    ++lifted;
  }
  Log("augment view=" + std::to_string(image_id) +
      " lifted=" + std::to_string(lifted));
}

bool IncrementalPipeline::TryInitPair(int image_a, int image_b) {
  const std::vector<std::pair<int, int>> keypoint_pairs =
      CollectPairEntries(matches_, image_a, image_b);
  if (keypoint_pairs.size() < 8) {
    Log("init_skip pair=" + std::to_string(image_a) + "," +
        std::to_string(image_b) + " reason=too-few-matches");
    return false;
  }
  const ImageState& state_a = scene_.images.at(image_a);
  const ImageState& state_b = scene_.images.at(image_b);
  std::vector<Eigen::Vector2d> pixels_a;
  std::vector<Eigen::Vector2d> pixels_b;
  for (const auto& [idx_a, idx_b] : keypoint_pairs) {
    pixels_a.push_back(state_a.keypoints[idx_a].position);
    pixels_b.push_back(state_b.keypoints[idx_b].position);
  }

  const RelativePoseReport relative = EstimateRelativePose(
      state_a.intrinsics, state_b.intrinsics, pixels_a, pixels_b,
      config_.relative_pose, rng_);

  // Every failure path restores scene_ to base_scene_, so the scene is
  // pristine on entry here.
  ImageState& init_a = scene_.images.at(image_a);
  ImageState& init_b = scene_.images.at(image_b);
  init_a.pose = PoseSE3();
  init_a.registered = true;

  if (relative.stable) {
    Log("init_branch pair=" + std::to_string(image_a) + "," +
        std::to_string(image_b) + " branch=relative inliers=" +
        std::to_string(relative.ransac.num_inliers) +
        " parallax=" + Num(relative.median_parallax_deg));
    init_b.pose = relative.ransac.pose;
    init_b.registered = true;
    init_a.registration_inliers = relative.ransac.num_inliers;
    init_b.registration_inliers = relative.ransac.num_inliers;

    // Triangulate the well-conditioned inliers first; the low-parallax
    // remainder is lifted from the prior once the prior has a scale.
    std::vector<DepthScaleObservation> scale_obs_a;
    std::vector<size_t> lift_later;
    for (size_t m = 0; m < keypoint_pairs.size(); ++m) {
      if (!relative.ransac.inlier_mask[m]) {
        continue;
      }
      const TriangulationView view_a{state_a.intrinsics, init_a.pose,
                                     pixels_a[m]};
      const TriangulationView view_b{state_b.intrinsics, init_b.pose,
                                     pixels_b[m]};
      const TriangulationResult triangulated = Triangulate(
          {view_a, view_b}, config_.relative_pose.min_parallax_deg);
      if (triangulated.behind_camera) {
        continue;
      }
      if (triangulated.low_parallax) {
        lift_later.push_back(m);
        continue;
      }
      ScenePoint point;
      point.position = triangulated.point;
      point.track = {{image_a, keypoint_pairs[m].first},
                     {image_b, keypoint_pairs[m].second}};
      point.provenance = PointProvenance::kTriangulated;
      scene_.AddPoint(std::move(point));
      scale_obs_a.push_back(
          {pixels_a[m], CameraDepth(init_a.pose, triangulated.point)});
    }
    try {
      ApplyDepthScale(image_a, scale_obs_a);
    } catch (const NoValidObservationsError&) {
      Log("init_reject pair=" + std::to_string(image_a) + "," +
          std::to_string(image_b) + " reason=scale");
      scene_ = base_scene_;
      return false;
    }
    int lifted = 0;
    for (const size_t m : lift_later) {
      const std::optional<double> lifted_depth =
          InterpolateInverseDepth(init_a.prior_depth, pixels_a[m]);
      if (!lifted_depth.has_value() || !(*lifted_depth > 0.0)) {
        continue;
      }
      ScenePoint point;
      point.position = Lift(state_a.intrinsics, init_a.pose, pixels_a[m],
                            *lifted_depth);
      point.track = {{image_a, keypoint_pairs[m].first},
                     {image_b, keypoint_pairs[m].second}};
      point.provenance = PointProvenance::kLifted;
      scene_.AddPoint(std::move(point));
      ++lifted;
    }
    if (lifted > 0) {
      Log("init_lift pair=" + std::to_string(image_a) + "," +
          std::to_string(image_b) + " lifted=" + std::to_string(lifted));
    }
  } else if (config_.allow_pnp_init) {
    // Low-parallax fallback: lift image a's matched keypoints through its
    // (calibrated, still unscaled) prior and solve image b by consensus.
    std::vector<Observation2D3D> observations;
    std::vector<size_t> match_of_obs;
    for (size_t m = 0; m < keypoint_pairs.size(); ++m) {
      const std::optional<double> lifted_depth =
          InterpolateInverseDepth(init_a.prior_depth, pixels_a[m]);
      const std::optional<double> sigma =
          init_a.prior_sigma.TryInterpolateScalar(pixels_a[m]);
      if (!lifted_depth.has_value() || !sigma.has_value() ||
          !(*lifted_depth > 0.0)) {
        continue;
      }
      Observation2D3D obs;
      obs.pixel = pixels_b[m];
      obs.point = Lift(state_a.intrinsics, init_a.pose, pixels_a[m],
                       *lifted_depth);
      obs.depth_variance = *sigma * *sigma;
      observations.push_back(obs);
      match_of_obs.push_back(m);
    }
    if (observations.size() < 4) {
      Log("init_reject pair=" + std::to_string(image_a) + "," +
          std::to_string(image_b) + " reason=too-few-lifted");
      scene_ = base_scene_;
      return false;
    }
    const RansacResult pnp = EstimateAbsolutePose(
        state_b.intrinsics, observations, config_.absolute_pose, rng_);
    if (!pnp.success) {
      Log("init_reject pair=" + std::to_string(image_a) + "," +
          std::to_string(image_b) + " reason=pnp-consensus");
      scene_ = base_scene_;
      return false;
    }
    Log("init_branch pair=" + std::to_string(image_a) + "," +
        std::to_string(image_b) + " branch=pnp inliers=" +
        std::to_string(pnp.num_inliers) +
        " parallax=" + Num(relative.median_parallax_deg));
    init_b.pose = pnp.pose;
    init_b.registered = true;
    init_a.registration_inliers = pnp.num_inliers;
    init_b.registration_inliers = pnp.num_inliers;

    std::vector<DepthScaleObservation> scale_obs_a;
    for (size_t o = 0; o < observations.size(); ++o) {
      if (!pnp.inlier_mask[o]) {
        continue;
      }
      const size_t m = match_of_obs[o];
      ScenePoint point;
      point.position = observations[o].point;
      point.track = {{image_a, keypoint_pairs[m].first},
                     {image_b, keypoint_pairs[m].second}};
      point.provenance = PointProvenance::kLifted;
      scene_.AddPoint(std::move(point));
      scale_obs_a.push_back(
          {pixels_a[m], CameraDepth(init_a.pose, observations[o].point)});
    }
    try {
      ApplyDepthScale(image_a, scale_obs_a);
    } catch (const NoValidObservationsError&) {
      Log("init_reject pair=" + std::to_string(image_a) + "," +
          std::to_string(image_b) + " reason=scale");
      scene_ = base_scene_;
      return false;
    }
  } else {
    Log("init_skip pair=" + std::to_string(image_a) + "," +
        std::to_string(image_b) + " reason=unstable");
    scene_ = base_scene_;
    return false;
  }

  // Scale image b against every point observing it.
  std::vector<DepthScaleObservation> scale_obs_b;
  for (const ScenePoint& point : scene_.points()) {
    if (!point.alive) {
      continue;
    }
    for (const Observation& obs : point.track) {
      if (obs.image_id != image_b) {
        continue;
      }
      const double depth = CameraDepth(init_b.pose, point.position);
      if (depth > 0.0) {
        scale_obs_b.push_back(
            {init_b.keypoints[obs.keypoint_idx].position, depth});
      }
    }
  }
  try {
    ApplyDepthScale(image_b, scale_obs_b);
  } catch (const NoValidObservationsError&) {
    Log("init_reject pair=" + std::to_string(image_a) + "," +
        std::to_string(image_b) + " reason=scale");
    scene_ = base_scene_;
    return false;
  }

  scene_.registration_order.push_back(image_a);
  scene_.registration_order.push_back(image_b);

  RunRefinement(
      {RefinementMode::kGlobal, {}, config_.schedule.rounds});

  if (!config_.no_consistency_check) {
    for (const int view : {image_a, image_b}) {
      const ViewCheckReport check =
          CheckView(scene_, view, config_.consistency);
      if (!check.accepted) {
        Log("init_reject pair=" + std::to_string(image_a) + "," +
            std::to_string(image_b) + " reason=inconsistent view=" +
            std::to_string(view) + " partner=" +
            std::to_string(check.conflicts.front().view_id) +
            " beta=" + Num(check.conflicts.front().beta));
        scene_ = base_scene_;
        return false;
      }
    }
  }

  AugmentWithLiftedPoints(image_a);
  AugmentWithLiftedPoints(image_b);
  trigger_ = {scene_.NumRegistered(), scene_.NumAlivePoints()};
  Log("init_done pair=" + std::to_string(image_a) + "," +
      std::to_string(image_b) + " points=" +
      std::to_string(scene_.NumAlivePoints()));
  return true;
}

bool IncrementalPipeline::Initialize() {
  for (const auto& [image_a, image_b] : graph_.RankInitPairs()) {
    Log("init_attempt pair=" + std::to_string(image_a) + "," +
        std::to_string(image_b));
    try {
      if (TryInitPair(image_a, image_b)) {
        initialized_ = true;
        return true;
      }
    } catch (const InsufficientMatchesError&) {
      Log("init_skip pair=" + std::to_string(image_a) + "," +
          std::to_string(image_b) + " reason=too-few-matches");
    }
  }
  failure_reason_ =
      "no candidate image pair produced an acceptable two-camera seed";
  return false;
}

IncrementalPipeline::GatheredObservations IncrementalPipeline::Gather2D3D(
    int candidate) const {
  GatheredObservations gathered;
  const ImageState& image = scene_.images.at(candidate);
  for (size_t k = 0; k < image.keypoints.size(); ++k) {
    const int keypoint = static_cast<int>(k);
    const int track_id = graph_.TrackIdOf(candidate, keypoint);
    if (track_id < 0) {
      continue;
    }
    // Resolve the track to an alive point, preferring triangulated
    // structure over single-view lifted points, ties by lowest id.
    int best_point = -1;
    bool best_triangulated = false;
    for (const CorrespondenceGraph::Node& node : graph_.tracks()[track_id]) {
      const int point_id = scene_.PointIdOf(node.image_id, node.keypoint_idx);
      if (point_id < 0) {
        continue;
      }
      const ScenePoint& point = scene_.point(point_id);
      const bool is_triangulated =
          point.provenance == PointProvenance::kTriangulated;
      if (config_.no_lifting && !is_triangulated) {
        continue;
      }
      if (best_point < 0 || (is_triangulated && !best_triangulated) ||
          (is_triangulated == best_triangulated && point_id < best_point)) {
        best_point = point_id;
        best_triangulated = is_triangulated;
      }
    }
    if (best_point < 0) {
      continue;
    }
    const ScenePoint& point = scene_.point(best_point);
    Observation2D3D obs;
    obs.pixel = image.keypoints[k].position;
    obs.point = point.position;
    obs.depth_variance = 0.0;
    if (point.provenance == PointProvenance::kLifted) {
      // Down-weight by the lifting source's prior uncertainty: the first
      // registered observation is the one the point was lifted from.
      for (const Observation& source : point.track) {
        const ImageState& source_image = scene_.images.at(source.image_id);
        if (!source_image.registered) {
          continue;
        }
        const std::optional<double> sigma =
            source_image.prior_sigma.TryInterpolateScalar(
                source_image.keypoints[source.keypoint_idx].position);
        if (sigma.has_value()) {
          obs.depth_variance = *sigma * *sigma;
        }
        break;
      }
    }
    gathered.observations.push_back(obs);
    gathered.point_ids.push_back(best_point);
    gathered.keypoint_idxs.push_back(keypoint);
  }
  return gathered;
}

bool IncrementalPipeline::TryRegister(int candidate) {
  const GatheredObservations gathered = Gather2D3D(candidate);
  if (gathered.observations.size() < 4) {
    Log("skip view=" + std::to_string(candidate) +
        " reason=too-few-matches count=" +
        std::to_string(gathered.observations.size()));
    return false;
  }
  ImageState& image = scene_.images.at(candidate);
  const RansacResult pnp =
      EstimateAbsolutePose(image.intrinsics, gathered.observations,
                           config_.absolute_pose, rng_);
  if (!pnp.success) {
    Log("skip view=" + std::to_string(candidate) + " reason=consensus");
    return false;
  }

  const Reconstruction snapshot = scene_;
  const ScheduleTrigger trigger_snapshot = trigger_;

  image.pose = pnp.pose;
  image.registered = true;
  image.registration_inliers = pnp.num_inliers;
  scene_.registration_order.push_back(candidate);
  Log("register view=" + std::to_string(candidate) +
      " inliers=" + std::to_string(pnp.num_inliers));

  std::vector<DepthScaleObservation> scale_obs;
  for (size_t o = 0; o < gathered.observations.size(); ++o) {
    if (!pnp.inlier_mask[o]) {
      continue;
    }
    const double depth =
        CameraDepth(image.pose, gathered.observations[o].point);
    if (depth > 0.0) {
      scale_obs.push_back({gathered.observations[o].pixel, depth});
    }
  }
  bool scaled = false;
  try {
    ApplyDepthScale(candidate, scale_obs);
    scaled = true;
  } catch (const NoValidObservationsError&) {
  }
  if (!scaled) {
    Log("skip view=" + std::to_string(candidate) + " reason=scale");
    scene_ = snapshot;
    trigger_ = trigger_snapshot;
    return false;
  }

  // Continue the tracks of the consensus points into the new image.
  for (size_t o = 0; o < gathered.observations.size(); ++o) {
    if (!pnp.inlier_mask[o]) {
      continue;
    }
    const ScenePoint& point = scene_.point(gathered.point_ids[o]);
    bool already_observed = false;
    for (const Observation& obs : point.track) {
      if (obs.image_id == candidate) {
        already_observed = true;
        break;
      }
    }
    if (!already_observed) {
      scene_.AddObservation(gathered.point_ids[o],
                            {candidate, gathered.keypoint_idxs[o]});
    }
  }

  const RefinementSchedule schedule =
      PlanRefinement(scene_, trigger_, config_.schedule);
  RunRefinement(schedule);

  if (!config_.no_consistency_check) {
    const ViewCheckReport check =
        CheckView(scene_, candidate, config_.consistency);
    if (!check.accepted) {
      Log("reject view=" + std::to_string(candidate) + " partner=" +
          std::to_string(check.conflicts.front().view_id) +
          " beta=" + Num(check.conflicts.front().beta));
      scene_ = snapshot;
      trigger_ = trigger_snapshot;
      rejected_.insert(candidate);
      return false;
    }
  }

  AugmentWithLiftedPoints(candidate);
  if (schedule.mode == RefinementMode::kGlobal) {
    trigger_ = {scene_.NumRegistered(), scene_.NumAlivePoints()};
  }
  return true;
}

bool IncrementalPipeline::RegisterNextView() {
  std::set<int> registered;
  for (const int image_id : scene_.RegisteredIds()) {
    registered.insert(image_id);
  }
  int tried = 0;
  for (const int candidate :
       graph_.NextViewCandidates(registered, NextViewRanking::kScoreSum)) {
    if (rejected_.count(candidate) > 0) {
      continue;
    }
    if (tried >= config_.candidate_retry_limit) {
      break;
    }
    ++tried;
    if (TryRegister(candidate)) {
      return true;
    }
  }
  return false;
}

void IncrementalPipeline::FinalRefinement() {
  if (scene_.NumRegistered() < 2) {
    return;
  }
  RunRefinement({RefinementMode::kGlobal, {}, config_.schedule.rounds});
}

void IncrementalPipeline::FinalConsistencySweep() {
  if (config_.no_consistency_check) {
    return;
  }
  for (const int view : scene_.RegisteredIds()) {
    ImageState& image = scene_.images.at(view);
    if (!image.registered) {
      continue;  // deregistered earlier in this sweep
    }
    const ViewCheckReport check = CheckView(scene_, view, config_.consistency);
    if (check.accepted) {
      continue;
    }
    image.registered = false;
    std::vector<int> observed_points;
    for (int point_id = 0; point_id < static_cast<int>(scene_.points().size());
         ++point_id) {
      const ScenePoint& point = scene_.point(point_id);
      if (!point.alive) {
        continue;
      }
      for (const Observation& obs : point.track) {
        if (obs.image_id == view) {
          observed_points.push_back(point_id);
          break;
        }
      }
    }
    for (const int point_id : observed_points) {
      scene_.RemoveObservation(point_id, view);
    }
    Log("deregister view=" + std::to_string(view) + " partner=" +
        std::to_string(check.conflicts.front().view_id) +
        " beta=" + Num(check.conflicts.front().beta));
  }
}

PipelineResult IncrementalPipeline::Run() {
  PipelineResult result;
  if (!Initialize()) {
    result.initialization_failed = true;
    result.failure_reason = failure_reason_;
    Log("done registered=0 points=0");
    result.scene = std::move(scene_);
    result.events = std::move(events_);
    return result;
  }
  while (RegisterNextView()) {
  }
  FinalRefinement();
  FinalConsistencySweep();
  Log("done registered=" + std::to_string(scene_.NumRegistered()) +
      " points=" + std::to_string(scene_.NumAlivePoints()));
  result.scene = std::move(scene_);
  result.events = std::move(events_);
  return result;
}

PipelineResult Reconstruct(SceneInputs inputs, const PipelineConfig& config) {
  IncrementalPipeline pipeline(std::move(inputs), config);
  return pipeline.Run();
}

}  // namespace priorsfm
