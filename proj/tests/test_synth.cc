#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "priorsfm/estimation/relative_pose.h"
#include "priorsfm/eval/pose_metrics.h"
#include "priorsfm/geometry/projection.h"
#include "priorsfm/io/scene_io.h"
#include "priorsfm/synth/synth_scene.h"
#include "priorsfm/util/errors.h"
#include "priorsfm/util/rng.h"
#include "priorsfm/util/stats.h"

using namespace priorsfm;
namespace fs = std::filesystem;

namespace {

PoseSE3 RandomPose(Rng* rng) {
  Eigen::Quaterniond q(rng->Gaussian(), rng->Gaussian(), rng->Gaussian(),
                       rng->Gaussian());
  q.normalize();
  return PoseSE3(q, Eigen::Vector3d(rng->Uniform(-2.0, 2.0),
                                    rng->Uniform(-2.0, 2.0),
                                    rng->Uniform(-2.0, 2.0)));
}

// Applies a global similarity (scale, rotation, translation) to a pose
// set: centers move as s * R * C + t, orientations compose with R.
std::map<int, PoseSE3> TransformPoses(const std::map<int, PoseSE3>& poses,
                                      double scale,
                                      const Eigen::Quaterniond& rotation,
                                      const Eigen::Vector3d& translation) {
  std::map<int, PoseSE3> out;
  for (const auto& [id, pose] : poses) {
    const Eigen::Matrix3d r_new =
        pose.q.toRotationMatrix() * rotation.toRotationMatrix().transpose();
    const Eigen::Vector3d center_new =
        scale * (rotation * pose.Center()) + translation;
    out[id] = PoseSE3(Eigen::Quaterniond(r_new), -(r_new * center_new));
  }
  return out;
}

bool RastersBitEqual(const Raster& a, const Raster& b) {
  return a.width() == b.width() && a.height() == b.height() &&
         a.channels() == b.channels() &&
         std::memcmp(a.data().data(), b.data().data(),
                     a.data().size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("recall integral reproduces hand-computed areas") {
  // Single pair at half the threshold: recall is 0 on [0, tau/2] and 1
  // afterwards, so the normalized area is exactly one half.
  std::vector<PosePairError> single = {{0, 1, 2.5}};
  CHECK(AreaUnderRecall(single, 5.0) == 0.5);

  // Errors {0.5, 2, 30} at tau = 5: (4.5 + 3 + 0) / 15.
  std::vector<PosePairError> three = {{0, 1, 0.5}, {0, 2, 2.0}, {1, 2, 30.0}};
  CHECK(AreaUnderRecall(three, 5.0) == 0.5);

  // An infinite error keeps its slot in the denominator.
  std::vector<PosePairError> with_missing = {
      {0, 1, 0.0}, {0, 2, std::numeric_limits<double>::infinity()}};
  CHECK(AreaUnderRecall(with_missing, 5.0) == 0.5);

  CHECK_THROWS_AS(AreaUnderRecall(single, 0.0), ValidationError);
}

TEST_CASE("recall and area respect their bounds and ordering") {
  Rng rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PosePairError> errors;
    const int n = 1 + rng.UniformInt(0, 8);
    for (int i = 0; i < n; ++i) {
      errors.push_back({0, i + 1, rng.Uniform(0.0, 40.0)});
    }
    double previous_recall = 0.0;
    for (const double tau : {0.5, 2.0, 8.0, 32.0}) {
      const double recall = RecallAt(errors, tau);
      CHECK(recall >= previous_recall);
      previous_recall = recall;
      const double area = AreaUnderRecall(errors, tau);
      CHECK(area >= 0.0);
      CHECK(area <= 1.0);
      CHECK(area <= recall);  // recall is the curve's right endpoint
    }
  }
}

TEST_CASE("pose evaluation scores exact, rotated, and missing estimates") {
  Rng rng(7);
  std::map<int, PoseSE3> reference;
  for (int i = 0; i < 4; ++i) {
    reference[i] = RandomPose(&rng);
  }

  SUBCASE("estimate equal to reference scores 1 at every threshold") {
    const PoseAccuracyReport report =
        EvaluatePoses(reference, reference, {1.0, 5.0, 20.0});
    REQUIRE(report.pair_errors.size() == 6);
    for (const PosePairError& pair : report.pair_errors) {
      CHECK(pair.error_deg <= 1e-9);
    }
    for (const double auc : report.auc) {
      CHECK(auc == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  SUBCASE("a single relative rotation offset is scored exactly") {
    std::map<int, PoseSE3> gt;
    gt[0] = PoseSE3(Eigen::Quaterniond::Identity(), Eigen::Vector3d::Zero());
    gt[1] =
        PoseSE3(Eigen::Quaterniond::Identity(), Eigen::Vector3d(-1, 0, 0));
    std::map<int, PoseSE3> est = gt;
    // Rotating camera 1 about the baseline leaves the relative translation
    // direction fixed, so the pair error is purely the rotation angle.
    const Eigen::Quaterniond twist(
        Eigen::AngleAxisd(DegToRad(2.5), Eigen::Vector3d::UnitX()));
    est[1] = PoseSE3(twist * est[1].q, est[1].t);
    const PoseAccuracyReport report = EvaluatePoses(gt, est, {5.0});
    REQUIRE(report.pair_errors.size() == 1);
    CHECK(report.pair_errors[0].error_deg == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(report.auc[0] == doctest::Approx(0.5).epsilon(1e-9));
  }

  SUBCASE("images missing from the estimate count as infinite error") {
    std::map<int, PoseSE3> partial = reference;
    partial.erase(3);
    const PoseAccuracyReport report = EvaluatePoses(reference, partial, {5.0});
    CHECK(report.num_common == 3);
    REQUIRE(report.pair_errors.size() == 6);
    int infinite = 0;
    for (const PosePairError& pair : report.pair_errors) {
      if (std::isinf(pair.error_deg)) {
        ++infinite;
        CHECK((pair.image_a == 3 || pair.image_b == 3));
      }
    }
    CHECK(infinite == 3);
    CHECK(report.auc[0] == doctest::Approx(0.5).epsilon(1e-9));
  }

  SUBCASE("fewer than two common images is an error") {
    std::map<int, PoseSE3> disjoint;
    disjoint[90] = RandomPose(&rng);
    disjoint[91] = RandomPose(&rng);
    CHECK_THROWS_AS(EvaluatePoses(reference, disjoint, {5.0}),
                    NoCommonImagesError);
    std::map<int, PoseSE3> one_common = disjoint;
    one_common[0] = reference.at(0);
    CHECK_THROWS_AS(EvaluatePoses(reference, one_common, {5.0}),
                    NoCommonImagesError);
  }
}

TEST_CASE("pose evaluation is invariant under global similarities") {
  Rng rng(71);
  std::map<int, PoseSE3> reference;
  std::map<int, PoseSE3> estimate;
  for (int i = 0; i < 5; ++i) {
    reference[i] = RandomPose(&rng);
    // A mildly perturbed estimate so the errors are non-trivial.
    PoseSE3 noisy = reference[i];
    const Eigen::Quaterniond jitter(Eigen::AngleAxisd(
        rng.Uniform(0.0, 0.05),
        Eigen::Vector3d(rng.Gaussian(), rng.Gaussian(), rng.Gaussian())
            .normalized()));
    estimate[i] = PoseSE3(jitter * noisy.q,
                          noisy.t + Eigen::Vector3d(rng.Gaussian(),
                                                    rng.Gaussian(),
                                                    rng.Gaussian()) *
                                        0.01);
  }
  const PoseAccuracyReport base = EvaluatePoses(reference, estimate, {5.0});

  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Quaterniond rotation(rng.Gaussian(), rng.Gaussian(),
                                rng.Gaussian(), rng.Gaussian());
    rotation.normalize();
    const double scale = std::exp(rng.Uniform(-2.0, 2.0));
    const Eigen::Vector3d translation(rng.Uniform(-5.0, 5.0),
                                      rng.Uniform(-5.0, 5.0),
                                      rng.Uniform(-5.0, 5.0));
    const std::map<int, PoseSE3> moved =
        TransformPoses(estimate, scale, rotation, translation);
    const PoseAccuracyReport report = EvaluatePoses(reference, moved, {5.0});
    REQUIRE(report.pair_errors.size() == base.pair_errors.size());
    for (size_t k = 0; k < report.pair_errors.size(); ++k) {
      CHECK(report.pair_errors[k].error_deg ==
            doctest::Approx(base.pair_errors[k].error_deg).epsilon(1e-9));
    }
    CHECK(report.auc[0] == doctest::Approx(base.auc[0]).epsilon(1e-9));
  }
}

TEST_CASE("presets build deterministically and reject unknown names") {
  CHECK_THROWS_WITH_AS(BuildPreset("spiral-galaxy", 1),
                       doctest::Contains("spiral-galaxy"), PresetInvalidError);
  CHECK(PresetNames().size() == 8);

  const SynthScene a = BuildPreset("chain-low-overlap-noisy", 33);
  const SynthScene b = BuildPreset("chain-low-overlap-noisy", 33);
  REQUIRE(a.images.size() == b.images.size());
  for (const auto& [id, image] : a.images) {
    const SynthImage& other = b.images.at(id);
    REQUIRE(image.keypoints.size() == other.keypoints.size());
    for (size_t k = 0; k < image.keypoints.size(); ++k) {
      CHECK(image.keypoints[k].pixel == other.keypoints[k].pixel);
      CHECK(image.keypoints[k].sample == other.keypoints[k].sample);
    }
    CHECK(RastersBitEqual(image.depth_prior, other.depth_prior));
    CHECK(RastersBitEqual(image.normals, other.normals));
  }
  REQUIRE(a.matches.size() == b.matches.size());
  for (size_t p = 0; p < a.matches.size(); ++p) {
    CHECK(a.matches[p].entries.size() == b.matches[p].entries.size());
  }

  const SynthScene c = BuildPreset("chain-low-overlap-noisy", 34);
  bool any_difference = false;
  for (const auto& [id, image] : a.images) {
    const SynthImage& other = c.images.at(id);
    if (image.keypoints.size() != other.keypoints.size()) {
      any_difference = true;
      break;
    }
    for (size_t k = 0; k < image.keypoints.size(); ++k) {
      if (image.keypoints[k].pixel != other.keypoints[k].pixel) {
        any_difference = true;
        break;
      }
    }
  }
  CHECK(any_difference);
}

TEST_CASE("clean presets satisfy the analytic ground-truth contract") {
  for (const std::string name :
       {"orbit-hi-overlap-clean", "chain-low-overlap-clean",
        "forward-low-parallax-clean", "symmetric-rooms-clean"}) {
    CAPTURE(name);
    const SynthScene scene = BuildPreset(name, 5);
    REQUIRE(!scene.images.empty());
    for (const auto& [id, image] : scene.images) {
      CAPTURE(id);
      // Depths positive, normals unit and camera-facing.
      int valid = 0;
      for (int v = 0; v < image.depth_true.height(); ++v) {
        for (int u = 0; u < image.depth_true.width(); ++u) {
          if (!image.depth_true.IsValid(u, v)) {
            continue;
          }
          ++valid;
          CHECK(image.depth_true.at(u, v) > 0.0f);
          CHECK(image.depth_sigma.at(u, v) > 0.0f);
          const Eigen::Vector3d n(image.normals.at(u, v, 0),
                                  image.normals.at(u, v, 1),
                                  image.normals.at(u, v, 2));
          CHECK(n.z() < 0.0);
          CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-6));
        }
      }
      CHECK(valid == image.depth_true.width() * image.depth_true.height());
      // Clean variant: the prior is the analytic truth.
      CHECK(RastersBitEqual(image.depth_prior, image.depth_true));

      // Keypoints are exact projections of their samples.
      REQUIRE(image.keypoints.size() >= 8);
      for (const SynthKeypoint& keypoint : image.keypoints) {
        const Eigen::Vector3d& sample = scene.samples.at(keypoint.sample);
        const Eigen::Vector2d projected =
            Project(image.intrinsics, image.pose, sample);
        CHECK((projected - keypoint.pixel).norm() < 1e-9);
      }
    }
  }
}

TEST_CASE("chain preset is covisible only between consecutive views") {
  const SynthScene scene = BuildPreset("chain-low-overlap-clean", 11);
  REQUIRE(scene.images.size() == 8);
  std::set<std::pair<int, int>> pairs;
  for (const PairMatches& pair : scene.matches) {
    pairs.insert({pair.image_a, pair.image_b});
    CHECK(pair.image_b == pair.image_a + 1);
    CHECK(pair.entries.size() >= 15);
  }
  CHECK(pairs.size() == 7);

  // Union-find over the matches: no track can span more than two views.
  std::map<int, int> keypoint_counts;
  for (const auto& [id, image] : scene.images) {
    keypoint_counts[id] = static_cast<int>(image.keypoints.size());
  }
  CorrespondenceGraph graph;
  graph.Build(keypoint_counts, scene.matches);
  for (const auto& track : graph.tracks()) {
    CHECK(track.size() == 2);
  }
}

TEST_CASE("forward preset stays below the two-view stability gate") {
  const SynthScene scene = BuildPreset("forward-low-parallax-clean", 3);
  // The widest-baseline pair bounds every other pair's parallax.
  const SynthImage& first = scene.images.at(0);
  const SynthImage& last = scene.images.at(7);
  const PairMatches* widest = nullptr;
  for (const PairMatches& pair : scene.matches) {
    if (pair.image_a == 0 && pair.image_b == 7) {
      widest = &pair;
    }
  }
  REQUIRE(widest != nullptr);
  std::vector<Eigen::Vector2d> pixels_a, pixels_b;
  for (const PairMatches::Entry& entry : widest->entries) {
    pixels_a.push_back(first.keypoints[entry.idx_a].pixel);
    pixels_b.push_back(last.keypoints[entry.idx_b].pixel);
  }
  Rng rng(1);
  const RelativePoseReport report =
      EstimateRelativePose(first.intrinsics, last.intrinsics, pixels_a,
                           pixels_b, {}, rng);
  CHECK(report.median_parallax_deg < 1.5);
  CHECK_FALSE(report.stable);
}

TEST_CASE("symmetric preset plants decoy matches on the duplicated block") {
  const SynthScene scene = BuildPreset("symmetric-rooms-clean", 21);
  REQUIRE(scene.decoy_image == 6);
  const int mirror_base = 100000;
  int decoy_pairs = 0;
  for (const PairMatches& pair : scene.matches) {
    if (pair.image_b != scene.decoy_image) {
      CHECK(pair.image_a != scene.decoy_image);  // decoy id sorts last
      continue;
    }
    ++decoy_pairs;
    const std::vector<int>& true_samples =
        scene.keypoint_samples.at(pair.image_a);
    const std::vector<int>& decoy_samples =
        scene.keypoint_samples.at(scene.decoy_image);
    for (const PairMatches::Entry& entry : pair.entries) {
      // Every decoy match targets a mirrored duplicate of the very sample
      // seen by the true view.
      const int decoy_sample = decoy_samples[entry.idx_b];
      CHECK(decoy_sample >= mirror_base);
      CHECK(decoy_sample - mirror_base == true_samples[entry.idx_a]);
      const Eigen::Vector3d& original =
          scene.samples.at(decoy_sample - mirror_base);
      const Eigen::Vector3d& mirrored = scene.samples.at(decoy_sample);
      CHECK(mirrored.x() == -original.x());
      CHECK(mirrored.y() == original.y());
      CHECK(mirrored.z() == -original.z());
    }
  }
  CHECK(decoy_pairs == 6);

  // True pairs must outrank decoy pairs for initialization: the decoy
  // shares only the plain-wall samples, never the slab.
  size_t min_true = std::numeric_limits<size_t>::max();
  size_t max_decoy = 0;
  for (const PairMatches& pair : scene.matches) {
    if (pair.image_b == scene.decoy_image) {
      max_decoy = std::max(max_decoy, pair.entries.size());
    } else {
      min_true = std::min(min_true, pair.entries.size());
    }
  }
  CHECK(min_true > max_decoy);
}

TEST_CASE("written scenes load back through the scene reader") {
  const fs::path dir = fs::temp_directory_path() / "priorsfm_synth_io";
  fs::remove_all(dir);
  const SynthScene scene = BuildPreset("orbit-hi-overlap-noisy", 13);
  WriteScene(scene, dir.string());

  const SceneInputs inputs = LoadScene(dir.string(), {});
  REQUIRE(inputs.scene.images.size() == scene.images.size());
  for (const auto& [id, image] : scene.images) {
    const ImageState& loaded = inputs.scene.images.at(id);
    REQUIRE(loaded.keypoints.size() == image.keypoints.size());
    for (size_t k = 0; k < image.keypoints.size(); ++k) {
      CHECK(loaded.keypoints[k].position.x() ==
            doctest::Approx(image.keypoints[k].pixel.x()).epsilon(1e-15));
    }
    CHECK(loaded.prior_depth.width() == image.depth_prior.width());
    CHECK(loaded.HasDepthPrior());
  }
  REQUIRE(inputs.matches.size() == scene.matches.size());

  const std::map<int, PoseSE3> gt =
      LoadPoses((dir / "poses_gt.txt").string());
  REQUIRE(gt.size() == scene.images.size());
  for (const auto& [id, image] : scene.images) {
    CHECK(gt.at(id).q.w() == image.pose.q.w());
    CHECK(gt.at(id).t.x() == image.pose.t.x());
  }
  for (const auto& [id, image] : scene.images) {
    const Raster truth =
        LoadRaster((dir / ("depth_gt_" + std::to_string(id) + ".mpr"))
                       .string());
    CHECK(RastersBitEqual(truth, image.depth_true));
  }
}
