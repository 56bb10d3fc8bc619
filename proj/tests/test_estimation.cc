#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "priorsfm/estimation/absolute_pose.h"
#include "priorsfm/estimation/p3p.h"
#include "priorsfm/estimation/ransac.h"
#include "priorsfm/estimation/relative_pose.h"
#include "priorsfm/estimation/triangulation.h"
#include "priorsfm/geometry/projection.h"
#include "priorsfm/util/errors.h"
#include "priorsfm/util/stats.h"

using namespace priorsfm;

namespace {

CameraIntrinsics TestCamera() {
  CameraIntrinsics cam;
  cam.fx = 500.0;
  cam.fy = 500.0;
  cam.cx = 320.0;
  cam.cy = 240.0;
  cam.width = 640;
  cam.height = 480;
  return cam;
}

Eigen::Matrix3d RotY(double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitY()).toRotationMatrix();
}

// Scene points in front of both cameras, drawn fresh from the given stream.
std::vector<Eigen::Vector3d> ScenePoints(Rng& rng, int count, double scale = 1.0) {
  std::vector<Eigen::Vector3d> points;
  points.reserve(count);
  for (int i = 0; i < count; ++i) {
    points.push_back(scale * Eigen::Vector3d(rng.Uniform(-1.5, 1.5),
                                             rng.Uniform(-1.0, 1.0),
                                             rng.Uniform(4.0, 8.0)));
  }
  return points;
}

// Camera pair with roughly a 10-degree baseline relative to the scene depth,
// both looking at the point cloud.
void BaselinePair(double scale, PoseSE3* pose_a, PoseSE3* pose_b) {
  *pose_a = PoseSE3();  // identity, at the origin
  const Eigen::Matrix3d r_b = RotY(DegToRad(-8.0));
  const Eigen::Vector3d center_b = scale * Eigen::Vector3d(1.0, 0.1, 0.05);
  *pose_b = PoseSE3(r_b, -r_b * center_b);
}

}  // namespace

TEST_CASE("adaptive iteration bound matches the closed form") {
  // Frozen from ceil(log(1-0.9999)/log(1-ratio^size)).
  CHECK(AdaptiveIterationBound(0.9999, 0.5, 8, 10000) == 2354);
  CHECK(AdaptiveIterationBound(0.9999, 0.9, 8, 10000) == 17);
  CHECK(AdaptiveIterationBound(0.9999, 0.5, 3, 10000) == 69);
  CHECK(AdaptiveIterationBound(0.9999, 1.0, 8, 10000) == 1);
  CHECK(AdaptiveIterationBound(0.9999, 0.0, 8, 10000) == 10000);
  CHECK(AdaptiveIterationBound(0.9999, 0.05, 8, 10000) == 10000);
}

TEST_CASE("distinct sampling stays in range without repeats") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto sample = SampleDistinct(rng, 12, 8);
    std::set<int> unique(sample.begin(), sample.end());
    CHECK(unique.size() == 8);
    CHECK(*unique.begin() >= 0);
    CHECK(*unique.rbegin() < 12);
  }
  // Same seed, same sequence.
  Rng a(99), b(99);
  CHECK(SampleDistinct(a, 100, 10) == SampleDistinct(b, 100, 10));
}

TEST_CASE("minimal absolute pose solver recovers a known camera") {
  const CameraIntrinsics cam = TestCamera();
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix3d r =
        (Eigen::AngleAxisd(rng.Uniform(-0.4, 0.4), Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(rng.Uniform(-0.3, 0.3), Eigen::Vector3d::UnitX()))
            .toRotationMatrix();
    const PoseSE3 gt(r, Eigen::Vector3d(rng.Uniform(-0.5, 0.5),
                                        rng.Uniform(-0.5, 0.5),
                                        rng.Uniform(-0.2, 0.2)));
    std::array<Eigen::Vector3d, 3> world;
    std::array<Eigen::Vector3d, 3> bearings;
    bool in_front = true;
    for (int k = 0; k < 3; ++k) {
      world[k] = Eigen::Vector3d(rng.Uniform(-1.5, 1.5), rng.Uniform(-1.0, 1.0),
                                 rng.Uniform(4.0, 8.0));
      const Eigen::Vector3d p_cam = gt.Apply(world[k]);
      in_front = in_front && p_cam.z() > 0.0;
      bearings[k] = p_cam.normalized();
    }
    REQUIRE(in_front);
    const auto candidates = SolveP3P(world, bearings);
    REQUIRE(!candidates.empty());
    double best_rot = 1e9;
    double best_trans = 1e9;
    for (const PoseSE3& candidate : candidates) {
      best_rot = std::min(best_rot, RotationAngleBetween(candidate.q, gt.q));
      best_trans = std::min(best_trans, (candidate.t - gt.t).norm());
    }
    CHECK(best_rot < 1e-6);
    CHECK(best_trans < 1e-6);
  }
}

TEST_CASE("minimal absolute pose solver rejects degenerate input") {
  // Collinear world points admit a continuum of poses.
  const std::array<Eigen::Vector3d, 3> collinear = {
      Eigen::Vector3d(0, 0, 5), Eigen::Vector3d(0.5, 0, 5),
      Eigen::Vector3d(1.0, 0, 5)};
  const std::array<Eigen::Vector3d, 3> bearings = {
      Eigen::Vector3d(0, 0, 1).normalized(),
      Eigen::Vector3d(0.1, 0, 1).normalized(),
      Eigen::Vector3d(0.2, 0, 1).normalized()};
  CHECK(SolveP3P(collinear, bearings).empty());
}

TEST_CASE("relative pose from a clean ten-degree baseline") {
  const CameraIntrinsics cam = TestCamera();
  Rng scene_rng(11);
  const auto points = ScenePoints(scene_rng, 30);
  PoseSE3 pose_a, pose_b;
  BaselinePair(1.0, &pose_a, &pose_b);
  const PoseSE3 gt_ba = pose_b * pose_a.Inverse();

  std::vector<Eigen::Vector2d> pixels_a, pixels_b;
  for (const auto& x : points) {
    pixels_a.push_back(Project(cam, pose_a, x));
    pixels_b.push_back(Project(cam, pose_b, x));
  }

  Rng rng(5);
  const RelativePoseOptions options;
  const auto report =
      EstimateRelativePose(cam, cam, pixels_a, pixels_b, options, rng);

  REQUIRE(report.ransac.success);
  CHECK(report.stable);
  CHECK(!report.degenerate);
  CHECK(report.ransac.num_inliers == 30);  // noiseless: everything is an inlier
  CHECK(RotationAngleBetween(report.ransac.pose.q, gt_ba.q) < 1e-5);
  CHECK(AngleBetweenDirections(report.ransac.pose.t, gt_ba.t) < 1e-5);
  CHECK(report.ransac.pose.t.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(report.median_parallax_deg > 5.0);

  // Inlier count always equals the mask popcount.
  int popcount = 0;
  for (char c : report.ransac.inlier_mask) popcount += c != 0;
  CHECK(popcount == report.ransac.num_inliers);
}

TEST_CASE("relative pose flags a pure rotation as unstable") {
  const CameraIntrinsics cam = TestCamera();
  Rng scene_rng(13);
  const auto points = ScenePoints(scene_rng, 40);
  const PoseSE3 pose_a;
  const PoseSE3 pose_b(RotY(DegToRad(6.0)), Eigen::Vector3d::Zero());

  std::vector<Eigen::Vector2d> pixels_a, pixels_b;
  for (const auto& x : points) {
    const Eigen::Vector2d pb = Project(cam, pose_b, x);
    if (!cam.InBounds(pb)) {
      continue;
    }
    pixels_a.push_back(Project(cam, pose_a, x));
    pixels_b.push_back(pb);
  }
  REQUIRE(pixels_a.size() >= 20);

  Rng rng(5);
  const auto report = EstimateRelativePose(cam, cam, pixels_a, pixels_b,
                                           RelativePoseOptions(), rng);
  CHECK(!report.stable);
  CHECK(report.median_parallax_deg < 1.5);
}

TEST_CASE("relative pose recovers a planted inlier set at half outlier rate") {
  const CameraIntrinsics cam = TestCamera();
  Rng scene_rng(17);
  const auto points = ScenePoints(scene_rng, 40);
  PoseSE3 pose_a, pose_b;
  BaselinePair(1.0, &pose_a, &pose_b);

  std::vector<Eigen::Vector2d> pixels_a, pixels_b;
  std::vector<char> planted(points.size(), 1);
  Rng noise_rng(23);
  for (size_t i = 0; i < points.size(); ++i) {
    pixels_a.push_back(Project(cam, pose_a, points[i]));
    Eigen::Vector2d pb = Project(cam, pose_b, points[i]);
    if (i % 2 == 1) {  // plant 50% gross outliers
      planted[i] = 0;
      pb += Eigen::Vector2d(noise_rng.Uniform(25.0, 80.0),
                            noise_rng.Uniform(25.0, 80.0));
    }
    pixels_b.push_back(pb);
  }

  Rng rng(5);
  const auto report = EstimateRelativePose(cam, cam, pixels_a, pixels_b,
                                           RelativePoseOptions(), rng);
  REQUIRE(report.ransac.success);
  CHECK(report.ransac.inlier_mask == planted);
}

TEST_CASE("relative pose throws below the minimal sample size") {
  const CameraIntrinsics cam = TestCamera();
  std::vector<Eigen::Vector2d> pixels(7, Eigen::Vector2d(100, 100));
  Rng rng(1);
  CHECK_THROWS_AS(
      EstimateRelativePose(cam, cam, pixels, pixels, RelativePoseOptions(), rng),
      InsufficientMatchesError);
}

TEST_CASE("relative pose is invariant to uniform scene scaling") {
  const CameraIntrinsics cam = TestCamera();
  PoseSE3 first_pose;
  bool have_first = false;
  for (const double scale : {1.0, 3.7}) {
    Rng scene_rng(19);
    const auto points = ScenePoints(scene_rng, 30, scale);
    PoseSE3 pose_a, pose_b;
    BaselinePair(scale, &pose_a, &pose_b);
    std::vector<Eigen::Vector2d> pixels_a, pixels_b;
    for (const auto& x : points) {
      pixels_a.push_back(Project(cam, pose_a, x));
      pixels_b.push_back(Project(cam, pose_b, x));
    }
    Rng rng(5);
    const auto report = EstimateRelativePose(cam, cam, pixels_a, pixels_b,
                                             RelativePoseOptions(), rng);
    REQUIRE(report.ransac.success);
    if (!have_first) {
      first_pose = report.ransac.pose;
      have_first = true;
    } else {
      CHECK(RotationAngleBetween(first_pose.q, report.ransac.pose.q) < 1e-6);
      CHECK(AngleBetweenDirections(first_pose.t, report.ransac.pose.t) < 1e-6);
    }
  }
}

TEST_CASE("relative pose with a fixed seed is bit-reproducible") {
  const CameraIntrinsics cam = TestCamera();
  Rng scene_rng(29);
  const auto points = ScenePoints(scene_rng, 25);
  PoseSE3 pose_a, pose_b;
  BaselinePair(1.0, &pose_a, &pose_b);
  std::vector<Eigen::Vector2d> pixels_a, pixels_b;
  Rng noise_rng(3);
  for (const auto& x : points) {
    pixels_a.push_back(Project(cam, pose_a, x) +
                       Eigen::Vector2d(noise_rng.Gaussian(0, 0.5),
                                       noise_rng.Gaussian(0, 0.5)));
    pixels_b.push_back(Project(cam, pose_b, x));
  }
  Rng rng1(5), rng2(5);
  const auto r1 = EstimateRelativePose(cam, cam, pixels_a, pixels_b,
                                       RelativePoseOptions(), rng1);
  const auto r2 = EstimateRelativePose(cam, cam, pixels_a, pixels_b,
                                       RelativePoseOptions(), rng2);
  CHECK(r1.ransac.pose.q.coeffs() == r2.ransac.pose.q.coeffs());
  CHECK(r1.ransac.pose.t == r2.ransac.pose.t);
  CHECK(r1.ransac.inlier_mask == r2.ransac.inlier_mask);
  CHECK(r1.ransac.iterations == r2.ransac.iterations);
}

TEST_CASE("absolute pose from clean 2D-3D matches") {
  const CameraIntrinsics cam = TestCamera();
  Rng scene_rng(37);
  const auto points = ScenePoints(scene_rng, 20);
  const Eigen::Matrix3d r = RotY(DegToRad(12.0));
  const Eigen::Vector3d center(0.4, -0.2, 0.3);
  const PoseSE3 gt(r, -r * center);

  std::vector<Observation2D3D> observations;
  for (const auto& x : points) {
    observations.push_back({Project(cam, gt, x), x, 0.0});
  }
  Rng rng(5);
  const auto result =
      EstimateAbsolutePose(cam, observations, AbsolutePoseOptions(), rng);
  REQUIRE(result.success);
  CHECK(result.num_inliers == 20);
  CHECK(RotationAngleBetween(result.pose.q, gt.q) < 1e-6);
  CHECK((result.pose.t - gt.t).norm() < 1e-6);
}

TEST_CASE("absolute pose throws below four correspondences") {
  const CameraIntrinsics cam = TestCamera();
  std::vector<Observation2D3D> observations(3);
  Rng rng(1);
  CHECK_THROWS_AS(
      EstimateAbsolutePose(cam, observations, AbsolutePoseOptions(), rng),
      InsufficientMatchesError);
}

TEST_CASE("absolute pose rejects planted outliers") {
  const CameraIntrinsics cam = TestCamera();
  Rng scene_rng(41);
  const auto points = ScenePoints(scene_rng, 30);
  const Eigen::Matrix3d r = RotY(DegToRad(-9.0));
  const Eigen::Vector3d center(0.8, 0.1, -0.1);
  const PoseSE3 gt(r, -r * center);

  std::vector<Observation2D3D> observations;
  std::vector<char> planted(points.size(), 1);
  Rng noise_rng(43);
  for (size_t i = 0; i < points.size(); ++i) {
    Eigen::Vector2d px = Project(cam, gt, points[i]);
    if (i % 10 < 3) {  // 30% gross outliers
      planted[i] = 0;
      px += Eigen::Vector2d(noise_rng.Uniform(30.0, 90.0),
                            noise_rng.Uniform(30.0, 90.0));
    }
    observations.push_back({px, points[i], 0.0});
  }
  Rng rng(5);
  const auto result =
      EstimateAbsolutePose(cam, observations, AbsolutePoseOptions(), rng);
  REQUIRE(result.success);
  CHECK(result.inlier_mask == planted);
  CHECK(RotationAngleBetween(result.pose.q, gt.q) < DegToRad(0.1));
}

TEST_CASE("absolute pose down-weights uncertain points during refinement") {
  // One point carries both a large depth variance and a biased pixel; the
  // refined pose should stay close to the clean-data optimum.
  const CameraIntrinsics cam = TestCamera();
  Rng scene_rng(47);
  const auto points = ScenePoints(scene_rng, 15);
  const PoseSE3 gt(RotY(DegToRad(4.0)), Eigen::Vector3d(0.1, 0.0, 0.1));

  std::vector<Observation2D3D> observations;
  for (size_t i = 0; i < points.size(); ++i) {
    Eigen::Vector2d px = Project(cam, gt, points[i]);
    double variance = 0.0;
    if (i == 0) {
      px += Eigen::Vector2d(6.0, -6.0);  // inside the 8 px gate, but biased
      variance = 1.0;
    }
    observations.push_back({px, points[i], variance});
  }
  Rng rng(5);
  const auto result =
      EstimateAbsolutePose(cam, observations, AbsolutePoseOptions(), rng);
  REQUIRE(result.success);
  CHECK(RotationAngleBetween(result.pose.q, gt.q) < DegToRad(0.05));
  CHECK((result.pose.t - gt.t).norm() < 0.01);
}

TEST_CASE("triangulation recovers an exact point from two clean views") {
  const CameraIntrinsics cam = TestCamera();
  PoseSE3 pose_a, pose_b;
  BaselinePair(1.0, &pose_a, &pose_b);
  Rng rng(53);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Vector3d x(rng.Uniform(-1.5, 1.5), rng.Uniform(-1.0, 1.0),
                            rng.Uniform(4.0, 8.0));
    const std::vector<TriangulationView> views = {
        {cam, pose_a, Project(cam, pose_a, x)},
        {cam, pose_b, Project(cam, pose_b, x)},
    };
    const auto result = Triangulate(views, 1.5);
    CHECK(!result.behind_camera);
    CHECK(!result.low_parallax);
    CHECK((result.point - x).norm() < 1e-9);
  }
}

TEST_CASE("triangulation from identical poses reports zero parallax") {
  const CameraIntrinsics cam = TestCamera();
  const PoseSE3 pose;
  const std::vector<TriangulationView> views = {
      {cam, pose, Eigen::Vector2d(300, 200)},
      {cam, pose, Eigen::Vector2d(300, 200)},
  };
  const auto result = Triangulate(views, 1.5);
  CHECK(result.low_parallax);
  CHECK(result.max_parallax_deg == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("triangulation reprojection stays bounded under half-pixel noise") {
  const CameraIntrinsics cam = TestCamera();
  const PoseSE3 pose_a;
  const Eigen::Matrix3d r_b = RotY(DegToRad(-8.0));
  const Eigen::Matrix3d r_c = RotY(DegToRad(8.0));
  const PoseSE3 pose_b(r_b, -r_b * Eigen::Vector3d(1.0, 0.0, 0.0));
  const PoseSE3 pose_c(r_c, -r_c * Eigen::Vector3d(-1.0, 0.1, 0.0));

  Rng rng(59);
  std::vector<double> residuals;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector3d x(rng.Uniform(-1.0, 1.0), rng.Uniform(-0.8, 0.8),
                            rng.Uniform(4.0, 7.0));
    std::vector<TriangulationView> views;
    for (const PoseSE3& pose : {pose_a, pose_b, pose_c}) {
      views.push_back({cam, pose,
                       Project(cam, pose, x) + Eigen::Vector2d(
                                                   rng.Gaussian(0.0, 0.5),
                                                   rng.Gaussian(0.0, 0.5))});
    }
    const auto result = Triangulate(views, 1.5);
    REQUIRE(!result.behind_camera);
    for (const auto& view : views) {
      const Eigen::Vector2d proj = Project(cam, view.pose, result.point);
      residuals.push_back((proj - view.pixel).norm());
    }
  }
  CHECK(Rmse(residuals) <= 1.5);
}

TEST_CASE("triangulation flags a point behind a camera") {
  const CameraIntrinsics cam = TestCamera();
  const PoseSE3 pose_a;
  // Second camera far ahead of the point and facing away from it.
  const Eigen::Matrix3d r_b = RotY(kPi);
  const PoseSE3 pose_b(r_b, -r_b * Eigen::Vector3d(0.0, 0.0, 10.0));
  const Eigen::Vector3d x(0.2, 0.1, 5.0);
  // Feed geometrically inconsistent observations: each pixel is the true
  // projection into view a, but view b sees a fabricated pixel; the refined
  // point cannot sit in front of both cameras at once.
  const std::vector<TriangulationView> views = {
      {cam, pose_a, Project(cam, pose_a, x)},
      {cam, pose_b, Eigen::Vector2d(320.0, 240.0)},
  };
  const auto result = Triangulate(views, 1.5);
  CHECK(result.behind_camera);
}
