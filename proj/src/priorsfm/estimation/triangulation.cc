#include "priorsfm/estimation/triangulation.h"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "priorsfm/geometry/projection.h"
#include "priorsfm/util/errors.h"
#include "priorsfm/util/stats.h"

namespace priorsfm {

namespace {

// Total squared pixel reprojection error; infinity when the point falls at or
// behind any camera so the refinement never accepts a cheirality-violating
// step that DLT did not produce.
double ReprojectionCost(const std::vector<TriangulationView>& views,
                        const Eigen::Vector3d& point) {
  double cost = 0.0;
  for (const TriangulationView& view : views) {
    const Eigen::Vector3d p_cam = view.pose.Apply(point);
    if (p_cam.z() <= 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    const Eigen::Vector2d proj = view.intrinsics.PixelFromCamera(p_cam);
    cost += (proj - view.pixel).squaredNorm();
  }
  return cost;
}

}  // namespace

TriangulationResult Triangulate(const std::vector<TriangulationView>& views,
                                double min_parallax_deg) {
  if (views.size() < 2) {
    throw InsufficientMatchesError("triangulation needs at least 2 views");
  }
  TriangulationResult result;

  // DLT on the pixel-space projection matrices, one row pair per view.
  Eigen::MatrixXd a(2 * views.size(), 4);
  for (size_t i = 0; i < views.size(); ++i) {
    const Eigen::Matrix<double, 3, 4> p =
        views[i].intrinsics.K() * views[i].pose.Matrix();
    a.row(2 * i) = views[i].pixel.x() * p.row(2) - p.row(0);
    a.row(2 * i + 1) = views[i].pixel.y() * p.row(2) - p.row(1);
  }
  for (int r = 0; r < a.rows(); ++r) {
    const double norm = a.row(r).norm();
    if (norm > 0.0) {
      a.row(r) /= norm;
    }
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  Eigen::Vector3d point;
  bool linear_ok = std::abs(h(3)) >= 1e-12 && h.allFinite();
  if (linear_ok) {
    point = h.head<3>() / h(3);
  } else {
    // Rank-deficient system (e.g. coincident camera centers): any point on
    // the first viewing ray is as good as any other. Pick unit depth so the
    // cheirality and parallax report below stay well defined.
    point = Lift(views[0].intrinsics, views[0].pose, views[0].pixel, 1.0);
  }

  // Gauss-Newton with backtracking on the reprojection error.
  double cost = linear_ok ? ReprojectionCost(views, point)
                          : std::numeric_limits<double>::infinity();
  if (std::isfinite(cost)) {
    for (int iter = 0; iter < 20; ++iter) {
      Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
      Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
      for (const TriangulationView& view : views) {
        const Eigen::Vector3d p_cam = view.pose.Apply(point);
        const double inv_z = 1.0 / p_cam.z();
        const Eigen::Vector2d proj = view.intrinsics.PixelFromCamera(p_cam);
        const Eigen::Vector2d res = proj - view.pixel;
        Eigen::Matrix<double, 2, 3> j_proj;
        j_proj << view.intrinsics.fx * inv_z, 0.0,
            -view.intrinsics.fx * p_cam.x() * inv_z * inv_z, 0.0,
            view.intrinsics.fy * inv_z,
            -view.intrinsics.fy * p_cam.y() * inv_z * inv_z;
        const Eigen::Matrix<double, 2, 3> j = j_proj * view.pose.R();
        jtj += j.transpose() * j;
        jtr += j.transpose() * res;
      }
      const Eigen::Vector3d step = jtj.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        break;
      }
      double scale = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 8; ++bt) {
        const Eigen::Vector3d candidate = point + scale * step;
        const double candidate_cost = ReprojectionCost(views, candidate);
        if (candidate_cost < cost) {
          point = candidate;
          cost = candidate_cost;
          accepted = true;
          break;
        }
        scale *= 0.5;
      }
      if (!accepted || step.norm() < 1e-12) {
        break;
      }
    }
  }
  result.point = point;

  for (const TriangulationView& view : views) {
    if (view.pose.Apply(point).z() <= 0.0) {
      result.behind_camera = true;
    }
  }

  double max_angle = 0.0;
  for (size_t i = 0; i < views.size(); ++i) {
    for (size_t j = i + 1; j < views.size(); ++j) {
      const Eigen::Vector3d ray_i = point - views[i].pose.Center();
      const Eigen::Vector3d ray_j = point - views[j].pose.Center();
      max_angle = std::max(max_angle, AngleBetweenDirections(ray_i, ray_j));
    }
  }
  result.max_parallax_deg = RadToDeg(max_angle);
  result.low_parallax = result.max_parallax_deg < min_parallax_deg;
  return result;
}

bool TriangulateNormalized(const PoseSE3& pose_ba, const Eigen::Vector2d& xa,
                           const Eigen::Vector2d& xb, Eigen::Vector3d* point) {
  Eigen::Matrix<double, 3, 4> pa = Eigen::Matrix<double, 3, 4>::Zero();
  pa.leftCols<3>() = Eigen::Matrix3d::Identity();
  const Eigen::Matrix<double, 3, 4> pb = pose_ba.Matrix();

  Eigen::Matrix4d a;
  a.row(0) = xa.x() * pa.row(2) - pa.row(0);
  a.row(1) = xa.y() * pa.row(2) - pa.row(1);
  a.row(2) = xb.x() * pb.row(2) - pb.row(0);
  a.row(3) = xb.y() * pb.row(2) - pb.row(1);

  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h(3)) < 1e-12 || !h.allFinite()) {
    return false;
  }
  *point = h.head<3>() / h(3);
  return true;
}

}  // namespace priorsfm
