#include "priorsfm/estimation/essential.h"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "priorsfm/estimation/triangulation.h"

namespace priorsfm {

namespace {

// Similarity transform moving the points to centroid zero and mean distance
// sqrt(2) (Hartley conditioning).
Eigen::Matrix3d NormalizingTransform(const std::vector<Eigen::Vector2d>& points) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const Eigen::Vector2d& p : points) {
    centroid += p;
  }
  centroid /= static_cast<double>(points.size());
  double mean_dist = 0.0;
  for (const Eigen::Vector2d& p : points) {
    mean_dist += (p - centroid).norm();
  }
  mean_dist /= static_cast<double>(points.size());
  const double scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;

  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 0) = scale;
  t(1, 1) = scale;
  t(0, 2) = -scale * centroid.x();
  t(1, 2) = -scale * centroid.y();
  return t;
}

}  // namespace

bool EssentialEightPoint(const std::vector<Eigen::Vector2d>& xa,
                         const std::vector<Eigen::Vector2d>& xb,
                         Eigen::Matrix3d* essential) {
  const int n = static_cast<int>(xa.size());
  if (n < 8 || xb.size() != xa.size()) {
    return false;
  }
  const Eigen::Matrix3d ta = NormalizingTransform(xa);
  const Eigen::Matrix3d tb = NormalizingTransform(xb);

  Eigen::MatrixXd a(n, 9);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d pa = ta * xa[i].homogeneous();
    const Eigen::Vector3d pb = tb * xb[i].homogeneous();
    a.row(i) << pb.x() * pa.x(), pb.x() * pa.y(), pb.x(), pb.y() * pa.x(),
        pb.y() * pa.y(), pb.y(), pa.x(), pa.y(), 1.0;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> e_vec = svd.matrixV().col(8);
  if (!e_vec.allFinite()) {
    return false;
  }
  Eigen::Matrix3d e_norm;
  e_norm << e_vec(0), e_vec(1), e_vec(2), e_vec(3), e_vec(4), e_vec(5),
      e_vec(6), e_vec(7), e_vec(8);

  // Undo conditioning, then force the essential structure.
  const Eigen::Matrix3d e_raw = tb.transpose() * e_norm * ta;
  const Eigen::JacobiSVD<Eigen::Matrix3d> esvd(
      e_raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = esvd.singularValues();
  if (s(1) < 1e-12) {
    return false;
  }
  *essential = esvd.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() *
               esvd.matrixV().transpose();
  return true;
}

double SampsonSquaredPx(const Eigen::Matrix3d& f, const Eigen::Vector2d& ua,
                        const Eigen::Vector2d& ub) {
  const Eigen::Vector3d ha = ua.homogeneous();
  const Eigen::Vector3d hb = ub.homogeneous();
  const Eigen::Vector3d f_a = f * ha;
  const Eigen::Vector3d ft_b = f.transpose() * hb;
  const double numer = hb.dot(f_a);
  const double denom =
      f_a.x() * f_a.x() + f_a.y() * f_a.y() + ft_b.x() * ft_b.x() + ft_b.y() * ft_b.y();
  if (denom < 1e-24) {
    return std::numeric_limits<double>::infinity();
  }
  return numer * numer / denom;
}

Eigen::Matrix3d FundamentalFromEssential(const Eigen::Matrix3d& essential,
                                         const Eigen::Matrix3d& ka,
                                         const Eigen::Matrix3d& kb) {
  return kb.inverse().transpose() * essential * ka.inverse();
}

int DecomposeEssential(const Eigen::Matrix3d& essential,
                       const std::vector<Eigen::Vector2d>& xa,
                       const std::vector<Eigen::Vector2d>& xb,
                       const std::vector<char>& inlier_mask, PoseSE3* pose_ba) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(essential,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0.0) {
    u = -u;
  }
  if (v.determinant() < 0.0) {
    v = -v;
  }
  Eigen::Matrix3d w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;

  const Eigen::Matrix3d r1 = u * w * v.transpose();
  const Eigen::Matrix3d r2 = u * w.transpose() * v.transpose();
  const Eigen::Vector3d t = u.col(2);

  const PoseSE3 candidates[4] = {
      PoseSE3(r1, t), PoseSE3(r1, -t), PoseSE3(r2, t), PoseSE3(r2, -t)};

  int best_count = 0;
  int best_index = -1;
  for (int c = 0; c < 4; ++c) {
    int count = 0;
    for (size_t i = 0; i < xa.size(); ++i) {
      if (!inlier_mask[i]) {
        continue;
      }
      Eigen::Vector3d point;
      if (!TriangulateNormalized(candidates[c], xa[i], xb[i], &point)) {
        continue;
      }
      if (point.z() > 0.0 && candidates[c].Apply(point).z() > 0.0) {
        ++count;
      }
    }
    if (count > best_count) {
      best_count = count;
      best_index = c;
    }
  }
  if (best_index >= 0) {
    *pose_ba = candidates[best_index];
  }
  return best_count;
}

}  // namespace priorsfm
