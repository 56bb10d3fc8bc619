#include "priorsfm/estimation/p3p.h"

#include <cmath>
#include <complex>

namespace priorsfm {

namespace {

// Real roots of A x^4 + B x^3 + C x^2 + D x + E via Ferrari's resolvent in
// complex arithmetic; imaginary parts are dropped, which is harmless here
// because each candidate root is validated geometrically by the caller.
void SolveQuartic(const double factors[5], double roots[4]) {
  const double a = factors[0];
  const double b = factors[1];
  const double c = factors[2];
  const double d = factors[3];
  const double e = factors[4];

  const double a2 = a * a;
  const double b2 = b * b;
  const double a3 = a2 * a;
  const double b3 = b2 * b;
  const double a4 = a3 * a;
  const double b4 = b3 * b;

  const double alpha = -3.0 * b2 / (8.0 * a2) + c / a;
  const double beta = b3 / (8.0 * a3) - b * c / (2.0 * a2) + d / a;
  const double gamma =
      -3.0 * b4 / (256.0 * a4) + b2 * c / (16.0 * a3) - b * d / (4.0 * a2) + e / a;

  const double alpha2 = alpha * alpha;
  const double alpha3 = alpha2 * alpha;

  const std::complex<double> p(-alpha2 / 12.0 - gamma, 0.0);
  const std::complex<double> q(-alpha3 / 108.0 + alpha * gamma / 3.0 - beta * beta / 8.0,
                               0.0);
  const std::complex<double> r =
      -q / 2.0 + std::sqrt(q * q / 4.0 + p * p * p / 27.0);

  const std::complex<double> u = std::pow(r, 1.0 / 3.0);
  std::complex<double> y;
  if (u.real() == 0.0) {
    y = -5.0 * alpha / 6.0 - std::pow(q, 1.0 / 3.0);
  } else {
    y = -5.0 * alpha / 6.0 - p / (3.0 * u) + u;
  }

  const std::complex<double> w = std::sqrt(alpha + 2.0 * y);
  const double shift = -b / (4.0 * a);

  roots[0] = (shift + 0.5 * (w + std::sqrt(-(3.0 * alpha + 2.0 * y + 2.0 * beta / w)))).real();
  roots[1] = (shift + 0.5 * (w - std::sqrt(-(3.0 * alpha + 2.0 * y + 2.0 * beta / w)))).real();
  roots[2] = (shift + 0.5 * (-w + std::sqrt(-(3.0 * alpha + 2.0 * y - 2.0 * beta / w)))).real();
  roots[3] = (shift + 0.5 * (-w - std::sqrt(-(3.0 * alpha + 2.0 * y - 2.0 * beta / w)))).real();
}

// Orthonormal frame whose rows are (f1, f1xf2 x f1 completed, f1xf2); false if
// the bearings are parallel.
bool IntermediateFrame(const Eigen::Vector3d& f1, const Eigen::Vector3d& f2,
                       Eigen::Matrix3d* t) {
  const Eigen::Vector3d e1 = f1;
  Eigen::Vector3d e3 = f1.cross(f2);
  const double norm = e3.norm();
  if (norm < 1e-12) {
    return false;
  }
  e3 /= norm;
  const Eigen::Vector3d e2 = e3.cross(e1);
  t->row(0) = e1;
  t->row(1) = e2;
  t->row(2) = e3;
  return true;
}

}  // namespace

std::vector<PoseSE3> SolveP3P(const std::array<Eigen::Vector3d, 3>& world,
                              const std::array<Eigen::Vector3d, 3>& bearings) {
  std::vector<PoseSE3> poses;

  Eigen::Vector3d p1 = world[0];
  Eigen::Vector3d p2 = world[1];
  Eigen::Vector3d p3 = world[2];
  if ((p2 - p1).cross(p3 - p1).norm() < 1e-12) {
    return poses;  // collinear world points
  }

  Eigen::Vector3d f1 = bearings[0].normalized();
  Eigen::Vector3d f2 = bearings[1].normalized();
  Eigen::Vector3d f3 = bearings[2].normalized();

  Eigen::Matrix3d t_frame;
  if (!IntermediateFrame(f1, f2, &t_frame)) {
    return poses;
  }
  Eigen::Vector3d f3t = t_frame * f3;

  // Keep theta in [0, pi] by swapping the first two correspondences if needed.
  if (f3t.z() > 0.0) {
    std::swap(f1, f2);
    std::swap(p1, p2);
    if (!IntermediateFrame(f1, f2, &t_frame)) {
      return poses;
    }
    f3t = t_frame * f3;
  }
  if (std::abs(f3t.z()) < 1e-12) {
    return poses;  // third bearing lies in the epipolar-like plane
  }

  // Intermediate world frame spanned by the three points.
  Eigen::Vector3d n1 = p2 - p1;
  const double d_12 = n1.norm();
  if (d_12 < 1e-12) {
    return poses;
  }
  n1 /= d_12;
  Eigen::Vector3d n3 = n1.cross(p3 - p1);
  if (n3.norm() < 1e-12) {
    return poses;
  }
  n3.normalize();
  const Eigen::Vector3d n2 = n3.cross(n1);
  Eigen::Matrix3d n_frame;
  n_frame.row(0) = n1;
  n_frame.row(1) = n2;
  n_frame.row(2) = n3;

  const Eigen::Vector3d p3_local = n_frame * (p3 - p1);

  const double f_1 = f3t.x() / f3t.z();
  const double f_2 = f3t.y() / f3t.z();
  const double p_1 = p3_local.x();
  const double p_2 = p3_local.y();

  const double cos_beta = f1.dot(f2);
  const double denom = 1.0 - cos_beta * cos_beta;
  if (denom < 1e-12) {
    return poses;
  }
  double b = std::sqrt(1.0 / denom - 1.0);
  if (cos_beta < 0.0) {
    b = -b;
  }

  const double f_1_2 = f_1 * f_1;
  const double f_2_2 = f_2 * f_2;
  const double p_1_2 = p_1 * p_1;
  const double p_1_3 = p_1_2 * p_1;
  const double p_1_4 = p_1_3 * p_1;
  const double p_2_2 = p_2 * p_2;
  const double p_2_3 = p_2_2 * p_2;
  const double p_2_4 = p_2_3 * p_2;
  const double d_12_2 = d_12 * d_12;
  const double b_2 = b * b;

  double factors[5];
  factors[0] = -f_2_2 * p_2_4 - p_2_4 * f_1_2 - p_2_4;
  factors[1] = 2.0 * p_2_3 * d_12 * b + 2.0 * f_2_2 * p_2_3 * d_12 * b -
               2.0 * f_2 * p_2_3 * f_1 * d_12;
  factors[2] = -f_2_2 * p_2_2 * p_1_2 - f_2_2 * p_2_2 * d_12_2 * b_2 -
               f_2_2 * p_2_2 * d_12_2 + f_2_2 * p_2_4 + p_2_4 * f_1_2 +
               2.0 * p_1 * p_2_2 * d_12 +
               2.0 * f_1 * f_2 * p_1 * p_2_2 * d_12 * b -
               p_2_2 * p_1_2 * f_1_2 + 2.0 * p_1 * p_2_2 * f_2_2 * d_12 -
               p_2_2 * d_12_2 * b_2 - 2.0 * p_1_2 * p_2_2;
  factors[3] = 2.0 * p_1_2 * p_2 * d_12 * b + 2.0 * f_2 * p_2_3 * f_1 * d_12 -
               2.0 * f_2_2 * p_2_3 * d_12 * b - 2.0 * p_1 * p_2 * d_12_2 * b;
  factors[4] = -2.0 * f_2 * p_2_2 * f_1 * p_1 * d_12 * b +
               f_2_2 * p_2_2 * d_12_2 + 2.0 * p_1_3 * d_12 - p_1_2 * d_12_2 +
               f_2_2 * p_2_2 * p_1_2 - p_1_4 -
               2.0 * f_2_2 * p_2_2 * p_1 * d_12 + p_2_2 * f_1_2 * p_1_2 +
               f_2_2 * p_2_2 * d_12_2 * b_2;

  double roots[4];
  SolveQuartic(factors, roots);

  for (int i = 0; i < 4; ++i) {
    const double cos_theta = roots[i];
    if (!std::isfinite(cos_theta) || std::abs(cos_theta) >= 1.0) {
      continue;
    }
    const double cot_alpha =
        (-f_1 * p_1 / f_2 - cos_theta * p_2 + d_12 * b) /
        (-f_1 * cos_theta * p_2 / f_2 + p_1 - d_12);
    if (!std::isfinite(cot_alpha)) {
      continue;
    }
    const double sin_theta = std::sqrt(1.0 - cos_theta * cos_theta);
    const double sin_alpha = std::sqrt(1.0 / (cot_alpha * cot_alpha + 1.0));
    double cos_alpha = std::sqrt(1.0 - sin_alpha * sin_alpha);
    if (cot_alpha < 0.0) {
      cos_alpha = -cos_alpha;
    }

    Eigen::Matrix3d r_local;
    r_local << -cos_alpha, -sin_alpha * cos_theta, -sin_alpha * sin_theta,
        sin_alpha, -cos_alpha * cos_theta, -cos_alpha * sin_theta,
        0.0, -sin_theta, cos_theta;

    const Eigen::Matrix3d r = t_frame.transpose() * r_local * n_frame;
    const Eigen::Vector3d center_local(
        d_12 * cos_alpha * (sin_alpha * b + cos_alpha),
        cos_theta * d_12 * sin_alpha * (sin_alpha * b + cos_alpha),
        sin_theta * d_12 * sin_alpha * (sin_alpha * b + cos_alpha));
    const Eigen::Vector3d trans = -(r * (p1 + n_frame.transpose() * center_local));
    if (!trans.allFinite() || !r.allFinite()) {
      continue;
    }
    poses.emplace_back(r, trans);
  }
  return poses;
}

}  // namespace priorsfm
