/*
 * Copyright 2026 The eslam Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "eslam/camera.hpp"

#include "eslam/errors.hpp"

#include <cmath>

namespace eslam {

namespace {

// Forward radial-tangential model on normalized coordinates.
Vec2 distort_normalized(const Vec2& x, const Camera& cam) {
  const double r2 = x.squaredNorm();
  const double radial = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2;
  const double xy = x.x() * x.y();
  return Vec2(x.x() * radial + 2.0 * cam.p1 * xy + cam.p2 * (r2 + 2.0 * x.x() * x.x()),
              x.y() * radial + cam.p1 * (r2 + 2.0 * x.y() * x.y()) + 2.0 * cam.p2 * xy);
}

Mat2 distort_jacobian(const Vec2& x, const Camera& cam) {
  const double r2 = x.squaredNorm();
  const double radial = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2;
  const double d_radial = cam.k1 + 2.0 * cam.k2 * r2;  // d(radial)/d(r2)
  Mat2 J;
  J(0, 0) = radial + 2.0 * x.x() * x.x() * d_radial + 2.0 * cam.p1 * x.y() + 6.0 * cam.p2 * x.x();
  J(0, 1) = 2.0 * x.x() * x.y() * d_radial + 2.0 * cam.p1 * x.x() + 2.0 * cam.p2 * x.y();
  J(1, 0) = J(0, 1);
  J(1, 1) = radial + 2.0 * x.y() * x.y() * d_radial + 6.0 * cam.p1 * x.y() + 2.0 * cam.p2 * x.x();
  return J;
}

}  // namespace

Camera Camera::scaled(int level) const {
  Camera out = *this;
  const double s = 1.0 / static_cast<double>(1 << level);
  out.fx = fx * s;
  out.fy = fy * s;
  out.cx = cx * s;
  out.cy = cy * s;
  out.width = width >> level;
  out.height = height >> level;
  return out;
}

Vec2 project(const Vec3& p, const Camera& cam) {
  if (p.z() <= 0.0) throw BehindCamera();
  const double iz = 1.0 / p.z();
  return Vec2(p.x() * iz * cam.fx + cam.cx, p.y() * iz * cam.fy + cam.cy);
}

Eigen::Matrix<double, 2, 3> project_jacobian(const Vec3& p, const Camera& cam) {
  const double iz = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx * iz, 0.0, -cam.fx * p.x() * iz * iz,
       0.0, cam.fy * iz, -cam.fy * p.y() * iz * iz;
  return J;
}

Vec3 back_project(const Vec2& q, double rho, const Camera& cam) {
  return homogeneous_ray(q, cam) / rho;
}

Vec3 homogeneous_ray(const Vec2& q, const Camera& cam) {
  return Vec3((q.x() - cam.cx) / cam.fx, (q.y() - cam.cy) / cam.fy, 1.0);
}

Vec2 undistort_point(const Vec2& q_distorted, const Camera& cam) {
  if (!cam.has_distortion) return q_distorted;
  const Vec2 xd((q_distorted.x() - cam.cx) / cam.fx, (q_distorted.y() - cam.cy) / cam.fy);
  Vec2 x = xd;
  // Residual threshold is in pixels.
  const auto residual_px = [&](const Vec2& xn) {
    const Vec2 err = distort_normalized(xn, cam) - xd;
    return Vec2(err.x() * cam.fx, err.y() * cam.fy).norm();
  };
  for (int it = 0; it < 20; ++it) {
    if (residual_px(x) < 1e-8) {
      return Vec2(x.x() * cam.fx + cam.cx, x.y() * cam.fy + cam.cy);
    }
    x -= distort_jacobian(x, cam).inverse() * (distort_normalized(x, cam) - xd);
  }
  if (residual_px(x) < 1e-8) {
    return Vec2(x.x() * cam.fx + cam.cx, x.y() * cam.fy + cam.cy);
  }
  throw NoConvergence("undistort_point did not converge");
}

Vec2 undistort_direction(const Vec2& q_distorted, const Vec2& dir, const Camera& cam) {
  if (!cam.has_distortion) return dir.normalized();
  const Vec2 q_u = undistort_point(q_distorted, cam);
  const Vec2 x((q_u.x() - cam.cx) / cam.fx, (q_u.y() - cam.cy) / cam.fy);
  // d(undistorted px)/d(distorted px) = K * Jf^-1 * K^-1 with K = diag(fx, fy).
  const Mat2 J = distort_jacobian(x, cam).inverse();
  Vec2 out(cam.fx * (J(0, 0) * dir.x() / cam.fx + J(0, 1) * dir.y() / cam.fy),
           cam.fy * (J(1, 0) * dir.x() / cam.fx + J(1, 1) * dir.y() / cam.fy));
  return out.normalized();
}

}  // namespace eslam
