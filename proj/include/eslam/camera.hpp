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

#pragma once

#include "eslam/types.hpp"

namespace eslam {

/// Pinhole intrinsics with optional radial-tangential distortion.
/// The distortion is applied once, at detection time; everything downstream
/// of the detector sees an ideal pinhole.
struct Camera {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  double k1 = 0.0, k2 = 0.0, p1 = 0.0, p2 = 0.0;
  bool has_distortion = false;

  Camera() = default;
  Camera(double fx_, double fy_, double cx_, double cy_, int w, int h)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h) {}

  /// Intrinsics for pyramid level L, focal and principal point divided by 2^L.
  Camera scaled(int level) const;

  bool in_image(const Vec2& q, double margin = 0.0) const {
    return q.x() >= margin && q.y() >= margin && q.x() <= width - 1 - margin &&
           q.y() <= height - 1 - margin;
  }
};

/// Perspective projection to pixels. Throws BehindCamera when p.z <= 0.
Vec2 project(const Vec3& p, const Camera& cam);

/// Jacobian of project() at p, valid for p.z > 0.
Eigen::Matrix<double, 2, 3> project_jacobian(const Vec3& p, const Camera& cam);

/// Inverse projection: the point at inverse depth rho along the ray of pixel q.
Vec3 back_project(const Vec2& q, double rho, const Camera& cam);

/// Ray direction of pixel q with unit depth, [ (qx-cx)/fx, (qy-cy)/fy, 1 ].
Vec3 homogeneous_ray(const Vec2& q, const Camera& cam);

/// Removes radial-tangential distortion from a pixel position by fixed point
/// iteration on normalized coordinates. Throws NoConvergence after 20 rounds
/// above a 1e-8 normalized residual.
Vec2 undistort_point(const Vec2& q_distorted, const Camera& cam);

/// Maps a unit direction at a distorted pixel through the undistortion locally
/// and renormalizes. Identity when the camera has no distortion.
Vec2 undistort_direction(const Vec2& q_distorted, const Vec2& dir, const Camera& cam);

}  // namespace eslam
