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

/// Rigid transform. Applies as p' = R * p + t.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& R_, const Vec3& t_) : R(R_), t(t_) {}

  static Pose Identity() { return Pose(); }

  Vec3 operator*(const Vec3& p) const { return R * p + t; }

  Pose operator*(const Pose& rhs) const { return Pose(R * rhs.R, R * rhs.t + t); }

  Pose inverse() const { return Pose(R.transpose(), -(R.transpose() * t)); }

  /// Re-orthonormalizes R through the closest quaternion.
  void normalize();
};

Mat3 skew(const Vec3& v);

Mat3 exp_so3(const Vec3& omega);

/// Rotation log. Throws AngleNearPi when the angle is within 1e-6 of pi.
Vec3 log_so3(const Mat3& R);

/// Twist convention is [v; omega], translation first.
Pose exp_se3(const Vec6& xi);

/// Inverse of exp_se3 on its principal branch. Throws AngleNearPi near angle pi.
Vec6 log_se3(const Pose& X);

/// Left increment: exp(delta) * X.
Pose boxplus(const Pose& X, const Vec6& delta);

/// Adjoint, pinned by exp(adjoint(X) * xi) == X * exp(xi) * X.inverse().
Mat6 adjoint(const Pose& X);

/// adjoint of the algebra element, ad(xi) = d/dt adjoint(exp(t xi)).
Mat6 adjoint_algebra(const Vec6& xi);

/// Derivative of the log map under a left increment,
/// d/d delta log_se3(exp(delta) * Xe) at delta = 0. Identity when Xe is identity.
Mat6 log_derivative_at(const Pose& Xe);

}  // namespace eslam
