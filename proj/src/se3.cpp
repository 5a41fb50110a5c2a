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

#include "eslam/se3.hpp"

#include "eslam/errors.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace eslam {

namespace {

constexpr double kTaylorThresh = 1e-8;  // on theta^2

// sin(t)/t, (1-cos(t))/t^2, (t-sin(t))/t^3 with small angle fallbacks.
struct TrigCoeffs {
  double a, b, c;
  explicit TrigCoeffs(double theta) {
    const double t2 = theta * theta;
    if (t2 < kTaylorThresh) {
      a = 1.0 - t2 / 6.0;
      b = 0.5 - t2 / 24.0;
      c = 1.0 / 6.0 - t2 / 120.0;
    } else {
      a = std::sin(theta) / theta;
      b = (1.0 - std::cos(theta)) / t2;
      c = (theta - std::sin(theta)) / (t2 * theta);
    }
  }
};

}  // namespace

void Pose::normalize() {
  Quat q(R);
  q.normalize();
  R = q.toRotationMatrix();
}

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return S;
}

Mat3 exp_so3(const Vec3& omega) {
  const double theta = omega.norm();
  const TrigCoeffs k(theta);
  const Mat3 W = skew(omega);
  return Mat3::Identity() + k.a * W + k.b * W * W;
}

Vec3 log_so3(const Mat3& R) {
  const double cos_theta = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta >= M_PI - 1e-6) throw AngleNearPi();
  const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  double factor;
  if (theta * theta < kTaylorThresh) {
    factor = 0.5 + theta * theta / 12.0;
  } else {
    factor = theta / (2.0 * std::sin(theta));
  }
  return factor * w;
}

Pose exp_se3(const Vec6& xi) {
  const Vec3 v = xi.head<3>();
  const Vec3 omega = xi.tail<3>();
  const double theta = omega.norm();
  const TrigCoeffs k(theta);
  const Mat3 W = skew(omega);
  const Mat3 W2 = W * W;
  Pose X;
  X.R = Mat3::Identity() + k.a * W + k.b * W2;
  const Mat3 V = Mat3::Identity() + k.b * W + k.c * W2;
  X.t = V * v;
  return X;
}

Vec6 log_se3(const Pose& X) {
  const Vec3 omega = log_so3(X.R);
  const double theta = omega.norm();
  const Mat3 W = skew(omega);
  // V^-1 = I - W/2 + e * W^2 with e = (1 - a/(2b)) / theta^2.
  double e;
  if (theta * theta < kTaylorThresh) {
    e = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    const TrigCoeffs k(theta);
    e = (1.0 - k.a / (2.0 * k.b)) / (theta * theta);
  }
  const Mat3 Vinv = Mat3::Identity() - 0.5 * W + e * W * W;
  Vec6 xi;
  xi.head<3>() = Vinv * X.t;
  xi.tail<3>() = omega;
  return xi;
}

Pose boxplus(const Pose& X, const Vec6& delta) { return exp_se3(delta) * X; }

Mat6 adjoint(const Pose& X) {
  Mat6 A = Mat6::Zero();
  A.topLeftCorner<3, 3>() = X.R;
  A.topRightCorner<3, 3>() = skew(X.t) * X.R;
  A.bottomRightCorner<3, 3>() = X.R;
  return A;
}

Mat6 adjoint_algebra(const Vec6& xi) {
  Mat6 A = Mat6::Zero();
  const Mat3 W = skew(xi.tail<3>());
  A.topLeftCorner<3, 3>() = W;
  A.topRightCorner<3, 3>() = skew(xi.head<3>());
  A.bottomRightCorner<3, 3>() = W;
  return A;
}

Mat6 log_derivative_at(const Pose& Xe) {
  // Left Jacobian by its series Jl(xi) = sum_n ad(xi)^n / (n+1)!, then inverted.
  // The series is entire; magnitudes here stay far below the slow-convergence range.
  const Vec6 xi = log_se3(Xe);
  const Mat6 ad = adjoint_algebra(xi);
  Mat6 Jl = Mat6::Identity();
  Mat6 term = Mat6::Identity();
  for (int n = 1; n <= 60; ++n) {
    term = (term * ad) / static_cast<double>(n + 1);
    Jl += term;
    if (term.norm() < 1e-17 * Jl.norm()) break;
  }
  return Jl.inverse();
}

}  // namespace eslam
