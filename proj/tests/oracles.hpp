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

// Reference implementations used only by tests. Each one is deliberately
// independent of the library code path it checks: matrix series instead of
// closed forms, dense assembly instead of sparse, exhaustive search instead
// of indexed search.

#pragma once

#include "eslam/se3.hpp"
#include "eslam/types.hpp"

#include <Eigen/Dense>

#include <random>

namespace eslam::oracle {

inline Eigen::Matrix4d hat4(const Vec6& xi) {
  Eigen::Matrix4d H = Eigen::Matrix4d::Zero();
  H.topLeftCorner<3, 3>() = skew(xi.tail<3>());
  H.topRightCorner<3, 1>() = xi.head<3>();
  return H;
}

// Matrix exponential by scaling-and-squaring power series.
inline Eigen::Matrix4d exp_series(Eigen::Matrix4d A) {
  int squarings = 0;
  while (A.norm() > 0.25) {
    A *= 0.5;
    ++squarings;
  }
  Eigen::Matrix4d X = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d term = Eigen::Matrix4d::Identity();
  for (int k = 1; k < 40; ++k) {
    term = term * A / static_cast<double>(k);
    X += term;
    if (term.norm() < 1e-18) break;
  }
  for (int i = 0; i < squarings; ++i) X = X * X;
  return X;
}

inline Eigen::Matrix4d to_mat4(const Pose& X) {
  Eigen::Matrix4d M = Eigen::Matrix4d::Identity();
  M.topLeftCorner<3, 3>() = X.R;
  M.topRightCorner<3, 1>() = X.t;
  return M;
}

inline Pose from_mat4(const Eigen::Matrix4d& M) {
  return Pose(M.topLeftCorner<3, 3>(), M.topRightCorner<3, 1>());
}

// Central finite differences of a twist-valued function of a twist increment.
template <typename F>
Mat6 fd_jacobian6(F&& f, double h = 1e-6) {
  Mat6 J;
  for (int i = 0; i < 6; ++i) {
    Vec6 d = Vec6::Zero();
    d[i] = h;
    const Vec6 plus = f(d);
    d[i] = -h;
    const Vec6 minus = f(d);
    J.col(i) = (plus - minus) / (2.0 * h);
  }
  return J;
}

// Central finite differences of a scalar function of an n-vector.
template <typename F>
VecX fd_gradient(F&& f, int n, double h = 1e-6) {
  VecX g(n);
  VecX d = VecX::Zero(n);
  for (int i = 0; i < n; ++i) {
    d[i] = h;
    const double plus = f(d);
    d[i] = -h;
    const double minus = f(d);
    d[i] = 0.0;
    g[i] = (plus - minus) / (2.0 * h);
  }
  return g;
}

inline Vec6 random_twist(std::mt19937_64& rng, double trans_scale, double rot_scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec6 xi;
  for (int i = 0; i < 3; ++i) xi[i] = trans_scale * u(rng);
  for (int i = 3; i < 6; ++i) xi[i] = rot_scale * u(rng);
  return xi;
}

inline Pose random_pose(std::mt19937_64& rng, double trans_scale = 1.0, double rot_scale = 1.0) {
  return exp_se3(random_twist(rng, trans_scale, rot_scale));
}

}  // namespace eslam::oracle
