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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eslam/camera.hpp"
#include "eslam/errors.hpp"
#include "eslam/se3.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace eslam;

TEST_CASE("exp_se3 zero twist is identity") {
  const Pose X = exp_se3(Vec6::Zero());
  CHECK((X.R - Mat3::Identity()).norm() == doctest::Approx(0.0));
  CHECK(X.t.norm() == doctest::Approx(0.0));
}

TEST_CASE("exp_se3 matches matrix exponential series") {
  Vec6 xi;
  xi << 0.0, 0.0, 0.0, M_PI / 2.0, 0.0, 0.0;
  const Pose X = exp_se3(xi);
  const Eigen::Matrix4d M = oracle::exp_series(oracle::hat4(xi));
  CHECK((oracle::to_mat4(X) - M).norm() < 1e-12);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Vec6 r = oracle::random_twist(rng, 2.0, 3.0 / std::sqrt(3.0));
    const Eigen::Matrix4d ref = oracle::exp_series(oracle::hat4(r));
    CHECK((oracle::to_mat4(exp_se3(r)) - ref).norm() < 1e-11);
  }
}

TEST_CASE("exp_se3 inverse law") {
  Vec6 xi;
  xi << 0.1, -0.2, 0.05, 0.01, 0.02, -0.03;
  const Pose P = exp_se3(xi) * exp_se3(Vec6(-xi));
  CHECK((P.R - Mat3::Identity()).norm() < 1e-14);
  CHECK(P.t.norm() < 1e-14);
}

TEST_CASE("log_se3 identity and pure translation") {
  CHECK(log_se3(Pose::Identity()).norm() == doctest::Approx(0.0));
  Pose X;
  X.t = Vec3(1.0, 2.0, 3.0);
  const Vec6 xi = log_se3(X);
  CHECK((xi.head<3>() - Vec3(1.0, 2.0, 3.0)).norm() < 1e-14);
  CHECK(xi.tail<3>().norm() == doctest::Approx(0.0));
}

TEST_CASE("exp/log round trip up to omega norm 3") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    Vec6 xi = oracle::random_twist(rng, 5.0, 1.0);
    const double target = (i % 2 == 0) ? 1.0 : 3.0;
    if (xi.tail<3>().norm() > 0.0) {
      xi.tail<3>() *= target * std::uniform_real_distribution<double>(0.0, 1.0)(rng) /
                      xi.tail<3>().norm();
    }
    const Vec6 back = log_se3(exp_se3(xi));
    CHECK((back - xi).norm() < 1e-10);
  }
}

TEST_CASE("log_se3 rejects angles near pi") {
  Vec6 xi = Vec6::Zero();
  xi[5] = M_PI - 1e-7;
  CHECK_THROWS_AS(log_se3(exp_se3(xi)), AngleNearPi);
  xi[5] = M_PI - 1e-5;
  CHECK_NOTHROW(log_se3(exp_se3(xi)));
}

TEST_CASE("compose and inverse match the 4x4 matrix oracle") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const Pose a = oracle::random_pose(rng);
    const Pose b = oracle::random_pose(rng);
    const Eigen::Matrix4d ref = oracle::to_mat4(a).inverse() * oracle::to_mat4(b);
    const Pose rel = a.inverse() * b;
    CHECK((oracle::to_mat4(rel) - ref).norm() < 1e-12);

    const Pose round = a * a.inverse();
    CHECK((oracle::to_mat4(round) - Eigen::Matrix4d::Identity()).norm() < 1e-13);
    const Pose left_id = Pose::Identity() * a;
    CHECK((oracle::to_mat4(left_id) - oracle::to_mat4(a)).norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("adjoint satisfies the conjugation identity") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const Pose X = oracle::random_pose(rng, 2.0, 1.2);
    const Vec6 xi = oracle::random_twist(rng, 0.5, 0.5);
    const Pose lhs = exp_se3(adjoint(X) * xi);
    const Pose rhs = X * exp_se3(xi) * X.inverse();
    CHECK((oracle::to_mat4(lhs) - oracle::to_mat4(rhs)).norm() < 1e-9);
  }
}

TEST_CASE("adjoint of a pure rotation is block diagonal") {
  std::mt19937_64 rng(19);
  Pose X = oracle::random_pose(rng, 0.0, 1.0);
  X.t.setZero();
  const Mat6 A = adjoint(X);
  CHECK((A.topLeftCorner<3, 3>() - X.R).norm() < 1e-14);
  CHECK((A.bottomRightCorner<3, 3>() - X.R).norm() < 1e-14);
  CHECK(A.topRightCorner<3, 3>().norm() == doctest::Approx(0.0));
  CHECK(A.bottomLeftCorner<3, 3>().norm() == doctest::Approx(0.0));
}

TEST_CASE("log_derivative_at identity is identity") {
  const Mat6 D = log_derivative_at(Pose::Identity());
  CHECK((D - Mat6::Identity()).norm() < 1e-14);
}

TEST_CASE("log_derivative_at matches finite differences") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const Pose Xe = oracle::random_pose(rng, 0.3, 0.3);
    const Mat6 D = log_derivative_at(Xe);
    const Mat6 Dfd =
        oracle::fd_jacobian6([&](const Vec6& d) { return log_se3(boxplus(Xe, d)); });
    CHECK((D - Dfd).norm() / Dfd.norm() < 1e-5);
  }
}

TEST_CASE("relative pose error Jacobian composed from log derivative and adjoint") {
  // f(d) = log( Xj^-1 * exp(d) * Xk * Xbar^-1 ), the linearization every
  // pose-graph factor uses. Its derivative must be D_log(Xe) * Adj(Xj^-1).
  std::mt19937_64 rng(29);
  for (int i = 0; i < 100; ++i) {
    const Pose Xj = oracle::random_pose(rng, 1.0, 0.8);
    const Pose Xk = oracle::random_pose(rng, 1.0, 0.8);
    const Pose Xbar = boxplus(Xj.inverse() * Xk, oracle::random_twist(rng, 0.05, 0.05));
    const Pose Xe = Xj.inverse() * Xk * Xbar.inverse();
    const Mat6 J = log_derivative_at(Xe) * adjoint(Xj.inverse());
    const Mat6 Jfd = oracle::fd_jacobian6(
        [&](const Vec6& d) { return log_se3(Xj.inverse() * boxplus(Xk, d) * Xbar.inverse()); });
    CHECK((J - Jfd).norm() / Jfd.norm() < 1e-5);
  }
}

TEST_CASE("projection basics and scale invariance") {
  Camera cam(1.0, 1.0, 0.0, 0.0, 2, 2);
  CHECK((project(Vec3(0.0, 0.0, 1.0), cam) - Vec2(0.0, 0.0)).norm() == doctest::Approx(0.0));

  Camera euroc(458.654, 457.296, 367.215, 248.375, 752, 480);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ux(0.0, 751.0), uy(0.0, 479.0), ur(0.1, 10.0);
  for (int i = 0; i < 200; ++i) {
    const Vec2 q(ux(rng), uy(rng));
    const double rho = ur(rng);
    const Vec3 p = back_project(q, rho, euroc);
    CHECK((project(p, euroc) - q).norm() < 1e-12);
    CHECK((project(3.7 * p, euroc) - q).norm() < 1e-10);
  }

  const Vec3 qh = homogeneous_ray(Vec2(euroc.cx, euroc.cy), euroc);
  CHECK((qh - Vec3(0.0, 0.0, 1.0)).norm() == doctest::Approx(0.0));

  CHECK_THROWS_AS(project(Vec3(0.1, 0.0, -1.0), euroc), BehindCamera);
  CHECK_THROWS_AS(project(Vec3(0.1, 0.0, 0.0), euroc), BehindCamera);
}

TEST_CASE("project_jacobian matches finite differences") {
  Camera cam(458.654, 457.296, 367.215, 248.375, 752, 480);
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(u(rng), u(rng), 2.0 + u(rng));
    const auto J = project_jacobian(p, cam);
    const double h = 1e-6;
    for (int c = 0; c < 3; ++c) {
      Vec3 dp = Vec3::Zero();
      dp[c] = h;
      const Vec2 col = (project(p + dp, cam) - project(p - dp, cam)) / (2.0 * h);
      CHECK((J.col(c) - col).norm() / col.norm() < 1e-5);
    }
  }
}

TEST_CASE("undistortion inverts the forward model") {
  Camera cam(458.654, 457.296, 367.215, 248.375, 752, 480);
  cam.k1 = -0.28340811;
  cam.k2 = 0.07395907;
  cam.p1 = 0.00019359;
  cam.p2 = 1.76187114e-05;
  cam.has_distortion = true;

  // Forward-model oracle: distort a normalized point and map to pixels.
  const auto distort_px = [&](const Vec2& q_u) {
    const Vec2 x((q_u.x() - cam.cx) / cam.fx, (q_u.y() - cam.cy) / cam.fy);
    const double r2 = x.squaredNorm();
    const double radial = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2;
    const Vec2 xd(x.x() * radial + 2.0 * cam.p1 * x.x() * x.y() +
                      cam.p2 * (r2 + 2.0 * x.x() * x.x()),
                  x.y() * radial + cam.p1 * (r2 + 2.0 * x.y() * x.y()) +
                      2.0 * cam.p2 * x.x() * x.y());
    return Vec2(xd.x() * cam.fx + cam.cx, xd.y() * cam.fy + cam.cy);
  };

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ux(40.0, 711.0), uy(40.0, 439.0);
  for (int i = 0; i < 200; ++i) {
    const Vec2 qd(ux(rng), uy(rng));
    const Vec2 qu = undistort_point(qd, cam);
    CHECK((distort_px(qu) - qd).norm() < 1e-6);
  }

  const Vec2 pp(cam.cx, cam.cy);
  Camera pure_radial = cam;
  pure_radial.p1 = pure_radial.p2 = 0.0;
  CHECK((undistort_point(pp, pure_radial) - pp).norm() < 1e-9);

  Camera nodist(458.654, 457.296, 367.215, 248.375, 752, 480);
  const Vec2 q(100.0, 200.0);
  CHECK((undistort_point(q, nodist) - q).norm() == doctest::Approx(0.0));
}

TEST_CASE("undistort_direction stays unit and consistent with point map") {
  Camera cam(458.654, 457.296, 367.215, 248.375, 752, 480);
  cam.k1 = -0.28340811;
  cam.k2 = 0.07395907;
  cam.p1 = 0.00019359;
  cam.p2 = 1.76187114e-05;
  cam.has_distortion = true;

  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> ux(60.0, 690.0), uy(60.0, 420.0), ua(0.0, 2.0 * M_PI);
  for (int i = 0; i < 50; ++i) {
    const Vec2 qd(ux(rng), uy(rng));
    const double a = ua(rng);
    const Vec2 dir(std::cos(a), std::sin(a));
    const Vec2 out = undistort_direction(qd, dir, cam);
    CHECK(out.norm() == doctest::Approx(1.0));
    // Finite-difference comparison through undistort_point.
    const double h = 1e-3;
    const Vec2 fd = (undistort_point(qd + h * dir, cam) - undistort_point(qd - h * dir, cam)) /
                    (2.0 * h);
    CHECK((out - fd.normalized()).norm() < 1e-4);
  }
}

TEST_CASE("pose normalize restores orthonormality") {
  std::mt19937_64 rng(47);
  Pose X = oracle::random_pose(rng);
  X.R(0, 0) += 1e-7;
  X.normalize();
  CHECK((X.R * X.R.transpose() - Mat3::Identity()).norm() < 1e-12);
  CHECK(X.R.determinant() == doctest::Approx(1.0));
}

TEST_CASE("camera level scaling halves intrinsics") {
  Camera cam(400.0, 400.0, 320.0, 240.0, 640, 480);
  const Camera c1 = cam.scaled(1);
  CHECK(c1.fx == doctest::Approx(200.0));
  CHECK(c1.cx == doctest::Approx(160.0));
  CHECK(c1.width == 320);
  const Camera c2 = cam.scaled(2);
  CHECK(c2.fy == doctest::Approx(100.0));
  CHECK(c2.height == 120);
}
