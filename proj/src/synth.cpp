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

#include "eslam/synth.hpp"

#include "eslam/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace eslam {

namespace {

constexpr double kMinDepth = 0.05;
constexpr double kSampleSpacingPx = 1.0;

Pose look_at(const Vec3& eye, const Vec3& target) {
  // Camera axes: x right, y down, z forward; world up is +z.
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(Vec3(0.0, 0.0, 1.0));
  if (x.norm() < 1e-9) x = Vec3(1.0, 0.0, 0.0);  // looking straight up/down
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = z;
  return Pose(R, eye);
}

void add_box_edges(WireScene& scene, const Vec3& h, int& next_id) {
  const double xs[2] = {-h.x(), h.x()};
  const double ys[2] = {-h.y(), h.y()};
  const double zs[2] = {-h.z(), h.z()};
  const auto add = [&](const Vec3& a, const Vec3& b) {
    scene.segments.push_back({next_id++, {a, b}});
  };
  for (double y : ys)
    for (double z : zs) add(Vec3(xs[0], y, z), Vec3(xs[1], y, z));
  for (double x : xs)
    for (double z : zs) add(Vec3(x, ys[0], z), Vec3(x, ys[1], z));
  for (double x : xs)
    for (double y : ys) add(Vec3(x, y, zs[0]), Vec3(x, y, zs[1]));
}

}  // namespace

Vec3 WireScene::centroid() const {
  Vec3 c = Vec3::Zero();
  std::size_t n = 0;
  for (const auto& s : segments) {
    for (const auto& p : s.pts) {
      c += p;
      ++n;
    }
  }
  return n ? Vec3(c / static_cast<double>(n)) : c;
}

WireScene generate_scene(SceneKind kind, std::uint64_t seed, const SceneConfig& cfg) {
  WireScene scene;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int next_id = 0;

  switch (kind) {
    case SceneKind::kBoxRoom: {
      add_box_edges(scene, cfg.half_extent, next_id);
      const Vec3 inner = 0.85 * cfg.half_extent;
      for (int i = 0; i < cfg.clutter; ++i) {
        Vec3 a, b;
        for (int tries = 0; tries < 100; ++tries) {
          a = Vec3(u(rng) * inner.x(), u(rng) * inner.y(), u(rng) * inner.z());
          b = Vec3(u(rng) * inner.x(), u(rng) * inner.y(), u(rng) * inner.z());
          if ((b - a).norm() >= cfg.min_segment_len) break;
        }
        scene.segments.push_back({next_id++, {a, b}});
      }
      break;
    }
    case SceneKind::kManhattanGrid: {
      const Vec3 h = cfg.half_extent;
      for (int i = 0; i < cfg.grid_n; ++i) {
        for (int j = 0; j < cfg.grid_n; ++j) {
          const double fi = cfg.grid_n == 1 ? 0.0 : -1.0 + 2.0 * i / (cfg.grid_n - 1);
          const double fj = cfg.grid_n == 1 ? 0.0 : -1.0 + 2.0 * j / (cfg.grid_n - 1);
          scene.segments.push_back(
              {next_id++, {Vec3(-h.x(), fi * h.y(), fj * h.z()), Vec3(h.x(), fi * h.y(), fj * h.z())}});
          scene.segments.push_back(
              {next_id++, {Vec3(fi * h.x(), -h.y(), fj * h.z()), Vec3(fi * h.x(), h.y(), fj * h.z())}});
          scene.segments.push_back(
              {next_id++, {Vec3(fi * h.x(), fj * h.y(), -h.z()), Vec3(fi * h.x(), fj * h.y(), h.z())}});
        }
      }
      break;
    }
    case SceneKind::kRandomCurves: {
      const Vec3 inner = 0.9 * cfg.half_extent;
      for (int c = 0; c < cfg.curves; ++c) {
        Vec3 ctrl[4];
        for (auto& p : ctrl) p = Vec3(u(rng) * inner.x(), u(rng) * inner.y(), u(rng) * inner.z());
        WireSegment seg;
        seg.id = next_id++;
        const int n = 32;
        for (int i = 0; i < n; ++i) {
          const double t = static_cast<double>(i) / (n - 1);
          const double s = 1.0 - t;
          // Cubic Bezier stays inside the control hull, so inside the box.
          seg.pts.push_back(s * s * s * ctrl[0] + 3.0 * s * s * t * ctrl[1] +
                            3.0 * s * t * t * ctrl[2] + t * t * t * ctrl[3]);
        }
        scene.segments.push_back(std::move(seg));
      }
      break;
    }
  }
  return scene;
}

namespace {

// Rounded square in the z = 0 plane, centered at the origin.
struct RoundedSquare {
  double side, r;
  double straight, perimeter;

  RoundedSquare(double side_, double r_)
      : side(side_), r(r_), straight(side_ - 2.0 * r_),
        perimeter(4.0 * (side_ - 2.0 * r_) + 2.0 * M_PI * r_) {}

  void eval(double u, Vec3& pos, Vec3& tan) const {
    u = std::fmod(u, perimeter);
    if (u < 0.0) u += perimeter;
    const double h = side / 2.0;
    const double quarter = M_PI * r / 2.0;
    // Repeating unit: straight run then a quarter arc, four times, starting
    // at the middle of the south side heading east.
    double base_x = -straight / 2.0, base_y = -h;
    double dir = 0.0;  // heading angle, 0 = +x
    for (int leg = 0; leg < 4; ++leg) {
      if (u <= straight) {
        const Vec2 d(std::cos(dir), std::sin(dir));
        pos = Vec3(base_x + d.x() * u, base_y + d.y() * u, 0.0);
        tan = Vec3(d.x(), d.y(), 0.0);
        return;
      }
      u -= straight;
      const double cx = base_x + std::cos(dir) * straight - std::sin(dir) * r;
      const double cy = base_y + std::sin(dir) * straight + std::cos(dir) * r;
      if (u <= quarter) {
        const double a = dir - M_PI / 2.0 + u / r;
        pos = Vec3(cx + r * std::cos(a), cy + r * std::sin(a), 0.0);
        tan = Vec3(-std::sin(a), std::cos(a), 0.0);
        return;
      }
      u -= quarter;
      const double end_a = dir;
      base_x = cx + r * std::cos(end_a);
      base_y = cy + r * std::sin(end_a);
      dir += M_PI / 2.0;
    }
    pos = Vec3(-straight / 2.0, -h, 0.0);
    tan = Vec3(1.0, 0.0, 0.0);
  }
};

}  // namespace

std::vector<Pose> generate_trajectory(TrajectoryKind kind, int n_frames, std::uint64_t seed,
                                      const TrajectoryConfig& cfg) {
  (void)seed;  // shapes are deterministic; parameter kept for interface stability
  std::vector<Pose> poses;
  poses.reserve(n_frames);

  switch (kind) {
    case TrajectoryKind::kOrbit: {
      for (int i = 0; i < n_frames; ++i) {
        const double th = cfg.orbit_sweep * i / n_frames;
        const Vec3 eye(cfg.orbit_radius * std::cos(th), cfg.orbit_radius * std::sin(th),
                       0.15 * std::sin(2.0 * th));
        poses.push_back(look_at(eye, Vec3::Zero()));
      }
      break;
    }
    case TrajectoryKind::kSquareLoop: {
      const RoundedSquare sq(cfg.square_side, cfg.square_corner_radius);
      for (int i = 0; i < n_frames; ++i) {
        const double u = sq.perimeter * i / (n_frames - 1);
        Vec3 pos, tan;
        sq.eval(u, pos, tan);
        poses.push_back(look_at(pos, pos + tan));
      }
      break;
    }
    case TrajectoryKind::kStraight: {
      const Vec3 p0(0.0, -1.5, 0.0);
      const Vec3 dir(0.0, 1.0, 0.0);
      const Pose base = look_at(p0, p0 + dir);
      for (int i = 0; i < n_frames; ++i) {
        Pose X = base;
        X.t = p0 + dir * (cfg.straight_length * i / (n_frames - 1));
        poses.push_back(X);
      }
      break;
    }
  }
  return poses;
}

RenderedFrame render(const WireScene& scene, const Pose& pose, const Camera& K, double noise_px,
                     std::uint64_t seed) {
  RenderedFrame out;
  out.pose = pose;
  out.edgemap.intrinsics = K;
  out.edgemap.level = 0;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Pose world_to_cam = pose.inverse();

  for (const auto& seg : scene.segments) {
    double base_arclen = 0.0;
    int prev_index = kNoLink;
    for (std::size_t p = 0; p + 1 < seg.pts.size(); ++p) {
      const Vec3 a = world_to_cam * seg.pts[p];
      const Vec3 b = world_to_cam * seg.pts[p + 1];
      const double len = (seg.pts[p + 1] - seg.pts[p]).norm();
      if (len <= 0.0) continue;
      const Vec3 dir_cam = (b - a) / len;

      // Straight pieces have linear depth; restrict to the visible interval.
      double s_lo = 0.0, s_hi = len;
      const double dz = b.z() - a.z();
      if (std::abs(dz) < 1e-12) {
        if (a.z() < kMinDepth) {
          base_arclen += len;
          prev_index = kNoLink;
          continue;
        }
      } else {
        const double s_cross = (kMinDepth - a.z()) * len / dz;
        if (dz > 0.0) s_lo = std::max(s_lo, s_cross);
        else s_hi = std::min(s_hi, s_cross);
        if (s_lo >= s_hi) {
          base_arclen += len;
          prev_index = kNoLink;
          continue;
        }
      }

      double s = s_lo;
      int guard = 0;
      while (s < s_hi && ++guard < 200000) {
        const Vec3 P = a + dir_cam * s;
        const double px_per_m = (project_jacobian(P, K) * dir_cam).norm();
        const double step = kSampleSpacingPx / std::max(px_per_m, 1e-6);
        const double s_emit = s + jitter(rng) * step;
        s += step;
        if (s_emit >= s_hi) break;
        const Vec3 Pe = a + dir_cam * s_emit;
        const Vec2 q = project(Pe, K);

        // Normal of the projected tangent, consistent across frames because
        // the parametrization direction is stable per segment.
        const Vec2 tan2 = (project_jacobian(Pe, K) * dir_cam).normalized();
        const Vec2 m(-tan2.y(), tan2.x());
        const Vec2 q_noisy = q + m * (noise_px > 0.0 ? gauss(rng) * noise_px : 0.0);

        if (!K.in_image(q_noisy)) {
          prev_index = kNoLink;
          continue;
        }

        Edgepoint ep;
        ep.q = q_noisy;
        ep.m = m;
        ep.sigma = std::max(noise_px, 0.25);
        ep.side_intensity[0] = 148.0f;
        ep.side_intensity[1] = 108.0f;
        const int idx = static_cast<int>(out.edgemap.points.size());
        if (prev_index != kNoLink) {
          ep.prev = prev_index;
          out.edgemap.points[prev_index].next = idx;
        }
        out.edgemap.points.push_back(ep);
        out.true_depths.push_back(Pe.z());
        out.true_ids.push_back({seg.id, base_arclen + s_emit});
        prev_index = idx;
      }
      base_arclen += len;
    }
  }
  return out;
}

std::vector<RenderedFrame> render_pyramid(const WireScene& scene, const Pose& pose,
                                          const Camera& K, int levels, double noise_px,
                                          std::uint64_t seed) {
  std::vector<RenderedFrame> out;
  out.reserve(levels);
  for (int l = 0; l < levels; ++l) {
    RenderedFrame f = render(scene, pose, K.scaled(l), noise_px, seed + 0x9e3779b97f4a7c15ULL * l);
    f.edgemap.level = l;
    out.push_back(std::move(f));
  }
  return out;
}

bool chains_symmetric(const Edgemap& em) {
  for (std::size_t i = 0; i < em.points.size(); ++i) {
    const auto& p = em.points[i];
    if (p.next != kNoLink && em.points[p.next].prev != static_cast<int>(i)) return false;
    if (p.prev != kNoLink && em.points[p.prev].next != static_cast<int>(i)) return false;
  }
  return true;
}

void write_scene_text(const WireScene& scene, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw MissingFile(path);
  for (const auto& seg : scene.segments) {
    f << seg.id;
    for (const auto& p : seg.pts) f << " " << p.x() << " " << p.y() << " " << p.z();
    f << "\n";
  }
}

void write_pose_text(const std::vector<Pose>& poses, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw MissingFile(path);
  for (const auto& X : poses) {
    const Quat q(X.R);
    f << X.t.x() << " " << X.t.y() << " " << X.t.z() << " " << q.x() << " " << q.y() << " "
      << q.z() << " " << q.w() << "\n";
  }
}

}  // namespace eslam
