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

#include "eslam/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eslam/camera.hpp"
#include "eslam/errors.hpp"
#include "eslam/index_image.hpp"
#include "eslam/residual.hpp"

namespace eslam {

namespace {

struct Match {
  int cur = kNoLink;
  int next = kNoLink;
  double w = 1.0;
  double sigma = 1.0;
};

// One re-matching sweep at a fixed pose: reproject, nearest lookup, gate.
std::vector<Match> rebuild_matches(const Edgemap& cur, const std::vector<double>& rho,
                                   const Edgemap& next, const IndexImage& idx, const Pose& pose,
                                   const TrackerConfig& cfg) {
  std::vector<Match> out;
  const Camera& K = next.intrinsics;
  for (std::size_t i = 0; i < cur.points.size(); ++i) {
    const Edgepoint& a = cur.points[i];
    if (!a.enabled || rho[i] <= 0.0) continue;
    const Vec3 p = pose.R * edge_ray(a, cur.intrinsics) + pose.t * rho[i];
    if (p.z() <= 0.0) continue;
    const Vec2 qp = project(p, K);
    if (!K.in_image(qp)) continue;
    const int j = idx.nearest(qp);
    if (j == kEmptyCell) continue;
    const Edgepoint& b = next.points[j];
    if (!gate_match(a, b, cfg)) continue;
    const double e = (b.q - qp).dot(b.m);
    out.push_back({static_cast<int>(i), j, robust_weight(e, cfg.huber_eps), b.sigma});
  }
  return out;
}

// Sum of squared weighted residuals for frozen matches and weights.
// Infinite when any matched point leaves the frustum.
double frozen_cost(const std::vector<Match>& ms, const Edgemap& cur,
                   const std::vector<double>& rho, const Edgemap& next, const Pose& pose) {
  const Camera& K = next.intrinsics;
  double sum = 0.0;
  for (const Match& m : ms) {
    const Edgepoint& a = cur.points[m.cur];
    const Edgepoint& b = next.points[m.next];
    const Vec3 p = pose.R * edge_ray(a, cur.intrinsics) + pose.t * rho[m.cur];
    if (p.z() <= 0.0) return std::numeric_limits<double>::infinity();
    const double e = (b.q - project(p, K)).dot(b.m);
    const double f = m.w / m.sigma * e;
    sum += f * f;
  }
  return sum;
}

}  // namespace

bool gate_match(const Edgepoint& a, const Edgepoint& b, const TrackerConfig& cfg) {
  const double cos_max = std::cos(cfg.theta_max_deg * M_PI / 180.0);
  if (a.m.dot(b.m) <= cos_max) return false;
  if (cfg.intensity_gate) {
    if (std::abs(a.side_intensity[0] - b.side_intensity[0]) >= cfg.intensity_max) return false;
    if (std::abs(a.side_intensity[1] - b.side_intensity[1]) >= cfg.intensity_max) return false;
  }
  return true;
}

std::vector<double> smooth_depth(const Edgemap& em, int radius) {
  std::vector<double> out(em.points.size(), 0.0);
  for (std::size_t i = 0; i < em.points.size(); ++i) {
    if (em.points[i].rho <= 0.0) continue;
    double sum = em.points[i].rho;
    int count = 1;
    int p = em.points[i].prev, n = em.points[i].next;
    for (int step = 0; step < radius; ++step) {
      if (p != kNoLink) {
        if (em.points[p].rho > 0.0) {
          sum += em.points[p].rho;
          ++count;
        }
        p = em.points[p].prev;
      }
      if (n != kNoLink) {
        if (em.points[n].rho > 0.0) {
          sum += em.points[n].rho;
          ++count;
        }
        n = em.points[n].next;
      }
    }
    out[i] = sum / count;
  }
  return out;
}

std::vector<int> propagate_depth_to_coarse(const Edgemap& fine, Edgemap& coarse, double r_max) {
  // Bucket fine points by integer pixel; a query within r_max can only touch
  // cells within ceil(r_max) + 1 in each axis.
  const int w = std::max(1, fine.intrinsics.width);
  const int h = std::max(1, fine.intrinsics.height);
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(w) * h);
  const auto cell = [&](double x, double y) {
    const int cx = std::clamp(static_cast<int>(std::lround(x)), 0, w - 1);
    const int cy = std::clamp(static_cast<int>(std::lround(y)), 0, h - 1);
    return static_cast<std::size_t>(cy) * w + cx;
  };
  for (std::size_t i = 0; i < fine.points.size(); ++i)
    buckets[cell(fine.points[i].q.x(), fine.points[i].q.y())].push_back(static_cast<int>(i));

  const int reach = static_cast<int>(std::ceil(r_max)) + 1;
  std::vector<int> rejected;
  for (std::size_t i = 0; i < coarse.points.size(); ++i) {
    const Vec2 q = 2.0 * coarse.points[i].q;  // fine-level units
    const int cx = std::clamp(static_cast<int>(std::lround(q.x())), 0, w - 1);
    const int cy = std::clamp(static_cast<int>(std::lround(q.y())), 0, h - 1);
    double best_d2 = std::numeric_limits<double>::infinity();
    int best = kNoLink;
    for (int dy = -reach; dy <= reach; ++dy) {
      for (int dx = -reach; dx <= reach; ++dx) {
        const int nx = cx + dx, ny = cy + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        for (int j : buckets[static_cast<std::size_t>(ny) * w + nx]) {
          const double d2 = (fine.points[j].q - q).squaredNorm();
          if (d2 < best_d2 || (d2 == best_d2 && j < best)) {
            best_d2 = d2;
            best = j;
          }
        }
      }
    }
    if (best != kNoLink && best_d2 <= r_max * r_max) {
      coarse.points[i].rho = fine.points[best].rho;
    } else {
      coarse.points[i].rho = 0.0;
      rejected.push_back(static_cast<int>(i));
    }
  }
  return rejected;
}

TrackResult track(const EdgemapPyramid& cur, const EdgemapPyramid& next, const Pose& init,
                  const TrackerConfig& cfg) {
  if (cur.empty() || next.empty()) throw TrackingLost("empty edgemap pyramid");
  const int levels = static_cast<int>(std::min(cur.size(), next.size()));

  // Working copy of the current pyramid carrying smoothed depths at the
  // finest level and nearest-neighbor propagated depths above it. The
  // smoothed values live only inside this call.
  EdgemapPyramid work(cur.begin(), cur.begin() + levels);
  int tracked0 = 0;
  {
    const std::vector<double> sm = cfg.smooth_radius > 0
                                       ? smooth_depth(work[0], cfg.smooth_radius)
                                       : std::vector<double>();
    for (std::size_t i = 0; i < work[0].points.size(); ++i) {
      if (cfg.smooth_radius > 0) work[0].points[i].rho = sm[i];
      if (work[0].points[i].enabled && work[0].points[i].rho > 0.0) ++tracked0;
    }
  }
  if (tracked0 < cfg.min_tracked_points) throw TrackingLost("too few depth-bearing edgepoints");
  for (int l = 1; l < levels; ++l) propagate_depth_to_coarse(work[l - 1], work[l], cfg.coarse_r_max);

  Pose pose = init;
  for (int l = levels - 1; l >= 0; --l) {
    const Edgemap& em_next = next[l];
    if (em_next.points.empty()) continue;
    const IndexImage idx = build_index_image(em_next);
    std::vector<double> rho(work[l].points.size());
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = work[l].points[i].rho;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
      const std::vector<Match> ms = rebuild_matches(work[l], rho, em_next, idx, pose, cfg);
      if (ms.size() < 6) break;

      Mat6 H = Mat6::Zero();
      Vec6 b = Vec6::Zero();
      for (const Match& m : ms) {
        const Edgepoint& a = work[l].points[m.cur];
        const Edgepoint& bp = em_next.points[m.next];
        const Vec3 p = pose.R * edge_ray(a, work[l].intrinsics) + pose.t * rho[m.cur];
        if (p.z() <= 0.0) continue;
        const Vec2 qp = project(p, em_next.intrinsics);
        const double e = (bp.q - qp).dot(bp.m);
        const RowVec3 row = bp.m.transpose() * project_jacobian(p, em_next.intrinsics);
        Vec6 J;
        J.head<3>() = -rho[m.cur] * row.transpose();
        J.tail<3>() = (row * skew(p)).transpose();
        const double s = m.w / m.sigma;
        J *= s;
        H.noalias() += J * J.transpose();
        b.noalias() += J * (s * e);
      }

      Vec6 delta = H.ldlt().solve(-b);
      if (!delta.allFinite()) break;

      // Frozen-objective line search: halve until the step does not increase
      // the cost, give the step up entirely if halving cannot fix it.
      const double e0 = frozen_cost(ms, work[l], rho, em_next, pose);
      Pose trial = boxplus(pose, delta);
      int halvings = 0;
      while (frozen_cost(ms, work[l], rho, em_next, trial) > e0 && halvings < cfg.max_halvings) {
        delta *= 0.5;
        trial = boxplus(pose, delta);
        ++halvings;
      }
      if (frozen_cost(ms, work[l], rho, em_next, trial) > e0) break;
      pose = trial;
      pose.normalize();
      if (delta.norm() < cfg.step_tolerance) break;
    }
  }

  if (!pose.t.allFinite() || !pose.R.allFinite()) throw TrackingLost("pose diverged");

  // Final classification at the finest level with fresh matches.
  TrackResult res;
  res.pose = pose;
  res.matches.assign(cur[0].points.size(), kNoLink);
  std::vector<double> rho0(work[0].points.size());
  for (std::size_t i = 0; i < rho0.size(); ++i) rho0[i] = work[0].points[i].rho;
  if (!next[0].points.empty()) {
    const IndexImage idx0 = build_index_image(next[0]);
    const std::vector<Match> ms = rebuild_matches(work[0], rho0, next[0], idx0, pose, cfg);
    int inliers = 0;
    double sq_sum = 0.0;
    for (const Match& m : ms) {
      res.matches[m.cur] = m.next;
      const Edgepoint& a = work[0].points[m.cur];
      const Edgepoint& b = next[0].points[m.next];
      const Vec3 p = pose.R * edge_ray(a, work[0].intrinsics) + pose.t * rho0[m.cur];
      const double e = (b.q - project(p, next[0].intrinsics)).dot(b.m);
      sq_sum += e * e;
      if (std::abs(e) < cfg.huber_eps) ++inliers;
    }
    res.inlier_fraction = static_cast<double>(inliers) / tracked0;
    res.rms_residual = ms.empty() ? 0.0 : std::sqrt(sq_sum / ms.size());
  }
  if (res.inlier_fraction < cfg.min_inlier_fraction || !std::isfinite(res.rms_residual))
    throw TrackingLost("inlier fraction below threshold");
  return res;
}

}  // namespace eslam
