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

#include "eslam/association.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "eslam/camera.hpp"
#include "eslam/errors.hpp"

namespace eslam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Pixel-space epipolar line of a source observation in the target image.
// With p_src = R p_tgt + t, rays satisfy x_s . (t x R x_t) = 0; the line is
// converted from normalized to pixel coordinates through the intrinsics.
struct EpipolarLine {
  Vec3 l;  // l.dot((x, y, 1)) = 0 in target pixels, (l.x, l.y) not both zero

  double distance(const Vec2& q) const {
    return std::abs(l.x() * q.x() + l.y() * q.y() + l.z()) / l.head<2>().norm();
  }
};

EpipolarLine epipolar_line(const Vec2& q_src, const Camera& K_src, const Camera& K_tgt,
                           const Pose& source_from_target, double min_baseline) {
  if (source_from_target.t.norm() < min_baseline) throw DegenerateEpipolar();
  const Vec3 x_s = homogeneous_ray(q_src, K_src);
  const Vec3 l_norm = (source_from_target.R.transpose() *
                       source_from_target.t.cross(x_s));  // E^T x_s with E = [t]x R
  // l_pixel = K_tgt^{-T} l_norm for the pinhole upper-triangular K.
  Vec3 l;
  l.x() = l_norm.x() / K_tgt.fx;
  l.y() = l_norm.y() / K_tgt.fy;
  l.z() = l_norm.z() - l_norm.x() * K_tgt.cx / K_tgt.fx - l_norm.y() * K_tgt.cy / K_tgt.fy;
  if (l.head<2>().norm() == 0.0) throw DegenerateEpipolar();
  return {l};
}

// Candidate score: squared epipolar distance plus weighted squared distance
// between the source observation and the candidate reprojected through its
// inverse depth (rho = 0 reprojects the point at infinity).
double candidate_score(const Edgepoint& cand, const Vec2& q_src, const Camera& K_src,
                       const Camera& K_tgt, const Pose& source_from_target,
                       const EpipolarLine* line, double lambda) {
  const Vec3 p =
      source_from_target.R * homogeneous_ray(cand.q, K_tgt) + source_from_target.t * cand.rho;
  if (p.z() <= 0.0) return kInf;
  const double d_rep = (q_src - project(p, K_src)).norm();
  if (line == nullptr) return d_rep * d_rep;  // degenerate baseline: reprojection only
  const double d_epi = line->distance(cand.q);
  return d_epi * d_epi + lambda * d_rep * d_rep;
}

}  // namespace

MatchSet invert_matches(const MatchSet& forward, int target_size) {
  if (forward.stage != MatchStage::kForward) throw BadMatchStage("invert needs a forward set");

  MatchSet out;
  out.source_id = forward.target_id;
  out.target_id = forward.source_id;
  out.stage = MatchStage::kBackward;
  out.map.assign(target_size, kNoLink);
  out.residual.assign(target_size, 0.0);

  for (std::size_t i = 0; i < forward.map.size(); ++i) {
    const int32_t t = forward.map[i];
    if (t == kNoLink) continue;
    const double r = i < forward.residual.size() ? forward.residual[i] : 0.0;
    const int32_t held = out.map[t];
    if (held == kNoLink || r < out.residual[t] ||
        (r == out.residual[t] && static_cast<int32_t>(i) < held)) {
      out.map[t] = static_cast<int32_t>(i);
      out.residual[t] = r;
    }
  }
  return out;
}

MatchSet augment_matches(const MatchSet& ms, const Edgemap& em) {
  if (ms.stage != MatchStage::kBackward) throw BadMatchStage("augment needs a backward set");
  if (ms.map.size() != em.points.size())
    throw BadMatchStage("match map does not cover the edgemap");

  MatchSet out = ms;
  out.stage = MatchStage::kAugmented;

  // Multi-seed breadth-first walk along chain links. Every hole ends up with
  // the association of its nearest matched neighbor; at equal distance the
  // lower-index seed wins. Seeds are the already-matched points, so existing
  // matches are never rewritten, and links never leave a chain by definition.
  const std::size_t n = em.points.size();
  std::vector<int32_t> dist(n, INT32_MAX);
  std::vector<int32_t> seed(n, kNoLink);
  std::deque<int32_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (ms.map[i] == kNoLink) continue;
    dist[i] = 0;
    seed[i] = static_cast<int32_t>(i);
    queue.push_back(static_cast<int32_t>(i));
  }
  while (!queue.empty()) {
    const int32_t v = queue.front();
    queue.pop_front();
    for (const int32_t w : {em.points[v].prev, em.points[v].next}) {
      if (w == kNoLink) continue;
      if (dist[w] > dist[v] + 1) {
        dist[w] = dist[v] + 1;
        seed[w] = seed[v];
        queue.push_back(w);
      } else if (dist[w] == dist[v] + 1 && seed[v] < seed[w]) {
        seed[w] = seed[v];  // same layer, lower-index seed wins
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (out.map[i] != kNoLink || seed[i] == kNoLink) continue;
    out.map[i] = ms.map[seed[i]];
    out.residual[i] = ms.residual[seed[i]];
  }
  return out;
}

MatchSet correct_matches(const MatchSet& ms, const Edgemap& source_em, const Edgemap& target_em,
                         const Pose& source_from_target, const CorrectionConfig& cfg) {
  if (ms.stage != MatchStage::kAugmented && ms.stage != MatchStage::kCorrected)
    throw BadMatchStage("correct needs an augmented or corrected set");
  if (ms.map.size() != source_em.points.size())
    throw BadMatchStage("match map does not cover the source edgemap");

  MatchSet out = ms;
  out.stage = MatchStage::kCorrected;
  const Camera& K_src = source_em.intrinsics;
  const Camera& K_tgt = target_em.intrinsics;

  for (std::size_t i = 0; i < ms.map.size(); ++i) {
    if (ms.map[i] == kNoLink) continue;
    const Vec2& q_src = source_em.points[i].q;

    EpipolarLine line_storage;
    const EpipolarLine* line = nullptr;
    try {
      line_storage = epipolar_line(q_src, K_src, K_tgt, source_from_target, cfg.min_baseline);
      line = &line_storage;
    } catch (const DegenerateEpipolar&) {
      // Reprojection-only scoring.
    }

    const auto score_at = [&](int32_t c) {
      return candidate_score(target_em.points[c], q_src, K_src, K_tgt, source_from_target, line,
                             cfg.lambda);
    };

    // Window minimization repeated from each new minimizer until stationary;
    // the (score, index) pair strictly decreases, so this terminates.
    int32_t cur = ms.map[i];
    double cur_score = score_at(cur);
    for (;;) {
      int32_t best = cur;
      double best_score = cur_score;
      const auto consider = [&](int32_t c) {
        const double s = score_at(c);
        if (s < best_score || (s == best_score && c < best)) {
          best = c;
          best_score = s;
        }
      };
      int32_t p = target_em.points[cur].prev;
      int32_t nx = target_em.points[cur].next;
      for (int step = 0; step < cfg.walk_limit; ++step) {
        if (p == kNoLink && nx == kNoLink) break;
        if (p != kNoLink) {
          consider(p);
          p = target_em.points[p].prev;
        }
        if (nx != kNoLink) {
          consider(nx);
          nx = target_em.points[nx].next;
        }
      }
      if (best == cur) break;
      cur = best;
      cur_score = best_score;
    }
    out.map[i] = cur;
    out.residual[i] = std::sqrt(cur_score);
  }
  return out;
}

ObservationSet make_observations(const MatchSet& ms, const Edgemap& source_em) {
  if (ms.map.size() != source_em.size())
    throw BadMatchStage("observation extraction needs a map covering the source edgemap");
  ObservationSet obs;
  obs.source_id = ms.source_id;
  obs.target_id = ms.target_id;
  for (std::size_t i = 0; i < ms.map.size(); ++i) {
    if (ms.map[i] == kNoLink) continue;
    const Edgepoint& ep = source_em.points[i];
    obs.point.push_back(ms.map[i]);
    obs.q.push_back(ep.q);
    obs.m.push_back(ep.m);
    obs.sigma.push_back(ep.sigma);
  }
  return obs;
}

}  // namespace eslam
