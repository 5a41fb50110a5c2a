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

#include "eslam/keyframe_graph.hpp"

#include <algorithm>
#include <limits>

#include "eslam/errors.hpp"

namespace eslam {

AdmitResult KeyframeGraph::admit_frame(Edgemap em, double timestamp, const Pose& pose,
                                       const MatchSet& matches_to_last_pkf) {
  const int id = static_cast<int>(frames_.size());

  bool is_pkf;
  if (last_pkf_ < 0) {
    is_pkf = true;  // nothing to compare against
  } else {
    if (matches_to_last_pkf.map.size() != em.points.size())
      throw Error("admission matches do not cover the frame's edgemap");
    const auto holes =
        std::count(matches_to_last_pkf.map.begin(), matches_to_last_pkf.map.end(), kNoLink);
    const double novel =
        em.points.empty() ? 0.0 : static_cast<double>(holes) / em.points.size();
    is_pkf = novel > cfg_.tau_new;
  }

  Keyframe kf;
  kf.id = id;
  kf.pose = pose;
  kf.timestamp = timestamp;
  if (last_pkf_ >= 0) {
    // Record the measurements before the edgemap can be dropped, and join the
    // last PKF's window while it is still accepting members.
    MatchSet ms = matches_to_last_pkf;
    ms.source_id = id;
    ms.target_id = last_pkf_;
    kf.observations.push_back(make_observations(ms, em));
    kf.matches_to_past.push_back(std::move(ms));
    add_window_member(last_pkf_, id);
  }
  if (is_pkf) {
    kf.kind = KeyframeKind::kPKF;
    if (last_pkf_ >= 0) disable_redefined(matches_to_last_pkf, last_pkf_);
    kf.edgemap = std::move(em);
    windows_.push_back({id, {}, true});
  } else {
    kf.kind = KeyframeKind::kDKF;  // provisional edgemap dropped
  }
  frames_.push_back(std::move(kf));
  active_.push_back(id);
  if (is_pkf) last_pkf_ = id;

  AdmitResult res;
  res.id = id;
  res.kind = frames_.back().kind;
  if (static_cast<int>(active_.size()) > cfg_.n_active) {
    res.discarded = select_discard();
    if (res.discarded) deactivate(*res.discarded);
  }
  return res;
}

bool KeyframeGraph::update_window(int pkf_id, double matched_fraction) {
  CovisibilityWindow* w = window(pkf_id);
  if (w == nullptr) throw Error("no covisibility window for this keyframe");
  if (!w->open) return false;  // closed windows never reopen
  if (matched_fraction < cfg_.min_matched_fraction) w->open = false;
  return w->open;
}

bool KeyframeGraph::add_window_member(int pkf_id, int frame_id, bool force) {
  CovisibilityWindow* w = window(pkf_id);
  if (w == nullptr) throw Error("no covisibility window for this keyframe");
  if (!w->open && !force) return false;
  for (const int m : w->members)
    if (m == frame_id) return true;
  w->members.push_back(frame_id);
  return true;
}

std::optional<int> KeyframeGraph::select_discard() const {
  if (static_cast<int>(active_.size()) <= cfg_.n_active) return std::nullopt;

  const auto translation = [&](int a, int b) {
    return (frames_[a].pose.t - frames_[b].pose.t).norm();
  };

  double best_score = std::numeric_limits<double>::infinity();
  std::optional<int> best;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    const int id = active_[i];
    if (frames_[id].kind != KeyframeKind::kDKF) continue;
    double score;
    if (active_.size() == 1) {
      score = 0.0;
    } else if (i == 0) {
      score = 2.0 * translation(id, active_[i + 1]);
    } else if (i + 1 == active_.size()) {
      score = 2.0 * translation(active_[i - 1], id);
    } else {
      score = translation(active_[i - 1], id) + translation(id, active_[i + 1]);
    }
    if (score < best_score) {
      best_score = score;
      best = id;
    }
  }
  return best;
}

int KeyframeGraph::disable_redefined(const MatchSet& new_to_prev, int prev_pkf_id) {
  Keyframe& prev = frames_.at(prev_pkf_id);
  if (prev.kind != KeyframeKind::kPKF || !prev.edgemap)
    throw Error("disable_redefined target is not a PKF");

  int disabled = 0;
  for (const int32_t t : new_to_prev.map) {
    if (t == kNoLink) continue;
    Edgepoint& ep = prev.edgemap->points.at(t);
    if (ep.enabled) {
      ep.enabled = false;
      ++disabled;
    }
  }
  return disabled;
}

void KeyframeGraph::deactivate(int id) {
  active_.erase(std::remove(active_.begin(), active_.end(), id), active_.end());
}

const CovisibilityWindow* KeyframeGraph::window(int pkf_id) const {
  for (const CovisibilityWindow& w : windows_)
    if (w.pkf_id == pkf_id) return &w;
  return nullptr;
}

CovisibilityWindow* KeyframeGraph::window(int pkf_id) {
  for (CovisibilityWindow& w : windows_)
    if (w.pkf_id == pkf_id) return &w;
  return nullptr;
}

void KeyframeGraph::add_observations(int frame_id, ObservationSet obs) {
  obs.source_id = frame_id;
  frames_.at(frame_id).observations.push_back(std::move(obs));
}

}  // namespace eslam
