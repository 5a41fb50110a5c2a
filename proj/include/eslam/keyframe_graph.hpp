/******************************************************************************
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
 *****************************************************************************/
#pragma once

#include <optional>
#include <vector>

#include "eslam/association.hpp"
#include "eslam/edgemap.hpp"
#include "eslam/se3.hpp"

namespace eslam {

// Keyframes carrying an edgemap anchor edgepoint variables (PKF); the rest
// contribute only their pose (DKF). Edgepoints always anchor to the LAST
// keyframe that observed them, so matches point to the past and
// marginalization never touches future measurements.
enum class KeyframeKind { kPKF, kDKF };

struct Keyframe {
  int id = -1;  // strictly increasing with time
  KeyframeKind kind = KeyframeKind::kDKF;
  Pose pose;  // world-from-camera
  double timestamp = 0.0;
  std::optional<Edgemap> edgemap;  // present iff kind == kPKF
  std::vector<MatchSet> matches_to_past;
  // Measurements this frame contributes to past PKFs' sub-problems. Kept even
  // after a DKF's edgemap is dropped: re-linearization needs them.
  std::vector<ObservationSet> observations;
};

// Frames associated with PKF k while its matched fraction stayed healthy.
// A closed window is immutable: its sub-problem is ready to become a prior.
struct CovisibilityWindow {
  int pkf_id = -1;
  std::vector<int> members;
  bool open = true;
};

struct GraphConfig {
  double tau_new = 0.25;             // novel fraction above which a frame stays PKF
  int n_active = 12;                 // discard policy kicks in above this count
  double min_matched_fraction = 0.10;  // window closes below this
};

struct AdmitResult {
  int id = -1;
  KeyframeKind kind = KeyframeKind::kDKF;
  std::optional<int> discarded;  // DKF removed by the admission cycle, if any
};

class KeyframeGraph {
 public:
  explicit KeyframeGraph(const GraphConfig& cfg = {}) : cfg_(cfg) {}

  // One admission cycle. The frame enters as a provisional PKF and stays one
  // iff the fraction of its edgepoints unmatched in `matches_to_last_pkf`
  // (indexed by the new frame's edgepoints) exceeds tau_new; otherwise it is
  // reclassified DKF and its edgemap dropped. A kept PKF disables the
  // matched edgepoints of the previous PKF and opens its own covisibility
  // window. If the active count then exceeds n_active, the cheapest DKF is
  // discarded. The first frame is a PKF unconditionally.
  AdmitResult admit_frame(Edgemap em, double timestamp, const Pose& pose,
                          const MatchSet& matches_to_last_pkf);

  // Window close policy: below min_matched_fraction the window closes for
  // good. Returns whether the window is (still) open. Closed windows ignore
  // further updates.
  bool update_window(int pkf_id, double matched_fraction);

  // Registers a frame in an open window; returns false (and changes nothing)
  // when the window is closed. `force` registers the member even in a closed
  // window (loop closures connect keyframes long after the window closed).
  bool add_window_member(int pkf_id, int frame_id, bool force = false);

  // The active DKF with the least translation to its temporal neighbors in
  // the active list (endpoints count their single neighbor twice); nullopt
  // when the count is within bounds or no active DKF exists. Never a PKF.
  std::optional<int> select_discard() const;

  // Marks every edgepoint of PKF `prev_pkf_id` that is matched by `new_to_prev`
  // (a map indexed by new-frame points holding prev-PKF indices) as disabled,
  // permanently removing it as an optimization variable. Returns how many
  // were newly disabled.
  int disable_redefined(const MatchSet& new_to_prev, int prev_pkf_id);

  // Records measurements a frame made of an older PKF's points (composed
  // associations). The direct last-PKF record is added by admit_frame itself.
  void add_observations(int frame_id, ObservationSet obs);

  // Removes a keyframe from the active set (marginalization or discard);
  // the record itself stays for trajectory output.
  void deactivate(int id);

  const Keyframe& frame(int id) const { return frames_.at(id); }
  Keyframe& frame(int id) { return frames_.at(id); }
  const std::vector<int>& active() const { return active_; }
  const CovisibilityWindow* window(int pkf_id) const;
  CovisibilityWindow* window(int pkf_id);
  int last_pkf_id() const { return last_pkf_; }
  std::size_t size() const { return frames_.size(); }
  const GraphConfig& config() const { return cfg_; }

 private:
  GraphConfig cfg_;
  std::vector<Keyframe> frames_;  // id == index
  std::vector<CovisibilityWindow> windows_;
  std::vector<int> active_;  // temporal order
  int last_pkf_ = -1;
};

}  // namespace eslam
