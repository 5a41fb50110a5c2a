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

#include <cstdint>
#include <vector>

#include "eslam/edgemap.hpp"
#include "eslam/se3.hpp"

namespace eslam {

// Edge matches are not one-to-one: several points may share a target and many
// targets go unhit. A MatchSet moves through fixed stages that repair this:
// the tracker's forward map is inverted (backward), holes are filled along
// chains (augmented), and every association is refined against the epipolar
// geometry of the tracked pose (corrected).
enum class MatchStage { kForward, kBackward, kAugmented, kCorrected };

struct MatchSet {
  int source_id = -1;  // edgemap identifier of the side indexing `map`
  int target_id = -1;  // edgemap identifier the stored indices point into
  MatchStage stage = MatchStage::kForward;
  std::vector<int32_t> map;      // per-source-edgepoint target index or kNoLink
  std::vector<double> residual;  // |normal residual| of each match, 0 if unmatched
};

// Invert a forward map. Each target edgepoint hit by several sources keeps
// the source with the smallest residual (ties to the lower source index);
// targets hit by nobody stay unmatched.
MatchSet invert_matches(const MatchSet& forward, int target_size);

// Fill unmatched edgepoints from their chain neighbors: every hole connected
// to a matched point inherits the association of its nearest matched neighbor
// in chain steps (ties to the lower-index neighbor). Existing matches are
// never altered and chains never leak into each other. `em` is the edgemap of
// the source side, whose connectivity is walked.
MatchSet augment_matches(const MatchSet& ms, const Edgemap& em);

struct CorrectionConfig {
  int walk_limit = 20;        // chain steps explored around the current match
  double lambda = 0.25;       // weight of the reprojection term in the score
  double min_baseline = 1e-6; // below this, score by reprojection alone (m)
};

// Refine every association by walking the target chain around it and keeping
// the candidate minimizing  d_epi^2 + lambda * d_reproj^2, where d_epi is the
// candidate's distance to the epipolar line of the source observation and
// d_reproj the distance of the candidate's reprojection (via its inverse
// depth) to the source observation. The walk repeats from each new minimizer
// until it is a fixpoint, so running the operation twice changes nothing.
// Degenerate baselines fall back to reprojection-only scoring.
//
// `source_em` holds the observations indexing `ms.map`; `target_em` holds the
// candidates and their chains; `source_from_target` is the tracked relative
// pose mapping target-frame coordinates into the source frame.
MatchSet correct_matches(const MatchSet& ms, const Edgemap& source_em, const Edgemap& target_em,
                         const Pose& source_from_target, const CorrectionConfig& cfg = {});

// The durable record a frame contributes to the optimizer: for every matched
// edgepoint of the anchoring PKF, the measurement taken in the observing
// frame. Extracted at admission time so it survives the observing frame's
// edgemap being dropped.
struct ObservationSet {
  int source_id = -1;          // observing keyframe
  int target_id = -1;          // anchoring PKF whose points were measured
  std::vector<int32_t> point;  // index into the anchoring PKF's edgemap
  std::vector<Vec2> q;         // measured sub-pixel position, observer image
  std::vector<Vec2> m;         // measured unit normal, observer image
  std::vector<double> sigma;   // measurement sigma, observer image

  std::size_t size() const { return point.size(); }
};

// Collapse a match set into the observation record of its source frame:
// one entry per matched source point, carrying that point's q/m/sigma from
// `source_em`. Unmatched points contribute nothing.
ObservationSet make_observations(const MatchSet& ms, const Edgemap& source_em);

}  // namespace eslam
