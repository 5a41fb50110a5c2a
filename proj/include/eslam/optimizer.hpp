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

#include <set>
#include <thread>
#include <vector>

#include "eslam/keyframe_graph.hpp"
#include "eslam/pose_graph.hpp"

namespace eslam {

struct BackendConfig {
  double huber_knee = 2.0;         // shared with tracking
  double eps_relin = 0.02;         // relative pose-change gate
  double rho_min = 1e-4;           // inverse-depth clamp
  double rho_max = 1e3;
  int s_rel_factor = 3;            // marginalization window = factor * n_active
  double damping_scale = 1e-6;     // diagonal-relative damping floor
  int max_retries = 5;             // damping escalations before giving up
  double max_point_condition = 1e12;
  double anchor_info = 1e8;        // gauge strength on the anchor keyframe
  // Independent per-PKF linearizations run on this many workers.
  int n_workers = static_cast<int>(
      std::min(8u, std::max(1u, std::thread::hardware_concurrency())));
};

struct OptimizeReport {
  std::vector<int> relinearized;  // PKFs freshly linearized this iteration
  std::vector<int> marginalized;  // PKFs fused into the absolute prior
  double energy_before = 0.0;
  double energy_after = 0.0;
  double step_norm = 0.0;
  int retries = 0;
  bool accepted = false;
};

/// Assembles PKF `pkf_id`'s sub-problem from the graph: covisibility-window
/// members that recorded observations of it, with relative transforms taken
/// from the current absolute poses. Pointers alias the graph — use before the
/// graph changes.
PkfProblem pkf_problem(const KeyframeGraph& graph, int pkf_id);

/// The hierarchical optimizer: owns the relative priors, the absolute prior,
/// and runs the per-iteration sequence (re-linearization check, selective
/// re-linearization, pose marginalization, pose-graph solve + pose update,
/// edgepoint update) with damped retries keeping the total energy
/// non-increasing.
class Backend {
 public:
  explicit Backend(const BackendConfig& cfg = {}) : cfg_(cfg) {}

  const BackendConfig& config() const { return cfg_; }

  /// Fixes gauge and scale origin: a strong absolute prior on this keyframe.
  void anchor(int pose_id, const Pose& pose);

  OptimizeReport optimize_iteration(KeyframeGraph& graph);

  /// Active relative priors, oldest PKF first.
  std::vector<const RelativePrior*> active_priors() const;
  const RelativePrior* prior_of(int pkf_id) const;
  const std::vector<RelativePrior>& archived() const { return archived_; }
  const AbsolutePrior& absolute() const { return abs_; }
  int anchor_id() const { return anchor_id_; }

  /// Total objective at the graph's current state: measured energy for live
  /// sub-problems, stored quadratics for everything else.
  double energy(const KeyframeGraph& graph) const {
    return total_energy(graph);
  }

  /// Installs a relative prior built outside the normal iteration (loop
  /// closures register their joint priors this way). Replaces any stored
  /// prior for the same PKF and clears its folded mark.
  void add_prior(RelativePrior prior, std::size_t obs_count);

  /// Restores every archived prior into the active set (loop closure re-opens
  /// the full pose graph) and resets the absolute prior to the anchor alone.
  void reactivate_archived();

  /// Fuses every prior whose PKF slid out of the marginalization window into
  /// the absolute prior, archiving the originals; returns the folded PKF ids.
  /// Runs implicitly inside optimize_iteration; exposed for loop closure,
  /// which re-folds after re-activating the full graph.
  std::vector<int> fold_outside_window(const KeyframeGraph& graph);

 private:
  struct Record {
    RelativePrior prior;
    std::size_t obs_count = 0;  // member observations at linearization
  };

  Record* find_record(int pkf_id);
  double total_energy(const KeyframeGraph& graph) const;
  void rebuild_anchor_prior();

  BackendConfig cfg_;
  std::vector<Record> records_;
  std::vector<RelativePrior> archived_;
  AbsolutePrior abs_;
  std::set<int> folded_;      // PKFs already fused into the absolute prior
  bool force_relin_ = false;  // a rejected step invalidates the stored priors
  int anchor_id_ = -1;
  Pose anchor_pose_;
};

}  // namespace eslam
