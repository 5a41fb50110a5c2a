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

#include "eslam/optimizer.hpp"

#include <algorithm>
#include <limits>
#include <utility>

#include "eslam/backend.hpp"
#include "eslam/errors.hpp"

namespace eslam {

PkfProblem pkf_problem(const KeyframeGraph& graph, int pkf_id) {
  const Keyframe& kf = graph.frame(pkf_id);
  if (kf.kind != KeyframeKind::kPKF || !kf.edgemap)
    throw Error("sub-problem requested for a keyframe without an edgemap");
  PkfProblem prob;
  prob.pkf_id = pkf_id;
  prob.edgemap = &*kf.edgemap;
  prob.intrinsics = kf.edgemap->intrinsics;
  const CovisibilityWindow* win = graph.window(pkf_id);
  if (win == nullptr) return prob;
  for (int member : win->members) {
    const Keyframe& mf = graph.frame(member);
    const ObservationSet* found = nullptr;
    for (const ObservationSet& obs : mf.observations) {
      if (obs.target_id == pkf_id && obs.size() > 0) {
        found = &obs;
        break;
      }
    }
    if (found == nullptr) continue;
    prob.member_ids.push_back(member);
    prob.member_from_pkf.push_back(mf.pose.inverse() * kf.pose);
    prob.observations.push_back(found);
  }
  return prob;
}

void Backend::anchor(int pose_id, const Pose& pose) {
  anchor_id_ = pose_id;
  anchor_pose_ = pose;
  rebuild_anchor_prior();
}

void Backend::rebuild_anchor_prior() {
  abs_.member_ids = {anchor_id_};
  abs_.lin_point = {anchor_pose_};
  abs_.Y = MatX::Identity(6, 6) * cfg_.anchor_info;
}

Backend::Record* Backend::find_record(int pkf_id) {
  for (Record& rec : records_)
    if (rec.prior.pkf_id == pkf_id) return &rec;
  return nullptr;
}

const RelativePrior* Backend::prior_of(int pkf_id) const {
  for (const Record& rec : records_)
    if (rec.prior.pkf_id == pkf_id) return &rec.prior;
  return nullptr;
}

std::vector<const RelativePrior*> Backend::active_priors() const {
  std::vector<const RelativePrior*> out;
  out.reserve(records_.size());
  for (const Record& rec : records_) out.push_back(&rec.prior);
  return out;
}

void Backend::reactivate_archived() {
  for (RelativePrior& pr : archived_)
    records_.push_back(
        {std::move(pr), std::numeric_limits<std::size_t>::max()});
  archived_.clear();
  folded_.clear();
  std::sort(records_.begin(), records_.end(),
            [](const Record& a, const Record& b) {
              return a.prior.pkf_id < b.prior.pkf_id;
            });
  if (anchor_id_ >= 0) rebuild_anchor_prior();
}

void Backend::add_prior(RelativePrior prior, std::size_t obs_count) {
  folded_.erase(prior.pkf_id);
  Record* rec = find_record(prior.pkf_id);
  if (rec != nullptr) {
    rec->prior = std::move(prior);
    rec->obs_count = obs_count;
    return;
  }
  records_.push_back({std::move(prior), obs_count});
  std::sort(records_.begin(), records_.end(),
            [](const Record& a, const Record& b) {
              return a.prior.pkf_id < b.prior.pkf_id;
            });
}

double Backend::total_energy(const KeyframeGraph& graph) const {
  double total = 0.0;
  for (const Record& rec : records_) {
    const RelativePrior& pr = rec.prior;
    // A live sub-problem is scored by the real measurement energy so step
    // acceptance is honest even when a stored quadratic has gone stale. The
    // quadratic form covers the rest: priors whose measurements are no
    // longer reachable, and re-activated archives — their edgepoints are not
    // updated during a loop correction, so only the quadratic (whose scale
    // direction is in the nullspace) scores their deviation fairly.
    bool scored = false;
    const bool reactivated =
        rec.obs_count == std::numeric_limits<std::size_t>::max();
    if (!reactivated) {
      try {
        const PkfProblem prob = pkf_problem(graph, pr.pkf_id);
        if (!prob.member_ids.empty()) {
          total += evaluate_problem_energy(prob, cfg_.huber_knee);
          scored = true;
        }
      } catch (const Error&) {
      }
    }
    if (!scored) {
      std::vector<Pose> rel;
      rel.reserve(pr.member_ids.size());
      const Pose& pkf_pose = graph.frame(pr.pkf_id).pose;
      for (int member : pr.member_ids)
        rel.push_back(graph.frame(member).pose.inverse() * pkf_pose);
      total += prior_energy(pr, prior_deviation(pr, rel));
    }
  }
  total += absolute_prior_energy(
      abs_, [&graph](int id) { return graph.frame(id).pose; });
  return total;
}

std::vector<int> Backend::fold_outside_window(const KeyframeGraph& graph) {
  std::vector<int> folded;
  if (records_.empty() || graph.size() == 0) return folded;
  const int latest = static_cast<int>(graph.size()) - 1;
  const int cutoff = latest - cfg_.s_rel_factor * graph.config().n_active;
  if (cutoff < 0) return folded;
  std::vector<const RelativePrior*> leaving;
  for (const Record& rec : records_)
    if (rec.prior.pkf_id <= cutoff) leaving.push_back(&rec.prior);
  if (leaving.empty()) return folded;
  const PoseLookup pose_of = [&graph](int id) { return graph.frame(id).pose; };
  std::vector<int> retain;
  if (anchor_id_ >= 0) retain.push_back(anchor_id_);
  auto keep = [&](int id) {
    if (id > cutoff) retain.push_back(id);
  };
  for (int id : abs_.member_ids) keep(id);
  for (const RelativePrior* pr : leaving)
    for (int id : pr->member_ids) keep(id);
  std::sort(retain.begin(), retain.end());
  retain.erase(std::unique(retain.begin(), retain.end()), retain.end());
  abs_ = marginalize_poses(abs_, leaving, pose_of, retain);
  std::vector<Record> kept;
  kept.reserve(records_.size() - leaving.size());
  for (Record& rec : records_) {
    if (rec.prior.pkf_id <= cutoff) {
      folded.push_back(rec.prior.pkf_id);
      folded_.insert(rec.prior.pkf_id);
      archived_.push_back(std::move(rec.prior));
    } else {
      kept.push_back(std::move(rec));
    }
  }
  records_ = std::move(kept);
  return folded;
}

OptimizeReport Backend::optimize_iteration(KeyframeGraph& graph) {
  OptimizeReport rep;
  const PoseLookup pose_of = [&graph](int id) { return graph.frame(id).pose; };

  // --- 1. Decide which PKFs to (re-)linearize: new sub-problems, grown
  // observation sets, or poses drifted past the linearization gate. Only
  // PKFs still in the active temporal window qualify.
  std::vector<int> to_lin;
  for (int id : graph.active()) {
    const Keyframe& kf = graph.frame(id);
    if (kf.kind != KeyframeKind::kPKF || !kf.edgemap) continue;
    if (folded_.count(id) > 0) continue;  // already in the absolute prior
    const CovisibilityWindow* win = graph.window(id);
    if (win == nullptr || win->members.empty()) continue;
    std::size_t obs_total = 0;
    for (int member : win->members)
      for (const ObservationSet& obs : graph.frame(member).observations)
        if (obs.target_id == id) obs_total += obs.size();
    if (obs_total == 0) continue;
    Record* rec = find_record(id);
    if (rec == nullptr || force_relin_ || obs_total > rec->obs_count ||
        needs_relinearization(rec->prior, pose_of, cfg_.eps_relin, true)) {
      to_lin.push_back(id);
    }
  }
  force_relin_ = false;

  // --- 2. Linearize and marginalize edgepoints. Sub-problems share nothing,
  // so they run on the worker group.
  struct LinResult {
    bool ok = false;
    RelativePrior prior;
    std::size_t obs_count = 0;
  };
  std::vector<LinResult> results(to_lin.size());
  auto run_task = [&](std::size_t i) {
    try {
      const PkfProblem prob = pkf_problem(graph, to_lin[i]);
      if (prob.member_ids.empty()) return;
      results[i].prior =
          schur_marginalize(linearize_pkf(prob, cfg_.huber_knee),
                            cfg_.max_point_condition);
      for (const ObservationSet* obs : prob.observations)
        results[i].obs_count += obs->size();
      results[i].ok = true;
    } catch (const Error&) {
      // Unconstrainable right now (e.g. every point behind the camera);
      // keep the previous prior if one exists.
      results[i].ok = false;
    }
  };
  const int n_workers =
      std::max(1, std::min(cfg_.n_workers, static_cast<int>(to_lin.size())));
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < to_lin.size(); ++i) run_task(i);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) {
      workers.emplace_back([&, w]() {
        for (std::size_t i = w; i < to_lin.size(); i += n_workers) run_task(i);
      });
    }
    for (std::thread& t : workers) t.join();
  }
  for (std::size_t i = 0; i < to_lin.size(); ++i) {
    if (!results[i].ok) continue;
    Record* rec = find_record(to_lin[i]);
    if (rec != nullptr) {
      rec->prior = std::move(results[i].prior);
      rec->obs_count = results[i].obs_count;
    } else {
      records_.push_back({std::move(results[i].prior), results[i].obs_count});
      std::sort(records_.begin(), records_.end(),
                [](const Record& a, const Record& b) {
                  return a.prior.pkf_id < b.prior.pkf_id;
                });
    }
    rep.relinearized.push_back(to_lin[i]);
  }

  // --- 3. Priors whose PKF slid out of the marginalization window fuse into
  // the absolute prior; their originals are archived for loop closure.
  rep.marginalized = fold_outside_window(graph);

  // --- 4. Pose-graph solve over every pose a prior touches, then 5. push the
  // relative increments down into the re-linearized PKFs' edgepoints. A step
  // that raises the total energy is rolled back and retried with escalating
  // damping.
  if (records_.empty() && abs_.empty()) {
    rep.accepted = true;
    return rep;
  }
  std::vector<const RelativePrior*> ptrs;
  ptrs.reserve(records_.size());
  for (const Record& rec : records_) ptrs.push_back(&rec.prior);
  std::vector<int> pose_ids(abs_.member_ids);
  for (const RelativePrior* pr : ptrs) {
    pose_ids.push_back(pr->pkf_id);
    pose_ids.insert(pose_ids.end(), pr->member_ids.begin(),
                    pr->member_ids.end());
  }
  std::sort(pose_ids.begin(), pose_ids.end());
  pose_ids.erase(std::unique(pose_ids.begin(), pose_ids.end()),
                 pose_ids.end());
  if (pose_ids.empty()) {
    rep.accepted = true;
    return rep;
  }
  const SparsePoseSystem sys = build_pgo_system(
      ptrs, abs_.empty() ? nullptr : &abs_, pose_ids, pose_of);

  rep.energy_before = total_energy(graph);

  std::vector<Pose> pose_snapshot(pose_ids.size());
  for (std::size_t i = 0; i < pose_ids.size(); ++i)
    pose_snapshot[i] = graph.frame(pose_ids[i]).pose;
  struct EmState {
    int pkf_id;
    std::vector<std::pair<double, double>> alpha_rho;
  };
  std::vector<EmState> em_snapshot;
  em_snapshot.reserve(rep.relinearized.size());
  for (int id : rep.relinearized) {
    EmState st;
    st.pkf_id = id;
    const Edgemap& em = *graph.frame(id).edgemap;
    st.alpha_rho.reserve(em.points.size());
    for (const Edgepoint& ep : em.points)
      st.alpha_rho.emplace_back(ep.alpha, ep.rho);
    em_snapshot.push_back(std::move(st));
  }
  auto restore = [&]() {
    for (std::size_t i = 0; i < pose_ids.size(); ++i)
      graph.frame(pose_ids[i]).pose = pose_snapshot[i];
    for (const EmState& st : em_snapshot) {
      Edgemap& em = *graph.frame(st.pkf_id).edgemap;
      for (std::size_t i = 0; i < st.alpha_rho.size(); ++i) {
        em.points[i].alpha = st.alpha_rho[i].first;
        em.points[i].rho = st.alpha_rho[i].second;
      }
    }
  };

  // Even the first attempt carries a small curvature-relative damping: gauge
  // directions the priors leave flat (global map scale before any loop
  // closure) would otherwise reach the solver as exact zero pivots, and a
  // uniform damping would be dominated by the anchor's information.
  double damping = cfg_.damping_scale;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    bool solved = true;
    VecX delta;
    try {
      delta = solve_pgo(sys, damping, true);
    } catch (const NotPositiveDefinite&) {
      solved = false;
    }
    if (solved && delta.size() > 0) {
      for (std::size_t i = 0; i < pose_ids.size(); ++i) {
        const int slot = sys.slot(pose_ids[i]);
        if (slot < 0) continue;
        Pose updated = boxplus(pose_snapshot[i], delta.segment<6>(6 * slot));
        updated.normalize();
        graph.frame(pose_ids[i]).pose = updated;
      }
      for (std::size_t pi = 0; pi < ptrs.size(); ++pi) {
        const int pkf = ptrs[pi]->pkf_id;
        if (std::find(rep.relinearized.begin(), rep.relinearized.end(),
                      pkf) == rep.relinearized.end())
          continue;
        const VecX rel =
            relative_increments(sys, ptrs, static_cast<int>(pi), delta);
        update_edgepoints(*ptrs[pi], rel, *graph.frame(pkf).edgemap,
                          cfg_.rho_min, cfg_.rho_max);
      }
      rep.energy_after = total_energy(graph);
      const double floor = 1e-12 * std::max(1.0, rep.energy_before);
      if (rep.energy_after <= rep.energy_before + floor) {
        rep.accepted = true;
        rep.step_norm = delta.norm();
        // Accepted, but check the gain ratio: when the real reduction falls
        // well short of what the stored quadratics predicted, they have gone
        // stale and the drift gate alone will not catch it.
        const double predicted =
            -(2.0 * sys.g.dot(delta) + delta.dot(sys.H * delta));
        const double actual = rep.energy_before - rep.energy_after;
        if (rep.relinearized.empty() && actual < 0.25 * predicted + floor)
          force_relin_ = true;
        break;
      }
      restore();
    }
    if (attempt == cfg_.max_retries) break;
    ++rep.retries;
    damping *= 10.0;
  }
  if (!rep.accepted) {
    rep.energy_after = rep.energy_before;
    // No damped step decreased the real energy: the stored linearizations no
    // longer describe the problem, so rebuild them before the next attempt.
    force_relin_ = true;
  }
  return rep;
}

}  // namespace eslam
