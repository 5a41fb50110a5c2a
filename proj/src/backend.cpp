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

#include "eslam/backend.hpp"

#include <algorithm>
#include <cmath>

#include "eslam/errors.hpp"

namespace eslam {

namespace {

void check_problem(const PkfProblem& prob) {
  if (prob.edgemap == nullptr) throw Error("sub-problem has no edgemap");
  if (prob.member_ids.size() != prob.member_from_pkf.size() ||
      prob.member_ids.size() != prob.observations.size())
    throw Error("sub-problem member arrays disagree");
}

}  // namespace

LinearizedPkf linearize_pkf(const PkfProblem& prob, double huber_knee) {
  check_problem(prob);
  const Edgemap& em = *prob.edgemap;
  const int m = static_cast<int>(prob.member_ids.size());

  LinearizedPkf lin;
  lin.pkf_id = prob.pkf_id;
  lin.member_ids = prob.member_ids;
  lin.member_from_pkf = prob.member_from_pkf;
  lin.g_chi = VecX::Zero(6 * m);
  lin.H_chichi = MatX::Zero(6 * m, 6 * m);

  std::vector<int32_t> block_of(em.size(), -1);
  for (int s = 0; s < m; ++s) {
    const ObservationSet& obs = *prob.observations[s];
    const Pose& rel = prob.member_from_pkf[s];
    for (std::size_t o = 0; o < obs.size(); ++o) {
      const int pt = obs.point[o];
      const Edgepoint& ep = em.points[pt];
      if (!ep.enabled) continue;  // re-anchored elsewhere, not a variable here
      ResidualJet jet;
      try {
        jet = residual_and_jacobians(ep, obs.q[o], obs.m[o], obs.sigma[o], rel,
                                     prob.intrinsics, huber_knee);
      } catch (const BehindCamera&) {
        continue;  // dropped for this linearization
      }

      lin.E0 += jet.r * jet.r;
      lin.g_chi.segment<6>(6 * s) += jet.J_pose * jet.r;
      lin.H_chichi.block<6, 6>(6 * s, 6 * s) += jet.J_pose * jet.J_pose.transpose();

      if (block_of[pt] < 0) {
        block_of[pt] = static_cast<int32_t>(lin.points.size());
        lin.points.push_back({});
        lin.points.back().point = pt;
      }
      PointBlocks& pb = lin.points[block_of[pt]];
      pb.g_a += jet.J_alpha * jet.r;
      pb.g_r += jet.J_rho * jet.r;
      pb.H_aa += jet.J_alpha * jet.J_alpha;
      pb.H_ar += jet.J_alpha * jet.J_rho;
      pb.H_rr += jet.J_rho * jet.J_rho;
      if (pb.members.empty() || pb.members.back() != s) {
        pb.members.push_back(s);
        pb.h_chi_a.push_back(Vec6::Zero());
        pb.h_chi_r.push_back(Vec6::Zero());
      }
      pb.h_chi_a.back() += jet.J_pose * jet.J_alpha;
      pb.h_chi_r.back() += jet.J_pose * jet.J_rho;
    }
  }

  if (lin.points.empty()) throw InsufficientObservations();

  // Position prior on alpha, once per observed point. Points never observed
  // from a member contribute nothing pose-dependent and stay out entirely.
  for (PointBlocks& pb : lin.points) {
    const Edgepoint& ep = em.points[pb.point];
    const double r = alpha_prior_residual(ep);
    lin.E0 += r * r;
    pb.g_a += r / ep.sigma;
    pb.H_aa += 1.0 / (ep.sigma * ep.sigma);
  }
  return lin;
}

double evaluate_problem_energy(const PkfProblem& prob, double huber_knee) {
  check_problem(prob);
  const Edgemap& em = *prob.edgemap;
  double energy = 0.0;
  std::vector<char> observed(em.size(), 0);
  for (std::size_t s = 0; s < prob.member_ids.size(); ++s) {
    const ObservationSet& obs = *prob.observations[s];
    for (std::size_t o = 0; o < obs.size(); ++o) {
      const Edgepoint& ep = em.points[obs.point[o]];
      if (!ep.enabled) continue;
      try {
        const ResidualJet jet = residual_and_jacobians(ep, obs.q[o], obs.m[o], obs.sigma[o],
                                                       prob.member_from_pkf[s], prob.intrinsics,
                                                       huber_knee);
        energy += jet.r * jet.r;
        observed[obs.point[o]] = 1;
      } catch (const BehindCamera&) {
      }
    }
  }
  for (std::size_t i = 0; i < em.size(); ++i) {
    if (!observed[i]) continue;
    const double r = alpha_prior_residual(em.points[i]);
    energy += r * r;
  }
  return energy;
}

RelativePrior schur_marginalize(const LinearizedPkf& lin, double max_condition) {
  const int m = static_cast<int>(lin.member_ids.size());
  RelativePrior prior;
  prior.pkf_id = lin.pkf_id;
  prior.member_ids = lin.member_ids;
  prior.lin_point = lin.member_from_pkf;
  prior.E0 = lin.E0;
  prior.y = lin.g_chi;
  prior.Y = lin.H_chichi;

  // Group points by the farthest member slot they reach; each group's
  // correction only touches the leading (slot+1) blocks, so the groups
  // accumulate independently and are summed afterwards.
  std::vector<std::vector<const PointBlocks*>> groups(m);
  for (const PointBlocks& pb : lin.points) groups[pb.members.back()].push_back(&pb);

  std::vector<MatX> y_corr(m), Y_corr(m);
  for (int b = 0; b < m; ++b) {
    const int dim = 6 * (b + 1);
    y_corr[b] = MatX::Zero(dim, 1);
    Y_corr[b] = MatX::Zero(dim, dim);
  }

  for (int b = 0; b < m; ++b) {
    for (const PointBlocks* pb : groups[b]) {
      // Invert the 2x2 point block; freeze the point when ill conditioned.
      const double tr = pb->H_aa + pb->H_rr;
      const double disc = std::sqrt(std::max(
          0.0, (pb->H_aa - pb->H_rr) * (pb->H_aa - pb->H_rr) + 4.0 * pb->H_ar * pb->H_ar));
      const double lo = 0.5 * (tr - disc), hi = 0.5 * (tr + disc);
      if (!(lo > 0.0) || hi > max_condition * lo) {
        ++prior.frozen_points;
        continue;
      }
      const double det = pb->H_aa * pb->H_rr - pb->H_ar * pb->H_ar;
      CachedPoint cp;
      cp.point = pb->point;
      cp.S_aa = pb->H_rr / det;
      cp.S_ar = -pb->H_ar / det;
      cp.S_rr = pb->H_aa / det;
      cp.g_a = pb->g_a;
      cp.g_r = pb->g_r;
      cp.members = pb->members;
      cp.h_chi_a = pb->h_chi_a;
      cp.h_chi_r = pb->h_chi_r;

      // y -= H_chi,theta S g_theta ; Y -= H_chi,theta S H_chi,theta^T
      const double sg_a = cp.S_aa * cp.g_a + cp.S_ar * cp.g_r;
      const double sg_r = cp.S_ar * cp.g_a + cp.S_rr * cp.g_r;
      for (std::size_t u = 0; u < cp.members.size(); ++u) {
        const int su = cp.members[u];
        y_corr[b].block<6, 1>(6 * su, 0) += cp.h_chi_a[u] * sg_a + cp.h_chi_r[u] * sg_r;
        for (std::size_t v = 0; v < cp.members.size(); ++v) {
          const int sv = cp.members[v];
          const Vec6 sha = cp.S_aa * cp.h_chi_a[v] + cp.S_ar * cp.h_chi_r[v];
          const Vec6 shr = cp.S_ar * cp.h_chi_a[v] + cp.S_rr * cp.h_chi_r[v];
          Y_corr[b].block<6, 6>(6 * su, 6 * sv) +=
              cp.h_chi_a[u] * sha.transpose() + cp.h_chi_r[u] * shr.transpose();
        }
      }
      prior.cached.push_back(std::move(cp));
    }
  }

  for (int b = 0; b < m; ++b) {
    const int dim = 6 * (b + 1);
    prior.y.head(dim) -= y_corr[b].col(0);
    prior.Y.topLeftCorner(dim, dim) -= Y_corr[b];
  }
  prior.Y = 0.5 * (prior.Y + prior.Y.transpose().eval());  // keep exactly symmetric
  return prior;
}

std::pair<double, double> scale_nullspace_check(const RelativePrior& prior) {
  const int m = static_cast<int>(prior.member_ids.size());
  VecX d0 = VecX::Zero(6 * m);
  for (int s = 0; s < m; ++s) d0.segment<3>(6 * s) = prior.lin_point[s].t;
  return {2.0 * prior.y.dot(d0), d0.dot(prior.Y * d0)};
}

int update_edgepoints(const RelativePrior& prior, const VecX& delta_chi, Edgemap& em,
                      double rho_min, double rho_max) {
  int updated = 0;
  for (const CachedPoint& cp : prior.cached) {
    double ha = cp.g_a, hr = cp.g_r;
    for (std::size_t u = 0; u < cp.members.size(); ++u) {
      const auto d = delta_chi.segment<6>(6 * cp.members[u]);
      ha += cp.h_chi_a[u].dot(d);
      hr += cp.h_chi_r[u].dot(d);
    }
    const double da = -(cp.S_aa * ha + cp.S_ar * hr);
    const double dr = -(cp.S_ar * ha + cp.S_rr * hr);
    Edgepoint& ep = em.points[cp.point];
    ep.alpha += da;
    ep.rho = std::clamp(ep.rho + dr, rho_min, rho_max);
    ++updated;
  }
  return updated;
}

double prior_energy(const RelativePrior& prior, const VecX& c) {
  return prior.E0 + 2.0 * prior.y.dot(c) + c.dot(prior.Y * c);
}

VecX prior_deviation(const RelativePrior& prior, const std::vector<Pose>& member_from_pkf) {
  const int m = static_cast<int>(prior.member_ids.size());
  VecX c(6 * m);
  for (int s = 0; s < m; ++s)
    c.segment<6>(6 * s) = log_se3(member_from_pkf[s] * prior.lin_point[s].inverse());
  return c;
}

}  // namespace eslam
