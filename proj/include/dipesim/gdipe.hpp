// Copyright 2026 The dipesim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Generalized inner-product estimation |<phi|M|psi>|^2 through a spectrally
// truncated observable.
//
// Each party measures {P, I - P} (P = truncation support) on its k copies,
// keeping the success count s. Conditioned on the successes, each party draws
// one outcome of the standard POVM on the symmetric subspace of the support.
// The estimator combines the two POVM outcomes u, v as
//   w = ((d_sup + s_a)(d_sup + s_b) |<u|M_trunc|v>|^2 - tr[M_trunc^2]) / k^2,
// and is defined to be 0 when either success count is 0.
//
// All sampling happens in the support eigenbasis, so padding the problem with
// extra annihilated directions leaves the draw sequence unchanged.

#include <cstdint>
#include <optional>

#include "dipesim/sampling.hpp"
#include "dipesim/spectral.hpp"

namespace dipesim {

struct GdipeOutcome {
  std::int64_t s_a = 0;
  std::int64_t s_b = 0;
  double w = 0.0;
  std::optional<PureState> u;        // Alice's POVM outcome, embedded in C^dim
  std::optional<PureState> v;        // Bob's POVM outcome
  std::optional<PureState> psi_eps;  // normalized support projection of psi
  std::optional<PureState> phi_eps;  // absent when the support annihilates phi
};

namespace detail {

// Support-basis coordinates and the squared weight <state|P|state>.
struct SupportCoords {
  Vec c;
  double weight;
};

inline SupportCoords support_coords(const SpectralTruncation& t, const PureState& s) {
  require_same_dim(t.dim, s.dim(), "support_coords");
  Vec c = t.support_basis.adjoint() * s.vec();
  double n = c.squaredNorm();
  // Weights within rounding distance of 1 snap to exactly 1: the binomial
  // draw count is discontinuous at p = 1, so without the snap a zero-padded
  // instance would consume different draws than its original.
  double w = n >= 1.0 - 1e-12 ? 1.0 : n;
  return {std::move(c), w};
}

inline Complex weighted_inner(const SpectralTruncation& t, const Vec& a, const Vec& b) {
  // <a| diag(kept eigenvalues) |b> in support coordinates.
  Complex acc(0.0, 0.0);
  for (int i = 0; i < t.support_dim; ++i)
    acc += std::conj(a[i]) * t.kept_eigenvalues[i] * b[i];
  return acc;
}

inline PureState embed(const SpectralTruncation& t, const Vec& coords) {
  return PureState::normalized(t.support_basis * coords);
}

}  // namespace detail

// Draw order: s_a, s_b, Alice's POVM outcome, Bob's POVM outcome. Success
// counts come from one binomial draw each, or from k Bernoulli draws per side
// in sequential mode (statistically identical; used when per-copy measurement
// messages must be accounted for).
inline GdipeOutcome run_gdipe(const SpectralTruncation& t, const PureState& psi,
                              const PureState& phi, int k, Stream& rng,
                              bool sequential = false) {
  require_same_dim(t.dim, psi.dim(), "run_gdipe");
  require_same_dim(t.dim, phi.dim(), "run_gdipe");
  if (k < 1) throw std::invalid_argument("run_gdipe: k must be >= 1");

  GdipeOutcome out;
  if (t.support_dim == 0) return out;

  auto [c_psi, p] = detail::support_coords(t, psi);
  auto [c_phi, q] = detail::support_coords(t, phi);

  auto draw_count = [&](double prob) -> std::int64_t {
    if (!sequential) return rng.binomial(k, prob);
    std::int64_t s = 0;
    for (int i = 0; i < k; ++i)
      if (rng.uniform() < prob) ++s;
    return s;
  };
  out.s_a = draw_count(p);
  out.s_b = draw_count(q);

  if (p > 1e-24) out.psi_eps = detail::embed(t, c_psi / std::sqrt(p));
  if (q > 1e-24) out.phi_eps = detail::embed(t, c_phi / std::sqrt(q));

  if (out.s_a == 0 || out.s_b == 0) return out;  // w stays 0 by definition

  Vec cond_a = c_psi / c_psi.norm();
  Vec cond_b = c_phi / c_phi.norm();
  auto ua = detail::povm_sample_coords(cond_a, static_cast<int>(out.s_a), rng);
  auto vb = detail::povm_sample_coords(cond_b, static_cast<int>(out.s_b), rng);

  double x = std::norm(detail::weighted_inner(t, ua.outcome, vb.outcome));
  double d_sup = static_cast<double>(t.support_dim);
  out.w = ((d_sup + out.s_a) * (d_sup + out.s_b) * x - t.hs_norm_sq) /
          (static_cast<double>(k) * k);
  out.u = detail::embed(t, ua.outcome);
  out.v = detail::embed(t, vb.outcome);
  return out;
}

// Mean of the estimator over the full protocol:
//   |<phi|M_t|psi>|^2 + (<psi|M_t^2|psi> + <phi|M_t^2|phi>)/k.
// The second term equals tr[M_t^2 psi_t] <psi|P|psi> / k (and the phi mirror),
// so a state annihilated by the support contributes 0 automatically.
inline double estimator_mean_closed_form(const SpectralTruncation& t,
                                         const PureState& psi, const PureState& phi,
                                         int k) {
  require_same_dim(t.dim, psi.dim(), "estimator_mean_closed_form");
  require_same_dim(t.dim, phi.dim(), "estimator_mean_closed_form");
  if (k < 1) throw std::invalid_argument("estimator_mean_closed_form: k must be >= 1");
  if (t.support_dim == 0) return 0.0;
  auto [c_psi, p] = detail::support_coords(t, psi);
  auto [c_phi, q] = detail::support_coords(t, phi);
  (void)p;
  (void)q;
  double first = std::norm(detail::weighted_inner(t, c_phi, c_psi));
  Eigen::VectorXd lam_sq = t.kept_eigenvalues.array().square();
  double m2_psi = (c_psi.array().abs2() * lam_sq.array()).sum();
  double m2_phi = (c_phi.array().abs2() * lam_sq.array()).sum();
  return first + (m2_psi + m2_phi) / k;
}

// Mean of the estimator formula conditioned on the success counts:
//   (s_a s_b f + s_a tr[M_t^2 psi_t] + s_b tr[M_t^2 phi_t]) / k^2
// with f = |<phi_t|M_t|psi_t>|^2 on the normalized support projections. Terms
// involving an annihilated state are 0. Unlike the protocol output, this is
// defined for s = 0 as well (the 0-copy POVM is uniform over the support).
inline double conditional_mean(const SpectralTruncation& t, const PureState& psi,
                               const PureState& phi, int k, std::int64_t s_a,
                               std::int64_t s_b) {
  require_same_dim(t.dim, psi.dim(), "conditional_mean");
  require_same_dim(t.dim, phi.dim(), "conditional_mean");
  if (k < 1) throw std::invalid_argument("conditional_mean: k must be >= 1");
  if (s_a < 0 || s_a > k || s_b < 0 || s_b > k)
    throw std::invalid_argument("conditional_mean: need 0 <= s <= k");
  if (t.support_dim == 0) return 0.0;
  auto [c_psi, p] = detail::support_coords(t, psi);
  auto [c_phi, q] = detail::support_coords(t, phi);
  Eigen::VectorXd lam_sq = t.kept_eigenvalues.array().square();
  double f = 0.0;
  if (p > 1e-24 && q > 1e-24)
    f = std::norm(detail::weighted_inner(t, c_phi, c_psi)) / (p * q);
  double t_psi = p > 1e-24 ? (c_psi.array().abs2() * lam_sq.array()).sum() / p : 0.0;
  double t_phi = q > 1e-24 ? (c_phi.array().abs2() * lam_sq.array()).sum() / q : 0.0;
  double k2 = static_cast<double>(k) * k;
  return (static_cast<double>(s_a) * s_b * f + s_a * t_psi + s_b * t_phi) / k2;
}

// Deviation bound for the estimator's variance in terms of the truncated
// observable's Hilbert-Schmidt norm.
inline double variance_bound(const SpectralTruncation& t, int k,
                             double constant = 64.0) {
  if (k < 1) throw std::invalid_argument("variance_bound: k must be >= 1");
  if (!(constant > 0.0))
    throw std::invalid_argument("variance_bound: constant must be > 0");
  double kk = static_cast<double>(k);
  double h2 = t.hs_norm_sq;
  return constant * (1.0 / kk + h2 / (kk * kk) + h2 * h2 / (kk * kk * kk * kk));
}

}  // namespace dipesim
