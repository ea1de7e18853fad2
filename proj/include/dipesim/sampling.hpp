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

// Measurement primitives: SWAP tests, the standard POVM on a symmetric
// subspace, and a Haar norm-concentration checker.

#include <cmath>
#include <optional>

#include "dipesim/qmath.hpp"

namespace dipesim {

// SWAP test on one copy of a and one copy of b.
// Returns bit 0 with probability (1 + |<a|b>|^2) / 2.
inline int swap_test(const PureState& a, const PureState& b, Stream& rng) {
  double p0 = 0.5 * (1.0 + overlap(a, b));
  return rng.uniform() < p0 ? 0 : 1;
}

// SWAP test through a block encoding of m (operator norm at most 1 by type).
// Returns bit 0 with probability (1 + |<a|m|b>|^2) / 2.
inline int m_swap_test(const PureState& a, const HermitianObservable& m,
                       const PureState& b, Stream& rng) {
  double p0 = 0.5 * (1.0 + std::norm(bilinear(a, m, b)));
  return rng.uniform() < p0 ? 0 : 1;
}

// One draw from the standard POVM on the symmetric subspace, conditioned on
// `copies` observed copies of the conditioning state. The outcome decomposes
// as sqrt(alpha_sq) e^{i phase} |conditioning> + sqrt(1-alpha_sq) |complement>
// with alpha_sq ~ Beta(copies+1, d_W-1), phase uniform, and complement Haar on
// the orthogonal complement of the conditioning state within the subspace.
struct PovmSample {
  PureState outcome;
  double alpha_sq;
  double phase;
  std::optional<PureState> complement;  // absent when the subspace is 1-dim
};

namespace detail {

// Draw order shared by both samplers: alpha_sq, phase, complement Gaussian.
// A 1-dimensional subspace consumes no draws.
struct PovmCoefficients {
  double alpha_sq;
  double phase;
};

inline PovmCoefficients povm_coefficients(int subspace_dim, int copies, Stream& rng) {
  double a = rng.beta(static_cast<double>(copies) + 1.0,
                      static_cast<double>(subspace_dim) - 1.0);
  return {a, rng.angle()};
}

// Sampler for the case subspace = C^m: conditioning is a unit vector in C^m.
// Used by protocol code that works in an explicit support basis.
struct CoordPovmSample {
  Vec outcome;
  double alpha_sq;
  double phase;
  Vec complement;  // empty when m == 1
};

inline CoordPovmSample povm_sample_coords(const Vec& conditioning, int copies,
                                          Stream& rng) {
  const int m = static_cast<int>(conditioning.size());
  if (m == 1) return {conditioning, 1.0, 0.0, Vec()};
  auto [alpha_sq, phase] = povm_coefficients(m, copies, rng);
  Vec w(m);
  double n = 0.0;
  do {
    for (int i = 0; i < m; ++i) w[i] = rng.cnormal();
    w -= conditioning.dot(w) * conditioning;
    n = w.norm();
  } while (!(n > 1e-12));
  w /= n;
  Vec out = std::sqrt(alpha_sq) * std::polar(1.0, phase) * conditioning +
            std::sqrt(std::max(0.0, 1.0 - alpha_sq)) * w;
  return {std::move(out), alpha_sq, phase, std::move(w)};
}

}  // namespace detail

// Posterior moments of the along-conditioning weight alpha_sq ~
// Beta(copies+1, d_w-1). Valid at d_w = 1 as well (point mass at 1).
inline double povm_alpha_sq_mean(int d_w, int copies) {
  return (copies + 1.0) / (d_w + copies);
}
inline double povm_alpha_4_mean(int d_w, int copies) {
  return (copies + 2.0) * (copies + 1.0) / ((d_w + copies + 1.0) * (d_w + copies));
}
inline double povm_complement_sq_mean(int d_w, int copies) {
  return d_w * (d_w - 1.0) / ((d_w + copies + 1.0) * (d_w + copies));
}

inline PovmSample standard_povm_sample(const PureState& conditioning,
                                       const Projector& subspace, int copies,
                                       Stream& rng) {
  require_same_dim(conditioning.dim(), subspace.dim(), "standard_povm_sample");
  if (copies < 0)
    throw std::invalid_argument("standard_povm_sample: copies must be >= 0");
  const int d_w = subspace.rank();
  if (d_w < 1)
    throw std::invalid_argument("standard_povm_sample: subspace rank must be >= 1");
  const Vec& c = conditioning.vec();
  if ((subspace.mat() * c - c).norm() > kStructureTol)
    throw std::invalid_argument(
        "standard_povm_sample: conditioning state is not in the subspace");
  if (d_w == 1) return {conditioning, 1.0, 0.0, std::nullopt};

  auto [alpha_sq, phase] = detail::povm_coefficients(d_w, copies, rng);
  const int d = conditioning.dim();
  Vec w(d);
  double n = 0.0;
  do {
    Vec z(d);
    for (int i = 0; i < d; ++i) z[i] = rng.cnormal();
    w = subspace.mat() * z;
    w -= c.dot(w) * c;
    n = w.norm();
  } while (!(n > 1e-12));
  w /= n;
  Vec out = std::sqrt(alpha_sq) * std::polar(1.0, phase) * c +
            std::sqrt(std::max(0.0, 1.0 - alpha_sq)) * w;
  return {PureState::normalized(std::move(out)), alpha_sq, phase,
          PureState(std::move(w))};
}

// Empirical check of the Haar norm concentration bound: the squared norm of a
// Haar vector's first `block` coordinates concentrates around block/dim.
// Failure means ||head|| falls outside (1 +- delta) * sqrt(block/dim); the
// returned bound is 4*exp(-delta^2*block/16). Samples the projected column
// directly (the first column of a Haar unitary is a Haar state).
struct NormConcentration {
  double failure_rate;
  double bound;
};

inline NormConcentration haar_norm_concentration_check(int dim, int block,
                                                       int trials, double delta,
                                                       Stream& rng) {
  if (block < 1 || block > dim)
    throw std::invalid_argument("haar_norm_concentration_check: need 1 <= block <= dim");
  if (trials < 1)
    throw std::invalid_argument("haar_norm_concentration_check: trials must be >= 1");
  if (!(delta > 0.0))
    throw std::invalid_argument("haar_norm_concentration_check: delta must be > 0");
  const double r = std::sqrt(static_cast<double>(block) / dim);
  const double lo = (1.0 - delta) * r;
  const double hi = (1.0 + delta) * r;
  int failures = 0;
  for (int t = 0; t < trials; ++t) {
    PureState psi = haar_state(dim, rng);
    double x = psi.vec().head(block).norm();
    if (x < lo || x > hi) ++failures;
  }
  return {static_cast<double>(failures) / trials,
          4.0 * std::exp(-delta * delta * block / 16.0)};
}

}  // namespace dipesim
