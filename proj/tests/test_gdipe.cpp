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

#include <cmath>
#include <complex>

#include <catch2/catch_amalgamated.hpp>

#include "dipesim/gdipe.hpp"
#include "dipesim/oracles.hpp"

using namespace dipesim;

namespace {

PureState basis(int dim, int i) {
  Vec v = Vec::Zero(dim);
  v[i] = 1.0;
  return PureState(std::move(v));
}

Mat diag(std::initializer_list<double> entries) {
  int n = static_cast<int>(entries.size());
  Mat m = Mat::Zero(n, n);
  int i = 0;
  for (double e : entries) {
    m(i, i) = e;
    ++i;
  }
  return m;
}

// |<a|M|b>|^2 straight from the truncated matrix.
double matrix_overlap(const SpectralTruncation& t, const PureState& a,
                      const PureState& b) {
  Complex z = (a.vec().adjoint() * t.truncated * b.vec())(0, 0);
  return std::norm(z);
}

struct MeanAcc {
  double sum = 0.0, sum_sq = 0.0;
  int n = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  double mean() const { return sum / n; }
  double se() const {
    double m = mean();
    return std::sqrt(std::max(0.0, sum_sq / n - m * m) / n);
  }
};

}  // namespace

TEST_CASE("a state outside the support forces a zero outcome on that side") {
  SpectralTruncation t = truncate(HermitianObservable(diag({1.0, 0.8, 0.0, 0.0})), 0.5);
  REQUIRE(t.support_dim == 2);
  Stream rng(3);
  for (int i = 0; i < 20; ++i) {
    GdipeOutcome o = run_gdipe(t, basis(4, 2), basis(4, 0), 7, rng);
    REQUIRE(o.s_a == 0);
    REQUIRE(o.s_b == 7);
    REQUIRE(o.w == 0.0);
    REQUIRE_FALSE(o.psi_eps.has_value());
    REQUIRE(o.phi_eps.has_value());
    REQUIRE_FALSE(o.u.has_value());
    REQUIRE_FALSE(o.v.has_value());
    REQUIRE(overlap(*o.phi_eps, basis(4, 0)) > 1.0 - 1e-12);
  }
}

TEST_CASE("one-dimensional support makes the outcome deterministic") {
  // Only the top eigenvalue survives; the single-outcome POVM returns the
  // conditioning state, so w = ((1+k)^2 - 1) / k^2 exactly.
  SpectralTruncation t = truncate(HermitianObservable(diag({1.0, 0.1, 0.1, 0.1})), 0.5);
  REQUIRE(t.support_dim == 1);
  REQUIRE(std::abs(t.hs_norm_sq - 1.0) < 1e-12);
  Stream rng(5);
  GdipeOutcome o = run_gdipe(t, basis(4, 0), basis(4, 0), 2, rng);
  REQUIRE(o.s_a == 2);
  REQUIRE(o.s_b == 2);
  REQUIRE(std::abs(o.w - 2.0) < 1e-12);
  REQUIRE(overlap(*o.u, basis(4, 0)) > 1.0 - 1e-12);
  REQUIRE(overlap(*o.v, basis(4, 0)) > 1.0 - 1e-12);
}

TEST_CASE("outcome recombines into w through the published formula") {
  Stream rng(17);
  HermitianObservable m = random_bounded_observable(6, rng);
  SpectralTruncation t = truncate(m, 0.3);
  PureState psi = haar_state(6, rng);
  PureState phi = haar_state(6, rng);
  int k = 9;
  int checked = 0;
  for (int i = 0; i < 50; ++i) {
    GdipeOutcome o = run_gdipe(t, psi, phi, k, rng);
    if (o.s_a == 0 || o.s_b == 0) {
      REQUIRE(o.w == 0.0);
      continue;
    }
    double x = matrix_overlap(t, *o.u, *o.v);
    double d_sup = static_cast<double>(t.support_dim);
    double w = ((d_sup + o.s_a) * (d_sup + o.s_b) * x - t.hs_norm_sq) /
               (static_cast<double>(k) * k);
    REQUIRE(std::abs(o.w - w) < 1e-9);
    ++checked;
  }
  REQUIRE(checked > 0);
}

TEST_CASE("closed-form mean at the identity observable") {
  SpectralTruncation t = truncate(HermitianObservable(Mat::Identity(4, 4)), 0.5);
  PureState e0 = basis(4, 0);
  // Equal eigenstates: 1 + 2/k.
  REQUIRE(std::abs(estimator_mean_closed_form(t, e0, e0, 25) - 1.08) < 1e-12);
  // Orthogonal states: 0 + 2/k.
  REQUIRE(std::abs(estimator_mean_closed_form(t, e0, basis(4, 1), 10) - 0.2) < 1e-12);
}

TEST_CASE("closed-form mean overshoots the target by at most 2/k") {
  Stream rng(23);
  for (int i = 0; i < 20; ++i) {
    HermitianObservable m = random_bounded_observable(8, rng);
    SpectralTruncation t = truncate(m, 0.3);
    PureState psi = haar_state(8, rng);
    PureState phi = haar_state(8, rng);
    int k = 5 + static_cast<int>(rng.bits() % 20);
    double target = matrix_overlap(t, phi, psi);
    double mean = estimator_mean_closed_form(t, psi, phi, k);
    REQUIRE(mean >= target - 1e-12);
    REQUIRE(mean <= target + 2.0 / k + 1e-12);
  }
}

TEST_CASE("sampled mean matches the closed form") {
  Stream rng(29);
  HermitianObservable m = random_bounded_observable(6, rng);
  SpectralTruncation t = truncate(m, 0.3);
  PureState psi = haar_state(6, rng);
  PureState phi = haar_state(6, rng);
  int k = 8;
  double closed = estimator_mean_closed_form(t, psi, phi, k);
  MeanAcc acc;
  for (int i = 0; i < 20000; ++i) acc.add(run_gdipe(t, psi, phi, k, rng).w);
  REQUIRE(std::abs(acc.mean() - closed) <= 4.0 * acc.se() + 1e-12);
}

TEST_CASE("conditional mean formula on a diagonal observable") {
  SpectralTruncation t = truncate(HermitianObservable(diag({1.0, 0.6, 0.3, 0.1})), 0.1);
  REQUIRE(t.support_dim == 4);
  PureState e0 = basis(4, 0);
  PureState e1 = basis(4, 1);
  int k = 10;
  // f = |<e1|M|e0>|^2 = 0, T_psi = 1, T_phi = 0.36.
  REQUIRE(std::abs(conditional_mean(t, e0, e1, k, 0, 5) - 5 * 0.36 / 100.0) < 1e-9);
  REQUIRE(std::abs(conditional_mean(t, e0, e1, k, 4, 0) - 4 * 1.0 / 100.0) < 1e-9);
  REQUIRE(std::abs(conditional_mean(t, e0, e1, k, 4, 5) - (4 * 1.0 + 5 * 0.36) / 100.0) <
          1e-9);
  // Equal top eigenstates: f = 1, T both 1.
  REQUIRE(std::abs(conditional_mean(t, e0, e0, k, k, k) - (100.0 + 20.0) / 100.0) < 1e-9);

  CHECK_THROWS_AS(conditional_mean(t, e0, e1, k, -1, 0), std::invalid_argument);
  CHECK_THROWS_AS(conditional_mean(t, e0, e1, k, 0, 11), std::invalid_argument);
}

TEST_CASE("conditional mean matches sampling at fixed success counts") {
  Stream rng(31);
  HermitianObservable m = random_bounded_observable(6, rng);
  SpectralTruncation t = truncate(m, 0.3);
  PureState psi = haar_state(6, rng);
  PureState phi = haar_state(6, rng);
  int k = 8;
  std::int64_t s_a = 3, s_b = 5;
  double closed = conditional_mean(t, psi, phi, k, s_a, s_b);

  auto [c_psi, p] = detail::support_coords(t, psi);
  auto [c_phi, q] = detail::support_coords(t, phi);
  REQUIRE(p > 1e-12);
  REQUIRE(q > 1e-12);
  Vec cond_a = c_psi / c_psi.norm();
  Vec cond_b = c_phi / c_phi.norm();
  double d_sup = static_cast<double>(t.support_dim);
  MeanAcc acc;
  for (int i = 0; i < 100000; ++i) {
    auto ua = detail::povm_sample_coords(cond_a, static_cast<int>(s_a), rng);
    auto vb = detail::povm_sample_coords(cond_b, static_cast<int>(s_b), rng);
    PureState u = detail::embed(t, ua.outcome);
    PureState v = detail::embed(t, vb.outcome);
    double x = matrix_overlap(t, u, v);
    acc.add(((d_sup + s_a) * (d_sup + s_b) * x - t.hs_norm_sq) /
            (static_cast<double>(k) * k));
  }
  REQUIRE(std::abs(acc.mean() - closed) <= 4.0 * acc.se() + 1e-12);
}

TEST_CASE("variance bound arithmetic") {
  SpectralTruncation zero = truncate(HermitianObservable(Mat::Zero(4, 4)), 0.5);
  REQUIRE(zero.support_dim == 0);
  REQUIRE(variance_bound(zero, 16) == 64.0 / 16.0);

  SpectralTruncation full = truncate(HermitianObservable(Mat::Identity(8, 8)), 0.5);
  REQUIRE(std::abs(full.hs_norm_sq - 8.0) < 1e-12);
  double k = 8.0;
  double expect = 64.0 * (1.0 / k + 8.0 / (k * k) + 64.0 / (k * k * k * k));
  REQUIRE(std::abs(variance_bound(full, 8) - expect) < 1e-12);
  // Larger support, larger bound.
  REQUIRE(variance_bound(full, 8) > variance_bound(zero, 8));

  CHECK_THROWS_AS(variance_bound(full, 0), std::invalid_argument);
  CHECK_THROWS_AS(variance_bound(full, 8, 0.0), std::invalid_argument);
}

TEST_CASE("sequential success counting is statistically equivalent") {
  SpectralTruncation t = truncate(HermitianObservable(Mat::Identity(4, 4)), 0.5);
  Vec v(4);
  v << std::sqrt(0.7), std::sqrt(0.3), 0.0, 0.0;
  PureState psi(v);
  // Full-weight state: both modes are deterministic at s = k.
  Stream det(1);
  REQUIRE(run_gdipe(t, psi, psi, 5, det).s_a == 5);
  REQUIRE(run_gdipe(t, psi, psi, 5, det, true).s_a == 5);

  // Partial weight: compare mean success counts across modes.
  SpectralTruncation half = truncate(HermitianObservable(diag({1.0, 1.0, 0.1, 0.1})), 0.5);
  Vec u(4);
  u << std::sqrt(0.35), std::sqrt(0.35), std::sqrt(0.15), std::sqrt(0.15);
  PureState mixed(u);
  int k = 6, n = 4000;
  double p = 0.7;
  Stream ra(2), rb(3);
  double sum_binom = 0.0, sum_seq = 0.0;
  for (int i = 0; i < n; ++i) {
    sum_binom += static_cast<double>(run_gdipe(half, mixed, mixed, k, ra).s_a);
    sum_seq += static_cast<double>(run_gdipe(half, mixed, mixed, k, rb, true).s_a);
  }
  double se = std::sqrt(k * p * (1.0 - p) / n);
  REQUIRE(std::abs(sum_binom / n - k * p) <= 4.0 * se);
  REQUIRE(std::abs(sum_seq / n - k * p) <= 4.0 * se);
}

TEST_CASE("padding with annihilated directions leaves the outcome unchanged") {
  Stream gen(41);
  HermitianObservable m4 = random_bounded_observable(4, gen);
  PureState psi4 = haar_state(4, gen);
  PureState phi4 = haar_state(4, gen);

  Mat m6 = Mat::Zero(6, 6);
  m6.topLeftCorner(4, 4) = m4.mat();
  Vec psi6 = Vec::Zero(6), phi6 = Vec::Zero(6);
  psi6.head(4) = psi4.vec();
  phi6.head(4) = phi4.vec();

  SpectralTruncation t4 = truncate(m4, 0.4);
  SpectralTruncation t6 = truncate(HermitianObservable(m6), 0.4);
  REQUIRE(t4.support_dim == t6.support_dim);
  REQUIRE(std::abs(t4.hs_norm_sq - t6.hs_norm_sq) < 1e-9);

  Stream a(55), b(55);
  for (int i = 0; i < 20; ++i) {
    GdipeOutcome o4 = run_gdipe(t4, psi4, phi4, 7, a);
    GdipeOutcome o6 = run_gdipe(t6, PureState(psi6), PureState(phi6), 7, b);
    REQUIRE(o4.s_a == o6.s_a);
    REQUIRE(o4.s_b == o6.s_b);
    REQUIRE(std::abs(o4.w - o6.w) < 1e-9);
  }
  REQUIRE(std::abs(estimator_mean_closed_form(t4, psi4, phi4, 7) -
                   estimator_mean_closed_form(t6, PureState(psi6), PureState(phi6), 7)) <
          1e-9);
}

TEST_CASE("empty support yields the all-zero outcome") {
  SpectralTruncation t = truncate(HermitianObservable(Mat::Zero(3, 3)), 1.0);
  REQUIRE(t.support_dim == 0);
  Stream rng(1);
  Stream untouched(1);
  GdipeOutcome o = run_gdipe(t, basis(3, 0), basis(3, 1), 5, rng);
  REQUIRE(o.s_a == 0);
  REQUIRE(o.s_b == 0);
  REQUIRE(o.w == 0.0);
  REQUIRE_FALSE(o.u.has_value());
  REQUIRE_FALSE(o.psi_eps.has_value());
  // Nothing is drawn either.
  REQUIRE(rng.bits() == untouched.bits());
  REQUIRE(estimator_mean_closed_form(t, basis(3, 0), basis(3, 1), 5) == 0.0);
  REQUIRE(conditional_mean(t, basis(3, 0), basis(3, 1), 5, 2, 2) == 0.0);
}

TEST_CASE("run_gdipe rejects bad inputs") {
  SpectralTruncation t = truncate(HermitianObservable(Mat::Identity(4, 4)), 0.5);
  Stream rng(1);
  CHECK_THROWS_AS(run_gdipe(t, basis(4, 0), basis(4, 0), 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(run_gdipe(t, basis(3, 0), basis(4, 0), 2, rng), std::invalid_argument);
  CHECK_THROWS_AS(estimator_mean_closed_form(t, basis(4, 0), basis(4, 0), 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(conditional_mean(t, basis(4, 0), basis(4, 0), 0, 0, 0),
                  std::invalid_argument);
}
