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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "dipesim/rng.hpp"

using dipesim::Stream;

namespace {

// Kolmogorov-Smirnov distance between a sorted sample and a CDF given as a
// callable.
template <typename Cdf>
double ks_distance(std::vector<double> sample, Cdf cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double f = cdf(sample[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
  }
  return d;
}

// CDF of Beta(a, b) by Simpson integration of the density; independent of the
// sampler under test.
struct BetaCdf {
  double a, b;
  std::vector<double> grid;  // cumulative mass at i/n

  BetaCdf(double a_, double b_, int n = 4096) : a(a_), b(b_), grid(n + 1, 0.0) {
    auto pdf = [&](double t) {
      if (t <= 0.0 || t >= 1.0) return 0.0;
      return std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0);
    };
    double h = 1.0 / n;
    for (int i = 1; i <= n; ++i) {
      double lo = (i - 1) * h, hi = i * h;
      grid[i] = grid[i - 1] +
                h / 6.0 * (pdf(lo) + 4.0 * pdf(0.5 * (lo + hi)) + pdf(hi));
    }
    for (double& g : grid) g /= grid.back();
  }

  double operator()(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double pos = x * (grid.size() - 1);
    std::size_t i = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(i);
    return grid[i] * (1.0 - frac) + grid[i + 1] * frac;
  }
};

double binom_pmf(int n, int k, double p) {
  double lg = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(lg + k * std::log(p) + (n - k) * std::log(1.0 - p));
}

}  // namespace

TEST_CASE("streams with equal keys produce identical sequences") {
  Stream a(42), b(42);
  for (int i = 0; i < 64; ++i) REQUIRE(a.bits() == b.bits());
  Stream c(42), d(42);
  for (int i = 0; i < 64; ++i) REQUIRE(c.uniform() == d.uniform());
}

TEST_CASE("child derivation depends only on the key, not on draw position") {
  Stream parent(7);
  Stream before = parent.child("x");
  for (int i = 0; i < 100; ++i) parent.bits();
  Stream after = parent.child("x");
  REQUIRE(before.key() == after.key());
  for (int i = 0; i < 16; ++i) REQUIRE(before.bits() == after.bits());
}

TEST_CASE("sibling children have distinct keys and sequences") {
  Stream parent(7);
  Stream a = parent.child("alice");
  Stream b = parent.child("bob");
  Stream i0 = parent.child(0);
  Stream i1 = parent.child(1);
  REQUIRE(a.key() != b.key());
  REQUIRE(i0.key() != i1.key());
  REQUIRE(a.key() != i0.key());
  // Tagged-and-indexed derivation is two-level, so ("round", 1) differs from
  // ("round", 2) and from a sibling tag with the same index.
  REQUIRE(parent.child("round", 1).key() != parent.child("round", 2).key());
  REQUIRE(parent.child("round", 1).key() != parent.child("swap", 1).key());
  int agree = 0;
  for (int i = 0; i < 64; ++i)
    if (a.bits() == b.bits()) ++agree;
  REQUIRE(agree == 0);
}

TEST_CASE("mix64 is a bijection on a sample of inputs") {
  // Injectivity spot check; collisions would break key derivation.
  std::vector<std::uint64_t> out;
  for (std::uint64_t i = 0; i < 4096; ++i) out.push_back(dipesim::mix64(i));
  std::sort(out.begin(), out.end());
  REQUIRE(std::adjacent_find(out.begin(), out.end()) == out.end());
}

TEST_CASE("uniform lies in [0,1) with the right first two moments") {
  Stream rng(11);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum_sq += u * u;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  // Standard errors: sqrt(1/12n) for the mean, ~1/(3*sqrt(5n)) for the variance.
  REQUIRE(std::abs(mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  REQUIRE(std::abs(var - 1.0 / 12.0) < 0.002);
}

TEST_CASE("normal matches the standard Gaussian law") {
  Stream rng(12);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  int within = 0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sum_sq += x * x;
    if (std::abs(x) < 1.959963984540054) ++within;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  REQUIRE(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(var - 1.0) < 0.02);
  // Central 95% interval of the standard normal.
  REQUIRE(std::abs(within / static_cast<double>(n) - 0.95) < 0.005);
}

TEST_CASE("cnormal components are independent standard normals") {
  Stream rng(13);
  const int n = 100000;
  double sre = 0.0, sim = 0.0, cross = 0.0, srere = 0.0, simim = 0.0;
  for (int i = 0; i < n; ++i) {
    auto z = rng.cnormal();
    sre += z.real();
    sim += z.imag();
    cross += z.real() * z.imag();
    srere += z.real() * z.real();
    simim += z.imag() * z.imag();
  }
  REQUIRE(std::abs(sre / n) < 0.02);
  REQUIRE(std::abs(sim / n) < 0.02);
  REQUIRE(std::abs(cross / n) < 0.02);
  REQUIRE(std::abs(srere / n - 1.0) < 0.03);
  REQUIRE(std::abs(simim / n - 1.0) < 0.03);
}

TEST_CASE("gamma matches its first two moments and rejects shape below 1") {
  Stream rng(14);
  const double shape = 3.7;
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.gamma(shape);
    REQUIRE(x > 0.0);
    sum += x;
    sum_sq += x * x;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  // Gamma(shape, 1): mean = var = shape.
  REQUIRE(std::abs(mean - shape) < 4.0 * std::sqrt(shape / n));
  REQUIRE(std::abs(var - shape) < 0.15);
  REQUIRE_THROWS_AS(rng.gamma(0.5), std::invalid_argument);
}

TEST_CASE("beta distribution matches a numerically integrated CDF") {
  Stream rng(15);
  const int n = 20000;
  std::vector<double> sample;
  sample.reserve(n);
  for (int i = 0; i < n; ++i) sample.push_back(rng.beta(2.0, 3.0));
  BetaCdf cdf(2.0, 3.0);
  // KS 99.9% critical value is ~1.95/sqrt(n) ~ 0.0138 at this sample size.
  REQUIRE(ks_distance(sample, cdf) < 0.02);

  double sum = 0.0;
  for (double x : sample) sum += x;
  REQUIRE(std::abs(sum / n - 2.0 / 5.0) < 0.01);
}

TEST_CASE("beta endpoints degenerate to point masses") {
  Stream rng(16);
  REQUIRE(rng.beta(1.0, 0.0) == 1.0);
  REQUIRE(rng.beta(0.0, 1.0) == 0.0);
}

TEST_CASE("binomial agrees with the exact PMF") {
  Stream rng(17);
  const int n_draws = 100000, n = 5;
  const double p = 0.37;
  std::vector<int> counts(n + 1, 0);
  for (int i = 0; i < n_draws; ++i) {
    auto x = rng.binomial(n, p);
    REQUIRE(x >= 0);
    REQUIRE(x <= n);
    ++counts[static_cast<int>(x)];
  }
  for (int k = 0; k <= n; ++k) {
    double expect = binom_pmf(n, k, p);
    double obs = counts[k] / static_cast<double>(n_draws);
    double se = std::sqrt(expect * (1.0 - expect) / n_draws);
    REQUIRE(std::abs(obs - expect) < 4.0 * se + 1e-9);
  }
}

TEST_CASE("binomial edge cases and the reflection branch") {
  Stream rng(18);
  REQUIRE(rng.binomial(0, 0.5) == 0);
  REQUIRE(rng.binomial(10, 0.0) == 0);
  REQUIRE(rng.binomial(10, 1.0) == 10);
  REQUIRE_THROWS_AS(rng.binomial(-1, 0.5), std::invalid_argument);

  // p close to 1 forces the q-reflection (the direct zero-term PMF underflows).
  const int n = 200000;
  const double p = 0.99999;
  double sum = 0.0;
  for (int i = 0; i < 200; ++i) {
    auto x = rng.binomial(n, p);
    REQUIRE(x >= 0);
    REQUIRE(x <= n);
    sum += static_cast<double>(x);
  }
  double mean = sum / 200.0;
  double se = std::sqrt(n * p * (1.0 - p) / 200.0);
  REQUIRE(std::abs(mean - n * p) < 5.0 * se);
}

TEST_CASE("binomial mean and variance at moderate parameters") {
  Stream rng(19);
  const int n_draws = 50000, n = 50;
  const double p = 0.3;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n_draws; ++i) {
    double x = static_cast<double>(rng.binomial(n, p));
    sum += x;
    sum_sq += x * x;
  }
  double mean = sum / n_draws;
  double var = sum_sq / n_draws - mean * mean;
  REQUIRE(std::abs(mean - n * p) < 4.0 * std::sqrt(n * p * (1 - p) / n_draws));
  REQUIRE(std::abs(var - n * p * (1 - p)) < 0.4);
}
