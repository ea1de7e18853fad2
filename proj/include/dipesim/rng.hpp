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

// Deterministic, key-derived random streams.
//
// A Stream is identified by a 64-bit key. Child streams are derived by hashing
// the parent key with a tag, never by sharing engine state, so the draws taken
// from one stream do not depend on when (or whether) sibling streams are
// consumed. The engine is std::mt19937_64 (bit-exact across platforms); every
// floating-point transform is implemented here on top of the raw 64-bit output
// so that sequences are reproducible across standard libraries. Reproducing a
// sequence therefore only requires the key and the order of calls.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

namespace dipesim {

// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t key_combine(std::uint64_t key, std::uint64_t tag) {
  std::uint64_t h = mix64(tag);
  h ^= key + 0x9e3779b97f4a7c15ull + (h << 12) + (h >> 4);
  return mix64(h);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class Stream {
 public:
  explicit Stream(std::uint64_t key)
      : key_(key), eng_(mix64(key ^ 0x5851f42d4c957f2dull)) {}

  std::uint64_t key() const { return key_; }

  // Children derive from the key alone; the parent's draw position is ignored.
  Stream child(std::uint64_t tag) const { return Stream(key_combine(key_, tag)); }
  Stream child(std::string_view tag) const {
    return Stream(key_combine(key_, fnv1a64(tag)));
  }
  Stream child(std::string_view tag, std::uint64_t index) const {
    return child(tag).child(index);
  }

  std::uint64_t bits() { return eng_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  // Uniform on [0, 2*pi).
  double angle() { return uniform() * 6.283185307179586476925286766559; }

  // Standard normal via Box-Muller; the second deviate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::complex<double> cnormal() {
    double re = normal();
    double im = normal();
    return {re, im};
  }

  // Gamma(shape, 1) by Marsaglia-Tsang squeeze; requires shape >= 1.
  double gamma(double shape) {
    if (shape < 1.0) throw std::invalid_argument("Stream::gamma: shape must be >= 1");
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      double v = t * t * t;
      double u = uniform();
      double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Beta(a, b); degenerate shape-0 endpoints return the point mass.
  double beta(double a, double b) {
    if (b <= 0.0) return 1.0;
    if (a <= 0.0) return 0.0;
    for (;;) {
      double x = gamma(a);
      double y = gamma(b);
      double s = x + y;
      if (s > 0.0) return x / s;
    }
  }

  // Binomial(n, p) by PMF inversion: one uniform per draw in the common case.
  // Reflects to Binomial(n, 1-p) when the zero-term PMF would underflow.
  std::int64_t binomial(std::int64_t n, double p) {
    if (n < 0) throw std::invalid_argument("Stream::binomial: n must be >= 0");
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    double q = 1.0 - p;
    double f = std::pow(q, static_cast<double>(n));
    if (f < 1e-280) return n - binomial(n, q);
    double u = uniform();
    double cdf = f;
    std::int64_t x = 0;
    const double ratio = p / q;
    while (u > cdf && x < n) {
      f *= static_cast<double>(n - x) / static_cast<double>(x + 1) * ratio;
      ++x;
      cdf += f;
    }
    return x;
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dipesim
