// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/rng.hpp"

#include <cmath>
#include <numbers>

namespace flowinv {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(finalize(seed ^ finalize(stream + kGolden))) {}

SeededRng SeededRng::fork(std::uint64_t sub_stream) const {
  return SeededRng(seed_, finalize(stream_ + kGolden) ^ (sub_stream + 1));
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t i = counter_++;
  return finalize(key_ + (i + 1) * kGolden);
}

double SeededRng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double SeededRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Latent gaussian_latent(SeededRng& rng, const Shape& shape) {
  Latent z(shape);
  for (double& v : z.values()) v = rng.normal();
  return z;
}

}  // namespace flowinv
