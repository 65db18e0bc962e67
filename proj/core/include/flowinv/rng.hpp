// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "flowinv/tensor.hpp"

namespace flowinv {

/// Counter-based generator: draw i of stream (seed, stream) is
/// splitmix64_finalize(key + i * 0x9E3779B97F4A7C15) where
/// key = splitmix64_finalize(seed ^ splitmix64_finalize(stream)).
/// Output depends only on (seed, stream, i), so results are identical across
/// runs and thread counts. Use fork() to hand independent streams to workers.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent stream derived from this generator's seed.
  SeededRng fork(std::uint64_t sub_stream) const;

  std::uint64_t next_u64();
  /// Uniform in the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller (cosine branch); consumes two draws.
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// i.i.d. N(0, 1) entries in shape `shape`.
Latent gaussian_latent(SeededRng& rng, const Shape& shape);

}  // namespace flowinv
