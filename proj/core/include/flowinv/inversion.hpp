// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "flowinv/rng.hpp"
#include "flowinv/tensor.hpp"
#include "flowinv/time_grid.hpp"
#include "flowinv/velocity_field.hpp"

namespace flowinv {

enum class Direction { Forward, Inverse };

/// Latents indexed by grid step 0..T (index 0 is the noise end).
struct Trajectory {
  std::vector<Latent> latents;
  TimeGrid grid;
  Direction direction;

  const Latent& at(std::size_t t) const { return latents.at(t); }
  const Latent& front() const { return latents.front(); }
  const Latent& back() const { return latents.back(); }
};

/// What the per-step offsets in a ResidualTrace mean.
enum class ResidualKind {
  /// deltas[t] = Z_inv[t+1] - Z_inv[t] (direct alignment).
  LatentDifference,
  /// deltas[t] = Z*_t - Z_inv[t] (linear-interpolation offsets of DNA inversion).
  InterpolationOffset,
  /// deltas[t] = z_last - Z_inv[t], z_last being the Picard iterate the final
  /// velocity of step t was evaluated at (fixed-point inversion).
  IterateOffset,
};

/// Inversion byproducts, indexed by step t = 0..T-1. Entries are stored as
/// computed during inversion and never recomputed. In every kind,
/// Z_inv[t] + deltas[t] is the point where velocities[t] was evaluated, so
/// a forward step from there reproduces the inversion step.
struct ResidualTrace {
  ResidualKind kind = ResidualKind::LatentDifference;
  std::vector<Latent> deltas;
  /// Exact step increments; apply_increment(Z_inv[t], increments[t]) == Z_inv[t+1].
  std::vector<ExactIncrement> increments;
  /// The guided velocity that produced step t (its source-branch reference).
  std::vector<Latent> velocities;
  std::optional<AttentionTape> tape;

  bool has_increments() const { return !increments.empty(); }
};

struct InversionResult {
  Trajectory trajectory;
  ResidualTrace trace;
};

struct InversionOptions {
  bool record_increments = true;
  /// Capture the attention Value tape at steps t < capture_steps.
  bool capture_tape = false;
  std::size_t capture_steps = 0;
};

/// Forward Euler: Z[t+1] = Z[t] + (sigma[t+1] - sigma[t]) * v(Z[t], sigma[t]).
Trajectory euler_sample(const VelocityField& field, const Latent& z0, const TimeGrid& grid,
                        const Guidance& guidance);

/// Forward explicit midpoint: half step to sigma[t] + h/2, full step with the midpoint velocity.
Trajectory midpoint_sample(const VelocityField& field, const Latent& z0, const TimeGrid& grid,
                           const Guidance& guidance);

/// Approximate Euler inversion, t = T-1 down to 0:
///   Z_inv[t] = Z_inv[t+1] - (sigma[t+1] - sigma[t]) * v(Z_inv[t+1], sigma[t]).
/// The velocity takes the known latent Z_inv[t+1] in place of the unknown
/// Z_inv[t] at the same time sigma[t] the forward step will use.
InversionResult euler_invert(const VelocityField& field, const Latent& z1, const TimeGrid& grid,
                             const Guidance& guidance, const InversionOptions& options = {});

/// Reverse explicit midpoint (second order), no residual trace.
Trajectory midpoint_invert(const VelocityField& field, const Latent& z1, const TimeGrid& grid,
                           const Guidance& guidance);

/// Solves z = Z_inv[t+1] - h * v(z, sigma[t]) by `iterations` Picard steps
/// starting from z = Z_inv[t+1]; the first iterate is the Euler estimate, so
/// iterations = 1 reproduces euler_invert exactly and the cost is
/// iterations * T evaluations. Aborts with NumericError when an iterate's norm
/// more than doubles. With one iteration the trace is a LatentDifference
/// trace; otherwise an IterateOffset trace.
InversionResult fixed_point_invert(const VelocityField& field, const Latent& z1, const TimeGrid& grid,
                                   const Guidance& guidance, std::size_t iterations,
                                   const InversionOptions& options = {});

/// Linear-interpolation inversion with an evolving noise estimate S
/// (initially Gaussian from `rng`):
///   Z*_t    = (sigma[t]/sigma[t+1]) Z[t+1] + (1 - sigma[t]/sigma[t+1]) S
///   v_src   = v(Z*_t, sigma[t]),   v_lin = (Z[t+1] - S) / sigma[t+1]
///   Z[t]    = Z*_t + (v_lin - v_src) * h
///   S       = Z[t] - sigma[t] * v_src   (noise the model velocity points back to)
/// deltas[t] = Z*_t - Z[t]; velocities[t] = v_src.
InversionResult dna_invert(const VelocityField& field, const Latent& z1, const TimeGrid& grid,
                           const Guidance& guidance, SeededRng& rng, const InversionOptions& options = {});

/// Same, with an explicit initial noise estimate instead of a random draw.
InversionResult dna_invert_from(const VelocityField& field, const Latent& z1, const TimeGrid& grid,
                                const Guidance& guidance, const Latent& initial_noise,
                                const InversionOptions& options = {});

enum class ReconstructionStrategy { Vanilla, StepwiseCorrection, DirectAligned, DirectAlignedCached };

const char* to_string(ReconstructionStrategy strategy);

/// Forward reconstruction from inverse.latents[0].
///
///  Vanilla              plain Euler sampling.
///  StepwiseCorrection   Euler step from Z_inv[t]; the trajectory records the
///                       prediction before it is overwritten with Z_inv[t+1].
///  DirectAligned        Zhat = Z[t] + deltas[t]; Z[t+1] = Z[t] + h v(Zhat, sigma[t]).
///  DirectAlignedCached  Z[t+1] = apply_increment(Z[t], increments[t]); no evaluations.
///
/// Aligned strategies need a trace (ConfigError otherwise).
Trajectory reconstruct(const VelocityField& field, const Trajectory& inverse, const ResidualTrace* trace,
                       ReconstructionStrategy strategy, const Guidance& guidance);

struct StepErrors {
  /// per_step[t-1] = mean squared difference at grid step t, t = 1..T.
  std::vector<double> per_step;
  double avg = 0.0;
  double max = 0.0;
};

StepErrors step_level_mse(const Trajectory& recon, const Trajectory& inverse);

enum class TrajectoryDump { Full, Norm };

/// CSV with header `step,sigma,<columns>`; Full writes every latent entry
/// (columns z0..z{n-1}), Norm writes a single `l2_norm` column.
void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path, TrajectoryDump dump);

}  // namespace flowinv
