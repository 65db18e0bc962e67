// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowinv/errors.hpp"

namespace flowinv {
namespace {

void check_step(const Latent& z, const char* what, std::size_t step) {
  if (!z.all_finite()) {
    throw NumericError(std::string(what) + ": non-finite latent at step " + std::to_string(step));
  }
}

// `evaluated` is the latent the step's velocity was computed at.
void record_step(ResidualTrace& trace, const Latent& lower, const Latent& upper, const Latent& evaluated,
                 Latent velocity, const InversionOptions& options) {
  trace.deltas.push_back(evaluated - lower);
  if (options.record_increments) trace.increments.push_back(exact_difference(lower, upper));
  trace.velocities.push_back(std::move(velocity));
}

// The inverters walk t = T-1 .. 0 but store step t at index t.
void reverse_trace(ResidualTrace& trace) {
  std::reverse(trace.deltas.begin(), trace.deltas.end());
  std::reverse(trace.increments.begin(), trace.increments.end());
  std::reverse(trace.velocities.begin(), trace.velocities.end());
}

}  // namespace

Trajectory euler_sample(const VelocityField& field, const Latent& z0, const TimeGrid& grid,
                        const Guidance& guidance) {
  Trajectory traj{{z0}, grid, Direction::Forward};
  traj.latents.reserve(grid.steps() + 1);
  check_step(z0, "euler_sample", 0);
  for (std::size_t t = 0; t < grid.steps(); ++t) {
    const Latent v = guidance.velocity(field, traj.latents.back(), grid.sigma(t));
    traj.latents.push_back(axpy(traj.latents.back(), grid.delta(t), v));
    check_step(traj.latents.back(), "euler_sample", t + 1);
  }
  return traj;
}

Trajectory midpoint_sample(const VelocityField& field, const Latent& z0, const TimeGrid& grid,
                           const Guidance& guidance) {
  Trajectory traj{{z0}, grid, Direction::Forward};
  traj.latents.reserve(grid.steps() + 1);
  check_step(z0, "midpoint_sample", 0);
  for (std::size_t t = 0; t < grid.steps(); ++t) {
    const double h = grid.delta(t);
    const Latent& z = traj.latents.back();
    const Latent mid = axpy(z, 0.5 * h, guidance.velocity(field, z, grid.sigma(t)));
    const Latent v_mid = guidance.velocity(field, mid, grid.sigma(t) + 0.5 * h);
    traj.latents.push_back(axpy(z, h, v_mid));
    check_step(traj.latents.back(), "midpoint_sample", t + 1);
  }
  return traj;
}

InversionResult euler_invert(const VelocityField& field, const Latent& z1, const TimeGrid& grid,
                             const Guidance& guidance, const InversionOptions& options) {
  const std::size_t steps = grid.steps();
  InversionResult out{Trajectory{std::vector<Latent>(steps + 1), grid, Direction::Inverse}, ResidualTrace{}};
  if (options.capture_tape) out.trace.tape.emplace();
  out.trajectory.latents[steps] = z1;
  check_step(z1, "euler_invert", steps);
  for (std::size_t t = steps; t-- > 0;) {
    const Latent& upper = out.trajectory.latents[t + 1];
    TapeHook hook;
    if (options.capture_tape && t < options.capture_steps) hook = TapeHook{TapeMode::Capture, &*out.trace.tape, t};
    Latent v = guidance.velocity(field, upper, grid.sigma(t), hook);
    out.trajectory.latents[t] = axpy(upper, -grid.delta(t), v);
    check_step(out.trajectory.latents[t], "euler_invert", t);
    record_step(out.trace, out.trajectory.latents[t], upper, upper, std::move(v), options);
  }
  reverse_trace(out.trace);
  return out;
}

Trajectory midpoint_invert(const VelocityField& field, const Latent& z1, const TimeGrid& grid,
                           const Guidance& guidance) {
  const std::size_t steps = grid.steps();
  Trajectory traj{std::vector<Latent>(steps + 1), grid, Direction::Inverse};
  traj.latents[steps] = z1;
  check_step(z1, "midpoint_invert", steps);
  for (std::size_t t = steps; t-- > 0;) {
    const double h = grid.delta(t);
    const Latent& upper = traj.latents[t + 1];
    const Latent mid = axpy(upper, -0.5 * h, guidance.velocity(field, upper, grid.sigma(t + 1)));
    const Latent v_mid = guidance.velocity(field, mid, grid.sigma(t) + 0.5 * h);
    traj.latents[t] = axpy(upper, -h, v_mid);
    check_step(traj.latents[t], "midpoint_invert", t);
  }
  return traj;
}

InversionResult fixed_point_invert(const VelocityField& field, const Latent& z1, const TimeGrid& grid,
                                   const Guidance& guidance, std::size_t iterations,
                                   const InversionOptions& options) {
  if (iterations == 0) throw ConfigError("fixed_point_invert needs at least one iteration");
  const std::size_t steps = grid.steps();
  InversionResult out{Trajectory{std::vector<Latent>(steps + 1), grid, Direction::Inverse}, ResidualTrace{}};
  out.trajectory.latents[steps] = z1;
  check_step(z1, "fixed_point_invert", steps);
  for (std::size_t t = steps; t-- > 0;) {
    const double h = grid.delta(t);
    const Latent& upper = out.trajectory.latents[t + 1];
    Latent z = upper;
    Latent evaluated;
    Latent v;
    double norm = std::sqrt(squared_norm(z));
    for (std::size_t k = 0; k < iterations; ++k) {
      v = guidance.velocity(field, z, grid.sigma(t));
      evaluated = z;
      Latent next = axpy(upper, -h, v);
      check_step(next, "fixed_point_invert", t);
      const double next_norm = std::sqrt(squared_norm(next));
      if (next_norm > 2.0 * std::max(norm, 1e-12)) {
        throw NumericError("fixed_point_invert diverged at step " + std::to_string(t) + " (iteration " +
                           std::to_string(k + 1) + ": norm " + std::to_string(norm) + " -> " +
                           std::to_string(next_norm) + ")");
      }
      z = std::move(next);
      norm = next_norm;
    }
    out.trajectory.latents[t] = std::move(z);
    record_step(out.trace, out.trajectory.latents[t], upper, evaluated, std::move(v), options);
  }
  reverse_trace(out.trace);
  if (iterations > 1) out.trace.kind = ResidualKind::IterateOffset;
  return out;
}

InversionResult dna_invert(const VelocityField& field, const Latent& z1, const TimeGrid& grid,
                           const Guidance& guidance, SeededRng& rng, const InversionOptions& options) {
  return dna_invert_from(field, z1, grid, guidance, gaussian_latent(rng, z1.shape()), options);
}

InversionResult dna_invert_from(const VelocityField& field, const Latent& z1, const TimeGrid& grid,
                                const Guidance& guidance, const Latent& initial_noise,
                                const InversionOptions& options) {
  require_same_shape(z1, initial_noise, "dna_invert noise");
  const std::size_t steps = grid.steps();
  InversionResult out{Trajectory{std::vector<Latent>(steps + 1), grid, Direction::Inverse}, ResidualTrace{}};
  out.trace.kind = ResidualKind::InterpolationOffset;
  out.trajectory.latents[steps] = z1;
  check_step(z1, "dna_invert", steps);
  Latent noise = initial_noise;
  for (std::size_t t = steps; t-- > 0;) {
    const double h = grid.delta(t);
    const double upper_sigma = grid.sigma(t + 1);
    if (!(upper_sigma > 0.0)) throw NumericError("dna_invert: zero sigma divisor at step " + std::to_string(t));
    const double ratio = grid.sigma(t) / upper_sigma;
    const Latent& upper = out.trajectory.latents[t + 1];

    Latent interp(upper.shape());
    Latent v_linear(upper.shape());
    for (std::size_t i = 0; i < upper.size(); ++i) {
      interp[i] = ratio * upper[i] + (1.0 - ratio) * noise[i];
      v_linear[i] = (upper[i] - noise[i]) / upper_sigma;
    }
    Latent v_src = guidance.velocity(field, interp, grid.sigma(t));
    Latent lower(upper.shape());
    for (std::size_t i = 0; i < upper.size(); ++i) {
      const double dv = v_linear[i] - v_src[i];
      lower[i] = interp[i] + dv * h;
    }
    check_step(lower, "dna_invert", t);
    for (std::size_t i = 0; i < upper.size(); ++i) noise[i] = lower[i] - grid.sigma(t) * v_src[i];

    out.trace.deltas.push_back(interp - lower);
    if (options.record_increments) out.trace.increments.push_back(exact_difference(lower, upper));
    out.trace.velocities.push_back(std::move(v_src));
    out.trajectory.latents[t] = std::move(lower);
  }
  reverse_trace(out.trace);
  return out;
}

const char* to_string(ReconstructionStrategy strategy) {
  switch (strategy) {
    case ReconstructionStrategy::Vanilla:
      return "Vanilla";
    case ReconstructionStrategy::StepwiseCorrection:
      return "StepwiseCorrection";
    case ReconstructionStrategy::DirectAligned:
      return "DirectAligned";
    case ReconstructionStrategy::DirectAlignedCached:
      return "DirectAlignedCached";
  }
  return "?";
}

}  // namespace flowinv
