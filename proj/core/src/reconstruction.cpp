// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>

#include "flowinv/errors.hpp"
#include "flowinv/inversion.hpp"
#include "flowinv/report.hpp"

namespace flowinv {

Trajectory reconstruct(const VelocityField& field, const Trajectory& inverse, const ResidualTrace* trace,
                       ReconstructionStrategy strategy, const Guidance& guidance) {
  if (inverse.direction != Direction::Inverse) throw ConfigError("reconstruct expects an inverse trajectory");
  const TimeGrid& grid = inverse.grid;
  const std::size_t steps = grid.steps();
  if (inverse.latents.size() != steps + 1) throw ShapeError("inverse trajectory length does not match its grid");

  const bool aligned = strategy == ReconstructionStrategy::DirectAligned ||
                       strategy == ReconstructionStrategy::DirectAlignedCached;
  if (aligned) {
    if (trace == nullptr || trace->deltas.size() != steps) {
      throw ConfigError(std::string(to_string(strategy)) + " reconstruction needs a residual trace with " +
                        std::to_string(steps) + " steps");
    }
    if (strategy == ReconstructionStrategy::DirectAlignedCached && trace->increments.size() != steps) {
      throw ConfigError("DirectAlignedCached reconstruction needs cached increments in the trace");
    }
  }

  if (strategy == ReconstructionStrategy::Vanilla) return euler_sample(field, inverse.front(), grid, guidance);

  Trajectory out{{inverse.front()}, grid, Direction::Forward};
  out.latents.reserve(steps + 1);
  for (std::size_t t = 0; t < steps; ++t) {
    const Latent& z = out.latents.back();
    const double h = grid.delta(t);
    switch (strategy) {
      case ReconstructionStrategy::StepwiseCorrection: {
        // Step from the corrected state; record the prediction before overwrite.
        const Latent& corrected = inverse.at(t);
        out.latents.push_back(axpy(corrected, h, guidance.velocity(field, corrected, grid.sigma(t))));
        break;
      }
      case ReconstructionStrategy::DirectAligned: {
        const Latent aligned_latent = z + trace->deltas[t];
        out.latents.push_back(axpy(z, h, guidance.velocity(field, aligned_latent, grid.sigma(t))));
        break;
      }
      case ReconstructionStrategy::DirectAlignedCached:
        out.latents.push_back(apply_increment(z, trace->increments[t]));
        break;
      case ReconstructionStrategy::Vanilla:
        break;
    }
    if (!out.latents.back().all_finite()) {
      throw NumericError(std::string(to_string(strategy)) + ": non-finite latent at step " + std::to_string(t + 1));
    }
  }
  return out;
}

StepErrors step_level_mse(const Trajectory& recon, const Trajectory& inverse) {
  if (recon.direction != Direction::Forward || inverse.direction != Direction::Inverse) {
    throw ConfigError("step_level_mse compares a forward reconstruction with an inverse trajectory");
  }
  if (recon.latents.size() != inverse.latents.size() || recon.latents.size() < 2) {
    throw ShapeError("step_level_mse: trajectory lengths differ (" + std::to_string(recon.latents.size()) + " vs " +
                     std::to_string(inverse.latents.size()) + ")");
  }
  StepErrors out;
  double total = 0.0;
  for (std::size_t t = 1; t < recon.latents.size(); ++t) {
    const double e = mean_squared_difference(recon.latents[t], inverse.latents[t]);
    out.per_step.push_back(e);
    total += e;
    out.max = std::max(out.max, e);
  }
  out.avg = total / static_cast<double>(out.per_step.size());
  return out;
}

void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path, TrajectoryDump dump) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "step,sigma";
  const std::size_t n = trajectory.latents.empty() ? 0 : trajectory.front().size();
  if (dump == TrajectoryDump::Full) {
    for (std::size_t i = 0; i < n; ++i) out << ",z" << i;
  } else {
    out << ",l2_norm";
  }
  out << '\n';
  for (std::size_t t = 0; t < trajectory.latents.size(); ++t) {
    const Latent& z = trajectory.latents[t];
    out << t << ',' << format_double(trajectory.grid.sigma(t));
    if (dump == TrajectoryDump::Full) {
      for (double v : z.values()) out << ',' << format_double(v);
    } else {
      out << ',' << format_double(std::sqrt(squared_norm(z)));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace flowinv
