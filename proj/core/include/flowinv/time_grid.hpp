// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace flowinv {

enum class ScheduleKind { Uniform, Shifted };

struct Schedule {
  ScheduleKind kind = ScheduleKind::Uniform;
  double shift = 1.0;

  static Schedule uniform() { return {}; }
  static Schedule shifted(double shift) { return {ScheduleKind::Shifted, shift}; }
};

/// Discretized schedule sigma_0 = 0 < sigma_1 < ... < sigma_T = 1 shared by
/// sampling and inversion (sigma = 0 is noise, sigma = 1 is data).
///
/// Uniform:  sigma_t = t / T.
/// Shifted:  with u = t / T, sigma_t = u / (u + shift * (1 - u)).
///           shift > 1 spends more steps near the noise end, shift < 1 near
///           the data end; both endpoints map to themselves exactly.
///
/// Step sizes delta(t) = sigma_{t+1} - sigma_t are computed once at
/// construction so every sampler and inverter uses bit-identical values.
class TimeGrid {
 public:
  TimeGrid(std::size_t steps, Schedule schedule);

  std::size_t steps() const { return sigmas_.size() - 1; }
  std::span<const double> sigmas() const { return sigmas_; }
  double sigma(std::size_t t) const { return sigmas_[t]; }
  double delta(std::size_t t) const { return deltas_[t]; }
  const Schedule& schedule() const { return schedule_; }

  std::string describe() const;

 private:
  Schedule schedule_;
  std::vector<double> sigmas_;
  std::vector<double> deltas_;
};

/// Validates T >= 1 and shift > 0; throws ConfigError otherwise.
TimeGrid make_time_grid(std::size_t steps, Schedule schedule = Schedule::uniform());

/// The shifted-schedule map applied to a single u in [0, 1].
double shifted_sigma(double u, double shift);

}  // namespace flowinv
