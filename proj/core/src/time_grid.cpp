// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/time_grid.hpp"

#include <cmath>
#include <sstream>

#include "flowinv/errors.hpp"

namespace flowinv {

double shifted_sigma(double u, double shift) { return u / (u + shift * (1.0 - u)); }

TimeGrid::TimeGrid(std::size_t steps, Schedule schedule) : schedule_(schedule) {
  if (steps == 0) throw ConfigError("time grid needs at least one step (T >= 1), got T = 0");
  if (schedule.kind == ScheduleKind::Shifted && !(schedule.shift > 0.0 && std::isfinite(schedule.shift))) {
    throw ConfigError("shifted schedule needs a finite shift > 0, got " + std::to_string(schedule.shift));
  }

  sigmas_.resize(steps + 1);
  const double n = static_cast<double>(steps);
  for (std::size_t t = 0; t <= steps; ++t) {
    const double u = static_cast<double>(t) / n;
    sigmas_[t] = schedule.kind == ScheduleKind::Uniform ? u : shifted_sigma(u, schedule.shift);
  }
  sigmas_.front() = 0.0;
  sigmas_.back() = 1.0;

  deltas_.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    deltas_[t] = sigmas_[t + 1] - sigmas_[t];
    if (!(deltas_[t] > 0.0)) {
      throw ConfigError("time grid is not strictly increasing at step " + std::to_string(t));
    }
  }
}

std::string TimeGrid::describe() const {
  std::ostringstream os;
  os << "T=" << steps() << " ";
  if (schedule_.kind == ScheduleKind::Uniform) {
    os << "uniform";
  } else {
    os << "shifted(" << schedule_.shift << ")";
  }
  return os.str();
}

TimeGrid make_time_grid(std::size_t steps, Schedule schedule) { return TimeGrid(steps, schedule); }

}  // namespace flowinv
