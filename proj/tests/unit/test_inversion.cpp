// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "flowinv/analytic_field.hpp"
#include "flowinv/errors.hpp"
#include "flowinv/inversion.hpp"
#include "flowinv/mlp_field.hpp"
#include "oracles.hpp"

using namespace flowinv;
using flowinv::testing::random_latent;

namespace {

const Guidance kPlain{Condition{}, Condition{}, 1.0};

Guidance moon_guidance() { return Guidance{moon_condition(0, 2), Condition::null(2), 1.0}; }

Latent moon_points(std::uint64_t seed, std::size_t n = 32) {
  SeededRng rng(seed, 9);
  return sample_two_moons(rng, n, 0);
}

}  // namespace

TEST_SUITE("inversion") {
  TEST_CASE("constant field: sampling telescopes") {
    const Latent c(Shape::flat(2), {0.5, -1.25});
    const ConstantField field(c);
    const Latent z0(Shape::flat(2), {1.0, 2.0});
    const Trajectory traj = euler_sample(field, z0, make_time_grid(4), kPlain);
    CHECK(traj.back()[0] == 1.5);
    CHECK(traj.back()[1] == 0.75);
  }

  TEST_CASE("linear field: two Euler steps") {
    const LinearField field(1.0);
    const Latent z0(Shape::flat(1), {2.0});
    const Trajectory traj = euler_sample(field, z0, make_time_grid(2), kPlain);
    CHECK(traj.at(1)[0] == 3.0);
    CHECK(traj.at(2)[0] == 4.5);
  }

  TEST_CASE("constant field: every inverter is exact and strategies coincide") {
    const Latent c(Shape::flat(2), {0.5, -1.25});
    const ConstantField field(c);
    const Latent z1(Shape::flat(2), {1.5, 0.75});
    const TimeGrid grid = make_time_grid(4);
    const InversionResult euler = euler_invert(field, z1, grid, kPlain);
    CHECK(euler.trajectory.front()[0] == 1.0);
    CHECK(euler.trajectory.front()[1] == 2.0);
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(euler.trace.deltas[t][0] == doctest::Approx(grid.delta(t) * 0.5));
    }
    const Trajectory mid = midpoint_invert(field, z1, grid, kPlain);
    const InversionResult fixed = fixed_point_invert(field, z1, grid, kPlain, 3);
    for (std::size_t t = 0; t <= 4; ++t) {
      CHECK(bitwise_equal(mid.at(t), euler.trajectory.at(t)));
      CHECK(bitwise_equal(fixed.trajectory.at(t), euler.trajectory.at(t)));
    }
    for (auto s : {ReconstructionStrategy::Vanilla, ReconstructionStrategy::StepwiseCorrection,
                   ReconstructionStrategy::DirectAligned, ReconstructionStrategy::DirectAlignedCached}) {
      const Trajectory rec = reconstruct(field, euler.trajectory, &euler.trace, s, kPlain);
      const StepErrors e = step_level_mse(rec, euler.trajectory);
      CHECK(e.max == 0.0);
    }
  }

  TEST_CASE("trace residuals and cached increments") {
    const MlpField& field = flowinv::testing::trained_two_moons();
    const InversionResult inv = euler_invert(field, moon_points(1), make_time_grid(30), moon_guidance());
    REQUIRE(inv.trace.deltas.size() == 30);
    REQUIRE(inv.trace.increments.size() == 30);
    for (std::size_t t = 0; t < 30; ++t) {
      const Latent& lower = inv.trajectory.at(t);
      const Latent& upper = inv.trajectory.at(t + 1);
      REQUIRE(bitwise_equal(apply_increment(lower, inv.trace.increments[t]), upper));
      const Latent summed = lower + inv.trace.deltas[t];
      for (std::size_t i = 0; i < upper.size(); ++i) {
        // Plain residual addition is exact to within one ulp of the operands.
        const double scale = std::max(std::abs(lower[i]), std::abs(upper[i]));
        REQUIRE(std::abs(summed[i] - upper[i]) <= std::nextafter(scale, 2 * scale + 1) - scale);
      }
    }
  }

  TEST_CASE("cached reconstruction is exact on arbitrary fields") {
    SeededRng rng(31);
    const AnalyticGaussianField field({{1.0, -2.0, 0.5}, 0.3});
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t steps = 1 + flowinv::testing::random_index(rng, 40);
      const TimeGrid grid = make_time_grid(steps, Schedule::shifted(0.5 + 3.0 * rng.uniform()));
      const Latent z1 = random_latent(rng, Shape::grid(3, 2, 2), 3.0);
      const InversionResult inv = euler_invert(field, z1, grid, kPlain);
      const CountingField counted(field);
      const Trajectory rec =
          reconstruct(counted, inv.trajectory, &inv.trace, ReconstructionStrategy::DirectAlignedCached, kPlain);
      CHECK(counted.count() == 0);
      const StepErrors e = step_level_mse(rec, inv.trajectory);
      for (double v : e.per_step) REQUIRE(v == 0.0);
    }
  }

  TEST_CASE("aligned reconstruction beats vanilla on the trained field") {
    const MlpField& field = flowinv::testing::trained_two_moons();
    const TimeGrid grid = make_time_grid(30);
    const InversionResult inv = euler_invert(field, moon_points(2), grid, moon_guidance());
    const Trajectory vanilla = reconstruct(field, inv.trajectory, &inv.trace, ReconstructionStrategy::Vanilla,
                                           moon_guidance());
    const Trajectory aligned = reconstruct(field, inv.trajectory, &inv.trace, ReconstructionStrategy::DirectAligned,
                                           moon_guidance());
    const double e_vanilla = mean_squared_difference(vanilla.back(), inv.trajectory.back());
    const double e_aligned = mean_squared_difference(aligned.back(), inv.trajectory.back());
    CHECK(e_vanilla > e_aligned);
    CHECK(step_level_mse(aligned, inv.trajectory).avg <= 1e-12);
  }

  TEST_CASE("vanilla step error grows along the trajectory") {
    const MlpField& field = flowinv::testing::trained_two_moons();
    const InversionResult inv = euler_invert(field, moon_points(3), make_time_grid(30), moon_guidance());
    const Trajectory rec =
        reconstruct(field, inv.trajectory, &inv.trace, ReconstructionStrategy::Vanilla, moon_guidance());
    const StepErrors e = step_level_mse(rec, inv.trajectory);
    const double first = *std::max_element(e.per_step.begin(), e.per_step.begin() + 10);
    const double last = *std::max_element(e.per_step.end() - 10, e.per_step.end());
    CHECK(last >= first);
  }

  TEST_CASE("evaluation counts") {
    const MlpField& field = flowinv::testing::trained_two_moons();
    CountingField counted(field);
    const TimeGrid grid = make_time_grid(12);
    const Latent z1 = moon_points(4, 8);
    const InversionResult inv = euler_invert(counted, z1, grid, moon_guidance());
    CHECK(counted.count() == 12);
    for (std::size_t k : {1U, 2U, 3U}) {
      counted.reset();
      fixed_point_invert(counted, z1, grid, moon_guidance(), k);
      CHECK(counted.count() == k * 12);
    }
    counted.reset();
    reconstruct(counted, inv.trajectory, &inv.trace, ReconstructionStrategy::Vanilla, moon_guidance());
    const auto vanilla = counted.count();
    counted.reset();
    reconstruct(counted, inv.trajectory, &inv.trace, ReconstructionStrategy::DirectAligned, moon_guidance());
    CHECK(counted.count() == vanilla);
    CHECK(vanilla == 12);
    counted.reset();
    midpoint_invert(counted, z1, grid, moon_guidance());
    CHECK(counted.count() == 24);
  }

  TEST_CASE("fixed point with one iteration is Euler inversion") {
    const MlpField& field = flowinv::testing::trained_two_moons();
    const TimeGrid grid = make_time_grid(30);
    const Latent z1 = moon_points(5);
    const InversionResult euler = euler_invert(field, z1, grid, moon_guidance());
    const InversionResult fixed = fixed_point_invert(field, z1, grid, moon_guidance(), 1);
    for (std::size_t t = 0; t <= 30; ++t) REQUIRE(bitwise_equal(euler.trajectory.at(t), fixed.trajectory.at(t)));
  }

  TEST_CASE("fixed point trace offsets point at the last evaluated iterate") {
    const MlpField& field = flowinv::testing::trained_two_moons();
    const TimeGrid grid = make_time_grid(30);
    const Latent z1 = moon_points(8);
    CHECK(fixed_point_invert(field, z1, grid, moon_guidance(), 1).trace.kind == ResidualKind::LatentDifference);
    for (std::size_t k : {2U, 3U}) {
      const InversionResult inv = fixed_point_invert(field, z1, grid, moon_guidance(), k);
      CHECK(inv.trace.kind == ResidualKind::IterateOffset);
      const Trajectory rec =
          reconstruct(field, inv.trajectory, &inv.trace, ReconstructionStrategy::DirectAligned, moon_guidance());
      const Trajectory cached = reconstruct(field, inv.trajectory, &inv.trace,
                                            ReconstructionStrategy::DirectAlignedCached, moon_guidance());
      CHECK(step_level_mse(rec, inv.trajectory).avg < 1e-20);
      CHECK(step_level_mse(cached, inv.trajectory).max == 0.0);
    }
  }

  TEST_CASE("fixed point on a linear field converges geometrically") {
    // v(z) = z: one step solves z = Z1 - h z, i.e. z* = Z1 / (1 + h); the
    // Picard error shrinks by a factor h per iteration.
    const LinearField field(1.0);
    const Latent z1(Shape::flat(1), {1.0});
    const TimeGrid fine = make_time_grid(4);
    const double step = fine.delta(3);
    const double exact = 1.0 / (1.0 + step);
    double previous_error = std::abs(1.0 - exact);
    for (std::size_t k = 1; k <= 6; ++k) {
      // Look at the last step of a 4-step grid only.
      const InversionResult r = fixed_point_invert(field, z1, fine, kPlain, k);
      const double error = std::abs(r.trajectory.at(3)[0] - exact);
      CHECK(error == doctest::Approx(previous_error * step).epsilon(1e-9));
      previous_error = error;
    }
  }

  TEST_CASE("fixed point divergence is detected") {
    const LinearField field(50.0);
    const Latent z1(Shape::flat(1), {1.0});
    CHECK_THROWS_AS(fixed_point_invert(field, z1, make_time_grid(2), kPlain, 4), NumericError);
    CHECK_THROWS_AS(fixed_point_invert(field, z1, make_time_grid(2), kPlain, 0), ConfigError);
  }

  TEST_CASE("midpoint has smaller local error on the linear field") {
    // Exact backward flow of v(z) = z over a step h: z_prev = z * exp(-h).
    const LinearField field(1.0);
    const Latent z1(Shape::flat(1), {1.0});
    for (std::size_t steps : {2U, 5U, 10U}) {
      const TimeGrid grid = make_time_grid(steps);
      const double exact = std::exp(-grid.delta(steps - 1));
      const double euler = euler_invert(field, z1, grid, kPlain).trajectory.at(steps - 1)[0];
      const double mid = midpoint_invert(field, z1, grid, kPlain).at(steps - 1)[0];
      CHECK(std::abs(mid - exact) < std::abs(euler - exact));
    }
  }

  TEST_CASE("midpoint round trip is at least as good as Euler on the trained field") {
    const MlpField& field = flowinv::testing::trained_two_moons();
    const TimeGrid grid = make_time_grid(30);
    const Latent z1 = moon_points(6);
    const Trajectory mid = midpoint_invert(field, z1, grid, moon_guidance());
    const Trajectory mid_rec = midpoint_sample(field, mid.front(), grid, moon_guidance());
    const InversionResult euler = euler_invert(field, z1, grid, moon_guidance());
    const Trajectory euler_rec = euler_sample(field, euler.trajectory.front(), grid, moon_guidance());
    CHECK(mean_squared_difference(mid_rec.back(), z1) <= mean_squared_difference(euler_rec.back(), z1));
  }

  TEST_CASE("dna inversion on a consistent line is exact") {
    // Constant field c with noise chosen on the true line S = z1 - c.
    const Latent c(Shape::flat(2), {1.0, -0.5});
    const ConstantField field(c);
    const Latent z1(Shape::flat(2), {0.25, 2.0});
    const TimeGrid grid = make_time_grid(6);
    const InversionResult dna = dna_invert_from(field, z1, grid, kPlain, z1 - c);
    const InversionResult euler = euler_invert(field, z1, grid, kPlain);
    for (std::size_t t = 0; t <= 6; ++t) {
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(dna.trajectory.at(t)[i] == doctest::Approx(euler.trajectory.at(t)[i]).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("dna offsets and aligned reconstruction") {
    const MlpField& field = flowinv::testing::trained_two_moons();
    const TimeGrid grid = make_time_grid(30);
    SeededRng rng(7);
    const InversionResult dna = dna_invert(field, moon_points(7), grid, moon_guidance(), rng);
    CHECK(dna.trace.kind == ResidualKind::InterpolationOffset);
    REQUIRE(dna.trace.deltas.size() == 30);
    const Trajectory rec =
        reconstruct(field, dna.trajectory, &dna.trace, ReconstructionStrategy::DirectAligned, moon_guidance());
    const StepErrors e = step_level_mse(rec, dna.trajectory);
    CHECK(std::isfinite(e.avg));
    CHECK(e.avg < 1e-20);
  }

  TEST_CASE("dna inversion is reproducible per seed") {
    const MlpField& field = flowinv::testing::trained_two_moons();
    const TimeGrid grid = make_time_grid(10);
    SeededRng a(3), b(3);
    const Latent z1 = moon_points(8, 8);
    CHECK(bitwise_equal(dna_invert(field, z1, grid, moon_guidance(), a).trajectory.front(),
                        dna_invert(field, z1, grid, moon_guidance(), b).trajectory.front()));
  }

  TEST_CASE("aligned strategies need a trace") {
    const LinearField field;
    const InversionResult inv = euler_invert(field, Latent(Shape::flat(1), {1.0}), make_time_grid(3), kPlain);
    CHECK_THROWS_AS(reconstruct(field, inv.trajectory, nullptr, ReconstructionStrategy::DirectAligned, kPlain),
                    ConfigError);
    InversionOptions no_cache;
    no_cache.record_increments = false;
    const InversionResult bare = euler_invert(field, Latent(Shape::flat(1), {1.0}), make_time_grid(3), kPlain, no_cache);
    CHECK_THROWS_AS(
        reconstruct(field, bare.trajectory, &bare.trace, ReconstructionStrategy::DirectAlignedCached, kPlain),
        ConfigError);
    CHECK_NOTHROW(reconstruct(field, inv.trajectory, nullptr, ReconstructionStrategy::Vanilla, kPlain));
  }

  TEST_CASE("step-level mse") {
    const LinearField field;
    const TimeGrid grid = make_time_grid(1);
    const InversionResult inv = euler_invert(field, Latent(Shape::flat(1), {1.0}), grid, kPlain);
    Trajectory rec{inv.trajectory.latents, grid, Direction::Forward};
    CHECK(step_level_mse(rec, inv.trajectory).max == 0.0);
    rec.latents[1][0] += 0.1;
    const StepErrors e = step_level_mse(rec, inv.trajectory);
    REQUIRE(e.per_step.size() == 1);
    CHECK(e.per_step[0] == doctest::Approx(0.01));
    Trajectory shorter{{inv.trajectory.front()}, grid, Direction::Forward};
    CHECK_THROWS_AS(step_level_mse(shorter, inv.trajectory), ShapeError);
    CHECK_THROWS_AS(step_level_mse(inv.trajectory, inv.trajectory), ConfigError);
  }

  TEST_CASE("non-finite latents abort with the step index") {
    // Finite velocities whose step overflows the latent.
    const LinearField field(1.0);
    try {
      euler_sample(field, Latent(Shape::flat(1), {1.5e308}), make_time_grid(3), kPlain);
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
  }

  TEST_CASE("trajectory dump") {
    flowinv::testing::TempDir dir("traj");
    const LinearField field;
    const Trajectory traj = euler_sample(field, Latent(Shape::flat(2), {1.0, 2.0}), make_time_grid(2), kPlain);
    write_trajectory_csv(traj, dir / "full.csv", TrajectoryDump::Full);
    write_trajectory_csv(traj, dir / "norm.csv", TrajectoryDump::Norm);
    const auto full = flowinv::testing::naive_csv(dir / "full.csv");
    REQUIRE(full.size() == 4);
    CHECK(full[0] == std::vector<std::string>{"step", "sigma", "z0", "z1"});
    CHECK(std::stod(full[2][2]) == 1.5);
    const auto norm = flowinv::testing::naive_csv(dir / "norm.csv");
    CHECK(norm[0] == std::vector<std::string>{"step", "sigma", "l2_norm"});
    CHECK(std::stod(norm[1][2]) == doctest::Approx(std::sqrt(5.0)));
  }
}
