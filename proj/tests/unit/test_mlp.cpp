// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "doctest.h"
#include "flowinv/errors.hpp"
#include "flowinv/mlp_field.hpp"
#include "oracles.hpp"

using namespace flowinv;
using flowinv::testing::TempDir;

namespace {

TrainingBatch random_batch(SeededRng& rng, std::size_t n, const MlpConfig& cfg) {
  TrainingBatch b;
  b.size = n;
  for (std::size_t i = 0; i < n * cfg.point_dim; ++i) {
    b.z1.push_back(rng.normal());
    b.z0.push_back(rng.normal());
  }
  for (std::size_t i = 0; i < n; ++i) b.t.push_back(rng.uniform());
  for (std::size_t i = 0; i < n * cfg.condition_dim; ++i) b.cond.push_back(rng.uniform() < 0.5 ? 0.0 : 1.0);
  return b;
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), kGradCheckFloor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_SUITE("mlp") {
  TEST_CASE("analytic gradient matches an independent finite-difference oracle") {
    for (std::uint64_t seed : {1U, 2U, 3U}) {
      SeededRng rng(seed);
      const MlpField field = MlpField::random({}, rng);
      const TrainingBatch batch = random_batch(rng, 8, field.config());
      std::vector<double> grad(field.parameter_count());
      field.loss_and_gradient(batch, grad);
      const auto fd = flowinv::testing::finite_difference_gradient(field, batch, 1e-5);
      CHECK(max_relative_error(grad, fd) < 1e-5);
      CHECK(grad_check(field, batch, 1e-5) < 1e-5);
    }
  }

  TEST_CASE("grad_check on single latents for random seeds") {
    for (std::uint64_t seed : {10U, 11U}) {
      SeededRng rng(seed);
      const MlpField field = MlpField::random({}, rng);
      const Latent z = gaussian_latent(rng, Shape::grid(2, 1, 3));
      CHECK(grad_check(field, z, 0.3, Condition::basis("c", 1, 2), 1e-5) < 1e-5);
    }
  }

  TEST_CASE("zero-weight network has the forced gradient") {
    const MlpField field(MlpConfig{});
    SeededRng rng(4);
    const TrainingBatch batch = random_batch(rng, 5, field.config());
    std::vector<double> grad(field.parameter_count());
    field.loss_and_gradient(batch, grad);
    // Output bias gradient: -2 * mean target; everything else vanishes.
    const std::size_t d = field.config().point_dim;
    const std::size_t bias_start = field.parameter_count() - d;
    for (std::size_t j = 0; j < d; ++j) {
      double target = 0.0;
      for (std::size_t i = 0; i < batch.size; ++i) target += batch.z1[i * d + j] - batch.z0[i * d + j];
      CHECK(grad[bias_start + j] == doctest::Approx(-2.0 * target / static_cast<double>(batch.size)));
    }
    for (std::size_t k = 0; k < bias_start; ++k) REQUIRE(grad[k] == 0.0);
    const auto fd = flowinv::testing::finite_difference_gradient(field, batch, 1e-5);
    CHECK(max_relative_error(grad, fd) < 1e-7);
  }

  TEST_CASE("optimal fixed pair has zero loss and no update") {
    MlpField field(MlpConfig{});
    TrainingBatch b;
    b.size = 1;
    b.z1 = {0.4, -0.2};
    b.z0 = {0.4, -0.2};
    b.t = {0.5};
    b.cond = {1.0, 0.0};
    const auto before = std::vector<double>(field.parameters().begin(), field.parameters().end());
    CHECK(rf_training_step(field, b, 0.1) == 0.0);
    CHECK(std::equal(before.begin(), before.end(), field.parameters().begin()));
  }

  TEST_CASE("zero learning rate leaves parameters bit-identical") {
    SeededRng rng(6);
    MlpField field = MlpField::random({}, rng);
    const TrainingBatch batch = random_batch(rng, 16, field.config());
    const auto before = std::vector<double>(field.parameters().begin(), field.parameters().end());
    const double loss = rf_training_step(field, batch, 0.0);
    CHECK(loss > 0.0);
    CHECK(std::memcmp(before.data(), field.parameters().data(), before.size() * sizeof(double)) == 0);
  }

  TEST_CASE("training step errors") {
    SeededRng rng(6);
    MlpField field = MlpField::random({}, rng);
    TrainingBatch batch = random_batch(rng, 4, field.config());
    CHECK_THROWS_AS(rf_training_step(field, batch, -1.0), ConfigError);
    CHECK_THROWS_AS(rf_training_step(field, TrainingBatch{}, 0.1), ConfigError);
    batch.z1[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(rf_training_step(field, batch, 0.1), NumericError);
    CHECK_THROWS_AS(grad_check(field, batch, 1e-3), ConfigError);
  }

  TEST_CASE("two-moons training reduces the running loss") {
    SeededRng init(0, 1);
    MlpField field = MlpField::random({}, init);
    const TrainingLog log = train_two_moons(field, TrainingOptions{});
    CHECK(log.losses.size() == 2000);
    CHECK(log.window == 100);
    // The regression target has a large irreducible variance for independent
    // noise/data pairs, so the running loss plateaus well above zero; the
    // bound is set from measured runs (ratio ~0.77).
    CHECK(log.final_running < 0.85 * log.initial_running);
    const MlpField& shared = flowinv::testing::trained_two_moons();
    CHECK(std::memcmp(field.parameters().data(), shared.parameters().data(),
                      field.parameter_count() * sizeof(double)) == 0);
  }

  TEST_CASE("checkpoint round trip is bit exact") {
    TempDir dir("ckpt");
    SeededRng rng(12);
    const MlpField field = MlpField::random(MlpConfig{2, 3, 8}, rng);
    field.save(dir / "model.bin");
    const MlpField loaded = MlpField::load(dir / "model.bin");
    CHECK(loaded.config() == field.config());
    REQUIRE(loaded.parameter_count() == field.parameter_count());
    CHECK(std::memcmp(loaded.parameters().data(), field.parameters().data(),
                      field.parameter_count() * sizeof(double)) == 0);
    const std::string bytes = flowinv::testing::read_file(dir / "model.bin");
    CHECK(bytes.substr(0, 4) == "RFML");
    CHECK(bytes.size() == 16 + 8 * field.parameter_count());
  }

  TEST_CASE("corrupt checkpoints are format errors") {
    TempDir dir("bad-ckpt");
    flowinv::testing::write_file(dir / "short.bin", "RFML");
    CHECK_THROWS_AS(MlpField::load(dir / "short.bin"), FormatError);
    flowinv::testing::write_file(dir / "magic.bin", std::string(64, 'x'));
    CHECK_THROWS_AS(MlpField::load(dir / "magic.bin"), FormatError);
    CHECK_THROWS_AS(MlpField::load(dir / "missing.bin"), FormatError);

    SeededRng rng(1);
    MlpField::random({}, rng).save(dir / "ok.bin");
    std::string bytes = flowinv::testing::read_file(dir / "ok.bin");
    flowinv::testing::write_file(dir / "truncated.bin", bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(MlpField::load(dir / "truncated.bin"), FormatError);
    bytes[4] = 9;
    flowinv::testing::write_file(dir / "version.bin", bytes);
    CHECK_THROWS_AS(MlpField::load(dir / "version.bin"), FormatError);
  }

  TEST_CASE("two-moons samples") {
    SeededRng rng(3);
    const Latent upper = sample_two_moons(rng, 500, 0);
    const Latent lower = sample_two_moons(rng, 500, 1);
    CHECK(upper.shape() == Shape::grid(2, 1, 500));
    double upper_y = 0.0, lower_y = 0.0;
    for (std::size_t p = 0; p < 500; ++p) {
      upper_y += upper.at(1, p);
      lower_y += lower.at(1, p);
    }
    CHECK(upper_y > lower_y);
  }

  TEST_CASE("per-pixel evaluation") {
    SeededRng rng(14);
    const MlpField field = MlpField::random({}, rng);
    const Latent z = gaussian_latent(rng, Shape::grid(2, 2, 2));
    const Condition c = moon_condition(1, 2);
    const Latent v = field.eval(z, 0.6, c);
    for (std::size_t p = 0; p < 4; ++p) {
      const Latent single(Shape::flat(2), {z.at(0, p), z.at(1, p)});
      const Latent vs = field.eval(single, 0.6, c);
      CHECK(vs[0] == v.at(0, p));
      CHECK(vs[1] == v.at(1, p));
    }
  }
}
