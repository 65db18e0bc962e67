// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flowinv/rng.hpp"
#include "flowinv/velocity_field.hpp"

namespace flowinv {

struct MlpConfig {
  std::size_t point_dim = 2;
  std::size_t condition_dim = 2;
  std::size_t hidden = 32;

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

/// Samples for the rectified-flow regression loss. Arrays are sample-major:
/// z1/z0 hold `size * point_dim` values, cond holds `size * condition_dim`.
struct TrainingBatch {
  std::size_t size = 0;
  std::vector<double> z1;
  std::vector<double> z0;
  std::vector<double> t;
  std::vector<double> cond;
};

/// Velocity MLP applied independently to every pixel's channel vector.
///
/// Input per point: [z (point_dim), sigma, sin(2 pi sigma), cos(2 pi sigma),
/// condition (condition_dim)]. Three tanh hidden layers of width `hidden`,
/// linear output of width point_dim. Parameters live in one flat vector,
/// layer by layer, each layer as W (out x in, row-major) followed by b (out).
class MlpField final : public VelocityField {
 public:
  static constexpr std::size_t kHiddenLayers = 3;
  static constexpr std::size_t kTimeFeatures = 3;

  /// All-zero parameters.
  explicit MlpField(MlpConfig config);
  /// Weights ~ N(0, 1/fan_in), biases zero.
  static MlpField random(MlpConfig config, SeededRng& rng);

  std::string name() const override { return "mlp"; }
  std::size_t condition_dim() const override { return config_.condition_dim; }

  const MlpConfig& config() const { return config_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }

  /// Mean over samples of ||(z1 - z0) - v(z_t, t, c)||^2, z_t = t z1 + (1 - t) z0.
  double loss(const TrainingBatch& batch) const;
  /// Same loss; writes dL/dtheta into `grad` (length parameter_count()).
  double loss_and_gradient(const TrainingBatch& batch, std::span<double> grad) const;

  /// Little-endian checkpoint, see README for the layout.
  void save(const std::filesystem::path& path) const;
  static MlpField load(const std::filesystem::path& path);

 protected:
  Latent evaluate(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook) const override;

 private:
  struct Layer {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };

  std::size_t input_dim() const { return config_.point_dim + kTimeFeatures + config_.condition_dim; }
  void forward_point(std::span<const double> input, std::vector<std::vector<double>>& activations) const;
  void backward_point(const std::vector<std::vector<double>>& activations, std::span<const double> dout,
                      std::span<double> grad, std::vector<double>& scratch_a, std::vector<double>& scratch_b) const;
  void fill_input(std::span<double> input, std::span<const double> point, double sigma,
                  std::span<const double> cond) const;
  void validate_batch(const TrainingBatch& batch) const;

  MlpConfig config_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

/// One plain gradient-descent step theta -= lr * grad on the batch loss.
/// Returns the pre-update loss. Throws NumericError on a non-finite loss and
/// ConfigError for an empty batch or lr < 0.
double rf_training_step(MlpField& field, const TrainingBatch& batch, double lr);

/// Maximum over parameters of |g_analytic - g_fd| / max(|g_analytic|, |g_fd|, floor),
/// g_fd from central differences with step `epsilon` in [1e-7, 1e-4].
double grad_check(const MlpField& field, const TrainingBatch& batch, double epsilon);

/// Convenience form: the single training pair z1 = z, z0 = 0, t = sigma, per pixel.
double grad_check(const MlpField& field, const Latent& z, double sigma, const Condition& cond, double epsilon);

/// Denominator floor used by grad_check for near-zero gradients.
inline constexpr double kGradCheckFloor = 1e-4;

/// Two-moons target: upper moon (cos a, sin a), lower moon (1 - cos a, 0.5 - sin a),
/// a ~ U(0, pi), Gaussian jitter 0.05, recentred by (-0.5, -0.25).
/// `moon` selects 0 (upper), 1 (lower) or -1 (either, equiprobable).
/// Returns a Grid(2, 1, n) latent, one point per pixel.
Latent sample_two_moons(SeededRng& rng, std::size_t n, int moon = -1);

struct TrainingOptions {
  std::size_t steps = 2000;
  std::size_t batch = 256;
  double lr = 0.05;
  std::uint64_t seed = 0;
  /// Probability of replacing the moon label with the null condition.
  double condition_dropout = 0.1;
};

struct TrainingLog {
  std::vector<double> losses;
  /// Mean of the first / last `window` losses.
  double initial_running = 0.0;
  double final_running = 0.0;
  std::size_t window = 0;
};

/// Trains a two-moons conditional field (condition_dim must be >= 2; moon k
/// is labelled by basis vector k).
TrainingLog train_two_moons(MlpField& field, const TrainingOptions& options);

/// Conditions used by the two-moons field: "upper" -> e0, "lower" -> e1.
Condition moon_condition(int moon, std::size_t condition_dim);

}  // namespace flowinv
