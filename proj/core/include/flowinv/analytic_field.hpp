// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "flowinv/velocity_field.hpp"

namespace flowinv {

/// Data distribution N(mean, std^2 I) per pixel, paired independently with
/// N(0, I) noise.
struct AnalyticGaussianParams {
  std::vector<double> mean;
  double std = 1.0;
};

/// Exact rectified-flow velocity for the Gaussian pair, i.e. the least-squares
/// optimum E[Z1 - Z0 | Z_sigma = z]:
///
///   v = m + k(sigma) * (z - sigma * m),
///   k(sigma) = (sigma s^2 - (1 - sigma)) / (sigma^2 s^2 + (1 - sigma)^2).
///
/// The denominator is Var(Z_sigma) per coordinate and stays positive on
/// [0, 1] for s > 0. Each pixel's channel vector is one sample, so the mean's
/// length must equal the latent's channel count.
Latent analytic_gaussian_velocity(const Latent& z, double sigma, const AnalyticGaussianParams& params);

class AnalyticGaussianField final : public VelocityField {
 public:
  /// Throws ConfigError for std <= 0 or an empty mean.
  explicit AnalyticGaussianField(AnalyticGaussianParams params);

  std::string name() const override { return "analytic-gaussian"; }
  std::size_t condition_dim() const override { return 0; }
  const AnalyticGaussianParams& params() const { return params_; }

 protected:
  Latent evaluate(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook) const override;

 private:
  AnalyticGaussianParams params_;
};

}  // namespace flowinv
