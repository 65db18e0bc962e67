// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/analytic_field.hpp"

#include <cmath>

#include "flowinv/errors.hpp"

namespace flowinv {
namespace {

void validate(const AnalyticGaussianParams& p) {
  if (!(p.std > 0.0) || !std::isfinite(p.std)) {
    throw ConfigError("analytic Gaussian field needs std > 0, got " + std::to_string(p.std));
  }
  if (p.mean.empty()) throw ConfigError("analytic Gaussian field needs a non-empty mean");
}

}  // namespace

Latent analytic_gaussian_velocity(const Latent& z, double sigma, const AnalyticGaussianParams& p) {
  validate(p);
  const std::size_t channels = z.shape().channels();
  if (channels != p.mean.size()) {
    throw ShapeError("analytic Gaussian field: mean has " + std::to_string(p.mean.size()) +
                     " entries, latent has " + std::to_string(channels) + " channels");
  }
  const double s2 = p.std * p.std;
  const double one_minus = 1.0 - sigma;
  const double k = (sigma * s2 - one_minus) / (sigma * sigma * s2 + one_minus * one_minus);

  Latent v(z.shape());
  const std::size_t pixels = z.shape().spatial();
  for (std::size_t c = 0; c < channels; ++c) {
    const double m = p.mean[c];
    for (std::size_t i = 0; i < pixels; ++i) {
      v.at(c, i) = m + k * (z.at(c, i) - sigma * m);
    }
  }
  return v;
}

AnalyticGaussianField::AnalyticGaussianField(AnalyticGaussianParams params) : params_(std::move(params)) {
  validate(params_);
}

Latent AnalyticGaussianField::evaluate(const Latent& z, double sigma, const Condition&, const TapeHook&) const {
  return analytic_gaussian_velocity(z, sigma, params_);
}

}  // namespace flowinv
