// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>

#include "flowinv/tensor.hpp"

namespace flowinv {

/// PSNR reported for identical inputs.
inline constexpr double kPsnrCeiling = 160.0;

/// SSIM window edge; shrinks to min(H, W) on smaller grids.
inline constexpr std::size_t kSsimWindow = 8;

double mse(const Latent& a, const Latent& b);

/// max - min over both inputs; 1 when that range is zero.
double observed_peak(const Latent& a, const Latent& b);

/// 10 log10(peak^2 / mse), capped at kPsnrCeiling. Default peak: observed_peak.
double psnr(const Latent& a, const Latent& b, std::optional<double> peak = std::nullopt);

/// Mean SSIM over every w x w window (stride 1) of every channel, with
/// C1 = (0.01 peak)^2, C2 = (0.03 peak)^2 and population (co)variances.
/// Flat latents are treated as a 1 x d image.
double ssim(const Latent& a, const Latent& b, std::optional<double> peak = std::nullopt);

}  // namespace flowinv
