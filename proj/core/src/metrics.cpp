// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "flowinv/errors.hpp"

namespace flowinv {
namespace {

double resolve_peak(const Latent& a, const Latent& b, std::optional<double> peak) {
  if (!peak) return observed_peak(a, b);
  if (!(*peak > 0.0) || !std::isfinite(*peak)) throw ConfigError("peak must be positive, got " + std::to_string(*peak));
  return *peak;
}

// Summed-area table with a zero border: table[(r+1)*(w+1) + (c+1)] = sum over [0,r]x[0,c].
class Integral {
 public:
  Integral(std::size_t h, std::size_t w) : w1_(w + 1), table_((h + 1) * (w + 1), 0.0) {}

  template <typename F>
  void fill(std::size_t h, std::size_t w, F value) {
    for (std::size_t r = 0; r < h; ++r) {
      double row = 0.0;
      for (std::size_t c = 0; c < w; ++c) {
        row += value(r, c);
        table_[(r + 1) * w1_ + c + 1] = table_[r * w1_ + c + 1] + row;
      }
    }
  }

  double box(std::size_t r, std::size_t c, std::size_t k) const {
    return table_[(r + k) * w1_ + c + k] - table_[r * w1_ + c + k] - table_[(r + k) * w1_ + c] + table_[r * w1_ + c];
  }

 private:
  std::size_t w1_;
  std::vector<double> table_;
};

}  // namespace

double mse(const Latent& a, const Latent& b) {
  require_same_shape(a, b, "mse");
  return mean_squared_difference(a, b);
}

double observed_peak(const Latent& a, const Latent& b) {
  require_same_shape(a, b, "observed_peak");
  if (a.size() == 0) return 1.0;
  const auto [amin, amax] = std::minmax_element(a.values().begin(), a.values().end());
  const auto [bmin, bmax] = std::minmax_element(b.values().begin(), b.values().end());
  const double range = std::max(*amax, *bmax) - std::min(*amin, *bmin);
  return range > 0.0 ? range : 1.0;
}

double psnr(const Latent& a, const Latent& b, std::optional<double> peak) {
  const double p = resolve_peak(a, b, peak);
  const double e = mse(a, b);
  if (e == 0.0) return kPsnrCeiling;
  return std::min(kPsnrCeiling, 10.0 * std::log10(p * p / e));
}

double ssim(const Latent& a, const Latent& b, std::optional<double> peak) {
  require_same_shape(a, b, "ssim");
  const double p = resolve_peak(a, b, peak);
  const Shape& shape = a.shape();
  const std::size_t h = shape.is_grid() ? shape.height() : 1;
  const std::size_t w = shape.is_grid() ? shape.width() : a.size();
  const std::size_t channels = shape.is_grid() ? shape.channels() : 1;
  const std::size_t k = std::min({kSsimWindow, h, w});
  if (k == 0) throw ShapeError("ssim of an empty latent");

  const double c1 = (0.01 * p) * (0.01 * p);
  const double c2 = (0.03 * p) * (0.03 * p);
  const double n = static_cast<double>(k * k);
  const std::size_t plane = h * w;

  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const double* x = a.values().data() + ch * plane;
    const double* y = b.values().data() + ch * plane;
    Integral sx(h, w), sy(h, w), sxx(h, w), syy(h, w), sxy(h, w);
    sx.fill(h, w, [&](std::size_t r, std::size_t c) { return x[r * w + c]; });
    sy.fill(h, w, [&](std::size_t r, std::size_t c) { return y[r * w + c]; });
    sxx.fill(h, w, [&](std::size_t r, std::size_t c) { return x[r * w + c] * x[r * w + c]; });
    syy.fill(h, w, [&](std::size_t r, std::size_t c) { return y[r * w + c] * y[r * w + c]; });
    sxy.fill(h, w, [&](std::size_t r, std::size_t c) { return x[r * w + c] * y[r * w + c]; });
    for (std::size_t r = 0; r + k <= h; ++r) {
      for (std::size_t c = 0; c + k <= w; ++c) {
        const double mx = sx.box(r, c, k) / n;
        const double my = sy.box(r, c, k) / n;
        const double vx = sxx.box(r, c, k) / n - mx * mx;
        const double vy = syy.box(r, c, k) / n - my * my;
        const double cov = sxy.box(r, c, k) / n - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++windows;
      }
    }
  }
  return total / static_cast<double>(windows);
}

}  // namespace flowinv
