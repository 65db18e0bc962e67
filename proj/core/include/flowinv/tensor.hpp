// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flowinv {

/// Latent layout. A grid is C x H x W stored channel-major; a flat vector of
/// dimension d behaves like a grid with d channels and a single 1 x 1 pixel,
/// so every latent has a channel count and a spatial extent.
class Shape {
 public:
  static Shape flat(std::size_t dim);
  static Shape grid(std::size_t channels, std::size_t height, std::size_t width);

  bool is_grid() const { return grid_; }
  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t spatial() const { return height_ * width_; }
  std::size_t size() const { return channels_ * height_ * width_; }

  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  Shape(bool grid, std::size_t c, std::size_t h, std::size_t w)
      : grid_(grid), channels_(c), height_(h), width_(w) {}

  bool grid_ = false;
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
};

/// Double-precision latent Z_t. Element-wise operations preserve the shape.
class Latent {
 public:
  Latent() : shape_(Shape::flat(0)) {}
  explicit Latent(Shape shape);
  Latent(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Channel c at spatial position p (row-major pixel index).
  double& at(std::size_t c, std::size_t p) { return values_[c * shape_.spatial() + p]; }
  double at(std::size_t c, std::size_t p) const { return values_[c * shape_.spatial() + p]; }

  bool all_finite() const;

  Latent& operator+=(const Latent& other);
  Latent& operator-=(const Latent& other);
  Latent& operator*=(double scale);

  friend Latent operator+(Latent a, const Latent& b) { return a += b; }
  friend Latent operator-(Latent a, const Latent& b) { return a -= b; }
  friend Latent operator*(double s, Latent a) { return a *= s; }
  friend Latent operator*(Latent a, double s) { return a *= s; }

 private:
  Shape shape_;
  std::vector<double> values_;
};

void require_same_shape(const Latent& a, const Latent& b, std::string_view context);

/// Throws NumericError naming `context` if any entry is NaN or infinite.
void require_finite(const Latent& z, std::string_view context);

/// Byte-level equality (distinguishes -0.0 from +0.0, treats equal NaN bits as equal).
bool bitwise_equal(const Latent& a, const Latent& b);

/// t * z1 + (1 - t) * z0, element-wise.
Latent lerp_latent(const Latent& z0, const Latent& z1, double t);

/// base + scale * direction. Each element is rounded as (scale * d) then added.
Latent axpy(const Latent& base, double scale, const Latent& direction);

double squared_norm(const Latent& z);
double l2_distance(const Latent& a, const Latent& b);
double mean_squared_difference(const Latent& a, const Latent& b);

/// Exact difference to - from, held as an unevaluated sum head + tail of two
/// doubles (TwoSum). Applying it with apply_increment() reproduces `to`
/// bit-for-bit from `from`, which a single rounded difference cannot promise
/// when the operands straddle zero or differ in binade.
struct ExactIncrement {
  Latent head;
  Latent tail;
};

ExactIncrement exact_difference(const Latent& from, const Latent& to);

/// Correctly rounded from + head + tail. Equals `to` exactly whenever the
/// increment came from exact_difference(from, to).
Latent apply_increment(const Latent& from, const ExactIncrement& increment);

/// Correctly rounded sum of a short list of doubles (Shewchuk partials with
/// round-half-even correction, as in Python's math.fsum).
double correctly_rounded_sum(std::span<const double> terms);

}  // namespace flowinv
