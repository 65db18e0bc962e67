// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "flowinv/errors.hpp"

namespace flowinv {

Shape Shape::flat(std::size_t dim) { return Shape(false, dim, 1, 1); }

Shape Shape::grid(std::size_t channels, std::size_t height, std::size_t width) {
  return Shape(true, channels, height, width);
}

std::string Shape::to_string() const {
  std::ostringstream os;
  if (grid_) {
    os << "Grid(" << channels_ << "x" << height_ << "x" << width_ << ")";
  } else {
    os << "Flat(" << channels_ << ")";
  }
  return os.str();
}

Latent::Latent(Shape shape) : shape_(shape), values_(shape.size(), 0.0) {}

Latent::Latent(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw ShapeError("latent of shape " + shape_.to_string() + " needs " + std::to_string(shape_.size()) +
                     " values, got " + std::to_string(values_.size()));
  }
}

bool Latent::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Latent& Latent::operator+=(const Latent& other) {
  require_same_shape(*this, other, "latent addition");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Latent& Latent::operator-=(const Latent& other) {
  require_same_shape(*this, other, "latent subtraction");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Latent& Latent::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

void require_same_shape(const Latent& a, const Latent& b, std::string_view context) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(context) + ": shape mismatch " + a.shape().to_string() + " vs " +
                     b.shape().to_string());
  }
}

void require_finite(const Latent& z, std::string_view context) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) {
      throw NumericError(std::string(context) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

bool bitwise_equal(const Latent& a, const Latent& b) {
  if (!(a.shape() == b.shape())) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

Latent lerp_latent(const Latent& z0, const Latent& z1, double t) {
  require_same_shape(z0, z1, "lerp_latent");
  Latent out(z0.shape());
  const double s = 1.0 - t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t * z1[i] + s * z0[i];
  return out;
}

Latent axpy(const Latent& base, double scale, const Latent& direction) {
  require_same_shape(base, direction, "axpy");
  Latent out(base.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double step = scale * direction[i];
    out[i] = base[i] + step;
  }
  return out;
}

double squared_norm(const Latent& z) {
  double acc = 0.0;
  for (double v : z.values()) acc += v * v;
  return acc;
}

double l2_distance(const Latent& a, const Latent& b) {
  require_same_shape(a, b, "l2_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double mean_squared_difference(const Latent& a, const Latent& b) {
  require_same_shape(a, b, "mean_squared_difference");
  if (a.size() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

ExactIncrement exact_difference(const Latent& from, const Latent& to) {
  require_same_shape(from, to, "exact_difference");
  ExactIncrement inc{Latent(from.shape()), Latent(from.shape())};
  for (std::size_t i = 0; i < from.size(); ++i) {
    // TwoSum(to, -from): s + e == to - from exactly.
    const double a = to[i];
    const double b = -from[i];
    const double s = a + b;
    const double bb = s - a;
    const double e = (a - (s - bb)) + (b - bb);
    inc.head[i] = s;
    inc.tail[i] = e;
  }
  return inc;
}

Latent apply_increment(const Latent& from, const ExactIncrement& increment) {
  require_same_shape(from, increment.head, "apply_increment");
  require_same_shape(from, increment.tail, "apply_increment");
  Latent out(from.shape());
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (increment.tail[i] == 0.0) {
      // head is the exact difference, so the single rounding is exact too.
      out[i] = from[i] + increment.head[i];
    } else {
      const double terms[3] = {from[i], increment.head[i], increment.tail[i]};
      out[i] = correctly_rounded_sum(terms);
    }
  }
  return out;
}

double correctly_rounded_sum(std::span<const double> terms) {
  std::vector<double> partials;
  partials.reserve(terms.size() + 1);
  for (double x : terms) {
    std::size_t i = 0;
    for (double y : partials) {
      if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[i++] = lo;
      x = hi;
    }
    partials.resize(i);
    partials.push_back(x);
  }

  std::size_t n = partials.size();
  if (n == 0) return 0.0;
  double hi = partials[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials[--n];
    hi = x + y;
    const double yr = hi - x;
    lo = y - yr;
    if (lo != 0.0) break;
  }
  // Round-half-even fix-up when the remaining partials push past a tie.
  if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    const double yr = x - hi;
    if (y == yr) hi = x;
  }
  return hi;
}

}  // namespace flowinv
