// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/attention_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowinv/errors.hpp"
#include "flowinv/rng.hpp"

namespace flowinv {
namespace {

std::vector<double> gaussian_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double gain) {
  std::vector<double> m(rows * cols);
  const double scale = gain / std::sqrt(static_cast<double>(std::max<std::size_t>(cols, 1)));
  for (double& v : m) v = scale * rng.normal();
  return m;
}

// y = W x for a row-major (rows x cols) W, accumulated onto y.
void matvec_add(const std::vector<double>& w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

}  // namespace

AttentionField::AttentionField(AttentionConfig config) : config_(config) {
  if (config_.channels == 0 || config_.model_dim == 0) {
    throw ConfigError("attention field needs channels > 0 and model_dim > 0");
  }
  const std::size_t c = config_.channels;
  const std::size_t d = config_.model_dim;
  SeededRng rng(config_.init_seed, 0x61747465ULL);
  w_in_ = gaussian_matrix(rng, d, c, 1.0);
  w_pos_ = gaussian_matrix(rng, d, 2, 1.0);
  w_time_ = gaussian_matrix(rng, d, 3, 0.5);
  w_cond_ = gaussian_matrix(rng, d, config_.condition_dim, 1.0);
  b_in_ = gaussian_matrix(rng, d, 1, 0.1);
  w_q_ = gaussian_matrix(rng, d, d, 1.0);
  w_k_ = gaussian_matrix(rng, d, d, 1.0);
  w_v_ = gaussian_matrix(rng, d, d, 1.0);
  w_out_ = gaussian_matrix(rng, c, d, 1.0);
  w_skip_ = gaussian_matrix(rng, c, c, 0.5);
  b_out_ = gaussian_matrix(rng, c, 1, 0.1);
}

Latent AttentionField::evaluate(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook) const {
  const Shape& shape = z.shape();
  const std::size_t c = config_.channels;
  const std::size_t d = config_.model_dim;
  if (shape.channels() != c) {
    throw ShapeError("attention field expects " + std::to_string(c) + " channels, latent is " + shape.to_string());
  }
  const std::size_t n = shape.spatial();
  const std::size_t height = shape.height();
  const std::size_t width = shape.width();

  const double phase = 2.0 * std::numbers::pi * sigma;
  const double tau[3] = {sigma, std::sin(phase), std::cos(phase)};
  std::vector<double> shared(b_in_);
  matvec_add(w_time_, d, 3, tau, shared.data());
  if (config_.condition_dim > 0) matvec_add(w_cond_, d, config_.condition_dim, cond.embedding.data(), shared.data());

  std::vector<double> h(n * d);
  std::vector<double> x(c);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; k < c; ++k) x[k] = z.at(k, p);
    const double pos[2] = {(static_cast<double>(p / width) + 0.5) / static_cast<double>(height) - 0.5,
                           (static_cast<double>(p % width) + 0.5) / static_cast<double>(width) - 0.5};
    double* hp = h.data() + p * d;
    std::copy(shared.begin(), shared.end(), hp);
    matvec_add(w_in_, d, c, x.data(), hp);
    matvec_add(w_pos_, d, 2, pos, hp);
    for (std::size_t k = 0; k < d; ++k) hp[k] = std::tanh(hp[k]);
  }

  std::vector<double> q(n * d, 0.0);
  std::vector<double> key(n * d, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    matvec_add(w_q_, d, d, h.data() + p * d, q.data() + p * d);
    matvec_add(w_k_, d, d, h.data() + p * d, key.data() + p * d);
  }

  std::vector<double> own_values;
  const std::vector<double>* values = nullptr;
  if (hook.mode == TapeMode::Inject) {
    values = &hook.tape->load(hook.step, kBlock);
    if (values->size() != n * d) {
      throw TapeError("attention tape entry for step " + std::to_string(hook.step) + " holds " +
                      std::to_string(values->size()) + " values, expected " + std::to_string(n * d));
    }
  } else {
    own_values.assign(n * d, 0.0);
    for (std::size_t p = 0; p < n; ++p) matvec_add(w_v_, d, d, h.data() + p * d, own_values.data() + p * d);
    if (hook.mode == TapeMode::Capture) hook.tape->store(hook.step, kBlock, own_values);
    values = &own_values;
  }

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> weights(n);
  std::vector<double> f(d);
  std::vector<double> o(c);
  Latent v(shape);
  for (std::size_t i = 0; i < n; ++i) {
    const double* qi = q.data() + i * d;
    double max_logit = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      const double* kj = key.data() + j * d;
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += qi[k] * kj[k];
      weights[j] = dot * inv_sqrt_d;
      max_logit = std::max(max_logit, weights[j]);
    }
    double norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      weights[j] = std::exp(weights[j] - max_logit);
      norm += weights[j];
    }
    std::fill(f.begin(), f.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double a = weights[j] / norm;
      const double* vj = values->data() + j * d;
      for (std::size_t k = 0; k < d; ++k) f[k] += a * vj[k];
    }

    for (std::size_t k = 0; k < c; ++k) {
      o[k] = b_out_[k];
      x[k] = z.at(k, i);
    }
    matvec_add(w_out_, c, d, f.data(), o.data());
    matvec_add(w_skip_, c, c, x.data(), o.data());
    for (std::size_t k = 0; k < c; ++k) v.at(k, i) = o[k];
  }
  return v;
}

Latent eval_with_tape(const VelocityField& field, const Latent& z, double sigma, const Condition& cond,
                      TapeMode mode, AttentionTape& tape, std::size_t step) {
  return field.eval(z, sigma, cond, TapeHook{mode, &tape, step});
}

}  // namespace flowinv
