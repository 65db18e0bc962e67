// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/mlp_field.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "flowinv/errors.hpp"

namespace flowinv {
namespace {

constexpr std::array<char, 4> kMagic = {'R', 'F', 'M', 'L'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kActivationTanh = 0;

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint16_t checked_u16(std::size_t v, const char* what) {
  if (v > 0xFFFF) throw ConfigError(std::string("checkpoint field ") + what + " exceeds 65535");
  return static_cast<std::uint16_t>(v);
}

}  // namespace

MlpField::MlpField(MlpConfig config) : config_(config) {
  if (config_.point_dim == 0 || config_.hidden == 0) {
    throw ConfigError("mlp field needs point_dim > 0 and hidden > 0");
  }
  std::size_t offset = 0;
  std::size_t in = input_dim();
  for (std::size_t l = 0; l <= kHiddenLayers; ++l) {
    const std::size_t out = l == kHiddenLayers ? config_.point_dim : config_.hidden;
    layers_.push_back(Layer{in, out, offset, offset + in * out});
    offset += in * out + out;
    in = out;
  }
  params_.assign(offset, 0.0);
}

MlpField MlpField::random(MlpConfig config, SeededRng& rng) {
  MlpField field(config);
  for (const Layer& layer : field.layers_) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
      field.params_[layer.weight_offset + i] = scale * rng.normal();
    }
  }
  return field;
}

void MlpField::fill_input(std::span<double> input, std::span<const double> point, double sigma,
                          std::span<const double> cond) const {
  const std::size_t d = config_.point_dim;
  std::copy(point.begin(), point.end(), input.begin());
  const double phase = 2.0 * std::numbers::pi * sigma;
  input[d] = sigma;
  input[d + 1] = std::sin(phase);
  input[d + 2] = std::cos(phase);
  std::copy(cond.begin(), cond.end(), input.begin() + static_cast<std::ptrdiff_t>(d + kTimeFeatures));
}

void MlpField::forward_point(std::span<const double> input, std::vector<std::vector<double>>& act) const {
  act.resize(layers_.size() + 1);
  act[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const double* w = params_.data() + layer.weight_offset;
    const double* b = params_.data() + layer.bias_offset;
    const std::vector<double>& x = act[l];
    std::vector<double>& y = act[l + 1];
    y.resize(layer.out);
    const bool hidden = l + 1 < layers_.size();
    for (std::size_t o = 0; o < layer.out; ++o) {
      double acc = b[o];
      const double* row = w + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * x[i];
      y[o] = hidden ? std::tanh(acc) : acc;
    }
  }
}

void MlpField::backward_point(const std::vector<std::vector<double>>& act, std::span<const double> dout,
                              std::span<double> grad, std::vector<double>& delta,
                              std::vector<double>& next_delta) const {
  // delta holds dL/d(pre-activation) of the current layer.
  delta.assign(dout.begin(), dout.end());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const std::vector<double>& x = act[l];
    const double* w = params_.data() + layer.weight_offset;
    double* gw = grad.data() + layer.weight_offset;
    double* gb = grad.data() + layer.bias_offset;
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      double* grow = gw + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) grow[i] += d * x[i];
    }
    if (l == 0) break;
    next_delta.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      const double* row = w + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) next_delta[i] += row[i] * d;
    }
    // x = tanh(pre) for every hidden layer.
    for (std::size_t i = 0; i < layer.in; ++i) next_delta[i] *= 1.0 - x[i] * x[i];
    std::swap(delta, next_delta);
  }
}

Latent MlpField::evaluate(const Latent& z, double sigma, const Condition& cond, const TapeHook&) const {
  const Shape& shape = z.shape();
  if (shape.channels() != config_.point_dim) {
    throw ShapeError("mlp field expects " + std::to_string(config_.point_dim) + " channels per point, latent is " +
                     shape.to_string());
  }
  const std::size_t d = config_.point_dim;
  std::vector<double> input(input_dim());
  std::vector<double> point(d);
  std::vector<std::vector<double>> act;
  Latent v(shape);
  for (std::size_t p = 0; p < shape.spatial(); ++p) {
    for (std::size_t c = 0; c < d; ++c) point[c] = z.at(c, p);
    fill_input(input, point, sigma, cond.embedding);
    forward_point(input, act);
    const std::vector<double>& out = act.back();
    for (std::size_t c = 0; c < d; ++c) v.at(c, p) = out[c];
  }
  return v;
}

void MlpField::validate_batch(const TrainingBatch& batch) const {
  if (batch.size == 0) throw ConfigError("training batch is empty");
  const std::size_t d = config_.point_dim;
  if (batch.z1.size() != batch.size * d || batch.z0.size() != batch.size * d || batch.t.size() != batch.size ||
      batch.cond.size() != batch.size * config_.condition_dim) {
    throw ShapeError("training batch arrays do not match size " + std::to_string(batch.size));
  }
}

double MlpField::loss(const TrainingBatch& batch) const {
  validate_batch(batch);
  const std::size_t d = config_.point_dim;
  const std::size_t cd = config_.condition_dim;
  std::vector<double> input(input_dim());
  std::vector<double> zt(d);
  std::vector<std::vector<double>> act;
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size; ++s) {
    const double t = batch.t[s];
    for (std::size_t c = 0; c < d; ++c) zt[c] = t * batch.z1[s * d + c] + (1.0 - t) * batch.z0[s * d + c];
    fill_input(input, zt, t, std::span<const double>(batch.cond).subspan(s * cd, cd));
    forward_point(input, act);
    for (std::size_t c = 0; c < d; ++c) {
      const double r = (batch.z1[s * d + c] - batch.z0[s * d + c]) - act.back()[c];
      total += r * r;
    }
  }
  return total / static_cast<double>(batch.size);
}

double MlpField::loss_and_gradient(const TrainingBatch& batch, std::span<double> grad) const {
  validate_batch(batch);
  if (grad.size() != params_.size()) throw ShapeError("gradient buffer has the wrong length");
  std::fill(grad.begin(), grad.end(), 0.0);

  const std::size_t d = config_.point_dim;
  const std::size_t cd = config_.condition_dim;
  const double inv_b = 1.0 / static_cast<double>(batch.size);
  std::vector<double> input(input_dim());
  std::vector<double> zt(d);
  std::vector<double> dout(d);
  std::vector<double> delta;
  std::vector<double> next_delta;
  std::vector<std::vector<double>> act;
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size; ++s) {
    const double t = batch.t[s];
    for (std::size_t c = 0; c < d; ++c) zt[c] = t * batch.z1[s * d + c] + (1.0 - t) * batch.z0[s * d + c];
    fill_input(input, zt, t, std::span<const double>(batch.cond).subspan(s * cd, cd));
    forward_point(input, act);
    for (std::size_t c = 0; c < d; ++c) {
      const double r = (batch.z1[s * d + c] - batch.z0[s * d + c]) - act.back()[c];
      total += r * r;
      dout[c] = -2.0 * r * inv_b;
    }
    backward_point(act, dout, grad, delta, next_delta);
  }
  return total * inv_b;
}

void MlpField::save(const std::filesystem::path& path) const {
  std::vector<unsigned char> bytes(kMagic.begin(), kMagic.end());
  put_u16(bytes, kVersion);
  put_u16(bytes, checked_u16(config_.point_dim, "point_dim"));
  put_u16(bytes, checked_u16(config_.condition_dim, "condition_dim"));
  put_u16(bytes, checked_u16(config_.hidden, "hidden"));
  put_u16(bytes, static_cast<std::uint16_t>(kHiddenLayers));
  put_u16(bytes, kActivationTanh);
  for (double p : params_) {
    const auto bits = std::bit_cast<std::uint64_t>(p);
    for (int k = 0; k < 8; ++k) bytes.push_back(static_cast<unsigned char>((bits >> (8 * k)) & 0xFF));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

MlpField MlpField::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError(path.string() + ": not an RFML checkpoint (bad magic)");
  }
  if (get_u16(&bytes[4]) != kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(get_u16(&bytes[4])));
  }
  MlpConfig config{get_u16(&bytes[6]), get_u16(&bytes[8]), get_u16(&bytes[10])};
  if (get_u16(&bytes[12]) != kHiddenLayers || get_u16(&bytes[14]) != kActivationTanh) {
    throw FormatError(path.string() + ": checkpoint layer count or activation not supported");
  }
  MlpField field(config);
  const std::size_t expected = 16 + 8 * field.params_.size();
  if (bytes.size() != expected) {
    throw FormatError(path.string() + ": checkpoint has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected));
  }
  for (std::size_t i = 0; i < field.params_.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[16 + 8 * i + k]) << (8 * k);
    field.params_[i] = std::bit_cast<double>(bits);
  }
  return field;
}

double rf_training_step(MlpField& field, const TrainingBatch& batch, double lr) {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  std::vector<double> grad(field.parameter_count());
  const double loss = field.loss_and_gradient(batch, grad);
  if (!std::isfinite(loss)) {
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::fabs(g));
    throw NumericError("training loss is not finite (batch " + std::to_string(batch.size) + ", lr " +
                       std::to_string(lr) + ", max |grad| " + std::to_string(gmax) + ")");
  }
  if (lr == 0.0) return loss;
  std::span<double> theta = field.mutable_parameters();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
  return loss;
}

double grad_check(const MlpField& field, const TrainingBatch& batch, double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-4)) throw ConfigError("grad_check epsilon must lie in [1e-7, 1e-4]");
  std::vector<double> analytic(field.parameter_count());
  field.loss_and_gradient(batch, analytic);

  MlpField probe = field;
  std::span<double> theta = probe.mutable_parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + epsilon;
    const double up = probe.loss(batch);
    theta[i] = saved - epsilon;
    const double down = probe.loss(batch);
    theta[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), kGradCheckFloor});
    worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
  }
  return worst;
}

double grad_check(const MlpField& field, const Latent& z, double sigma, const Condition& cond, double epsilon) {
  const std::size_t d = field.config().point_dim;
  if (z.shape().channels() != d) throw ShapeError("grad_check latent channel count differs from point_dim");
  if (cond.embedding.size() != field.condition_dim()) throw ShapeError("grad_check condition has wrong length");
  TrainingBatch batch;
  batch.size = z.shape().spatial();
  batch.z0.assign(batch.size * d, 0.0);
  batch.t.assign(batch.size, sigma);
  for (std::size_t p = 0; p < batch.size; ++p) {
    for (std::size_t c = 0; c < d; ++c) batch.z1.push_back(z.at(c, p));
    batch.cond.insert(batch.cond.end(), cond.embedding.begin(), cond.embedding.end());
  }
  return grad_check(field, batch, epsilon);
}

Latent sample_two_moons(SeededRng& rng, std::size_t n, int moon) {
  Latent out(Shape::grid(2, 1, n));
  for (std::size_t i = 0; i < n; ++i) {
    const int which = moon >= 0 ? moon : (rng.uniform() < 0.5 ? 0 : 1);
    const double a = std::numbers::pi * rng.uniform();
    double x = which == 0 ? std::cos(a) : 1.0 - std::cos(a);
    double y = which == 0 ? std::sin(a) : 0.5 - std::sin(a);
    x += 0.05 * rng.normal() - 0.5;
    y += 0.05 * rng.normal() - 0.25;
    out.at(0, i) = x;
    out.at(1, i) = y;
  }
  return out;
}

Condition moon_condition(int moon, std::size_t condition_dim) {
  if (moon < 0) return Condition::null(condition_dim);
  return Condition::basis(moon == 0 ? "upper" : "lower", static_cast<std::size_t>(moon), condition_dim);
}

TrainingLog train_two_moons(MlpField& field, const TrainingOptions& options) {
  const MlpConfig& cfg = field.config();
  if (cfg.point_dim != 2) throw ConfigError("two-moons training needs point_dim = 2");
  if (cfg.condition_dim < 2) throw ConfigError("two-moons training needs condition_dim >= 2");
  if (options.steps == 0 || options.batch == 0) throw ConfigError("training needs steps > 0 and batch > 0");

  SeededRng rng(options.seed, 0x7261696eULL);
  TrainingLog log;
  log.losses.reserve(options.steps);
  TrainingBatch batch;
  batch.size = options.batch;
  for (std::size_t step = 0; step < options.steps; ++step) {
    batch.z1.clear();
    batch.z0.clear();
    batch.t.clear();
    batch.cond.clear();
    for (std::size_t s = 0; s < options.batch; ++s) {
      const int moon = rng.uniform() < 0.5 ? 0 : 1;
      const Latent point = sample_two_moons(rng, 1, moon);
      batch.z1.push_back(point[0]);
      batch.z1.push_back(point[1]);
      batch.z0.push_back(rng.normal());
      batch.z0.push_back(rng.normal());
      batch.t.push_back(rng.uniform());
      const bool drop = rng.uniform() < options.condition_dropout;
      const Condition c = moon_condition(drop ? -1 : moon, cfg.condition_dim);
      batch.cond.insert(batch.cond.end(), c.embedding.begin(), c.embedding.end());
    }
    log.losses.push_back(rf_training_step(field, batch, options.lr));
  }

  log.window = std::max<std::size_t>(1, std::min<std::size_t>(100, options.steps / 10));
  const auto mean = [](auto first, auto last) {
    double acc = 0.0;
    for (auto it = first; it != last; ++it) acc += *it;
    return acc / static_cast<double>(std::distance(first, last));
  };
  const auto w = static_cast<std::ptrdiff_t>(log.window);
  log.initial_running = mean(log.losses.begin(), log.losses.begin() + w);
  log.final_running = mean(log.losses.end() - w, log.losses.end());
  return log;
}

}  // namespace flowinv
