// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/velocity_field.hpp"

#include <cmath>

#include "flowinv/errors.hpp"

namespace flowinv {

Condition Condition::null(std::size_t dim) { return Condition{"<null>", std::vector<double>(dim, 0.0)}; }

Condition Condition::basis(std::string label, std::size_t index, std::size_t dim) {
  if (index >= dim) {
    throw ConfigError("condition '" + label + "' index " + std::to_string(index) + " outside embedding dimension " +
                      std::to_string(dim));
  }
  std::vector<double> e(dim, 0.0);
  e[index] = 1.0;
  return Condition{std::move(label), std::move(e)};
}

void AttentionTape::store(std::size_t step, std::size_t block, std::vector<double> values) {
  auto [it, inserted] = entries_.try_emplace({step, block}, std::move(values));
  if (!inserted) {
    throw TapeError("attention tape entry (step " + std::to_string(step) + ", block " + std::to_string(block) +
                    ") written twice");
  }
}

const std::vector<double>& AttentionTape::load(std::size_t step, std::size_t block) const {
  auto it = entries_.find({step, block});
  if (it == entries_.end()) {
    throw TapeError("attention tape has no entry for (step " + std::to_string(step) + ", block " +
                    std::to_string(block) + ")");
  }
  return it->second;
}

bool AttentionTape::contains(std::size_t step, std::size_t block) const {
  return entries_.find({step, block}) != entries_.end();
}

Latent VelocityField::eval(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook) const {
  if (!(sigma >= 0.0 && sigma <= 1.0)) {
    throw ConfigError(name() + ": sigma must lie in [0, 1], got " + std::to_string(sigma));
  }
  const std::size_t dim = condition_dim();
  if (dim != 0 && cond.embedding.size() != dim) {
    throw ShapeError(name() + ": condition '" + cond.label + "' has embedding length " +
                     std::to_string(cond.embedding.size()) + ", field expects " + std::to_string(dim));
  }
  if (hook.mode != TapeMode::Off && hook.tape == nullptr) {
    throw TapeError(name() + ": tape hook without a tape");
  }
  Latent v = evaluate(z, sigma, cond, hook);
  if (!(v.shape() == z.shape())) {
    throw ShapeError(name() + ": velocity shape " + v.shape().to_string() + " differs from latent " +
                     z.shape().to_string());
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError("velocity field '" + name() + "' produced a non-finite value at index " +
                         std::to_string(i) + " (sigma = " + std::to_string(sigma) + ")");
    }
  }
  return v;
}

Latent CountingField::evaluate(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook) const {
  count_.fetch_add(1);
  return inner_.eval(z, sigma, cond, hook);
}

std::size_t cfg_passes(double w) { return (w == 1.0 || w == 0.0) ? 1 : 2; }

Latent cfg_eval(const VelocityField& field, const Latent& z, double sigma, const Condition& cond,
                const Condition& null_cond, double w, const TapeHook& hook) {
  if (!(w >= 0.0) || !std::isfinite(w)) {
    throw ConfigError("guidance scale must be finite and >= 0, got " + std::to_string(w));
  }
  if (w == 1.0) return field.eval(z, sigma, cond, hook);

  TapeHook null_hook = hook;
  if (null_hook.mode == TapeMode::Capture) null_hook.mode = TapeMode::Off;
  if (w == 0.0) return field.eval(z, sigma, null_cond, null_hook);

  Latent uncond = field.eval(z, sigma, null_cond, null_hook);
  const Latent cond_v = field.eval(z, sigma, cond, hook);
  for (std::size_t i = 0; i < uncond.size(); ++i) {
    const double diff = cond_v[i] - uncond[i];
    uncond[i] = uncond[i] + w * diff;
  }
  return uncond;
}

Latent ConstantField::evaluate(const Latent& z, double, const Condition&, const TapeHook&) const {
  require_same_shape(z, value_, "constant field");
  return value_;
}

Latent LinearField::evaluate(const Latent& z, double, const Condition&, const TapeHook&) const {
  return rate_ * z;
}

}  // namespace flowinv
