// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "flowinv/tensor.hpp"

namespace flowinv {

/// Prompt stand-in: a fixed embedding plus a human-readable label.
struct Condition {
  std::string label;
  std::vector<double> embedding;

  /// Zero embedding of length `dim`, labelled "<null>".
  static Condition null(std::size_t dim);
  /// One-hot embedding e_index of length `dim`. Distinct indices give
  /// mutually orthogonal conditions.
  static Condition basis(std::string label, std::size_t index, std::size_t dim);

  friend bool operator==(const Condition&, const Condition&) = default;
};

enum class TapeMode { Off, Capture, Inject };

/// Value tensors recorded per (step, block). Write-once; reading a missing
/// key throws TapeError.
class AttentionTape {
 public:
  void store(std::size_t step, std::size_t block, std::vector<double> values);
  const std::vector<double>& load(std::size_t step, std::size_t block) const;
  bool contains(std::size_t step, std::size_t block) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> entries_;
};

/// Attention hook passed through a velocity evaluation. Fields without
/// attention blocks ignore it.
struct TapeHook {
  TapeMode mode = TapeMode::Off;
  AttentionTape* tape = nullptr;
  std::size_t step = 0;
};

/// An evaluable velocity v(z, sigma, condition).
///
/// eval() validates inputs, dispatches to evaluate(), and rejects non-finite
/// output with a NumericError naming the field. Implementations must be pure
/// functions of their inputs and parameters.
class VelocityField {
 public:
  virtual ~VelocityField() = default;

  virtual std::string name() const = 0;
  /// Expected embedding length; 0 means the field ignores conditions.
  virtual std::size_t condition_dim() const = 0;
  virtual std::size_t attention_blocks() const { return 0; }

  Latent eval(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook = {}) const;

 protected:
  virtual Latent evaluate(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook) const = 0;
};

/// Decorator that counts evaluations of a shared field. Each run wraps the
/// field in its own counter so concurrent runs do not mix counts.
class CountingField final : public VelocityField {
 public:
  explicit CountingField(const VelocityField& inner) : inner_(inner) {}

  std::string name() const override { return inner_.name(); }
  std::size_t condition_dim() const override { return inner_.condition_dim(); }
  std::size_t attention_blocks() const override { return inner_.attention_blocks(); }

  std::uint64_t count() const { return count_.load(); }
  void reset() { count_.store(0); }

 protected:
  Latent evaluate(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook) const override;

 private:
  const VelocityField& inner_;
  mutable std::atomic<std::uint64_t> count_{0};
};

/// v(z, sigma, null) + w * (v(z, sigma, cond) - v(z, sigma, null)).
/// w == 1 evaluates only the conditional branch and w == 0 only the null
/// branch, so both collapse exactly. Capture hooks apply to the conditional
/// pass only; Inject hooks apply to every pass.
Latent cfg_eval(const VelocityField& field, const Latent& z, double sigma, const Condition& cond,
                const Condition& null_cond, double w, const TapeHook& hook = {});

/// Number of field evaluations one cfg_eval call costs at scale w.
std::size_t cfg_passes(double w);

/// Condition, null condition and guidance scale bundled for the samplers.
struct Guidance {
  Condition condition;
  Condition null_condition;
  double scale = 1.0;

  Latent velocity(const VelocityField& field, const Latent& z, double sigma, const TapeHook& hook = {}) const {
    return cfg_eval(field, z, sigma, condition, null_condition, scale, hook);
  }
};

/// v == c everywhere; c must have the latent's shape.
class ConstantField final : public VelocityField {
 public:
  explicit ConstantField(Latent value) : value_(std::move(value)) {}
  std::string name() const override { return "constant"; }
  std::size_t condition_dim() const override { return 0; }

 protected:
  Latent evaluate(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook) const override;

 private:
  Latent value_;
};

/// v(z) = rate * z, independent of sigma.
class LinearField final : public VelocityField {
 public:
  explicit LinearField(double rate = 1.0) : rate_(rate) {}
  std::string name() const override { return "linear"; }
  std::size_t condition_dim() const override { return 0; }

 protected:
  Latent evaluate(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook) const override;

 private:
  double rate_;
};

}  // namespace flowinv
