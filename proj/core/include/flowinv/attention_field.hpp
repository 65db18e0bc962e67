// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowinv/velocity_field.hpp"

namespace flowinv {

struct AttentionConfig {
  std::size_t channels = 2;
  std::size_t model_dim = 16;
  std::size_t condition_dim = 4;
  std::uint64_t init_seed = 3;
};

/// Untrained single-block self-attention velocity over the pixels of a
/// C x H x W latent (one token per pixel):
///
///   h_i = tanh(W_in x_i + W_pos p_i + W_t tau(sigma) + W_c c + b_in)
///   F   = softmax(Q K^T / sqrt(d)) V,   Q, K, V = h W_q^T, h W_k^T, h W_v^T
///   v_i = W_out F_i + W_skip x_i + b_out
///
/// p_i is the pixel's centred (row, col) position and tau the same
/// (sigma, sin 2 pi sigma, cos 2 pi sigma) features as the MLP field.
///
/// Tape hooks act on V of block 0: Capture stores it under (step, 0) and
/// returns the ordinary output; Inject replaces V with the stored tensor,
/// computing Attention(Q_tar, K_tar, V_src).
class AttentionField final : public VelocityField {
 public:
  static constexpr std::size_t kBlock = 0;

  explicit AttentionField(AttentionConfig config);

  std::string name() const override { return "attention"; }
  std::size_t condition_dim() const override { return config_.condition_dim; }
  std::size_t attention_blocks() const override { return 1; }
  const AttentionConfig& config() const { return config_; }

 protected:
  Latent evaluate(const Latent& z, double sigma, const Condition& cond, const TapeHook& hook) const override;

 private:
  AttentionConfig config_;
  std::vector<double> w_in_, w_pos_, w_time_, w_cond_, b_in_;
  std::vector<double> w_q_, w_k_, w_v_;
  std::vector<double> w_out_, w_skip_, b_out_;
};

/// eval_with_tape: field evaluation with an explicit tape mode for `step`.
Latent eval_with_tape(const VelocityField& field, const Latent& z, double sigma, const Condition& cond,
                      TapeMode mode, AttentionTape& tape, std::size_t step);

}  // namespace flowinv
