// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "flowinv/inversion.hpp"
#include "flowinv/mask.hpp"
#include "flowinv/tensor.hpp"
#include "flowinv/time_grid.hpp"
#include "flowinv/velocity_field.hpp"

namespace flowinv {

/// How a branch applies the recorded inversion offset before stepping.
enum class AlignmentMode {
  /// Zhat = Z + deltas[t]; Z' = Z + h * v(Zhat). Exact up to rounding.
  Residual,
  /// Zhat = apply_increment(Z, increments[t]); Z' = Zhat + h * (v(Zhat) - v_inv[t]),
  /// touching only coordinates where the two velocities differ. A branch that
  /// sits on the inverse trajectory stays on it bit for bit.
  Cached,
};

const char* to_string(AlignmentMode mode);
AlignmentMode parse_alignment_mode(const std::string& text);

struct EditRequest {
  Latent source_latent;
  Condition cond_src;
  Condition cond_tar;
  TimeGrid grid{30, Schedule::uniform()};
  std::optional<EditMask> mask;
  /// Value injection is active for steps t < t_inj.
  std::size_t t_inj = 3;
  double cfg_inv = 1.0;
  double cfg_edit = 2.0;
  bool injection = true;
  bool blending = true;
  AlignmentMode alignment = AlignmentMode::Residual;
  /// Seeds the initial noise estimate of the DNA inversion used by mvg_edit.
  std::uint64_t seed = 0;
};

/// Throws ConfigError / ShapeError when the request is inconsistent.
void validate_request(const EditRequest& request, const VelocityField& field);

struct EditResult {
  Latent edited;
  /// Final source-branch latent; empty for single-branch editors.
  std::optional<Latent> reconstruction;
  /// Source branch against the inverse trajectory; empty without a source branch.
  StepErrors step_errors;
  /// Every field evaluation the run made, inversion included.
  std::uint64_t eval_count = 0;
  /// Inverse trajectory endpoint the editors start from.
  Latent inverted_noise;
};

/// Dual-branch editing. Inverts the source with cfg_inv, then from
/// Z_inv[0] steps a source branch (cond_src, cfg_inv) and a target branch
/// (cond_tar, cfg_edit), both offset by the recorded inversion residuals.
/// While t < t_inj the source branch captures its attention Values and the
/// target branch evaluates with them injected. With a mask and blending on,
/// each step ends with target = blend(source, target, mask).
EditResult direct_edit(const VelocityField& field, const EditRequest& request);

/// Single-branch editing: the inversion captures the attention Values and
/// residuals, the target branch injects them, and blending uses the stored
/// inverse latent Z_inv[t+1] in place of a live source branch.
/// reconstruction stays empty.
EditResult virtual_direct_edit(const VelocityField& field, const EditRequest& request);

/// RNG stream mvg_edit draws its initial DNA noise from: SeededRng(request.seed, kDnaNoiseStream).
inline constexpr std::uint64_t kDnaNoiseStream = 0x6d7667;

/// Velocity-guided editing on top of DNA inversion, with eta in [0, 1]:
///   Z*     = Z_edit + deltas[t]
///   v_tgt  = v(Z*, sigma[t]; cond_tar),  v_src = v(Z*, sigma[t]; cond_src), both at cfg_edit
///   Z_mvg' = Z_mvg + h * (v_tgt - v_src)            (Z_mvg starts at the source latent)
///   v_mvg  = (Z_mvg' - Z_edit) / (1 - sigma[t])     (v_tgt alone when 1 - sigma[t] <= 0)
///   Z_edit' = Z_edit + h * (eta * v_tgt + (1 - eta) * v_mvg)
/// v_mvg points from the current edit latent toward the guided source
/// endpoint, so with equal conditions and eta = 0 the editor lands on the
/// source latent. eta = 1 is pure target-velocity editing and skips the
/// source evaluation.
EditResult mvg_edit(const VelocityField& field, const EditRequest& request, double eta);

/// JSON document: {"edited": [...], "reconstruction": [...] | null,
/// "step_errors": {"per_step": [...], "avg": x, "max": x}, "eval_count": n}.
/// Latents are nested arrays indexed [channel][row][col].
std::string edit_result_to_json(const EditResult& result);
void write_edit_result(const EditResult& result, const std::filesystem::path& path);

}  // namespace flowinv
