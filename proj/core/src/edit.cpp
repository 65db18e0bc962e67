// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowinv/edit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "flowinv/errors.hpp"
#include "flowinv/rng.hpp"

namespace flowinv {
namespace {

bool mask_active(const EditRequest& request) { return request.blending && request.mask.has_value(); }

Condition null_for(const EditRequest& request) { return Condition::null(request.cond_src.embedding.size()); }

// One aligned branch step from z at grid step t. `v_ref` is the velocity
// recorded for step t during inversion.
Latent aligned_step(const Latent& z, const Latent& aligned, const Latent& v, const Latent& v_ref, double h,
                    AlignmentMode mode) {
  if (mode == AlignmentMode::Residual) return axpy(z, h, v);
  Latent out = aligned;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (v[i] != v_ref[i]) out[i] = aligned[i] + h * (v[i] - v_ref[i]);
  }
  return out;
}

Latent aligned_latent(const Latent& z, const ResidualTrace& trace, std::size_t t, AlignmentMode mode) {
  return mode == AlignmentMode::Cached ? apply_increment(z, trace.increments[t]) : z + trace.deltas[t];
}

void check_branch(const Latent& z, const char* branch, std::size_t step) {
  if (!z.all_finite()) {
    throw NumericError(std::string(branch) + " branch: non-finite latent at step " + std::to_string(step));
  }
}

nlohmann::json latent_to_json(const Latent& z) {
  const Shape& s = z.shape();
  nlohmann::json channels = nlohmann::json::array();
  for (std::size_t c = 0; c < s.channels(); ++c) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < s.height(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t col = 0; col < s.width(); ++col) row.push_back(z.at(c, r * s.width() + col));
      rows.push_back(std::move(row));
    }
    channels.push_back(std::move(rows));
  }
  return channels;
}

}  // namespace

const char* to_string(AlignmentMode mode) { return mode == AlignmentMode::Cached ? "cached" : "residual"; }

AlignmentMode parse_alignment_mode(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "cached") return AlignmentMode::Cached;
  if (t == "residual") return AlignmentMode::Residual;
  throw ConfigError("unknown alignment mode '" + text + "' (expected cached or residual)");
}

void validate_request(const EditRequest& request, const VelocityField& field) {
  const std::size_t steps = request.grid.steps();
  if (request.t_inj > steps) {
    throw ConfigError("t_inj = " + std::to_string(request.t_inj) + " exceeds the " + std::to_string(steps) +
                      "-step grid");
  }
  for (const auto& [name, w] : {std::pair{"cfg_inv", request.cfg_inv}, std::pair{"cfg_edit", request.cfg_edit}}) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError(std::string(name) + " must be finite and >= 0");
  }
  if (request.cond_src.embedding.size() != request.cond_tar.embedding.size()) {
    throw ShapeError("cond_src and cond_tar embeddings differ in length");
  }
  if (field.condition_dim() != 0 && request.cond_src.embedding.size() != field.condition_dim()) {
    throw ShapeError("condition length " + std::to_string(request.cond_src.embedding.size()) + " does not match " +
                     field.name() + " (expects " + std::to_string(field.condition_dim()) + ")");
  }
  if (request.source_latent.size() == 0) throw ShapeError("edit request has an empty source latent");
  if (request.mask) require_mask_matches(*request.mask, request.source_latent.shape());
}

EditResult direct_edit(const VelocityField& field, const EditRequest& request) {
  validate_request(request, field);
  const CountingField counted(field);
  const TimeGrid& grid = request.grid;
  const Condition null_cond = null_for(request);
  const Guidance src_guide{request.cond_src, null_cond, request.cfg_inv};
  const Guidance tar_guide{request.cond_tar, null_cond, request.cfg_edit};

  InversionOptions options;
  options.record_increments = request.alignment == AlignmentMode::Cached;
  const InversionResult inv = euler_invert(counted, request.source_latent, grid, src_guide, options);
  const ResidualTrace& trace = inv.trace;

  AttentionTape tape;
  Trajectory source{{inv.trajectory.front()}, grid, Direction::Forward};
  source.latents.reserve(grid.steps() + 1);
  Latent target = inv.trajectory.front();

  for (std::size_t t = 0; t < grid.steps(); ++t) {
    const double sigma = grid.sigma(t);
    const double h = grid.delta(t);
    const bool inject = request.injection && t < request.t_inj;

    const Latent& z_src = source.latents.back();
    const Latent src_hat = aligned_latent(z_src, trace, t, request.alignment);
    const TapeHook capture = inject ? TapeHook{TapeMode::Capture, &tape, t} : TapeHook{};
    const Latent v_src = src_guide.velocity(counted, src_hat, sigma, capture);
    Latent next_src = aligned_step(z_src, src_hat, v_src, trace.velocities[t], h, request.alignment);
    check_branch(next_src, "source", t + 1);

    const Latent tar_hat = aligned_latent(target, trace, t, request.alignment);
    const TapeHook injected = inject ? TapeHook{TapeMode::Inject, &tape, t} : TapeHook{};
    const Latent v_tar = tar_guide.velocity(counted, tar_hat, sigma, injected);
    Latent next_tar = aligned_step(target, tar_hat, v_tar, trace.velocities[t], h, request.alignment);
    check_branch(next_tar, "target", t + 1);

    if (mask_active(request)) next_tar = blend_latents(next_src, next_tar, *request.mask);
    source.latents.push_back(std::move(next_src));
    target = std::move(next_tar);
  }

  EditResult result;
  result.edited = std::move(target);
  result.reconstruction = source.back();
  result.step_errors = step_level_mse(source, inv.trajectory);
  result.eval_count = counted.count();
  result.inverted_noise = inv.trajectory.front();
  return result;
}

EditResult virtual_direct_edit(const VelocityField& field, const EditRequest& request) {
  validate_request(request, field);
  const CountingField counted(field);
  const TimeGrid& grid = request.grid;
  const Condition null_cond = null_for(request);
  const Guidance src_guide{request.cond_src, null_cond, request.cfg_inv};
  const Guidance tar_guide{request.cond_tar, null_cond, request.cfg_edit};

  InversionOptions options;
  options.record_increments = request.alignment == AlignmentMode::Cached;
  options.capture_tape = request.injection;
  options.capture_steps = request.injection ? request.t_inj : 0;
  InversionResult inv = euler_invert(counted, request.source_latent, grid, src_guide, options);
  const ResidualTrace& trace = inv.trace;
  if (request.injection && request.t_inj > 0 && !trace.tape) {
    throw TapeError("virtual_direct_edit: inversion did not capture an attention tape");
  }
  AttentionTape* tape = trace.tape ? &*inv.trace.tape : nullptr;

  Latent target = inv.trajectory.front();
  for (std::size_t t = 0; t < grid.steps(); ++t) {
    const bool inject = request.injection && t < request.t_inj;
    const Latent tar_hat = aligned_latent(target, trace, t, request.alignment);
    const TapeHook injected = inject ? TapeHook{TapeMode::Inject, tape, t} : TapeHook{};
    const Latent v_tar = tar_guide.velocity(counted, tar_hat, grid.sigma(t), injected);
    Latent next = aligned_step(target, tar_hat, v_tar, trace.velocities[t], grid.delta(t), request.alignment);
    check_branch(next, "target", t + 1);
    if (mask_active(request)) next = blend_latents(inv.trajectory.at(t + 1), next, *request.mask);
    target = std::move(next);
  }

  EditResult result;
  result.edited = std::move(target);
  result.eval_count = counted.count();
  result.inverted_noise = inv.trajectory.front();
  return result;
}

EditResult mvg_edit(const VelocityField& field, const EditRequest& request, double eta) {
  validate_request(request, field);
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("mvg eta must lie in [0, 1], got " + std::to_string(eta));
  const CountingField counted(field);
  const TimeGrid& grid = request.grid;
  const Condition null_cond = null_for(request);
  const Guidance src_guide{request.cond_src, null_cond, request.cfg_inv};
  const Guidance tar_guide{request.cond_tar, null_cond, request.cfg_edit};

  SeededRng rng(request.seed, kDnaNoiseStream);
  InversionOptions options;
  options.record_increments = false;
  const InversionResult inv = dna_invert(counted, request.source_latent, grid, src_guide, rng, options);
  const ResidualTrace& trace = inv.trace;

  const Guidance src_edit_guide{request.cond_src, null_cond, request.cfg_edit};
  Latent edit = inv.trajectory.front();
  Latent guided = request.source_latent;
  for (std::size_t t = 0; t < grid.steps(); ++t) {
    const double sigma = grid.sigma(t);
    const double h = grid.delta(t);
    const Latent probe = edit + trace.deltas[t];
    const Latent v_tgt = tar_guide.velocity(counted, probe, sigma);
    const double remaining = 1.0 - sigma;
    Latent v_edit = v_tgt;
    if (eta != 1.0) {
      const Latent v_src = src_edit_guide.velocity(counted, probe, sigma);
      for (std::size_t i = 0; i < guided.size(); ++i) guided[i] = guided[i] + h * (v_tgt[i] - v_src[i]);
      if (remaining > 0.0) {
        for (std::size_t i = 0; i < edit.size(); ++i) {
          const double v_mvg = (guided[i] - edit[i]) / remaining;
          v_edit[i] = eta == 0.0 ? v_mvg : eta * v_tgt[i] + (1.0 - eta) * v_mvg;
        }
      }
    }
    Latent next = axpy(edit, h, v_edit);
    check_branch(next, "mvg", t + 1);
    if (mask_active(request)) next = blend_latents(inv.trajectory.at(t + 1), next, *request.mask);
    edit = std::move(next);
  }

  EditResult result;
  result.edited = std::move(edit);
  result.eval_count = counted.count();
  result.inverted_noise = inv.trajectory.front();
  return result;
}

std::string edit_result_to_json(const EditResult& result) {
  nlohmann::json doc;
  doc["edited"] = latent_to_json(result.edited);
  doc["reconstruction"] = result.reconstruction ? latent_to_json(*result.reconstruction) : nlohmann::json(nullptr);
  doc["step_errors"] = {{"per_step", result.step_errors.per_step},
                        {"avg", result.step_errors.avg},
                        {"max", result.step_errors.max}};
  doc["eval_count"] = result.eval_count;
  return doc.dump(2) + "\n";
}

void write_edit_result(const EditResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << edit_result_to_json(result);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace flowinv
