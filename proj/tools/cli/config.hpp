// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "flowinv/analytic_field.hpp"
#include "flowinv/attention_field.hpp"
#include "flowinv/edit.hpp"
#include "flowinv/mask.hpp"
#include "flowinv/mlp_field.hpp"
#include "flowinv/time_grid.hpp"

namespace flowinv::cli {

enum class FieldKind { Analytic, Mlp, Attention };

struct FieldSpec {
  FieldKind kind = FieldKind::Mlp;
  AnalyticGaussianParams analytic{{2.0, -1.0}, 0.5};
  MlpConfig mlp{};
  /// Load the MLP from here; without it the field is trained in-process.
  std::optional<std::filesystem::path> checkpoint;
  TrainingOptions training{};
  AttentionConfig attention{};
};

enum class SourceKind { TwoMoons, Gaussian };

struct SourceSpec {
  SourceKind kind = SourceKind::TwoMoons;
  std::size_t points = 64;
  /// 0 upper, 1 lower, -1 either.
  int moon = 0;
  std::vector<std::size_t> shape{2, 8, 8};
  double scale = 1.0;
};

enum class MaskKind { None, Ones, Zeros, File, Build };

struct MaskSpec {
  MaskKind kind = MaskKind::None;
  std::filesystem::path path;
  EditType type = EditType::Local;
  BBox box{};
  double tau = 0.0;
  std::size_t channel = 0;
  std::size_t dilation = 5;
};

enum class EditAlgorithm { Direct, Virtual, Mvg };

struct EditSpec {
  EditAlgorithm algorithm = EditAlgorithm::Direct;
  std::size_t t_inj = 3;
  bool injection = true;
  bool blending = true;
  AlignmentMode alignment = AlignmentMode::Residual;
  /// Required when algorithm is mvg.
  std::optional<double> eta;
  MaskSpec mask;
};

enum class Inverter { Euler, Midpoint, FixedPoint, Dna };

/// Fully resolved experiment description. Every section of the JSON file is
/// optional; missing keys take the defaults below, unknown keys are errors.
struct ExperimentConfig {
  FieldSpec field;
  std::size_t steps = 30;
  Schedule schedule = Schedule::uniform();
  std::uint64_t seed = 0;
  SourceSpec source;
  /// Basis index of each condition; nullopt is the null condition.
  std::optional<std::size_t> cond_src = 0;
  std::optional<std::size_t> cond_tar = 1;
  double cfg_inv = 1.0;
  double cfg_edit = 2.0;
  Inverter inverter = Inverter::Euler;
  std::size_t iterations = 3;
  std::vector<ReconstructionStrategy> strategies{
      ReconstructionStrategy::Vanilla, ReconstructionStrategy::StepwiseCorrection,
      ReconstructionStrategy::DirectAligned, ReconstructionStrategy::DirectAlignedCached};
  EditSpec edit;
  std::size_t compare_iterations = 2;
  std::filesystem::path report_input;
  std::filesystem::path output_dir = "flowinv-out";
};

/// Validates `doc` against the schema and fills an ExperimentConfig.
/// Input paths (checkpoint, mask file, report input) resolve against
/// `base_dir`; output_dir is taken as given. Throws ConfigError naming the
/// offending key.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Reads and parses a config file; a missing or malformed file is a ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);

/// The resolved configuration, every default spelled out.
nlohmann::json to_json(const ExperimentConfig& config);

const char* to_string(Inverter inverter);
const char* to_string(EditAlgorithm algorithm);
ReconstructionStrategy parse_strategy(const std::string& text);

}  // namespace flowinv::cli
