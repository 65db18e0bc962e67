// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>

#include "CLI11.hpp"

#include "config.hpp"
#include "flowinv/errors.hpp"
#include "flowinv/inversion.hpp"
#include "flowinv/metrics.hpp"
#include "flowinv/report.hpp"
#include "flowinv/rng.hpp"

namespace flowinv::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kSubcommands[] = {"train", "invert", "reconstruct", "edit", "compare", "report"};

// Stream for source latents drawn from the run seed.
constexpr std::uint64_t kSourceStream = 2;
// Stream for MLP weight initialisation.
constexpr std::uint64_t kInitStream = 1;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> steps;
  std::string input;
};

struct Context {
  std::string command;
  ExperimentConfig cfg;
  std::ostream& out;
};

std::uint64_t parse_seed_env(const char* text) {
  const std::string s(text);
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError(std::string(kSeedEnv) + " must be a non-negative integer, got '" + s + "'");
  }
  return value;
}

// ---------------------------------------------------------------------------
// Field, source and condition construction.

MlpField train_mlp(const ExperimentConfig& cfg, TrainingLog* log_out) {
  MlpConfig mc = cfg.field.mlp;
  SeededRng init(cfg.seed, kInitStream);
  MlpField field = MlpField::random(mc, init);
  TrainingOptions options = cfg.field.training;
  options.seed = cfg.seed;
  TrainingLog log = train_two_moons(field, options);
  if (log_out) *log_out = std::move(log);
  return field;
}

std::unique_ptr<VelocityField> build_field(const Context& ctx) {
  const FieldSpec& f = ctx.cfg.field;
  switch (f.kind) {
    case FieldKind::Analytic:
      return std::make_unique<AnalyticGaussianField>(f.analytic);
    case FieldKind::Attention:
      return std::make_unique<AttentionField>(f.attention);
    case FieldKind::Mlp:
      break;
  }
  if (!f.checkpoint) {
    ctx.out << "no checkpoint given; training the mlp field in-process (" << f.training.steps << " steps)\n";
    return std::make_unique<MlpField>(train_mlp(ctx.cfg, nullptr));
  }
  if (!fs::exists(*f.checkpoint)) throw ConfigError("checkpoint not found: " + f.checkpoint->string());
  auto field = std::make_unique<MlpField>(MlpField::load(*f.checkpoint));
  const MlpConfig& got = field->config();
  if (got.hidden != f.mlp.hidden || got.condition_dim != f.mlp.condition_dim) {
    throw ConfigError("checkpoint " + f.checkpoint->string() + " has hidden=" + std::to_string(got.hidden) +
                      ", condition_dim=" + std::to_string(got.condition_dim) +
                      " but the config asks for hidden=" + std::to_string(f.mlp.hidden) +
                      ", condition_dim=" + std::to_string(f.mlp.condition_dim));
  }
  return field;
}

Latent build_source(const ExperimentConfig& cfg) {
  SeededRng rng(cfg.seed, kSourceStream);
  const SourceSpec& s = cfg.source;
  if (s.kind == SourceKind::TwoMoons) return sample_two_moons(rng, s.points, s.moon);
  return s.scale * gaussian_latent(rng, Shape::grid(s.shape[0], s.shape[1], s.shape[2]));
}

Condition build_condition(const ExperimentConfig& cfg, const VelocityField& field,
                          const std::optional<std::size_t>& index) {
  const std::size_t dim = field.condition_dim();
  if (!index) return Condition::null(dim);
  if (*index >= dim) {
    throw ConfigError("condition index " + std::to_string(*index) + " is out of range for " + field.name() +
                      " (condition_dim " + std::to_string(dim) + ")");
  }
  if (cfg.field.kind == FieldKind::Mlp && *index < 2) return moon_condition(static_cast<int>(*index), dim);
  return Condition::basis("c" + std::to_string(*index), *index, dim);
}

Guidance inversion_guidance(const ExperimentConfig& cfg, const VelocityField& field) {
  const Condition cond = build_condition(cfg, field, cfg.cond_src);
  return Guidance{cond, Condition::null(cond.embedding.size()), cfg.cfg_inv};
}

std::optional<EditMask> build_mask(const ExperimentConfig& cfg, const Latent& source) {
  const MaskSpec& m = cfg.edit.mask;
  const Shape& shape = source.shape();
  switch (m.kind) {
    case MaskKind::None:
      return std::nullopt;
    case MaskKind::Ones:
      return EditMask::ones(shape.height(), shape.width());
    case MaskKind::Zeros:
      return EditMask::zeros(shape.height(), shape.width());
    case MaskKind::File:
      if (!fs::exists(m.path)) throw ConfigError("mask file not found: " + m.path.string());
      return load_mask(m.path, std::pair{shape.height(), shape.width()});
    case MaskKind::Build:
      return flowinv::build_mask(m.type, m.box, threshold_segmenter(source, m.tau, m.channel), shape.height(),
                                 shape.width(), m.dilation);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Shared pieces of invert / reconstruct / compare.

InversionResult run_inverter(const ExperimentConfig& cfg, Inverter inverter, std::size_t iterations,
                             const VelocityField& field, const Latent& source, const TimeGrid& grid,
                             const Guidance& guidance) {
  switch (inverter) {
    case Inverter::Euler:
      return euler_invert(field, source, grid, guidance);
    case Inverter::Midpoint:
      return InversionResult{midpoint_invert(field, source, grid, guidance), ResidualTrace{}};
    case Inverter::FixedPoint:
      return fixed_point_invert(field, source, grid, guidance, iterations);
    case Inverter::Dna: {
      SeededRng rng(cfg.seed, kDnaNoiseStream);
      return dna_invert(field, source, grid, guidance, rng);
    }
  }
  throw ConfigError("unknown inverter");
}

struct Cell {
  std::string name;
  Inverter inverter;
  std::size_t iterations;
  ReconstructionStrategy strategy;
};

struct CellResult {
  MetricRow row;
  ErrorSeries series;
};

CellResult run_cell(const ExperimentConfig& cfg, const Cell& cell, const VelocityField& field, const Latent& source,
                    const TimeGrid& grid, const Guidance& guidance) {
  const CountingField inv_count(field);
  const InversionResult inv = run_inverter(cfg, cell.inverter, cell.iterations, inv_count, source, grid, guidance);
  const bool has_trace = !inv.trace.deltas.empty();
  const CountingField rec_count(field);
  const Trajectory recon =
      reconstruct(rec_count, inv.trajectory, has_trace ? &inv.trace : nullptr, cell.strategy, guidance);
  const StepErrors errors = step_level_mse(recon, inv.trajectory);

  CellResult out;
  out.row.method = cell.name;
  out.row.latent_dim = source.size();
  out.row.avg_step_mse = errors.avg;
  out.row.max_step_mse = errors.max;
  out.row.endpoint_mse = mse(recon.back(), source);
  out.row.endpoint_psnr = psnr(recon.back(), source);
  out.row.endpoint_ssim = ssim(recon.back(), source);
  out.row.eval_count = inv_count.count() + rec_count.count();
  out.series = ErrorSeries{cell.name, errors.per_step};
  return out;
}

std::vector<CellResult> run_cells(const ExperimentConfig& cfg, const std::vector<Cell>& cells,
                                  const VelocityField& field, const Latent& source, const TimeGrid& grid,
                                  const Guidance& guidance) {
  std::vector<std::future<CellResult>> pending;
  pending.reserve(cells.size());
  for (const Cell& cell : cells) {
    pending.push_back(std::async(std::launch::async, [&, cell] { return run_cell(cfg, cell, field, source, grid, guidance); }));
  }
  std::vector<CellResult> results;
  for (auto& f : pending) results.push_back(f.get());
  return results;
}

void print_rows(std::ostream& out, const MetricReport& report) {
  constexpr int kName = 22;
  constexpr int kNum = 25;
  out << std::left << std::setw(kName) << "method" << std::setw(kNum) << "avg_step_mse" << std::setw(kNum)
      << "max_step_mse" << std::setw(kNum) << "endpoint_psnr" << "evals\n";
  for (const MetricRow& r : report.rows()) {
    out << std::left << std::setw(kName) << r.method << std::setw(kNum) << format_double(r.avg_step_mse)
        << std::setw(kNum) << format_double(r.max_step_mse) << std::setw(kNum) << format_double(r.endpoint_psnr)
        << r.eval_count << '\n';
  }
}

void write_outputs(const Context& ctx, const std::vector<CellResult>& results) {
  MetricReport report;
  std::vector<ErrorSeries> series;
  for (const CellResult& r : results) {
    report.add(r.row);
    series.push_back(r.series);
  }
  const fs::path& dir = ctx.cfg.output_dir;
  write_report_csv(report, dir / "report.csv");
  write_step_csv(series, dir / "steps.csv");
  render_error_chart(series, dir / "chart.svg");
  print_rows(ctx.out, report);
  ctx.out << "wrote " << (dir / "report.csv").string() << ", " << (dir / "steps.csv").string() << ", "
          << (dir / "chart.svg").string() << '\n';
}

// Long-format trace dump: one row per (step, quantity).
void write_trace_csv(const ResidualTrace& trace, const TimeGrid& grid, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  const std::size_t n = trace.deltas.empty() ? 0 : trace.deltas.front().size();
  out << "step,sigma,quantity";
  for (std::size_t i = 0; i < n; ++i) out << ",z" << i;
  out << '\n';
  const auto row = [&](std::size_t t, const char* what, const Latent& z) {
    out << t << ',' << format_double(grid.sigma(t)) << ',' << what;
    for (double v : z.values()) out << ',' << format_double(v);
    out << '\n';
  };
  for (std::size_t t = 0; t < trace.deltas.size(); ++t) {
    row(t, "delta", trace.deltas[t]);
    if (t < trace.velocities.size()) row(t, "velocity", trace.velocities[t]);
    if (t < trace.increments.size()) {
      row(t, "increment_head", trace.increments[t].head);
      row(t, "increment_tail", trace.increments[t].tail);
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_train(const Context& ctx) {
  if (ctx.cfg.field.kind != FieldKind::Mlp) throw ConfigError("train needs field.kind = mlp");
  TrainingLog log;
  const MlpField field = train_mlp(ctx.cfg, &log);
  const fs::path ckpt = ctx.cfg.output_dir / "mlp.ckpt";
  field.save(ckpt);

  const fs::path loss_path = ctx.cfg.output_dir / "training_loss.csv";
  std::ofstream loss(loss_path, std::ios::binary | std::ios::trunc);
  if (!loss) throw IoError("cannot open for writing: " + loss_path.string());
  loss << "step,loss\n";
  for (std::size_t i = 0; i < log.losses.size(); ++i) loss << i << ',' << format_double(log.losses[i]) << '\n';
  if (!loss) throw IoError("failed writing " + loss_path.string());

  ctx.out << "trained " << field.parameter_count() << " parameters for " << log.losses.size() << " steps\n"
          << "running loss (window " << log.window << "): " << format_double(log.initial_running) << " -> "
          << format_double(log.final_running) << '\n'
          << "wrote " << ckpt.string() << ", " << loss_path.string() << '\n';
  return kExitOk;
}

int cmd_invert(const Context& ctx) {
  const auto field = build_field(ctx);
  const Latent source = build_source(ctx.cfg);
  const TimeGrid grid = make_time_grid(ctx.cfg.steps, ctx.cfg.schedule);
  const Guidance guidance = inversion_guidance(ctx.cfg, *field);
  const CountingField counted(*field);
  const InversionResult inv =
      run_inverter(ctx.cfg, ctx.cfg.inverter, ctx.cfg.iterations, counted, source, grid, guidance);

  const fs::path traj = ctx.cfg.output_dir / "inverse_trajectory.csv";
  write_trajectory_csv(inv.trajectory, traj, TrajectoryDump::Full);
  ctx.out << to_string(ctx.cfg.inverter) << " inversion: " << counted.count() << " evaluations, |Z_0| = "
          << format_double(std::sqrt(squared_norm(inv.trajectory.front()))) << '\n'
          << "wrote " << traj.string();
  if (!inv.trace.deltas.empty()) {
    const fs::path trace = ctx.cfg.output_dir / "trace.csv";
    write_trace_csv(inv.trace, grid, trace);
    ctx.out << ", " << trace.string();
  }
  ctx.out << '\n';
  return kExitOk;
}

int cmd_reconstruct(const Context& ctx) {
  const auto field = build_field(ctx);
  const Latent source = build_source(ctx.cfg);
  const TimeGrid grid = make_time_grid(ctx.cfg.steps, ctx.cfg.schedule);
  const Guidance guidance = inversion_guidance(ctx.cfg, *field);
  std::vector<Cell> cells;
  for (ReconstructionStrategy s : ctx.cfg.strategies) {
    cells.push_back({to_string(s), ctx.cfg.inverter, ctx.cfg.iterations, s});
  }
  write_outputs(ctx, run_cells(ctx.cfg, cells, *field, source, grid, guidance));
  return kExitOk;
}

int cmd_compare(const Context& ctx) {
  const auto field = build_field(ctx);
  const Latent source = build_source(ctx.cfg);
  const TimeGrid grid = make_time_grid(ctx.cfg.steps, ctx.cfg.schedule);
  const Guidance guidance = inversion_guidance(ctx.cfg, *field);
  const std::size_t k = ctx.cfg.compare_iterations;
  const std::vector<Cell> cells{
      {"Vanilla", Inverter::Euler, 1, ReconstructionStrategy::Vanilla},
      {"StepwiseCorrection", Inverter::Euler, 1, ReconstructionStrategy::StepwiseCorrection},
      {"FixedPoint(k=" + std::to_string(k) + ")", Inverter::FixedPoint, k, ReconstructionStrategy::Vanilla},
      {"DNA", Inverter::Dna, 1, ReconstructionStrategy::DirectAligned},
      {"DirectAligned", Inverter::Euler, 1, ReconstructionStrategy::DirectAligned},
      {"DirectAlignedCached", Inverter::Euler, 1, ReconstructionStrategy::DirectAlignedCached},
  };
  write_outputs(ctx, run_cells(ctx.cfg, cells, *field, source, grid, guidance));
  return kExitOk;
}

int cmd_edit(const Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const auto field = build_field(ctx);

  EditRequest request;
  request.source_latent = build_source(cfg);
  request.cond_src = build_condition(cfg, *field, cfg.cond_src);
  request.cond_tar = build_condition(cfg, *field, cfg.cond_tar);
  request.grid = make_time_grid(cfg.steps, cfg.schedule);
  request.mask = build_mask(cfg, request.source_latent);
  request.t_inj = cfg.edit.t_inj;
  request.cfg_inv = cfg.cfg_inv;
  request.cfg_edit = cfg.cfg_edit;
  request.injection = cfg.edit.injection;
  request.blending = cfg.edit.blending;
  request.alignment = cfg.edit.alignment;
  request.seed = cfg.seed;

  EditResult result;
  switch (cfg.edit.algorithm) {
    case EditAlgorithm::Direct:
      result = direct_edit(*field, request);
      break;
    case EditAlgorithm::Virtual:
      result = virtual_direct_edit(*field, request);
      break;
    case EditAlgorithm::Mvg:
      result = mvg_edit(*field, request, *cfg.edit.eta);
      break;
  }

  const fs::path json_path = cfg.output_dir / "edit.json";
  write_edit_result(result, json_path);
  ctx.out << to_string(cfg.edit.algorithm) << " edit: " << result.eval_count << " evaluations, L2(edited, source) = "
          << format_double(l2_distance(result.edited, request.source_latent)) << '\n';
  if (!result.step_errors.per_step.empty()) {
    write_step_csv({ErrorSeries{"source_branch", result.step_errors.per_step}}, cfg.output_dir / "steps.csv");
    ctx.out << "source branch avg step MSE = " << format_double(result.step_errors.avg) << '\n';
  }
  ctx.out << "wrote " << json_path.string() << '\n';

  // Mask boundaries at which the edit must reproduce the source exactly.
  const MaskKind mk = cfg.edit.mask.kind;
  const bool masked_out = request.blending && mk == MaskKind::Zeros;
  const bool unchanged = cfg.cond_src == cfg.cond_tar && cfg.cfg_inv == cfg.cfg_edit &&
                         (mk == MaskKind::None || mk == MaskKind::Ones || !request.blending);
  if (cfg.edit.algorithm == EditAlgorithm::Mvg || !(masked_out || unchanged)) return kExitOk;

  const Latent* reference = nullptr;
  const char* against = "";
  if (result.reconstruction) {
    reference = &*result.reconstruction;
    against = "reconstruction";
  } else if (masked_out || request.alignment == AlignmentMode::Cached) {
    reference = &request.source_latent;
    against = "source latent";
  }
  if (!reference) {
    ctx.out << "identity-edit check: SKIPPED (virtual editing in residual mode is exact only up to rounding)\n";
    return kExitOk;
  }
  const bool pass = bitwise_equal(result.edited, *reference);
  ctx.out << "identity-edit check: " << (pass ? "PASS" : "FAIL") << " (edited output "
          << (pass ? "bit-equal to " : "differs from ") << against << ")\n";
  return pass ? kExitOk : kExitRuntime;
}

int cmd_report(const Context& ctx, const fs::path& input) {
  if (input.empty()) throw ConfigError("report needs --input DIR or report.input_dir in the config");
  const fs::path report_in = input / "report.csv";
  const fs::path steps_in = input / "steps.csv";
  for (const fs::path& p : {report_in, steps_in}) {
    if (!fs::exists(p)) throw ConfigError("missing input file: " + p.string());
  }
  const MetricReport report = read_report_csv(report_in);
  const std::vector<ErrorSeries> series = read_step_csv(steps_in);
  const fs::path& dir = ctx.cfg.output_dir;
  write_report_csv(report, dir / "report.csv");
  write_step_csv(series, dir / "steps.csv");
  render_error_chart(series, dir / "chart.svg");
  print_rows(ctx.out, report);
  ctx.out << "re-rendered " << report.rows().size() << " rows and " << series.size() << " series into "
          << dir.string() << '\n';
  return kExitOk;
}

int dispatch(const Context& ctx, const Overrides& o) {
  const std::string& c = ctx.command;
  if (c == "train") return cmd_train(ctx);
  if (c == "invert") return cmd_invert(ctx);
  if (c == "reconstruct") return cmd_reconstruct(ctx);
  if (c == "edit") return cmd_edit(ctx);
  if (c == "compare") return cmd_compare(ctx);
  return cmd_report(ctx, o.input.empty() ? ctx.cfg.report_input : fs::path(o.input));
}

int execute(const std::string& command, const Overrides& o, std::ostream& out) {
  ExperimentConfig cfg = o.config.empty() ? parse_config(nlohmann::json::object(), fs::current_path())
                                          : load_config(o.config);
  const char* seed_source = "config";
  if (const char* env = std::getenv(kSeedEnv); env != nullptr) {
    cfg.seed = parse_seed_env(env);
    seed_source = kSeedEnv;
  }
  if (o.seed) {
    cfg.seed = *o.seed;
    seed_source = "--seed";
  }
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.steps) {
    cfg.steps = *o.steps;
    make_time_grid(cfg.steps, cfg.schedule);
  }

  out << "flowinv " << command << '\n'
      << "seed: " << cfg.seed << " (from " << seed_source << ")\n"
      << "resolved config:\n"
      << to_json(cfg).dump(2) << '\n';

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
  {
    const fs::path resolved = cfg.output_dir / "config.resolved.json";
    std::ofstream f(resolved, std::ios::binary | std::ios::trunc);
    f << to_json(cfg).dump(2) << '\n';
    if (!f) throw IoError("failed writing " + resolved.string());
  }
  return dispatch(Context{command, std::move(cfg), out}, o);
}

}  // namespace

std::string usage() {
  return "usage: flowinv <command> [--config FILE] [--seed N] [--out DIR] [--steps T]\n"
         "\n"
         "commands:\n"
         "  train        fit the two-moons MLP field and write a checkpoint\n"
         "  invert       run the configured inverter; dump trajectory and residual trace\n"
         "  reconstruct  run the configured reconstruction strategies; write step-error CSV\n"
         "  edit         run direct, virtual or mvg editing on the configured request\n"
         "  compare      run the full method matrix; write report.csv, steps.csv, chart.svg\n"
         "  report       re-render report.csv and chart.svg from saved CSVs (--input DIR)\n"
         "\n"
         "The seed resolves as --seed, then $" +
         std::string(kSeedEnv) +
         ", then the config.\n"
         "Exit codes: 0 success, 1 configuration error, 2 runtime failure.\n";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.size() < 2) {
    err << usage();
    return kExitConfig;
  }
  const std::string& command = args[1];
  if (command == "-h" || command == "--help" || command == "help") {
    out << usage();
    return kExitOk;
  }
  if (std::find(std::begin(kSubcommands), std::end(kSubcommands), command) == std::end(kSubcommands)) {
    err << "error: unknown subcommand '" << command << "'\n\n" << usage();
    return kExitConfig;
  }

  CLI::App app{"flowinv " + command};
  app.name("flowinv " + command);
  Overrides o;
  app.add_option("--config", o.config, "JSON experiment config");
  app.add_option("--seed", o.seed, "seed override");
  app.add_option("--out", o.out, "output directory override");
  app.add_option("--steps", o.steps, "number of grid steps override")->check(CLI::PositiveNumber);
  if (command == "report") app.add_option("--input", o.input, "directory holding report.csv and steps.csv");

  std::vector<std::string> rest(args.rbegin(), args.rend() - 2);
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    return execute(command, o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
  } catch (const TapeError& e) {
    err << "tape error: " << e.what() << '\n';
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitRuntime;
}

}  // namespace flowinv::cli
