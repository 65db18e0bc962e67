// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "flowinv/attention_field.hpp"
#include "flowinv/edit.hpp"
#include "flowinv/inversion.hpp"
#include "flowinv/metrics.hpp"
#include "flowinv/mlp_field.hpp"

namespace {

using namespace flowinv;

const MlpField& mlp() {
  static const MlpField field = [] {
    SeededRng rng(0, 1);
    return MlpField::random(MlpConfig{}, rng);
  }();
  return field;
}

Latent moons(std::size_t n) {
  SeededRng rng(4, 2);
  return sample_two_moons(rng, n, 0);
}

const Guidance kMoonGuidance{moon_condition(0, 2), Condition::null(2), 1.0};

void BM_MlpEval(benchmark::State& state) {
  const Latent z = moons(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mlp().eval(z, 0.5, kMoonGuidance.condition));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpEval)->Arg(16)->Arg(64)->Arg(256);

void BM_EulerInvert(benchmark::State& state) {
  const Latent z1 = moons(64);
  const TimeGrid grid = make_time_grid(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(euler_invert(mlp(), z1, grid, kMoonGuidance));
}
BENCHMARK(BM_EulerInvert)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const auto strategy = static_cast<ReconstructionStrategy>(state.range(0));
  const TimeGrid grid = make_time_grid(30);
  const InversionResult inv = euler_invert(mlp(), moons(64), grid, kMoonGuidance);
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct(mlp(), inv.trajectory, &inv.trace, strategy, kMoonGuidance));
  state.SetLabel(to_string(strategy));
}
BENCHMARK(BM_Reconstruct)
    ->Arg(static_cast<int>(ReconstructionStrategy::Vanilla))
    ->Arg(static_cast<int>(ReconstructionStrategy::DirectAligned))
    ->Arg(static_cast<int>(ReconstructionStrategy::DirectAlignedCached))
    ->Unit(benchmark::kMillisecond);

void BM_AttentionEval(benchmark::State& state) {
  const AttentionField field(AttentionConfig{});
  const auto side = static_cast<std::size_t>(state.range(0));
  SeededRng rng(1);
  const Latent z = gaussian_latent(rng, Shape::grid(2, side, side));
  const Condition c = Condition::basis("c", 0, 4);
  for (auto _ : state) benchmark::DoNotOptimize(field.eval(z, 0.3, c));
}
BENCHMARK(BM_AttentionEval)->Arg(8)->Arg(16);

void BM_DirectEdit(benchmark::State& state) {
  const AttentionField field(AttentionConfig{});
  SeededRng rng(2);
  EditRequest r;
  r.source_latent = gaussian_latent(rng, Shape::grid(2, 8, 8));
  r.cond_src = Condition::basis("src", 0, 4);
  r.cond_tar = Condition::basis("tar", 1, 4);
  r.alignment = state.range(0) ? AlignmentMode::Cached : AlignmentMode::Residual;
  for (auto _ : state) benchmark::DoNotOptimize(state.range(1) ? virtual_direct_edit(field, r) : direct_edit(field, r));
  state.SetLabel(std::string(to_string(r.alignment)) + (state.range(1) ? "/virtual" : "/dual"));
}
BENCHMARK(BM_DirectEdit)->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  SeededRng rng(3);
  const Latent a = gaussian_latent(rng, Shape::grid(3, side, side));
  const Latent b = gaussian_latent(rng, Shape::grid(3, side, side));
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
