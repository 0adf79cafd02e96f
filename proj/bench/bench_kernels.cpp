// Parallel kernels against their serial reference versions. Thread count
// follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <numeric>

#include "coftherm/reference.hpp"
#include "fixtures.hpp"

using namespace coftherm;

namespace {

const Structure& sheet() {
  static const Structure s = fixtures::honeycomb_no2().replicate(6, 6, 1);
  return s;
}

const Trajectory& noise() {
  static const Trajectory t = fixtures::white_noise(4096, 64, 1);
  return t;
}

const Trajectory& chain() {
  static const Trajectory t = fixtures::harmonic_chain(16, 256, 0.1, 5, 1);
  return t;
}

const AttentionStack& stack() {
  static const AttentionStack a = fixtures::random_stack(4, 4, 150, 49, 1);
  return a;
}

const FeatureTable& table() {
  static const FeatureTable t = fixtures::linear_signal_table(500, 1);
  return t;
}

std::vector<std::size_t> all_atoms(const Trajectory& t) {
  std::vector<std::size_t> g(t.n_atoms());
  std::iota(g.begin(), g.end(), 0);
  return g;
}

void BM_BondGraph(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(build_bond_graph(sheet()));
  st.counters["atoms"] = static_cast<double>(sheet().size());
}
void BM_BondGraphSerial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(reference::bond_graph(sheet()));
}

void BM_Vacf(benchmark::State& st) {
  const auto g = all_atoms(noise());
  for (auto _ : st) benchmark::DoNotOptimize(vacf(noise(), g, {256, true}));
}
void BM_VacfSerial(benchmark::State& st) {
  const auto g = all_atoms(noise());
  for (auto _ : st) benchmark::DoNotOptimize(reference::vacf(noise(), g, {256, true}));
}

void BM_Psed(benchmark::State& st) {
  for (auto _ : st)
    benchmark::DoNotOptimize(psed(chain(), fixtures::chain_unit_cell(), {0, 16, Window::None}));
}
void BM_PsedSerial(benchmark::State& st) {
  for (auto _ : st)
    benchmark::DoNotOptimize(reference::psed(chain(), fixtures::chain_unit_cell(), {0, 16, Window::None}));
}

void BM_Rollout(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(rollout(stack()));
}
void BM_RolloutSerial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(reference::rollout(stack()));
}

void BM_Forest(benchmark::State& st) {
  ForestConfig cfg;
  cfg.n_trees = 50;
  for (auto _ : st) benchmark::DoNotOptimize(fit_forest(table(), cfg));
}
void BM_ForestSerial(benchmark::State& st) {
  ForestConfig cfg;
  cfg.n_trees = 50;
  for (auto _ : st) benchmark::DoNotOptimize(reference::fit_forest(table(), cfg));
}

} // namespace

BENCHMARK(BM_BondGraph)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BondGraphSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Vacf)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VacfSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Psed)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PsedSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Rollout)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RolloutSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forest)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
