// Serial reference vs OpenMP kernels on generated scenarios.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "brtm/auction.hpp"
#include "brtm/kernels.hpp"
#include "brtm/model.hpp"

namespace {

brtm::AuctionInstance scenario(std::size_t n_vehicles, double budget) {
  brtm::ScenarioConfig c;
  c.n_vehicles = n_vehicles;
  c.n_tasks = n_vehicles / 2;
  c.budget = budget;
  c.rng_seed = 42;
  return brtm::generate_scenario(c);
}

void BM_MarginalCoverageSerial(benchmark::State& state) {
  const auto inst = scenario(static_cast<std::size_t>(state.range(0)), 100.0);
  const std::vector<std::uint8_t> covered(inst.tasks.size(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(brtm::kernels::serial::marginal_coverage(inst, covered));
}

void BM_MarginalCoverageOmp(benchmark::State& state) {
  const auto inst = scenario(static_cast<std::size_t>(state.range(0)), 100.0);
  const std::vector<std::uint8_t> covered(inst.tasks.size(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(brtm::kernels::omp::marginal_coverage(inst, covered));
}

void BM_Greedy(benchmark::State& state, brtm::auction::Execution exec) {
  const auto inst = scenario(static_cast<std::size_t>(state.range(0)), 200.0);
  for (auto _ : state) benchmark::DoNotOptimize(brtm::auction::greedy_heuristic(inst, exec));
}

void BM_Tbsap(benchmark::State& state, brtm::auction::Execution exec) {
  const auto inst = scenario(static_cast<std::size_t>(state.range(0)), 100.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(brtm::auction::tbsap(inst, brtm::auction::PaymentRule::Critical, exec));
}

}  // namespace

BENCHMARK(BM_MarginalCoverageSerial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_MarginalCoverageOmp)->Arg(1000)->Arg(10000);
BENCHMARK_CAPTURE(BM_Greedy, serial, brtm::auction::Execution::Serial)->Arg(500)->Arg(2000);
BENCHMARK_CAPTURE(BM_Greedy, parallel, brtm::auction::Execution::Parallel)->Arg(500)->Arg(2000);
BENCHMARK_CAPTURE(BM_Tbsap, serial, brtm::auction::Execution::Serial)->Arg(500)->Arg(1000);
BENCHMARK_CAPTURE(BM_Tbsap, parallel, brtm::auction::Execution::Parallel)->Arg(500)->Arg(1000);

BENCHMARK_MAIN();
