#include <omp.h>

#include "brtm/kernels.hpp"

namespace brtm::kernels::omp {

namespace {

// Below this many candidates the fork/join cost outweighs the scan.
constexpr std::ptrdiff_t kParallelThreshold = 2048;

}  // namespace

std::optional<MarginalGain> best_unit_gain(std::span<const double> marginals, std::span<const double> bids,
                                           std::span<const std::uint8_t> eligible, double spent, double budget) {
  const auto n = static_cast<std::ptrdiff_t>(marginals.size());
  std::optional<MarginalGain> best;

#pragma omp parallel if (n >= kParallelThreshold)
  {
    std::optional<MarginalGain> local;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (!eligible[i] || !(spent + bids[i] <= budget)) continue;
      const MarginalGain g = make_gain(static_cast<VehicleId>(i), marginals[i], bids[i]);
      if (!local || better(g, *local)) local = g;
    }
    // better() is a strict total order on (unit_gain, id), so the reduction
    // result does not depend on thread count or merge order.
#pragma omp critical(brtm_best_unit_gain)
    {
      if (local && (!best || better(*local, *best))) best = local;
    }
  }
  return best;
}

std::vector<double> marginal_coverage(const AuctionInstance& instance, std::span<const std::uint8_t> covered) {
  const auto n = static_cast<std::ptrdiff_t>(instance.vehicles.size());
  std::vector<double> out(instance.vehicles.size(), 0.0);
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Vehicle& v = instance.vehicles[i];
    double sum = 0.0;
    for (TaskId t : v.task_subset) {
      if (!covered[t]) sum += instance.tasks[t].appraisement;
    }
    out[i] = sum;
  }
  return out;
}

}  // namespace brtm::kernels::omp
