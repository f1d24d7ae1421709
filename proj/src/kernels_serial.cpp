#include "brtm/kernels.hpp"

namespace brtm::kernels {

TaskIndex::TaskIndex(const AuctionInstance& instance) : offsets_(instance.tasks.size() + 1, 0) {
  for (const Vehicle& v : instance.vehicles) {
    for (TaskId t : v.task_subset) ++offsets_[t + 1];
  }
  for (std::size_t t = 0; t < instance.tasks.size(); ++t) offsets_[t + 1] += offsets_[t];
  holders_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const Vehicle& v : instance.vehicles) {
    for (TaskId t : v.task_subset) holders_[cursor[t]++] = v.id;
  }
}

CoverageTracker::CoverageTracker(const AuctionInstance& instance, const TaskIndex& index)
    : instance_(&instance), index_(&index), covered_(instance.tasks.size(), 0), marginal_(instance.vehicles.size()) {
  for (const Vehicle& v : instance.vehicles) {
    double sum = 0.0;
    for (TaskId t : v.task_subset) sum += instance.tasks[t].appraisement;
    marginal_[v.id] = sum;
  }
}

void CoverageTracker::add(VehicleId v) {
  for (TaskId t : instance_->vehicles[v].task_subset) {
    if (covered_[t]) continue;
    covered_[t] = 1;
    covered_value_ += instance_->tasks[t].appraisement;
  }
  // Recompute affected marginals from scratch (same summation order as
  // serial::marginal_coverage) so cached values are bit-identical to a scan.
  for (TaskId t : instance_->vehicles[v].task_subset) {
    for (VehicleId h : index_->holders(t)) {
      double sum = 0.0;
      for (TaskId u : instance_->vehicles[h].task_subset) {
        if (!covered_[u]) sum += instance_->tasks[u].appraisement;
      }
      marginal_[h] = sum;
    }
  }
}

std::vector<double> bid_vector(const AuctionInstance& instance) {
  std::vector<double> bids(instance.vehicles.size());
  for (const Vehicle& v : instance.vehicles) bids[v.id] = v.bid;
  return bids;
}

namespace serial {

std::optional<MarginalGain> best_unit_gain(std::span<const double> marginals, std::span<const double> bids,
                                           std::span<const std::uint8_t> eligible, double spent, double budget) {
  std::optional<MarginalGain> best;
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    if (!eligible[i] || !(spent + bids[i] <= budget)) continue;
    const MarginalGain g = make_gain(static_cast<VehicleId>(i), marginals[i], bids[i]);
    if (!best || better(g, *best)) best = g;
  }
  return best;
}

std::vector<double> marginal_coverage(const AuctionInstance& instance, std::span<const std::uint8_t> covered) {
  std::vector<double> out(instance.vehicles.size(), 0.0);
  for (const Vehicle& v : instance.vehicles) {
    double sum = 0.0;
    for (TaskId t : v.task_subset) {
      if (!covered[t]) sum += instance.tasks[t].appraisement;
    }
    out[v.id] = sum;
  }
  return out;
}

}  // namespace serial

}  // namespace brtm::kernels
