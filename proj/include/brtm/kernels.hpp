#pragma once

// Data-parallel inner loops of the auction. Every kernel exists twice: a
// plain serial reference kept for testing and an OpenMP version used by the
// mechanisms. Both must return bit-identical results for the same input.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "brtm/model.hpp"

namespace brtm::kernels {

/// P̄(v|X) and P̂(v|X) for one candidate.
struct MarginalGain {
  VehicleId vehicle = 0;
  double gain = 0.0;       ///< A(v|X) - b_v
  double unit_gain = 0.0;  ///< gain / b_v

  friend bool operator==(const MarginalGain&, const MarginalGain&) = default;
};

/// Argmax order: larger unit gain first, lowest id on ties.
inline bool better(const MarginalGain& a, const MarginalGain& b) {
  return a.unit_gain > b.unit_gain || (a.unit_gain == b.unit_gain && a.vehicle < b.vehicle);
}

inline MarginalGain make_gain(VehicleId v, double marginal, double bid) {
  const double gain = marginal - bid;
  return {v, gain, gain / bid};
}

/// Inverted index task -> vehicles whose subset contains it.
class TaskIndex {
 public:
  explicit TaskIndex(const AuctionInstance& instance);
  std::span<const VehicleId> holders(TaskId t) const {
    return {holders_.data() + offsets_[t], holders_.data() + offsets_[t + 1]};
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<VehicleId> holders_;
};

/// Covered task set X plus the cached marginal coverage A(v|X) of every
/// vehicle. add() marks a vehicle's tasks covered and lowers the cached
/// marginals of every vehicle sharing one of them.
class CoverageTracker {
 public:
  CoverageTracker(const AuctionInstance& instance, const TaskIndex& index);

  double covered_value() const { return covered_value_; }
  double marginal(VehicleId v) const { return marginal_[v]; }
  std::span<const double> marginals() const { return marginal_; }
  bool is_covered(TaskId t) const { return covered_[t] != 0; }
  void add(VehicleId v);

 private:
  const AuctionInstance* instance_;
  const TaskIndex* index_;
  std::vector<std::uint8_t> covered_;
  std::vector<double> marginal_;
  double covered_value_ = 0.0;
};

/// Dense bid vector in vehicle-id order.
std::vector<double> bid_vector(const AuctionInstance& instance);

namespace serial {

/// Best candidate among vehicles with eligible[v] != 0 and spent + bid <= budget
/// (pass an infinite budget to disable the filter).
std::optional<MarginalGain> best_unit_gain(std::span<const double> marginals, std::span<const double> bids,
                                           std::span<const std::uint8_t> eligible, double spent, double budget);

/// A(v|X) for every vehicle by direct scan of the covered flags.
std::vector<double> marginal_coverage(const AuctionInstance& instance, std::span<const std::uint8_t> covered);

}  // namespace serial

namespace omp {

std::optional<MarginalGain> best_unit_gain(std::span<const double> marginals, std::span<const double> bids,
                                           std::span<const std::uint8_t> eligible, double spent, double budget);

std::vector<double> marginal_coverage(const AuctionInstance& instance, std::span<const std::uint8_t> covered);

}  // namespace omp

}  // namespace brtm::kernels
