#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brtm/rng.hpp"

namespace brtm {

using TaskId = std::uint32_t;
using VehicleId = std::uint32_t;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

double distance(const Point& a, const Point& b);

/// A traffic-information collection task announced by the TA.
struct Task {
  TaskId id = 0;
  Point position;
  double appraisement = 0.0;  ///< value of the task to the TA, in data coins

  friend bool operator==(const Task&, const Task&) = default;
};

/// An active vehicle together with its sealed task-bid pair.
struct Vehicle {
  VehicleId id = 0;
  Point position;
  double detection_distance = 0.0;  ///< meters
  double true_cost = 0.0;           ///< private cost of serving task_subset
  std::vector<TaskId> task_subset;  ///< sorted, unique
  double bid = 0.0;

  friend bool operator==(const Vehicle&, const Vehicle&) = default;
};

/// One auction round: the TA's tasks, the vehicles' task-bid pairs, and the
/// budget that caps the sum of winners' bids.
///
/// Ids are dense: tasks[j].id == j and vehicles[i].id == i.
struct AuctionInstance {
  std::vector<Task> tasks;
  std::vector<Vehicle> vehicles;
  double budget = 0.0;

  friend bool operator==(const AuctionInstance&, const AuctionInstance&) = default;
};

struct AuctionOutcome {
  std::vector<VehicleId> winners;  ///< in selection order
  std::map<VehicleId, double> payments;
  double profit = 0.0;     ///< A(W) minus total payments
  double total_bid = 0.0;  ///< sum of winners' bids; never exceeds the budget
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct ScenarioConfig {
  double city_side = 1000.0;
  std::size_t n_tasks = 200;
  std::size_t n_vehicles = 500;
  Interval detection_range{10.0, 30.0};
  Interval appraisement_range{0.0, 10.0};  ///< sampled as (lo, hi]
  Interval kappa_range{0.0, 5.0};          ///< sampled as (lo, hi]
  double budget = 100.0;
  std::uint64_t rng_seed = 1;
};

/// Throws ModelError if the instance breaks an id, bid or subset invariant.
/// A zero budget is accepted (it admits no winner).
void validate(const AuctionInstance& instance);

/// Places tasks and vehicles uniformly in the city square and derives each
/// vehicle's task subset from its detection distance (strict `<`). A vehicle
/// whose disk covers no task is not active, so its position is redrawn until
/// it covers at least one. Cost is kappa * |T_i| and the bid equals the cost.
AuctionInstance generate_scenario(const ScenarioConfig& config);

/// A(W): total appraisement over the union of the winners' task subsets.
double coverage_value(std::span<const VehicleId> winners, const AuctionInstance& instance);

/// Vehicle utility: payment minus true cost for a winner, zero otherwise.
double vehicle_utility(const AuctionOutcome& outcome, const Vehicle& vehicle);

/// Five tasks a = (2,3,4,2,5), B = 5, three vehicles with T1 = {t1,t3,t5},
/// T2 = {t1,t2,t5}, T3 = {t3,t4,t5} and bids = costs = 2. Ids are 0-based,
/// so v1 is vehicle 0.
AuctionInstance paper_example();

// Line-oriented scenario text format; see docs/formats.md.
void write_scenario(std::ostream& out, const AuctionInstance& instance);
AuctionInstance read_scenario(std::istream& in);
AuctionInstance load_scenario(const std::string& path);
void save_scenario(const std::string& path, const AuctionInstance& instance);

}  // namespace brtm
