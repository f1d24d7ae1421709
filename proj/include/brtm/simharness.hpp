#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "brtm/consensus.hpp"
#include "brtm/model.hpp"

namespace brtm::sim {

class ExperimentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Experiment { ReputationTrajectory, RnwVsRafn, ProfitVsBudget, BidPaymentScatter };

std::string_view to_string(Experiment e);  ///< "reputation-trajectory", ...
std::optional<Experiment> parse_experiment(std::string_view name);

struct ExperimentSpec {
  Experiment experiment = Experiment::RnwVsRafn;
  std::uint64_t seed = 1;
  std::size_t trials = 100;
  bool parallel = true;  ///< run trials on OpenMP threads; never changes results

  // consensus studies
  std::size_t n_nodes = 100;
  consensus::CommitteeSizes sizes;
  consensus::ReputationParams params;
  std::vector<double> rafn_grid;  ///< 0, 0.05, ..., 0.95

  // auction studies
  std::vector<std::size_t> vehicle_counts;  ///< 500, 1000
  std::vector<double> budget_grid;          ///< 25, 50, ..., 400
  std::size_t n_tasks = 200;
  double scatter_budget = 100.0;

  void validate() const;
};

/// Defaults for each study; trials default to 100.
ExperimentSpec default_spec(Experiment experiment, std::uint64_t seed = 1);

/// Seed of trial `trial` at sweep point `point`. Independent of thread count.
std::uint64_t trial_seed(std::uint64_t master, std::size_t point, std::size_t trial);

struct MetricRow {
  double sweep = 0.0;
  std::string metric;
  double mean = 0.0;
  std::vector<double> values;  ///< one per trial, in trial order
};

MetricRow make_row(double sweep, std::string metric, std::vector<double> values);

// ---- reputation trajectory --------------------------------------------------

struct TrajectoryPoint {
  std::size_t epoch = 0;
  std::size_t round = 0;  ///< 0 is the initial state
  consensus::NodeId node = 0;
  consensus::Profile profile = consensus::Profile::Normal;
  double reputation = 0.0;
  double delta = 0.0;
  consensus::Role role = consensus::Role::None;
};

/// Scripted run over three epochs of ten rounds with one tracked normal node
/// and one tracked abnormal node.
///   normal:   epoch 1 voter only, epoch 2 witness leading round 15, epoch 3 standby witness.
///   abnormal: never votes, outside the committee in epochs 1-2, epoch 3 witness
///             that skips verification and leads round 25 with an invalid block.
std::vector<TrajectoryPoint> exp_reputation_trajectory(const ExperimentSpec& spec);

inline constexpr consensus::NodeId kTrackedNormal = 0;
inline constexpr consensus::NodeId kTrackedAbnormal = 1;

// ---- RNW vs RAFN ---------------------------------------------------------------

/// Normal witnesses of a single election over a fresh population. Abnormal
/// nodes vote adversarially.
double ratio_of_normal_witnesses(std::size_t n_nodes, std::size_t n_abnormal, consensus::CommitteeSizes sizes,
                                 const consensus::ReputationParams& params, consensus::VotingMode mode,
                                 std::uint64_t seed);

double ideal_rnw(std::size_t n_nodes, double rafn, std::size_t committee);

/// Rows with metrics "reputation", "equal" and "ideal" per RAFN point.
std::vector<MetricRow> exp_rnw_vs_rafn(const ExperimentSpec& spec);

// ---- profit vs budget ----------------------------------------------------------

/// Rows "greedy/<n>" and "tbsap/<n>" per budget. Trial t of a vehicle count
/// uses one instance for every budget and both mechanisms.
std::vector<MetricRow> exp_profit_vs_budget(const ExperimentSpec& spec);

// ---- bid/payment scatter -------------------------------------------------------

struct ScatterPoint {
  std::size_t n_vehicles = 0;
  std::size_t trial = 0;
  VehicleId vehicle = 0;
  double bid = 0.0;
  double payment = 0.0;
};

struct ScatterResult {
  std::vector<ScatterPoint> points;
  /// "mean_winner_bid" per vehicle count; a trial without winners contributes 0.
  std::vector<MetricRow> summary;
};

ScatterResult exp_bid_payment_scatter(const ExperimentSpec& spec);

// ---- output -----------------------------------------------------------------------

void write_csv(std::ostream& out, const std::vector<TrajectoryPoint>& points);
void write_csv(std::ostream& out, const std::vector<MetricRow>& rows);
void write_csv(std::ostream& out, const ScatterResult& result);

/// Runs the experiment of `spec` and writes `<root>/<experiment>/<seed>.csv`.
/// Returns the path written.
std::string run_to_directory(const ExperimentSpec& spec, const std::string& root);

/// Runs the experiment of `spec` and writes its CSV to `out`.
void run_to_stream(const ExperimentSpec& spec, std::ostream& out);

}  // namespace brtm::sim
