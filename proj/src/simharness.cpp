#include "brtm/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <ostream>

#include "brtm/auction.hpp"
#include "brtm/rng.hpp"

namespace brtm::sim {

namespace {

using consensus::NodeId;

// Runs body(t) for t in [0, n). Each trial writes only its own slot, so the
// result does not depend on scheduling.
template <class F>
void for_trials(std::size_t n, bool parallel, F&& body) {
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::int64_t t = 0; t < count; ++t) body(static_cast<std::size_t>(t));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> steps(double lo, double hi, double step) {
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  for (std::size_t k = 0; k <= n; ++k) out.push_back(std::round((lo + step * static_cast<double>(k)) * 1e9) / 1e9);
  return out;
}

ScenarioConfig scenario_for(const ExperimentSpec& spec, std::size_t n_vehicles, std::uint64_t seed) {
  ScenarioConfig c;
  c.n_tasks = spec.n_tasks;
  c.n_vehicles = n_vehicles;
  c.rng_seed = seed;
  return c;
}

}  // namespace

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::ReputationTrajectory: return "reputation-trajectory";
    case Experiment::RnwVsRafn: return "rnw-vs-rafn";
    case Experiment::ProfitVsBudget: return "profit-vs-budget";
    case Experiment::BidPaymentScatter: return "bid-payment-scatter";
  }
  return "?";
}

std::optional<Experiment> parse_experiment(std::string_view name) {
  for (Experiment e : {Experiment::ReputationTrajectory, Experiment::RnwVsRafn, Experiment::ProfitVsBudget,
                       Experiment::BidPaymentScatter}) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

void ExperimentSpec::validate() const {
  if (trials == 0) throw ExperimentError("trials must be at least 1");
  params.validate();
  switch (experiment) {
    case Experiment::ReputationTrajectory: break;
    case Experiment::RnwVsRafn:
      if (rafn_grid.empty()) throw ExperimentError("RAFN grid is empty");
      for (double r : rafn_grid) {
        if (!(r >= 0.0 && r <= 1.0)) throw ExperimentError("RAFN values must lie in [0,1]");
      }
      if (sizes.active == 0 || sizes.active > sizes.committee || sizes.committee > n_nodes)
        throw ExperimentError("committee sizes must satisfy 1 <= |D| <= |M| <= |Z|");
      break;
    case Experiment::ProfitVsBudget:
    case Experiment::BidPaymentScatter:
      if (vehicle_counts.empty()) throw ExperimentError("vehicle-count grid is empty");
      if (n_tasks == 0) throw ExperimentError("at least one task is required");
      if (experiment == Experiment::ProfitVsBudget) {
        if (budget_grid.empty()) throw ExperimentError("budget grid is empty");
        for (double b : budget_grid) {
          if (!(b >= 0.0) || !std::isfinite(b)) throw ExperimentError("budgets must be finite and nonnegative");
        }
      } else if (!(scatter_budget >= 0.0) || !std::isfinite(scatter_budget)) {
        throw ExperimentError("budget must be finite and nonnegative");
      }
      break;
  }
}

ExperimentSpec default_spec(Experiment experiment, std::uint64_t seed) {
  ExperimentSpec s;
  s.experiment = experiment;
  s.seed = seed;
  s.rafn_grid = steps(0.0, 0.95, 0.05);
  s.vehicle_counts = {500, 1000};
  s.budget_grid = steps(25.0, 400.0, 25.0);
  if (experiment == Experiment::ReputationTrajectory) s.trials = 1;
  return s;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t point, std::size_t trial) {
  return derive_seed(derive_seed(master, point), trial);
}

MetricRow make_row(double sweep, std::string metric, std::vector<double> values) {
  MetricRow r;
  r.sweep = sweep;
  r.metric = std::move(metric);
  r.mean = values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  r.values = std::move(values);
  return r;
}

// ---- reputation trajectory --------------------------------------------------

std::vector<TrajectoryPoint> exp_reputation_trajectory(const ExperimentSpec& spec) {
  using namespace consensus;
  spec.validate();
  constexpr std::size_t kRounds = 10;
  constexpr std::size_t kFillers = 10;

  std::vector<FullNode> nodes(2 + kFillers);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].id = static_cast<NodeId>(i);
    nodes[i].reputation = 0.5;
  }
  FullNode& bad = nodes[kTrackedAbnormal];
  bad.profile = Profile::Abnormal;
  for (std::size_t e = 1; e <= 3; ++e) bad.script.votes[e] = VoteAction::Abstain;
  for (std::size_t r = 2 * kRounds + 1; r <= 3 * kRounds; ++r) bad.script.verify[r] = VerifyAction::Skip;
  bad.script.produce[25] = ProduceAction::Invalid;

  std::vector<NodeId> fillers(kFillers);
  std::iota(fillers.begin(), fillers.end(), NodeId{2});
  auto with_leader_at_5 = [&](NodeId n) {
    std::vector<NodeId> a(fillers.begin(), fillers.begin() + kFillers - 1);
    a.insert(a.begin() + 4, n);
    return a;
  };

  SimulationConfig config;
  config.params = spec.params;
  config.sizes = CommitteeSizes{kRounds + 1, kRounds};
  config.n_epochs = 3;
  config.seed = spec.seed;
  config.forced[1] = ForcedElection{fillers, {}};
  config.forced[2] = ForcedElection{with_leader_at_5(kTrackedNormal), {}};
  config.forced[3] = ForcedElection{with_leader_at_5(kTrackedAbnormal), {kTrackedNormal}};

  const History history = run_epochs(nodes, config);

  std::vector<TrajectoryPoint> out;
  for (NodeId id : {kTrackedNormal, kTrackedAbnormal}) {
    out.push_back({0, 0, id, nodes[id].profile, nodes[id].reputation, 0.0, Role::None});
  }
  for (const HistoryRow& row : history.rows) {
    if (row.node != kTrackedNormal && row.node != kTrackedAbnormal) continue;
    out.push_back({row.epoch, row.round, row.node, nodes[row.node].profile, row.reputation, row.delta, row.role});
  }
  return out;
}

// ---- RNW vs RAFN ---------------------------------------------------------------

double ratio_of_normal_witnesses(std::size_t n_nodes, std::size_t n_abnormal, consensus::CommitteeSizes sizes,
                                 const consensus::ReputationParams& params, consensus::VotingMode mode,
                                 std::uint64_t seed) {
  if (n_abnormal > n_nodes) throw ExperimentError("more abnormal nodes than nodes");
  Rng rng(seed);
  std::vector<NodeId> ids(n_nodes);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  shuffle(std::span<NodeId>(ids), rng);
  std::unique_ptr<bool[]> abnormal(new bool[n_nodes]());
  for (std::size_t k = 0; k < n_abnormal; ++k) abnormal[ids[k]] = true;

  std::vector<double> reps(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    reps[i] = abnormal[i] ? uniform_closed_open(rng, 0.0, 0.5) : uniform_closed(rng, 0.5, 1.0);
  }
  const auto nodes = consensus::make_population(reps, std::span<const bool>(abnormal.get(), n_nodes));

  const auto ballots = consensus::cast_votes(nodes, params, 1);
  const auto committee = consensus::elect_witnesses(ballots, nodes, sizes, mode, rng);
  const auto normal = std::count_if(committee.members.begin(), committee.members.end(),
                                    [&](NodeId id) { return !abnormal[id]; });
  return static_cast<double>(normal) / static_cast<double>(sizes.committee);
}

double ideal_rnw(std::size_t n_nodes, double rafn, std::size_t committee) {
  return std::min(1.0, static_cast<double>(n_nodes) * (1.0 - rafn) / static_cast<double>(committee));
}

std::vector<MetricRow> exp_rnw_vs_rafn(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<MetricRow> rows;
  for (std::size_t p = 0; p < spec.rafn_grid.size(); ++p) {
    const double rafn = spec.rafn_grid[p];
    const auto n_abnormal = static_cast<std::size_t>(std::llround(rafn * static_cast<double>(spec.n_nodes)));
    std::vector<double> rep(spec.trials), eq(spec.trials);
    for_trials(spec.trials, spec.parallel, [&](std::size_t t) {
      const std::uint64_t seed = trial_seed(spec.seed, p, t);
      rep[t] = ratio_of_normal_witnesses(spec.n_nodes, n_abnormal, spec.sizes, spec.params,
                                         consensus::VotingMode::ReputationWeighted, seed);
      eq[t] = ratio_of_normal_witnesses(spec.n_nodes, n_abnormal, spec.sizes, spec.params,
                                        consensus::VotingMode::EqualWeight, seed);
    });
    rows.push_back(make_row(rafn, "reputation", std::move(rep)));
    rows.push_back(make_row(rafn, "equal", std::move(eq)));
    rows.push_back(make_row(rafn, "ideal",
                            std::vector<double>(spec.trials, ideal_rnw(spec.n_nodes, rafn, spec.sizes.committee))));
  }
  return rows;
}

// ---- profit vs budget ----------------------------------------------------------

std::vector<MetricRow> exp_profit_vs_budget(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<MetricRow> rows;
  const std::size_t nb = spec.budget_grid.size();
  for (std::size_t p = 0; p < spec.vehicle_counts.size(); ++p) {
    const std::size_t n = spec.vehicle_counts[p];
    // greedy[b][t], tbsap[b][t]
    std::vector<std::vector<double>> greedy(nb, std::vector<double>(spec.trials));
    std::vector<std::vector<double>> tbsap(nb, std::vector<double>(spec.trials));
    for_trials(spec.trials, spec.parallel, [&](std::size_t t) {
      AuctionInstance inst = generate_scenario(scenario_for(spec, n, trial_seed(spec.seed, p, t)));
      for (std::size_t b = 0; b < nb; ++b) {
        inst.budget = spec.budget_grid[b];
        greedy[b][t] = auction::greedy_heuristic(inst).profit;
        tbsap[b][t] = auction::tbsap(inst).profit;
      }
    });
    const std::string suffix = "/" + std::to_string(n);
    for (std::size_t b = 0; b < nb; ++b) {
      rows.push_back(make_row(spec.budget_grid[b], "greedy" + suffix, std::move(greedy[b])));
      rows.push_back(make_row(spec.budget_grid[b], "tbsap" + suffix, std::move(tbsap[b])));
    }
  }
  return rows;
}

// ---- bid/payment scatter -------------------------------------------------------

ScatterResult exp_bid_payment_scatter(const ExperimentSpec& spec) {
  spec.validate();
  ScatterResult result;
  for (std::size_t p = 0; p < spec.vehicle_counts.size(); ++p) {
    const std::size_t n = spec.vehicle_counts[p];
    std::vector<std::vector<ScatterPoint>> per_trial(spec.trials);
    std::vector<double> mean_bid(spec.trials, 0.0);
    for_trials(spec.trials, spec.parallel, [&](std::size_t t) {
      AuctionInstance inst = generate_scenario(scenario_for(spec, n, trial_seed(spec.seed, p, t)));
      inst.budget = spec.scatter_budget;
      const AuctionOutcome out = auction::tbsap(inst);
      double sum = 0.0;
      for (VehicleId w : out.winners) {
        per_trial[t].push_back({n, t, w, inst.vehicles[w].bid, out.payments.at(w)});
        sum += inst.vehicles[w].bid;
      }
      if (!out.winners.empty()) mean_bid[t] = sum / static_cast<double>(out.winners.size());
    });
    for (auto& pts : per_trial) result.points.insert(result.points.end(), pts.begin(), pts.end());
    result.summary.push_back(make_row(static_cast<double>(n), "mean_winner_bid", std::move(mean_bid)));
  }
  return result;
}

// ---- output -----------------------------------------------------------------------

void write_csv(std::ostream& out, const std::vector<TrajectoryPoint>& points) {
  out << "epoch,round,node_id,profile,role,reputation,delta\n";
  for (const TrajectoryPoint& p : points) {
    out << p.epoch << ',' << p.round << ',' << p.node << ','
        << (p.profile == consensus::Profile::Normal ? "normal" : "abnormal") << ',' << consensus::to_string(p.role)
        << ',' << fmt(p.reputation) << ',' << fmt(p.delta) << '\n';
  }
}

void write_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << "sweep,metric,mean,values\n";
  for (const MetricRow& r : rows) {
    out << fmt(r.sweep) << ',' << r.metric << ',' << fmt(r.mean) << ',';
    for (std::size_t k = 0; k < r.values.size(); ++k) out << (k ? ";" : "") << fmt(r.values[k]);
    out << '\n';
  }
}

void write_csv(std::ostream& out, const ScatterResult& result) {
  out << "n_vehicles,trial,vehicle_id,bid,payment\n";
  for (const ScatterPoint& p : result.points) {
    out << p.n_vehicles << ',' << p.trial << ',' << p.vehicle << ',' << fmt(p.bid) << ',' << fmt(p.payment) << '\n';
  }
}

void run_to_stream(const ExperimentSpec& spec, std::ostream& out) {
  switch (spec.experiment) {
    case Experiment::ReputationTrajectory: write_csv(out, exp_reputation_trajectory(spec)); return;
    case Experiment::RnwVsRafn: write_csv(out, exp_rnw_vs_rafn(spec)); return;
    case Experiment::ProfitVsBudget: write_csv(out, exp_profit_vs_budget(spec)); return;
    case Experiment::BidPaymentScatter: write_csv(out, exp_bid_payment_scatter(spec)); return;
  }
}

std::string run_to_directory(const ExperimentSpec& spec, const std::string& root) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(root) / std::string(to_string(spec.experiment));
  fs::create_directories(dir);
  const fs::path file = dir / (std::to_string(spec.seed) + ".csv");
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
  run_to_stream(spec, out);
  out.close();
  if (!out) throw std::runtime_error("failed writing " + file.string());
  return file.string();
}

}  // namespace brtm::sim
