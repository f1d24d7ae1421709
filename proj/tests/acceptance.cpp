// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "brtm/auction.hpp"
#include "brtm/consensus.hpp"
#include "brtm/crypto.hpp"
#include "brtm/simharness.hpp"
#include "brtm/trading.hpp"
#include "oracle.hpp"

namespace {

using namespace brtm;
using auction::PaymentRule;

// Tolerances and sizes.
constexpr double kExactTol = 1e-12;       // "exact" float comparisons on sums of weights
constexpr double kTruthTol = 1e-9;        // utility-improvement tolerance
constexpr double kPerturb = 1e-3;         // bid perturbation for monotonicity / critical checks
constexpr double kIdealTol = 0.05;        // RNW distance to the ideal line below RAFN 0.5
constexpr std::size_t kMechanismInstances = 1000;
constexpr std::size_t kOracleInstances = 200;
constexpr std::size_t kSubmodularSamples = 10000;
constexpr std::size_t kRnwTrials = 100;
constexpr std::size_t kProfitTrials = 20;
constexpr std::size_t kScatterTrials = 50;

struct Verdict {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > limit_s) {
    v.ok = false;
    char buf[96];
    std::snprintf(buf, sizeof buf, "; over time limit %.0fs", limit_s);
    v.detail += buf;
  }
  if (!v.ok) ++failures;
  std::printf("%s  [%2d] %-34s %7.2fs  %s\n", v.ok ? "PASS" : "FAIL", id, name, secs, v.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool wins(const AuctionInstance& inst, VehicleId v, double bid) {
  AuctionInstance copy = inst;
  copy.vehicles[v].bid = bid;
  const auto w = auction::tbsap_allocate(copy);
  return std::find(w.begin(), w.end(), v) != w.end();
}

// ---- 1 ----------------------------------------------------------------------------

Verdict builtin_example() {
  auto inst = paper_example();
  const double g1 = auction::marginal_gain(0, {}, inst).unit_gain;
  const double g2 = auction::marginal_gain(1, {}, inst).unit_gain;
  const auto greedy = auction::greedy_heuristic(inst);
  const double u_greedy_truth = vehicle_utility(greedy, inst.vehicles[1]);
  const double u_tbsap_truth = vehicle_utility(auction::tbsap(inst), inst.vehicles[1]);
  inst.vehicles[1].bid = inst.vehicles[1].true_cost + 0.5;
  const double u_greedy_lie = vehicle_utility(auction::greedy_heuristic(inst), inst.vehicles[1]);
  const double u_tbsap_lie = vehicle_utility(auction::tbsap(inst), inst.vehicles[1]);
  Verdict v;
  v.ok = g1 == 4.5 && g2 == 4.0 && greedy.winners == std::vector<VehicleId>{0, 1} && u_greedy_lie > u_greedy_truth &&
         !(u_tbsap_lie > u_tbsap_truth);
  v.detail = fmt("gains %g/%g, greedy W={v%u,v%u}, greedy u %g->%g, tbsap u %g->%g", g1, g2,
                 greedy.winners.size() > 0 ? greedy.winners[0] + 1 : 0,
                 greedy.winners.size() > 1 ? greedy.winners[1] + 1 : 0, u_greedy_truth, u_greedy_lie, u_tbsap_truth,
                 u_tbsap_lie);
  return v;
}

// ---- 2 ----------------------------------------------------------------------------

Verdict mechanism_properties() {
  Rng rng(20240601);
  std::size_t ir = 0, profitability = 0, budget = 0, monotone = 0, critical = 0, truth = 0, winners = 0,
              deviations = 0;
  for (std::size_t k = 0; k < kMechanismInstances; ++k) {
    const auto inst = oracle::random_instance(rng, 1 + uniform_index(rng, 50), 1 + uniform_index(rng, 100));
    const auto out = auction::tbsap(inst);
    double spent = 0.0;
    std::vector<VehicleId> prefix;
    for (VehicleId w : out.winners) {
      ++winners;
      const double b = inst.vehicles[w].bid;
      const double p = out.payments.at(w);
      spent += b;
      if (p < b) ++ir;
      const double marginal = auction::marginal_gain(w, prefix, inst).gain + b;
      if (marginal < p - kTruthTol) ++profitability;
      prefix.push_back(w);
      if (b - kPerturb > 0.0 && !wins(inst, w, b - kPerturb)) ++monotone;
      if (wins(inst, w, p + kPerturb) || (p - kPerturb > 0.0 && !wins(inst, w, p - kPerturb))) ++critical;
    }
    if (spent > inst.budget) ++budget;

    // Unilateral deviations from a truthful bid.
    for (int d = 0; d < 3; ++d) {
      const auto v = static_cast<VehicleId>(uniform_index(rng, inst.vehicles.size()));
      const double cost = inst.vehicles[v].true_cost;
      const double truthful = vehicle_utility(out, inst.vehicles[v]);
      AuctionInstance lie = inst;
      lie.vehicles[v].bid = uniform_open_closed(rng, 0.0, 3.0 * cost);
      ++deviations;
      if (vehicle_utility(auction::tbsap(lie), lie.vehicles[v]) > truthful + kTruthTol) ++truth;
    }
  }
  Verdict v;
  v.ok = ir + profitability + budget + monotone + critical + truth == 0;
  v.detail = fmt("%zu instances, %zu winners, %zu deviations; violations IR %zu, profitability %zu, budget %zu, "
                 "monotone %zu, critical %zu, truthful %zu",
                 kMechanismInstances, winners, deviations, ir, profitability, budget, monotone, critical, truth);
  return v;
}

// ---- 3 ----------------------------------------------------------------------------

Verdict oracle_equivalence() {
  Rng rng(777);
  std::size_t above = 0, over_budget = 0, ties = 0;
  for (std::size_t k = 0; k < kOracleInstances; ++k) {
    const auto inst = oracle::random_instance(rng, 1 + uniform_index(rng, 12), 1 + uniform_index(rng, 30));
    const auto g = auction::greedy_heuristic(inst);
    const auto o = auction::brute_force_optimum(inst);
    if (g.profit > o.profit + kTruthTol) ++above;
    if (std::fabs(g.profit - o.profit) <= kTruthTol) ++ties;
    if (g.total_bid > inst.budget || o.total_bid > inst.budget) ++over_budget;
  }
  return {above + over_budget == 0,
          fmt("%zu instances; greedy above optimum %zu, over budget %zu, greedy optimal on %zu", kOracleInstances,
              above, over_budget, ties)};
}

// ---- 4 ----------------------------------------------------------------------------

Verdict submodularity() {
  Rng rng(4242);
  std::size_t bad_a = 0, bad_p = 0, samples = 0;
  while (samples < kSubmodularSamples) {
    const auto inst = oracle::random_instance(rng, 4 + uniform_index(rng, 20), 1 + uniform_index(rng, 40));
    for (int s = 0; s < 50; ++s, ++samples) {
      std::vector<VehicleId> ids(inst.vehicles.size());
      std::iota(ids.begin(), ids.end(), VehicleId{0});
      shuffle(std::span<VehicleId>(ids), rng);
      const VehicleId v = ids.back();
      const auto ny = uniform_index(rng, ids.size());  // Y = first ny (v excluded)
      const auto nx = uniform_index(rng, ny + 1);
      const std::vector<VehicleId> Y(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(ny));
      const std::vector<VehicleId> X(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(nx));
      auto plus = [&](std::vector<VehicleId> s) {
        s.push_back(v);
        return s;
      };
      const double ax = coverage_value(plus(X), inst) - coverage_value(X, inst);
      const double ay = coverage_value(plus(Y), inst) - coverage_value(Y, inst);
      if (ax < ay - kTruthTol) ++bad_a;
      const double px = auction::reduced_profit(plus(X), inst) - auction::reduced_profit(X, inst);
      const double py = auction::reduced_profit(plus(Y), inst) - auction::reduced_profit(Y, inst);
      if (px < py - kTruthTol) ++bad_p;
    }
  }
  return {bad_a + bad_p == 0, fmt("%zu samples; violations coverage %zu, reduced profit %zu", samples, bad_a, bad_p)};
}

// ---- 5 ----------------------------------------------------------------------------

Verdict trajectory() {
  const auto pts = sim::exp_reputation_trajectory(sim::default_spec(sim::Experiment::ReputationTrajectory));
  std::vector<sim::TrajectoryPoint> n, a;
  for (const auto& p : pts) (p.node == sim::kTrackedNormal ? n : a).push_back(p);
  if (n.size() != 31 || a.size() != 31) return {false, "unexpected trajectory length"};
  std::size_t mismatches = 0;
  auto expect = [&](double got, double want) {
    if (std::fabs(got - want) > kExactTol) ++mismatches;
  };
  for (int r = 1; r <= 30; ++r) {
    const double want_n = r <= 10 ? 0.005 : r == 15 ? 0.055 : 0.015;
    const double want_a = r <= 20 ? -0.005 : r == 25 ? -0.055 : -0.015;
    expect(n[r].delta, want_n);
    expect(a[r].delta, want_a);
    expect(n[r].reputation, std::clamp(n[r - 1].reputation + want_n, 0.0, 1.0));
    expect(a[r].reputation, std::clamp(a[r - 1].reputation + want_a, 0.0, 1.0));
  }
  expect(n[20].reputation, 0.74);
  expect(a[30].reputation, 0.21);
  // Clamping at both ends.
  const bool clamp = consensus::update_reputation(0.99, 0.055) == 1.0 && consensus::update_reputation(0.01, -0.055) == 0.0;
  return {mismatches == 0 && clamp,
          fmt("normal %.3f after epoch 2, %.3f after epoch 3; abnormal %.3f; %zu mismatches", n[20].reputation,
              n[30].reputation, a[30].reputation, mismatches)};
}

// ---- 6 ----------------------------------------------------------------------------

Verdict rnw() {
  auto spec = sim::default_spec(sim::Experiment::RnwVsRafn, 2024);
  spec.trials = kRnwTrials;
  const auto rows = sim::exp_rnw_vs_rafn(spec);
  std::size_t order_bad = 0, ideal_bad = 0;
  double min_gap = 1e9, worst_ideal = 0.0;
  for (std::size_t k = 0; k + 2 < rows.size(); k += 3) {
    const double rafn = rows[k].sweep;
    const double rep = rows[k].mean, eq = rows[k + 1].mean, ideal = rows[k + 2].mean;
    if (rafn >= 0.5 - 1e-9 && rafn <= 0.75 + 1e-9) {
      if (rep < eq) ++order_bad;
      min_gap = std::min(min_gap, rep - eq);
    }
    if (rafn < 0.5 - 1e-9) {
      for (double m : {rep, eq}) {
        worst_ideal = std::max(worst_ideal, std::fabs(m - ideal));
        if (std::fabs(m - ideal) > kIdealTol) ++ideal_bad;
      }
    }
  }
  return {order_bad + ideal_bad == 0,
          fmt("%zu trials/point; weighted<equal at %zu points in [0.5,0.75] (min gap %.3f); "
              "max |RNW-ideal| below 0.5 = %.3f",
              spec.trials, order_bad, min_gap, worst_ideal)};
}

// ---- 7 ----------------------------------------------------------------------------

Verdict profit_vs_budget() {
  auto spec = sim::default_spec(sim::Experiment::ProfitVsBudget, 5);
  spec.trials = kProfitTrials;
  spec.parallel = true;
  const auto rows = sim::exp_profit_vs_budget(spec);
  // rows: for each vehicle count, for each budget: greedy, tbsap
  std::size_t above = 0, drops = 0, points = 0;
  double worst_drop = 0.0;
  const std::size_t nb = spec.budget_grid.size();
  for (std::size_t p = 0; p < spec.vehicle_counts.size(); ++p) {
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& g = rows[(p * nb + b) * 2];
      const auto& t = rows[(p * nb + b) * 2 + 1];
      for (std::size_t i = 0; i < spec.trials; ++i) {
        ++points;
        if (t.values[i] > g.values[i] + kTruthTol) ++above;
        if (b > 0) {
          const double prev = rows[(p * nb + b - 1) * 2].values[i];
          if (g.values[i] < prev - kTruthTol) {
            ++drops;
            worst_drop = std::max(worst_drop, prev - g.values[i]);
          }
        }
      }
    }
  }
  return {above + drops == 0,
          fmt("%zu (instance, budget) points; tbsap above greedy %zu; greedy decreases along budget %zu "
              "(largest %.4f)",
              points, above, drops, worst_drop)};
}

// ---- 8 ----------------------------------------------------------------------------

Verdict scatter() {
  auto spec = sim::default_spec(sim::Experiment::BidPaymentScatter, 6);
  spec.trials = kScatterTrials;
  spec.parallel = true;
  const auto res = sim::exp_bid_payment_scatter(spec);
  std::size_t under = 0;
  for (const auto& p : res.points) {
    if (p.payment < p.bid) ++under;
  }
  const double m500 = res.summary[0].mean, m1000 = res.summary[1].mean;
  return {under == 0 && m1000 <= m500,
          fmt("%zu winners over %zu seeds; payment<bid %zu; mean winner bid |V|=500 %.4f, |V|=1000 %.4f",
              res.points.size(), spec.trials, under, m500, m1000)};
}

// ---- 9 ----------------------------------------------------------------------------

Verdict trading_round() {
  using namespace trading;
  const auto scheme = crypto::make_test_scheme();
  const auto inst = paper_example();

  auto fresh = [&](Registry& reg) {
    register_instance(reg, inst, 100 * kCoinScale, 0);
    return participants_for(inst);
  };
  RoundOptions opt;
  opt.budget = inst.budget;
  opt.round = 1;

  Registry reg(*scheme, 9);
  Ledger ledger;
  const auto vehicles = fresh(reg);
  const Coins before = reg.total_balance();
  auto r = run_trading_round(reg, ledger, "ta", inst.tasks, vehicles, opt);
  const std::size_t confirmed = r.confirmed();
  const bool conserved = reg.total_balance() == before;

  // Replay every ResMsg/ConMsg, then resend freshly signed copies.
  std::map<std::string, Coins> paid;
  for (const auto& [id, acc] : reg.accounts()) paid[id] = acc.balance;
  std::size_t applied = 0;
  for (const auto& m : r.transcript) {
    if (m.kind != MessageKind::ResMsg && m.kind != MessageKind::ConMsg) continue;
    applied += deliver_to_ta(r, reg, "ta", m).applied;
    const auto resent = make_message(m.kind, m.session, m.payload, reg.account(m.sender.id), m.stime + 100, *scheme);
    applied += deliver_to_ta(r, reg, "ta", resent).applied;
  }
  bool once = applied == 0;
  for (const auto& [id, acc] : reg.accounts()) once = once && acc.balance == paid[id];

  Registry reg2(*scheme, 9);
  Ledger ledger2;
  auto tampered = fresh(reg2);
  tampered[1].corrupt_request_signature = true;
  const Coins before2 = reg2.total_balance();
  const auto r2 = run_trading_round(reg2, ledger2, "ta", inst.tasks, tampered, opt);
  const bool excluded = !r2.round_aborted && r2.sessions[1].state() == SessionState::Aborted &&
                        r2.confirmed() >= 1 && reg2.total_balance() == before2;

  return {confirmed == 2 && conserved && once && excluded,
          fmt("confirmed %zu, conserved %s, replays applied %zu, tampered vehicle excluded %s (round confirmed %zu)",
              confirmed, conserved ? "yes" : "no", applied, excluded ? "yes" : "no", r2.confirmed())};
}

// ---- 10 ---------------------------------------------------------------------------

Verdict determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "brtm_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return crypto::digest64(crypto::as_bytes(s.str()));
  };
  const std::string d = dir.string();
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"gen --seed 11 --n-vehicles 200 --out " + d + "/gen.txt", "gen.txt"},
      {"auction --mechanism tbsap --scenario " + d + "/gen.txt --out " + d + "/auction.csv", "auction.csv"},
      {"consensus --seed 11 --epochs 5 --rafn 0.4 --out " + d + "/history.csv", "history.csv"},
      {"trade --seed 11 --scenario paper-example --out " + d + "/ledger.log --transcript " + d + "/tx.csv", "tx.csv"},
      {"experiment reputation-trajectory --seed 11 --out " + d + "/r", "r/reputation-trajectory/11.csv"},
      {"experiment rnw-vs-rafn --seed 7 --trials 20 --out " + d + "/r", "r/rnw-vs-rafn/7.csv"},
      {"experiment profit-vs-budget --seed 11 --trials 1 --n-tasks 100 --out " + d + "/r",
       "r/profit-vs-budget/11.csv"},
      {"experiment bid-payment-scatter --seed 11 --trials 2 --parallel --out " + d + "/r",
       "r/bid-payment-scatter/11.csv"},
  };
  std::size_t differing = 0, failed = 0;
  for (const auto& [args, file] : cases) {
    std::uint64_t h[2] = {0, 0}, o[2] = {0, 0};
    for (int k = 0; k < 2; ++k) {
      const fs::path out = dir / ("stdout" + std::to_string(k));
      const std::string cmd = std::string(BRTM_CLI) + " " + args + " > " + out.string() + " 2>/dev/null";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failed;
      h[k] = slurp(dir / file);
      o[k] = slurp(out);
    }
    if (h[0] != h[1] || o[0] != o[1]) ++differing;
  }
  fs::remove_all(dir);
  return {differing + failed == 0,
          fmt("%zu invocations run twice; differing outputs %zu, failed runs %zu", cases.size(), differing, failed)};
}

}  // namespace

int main() {
  criterion(1, "builtin example regression", 1, builtin_example);
  criterion(2, "mechanism property suite", 120, mechanism_properties);
  criterion(3, "oracle equivalence", 60, oracle_equivalence);
  criterion(4, "submodularity", 60, submodularity);
  criterion(5, "reputation trajectory", 1, trajectory);
  criterion(6, "RNW vs RAFN ordering", 120, rnw);
  criterion(7, "profit vs budget ordering", 300, profit_vs_budget);
  criterion(8, "bid/payment scatter", 300, scatter);
  criterion(9, "trading round integrity", 60, trading_round);
  criterion(10, "CLI determinism", 300, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
