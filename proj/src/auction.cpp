#include "brtm/auction.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>

namespace brtm::auction {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Incremental greedy state: covered tasks, eligible candidates, and access to
// the argmax kernel for the chosen execution mode.
class GreedyScan {
 public:
  GreedyScan(const AuctionInstance& instance, const kernels::TaskIndex* index, Execution exec)
      : instance_(instance),
        exec_(exec),
        bids_(kernels::bid_vector(instance)),
        eligible_(instance.vehicles.size(), 1),
        covered_(instance.tasks.size(), 0) {
    if (exec_ == Execution::Parallel) tracker_.emplace(instance, *index);
  }

  void exclude(VehicleId v) { eligible_[v] = 0; }

  std::optional<MarginalGain> best(double spent, double budget) const {
    if (exec_ == Execution::Serial) {
      const auto m = kernels::serial::marginal_coverage(instance_, covered_);
      return kernels::serial::best_unit_gain(m, bids_, eligible_, spent, budget);
    }
    return kernels::omp::best_unit_gain(tracker_->marginals(), bids_, eligible_, spent, budget);
  }

  // A(v|X)
  double marginal(VehicleId v) const {
    if (tracker_) return tracker_->marginal(v);
    double sum = 0.0;
    for (TaskId t : instance_.vehicles[v].task_subset) {
      if (!covered_[t]) sum += instance_.tasks[t].appraisement;
    }
    return sum;
  }

  void add(VehicleId v) {
    eligible_[v] = 0;
    for (TaskId t : instance_.vehicles[v].task_subset) covered_[t] = 1;
    if (tracker_) tracker_->add(v);
  }

  double bid(VehicleId v) const { return bids_[v]; }

 private:
  const AuctionInstance& instance_;
  Execution exec_;
  std::vector<double> bids_;
  std::vector<std::uint8_t> eligible_;
  std::vector<std::uint8_t> covered_;
  std::optional<kernels::CoverageTracker> tracker_;
};

std::vector<VehicleId> allocate(const AuctionInstance& instance, const kernels::TaskIndex* index, Execution exec) {
  GreedyScan scan(instance, index, exec);
  std::vector<VehicleId> winners;
  double spent = 0.0;
  for (;;) {
    const auto best = scan.best(0.0, kInf);
    if (!best) break;
    if (best->unit_gain < 0.0 || !(spent + scan.bid(best->vehicle) <= instance.budget)) break;
    winners.push_back(best->vehicle);
    spent += scan.bid(best->vehicle);
    scan.add(best->vehicle);
  }
  return winners;
}

PaymentTrace price_critical(VehicleId winner, const AuctionInstance& instance, const kernels::TaskIndex* index,
                            Execution exec) {
  GreedyScan scan(instance, index, exec);
  scan.exclude(winner);
  PaymentTrace trace;
  trace.vehicle = winner;
  double payment = -kInf;
  double spent = 0.0;
  for (;;) {
    const double own = scan.marginal(winner);
    const auto next = scan.best(0.0, kInf);
    if (!next || next->unit_gain < 0.0) {
      // Nobody left worth taking: v_i wins here iff its bid fits both its own
      // marginal coverage and the remaining budget.
      const double tail = std::min(own, instance.budget - spent);
      trace.tail_value = tail;
      payment = std::max(payment, tail);
      break;
    }
    const double next_bid = scan.bid(next->vehicle);
    const double rival = scan.marginal(next->vehicle);
    const double replace = std::min({next_bid * own / rival, instance.budget - spent, own});
    trace.replacements.push_back(next->vehicle);
    trace.replacement_bids.push_back(replace);
    payment = std::max(payment, replace);
    // Without v_i the allocation halts here; later positions are unreachable.
    if (!(spent + next_bid <= instance.budget)) break;
    spent += next_bid;
    scan.add(next->vehicle);
  }
  trace.payment = payment;
  return trace;
}

PaymentTrace price_published(VehicleId winner, const AuctionInstance& instance, const kernels::TaskIndex* index,
                             Execution exec) {
  GreedyScan scan(instance, index, exec);
  scan.exclude(winner);
  PaymentTrace trace;
  trace.vehicle = winner;
  const double own_bid = scan.bid(winner);
  double payment = -kInf;
  double spent = 0.0;
  for (;;) {
    const auto next = scan.best(0.0, kInf);
    if (!next) break;
    if (next->unit_gain < 0.0 || spent + own_bid > instance.budget) break;
    const double next_bid = scan.bid(next->vehicle);
    const double replace = next_bid * scan.marginal(winner) / scan.marginal(next->vehicle);
    trace.replacements.push_back(next->vehicle);
    trace.replacement_bids.push_back(replace);
    payment = std::max(payment, replace);
    spent += next_bid;
    scan.add(next->vehicle);
  }
  if (spent + own_bid <= instance.budget) {
    trace.tail_value = scan.marginal(winner);
    payment = std::max(payment, *trace.tail_value);
  }
  trace.payment = payment;
  return trace;
}

PaymentTrace price(VehicleId winner, const AuctionInstance& instance, const kernels::TaskIndex* index,
                   PaymentRule rule, Execution exec) {
  return rule == PaymentRule::Critical ? price_critical(winner, instance, index, exec)
                                       : price_published(winner, instance, index, exec);
}

std::optional<kernels::TaskIndex> index_for(const AuctionInstance& instance, Execution exec) {
  if (exec == Execution::Parallel) return kernels::TaskIndex(instance);
  return std::nullopt;
}

const kernels::TaskIndex* ptr(const std::optional<kernels::TaskIndex>& index) {
  return index ? &*index : nullptr;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double reduced_profit(std::span<const VehicleId> winners, const AuctionInstance& instance) {
  double value = coverage_value(winners, instance);
  for (VehicleId v : winners) value -= instance.vehicles[v].bid;
  return value;
}

MarginalGain marginal_gain(VehicleId v, std::span<const VehicleId> base, const AuctionInstance& instance) {
  if (v >= instance.vehicles.size()) throw AuctionError("unknown vehicle id " + std::to_string(v));
  std::vector<VehicleId> with(base.begin(), base.end());
  with.push_back(v);
  const double marginal = coverage_value(with, instance) - coverage_value(base, instance);
  return kernels::make_gain(v, marginal, instance.vehicles[v].bid);
}

AuctionOutcome greedy_heuristic(const AuctionInstance& instance, Execution exec) {
  validate(instance);
  const auto index = index_for(instance, exec);
  GreedyScan scan(instance, ptr(index), exec);
  AuctionOutcome out;
  double spent = 0.0;
  for (;;) {
    // Only vehicles that still fit the remaining budget compete.
    const auto best = scan.best(spent, instance.budget);
    if (!best || best->gain < 0.0) break;
    const double b = scan.bid(best->vehicle);
    out.winners.push_back(best->vehicle);
    out.payments[best->vehicle] = b;
    spent += b;
    scan.add(best->vehicle);
  }
  out.total_bid = spent;
  out.profit = coverage_value(out.winners, instance) - spent;
  return out;
}

std::vector<VehicleId> tbsap_allocate(const AuctionInstance& instance, Execution exec) {
  validate(instance);
  const auto index = index_for(instance, exec);
  return allocate(instance, ptr(index), exec);
}

PaymentTrace tbsap_payment(VehicleId winner, const AuctionInstance& instance, PaymentRule rule, Execution exec) {
  validate(instance);
  const auto index = index_for(instance, exec);
  const auto winners = allocate(instance, ptr(index), exec);
  if (std::find(winners.begin(), winners.end(), winner) == winners.end())
    throw AuctionError("vehicle " + std::to_string(winner) + " is not a TBSAP winner");
  return price(winner, instance, ptr(index), rule, exec);
}

AuctionOutcome tbsap(const AuctionInstance& instance, PaymentRule rule, Execution exec) {
  validate(instance);
  const auto index = index_for(instance, exec);
  AuctionOutcome out;
  out.winners = allocate(instance, ptr(index), exec);

  const auto n = static_cast<std::ptrdiff_t>(out.winners.size());
  std::vector<double> payments(out.winners.size());
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      payments[k] = price(out.winners[k], instance, ptr(index), rule, exec).payment;
    }
  } else {
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      payments[k] = price(out.winners[k], instance, ptr(index), rule, exec).payment;
    }
  }

  double paid = 0.0;
  for (std::size_t k = 0; k < out.winners.size(); ++k) {
    // Every winner fits the budget at its own position, so the tail or some
    // replacement always applies.
    if (!(payments[k] > -kInf)) throw std::logic_error("TBSAP winner left without a price");
    out.payments[out.winners[k]] = payments[k];
    out.total_bid += instance.vehicles[out.winners[k]].bid;
    paid += payments[k];
  }
  out.profit = coverage_value(out.winners, instance) - paid;
  return out;
}

AuctionOutcome brute_force_optimum(const AuctionInstance& instance) {
  validate(instance);
  const std::size_t n = instance.vehicles.size();
  if (n > kBruteForceLimit)
    throw AuctionError("brute-force oracle is limited to " + std::to_string(kBruteForceLimit) + " vehicles, got " +
                       std::to_string(n));

  std::vector<std::uint32_t> cover_count(instance.tasks.size(), 0);
  std::vector<VehicleId> current;
  std::vector<VehicleId> best_set;
  double best_value = 0.0;  // the empty set

  // Depth-first include/exclude; A is carried down the stack rather than
  // subtracted back out, so no rounding accumulates across branches.
  auto dfs = [&](auto&& self, std::size_t k, double value, double spent) -> void {
    if (k == n) {
      if (value > best_value) {
        best_value = value;
        best_set = current;
      }
      return;
    }
    self(self, k + 1, value, spent);
    const Vehicle& v = instance.vehicles[k];
    if (!(spent + v.bid <= instance.budget)) return;
    double added = 0.0;
    for (TaskId t : v.task_subset) {
      if (cover_count[t]++ == 0) added += instance.tasks[t].appraisement;
    }
    current.push_back(v.id);
    self(self, k + 1, value + added - v.bid, spent + v.bid);
    current.pop_back();
    for (TaskId t : v.task_subset) --cover_count[t];
  };
  dfs(dfs, 0, 0.0, 0.0);

  AuctionOutcome out;
  out.winners = best_set;
  for (VehicleId v : best_set) {
    out.payments[v] = instance.vehicles[v].bid;
    out.total_bid += instance.vehicles[v].bid;
  }
  out.profit = reduced_profit(best_set, instance);
  return out;
}

void write_outcome_csv(std::ostream& out, const AuctionInstance& instance, const AuctionOutcome& outcome,
                       std::string_view mechanism, bool header) {
  if (header) out << "mechanism,rank,vehicle_id,bid,payment,profit\n";
  double paid = 0.0;
  for (std::size_t k = 0; k < outcome.winners.size(); ++k) {
    const VehicleId v = outcome.winners[k];
    const double p = outcome.payments.at(v);
    paid += p;
    out << mechanism << ',' << k + 1 << ',' << v << ',' << fmt(instance.vehicles[v].bid) << ',' << fmt(p) << ','
        << fmt(outcome.profit) << '\n';
  }
  out << mechanism << ",total,," << fmt(outcome.total_bid) << ',' << fmt(paid) << ',' << fmt(outcome.profit) << '\n';
}

}  // namespace brtm::auction
