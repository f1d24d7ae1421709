#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "brtm/kernels.hpp"
#include "brtm/model.hpp"

namespace brtm::auction {

using kernels::MarginalGain;

class AuctionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Serial runs the reference kernels (full rescans, no caching); Parallel
/// runs the cached OpenMP kernels. Outcomes are bit-identical.
enum class Execution { Serial, Parallel };

/// How TBSAP prices a winner.
///
/// Critical walks the allocation order over V \ {v_i} exactly as the
/// allocation would see it: each replacement bid is additionally capped by
/// the budget left at that position, and the walk stops where the allocation
/// itself would stop (first negative unit gain, or first candidate that does
/// not fit the budget). The result is the exact threshold bid, so the
/// mechanism is truthful.
///
/// Published evaluates the replacement list and tail term literally: the
/// walk continues while the priced vehicle's own bid still fits, and no
/// budget cap is applied to replacement bids. It coincides with Critical
/// whenever the budget never binds, and can overpay otherwise.
enum class PaymentRule { Critical, Published };

struct PaymentTrace {
  VehicleId vehicle = 0;
  std::vector<VehicleId> replacements;  ///< positions of the V \ {v_i} order that v_i could take
  std::vector<double> replacement_bids; ///< max bid that still wins each position
  std::optional<double> tail_value;     ///< bid bound from the residual-budget tail, when it applies
  double payment = 0.0;
};

inline constexpr std::size_t kBruteForceLimit = 20;

/// P̄(W) = A(W) - sum of bids over W.
double reduced_profit(std::span<const VehicleId> winners, const AuctionInstance& instance);

/// P̄(v|W) and P̂(v|W) evaluated directly from the definitions.
MarginalGain marginal_gain(VehicleId v, std::span<const VehicleId> base, const AuctionInstance& instance);

/// Greedy heuristic: repeatedly takes the budget-feasible vehicle with the
/// largest unit marginal gain; infeasible vehicles are filtered out and the
/// scan continues. Stops when nothing is feasible or the best marginal gain
/// is negative. Winners are paid their bids.
AuctionOutcome greedy_heuristic(const AuctionInstance& instance, Execution exec = Execution::Parallel);

/// TBSAP winner allocation. Unlike the greedy heuristic it scans all
/// remaining vehicles and stops at the first argmax that has a negative unit
/// gain or does not fit the remaining budget.
std::vector<VehicleId> tbsap_allocate(const AuctionInstance& instance, Execution exec = Execution::Parallel);

/// Prices one TBSAP winner. Throws AuctionError if `winner` does not win.
PaymentTrace tbsap_payment(VehicleId winner, const AuctionInstance& instance,
                           PaymentRule rule = PaymentRule::Critical, Execution exec = Execution::Parallel);

/// Allocation plus pricing of every winner; profit uses the payments.
AuctionOutcome tbsap(const AuctionInstance& instance, PaymentRule rule = PaymentRule::Critical,
                     Execution exec = Execution::Parallel);

/// Exhaustive maximization of P̄ under the budget (test oracle). Payments
/// equal bids. Throws AuctionError for more than kBruteForceLimit vehicles.
AuctionOutcome brute_force_optimum(const AuctionInstance& instance);

/// One row per winner plus a trailing `total` row; see docs/formats.md.
void write_outcome_csv(std::ostream& out, const AuctionInstance& instance, const AuctionOutcome& outcome,
                       std::string_view mechanism, bool header = true);

}  // namespace brtm::auction
