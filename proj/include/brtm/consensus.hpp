#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "brtm/rng.hpp"

namespace brtm::consensus {

using NodeId = std::uint32_t;

class ConsensusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reputation dynamics. The weights are the voting / leader / verification
/// rewards of the per-round behavior delta.
struct ReputationParams {
  double w_vote = 0.005;
  double w_lead = 0.05;
  double w_verify = 0.01;
  double theta = 0.5;  ///< honest voters support nodes with reputation >= theta

  /// Requires w_lead > w_verify > w_vote > 0 and 0 < theta < 1.
  void validate() const;
};

enum class Profile { Normal, Abnormal };
enum class VoteAction { Honest, Adversarial, Abstain };
enum class ProduceAction { Valid, Invalid, Timeout };
enum class VerifyAction { Correct, Wrong, Skip };

/// Per-epoch / per-round overrides of a node's profile defaults. Epochs and
/// rounds are 1-based; rounds are counted globally across epochs.
struct BehaviorScript {
  std::map<std::size_t, VoteAction> votes;
  std::map<std::size_t, ProduceAction> produce;
  std::map<std::size_t, VerifyAction> verify;
};

struct FullNode {
  NodeId id = 0;
  double reputation = 0.5;
  Profile profile = Profile::Normal;
  BehaviorScript script;

  VoteAction vote_action(std::size_t epoch) const;
  ProduceAction produce_action(std::size_t round) const;
  VerifyAction verify_action(std::size_t round) const;
};

enum class VotingMode { ReputationWeighted, EqualWeight };

struct Ballot {
  NodeId voter = 0;
  std::vector<NodeId> supported;
};

struct CommitteeSizes {
  std::size_t committee = 70;  ///< |M|
  std::size_t active = 10;     ///< |D|, also the number of rounds per epoch
};

struct Committee {
  std::vector<NodeId> members;  ///< M, by voting result (desc), lowest id on ties
  std::vector<NodeId> active;   ///< D in leader order
  std::vector<NodeId> standby;  ///< E = M \ D
  std::vector<double> voting_results;  ///< R_a indexed by node id
};

struct Block {
  std::size_t height = 0;
  NodeId producer = 0;
  std::size_t epoch = 0;
  std::size_t round = 0;
  std::uint64_t payload_digest = 0;
  bool valid = true;
  std::size_t confirmations = 0;
};

enum class Role { Leader, Witness, Standby, None };
std::string_view to_string(Role role);

/// (alpha, beta, gamma) for one node in one round, and the resulting delta.
struct BehaviorRecord {
  NodeId node = 0;
  Role role = Role::None;
  int alpha = 0;
  int beta = 0;
  int gamma = 0;
  double delta = 0.0;
};

struct ConsensusState {
  std::size_t epoch = 0;         ///< 1-based once the first epoch begins
  std::size_t round = 0;         ///< global round counter, 1-based
  std::size_t round_in_epoch = 0;
  Committee committee;
  std::set<NodeId> voters;       ///< nodes that cast a ballot this epoch
  std::set<NodeId> skipped;      ///< leaders that timed out this epoch
  std::size_t leader_cursor = 0; ///< next position in committee.active
  std::vector<Block> chain;
};

struct RoundResult {
  std::optional<NodeId> leader;        ///< empty if every active witness was skipped
  std::optional<Block> proposed;       ///< empty on timeout
  bool accepted = false;
  std::vector<BehaviorRecord> records; ///< one per node, in id order
};

/// A scripted election that replaces voting for one epoch.
struct ForcedElection {
  std::vector<NodeId> active;   ///< D in leader order
  std::vector<NodeId> standby;  ///< E
};

struct SimulationConfig {
  ReputationParams params;
  CommitteeSizes sizes;
  std::size_t n_epochs = 1;
  VotingMode mode = VotingMode::ReputationWeighted;
  std::uint64_t seed = 1;
  std::map<std::size_t, ForcedElection> forced;  ///< keyed by 1-based epoch
};

struct HistoryRow {
  std::size_t epoch = 0;
  std::size_t round = 0;
  NodeId node = 0;
  double reputation = 0.0;  ///< after this round's update
  Role role = Role::None;
  double delta = 0.0;
};

struct History {
  std::vector<HistoryRow> rows;
  std::vector<Committee> committees;  ///< one per epoch
  std::vector<Block> chain;
  std::vector<FullNode> final_nodes;
  std::size_t rounds = 0;
  std::size_t accepted_blocks = 0;
};

/// Honest voters support every other node at or above theta, adversarial
/// voters every other node below it; abstainers cast no ballot.
std::vector<Ballot> cast_votes(std::span<const FullNode> nodes, const ReputationParams& params, std::size_t epoch);

/// R_a over the ballots, then M = top |M|, D = top |D| of M (lowest id on
/// ties), then D shuffled into leader order.
Committee elect_witnesses(std::span<const Ballot> ballots, std::span<const FullNode> nodes, CommitteeSizes sizes,
                          VotingMode mode, Rng& rng);

double behavior_delta(int alpha, int beta, int gamma, const ReputationParams& params);

/// Clamp to [0, 1]: min(1, rep + delta) for gains, max(0, rep + delta) for losses.
double update_reputation(double reputation, double delta);

/// Votes (or applies a forced election) and resets per-epoch bookkeeping.
void begin_epoch(ConsensusState& state, std::span<const FullNode> nodes, const ReputationParams& params,
                 CommitteeSizes sizes, VotingMode mode, Rng& rng, const ForcedElection* forced = nullptr);

/// True when no unskipped active witness remains to lead.
bool epoch_exhausted(const ConsensusState& state);

/// One leader turn: production, verification by M \ {leader}, acceptance on
/// more than two thirds of |M| confirmations (the leader counts itself), and
/// behavior records. Does not touch reputations.
RoundResult run_round(ConsensusState& state, std::span<const FullNode> nodes, const ReputationParams& params,
                      std::uint64_t payload_digest = 0);

/// Elect, run |D| rounds applying reputation updates after each, repeat.
History run_epochs(std::vector<FullNode> nodes, const SimulationConfig& config);

/// Columns: epoch,round,node_id,reputation,role,delta.
void write_history_csv(std::ostream& out, const History& history);

/// Nodes with the given reputations; profile per entry of `abnormal`.
std::vector<FullNode> make_population(std::span<const double> reputations, std::span<const bool> abnormal);

}  // namespace brtm::consensus
