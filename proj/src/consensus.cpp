#include "brtm/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

namespace brtm::consensus {

namespace {

void check_nodes(std::span<const FullNode> nodes) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id != i) throw ConsensusError("node ids must be dense indices");
    if (!(nodes[i].reputation >= 0.0 && nodes[i].reputation <= 1.0))
      throw ConsensusError("node " + std::to_string(i) + " reputation outside [0,1]");
  }
}

template <class K, class V>
V lookup_or(const std::map<K, V>& m, K key, V fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

}  // namespace

void ReputationParams::validate() const {
  if (!(w_lead > w_verify && w_verify > w_vote && w_vote > 0.0))
    throw ConsensusError("reputation weights must satisfy w_lead > w_verify > w_vote > 0");
  if (!(theta > 0.0 && theta < 1.0)) throw ConsensusError("theta must lie in (0,1)");
}

VoteAction FullNode::vote_action(std::size_t epoch) const {
  return lookup_or(script.votes, epoch, profile == Profile::Normal ? VoteAction::Honest : VoteAction::Adversarial);
}

ProduceAction FullNode::produce_action(std::size_t round) const {
  return lookup_or(script.produce, round, profile == Profile::Normal ? ProduceAction::Valid : ProduceAction::Invalid);
}

VerifyAction FullNode::verify_action(std::size_t round) const {
  return lookup_or(script.verify, round, profile == Profile::Normal ? VerifyAction::Correct : VerifyAction::Wrong);
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Leader: return "leader";
    case Role::Witness: return "witness";
    case Role::Standby: return "standby";
    case Role::None: return "none";
  }
  return "none";
}

std::vector<Ballot> cast_votes(std::span<const FullNode> nodes, const ReputationParams& params, std::size_t epoch) {
  std::vector<Ballot> ballots;
  for (const FullNode& voter : nodes) {
    const VoteAction action = voter.vote_action(epoch);
    if (action == VoteAction::Abstain) continue;
    Ballot b{voter.id, {}};
    for (const FullNode& other : nodes) {
      if (other.id == voter.id) continue;
      const bool high = other.reputation >= params.theta;
      if ((action == VoteAction::Honest) == high) b.supported.push_back(other.id);
    }
    ballots.push_back(std::move(b));
  }
  return ballots;
}

Committee elect_witnesses(std::span<const Ballot> ballots, std::span<const FullNode> nodes, CommitteeSizes sizes,
                          VotingMode mode, Rng& rng) {
  check_nodes(nodes);
  if (sizes.active == 0 || sizes.active > sizes.committee || sizes.committee > nodes.size())
    throw ConsensusError("committee sizes must satisfy 1 <= |D| <= |M| <= |Z|");

  Committee c;
  c.voting_results.assign(nodes.size(), 0.0);
  for (const Ballot& b : ballots) {
    if (b.voter >= nodes.size()) throw ConsensusError("ballot from unknown node");
    const double weight = mode == VotingMode::ReputationWeighted ? nodes[b.voter].reputation : 1.0;
    for (NodeId s : b.supported) {
      if (s >= nodes.size()) throw ConsensusError("ballot supports unknown node");
      if (s == b.voter) throw ConsensusError("a node cannot vote for itself");
      c.voting_results[s] += weight;
    }
  }

  std::vector<NodeId> order(nodes.size());
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return c.voting_results[a] > c.voting_results[b]; });
  c.members.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sizes.committee));
  c.active.assign(c.members.begin(), c.members.begin() + static_cast<std::ptrdiff_t>(sizes.active));
  c.standby.assign(c.members.begin() + static_cast<std::ptrdiff_t>(sizes.active), c.members.end());
  shuffle(std::span<NodeId>(c.active), rng);
  return c;
}

double behavior_delta(int alpha, int beta, int gamma, const ReputationParams& params) {
  return params.w_vote * alpha + params.w_lead * beta + params.w_verify * gamma;
}

double update_reputation(double reputation, double delta) {
  const double next = reputation + delta;
  return delta >= 0.0 ? std::min(1.0, next) : std::max(0.0, next);
}

void begin_epoch(ConsensusState& state, std::span<const FullNode> nodes, const ReputationParams& params,
                 CommitteeSizes sizes, VotingMode mode, Rng& rng, const ForcedElection* forced) {
  ++state.epoch;
  state.round_in_epoch = 0;
  state.leader_cursor = 0;
  state.skipped.clear();
  state.voters.clear();

  const auto ballots = cast_votes(nodes, params, state.epoch);
  for (const Ballot& b : ballots) state.voters.insert(b.voter);

  if (!forced) {
    state.committee = elect_witnesses(ballots, nodes, sizes, mode, rng);
    return;
  }
  check_nodes(nodes);
  Committee c;
  c.voting_results.assign(nodes.size(), 0.0);
  c.active = forced->active;
  c.standby = forced->standby;
  c.members = c.active;
  c.members.insert(c.members.end(), c.standby.begin(), c.standby.end());
  std::set<NodeId> seen;
  for (NodeId id : c.members) {
    if (id >= nodes.size() || !seen.insert(id).second) throw ConsensusError("forced election lists an invalid node");
  }
  if (c.active.empty()) throw ConsensusError("forced election needs at least one active witness");
  state.committee = std::move(c);
}

bool epoch_exhausted(const ConsensusState& state) {
  return state.skipped.size() >= state.committee.active.size();
}

RoundResult run_round(ConsensusState& state, std::span<const FullNode> nodes, const ReputationParams& params,
                      std::uint64_t payload_digest) {
  const auto& active = state.committee.active;
  RoundResult result;

  std::optional<NodeId> leader;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const std::size_t pos = (state.leader_cursor + k) % active.size();
    if (!state.skipped.contains(active[pos])) {
      leader = active[pos];
      state.leader_cursor = pos + 1;
      break;
    }
  }
  if (!leader) throw ConsensusError("every active witness has been skipped this epoch");
  result.leader = leader;

  ++state.round;
  ++state.round_in_epoch;

  std::vector<Role> role(nodes.size(), Role::None);
  for (NodeId id : active) role[id] = Role::Witness;
  for (NodeId id : state.committee.standby) role[id] = Role::Standby;
  role[*leader] = Role::Leader;

  std::vector<int> gamma(nodes.size(), 0);
  int beta = -1;
  const ProduceAction produce = nodes[*leader].produce_action(state.round);
  if (produce == ProduceAction::Timeout) {
    state.skipped.insert(*leader);
  } else {
    Block block;
    block.height = state.chain.size();
    block.producer = *leader;
    block.epoch = state.epoch;
    block.round = state.round;
    block.payload_digest = payload_digest;
    block.valid = produce == ProduceAction::Valid;
    block.confirmations = 1;
    for (NodeId id : state.committee.members) {
      if (id == *leader) continue;
      switch (nodes[id].verify_action(state.round)) {
        case VerifyAction::Correct:
          gamma[id] = 1;
          if (block.valid) ++block.confirmations;
          break;
        case VerifyAction::Wrong:
          gamma[id] = -1;
          if (!block.valid) ++block.confirmations;
          break;
        case VerifyAction::Skip:
          gamma[id] = -1;
          break;
      }
    }
    result.accepted = 3 * block.confirmations > 2 * state.committee.members.size();
    beta = result.accepted ? 1 : -1;
    if (result.accepted) state.chain.push_back(block);
    result.proposed = block;
  }

  result.records.reserve(nodes.size());
  for (const FullNode& n : nodes) {
    BehaviorRecord r;
    r.node = n.id;
    r.role = role[n.id];
    r.alpha = state.voters.contains(n.id) ? 1 : -1;
    r.beta = n.id == *leader ? beta : 0;
    r.gamma = gamma[n.id];
    r.delta = behavior_delta(r.alpha, r.beta, r.gamma, params);
    result.records.push_back(r);
  }
  return result;
}

History run_epochs(std::vector<FullNode> nodes, const SimulationConfig& config) {
  config.params.validate();
  check_nodes(nodes);
  Rng rng(config.seed);
  ConsensusState state;
  History history;

  for (std::size_t e = 1; e <= config.n_epochs; ++e) {
    auto forced = config.forced.find(e);
    begin_epoch(state, nodes, config.params, config.sizes, config.mode, rng,
                forced == config.forced.end() ? nullptr : &forced->second);
    history.committees.push_back(state.committee);

    const std::size_t rounds = state.committee.active.size();
    for (std::size_t r = 0; r < rounds && !epoch_exhausted(state); ++r) {
      const auto result = run_round(state, nodes, config.params, splitmix64(config.seed ^ (state.round + 1)));
      ++history.rounds;
      if (result.accepted) ++history.accepted_blocks;
      for (const BehaviorRecord& rec : result.records) {
        FullNode& n = nodes[rec.node];
        n.reputation = update_reputation(n.reputation, rec.delta);
        history.rows.push_back({state.epoch, state.round, rec.node, n.reputation, rec.role, rec.delta});
      }
    }
  }
  history.chain = state.chain;
  history.final_nodes = std::move(nodes);
  return history;
}

void write_history_csv(std::ostream& out, const History& history) {
  out << "epoch,round,node_id,reputation,role,delta\n";
  char buf[64];
  for (const HistoryRow& r : history.rows) {
    out << r.epoch << ',' << r.round << ',' << r.node << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.reputation);
    out << buf << ',' << to_string(r.role) << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.delta);
    out << buf << '\n';
  }
}

std::vector<FullNode> make_population(std::span<const double> reputations, std::span<const bool> abnormal) {
  if (reputations.size() != abnormal.size()) throw ConsensusError("population vectors differ in length");
  std::vector<FullNode> nodes(reputations.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].id = static_cast<NodeId>(i);
    nodes[i].reputation = reputations[i];
    nodes[i].profile = abnormal[i] ? Profile::Abnormal : Profile::Normal;
  }
  return nodes;
}

}  // namespace brtm::consensus
