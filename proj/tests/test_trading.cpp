#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "brtm/trading.hpp"

namespace {

using namespace brtm;
using namespace brtm::trading;

constexpr Coins kTaFunds = 1000 * kCoinScale;

struct World {
  std::unique_ptr<crypto::Scheme> scheme;
  Registry registry;
  Ledger ledger;
  AuctionInstance inst = paper_example();
  std::vector<VehicleParticipant> vehicles;

  explicit World(const char* scheme_name = "test", Coins ta = kTaFunds)
      : scheme(crypto::make_scheme(scheme_name)), registry(*scheme, 17) {
    register_instance(registry, inst, ta, 0);
    vehicles = participants_for(inst);
  }

  RoundReport run(std::uint64_t round = 1, Mechanism m = Mechanism::Tbsap) {
    RoundOptions o;
    o.budget = inst.budget;
    o.mechanism = m;
    o.round = round;
    return run_trading_round(registry, ledger, "ta", inst.tasks, vehicles, o);
  }
  Coins balance(const std::string& id) const { return registry.account(id).balance; }
};

const ProtocolMessage& find_msg(const RoundReport& r, MessageKind kind, const std::string& sender) {
  for (const auto& m : r.transcript) {
    if (m.kind == kind && m.sender.id == sender) return m;
  }
  throw std::runtime_error("message not in transcript");
}

TEST(Coins, ConversionRoundsUp) {
  EXPECT_EQ(to_coins(2.0), 2 * kCoinScale);
  EXPECT_EQ(to_coins(1.0 / 3.0), 333333334);
  EXPECT_EQ(to_coins(0.0), 0);
  EXPECT_THROW(to_coins(-1.0), TradingError);
  EXPECT_EQ(format_coins(2 * kCoinScale + 5), "2.000000005");
  EXPECT_EQ(format_coins(-kCoinScale), "-1.000000000");
  EXPECT_DOUBLE_EQ(to_data_coins(3 * kCoinScale / 2), 1.5);
}

TEST(Registry, CertificatesAndAccounts) {
  const auto scheme = crypto::make_test_scheme();
  Registry reg(*scheme, 1);
  const Account& ta = reg.register_entity("ta", EntityKind::TrafficAdministration, 10);
  const Account& v = reg.register_entity("v", EntityKind::Vehicle, 0);
  EXPECT_EQ(ta.reputation, 0.5);
  EXPECT_FALSE(v.reputation.has_value());
  EXPECT_TRUE(reg.verify_certificate(v.certificate));
  Certificate forged = v.certificate;
  forged.public_key = ta.keys.public_key;
  EXPECT_FALSE(reg.verify_certificate(forged));
  EXPECT_THROW(reg.register_entity("v", EntityKind::Vehicle, 0), TradingError);
  EXPECT_THROW(reg.transfer("v", "ta", 1), TradingError);
  reg.transfer("ta", "v", 4);
  EXPECT_EQ(reg.account("v").balance, 4);
  EXPECT_EQ(reg.total_balance(), 10);

  Registry other(*scheme, 2);
  other.register_entity("v", EntityKind::Vehicle, 0);
  EXPECT_FALSE(reg.verify_certificate(other.account("v").certificate));
}

TEST(Messages, VerificationChecksInOrder) {
  World w;
  const Account& ta = w.registry.account("ta");
  const Account& v0 = w.registry.account(vehicle_account(0));
  const Account& v1 = w.registry.account(vehicle_account(1));
  const crypto::Bytes body{1, 2, 3};
  const auto msg = make_message(MessageKind::ReqMsg, 5, w.scheme->encrypt(body, ta.keys.public_key), v0, 10, *w.scheme);

  SessionClock clock{10, {}};
  const auto ok = verify_message(msg, w.registry, ta, clock);
  ASSERT_TRUE(ok.accepted);
  EXPECT_EQ(ok.plaintext, body);
  EXPECT_EQ(clock.last_seen, 10u);

  const auto replay = verify_message(msg, w.registry, ta, clock);
  EXPECT_EQ(replay.reason, RejectReason::Timestamp);

  SessionClock early{11, {}};
  EXPECT_EQ(verify_message(msg, w.registry, ta, early).reason, RejectReason::Timestamp);

  SessionClock fresh{0, {}};
  auto bad_sig = msg;
  bad_sig.signature.back() ^= 1;
  EXPECT_EQ(verify_message(bad_sig, w.registry, ta, fresh).reason, RejectReason::Signature);
  EXPECT_FALSE(fresh.last_seen.has_value());

  auto bad_cert = msg;
  bad_cert.sender = v1.certificate;
  EXPECT_EQ(verify_message(bad_cert, w.registry, ta, fresh).reason, RejectReason::Signature);
  bad_cert.sender.ca_signature.back() ^= 1;
  EXPECT_EQ(verify_message(bad_cert, w.registry, ta, fresh).reason, RejectReason::Certificate);

  EXPECT_EQ(verify_message(msg, w.registry, v1, fresh).reason, RejectReason::Decryption);
}

TEST(SessionMachine, ReachableStatesAndAbortRule) {
  const SessionEvent events[] = {SessionEvent::Request, SessionEvent::Allocate, SessionEvent::Order,
                                 SessionEvent::Deliver, SessionEvent::Pay,      SessionEvent::Confirm,
                                 SessionEvent::Abort};
  std::set<SessionState> seen{SessionState::Published};
  std::deque<SessionState> queue{SessionState::Published};
  std::size_t edges = 0;
  while (!queue.empty()) {
    const SessionState s = queue.front();
    queue.pop_front();
    for (SessionEvent e : events) {
      const auto next = next_state(s, e);
      if (!next) continue;
      ++edges;
      const bool before_paid = s != SessionState::Paid && s != SessionState::Confirmed && s != SessionState::Aborted;
      if (e == SessionEvent::Abort) EXPECT_TRUE(before_paid);
      if (seen.insert(*next).second) queue.push_back(*next);
    }
  }
  EXPECT_EQ(seen.size(), 8u);
  EXPECT_EQ(edges, 6u + 5u);  // the happy path plus abort from five states
  for (SessionEvent e : events) {
    EXPECT_FALSE(next_state(SessionState::Confirmed, e));
    EXPECT_FALSE(next_state(SessionState::Aborted, e));
  }
  EXPECT_FALSE(next_state(SessionState::Paid, SessionEvent::Abort));

  TradingSession s(1, "v", 0);
  EXPECT_THROW(s.apply(SessionEvent::Pay), TradingError);
  s.abort("x");
  EXPECT_EQ(s.state(), SessionState::Aborted);
  EXPECT_EQ(s.abort_reason(), "x");
}

TEST(Round, BuiltinExampleConfirmsTwo) {
  World w;
  const Coins before = w.registry.total_balance();
  const auto r = w.run();
  EXPECT_FALSE(r.round_aborted);
  EXPECT_EQ(r.confirmed(), 2u);
  ASSERT_EQ(r.sessions.size(), 3u);
  EXPECT_EQ(r.sessions[0].state(), SessionState::Confirmed);
  EXPECT_EQ(r.sessions[1].state(), SessionState::Confirmed);
  EXPECT_EQ(r.sessions[2].state(), SessionState::Aborted);
  EXPECT_EQ(w.balance(vehicle_account(0)), 2 * kCoinScale);
  EXPECT_EQ(w.balance(vehicle_account(1)), 3 * kCoinScale);
  EXPECT_EQ(w.balance(vehicle_account(2)), 0);
  EXPECT_EQ(w.balance("ta"), kTaFunds - 5 * kCoinScale);
  EXPECT_EQ(w.registry.total_balance(), before);

  ASSERT_TRUE(r.block_committed);
  ASSERT_EQ(w.ledger.blocks().size(), 1u);
  const TradeBlock& b = w.ledger.blocks()[0];
  ASSERT_EQ(b.transactions.size(), 2u);
  EXPECT_EQ(b.digest, block_digest(b));
  for (const auto& tx : b.transactions)
    EXPECT_TRUE(w.scheme->verify(tx.signed_part(), tx.ta_signature, w.registry.account("ta").keys.public_key));

  std::ostringstream log;
  w.ledger.write_log(log);
  std::istringstream lines(log.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
  }
  EXPECT_EQ(n, 2);
}

TEST(Round, GreedyMechanismPaysBids) {
  World w;
  const auto r = w.run(1, Mechanism::Greedy);
  EXPECT_EQ(r.confirmed(), 2u);
  EXPECT_EQ(w.balance(vehicle_account(1)), 2 * kCoinScale);
}

TEST(Round, ReplayedMessagesPayOnce) {
  World w;
  auto r = w.run();
  const Coins paid = w.balance(vehicle_account(1));
  const auto& res = find_msg(r, MessageKind::ResMsg, vehicle_account(1));
  const auto& con = find_msg(r, MessageKind::ConMsg, vehicle_account(1));
  const auto d1 = deliver_to_ta(r, w.registry, "ta", res);
  EXPECT_FALSE(d1.verdict.accepted);
  EXPECT_EQ(d1.verdict.reason, RejectReason::Timestamp);
  EXPECT_FALSE(deliver_to_ta(r, w.registry, "ta", con).applied);

  // A freshly signed resend passes verification but cannot move the session.
  const auto again = make_message(MessageKind::ResMsg, res.session, res.payload,
                                  w.registry.account(vehicle_account(1)), res.stime + 10, *w.scheme);
  const auto d2 = deliver_to_ta(r, w.registry, "ta", again);
  EXPECT_TRUE(d2.verdict.accepted);
  EXPECT_FALSE(d2.applied);
  EXPECT_EQ(w.balance(vehicle_account(1)), paid);
  EXPECT_EQ(r.confirmed(), 2u);
}

TEST(Round, CorruptedSignatureIsExcludedNotFatal) {
  World w;
  w.vehicles[1].corrupt_request_signature = true;
  const Coins before = w.registry.total_balance();
  const auto r = w.run();
  EXPECT_FALSE(r.round_aborted);
  EXPECT_EQ(r.sessions[1].state(), SessionState::Aborted);
  EXPECT_NE(r.sessions[1].abort_reason().find("signature"), std::string::npos);
  EXPECT_GE(r.confirmed(), 1u);
  EXPECT_EQ(w.balance(vehicle_account(1)), 0);
  EXPECT_EQ(w.registry.total_balance(), before);
}

TEST(Round, RequestSealedForWrongKeyIsExcluded) {
  World w;
  w.vehicles[0].encrypt_request_to = vehicle_account(2);
  const auto r = w.run();
  EXPECT_EQ(r.sessions[0].state(), SessionState::Aborted);
  EXPECT_NE(r.sessions[0].abort_reason().find("decryption"), std::string::npos);
}

TEST(Round, NonDeliveringWinnerIsAbortedUnpaid) {
  World w;
  w.vehicles[0].deliver_data = false;
  const auto r = w.run();
  EXPECT_EQ(r.sessions[0].state(), SessionState::Aborted);
  EXPECT_EQ(w.balance(vehicle_account(0)), 0);
  EXPECT_EQ(r.sessions[1].state(), SessionState::Confirmed);
  EXPECT_EQ(w.balance(vehicle_account(1)), 3 * kCoinScale);
  ASSERT_TRUE(r.block);
  EXPECT_EQ(r.block->transactions.size(), 1u);
}

TEST(Round, FailedDataCheckIsAbortedUnpaid) {
  World w;
  w.vehicles[1].data_meets_requirement = false;
  const auto r = w.run();
  EXPECT_EQ(r.sessions[1].state(), SessionState::Aborted);
  EXPECT_EQ(w.balance(vehicle_account(1)), 0);
  EXPECT_EQ(r.confirmed(), 1u);
}

TEST(Round, InsufficientTaBalanceAbortsBeforeAnyTransfer) {
  World w("test", 4 * kCoinScale);
  const auto r = w.run();
  EXPECT_TRUE(r.round_aborted);
  EXPECT_EQ(r.confirmed(), 0u);
  EXPECT_EQ(w.balance("ta"), 4 * kCoinScale);
  EXPECT_TRUE(w.ledger.blocks().empty());
}

TEST(Round, RejectedBlockIsNotCommitted) {
  World w;
  RoundOptions o;
  o.budget = w.inst.budget;
  o.round = 1;
  o.consensus = [](const TradeBlock&) { return false; };
  const auto r = run_trading_round(w.registry, w.ledger, "ta", w.inst.tasks, w.vehicles, o);
  EXPECT_FALSE(r.block_committed);
  EXPECT_TRUE(w.ledger.blocks().empty());
}

TEST(Round, ParticipantOrderDoesNotMatter) {
  World a, b;
  std::reverse(b.vehicles.begin(), b.vehicles.end());
  a.run();
  b.run();
  std::ostringstream la, lb;
  a.ledger.write_log(la);
  b.ledger.write_log(lb);
  EXPECT_EQ(la.str(), lb.str());
}

TEST(Round, RequestsAreConfidential) {
  World w;
  const auto r = w.run();
  const auto& req = find_msg(r, MessageKind::ReqMsg, vehicle_account(0));
  const auto& v2 = w.registry.account(vehicle_account(2));
  EXPECT_FALSE(w.scheme->decrypt(req.payload, v2.keys.secret_key).has_value());
  const auto plain = w.scheme->decrypt(req.payload, w.registry.account("ta").keys.secret_key);
  ASSERT_TRUE(plain);
  EXPECT_NE(*plain, req.payload);
}

TEST(Round, ConsecutiveRoundsChainBlocks) {
  World w;
  w.run(1);
  w.run(2);
  ASSERT_EQ(w.ledger.blocks().size(), 2u);
  EXPECT_EQ(w.ledger.blocks()[1].id, 1u);
  EXPECT_EQ(w.ledger.blocks()[1].round, 2u);
  EXPECT_EQ(w.balance(vehicle_account(1)), 6 * kCoinScale);
}

TEST(Round, WorksOverSodium) {
  World w("sodium");
  const Coins before = w.registry.total_balance();
  const auto r = w.run();
  EXPECT_EQ(r.confirmed(), 2u);
  EXPECT_EQ(w.registry.total_balance(), before);
}

TEST(Ledger, CommitRequiresConsecutiveIds) {
  Ledger l;
  TradeBlock b;
  b.id = 1;
  EXPECT_THROW(l.commit(b), TradingError);
  b.id = 0;
  l.commit(b);
  EXPECT_EQ(l.next_block_id(), 1u);
}

TEST(Ledger, DigestCoversTransactions) {
  TradeBlock a;
  TradeBlock b;
  b.transactions.push_back({});
  b.transactions.back().digest = 5;
  EXPECT_NE(block_digest(a), block_digest(b));
}

TEST(Transcript, OneLinePerMessage) {
  World w;
  const auto r = w.run();
  std::ostringstream out;
  write_transcript(out, r.transcript);
  const std::string s = out.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')), r.transcript.size() + 1);
  EXPECT_EQ(s.rfind("kind,session,sender,stime,payload_bytes,payload_digest\n", 0), 0u);
}

}  // namespace
