#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "brtm/crypto.hpp"
#include "brtm/model.hpp"
#include "brtm/rng.hpp"

namespace brtm::trading {

class TradingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ledger amounts are integers in units of 1e-9 data coin, so balance
/// arithmetic is exact.
using Coins = std::int64_t;
inline constexpr Coins kCoinScale = 1'000'000'000;

/// Rounds up to the next 1e-9 unit so nobody is paid less than the auction price.
Coins to_coins(double data_coins);
double to_data_coins(Coins amount);
std::string format_coins(Coins amount);

// ---- identity ---------------------------------------------------------------

struct Certificate {
  std::string id;
  crypto::Bytes public_key;
  crypto::Bytes ca_signature;

  crypto::Bytes signed_part() const;
};

enum class EntityKind { TrafficAdministration, Vehicle };

struct Account {
  std::string id;
  EntityKind kind = EntityKind::Vehicle;
  Certificate certificate;
  crypto::KeyPair keys;
  Coins balance = 0;
  std::optional<double> reputation;  ///< TA accounts only
};

/// The certificate authority and the account table. Key generation consumes
/// the registry's seeded rng, so registration order fixes every key.
class Registry {
 public:
  Registry(const crypto::Scheme& scheme, std::uint64_t seed);

  const Account& register_entity(const std::string& id, EntityKind kind, Coins initial_balance);

  const Account& account(const std::string& id) const;
  const Account* find(const std::string& id) const;
  const std::map<std::string, Account>& accounts() const { return accounts_; }

  /// CA signature valid and the certificate matches the registered key.
  bool verify_certificate(const Certificate& cert) const;
  const crypto::Bytes& ca_public_key() const { return ca_keys_.public_key; }
  const crypto::Scheme& scheme() const { return *scheme_; }

  Coins total_balance() const;

  /// Moves coins between two accounts; the only balance mutation.
  void transfer(const std::string& from, const std::string& to, Coins amount);

 private:
  const crypto::Scheme* scheme_;
  Rng rng_;
  crypto::KeyPair ca_keys_;
  std::map<std::string, Account> accounts_;
};

// ---- messages ---------------------------------------------------------------

enum class MessageKind { PubMsg, ReqMsg, OrdMsg, ResMsg, ConMsg };
std::string_view to_string(MessageKind kind);

/// PubMsg carries a plaintext payload signed by the TA; every other kind
/// carries a ciphertext (ReqMsg/ResMsg/ConMsg to the TA, OrdMsg to the
/// vehicle). All messages carry the sender's signature over
/// (kind, session, payload, stime).
struct ProtocolMessage {
  MessageKind kind = MessageKind::PubMsg;
  std::uint64_t session = 0;
  crypto::Bytes payload;
  Certificate sender;
  std::uint64_t stime = 0;
  crypto::Bytes signature;

  crypto::Bytes signed_part() const;
};

enum class RejectReason { Certificate, Signature, Decryption, Timestamp };
std::string_view to_string(RejectReason reason);

struct Verdict {
  bool accepted = false;
  std::optional<RejectReason> reason;
  crypto::Bytes plaintext;  ///< decrypted payload (or the PubMsg payload)
};

/// Per-session logical clock as seen by one receiver.
struct SessionClock {
  std::uint64_t start = 0;
  std::optional<std::uint64_t> last_seen;
};

/// Checks, in order: certificate chain, sender signature, decryption with
/// the receiver's key (not for PubMsg), timestamp not before the session
/// start and strictly after the last accepted one. The clock advances only
/// on acceptance.
Verdict verify_message(const ProtocolMessage& msg, const Registry& registry, const Account& receiver,
                       SessionClock& clock);

ProtocolMessage make_message(MessageKind kind, std::uint64_t session, crypto::Bytes payload, const Account& sender,
                             std::uint64_t stime, const crypto::Scheme& scheme);

// ---- sessions -----------------------------------------------------------------

enum class SessionState { Published, Requested, Allocated, Ordered, DataDelivered, Paid, Confirmed, Aborted };
enum class SessionEvent { Request, Allocate, Order, Deliver, Pay, Confirm, Abort };
std::string_view to_string(SessionState state);
std::string_view to_string(SessionEvent event);

/// Legal successor, or empty. Abort is legal from every state before Paid.
std::optional<SessionState> next_state(SessionState state, SessionEvent event);

struct TransactionRecord {
  std::uint64_t session = 0;
  std::string ta;
  std::string vehicle;
  Coins payment = 0;
  std::uint64_t opened = 0;     ///< PubMsg stime
  std::uint64_t confirmed = 0;  ///< ConMsg stime
  crypto::Bytes ta_signature;   ///< TA countersignature over the record
  std::uint64_t digest = 0;

  crypto::Bytes signed_part() const;
};

class TradingSession {
 public:
  TradingSession(std::uint64_t id, std::string vehicle, std::uint64_t opened);

  std::uint64_t id() const { return id_; }
  const std::string& vehicle() const { return vehicle_; }
  SessionState state() const { return state_; }
  std::uint64_t opened() const { return opened_; }

  /// Throws TradingError on an illegal transition.
  void apply(SessionEvent event);
  void abort(std::string reason);
  const std::string& abort_reason() const { return abort_reason_; }

  std::vector<TaskId> tasks;
  double bid = 0.0;
  Coins payment = 0;
  std::optional<TransactionRecord> record;

 private:
  std::uint64_t id_;
  std::string vehicle_;
  std::uint64_t opened_;
  SessionState state_ = SessionState::Published;
  std::string abort_reason_;
};

// ---- ledger -------------------------------------------------------------------

struct TradeBlock {
  std::uint64_t id = 0;
  std::uint64_t round = 0;
  std::vector<TransactionRecord> transactions;
  std::uint64_t digest = 0;
};

class Ledger {
 public:
  /// Appends a block; ids must be consecutive.
  void commit(TradeBlock block);
  const std::vector<TradeBlock>& blocks() const { return blocks_; }
  std::uint64_t next_block_id() const { return blocks_.size(); }

  /// One confirmed transaction per line: session_id,ta_id,vehicle_id,payment,block_id
  void write_log(std::ostream& out) const;

 private:
  std::vector<TradeBlock> blocks_;
};

std::uint64_t block_digest(const TradeBlock& block);

// ---- trading round ----------------------------------------------------------

/// A registered vehicle taking part in a round, with fault injection hooks.
struct VehicleParticipant {
  std::string account;
  std::vector<TaskId> tasks;
  double bid = 0.0;
  bool data_meets_requirement = true;    ///< outcome of the TA's data check
  bool corrupt_request_signature = false;
  std::optional<std::string> encrypt_request_to;  ///< send the ReqMsg to another account's key
  bool deliver_data = true;              ///< false: winner never answers the OrdMsg
};

enum class Mechanism { Tbsap, Greedy };

struct RoundOptions {
  double budget = 0.0;
  Mechanism mechanism = Mechanism::Tbsap;
  std::uint64_t round = 0;
  /// Step-8 handoff; the block is committed only if this returns true.
  std::function<bool(const TradeBlock&)> consensus;
};

struct RoundReport {
  bool round_aborted = false;
  std::string abort_reason;
  std::vector<TradingSession> sessions;  ///< sorted by vehicle account id
  std::optional<TradeBlock> block;
  bool block_committed = false;
  std::vector<ProtocolMessage> transcript;
  std::map<std::uint64_t, SessionClock> ta_clocks;  ///< TA's view, per session id

  std::size_t confirmed() const;
  TradingSession* session_by_id(std::uint64_t id);
};

/// What happened to a message delivered to the TA outside the normal flow.
struct Delivery {
  Verdict verdict;
  bool applied = false;  ///< the message advanced a session
  std::string detail;
};

/// The TA's published task list T, as carried by PubMsg.
std::vector<Task> published_tasks(const AuctionInstance& instance);

/// Runs steps 1-8 between `ta` and the participants over `tasks`.
RoundReport run_trading_round(Registry& registry, Ledger& ledger, const std::string& ta,
                              std::span<const Task> tasks, std::span<const VehicleParticipant> vehicles,
                              const RoundOptions& options);

/// Delivers a (possibly replayed or forged) ResMsg/ConMsg to the TA after
/// the round. Coins move only on a legal DataDelivered -> Paid transition,
/// so a session is paid at most once.
Delivery deliver_to_ta(RoundReport& report, Registry& registry, const std::string& ta, const ProtocolMessage& msg,
                       bool data_meets_requirement = true);

/// Registers "ta" and "vehicle-<i>" for every vehicle of `instance`, in that order.
void register_instance(Registry& registry, const AuctionInstance& instance, Coins ta_balance, Coins vehicle_balance);
std::vector<VehicleParticipant> participants_for(const AuctionInstance& instance);
std::string vehicle_account(VehicleId id);

void write_transcript(std::ostream& out, std::span<const ProtocolMessage> transcript);

}  // namespace brtm::trading
