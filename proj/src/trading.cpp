#include "brtm/trading.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ostream>

#include "brtm/auction.hpp"

namespace brtm::trading {

namespace {

constexpr std::uint64_t kStepsPerRound = 16;

class Writer {
 public:
  Writer& u8(std::uint8_t v) {
    bytes_.push_back(v);
    return *this;
  }
  Writer& u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  Writer& u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  Writer& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
  Writer& f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    return u64(bits);
  }
  Writer& str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
    return *this;
  }
  Writer& blob(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    bytes_.insert(bytes_.end(), b.begin(), b.end());
    return *this;
  }
  crypto::Bytes take() { return std::move(bytes_); }

 private:
  crypto::Bytes bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::optional<std::uint32_t> u32() {
    if (pos_ + 4 > b_.size()) return std::nullopt;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::optional<std::uint64_t> u64() {
    if (pos_ + 8 > b_.size()) return std::nullopt;
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::optional<std::int64_t> i64() {
    auto v = u64();
    if (!v) return std::nullopt;
    return static_cast<std::int64_t>(*v);
  }
  std::optional<double> f64() {
    auto v = u64();
    if (!v) return std::nullopt;
    double d;
    std::memcpy(&d, &*v, 8);
    return d;
  }
  std::optional<std::string> str() {
    auto n = u32();
    if (!n || pos_ + *n > b_.size()) return std::nullopt;
    std::string out(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + *n));
    pos_ += *n;
    return out;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::uint64_t session_id(std::uint64_t round, const std::string& vehicle) {
  Writer w;
  w.str("brtm-session").u64(round).str(vehicle);
  return crypto::digest64(w.take());
}

crypto::Bytes encode_tasks(std::uint64_t round, std::span<const Task> tasks) {
  Writer w;
  w.u64(round).u32(static_cast<std::uint32_t>(tasks.size()));
  for (const Task& t : tasks) w.u32(t.id).f64(t.appraisement);
  return w.take();
}

std::optional<std::vector<Task>> decode_tasks(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (!r.u64()) return std::nullopt;
  auto n = r.u32();
  if (!n) return std::nullopt;
  std::vector<Task> tasks;
  for (std::uint32_t k = 0; k < *n; ++k) {
    auto id = r.u32();
    auto a = r.f64();
    if (!id || !a) return std::nullopt;
    tasks.push_back(Task{*id, {}, *a});
  }
  if (!r.done()) return std::nullopt;
  return tasks;
}

struct Request {
  std::uint64_t session = 0;
  std::vector<TaskId> tasks;
  double bid = 0.0;
};

crypto::Bytes encode_request(const Request& req) {
  Writer w;
  w.u64(req.session).u32(static_cast<std::uint32_t>(req.tasks.size()));
  for (TaskId t : req.tasks) w.u32(t);
  w.f64(req.bid);
  return w.take();
}

std::optional<Request> decode_request(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Request req;
  auto s = r.u64();
  auto n = r.u32();
  if (!s || !n) return std::nullopt;
  req.session = *s;
  for (std::uint32_t k = 0; k < *n; ++k) {
    auto t = r.u32();
    if (!t) return std::nullopt;
    req.tasks.push_back(*t);
  }
  auto b = r.f64();
  if (!b || !r.done()) return std::nullopt;
  req.bid = *b;
  return req;
}

crypto::Bytes encode_session_amount(std::uint64_t session, std::string_view tag, Coins amount) {
  Writer w;
  w.u64(session).str(tag).i64(amount);
  return w.take();
}

std::optional<std::pair<std::uint64_t, Coins>> decode_session_amount(std::span<const std::uint8_t> bytes,
                                                                      std::string_view tag) {
  Reader r(bytes);
  auto s = r.u64();
  auto t = r.str();
  auto amount = r.i64();
  if (!s || !t || *t != tag || !amount || !r.done()) return std::nullopt;
  return std::make_pair(*s, *amount);
}

crypto::Bytes encode_data(std::uint64_t session, std::span<const TaskId> tasks) {
  // Stand-in for the traffic observations of each task.
  Writer w;
  w.u64(session).u32(static_cast<std::uint32_t>(tasks.size()));
  for (TaskId t : tasks) {
    Writer obs;
    obs.str("observation").u64(session).u32(t);
    w.u32(t).u64(crypto::digest64(obs.take()));
  }
  return w.take();
}

std::optional<std::uint64_t> decode_data_session(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  return r.u64();
}

crypto::Bytes sign_record(const TransactionRecord& rec, const Account& ta, const crypto::Scheme& scheme) {
  return scheme.sign(rec.signed_part(), ta.keys.secret_key);
}

// TA-side handling of a verified ResMsg: data check and payment.
Delivery ta_on_response(TradingSession& s, Registry& registry, const std::string& ta,
                        std::span<const std::uint8_t> plaintext, bool data_ok) {
  Delivery d;
  if (!next_state(s.state(), SessionEvent::Deliver)) {
    d.detail = "session is " + std::string(to_string(s.state())) + "; ResMsg ignored";
    return d;
  }
  const auto sid = decode_data_session(plaintext);
  if (!sid || *sid != s.id()) {
    s.abort("malformed response");
    d.detail = "malformed response";
    return d;
  }
  s.apply(SessionEvent::Deliver);
  if (!data_ok) {
    s.abort("data does not meet requirement");
    d.applied = true;
    d.detail = s.abort_reason();
    return d;
  }
  registry.transfer(ta, s.vehicle(), s.payment);
  s.apply(SessionEvent::Pay);
  d.applied = true;
  d.detail = "paid";
  return d;
}

// TA-side handling of a verified ConMsg: countersign and record.
Delivery ta_on_confirm(TradingSession& s, const Registry& registry, const std::string& ta,
                       std::span<const std::uint8_t> plaintext, std::uint64_t stime) {
  Delivery d;
  if (!next_state(s.state(), SessionEvent::Confirm)) {
    d.detail = "session is " + std::string(to_string(s.state())) + "; ConMsg ignored";
    return d;
  }
  const auto body = decode_session_amount(plaintext, "confirm");
  if (!body || body->first != s.id() || body->second != s.payment) {
    d.detail = "confirmation does not match the session";
    return d;
  }
  TransactionRecord rec;
  rec.session = s.id();
  rec.ta = ta;
  rec.vehicle = s.vehicle();
  rec.payment = s.payment;
  rec.opened = s.opened();
  rec.confirmed = stime;
  rec.ta_signature = sign_record(rec, registry.account(ta), registry.scheme());
  crypto::Bytes full = rec.signed_part();
  full.insert(full.end(), rec.ta_signature.begin(), rec.ta_signature.end());
  rec.digest = crypto::digest64(full);
  s.record = std::move(rec);
  s.apply(SessionEvent::Confirm);
  d.applied = true;
  d.detail = "confirmed";
  return d;
}

}  // namespace

// ---- coins ----------------------------------------------------------------------

Coins to_coins(double data_coins) {
  if (!std::isfinite(data_coins) || data_coins < 0.0) throw TradingError("payment must be a nonnegative number");
  return static_cast<Coins>(std::ceil(data_coins * static_cast<double>(kCoinScale)));
}

double to_data_coins(Coins amount) { return static_cast<double>(amount) / static_cast<double>(kCoinScale); }

std::string format_coins(Coins amount) {
  const bool neg = amount < 0;
  const auto mag = static_cast<std::uint64_t>(neg ? -amount : amount);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%llu.%09llu", neg ? "-" : "",
                static_cast<unsigned long long>(mag / kCoinScale), static_cast<unsigned long long>(mag % kCoinScale));
  return buf;
}

// ---- identity -------------------------------------------------------------------

crypto::Bytes Certificate::signed_part() const {
  Writer w;
  w.str("brtm-cert").str(id).blob(public_key);
  return w.take();
}

Registry::Registry(const crypto::Scheme& scheme, std::uint64_t seed)
    : scheme_(&scheme), rng_(seed), ca_keys_(scheme.generate(rng_)) {}

const Account& Registry::register_entity(const std::string& id, EntityKind kind, Coins initial_balance) {
  if (id.empty()) throw TradingError("account id must not be empty");
  if (accounts_.contains(id)) throw TradingError("duplicate registration for '" + id + "'");
  if (initial_balance < 0) throw TradingError("initial balance must be nonnegative");
  Account acc;
  acc.id = id;
  acc.kind = kind;
  acc.keys = scheme_->generate(rng_);
  acc.certificate.id = id;
  acc.certificate.public_key = acc.keys.public_key;
  acc.certificate.ca_signature = scheme_->sign(acc.certificate.signed_part(), ca_keys_.secret_key);
  acc.balance = initial_balance;
  if (kind == EntityKind::TrafficAdministration) acc.reputation = 0.5;
  return accounts_.emplace(id, std::move(acc)).first->second;
}

const Account& Registry::account(const std::string& id) const {
  const Account* acc = find(id);
  if (!acc) throw TradingError("unknown account '" + id + "'");
  return *acc;
}

const Account* Registry::find(const std::string& id) const {
  auto it = accounts_.find(id);
  return it == accounts_.end() ? nullptr : &it->second;
}

bool Registry::verify_certificate(const Certificate& cert) const {
  if (!scheme_->verify(cert.signed_part(), cert.ca_signature, ca_keys_.public_key)) return false;
  const Account* acc = find(cert.id);
  return acc && acc->keys.public_key == cert.public_key;
}

Coins Registry::total_balance() const {
  Coins total = 0;
  for (const auto& [id, acc] : accounts_) total += acc.balance;
  return total;
}

void Registry::transfer(const std::string& from, const std::string& to, Coins amount) {
  if (amount < 0) throw TradingError("negative transfer");
  auto src = accounts_.find(from);
  auto dst = accounts_.find(to);
  if (src == accounts_.end() || dst == accounts_.end()) throw TradingError("transfer between unknown accounts");
  if (src->second.balance < amount) throw TradingError("insufficient balance in '" + from + "'");
  src->second.balance -= amount;
  dst->second.balance += amount;
}

// ---- messages -------------------------------------------------------------------

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::PubMsg: return "PubMsg";
    case MessageKind::ReqMsg: return "ReqMsg";
    case MessageKind::OrdMsg: return "OrdMsg";
    case MessageKind::ResMsg: return "ResMsg";
    case MessageKind::ConMsg: return "ConMsg";
  }
  return "?";
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::Certificate: return "certificate";
    case RejectReason::Signature: return "signature";
    case RejectReason::Decryption: return "decryption";
    case RejectReason::Timestamp: return "timestamp";
  }
  return "?";
}

crypto::Bytes ProtocolMessage::signed_part() const {
  Writer w;
  w.str("brtm-msg").u8(static_cast<std::uint8_t>(kind)).u64(session).blob(payload).u64(stime);
  return w.take();
}

ProtocolMessage make_message(MessageKind kind, std::uint64_t session, crypto::Bytes payload, const Account& sender,
                             std::uint64_t stime, const crypto::Scheme& scheme) {
  ProtocolMessage msg;
  msg.kind = kind;
  msg.session = session;
  msg.payload = std::move(payload);
  msg.sender = sender.certificate;
  msg.stime = stime;
  msg.signature = scheme.sign(msg.signed_part(), sender.keys.secret_key);
  return msg;
}

Verdict verify_message(const ProtocolMessage& msg, const Registry& registry, const Account& receiver,
                       SessionClock& clock) {
  Verdict v;
  auto reject = [&](RejectReason r) {
    v.reason = r;
    return v;
  };
  if (!registry.verify_certificate(msg.sender)) return reject(RejectReason::Certificate);
  if (!registry.scheme().verify(msg.signed_part(), msg.signature, msg.sender.public_key))
    return reject(RejectReason::Signature);
  if (msg.kind == MessageKind::PubMsg) {
    v.plaintext = msg.payload;
  } else {
    auto plain = registry.scheme().decrypt(msg.payload, receiver.keys.secret_key);
    if (!plain) return reject(RejectReason::Decryption);
    v.plaintext = std::move(*plain);
  }
  if (msg.stime < clock.start || (clock.last_seen && msg.stime <= *clock.last_seen))
    return reject(RejectReason::Timestamp);
  clock.last_seen = msg.stime;
  v.accepted = true;
  return v;
}

// ---- sessions -------------------------------------------------------------------

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::Published: return "Published";
    case SessionState::Requested: return "Requested";
    case SessionState::Allocated: return "Allocated";
    case SessionState::Ordered: return "Ordered";
    case SessionState::DataDelivered: return "DataDelivered";
    case SessionState::Paid: return "Paid";
    case SessionState::Confirmed: return "Confirmed";
    case SessionState::Aborted: return "Aborted";
  }
  return "?";
}

std::string_view to_string(SessionEvent event) {
  switch (event) {
    case SessionEvent::Request: return "Request";
    case SessionEvent::Allocate: return "Allocate";
    case SessionEvent::Order: return "Order";
    case SessionEvent::Deliver: return "Deliver";
    case SessionEvent::Pay: return "Pay";
    case SessionEvent::Confirm: return "Confirm";
    case SessionEvent::Abort: return "Abort";
  }
  return "?";
}

std::optional<SessionState> next_state(SessionState state, SessionEvent event) {
  using S = SessionState;
  using E = SessionEvent;
  if (event == E::Abort) {
    if (state == S::Paid || state == S::Confirmed || state == S::Aborted) return std::nullopt;
    return S::Aborted;
  }
  switch (state) {
    case S::Published: return event == E::Request ? std::optional(S::Requested) : std::nullopt;
    case S::Requested: return event == E::Allocate ? std::optional(S::Allocated) : std::nullopt;
    case S::Allocated: return event == E::Order ? std::optional(S::Ordered) : std::nullopt;
    case S::Ordered: return event == E::Deliver ? std::optional(S::DataDelivered) : std::nullopt;
    case S::DataDelivered: return event == E::Pay ? std::optional(S::Paid) : std::nullopt;
    case S::Paid: return event == E::Confirm ? std::optional(S::Confirmed) : std::nullopt;
    case S::Confirmed:
    case S::Aborted: return std::nullopt;
  }
  return std::nullopt;
}

crypto::Bytes TransactionRecord::signed_part() const {
  Writer w;
  w.str("brtm-tx").u64(session).str(ta).str(vehicle).i64(payment).u64(opened).u64(confirmed);
  return w.take();
}

TradingSession::TradingSession(std::uint64_t id, std::string vehicle, std::uint64_t opened)
    : id_(id), vehicle_(std::move(vehicle)), opened_(opened) {}

void TradingSession::apply(SessionEvent event) {
  const auto next = next_state(state_, event);
  if (!next)
    throw TradingError("illegal session transition " + std::string(to_string(state_)) + " --" +
                       std::string(to_string(event)) + "-->");
  state_ = *next;
}

void TradingSession::abort(std::string reason) {
  apply(SessionEvent::Abort);
  abort_reason_ = std::move(reason);
}

// ---- ledger ---------------------------------------------------------------------

std::uint64_t block_digest(const TradeBlock& block) {
  Writer w;
  w.str("brtm-block").u64(block.id).u64(block.round).u32(static_cast<std::uint32_t>(block.transactions.size()));
  for (const TransactionRecord& tx : block.transactions) w.u64(tx.digest);
  return crypto::digest64(w.take());
}

void Ledger::commit(TradeBlock block) {
  if (block.id != blocks_.size()) throw TradingError("block ids must be consecutive");
  blocks_.push_back(std::move(block));
}

void Ledger::write_log(std::ostream& out) const {
  char sid[32];
  for (const TradeBlock& b : blocks_) {
    for (const TransactionRecord& tx : b.transactions) {
      std::snprintf(sid, sizeof sid, "%016llx", static_cast<unsigned long long>(tx.session));
      out << sid << ',' << tx.ta << ',' << tx.vehicle << ',' << format_coins(tx.payment) << ',' << b.id << '\n';
    }
  }
}

// ---- trading round ----------------------------------------------------------------

std::size_t RoundReport::confirmed() const {
  return static_cast<std::size_t>(std::count_if(sessions.begin(), sessions.end(), [](const TradingSession& s) {
    return s.state() == SessionState::Confirmed;
  }));
}

TradingSession* RoundReport::session_by_id(std::uint64_t id) {
  for (auto& s : sessions) {
    if (s.id() == id) return &s;
  }
  return nullptr;
}

std::vector<Task> published_tasks(const AuctionInstance& instance) { return instance.tasks; }

RoundReport run_trading_round(Registry& registry, Ledger& ledger, const std::string& ta_id,
                              std::span<const Task> tasks, std::span<const VehicleParticipant> vehicles,
                              const RoundOptions& options) {
  const crypto::Scheme& scheme = registry.scheme();
  const Account& ta = registry.account(ta_id);
  if (ta.kind != EntityKind::TrafficAdministration) throw TradingError("'" + ta_id + "' is not a TA account");

  // Sessions are kept in account order so the outcome does not depend on the
  // order in which participants are listed.
  std::vector<const VehicleParticipant*> order;
  for (const auto& v : vehicles) order.push_back(&v);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->account < b->account; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (order[k]->account == order[k - 1]->account) throw TradingError("vehicle listed twice: " + order[k]->account);
  }

  const std::uint64_t t0 = options.round * kStepsPerRound;
  RoundReport report;
  std::map<std::uint64_t, SessionClock> vehicle_clocks;

  // 1) PubMsg: the task list, signed by the TA.
  const ProtocolMessage pub =
      make_message(MessageKind::PubMsg, 0, encode_tasks(options.round, tasks), ta, t0, scheme);
  report.transcript.push_back(pub);

  // 2) Each vehicle checks the TA and answers with an encrypted ReqMsg.
  std::vector<const VehicleParticipant*> requested;
  for (const VehicleParticipant* vp : order) {
    const Account& va = registry.account(vp->account);
    const std::uint64_t sid = session_id(options.round, vp->account);
    report.sessions.emplace_back(sid, vp->account, t0);
    TradingSession& s = report.sessions.back();
    s.tasks = vp->tasks;
    s.bid = vp->bid;

    SessionClock& vclock = vehicle_clocks[sid];
    vclock.start = t0;
    const Verdict seen = verify_message(pub, registry, va, vclock);
    if (!seen.accepted || !decode_tasks(seen.plaintext)) {
      s.abort("PubMsg rejected by vehicle");
      continue;
    }

    const Account& recipient = vp->encrypt_request_to ? registry.account(*vp->encrypt_request_to) : ta;
    crypto::Bytes sealed = scheme.encrypt(encode_request({sid, vp->tasks, vp->bid}), recipient.keys.public_key);
    ProtocolMessage req = make_message(MessageKind::ReqMsg, sid, std::move(sealed), va, t0 + 1, scheme);
    if (vp->corrupt_request_signature && !req.signature.empty()) req.signature[0] ^= 0x5A;
    report.transcript.push_back(req);

    SessionClock& tclock = report.ta_clocks[sid];
    tclock.start = t0;
    const Verdict got = verify_message(req, registry, ta, tclock);
    if (!got.accepted) {
      s.abort("ReqMsg rejected: " + std::string(to_string(*got.reason)));
      continue;
    }
    const auto body = decode_request(got.plaintext);
    if (!body || body->session != sid || req.session != sid) {
      s.abort("ReqMsg rejected: malformed request");
      continue;
    }
    s.apply(SessionEvent::Request);
    requested.push_back(vp);
  }

  // 3) Smart-contract auction over the accepted requests.
  AuctionInstance instance;
  instance.tasks.assign(tasks.begin(), tasks.end());
  instance.budget = options.budget;
  std::vector<TradingSession*> bidders;
  for (TradingSession& s : report.sessions) {
    if (s.state() != SessionState::Requested) continue;
    Vehicle v;
    v.id = static_cast<VehicleId>(instance.vehicles.size());
    v.task_subset = s.tasks;
    std::sort(v.task_subset.begin(), v.task_subset.end());
    v.bid = s.bid;
    v.true_cost = s.bid;  // private; the TA only sees bids
    AuctionInstance probe;
    probe.tasks = instance.tasks;
    probe.budget = instance.budget;
    Vehicle check = v;
    check.id = 0;
    probe.vehicles.push_back(check);
    try {
      validate(probe);
    } catch (const ModelError& e) {
      s.abort(std::string("invalid task-bid pair: ") + e.what());
      continue;
    }
    instance.vehicles.push_back(std::move(v));
    bidders.push_back(&s);
  }

  AuctionOutcome outcome;
  if (!instance.vehicles.empty()) {
    outcome = options.mechanism == Mechanism::Tbsap ? auction::tbsap(instance) : auction::greedy_heuristic(instance);
  }
  Coins owed = 0;
  for (const auto& [vid, price] : outcome.payments) owed += to_coins(price);
  if (owed > ta.balance) {
    report.round_aborted = true;
    report.abort_reason = "insufficient TA balance: owes " + format_coins(owed) + ", holds " + format_coins(ta.balance);
    for (TradingSession& s : report.sessions) {
      if (s.state() != SessionState::Aborted) s.abort("round aborted: insufficient TA balance");
    }
    return report;
  }
  for (std::size_t k = 0; k < bidders.size(); ++k) {
    auto it = outcome.payments.find(static_cast<VehicleId>(k));
    if (it == outcome.payments.end()) {
      bidders[k]->abort("not selected by the auction");
      continue;
    }
    bidders[k]->payment = to_coins(it->second);
    bidders[k]->apply(SessionEvent::Allocate);
  }

  // 4)-7) Order, deliver, check, pay, confirm, one winner at a time.
  for (std::size_t k = 0; k < order.size(); ++k) {
    TradingSession& s = report.sessions[k];
    if (s.state() != SessionState::Allocated) continue;
    const VehicleParticipant& vp = *order[k];
    const Account& va = registry.account(vp.account);
    SessionClock& vclock = vehicle_clocks[s.id()];
    SessionClock& tclock = report.ta_clocks[s.id()];

    const ProtocolMessage ord =
        make_message(MessageKind::OrdMsg, s.id(), scheme.encrypt(encode_session_amount(s.id(), "order", s.payment),
                                                                 va.keys.public_key),
                     ta, t0 + 2, scheme);
    report.transcript.push_back(ord);
    const Verdict ord_seen = verify_message(ord, registry, va, vclock);
    const auto ord_body = ord_seen.accepted ? decode_session_amount(ord_seen.plaintext, "order") : std::nullopt;
    if (!ord_body || ord_body->first != s.id()) {
      s.abort("OrdMsg rejected by vehicle");
      continue;
    }
    s.apply(SessionEvent::Order);

    if (!vp.deliver_data) {
      s.abort("winner did not deliver data");
      continue;
    }
    const ProtocolMessage res = make_message(
        MessageKind::ResMsg, s.id(), scheme.encrypt(encode_data(s.id(), s.tasks), ta.keys.public_key), va, t0 + 3,
        scheme);
    report.transcript.push_back(res);
    const Verdict res_seen = verify_message(res, registry, ta, tclock);
    if (!res_seen.accepted) {
      s.abort("ResMsg rejected: " + std::string(to_string(*res_seen.reason)));
      continue;
    }
    const Coins before = va.balance;
    ta_on_response(s, registry, ta_id, res_seen.plaintext, vp.data_meets_requirement);
    if (s.state() != SessionState::Paid) continue;

    // The vehicle confirms only after seeing the ordered amount arrive.
    if (va.balance - before != ord_body->second) continue;
    const ProtocolMessage con = make_message(
        MessageKind::ConMsg, s.id(),
        scheme.encrypt(encode_session_amount(s.id(), "confirm", ord_body->second), ta.keys.public_key), va, t0 + 4,
        scheme);
    report.transcript.push_back(con);
    const Verdict con_seen = verify_message(con, registry, ta, tclock);
    if (con_seen.accepted) ta_on_confirm(s, registry, ta_id, con_seen.plaintext, con.stime);
  }

  // 8) Package the confirmed transactions and hand the block to consensus.
  TradeBlock block;
  block.id = ledger.next_block_id();
  block.round = options.round;
  for (const TradingSession& s : report.sessions) {
    if (s.record) block.transactions.push_back(*s.record);
  }
  block.digest = block_digest(block);
  report.block_committed = options.consensus ? options.consensus(block) : true;
  if (report.block_committed) ledger.commit(block);
  report.block = std::move(block);
  return report;
}

Delivery deliver_to_ta(RoundReport& report, Registry& registry, const std::string& ta, const ProtocolMessage& msg,
                       bool data_meets_requirement) {
  Delivery d;
  TradingSession* s = report.session_by_id(msg.session);
  if (!s) {
    d.detail = "unknown session";
    return d;
  }
  SessionClock& clock = report.ta_clocks[msg.session];
  d.verdict = verify_message(msg, registry, registry.account(ta), clock);
  if (!d.verdict.accepted) {
    d.detail = "rejected: " + std::string(to_string(*d.verdict.reason));
    return d;
  }
  Delivery handled;
  switch (msg.kind) {
    case MessageKind::ResMsg:
      handled = ta_on_response(*s, registry, ta, d.verdict.plaintext, data_meets_requirement);
      break;
    case MessageKind::ConMsg:
      handled = ta_on_confirm(*s, registry, ta, d.verdict.plaintext, msg.stime);
      break;
    default:
      d.detail = std::string(to_string(msg.kind)) + " is not addressed to the TA";
      return d;
  }
  d.applied = handled.applied;
  d.detail = handled.detail;
  return d;
}

std::string vehicle_account(VehicleId id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "vehicle-%06u", id);
  return buf;
}

void register_instance(Registry& registry, const AuctionInstance& instance, Coins ta_balance,
                       Coins vehicle_balance) {
  registry.register_entity("ta", EntityKind::TrafficAdministration, ta_balance);
  for (const Vehicle& v : instance.vehicles) {
    registry.register_entity(vehicle_account(v.id), EntityKind::Vehicle, vehicle_balance);
  }
}

std::vector<VehicleParticipant> participants_for(const AuctionInstance& instance) {
  std::vector<VehicleParticipant> out;
  for (const Vehicle& v : instance.vehicles) {
    VehicleParticipant p;
    p.account = vehicle_account(v.id);
    p.tasks = v.task_subset;
    p.bid = v.bid;
    out.push_back(std::move(p));
  }
  return out;
}

void write_transcript(std::ostream& out, std::span<const ProtocolMessage> transcript) {
  out << "kind,session,sender,stime,payload_bytes,payload_digest\n";
  char sid[32];
  for (const ProtocolMessage& m : transcript) {
    std::snprintf(sid, sizeof sid, "%016llx", static_cast<unsigned long long>(m.session));
    char dg[32];
    std::snprintf(dg, sizeof dg, "%016llx", static_cast<unsigned long long>(crypto::digest64(m.payload)));
    out << to_string(m.kind) << ',' << sid << ',' << m.sender.id << ',' << m.stime << ',' << m.payload.size() << ','
        << dg << '\n';
  }
}

}  // namespace brtm::trading
