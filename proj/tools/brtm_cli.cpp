// brtm: scenario generation, auctions, consensus runs, trading rounds and
// the four experiment runners.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>

#include "brtm/auction.hpp"
#include "brtm/consensus.hpp"
#include "brtm/crypto.hpp"
#include "brtm/model.hpp"
#include "brtm/rng.hpp"
#include "brtm/simharness.hpp"
#include "brtm/trading.hpp"

namespace {

using namespace brtm;

// Writes to `path`, or to stdout when `path` is empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw std::runtime_error("cannot open " + path + " for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void close() {
    if (!file_) return;
    file_->close();
    if (!*file_) throw std::runtime_error("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

AuctionInstance load(const std::string& scenario) {
  if (scenario == "paper-example") return paper_example();
  return load_scenario(scenario);
}

struct GenArgs {
  std::uint64_t seed = 1;
  std::size_t n_vehicles = 500;
  std::size_t n_tasks = 200;
  double budget = 100.0;
  std::string out;
};

struct AuctionArgs {
  std::string mechanism = "tbsap";
  std::string scenario = "paper-example";
  std::optional<double> budget;
  std::string rule = "critical";
  std::string out;
};

struct ConsensusArgs {
  std::uint64_t seed = 1;
  std::size_t n_nodes = 100;
  std::size_t committee = 70;
  std::size_t active = 10;
  std::size_t epochs = 10;
  double rafn = 0.2;
  std::string mode = "reputation";
  std::string out;
};

struct TradeArgs {
  std::uint64_t seed = 1;
  std::string scenario = "paper-example";
  std::optional<double> budget;
  std::string mechanism = "tbsap";
  std::string crypto = "test";
  double ta_balance = 1000.0;
  std::string out;
  std::string transcript;
};

struct ExperimentArgs {
  std::string name;
  std::uint64_t seed = 1;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> n_tasks;
  std::optional<double> budget;
  std::string mode;
  bool parallel = false;
  std::string out = "results";
};

int run_gen(const GenArgs& a) {
  ScenarioConfig c;
  c.rng_seed = a.seed;
  c.n_vehicles = a.n_vehicles;
  c.n_tasks = a.n_tasks;
  c.budget = a.budget;
  const AuctionInstance inst = generate_scenario(c);
  Output out(a.out);
  write_scenario(out.stream(), inst);
  out.close();
  return 0;
}

int run_auction(const AuctionArgs& a) {
  AuctionInstance inst = load(a.scenario);
  if (a.budget) {
    inst.budget = *a.budget;
    validate(inst);
  }
  const auto rule = a.rule == "published" ? auction::PaymentRule::Published : auction::PaymentRule::Critical;
  AuctionOutcome outcome;
  if (a.mechanism == "greedy")
    outcome = auction::greedy_heuristic(inst);
  else if (a.mechanism == "tbsap")
    outcome = auction::tbsap(inst, rule);
  else
    outcome = auction::brute_force_optimum(inst);
  Output out(a.out);
  auction::write_outcome_csv(out.stream(), inst, outcome, a.mechanism);
  out.close();
  return 0;
}

int run_consensus(const ConsensusArgs& a) {
  using namespace consensus;
  if (!(a.rafn >= 0.0 && a.rafn <= 1.0)) throw std::invalid_argument("--rafn must lie in [0,1]");
  Rng rng(a.seed);
  const auto n_abnormal = static_cast<std::size_t>(std::llround(a.rafn * static_cast<double>(a.n_nodes)));
  std::vector<NodeId> ids(a.n_nodes);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  shuffle(std::span<NodeId>(ids), rng);
  std::unique_ptr<bool[]> abnormal(new bool[a.n_nodes]());
  for (std::size_t k = 0; k < n_abnormal; ++k) abnormal[ids[k]] = true;
  std::vector<double> reps(a.n_nodes);
  for (std::size_t i = 0; i < a.n_nodes; ++i)
    reps[i] = abnormal[i] ? uniform_closed_open(rng, 0.0, 0.5) : uniform_closed(rng, 0.5, 1.0);

  SimulationConfig config;
  config.sizes = CommitteeSizes{a.committee, a.active};
  config.n_epochs = a.epochs;
  config.mode = a.mode == "equal" ? VotingMode::EqualWeight : VotingMode::ReputationWeighted;
  config.seed = derive_seed(a.seed, 1);
  const History h =
      run_epochs(make_population(reps, std::span<const bool>(abnormal.get(), a.n_nodes)), config);
  Output out(a.out);
  write_history_csv(out.stream(), h);
  out.close();
  std::fprintf(stderr, "rounds %zu, accepted blocks %zu\n", h.rounds, h.accepted_blocks);
  return 0;
}

int run_trade(const TradeArgs& a) {
  using namespace trading;
  AuctionInstance inst = load(a.scenario);
  if (a.budget) inst.budget = *a.budget;
  validate(inst);
  const auto scheme = crypto::make_scheme(a.crypto);
  Registry registry(*scheme, a.seed);
  register_instance(registry, inst, to_coins(a.ta_balance), 0);
  const Coins before = registry.total_balance();
  Ledger ledger;
  RoundOptions options;
  options.budget = inst.budget;
  options.mechanism = a.mechanism == "greedy" ? Mechanism::Greedy : Mechanism::Tbsap;
  options.round = 1;
  const auto vehicles = participants_for(inst);
  const RoundReport report = run_trading_round(registry, ledger, "ta", inst.tasks, vehicles, options);

  std::cout << "round " << options.round << (report.round_aborted ? " aborted: " + report.abort_reason : "") << '\n';
  for (const TradingSession& s : report.sessions) {
    std::cout << s.vehicle() << ' ' << to_string(s.state());
    if (s.state() == SessionState::Confirmed) std::cout << " paid " << format_coins(s.payment);
    if (s.state() == SessionState::Aborted) std::cout << " (" << s.abort_reason() << ')';
    std::cout << '\n';
  }
  std::cout << "confirmed " << report.confirmed() << ", block "
            << (report.block_committed ? "committed" : "not committed") << ", coins conserved "
            << (registry.total_balance() == before ? "yes" : "NO") << '\n';
  if (!a.out.empty()) {
    Output out(a.out);
    ledger.write_log(out.stream());
    out.close();
  }
  if (!a.transcript.empty()) {
    Output out(a.transcript);
    write_transcript(out.stream(), report.transcript);
    out.close();
  }
  return registry.total_balance() == before ? 0 : 3;
}

int run_experiment(const ExperimentArgs& a) {
  const auto kind = sim::parse_experiment(a.name);
  if (!kind) throw std::invalid_argument("unknown experiment '" + a.name + "'");
  sim::ExperimentSpec spec = sim::default_spec(*kind, a.seed);
  if (a.trials) spec.trials = *a.trials;
  if (a.n_tasks) spec.n_tasks = *a.n_tasks;
  if (a.budget) spec.scatter_budget = *a.budget;
  spec.parallel = a.parallel;
  const std::string path = sim::run_to_directory(spec, a.out);
  std::cout << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic-monitoring auction, consensus and trading simulator"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a random scenario file");
  g->add_option("--seed", gen.seed, "RNG seed");
  g->add_option("--n-vehicles", gen.n_vehicles, "Number of vehicles")->check(CLI::NonNegativeNumber);
  g->add_option("--n-tasks", gen.n_tasks, "Number of tasks")->check(CLI::NonNegativeNumber);
  g->add_option("--budget", gen.budget, "Auction budget")->check(CLI::NonNegativeNumber);
  g->add_option("--out", gen.out, "Output file (default stdout)");

  AuctionArgs auc;
  auto* au = app.add_subcommand("auction", "Run one auction and print the outcome CSV");
  au->add_option("--mechanism", auc.mechanism)->check(CLI::IsMember({"greedy", "tbsap", "oracle"}));
  au->add_option("--scenario", auc.scenario, "Scenario file or 'paper-example'");
  au->add_option("--budget", auc.budget, "Override the scenario budget")->check(CLI::NonNegativeNumber);
  au->add_option("--rule", auc.rule, "TBSAP payment rule")->check(CLI::IsMember({"critical", "published"}));
  au->add_option("--out", auc.out, "Output file (default stdout)");

  ConsensusArgs con;
  auto* co = app.add_subcommand("consensus", "Run election epochs and emit the history CSV");
  co->add_option("--seed", con.seed);
  co->add_option("--n-nodes", con.n_nodes)->check(CLI::PositiveNumber);
  co->add_option("--committee", con.committee, "|M|")->check(CLI::PositiveNumber);
  co->add_option("--active", con.active, "|D|")->check(CLI::PositiveNumber);
  co->add_option("--epochs", con.epochs)->check(CLI::NonNegativeNumber);
  co->add_option("--rafn", con.rafn, "Fraction of abnormal nodes")->check(CLI::Range(0.0, 1.0));
  co->add_option("--mode", con.mode)->check(CLI::IsMember({"reputation", "equal"}));
  co->add_option("--out", con.out, "Output file (default stdout)");

  TradeArgs tr;
  auto* t = app.add_subcommand("trade", "Run one full trading round over a scenario");
  t->add_option("--seed", tr.seed, "Key-generation seed");
  t->add_option("--scenario", tr.scenario, "Scenario file or 'paper-example'");
  t->add_option("--budget", tr.budget)->check(CLI::NonNegativeNumber);
  t->add_option("--mechanism", tr.mechanism)->check(CLI::IsMember({"greedy", "tbsap"}));
  t->add_option("--crypto", tr.crypto, "Signature/encryption scheme")->check(CLI::IsMember({"test", "sodium"}));
  t->add_option("--ta-balance", tr.ta_balance, "TA starting balance")->check(CLI::NonNegativeNumber);
  t->add_option("--out", tr.out, "Ledger log file");
  t->add_option("--transcript", tr.transcript, "Message transcript file");

  ExperimentArgs ex;
  auto* e = app.add_subcommand("experiment", "Run an experiment and write results/<experiment>/<seed>.csv");
  e->add_option("name", ex.name, "reputation-trajectory | rnw-vs-rafn | profit-vs-budget | bid-payment-scatter")
      ->required()
      ->check(CLI::IsMember({"reputation-trajectory", "rnw-vs-rafn", "profit-vs-budget", "bid-payment-scatter"}));
  e->add_option("--seed", ex.seed);
  e->add_option("--trials", ex.trials)->check(CLI::PositiveNumber);
  e->add_option("--n-tasks", ex.n_tasks)->check(CLI::PositiveNumber);
  e->add_option("--budget", ex.budget, "Budget of bid-payment-scatter")->check(CLI::NonNegativeNumber);
  e->add_flag("--parallel", ex.parallel, "Run trials on OpenMP threads");
  e->add_option("--out", ex.out, "Results root directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return run_gen(gen);
    if (*au) return run_auction(auc);
    if (*co) return run_consensus(con);
    if (*t) return run_trade(tr);
    if (*e) return run_experiment(ex);
  } catch (const std::exception& err) {
    std::cerr << "brtm: " << err.what() << '\n';
    return 2;
  }
  return 1;
}
