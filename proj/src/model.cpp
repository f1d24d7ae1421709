#include "brtm/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace brtm {

namespace {

constexpr int kFormatVersion = 1;
constexpr std::size_t kMaxPlacementAttempts = 1'000'000;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_config(const ScenarioConfig& c) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(c.city_side) || c.city_side <= 0.0) throw ModelError("city_side must be positive");
  if (!finite(c.budget) || c.budget < 0.0) throw ModelError("budget must be nonnegative");
  if (!finite(c.detection_range.lo) || !finite(c.detection_range.hi) || c.detection_range.lo <= 0.0 ||
      c.detection_range.hi < c.detection_range.lo)
    throw ModelError("detection_range must be a nonempty positive interval");
  for (const auto* r : {&c.appraisement_range, &c.kappa_range}) {
    if (!finite(r->lo) || !finite(r->hi) || r->lo < 0.0 || r->hi <= r->lo)
      throw ModelError("appraisement/kappa ranges must satisfy 0 <= lo < hi");
  }
  if (c.n_vehicles > 0 && c.n_tasks == 0) throw ModelError("vehicles need at least one task to cover");
}

}  // namespace

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void validate(const AuctionInstance& instance) {
  if (!std::isfinite(instance.budget) || instance.budget < 0.0) throw ModelError("budget must be a nonnegative number");
  for (std::size_t j = 0; j < instance.tasks.size(); ++j) {
    const Task& t = instance.tasks[j];
    if (t.id != j) throw ModelError("task ids must be dense indices");
    if (!std::isfinite(t.appraisement) || t.appraisement <= 0.0)
      throw ModelError("task " + std::to_string(j) + " has a nonpositive appraisement");
  }
  for (std::size_t i = 0; i < instance.vehicles.size(); ++i) {
    const Vehicle& v = instance.vehicles[i];
    if (v.id != i) throw ModelError("vehicle ids must be dense indices");
    if (!std::isfinite(v.bid) || v.bid <= 0.0)
      throw ModelError("vehicle " + std::to_string(i) + " must bid a positive amount");
    if (!std::isfinite(v.true_cost) || v.true_cost < 0.0)
      throw ModelError("vehicle " + std::to_string(i) + " has a negative cost");
    for (std::size_t k = 0; k < v.task_subset.size(); ++k) {
      if (v.task_subset[k] >= instance.tasks.size())
        throw ModelError("vehicle " + std::to_string(i) + " references an unknown task");
      if (k > 0 && v.task_subset[k] <= v.task_subset[k - 1])
        throw ModelError("vehicle " + std::to_string(i) + " task subset must be sorted and unique");
    }
  }
}

AuctionInstance generate_scenario(const ScenarioConfig& config) {
  check_config(config);
  Rng rng(config.rng_seed);
  AuctionInstance inst;
  inst.budget = config.budget;

  inst.tasks.reserve(config.n_tasks);
  for (std::size_t j = 0; j < config.n_tasks; ++j) {
    Task t;
    t.id = static_cast<TaskId>(j);
    t.position = {uniform_closed(rng, 0.0, config.city_side), uniform_closed(rng, 0.0, config.city_side)};
    t.appraisement = uniform_open_closed(rng, config.appraisement_range.lo, config.appraisement_range.hi);
    inst.tasks.push_back(t);
  }

  inst.vehicles.reserve(config.n_vehicles);
  for (std::size_t i = 0; i < config.n_vehicles; ++i) {
    Vehicle v;
    v.id = static_cast<VehicleId>(i);
    v.detection_distance = uniform_closed(rng, config.detection_range.lo, config.detection_range.hi);
    std::size_t attempts = 0;
    while (v.task_subset.empty()) {
      if (++attempts > kMaxPlacementAttempts)
        throw ModelError("could not place an active vehicle; tasks are too sparse for the detection range");
      v.position = {uniform_closed(rng, 0.0, config.city_side), uniform_closed(rng, 0.0, config.city_side)};
      for (const Task& t : inst.tasks) {
        if (distance(v.position, t.position) < v.detection_distance) v.task_subset.push_back(t.id);
      }
    }
    const double kappa = uniform_open_closed(rng, config.kappa_range.lo, config.kappa_range.hi);
    v.true_cost = kappa * static_cast<double>(v.task_subset.size());
    v.bid = v.true_cost;
    inst.vehicles.push_back(std::move(v));
  }
  return inst;
}

double coverage_value(std::span<const VehicleId> winners, const AuctionInstance& instance) {
  std::vector<std::uint8_t> covered(instance.tasks.size(), 0);
  double total = 0.0;
  for (VehicleId id : winners) {
    if (id >= instance.vehicles.size()) throw ModelError("unknown vehicle id " + std::to_string(id));
    for (TaskId t : instance.vehicles[id].task_subset) {
      if (!covered[t]) {
        covered[t] = 1;
        total += instance.tasks[t].appraisement;
      }
    }
  }
  return total;
}

double vehicle_utility(const AuctionOutcome& outcome, const Vehicle& vehicle) {
  auto it = outcome.payments.find(vehicle.id);
  return it == outcome.payments.end() ? 0.0 : it->second - vehicle.true_cost;
}

AuctionInstance paper_example() {
  AuctionInstance inst;
  inst.budget = 5.0;
  const double a[] = {2.0, 3.0, 4.0, 2.0, 5.0};
  for (TaskId j = 0; j < 5; ++j) inst.tasks.push_back(Task{j, {}, a[j]});
  const std::vector<std::vector<TaskId>> subsets = {{0, 2, 4}, {0, 1, 4}, {2, 3, 4}};
  for (VehicleId i = 0; i < 3; ++i) {
    Vehicle v;
    v.id = i;
    v.true_cost = 2.0;
    v.bid = 2.0;
    v.task_subset = subsets[i];
    inst.vehicles.push_back(std::move(v));
  }
  return inst;
}

void write_scenario(std::ostream& out, const AuctionInstance& instance) {
  out << "brtm-scenario " << kFormatVersion << '\n';
  out << "budget " << fmt_double(instance.budget) << '\n';
  out << "tasks " << instance.tasks.size() << '\n';
  for (const Task& t : instance.tasks) {
    out << "task " << t.id << ' ' << fmt_double(t.position.x) << ' ' << fmt_double(t.position.y) << ' '
        << fmt_double(t.appraisement) << '\n';
  }
  out << "vehicles " << instance.vehicles.size() << '\n';
  for (const Vehicle& v : instance.vehicles) {
    out << "vehicle " << v.id << ' ' << fmt_double(v.position.x) << ' ' << fmt_double(v.position.y) << ' '
        << fmt_double(v.detection_distance) << ' ' << fmt_double(v.true_cost) << ' ' << fmt_double(v.bid) << ' '
        << v.task_subset.size();
    for (TaskId t : v.task_subset) out << ' ' << t;
    out << '\n';
  }
}

AuctionInstance read_scenario(std::istream& in) {
  AuctionInstance inst;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_tasks = 0;
  std::size_t expected_vehicles = 0;
  bool seen_header = false;

  auto fail = [&](const std::string& why) -> ModelError {
    return ModelError("scenario line " + std::to_string(line_no) + ": " + why);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (!seen_header) {
      int version = 0;
      if (tag != "brtm-scenario" || !(ls >> version)) throw fail("missing 'brtm-scenario' header");
      if (version != kFormatVersion) throw fail("unsupported format version " + std::to_string(version));
      seen_header = true;
      continue;
    }
    if (tag == "budget") {
      if (!(ls >> inst.budget)) throw fail("malformed budget");
    } else if (tag == "tasks") {
      if (!(ls >> expected_tasks)) throw fail("malformed task count");
    } else if (tag == "vehicles") {
      if (!(ls >> expected_vehicles)) throw fail("malformed vehicle count");
    } else if (tag == "task") {
      Task t;
      if (!(ls >> t.id >> t.position.x >> t.position.y >> t.appraisement)) throw fail("malformed task record");
      inst.tasks.push_back(t);
    } else if (tag == "vehicle") {
      Vehicle v;
      std::size_t k = 0;
      if (!(ls >> v.id >> v.position.x >> v.position.y >> v.detection_distance >> v.true_cost >> v.bid >> k))
        throw fail("malformed vehicle record");
      v.task_subset.resize(k);
      for (auto& t : v.task_subset) {
        if (!(ls >> t)) throw fail("vehicle record lists fewer tasks than declared");
      }
      inst.vehicles.push_back(std::move(v));
    } else {
      throw fail("unknown record '" + tag + "'");
    }
    std::string extra;
    if (ls >> extra) throw fail("trailing data '" + extra + "'");
  }
  if (!seen_header) throw ModelError("empty scenario");
  if (inst.tasks.size() != expected_tasks) throw ModelError("task count does not match 'tasks' header");
  if (inst.vehicles.size() != expected_vehicles) throw ModelError("vehicle count does not match 'vehicles' header");
  validate(inst);
  return inst;
}

AuctionInstance load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open scenario file " + path);
  return read_scenario(in);
}

void save_scenario(const std::string& path, const AuctionInstance& instance) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write scenario file " + path);
  write_scenario(out, instance);
  if (!out) throw ModelError("write failed for " + path);
}

}  // namespace brtm
