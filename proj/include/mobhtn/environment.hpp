#pragma once

// Static enterprise model: materials, products, production lines, vehicles,
// routes and the policy knobs that resolve scheduling ambiguities.

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mobhtn {

using Id = std::string;

// Raised for malformed or inconsistent input (bad files, dangling ids).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a caller breaks an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class LinePolicy { all_capable, gamma_escalation };
enum class DeadlineCheck { arrival, unload_complete };

inline const char* to_string(LinePolicy p) {
  return p == LinePolicy::all_capable ? "all-capable" : "gamma-escalation";
}
inline const char* to_string(DeadlineCheck d) {
  return d == DeadlineCheck::arrival ? "arrival" : "unload-complete";
}

struct PolicyConfig {
  LinePolicy line_policy = LinePolicy::all_capable;
  double changeover_hours = 0.5;
  DeadlineCheck deadline_check = DeadlineCheck::arrival;
  bool strict_deadlines = false;
};

struct Product {
  Id product_id;
  std::map<Id, double> bom;  // material -> units per unit of product
  double load_rate = 0;      // units/hour
  double unload_rate = 0;    // units/hour
};

struct LineCapability {
  double rate = 0;       // units/hour
  double cost_rate = 0;  // cost/hour
  std::map<Id, double> utility_draw;  // utility -> units/hour
  double workers = 0;
};

struct ProductionLine {
  Id line_id;
  std::map<Id, LineCapability> capability;  // product -> capability

  bool produces(const Id& product) const { return capability.count(product) != 0; }
};

struct Vehicle {
  Id vehicle_id;
  double speed = 0;  // distance/hour
  std::map<Id, double> capacity;  // product -> units per trip
  double trip_cost = 0;

  std::optional<double> capacity_for(const Id& product) const {
    auto it = capacity.find(product);
    if (it == capacity.end()) return std::nullopt;
    return it->second;
  }
};

struct MobilizationTask {
  Id task_id;
  double deadline = 0;  // hours
  double amount = 0;    // units
  Id product_id;
  Id destination;
};

struct EnterpriseEnvironment {
  Id site = "a1";
  std::map<Id, double> utility_totals;
  double worker_total = 0;
  std::map<Id, double> material_stock;
  std::map<Id, Product> products;
  std::map<Id, ProductionLine> lines;
  std::map<Id, Vehicle> vehicles;
  std::map<std::pair<Id, Id>, double> routes;  // (site, destination) -> distance
  PolicyConfig policy;

  const Product& product(const Id& id) const {
    auto it = products.find(id);
    if (it == products.end()) throw InputError("unknown product '" + id + "'");
    return it->second;
  }
  const ProductionLine& line(const Id& id) const {
    auto it = lines.find(id);
    if (it == lines.end()) throw InputError("unknown line '" + id + "'");
    return it->second;
  }
  const Vehicle& vehicle(const Id& id) const {
    auto it = vehicles.find(id);
    if (it == vehicles.end()) throw InputError("unknown vehicle '" + id + "'");
    return it->second;
  }
  double distance_to(const Id& destination) const {
    auto it = routes.find({site, destination});
    if (it == routes.end())
      throw InputError("no route from '" + site + "' to '" + destination + "'");
    return it->second;
  }

  // Checks the cross-references and sign constraints of the whole model.
  void validate() const {
    auto nonneg = [](double v, const std::string& what) {
      if (!std::isfinite(v) || v < 0) throw InputError(what + " must be a finite value >= 0");
    };
    auto positive = [](double v, const std::string& what) {
      if (!std::isfinite(v) || v <= 0) throw InputError(what + " must be > 0");
    };
    for (const auto& [u, v] : utility_totals) nonneg(v, "utilities." + u);
    nonneg(worker_total, "workers");
    for (const auto& [m, v] : material_stock) nonneg(v, "materials." + m);
    for (const auto& [pid, p] : products) {
      positive(p.load_rate, "products." + pid + ".load_rate");
      positive(p.unload_rate, "products." + pid + ".unload_rate");
      for (const auto& [m, q] : p.bom) {
        nonneg(q, "products." + pid + ".bom." + m);
        if (!material_stock.count(m))
          throw InputError("products." + pid + ".bom references unknown material '" + m + "'");
      }
    }
    for (const auto& [lid, l] : lines) {
      for (const auto& [pid, c] : l.capability) {
        const std::string at = "lines." + lid + "." + pid;
        if (!products.count(pid)) throw InputError(at + ": unknown product '" + pid + "'");
        positive(c.rate, at + ".rate");
        positive(c.cost_rate, at + ".cost_rate");
        nonneg(c.workers, at + ".workers");
        for (const auto& [u, d] : c.utility_draw) {
          nonneg(d, at + ".utility_draw." + u);
          if (!utility_totals.count(u))
            throw InputError(at + ".utility_draw references unknown utility '" + u + "'");
        }
      }
    }
    for (const auto& [vid, v] : vehicles) {
      positive(v.speed, "vehicles." + vid + ".speed");
      positive(v.trip_cost, "vehicles." + vid + ".trip_cost");
      for (const auto& [pid, c] : v.capacity) {
        if (!products.count(pid))
          throw InputError("vehicles." + vid + ".capacity: unknown product '" + pid + "'");
        positive(c, "vehicles." + vid + ".capacity." + pid);
      }
    }
    for (const auto& [key, d] : routes) positive(d, "routes." + key.first + "." + key.second);
    if (policy.changeover_hours < 0 || !std::isfinite(policy.changeover_hours))
      throw InputError("policy.changeover_hours must be >= 0");
  }

  // Binds a goal task to this model: product and destination must resolve.
  void validate_task(const MobilizationTask& t) const {
    if (t.task_id.empty()) throw InputError("task with empty task_id");
    if (!(t.deadline > 0) || !std::isfinite(t.deadline))
      throw InputError("task " + t.task_id + ": deadline must be > 0");
    if (!(t.amount > 0) || !std::isfinite(t.amount))
      throw InputError("task " + t.task_id + ": amount must be > 0");
    if (!products.count(t.product_id))
      throw InputError("task " + t.task_id + ": unknown product '" + t.product_id + "'");
    if (!routes.count({site, t.destination}))
      throw InputError("task " + t.task_id + ": no route to destination '" + t.destination + "'");
  }
};

}  // namespace mobhtn
