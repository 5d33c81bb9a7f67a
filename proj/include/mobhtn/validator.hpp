#pragma once

// Plan validator. Replays a plan against the enterprise model and checks
// every scheduling rule from first principles: round-trip durations are
// recomputed from rates, speeds and distances, line finish times are
// re-solved numerically, and the material ledger is replayed step by step.
// It deliberately shares no code with the planner's scheduling logic.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mobhtn/environment.hpp"
#include "mobhtn/plan.hpp"

namespace mobhtn {

struct Violation {
  std::size_t step = 0;  // 0 = plan-level
  std::string rule;
  std::string message;
};

struct TaskSummary {
  Id task_id;
  bool reported = false;
  double delivered = 0;
  double last_arrival = 0;
  double deadline = 0;
  double margin = 0;  // deadline - last arrival
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<TaskSummary> tasks;

  bool pass() const { return violations.empty(); }
  bool has(const std::string& rule) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const auto& v) { return v.rule == rule; });
  }
};

namespace validation {

inline constexpr double kEps = 1e-7;

struct TripTrack {
  std::size_t load_step = 0;
  Id task, product;
  double quantity = 0;
  int next = 0;  // 1 transport, 2 unload, 3 back
  double lo = 0, hi = 0;  // feasible interval for the true load instant
  double legs[3] = {0, 0, 0};
  bool timing_broken = false;
};

struct LineRun {
  Id line, task, product;
  double start = 0, finish = 0, rate = 0;
  std::size_t step = 0;
};

// Common stop instant of lines started at `starts` (with `rates`) that
// together produce `amount`; solved by bisection.
inline double solve_finish(const std::vector<double>& starts, const std::vector<double>& rates,
                           double amount) {
  auto produced = [&](double t) {
    double q = 0;
    for (std::size_t i = 0; i < starts.size(); ++i) q += rates[i] * std::max(0.0, t - starts[i]);
    return q;
  };
  double lo = *std::min_element(starts.begin(), starts.end());
  double hi = *std::max_element(starts.begin(), starts.end()) +
              amount / *std::min_element(rates.begin(), rates.end()) + 1;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (produced(mid) < amount ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace validation

/// Throws InputError listing every identifier in the plan that does not
/// resolve against the environment and task list.
inline void check_identifiers(const Plan& plan, const EnterpriseEnvironment& env,
                              const std::vector<MobilizationTask>& tasks) {
  std::set<std::string> missing;
  std::set<Id> task_ids;
  for (const auto& t : tasks) task_ids.insert(t.task_id);
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) missing.insert(what);
  };
  for (const auto& s : plan.steps) {
    need(task_ids.count(action_task(s.action)) != 0, "task " + action_task(s.action));
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, StartAction>) {
            need(env.lines.count(a.line_id) != 0, "line " + a.line_id);
          } else if constexpr (std::is_same_v<T, ShortageAction>) {
            need(env.material_stock.count(a.material_id) != 0, "material " + a.material_id);
          } else {
            need(env.vehicles.count(a.vehicle_id) != 0, "vehicle " + a.vehicle_id);
            need(env.products.count(a.product_id) != 0, "product " + a.product_id);
          }
        },
        s.action);
  }
  for (const auto& r : plan.infeasible) need(task_ids.count(r.task_id) != 0, "task " + r.task_id);
  for (const auto& t : tasks) {
    need(env.products.count(t.product_id) != 0, "product " + t.product_id);
    need(env.routes.count({env.site, t.destination}) != 0, "route " + env.site + "->" + t.destination);
  }
  if (!missing.empty()) {
    std::string msg = "unresolved identifiers:";
    for (const auto& m : missing) msg += " " + m;
    throw InputError(msg);
  }
}

/// Checks a plan; `tolerance` bounds the error of each rendered timestamp.
inline ValidationReport validate(const Plan& plan, const EnterpriseEnvironment& env,
                                 const std::vector<MobilizationTask>& tasks,
                                 const PolicyConfig& policy, double tolerance = 0.05) {
  using namespace validation;
  check_identifiers(plan, env, tasks);

  ValidationReport rep;
  auto flag = [&](std::size_t step, const char* rule, const std::string& msg) {
    rep.violations.push_back({step, rule, msg});
  };
  auto num = [](double v) {
    std::ostringstream o;
    o << v;
    return o.str();
  };

  std::map<Id, const MobilizationTask*> task_of;
  for (const auto& t : tasks) task_of[t.task_id] = &t;
  const double tol = tolerance;
  const double pair_tol = 2 * tolerance + kEps;

  std::map<Id, TripTrack> open;                     // vehicle -> trip in progress
  std::map<Id, std::pair<double, double>> returns;  // vehicle -> feasible return interval
  std::map<Id, std::vector<std::pair<double, double>>> loads;  // task -> (time, qty)
  std::map<Id, double> delivered, last_arrival;
  std::map<Id, std::vector<LineRun>> runs_by_task;
  std::map<Id, std::map<Id, double>> lack_by_task;
  std::map<Id, double> stock = env.material_stock;
  std::set<Id> debited;

  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& st = plan.steps[i];
    const std::size_t n = st.index;
    if (st.index != i + 1)
      flag(n, "step-numbering", "expected step index " + std::to_string(i + 1));
    const auto& task = *task_of.at(action_task(st.action));

    if (const auto* sh = std::get_if<ShortageAction>(&st.action)) {
      if (!(sh->lack > 0)) flag(n, "quantity", "shortage amount must be > 0");
      stock[sh->material_id] += sh->lack;
      lack_by_task[sh->task_id][sh->material_id] += sh->lack;
      continue;
    }

    if (const auto* s = std::get_if<StartAction>(&st.action)) {
      if (s->time < -kEps) flag(n, "timestamp", "negative start time");
      if (!s->product_id.empty() && s->product_id != task.product_id)
        flag(n, "product-mismatch", "start for " + s->product_id + " but task needs " + task.product_id);
      const auto& line = env.lines.at(s->line_id);
      auto cap = line.capability.find(task.product_id);
      if (cap == line.capability.end()) {
        flag(n, "line-capability", s->line_id + " cannot produce " + task.product_id);
        continue;
      }
      for (const auto& r : runs_by_task[task.task_id])
        if (r.line == s->line_id)
          flag(n, "line-overlap", s->line_id + " started twice for " + task.task_id);
      runs_by_task[task.task_id].push_back(
          {s->line_id, task.task_id, task.product_id, s->time, 0, cap->second.rate, n});

      // Materials are drawn for the whole task at its first start.
      if (!debited.count(task.task_id)) {
        debited.insert(task.task_id);
        for (const auto& [m, per_unit] : env.products.at(task.product_id).bom) {
          const double demand = per_unit * task.amount;
          if (demand <= 0) continue;
          const double recorded = lack_by_task[task.task_id][m];
          const double before = stock[m] - recorded;
          const double needed = std::max(0.0, demand - before);
          if (demand > stock[m] + kEps * std::max(1.0, demand))
            flag(n, "material-ledger",
                 m + " stock goes negative for " + task.task_id + " (demand " + num(demand) +
                     ", stock " + num(stock[m]) + ")");
          else if (recorded > needed + 0.05 + kEps)
            flag(n, "shortage-mismatch",
                 "reported shortage of " + m + " for " + task.task_id + " is " + num(recorded) +
                     ", deficit is " + num(needed));
          stock[m] = std::max(0.0, stock[m] - demand);
        }
      }
      continue;
    }

    if (const auto* b = std::get_if<BackAction>(&st.action)) {
      auto it = open.find(b->vehicle_id);
      if (it == open.end() || it->second.next != 3 || it->second.task != b->task_id) {
        flag(n, "trip-structure", "back of " + b->vehicle_id + " without a completed unload");
        continue;
      }
      auto& tr = it->second;
      const double offset = tr.legs[0] + tr.legs[1] + tr.legs[2];
      tr.lo = std::max(tr.lo, b->time - offset - tol);
      tr.hi = std::min(tr.hi, b->time - offset + tol);
      if (tr.lo > tr.hi + kEps && !tr.timing_broken)
        flag(n, "timing", b->vehicle_id + " back at " + num(b->time) + " inconsistent with its trip");
      const double haul = env.distance_to(task.destination) / env.vehicles.at(b->vehicle_id).speed;
      returns[b->vehicle_id] = {tr.lo + offset + haul, tr.hi + offset + haul};
      open.erase(it);
      continue;
    }

    // load / transport / unload
    const CargoAction& c = std::visit(
        [](const auto& a) -> const CargoAction& {
          if constexpr (std::is_base_of_v<CargoAction, std::decay_t<decltype(a)>>) return a;
          else throw std::logic_error("unreachable");
        },
        st.action);
    if (!(c.quantity > 0)) flag(n, "quantity", "cargo quantity must be > 0");
    if (c.time < -kEps) flag(n, "timestamp", "negative time");
    if (c.product_id != task.product_id)
      flag(n, "product-mismatch", c.product_id + " moved for task needing " + task.product_id);
    const auto& veh = env.vehicles.at(c.vehicle_id);
    const auto& prod = env.products.at(c.product_id);
    const auto cap = veh.capacity_for(c.product_id);
    if (!cap || c.quantity > *cap + kEps)
      flag(n, "capacity",
           c.vehicle_id + " carries " + num(c.quantity) + " " + c.product_id + ", capacity " +
               num(cap.value_or(0)));
    const double haul = env.distance_to(task.destination) / veh.speed;

    if (std::holds_alternative<LoadAction>(st.action)) {
      if (open.count(c.vehicle_id)) {
        flag(n, "trip-structure", c.vehicle_id + " loads before finishing its previous trip");
        open.erase(c.vehicle_id);
      }
      if (auto r = returns.find(c.vehicle_id); r != returns.end() && c.time + tol < r->second.first - kEps)
        flag(n, "vehicle-overlap",
             c.vehicle_id + " loads at " + num(c.time) + " before returning at " + num(r->second.first));
      TripTrack tr;
      tr.load_step = n;
      tr.task = c.task_id;
      tr.product = c.product_id;
      tr.quantity = c.quantity;
      tr.next = 1;
      tr.lo = c.time - tol;
      tr.hi = c.time + tol;
      tr.legs[0] = c.quantity / prod.load_rate;
      tr.legs[1] = haul;
      tr.legs[2] = c.quantity / prod.unload_rate;
      open[c.vehicle_id] = tr;
      loads[c.task_id].push_back({c.time, c.quantity});
      continue;
    }

    const int leg = std::holds_alternative<TransportAction>(st.action) ? 1 : 2;
    auto it = open.find(c.vehicle_id);
    if (it == open.end() || it->second.next != leg || it->second.task != c.task_id ||
        it->second.product != c.product_id || std::abs(it->second.quantity - c.quantity) > kEps) {
      flag(n, "trip-structure",
           std::string(leg == 1 ? "transport" : "unload") + " of " + c.vehicle_id +
               " does not continue a matching trip");
      if (it != open.end()) open.erase(it);
      continue;
    }
    auto& tr = it->second;
    const double offset = leg == 1 ? tr.legs[0] : tr.legs[0] + tr.legs[1];
    tr.lo = std::max(tr.lo, c.time - offset - tol);
    tr.hi = std::min(tr.hi, c.time - offset + tol);
    if (tr.lo > tr.hi + kEps && !tr.timing_broken) {
      tr.timing_broken = true;
      flag(n, "timing", c.vehicle_id + " " + (leg == 1 ? "transport" : "unload") + " at " +
                            num(c.time) + " inconsistent with its load at step " +
                            std::to_string(tr.load_step));
    }
    tr.next = leg + 1;
    if (leg == 2) {
      delivered[c.task_id] += c.quantity;
      if (policy.deadline_check == DeadlineCheck::arrival)
        last_arrival[c.task_id] = std::max(last_arrival[c.task_id], c.time);
      else
        last_arrival[c.task_id] = std::max(last_arrival[c.task_id], c.time + c.quantity / prod.unload_rate);
    }
  }

  for (const auto& [v, tr] : open)
    flag(tr.load_step, "trip-structure", v + " trip starting at step " + std::to_string(tr.load_step) +
                                             " never completes");

  // Production: finish instants, inventory, line occupancy, budgets.
  std::vector<LineRun> all_runs;
  for (auto& [tid, runs] : runs_by_task) {
    const auto& task = *task_of.at(tid);
    std::vector<double> starts, rates;
    for (const auto& r : runs) {
      starts.push_back(r.start);
      rates.push_back(r.rate);
    }
    const double finish = solve_finish(starts, rates, task.amount);
    for (auto& r : runs) {
      r.finish = std::max(r.start, finish);
      all_runs.push_back(r);
    }
  }
  for (const auto& t : tasks) {
    auto lit = loads.find(t.task_id);
    if (lit == loads.end()) continue;
    auto ls = lit->second;
    std::stable_sort(ls.begin(), ls.end(), [](auto& a, auto& b) { return a.first < b.first; });
    const auto& runs = runs_by_task[t.task_id];
    double cum = 0;
    for (std::size_t k = 0; k < ls.size(); ++k) {
      cum += ls[k].second;
      const double probe = ls[k].first + pair_tol;
      double made = 0;
      for (const auto& r : runs) made += r.rate * std::max(0.0, std::min(probe, r.finish) - r.start);
      if (cum > made + 0.05 * (k + 1) + kEps) {
        flag(0, "inventory",
             t.task_id + ": " + num(cum) + " loaded by " + num(ls[k].first) + " but only " +
                 num(made) + " produced");
        break;
      }
    }
  }

  std::map<Id, std::vector<const LineRun*>> by_line;
  for (const auto& r : all_runs) by_line[r.line].push_back(&r);
  for (auto& [line, rs] : by_line) {
    std::stable_sort(rs.begin(), rs.end(), [](auto* a, auto* b) { return a->start < b->start; });
    for (std::size_t k = 1; k < rs.size(); ++k) {
      const auto& prev = *rs[k - 1];
      const auto& cur = *rs[k];
      if (prev.task == cur.task) continue;
      const double ready = prev.finish + (prev.product != cur.product ? policy.changeover_hours : 0.0);
      if (cur.start + pair_tol < ready)
        flag(cur.step, "line-overlap",
             line + " starts " + cur.task + " at " + num(cur.start) + " but is busy until " + num(ready));
    }
  }

  std::map<Id, double> utility_use;
  for (const auto& r : all_runs) {
    const auto& cap = env.lines.at(r.line).capability.at(r.product);
    for (const auto& [u, draw] : cap.utility_draw) utility_use[u] += draw * (r.finish - r.start);
  }
  for (const auto& [u, used] : utility_use) {
    const double total = env.utility_totals.count(u) ? env.utility_totals.at(u) : 0.0;
    if (used > total + kEps * std::max(1.0, total))
      flag(0, "utility-budget", u + " use " + num(used) + " exceeds total " + num(total));
  }
  for (const auto& probe : all_runs) {
    double workers = 0;
    for (const auto& r : all_runs)
      if (r.start <= probe.start && probe.start + pair_tol < r.finish)
        workers += env.lines.at(r.line).capability.at(r.product).workers;
    if (workers > env.worker_total + kEps) {
      flag(probe.step, "worker-capacity",
           num(workers) + " workers needed at " + num(probe.start) + ", total " + num(env.worker_total));
      break;
    }
  }

  // Shortages reported for tasks that never draw materials.
  for (const auto& [tid, lacks] : lack_by_task)
    if (!debited.count(tid))
      flag(0, "shortage-mismatch", "shortage reported for " + tid + " which produces nothing");

  // Per-task delivery and deadline.
  for (const auto& t : tasks) {
    TaskSummary sum;
    sum.task_id = t.task_id;
    sum.reported = plan.reported_infeasible(t.task_id);
    sum.delivered = delivered[t.task_id];
    sum.last_arrival = last_arrival[t.task_id];
    sum.deadline = t.deadline;
    sum.margin = t.deadline - sum.last_arrival;
    if (!sum.reported) {
      const std::size_t trips = loads.count(t.task_id) ? loads.at(t.task_id).size() : 0;
      if (std::abs(sum.delivered - t.amount) > 0.05 * static_cast<double>(trips) + 1e-6)
        flag(0, "delivered-total",
             t.task_id + " delivers " + num(sum.delivered) + " of " + num(t.amount));
      if (sum.last_arrival > t.deadline + tol + kEps)
        flag(0, "deadline",
             t.task_id + " last arrival " + num(sum.last_arrival) + " after deadline " + num(t.deadline));
    }
    rep.tasks.push_back(sum);
  }
  return rep;
}

inline std::string render_report_text(const ValidationReport& r) {
  std::ostringstream o;
  o << "verdict: " << (r.pass() ? "pass" : "fail") << "\n";
  for (const auto& v : r.violations)
    o << "violation " << (v.step ? "step " + std::to_string(v.step) : std::string("plan")) << " ["
      << v.rule << "] " << v.message << "\n";
  for (const auto& t : r.tasks) {
    o << "task " << t.task_id;
    if (t.reported) {
      o << " reported-infeasible\n";
      continue;
    }
    o << " delivered " << t.delivered << " last-arrival " << t.last_arrival << " deadline "
      << t.deadline << " margin " << t.margin << "\n";
  }
  return o.str();
}

inline nlohmann::json report_to_json(const ValidationReport& r) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : r.violations)
    v.push_back({{"step", x.step}, {"rule", x.rule}, {"message", x.message}});
  nlohmann::json t = nlohmann::json::array();
  for (const auto& x : r.tasks)
    t.push_back({{"task", x.task_id},
                 {"reported_infeasible", x.reported},
                 {"delivered", x.delivered},
                 {"last_arrival", x.last_arrival},
                 {"deadline", x.deadline},
                 {"margin", x.margin}});
  return {{"verdict", r.pass() ? "pass" : "fail"}, {"violations", v}, {"tasks", t}};
}

}  // namespace mobhtn
