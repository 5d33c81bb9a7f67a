#pragma once

// Test-side helpers shared by the unit suite and the acceptance runner:
// fixture loading, a random small-instance generator, and oracles that are
// written independently of the planner (invariant checker, ledger replay,
// brute-force dispatcher, exhaustive feasibility search).

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mobhtn/domain.hpp"
#include "mobhtn/io.hpp"
#include "mobhtn/timeline.hpp"

namespace testsupport {

using namespace mobhtn;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string data_path(const std::string& name) { return std::string(MOBHTN_DATA_DIR) + "/" + name; }
inline std::string golden_path(const std::string& name) {
  return std::string(MOBHTN_GOLDEN_DIR) + "/" + name;
}

struct Fixture {
  EnterpriseEnvironment env;
  std::vector<MobilizationTask> tasks;
};

inline Fixture load_fixture(const std::string& problem_file) {
  Fixture f;
  f.env = io::parse_domain(read_file(data_path("reference-domain.json")));
  const auto problem = io::parse_problem(read_file(data_path(problem_file)));
  f.env = io::bind_problem(std::move(f.env), problem);
  f.tasks = problem.tasks;
  return f;
}

// Splits text into trimmed non-empty lines.
inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    while (!l.empty() && (l.back() == '\r' || l.back() == ' ')) l.pop_back();
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

// Compares two plans step by step: same action kinds and identifiers,
// numbers within `tol`. Returns a description of the first difference.
inline std::string compare_plans(const Plan& a, const Plan& b, double tol = 0.05) {
  if (a.steps.size() != b.steps.size())
    return "step count " + std::to_string(a.steps.size()) + " vs " + std::to_string(b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto& x = a.steps[i].action;
    const auto& y = b.steps[i].action;
    const std::string at = "step " + std::to_string(i + 1) + ": ";
    if (x.index() != y.index()) return at + "action kind differs";
    if (a.steps[i].index != b.steps[i].index) return at + "index differs";
    auto near = [&](double p, double q) { return std::abs(p - q) <= tol + 1e-9; };
    bool same = true;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          const auto& q = std::get<T>(y);
          if constexpr (std::is_same_v<T, StartAction>) {
            same = p.line_id == q.line_id && p.task_id == q.task_id && near(p.time, q.time);
          } else if constexpr (std::is_same_v<T, BackAction>) {
            same = p.vehicle_id == q.vehicle_id && p.task_id == q.task_id &&
                   p.product_id == q.product_id && near(p.time, q.time);
          } else if constexpr (std::is_same_v<T, ShortageAction>) {
            same = p.task_id == q.task_id && p.material_id == q.material_id && near(p.lack, q.lack);
          } else {
            same = p.vehicle_id == q.vehicle_id && p.task_id == q.task_id &&
                   p.product_id == q.product_id && near(p.quantity, q.quantity) && near(p.time, q.time);
          }
        },
        x);
    if (!same) return at + io::render_step(a.steps[i]) + " vs " + io::render_step(b.steps[i]);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Random small instances

struct InstanceLimits {
  int max_lines = 3;
  int max_vehicles = 4;
  int max_tasks = 3;
  int max_materials = 4;
  int max_products = 2;
};

struct Instance {
  EnterpriseEnvironment env;
  std::vector<MobilizationTask> tasks;
};

inline Instance random_instance(std::mt19937& rng, InstanceLimits lim = {}) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto chance = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  auto name = [](char c, int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%c%03d", c, i);
    return std::string(buf);
  };

  Instance in;
  auto& env = in.env;
  env.site = "a1";
  const char* utilities[] = {"water", "electricity", "steam"};
  for (const char* u : utilities) env.utility_totals[u] = pick(2, 60) * 100;
  env.worker_total = pick(2, 10) * 10;

  const int nm = pick(1, lim.max_materials);
  for (int i = 1; i <= nm; ++i) env.material_stock[name('m', i)] = pick(0, 20) * 50;

  const int np = pick(1, lim.max_products);
  for (int i = 1; i <= np; ++i) {
    Product p;
    p.product_id = name('p', i);
    for (const auto& [m, s] : env.material_stock)
      if (chance(0.6)) p.bom[m] = pick(1, 4);
    if (p.bom.empty()) p.bom[env.material_stock.begin()->first] = pick(1, 4);
    p.load_rate = pick(2, 8) * 10;
    p.unload_rate = pick(2, 8) * 10;
    env.products[p.product_id] = p;
  }

  const int nl = pick(1, lim.max_lines);
  for (int i = 1; i <= nl; ++i) {
    ProductionLine l;
    l.line_id = name('l', i);
    for (const auto& [pid, p] : env.products) {
      if (!chance(0.75)) continue;
      LineCapability c;
      c.rate = pick(1, 8) * 5;
      c.cost_rate = pick(1, 10) * 5;
      for (const char* u : utilities)
        if (chance(0.7)) c.utility_draw[u] = pick(1, 10) * 10;
      c.workers = pick(1, 4) * 10;
      l.capability[pid] = c;
    }
    env.lines[l.line_id] = l;
  }

  const int nv = pick(1, lim.max_vehicles);
  for (int i = 1; i <= nv; ++i) {
    Vehicle v;
    v.vehicle_id = name('c', i);
    v.speed = pick(4, 10) * 10;
    v.trip_cost = pick(2, 20) * 5;
    for (const auto& [pid, p] : env.products)
      if (chance(0.75)) v.capacity[pid] = pick(2, 8) * 10;
    env.vehicles[v.vehicle_id] = v;
  }

  env.routes[{"a1", "b1"}] = pick(2, 12) * 10;
  env.routes[{"a1", "b2"}] = pick(2, 12) * 10;

  env.policy.line_policy = chance(0.5) ? LinePolicy::all_capable : LinePolicy::gamma_escalation;
  env.policy.changeover_hours = chance(0.5) ? 0.5 : 0.0;
  env.policy.deadline_check = chance(0.7) ? DeadlineCheck::arrival : DeadlineCheck::unload_complete;

  const int nt = pick(1, lim.max_tasks);
  for (int i = 1; i <= nt; ++i) {
    MobilizationTask t;
    t.task_id = name('t', i);
    t.product_id = name('p', pick(1, np));
    t.amount = pick(2, 20) * 10;
    t.deadline = pick(2, 30);
    t.destination = chance(0.5) ? "b1" : "b2";
    in.tasks.push_back(t);
  }
  env.validate();
  return in;
}

// ---------------------------------------------------------------------------
// Independent invariant checker for planner output. Works from the plan
// steps and the raw model only.

inline std::vector<std::string> check_invariants(const Plan& plan, const EnterpriseEnvironment& env,
                                                 const std::vector<MobilizationTask>& tasks) {
  std::vector<std::string> bad;
  auto fail = [&](const std::string& m) { bad.push_back(m); };
  auto tol = [](double x) { return 1e-6 * std::max(1.0, std::abs(x)); };

  std::map<Id, MobilizationTask> by_id;
  for (const auto& t : tasks) by_id[t.task_id] = t;

  std::map<Id, std::vector<StartAction>> starts;  // per task
  std::vector<StartAction> all_starts;
  std::map<Id, std::vector<const CargoAction*>> loads, unloads;
  std::map<Id, std::vector<std::pair<int, const void*>>> per_vehicle;
  for (const auto& s : plan.steps) {
    const Id& task = action_task(s.action);
    if (plan.reported_infeasible(task)) fail("step " + std::to_string(s.index) + " for infeasible task " + task);
    if (const auto* st = std::get_if<StartAction>(&s.action)) {
      starts[task].push_back(*st);
      all_starts.push_back(*st);
    } else if (const auto* ld = std::get_if<LoadAction>(&s.action)) {
      loads[task].push_back(ld);
    } else if (const auto* ul = std::get_if<UnloadAction>(&s.action)) {
      unloads[task].push_back(ul);
    }
  }

  for (const auto& t : tasks) {
    if (plan.reported_infeasible(t.task_id)) continue;
    const auto& product = env.product(t.product_id);

    // Joint finish and production total.
    const auto& ss = starts[t.task_id];
    if (ss.empty()) {
      fail(t.task_id + ": no production");
      continue;
    }
    double produced = 0;
    for (const auto& s : ss) {
      if (std::abs(s.finish - ss.front().finish) > 1e-9) fail(t.task_id + ": lines stop at different times");
      const double rate = env.line(s.line_id).capability.at(t.product_id).rate;
      if (std::abs(rate - s.rate) > 1e-12) fail(t.task_id + ": start rate differs from line rate");
      produced += rate * (s.finish - s.time);
    }
    if (std::abs(produced - t.amount) > tol(t.amount)) fail(t.task_id + ": produced " + std::to_string(produced));

    // Conservation and capacity.
    double loaded = 0, unloaded = 0;
    for (const auto* c : loads[t.task_id]) {
      loaded += c->quantity;
      const auto cap = env.vehicle(c->vehicle_id).capacity_for(t.product_id);
      if (!cap || c->quantity > *cap + 1e-9) fail(t.task_id + ": load over capacity on " + c->vehicle_id);
    }
    for (const auto* c : unloads[t.task_id]) unloaded += c->quantity;
    if (std::abs(loaded - t.amount) > tol(t.amount)) fail(t.task_id + ": loaded " + std::to_string(loaded));
    if (std::abs(unloaded - t.amount) > tol(t.amount)) fail(t.task_id + ": unloaded " + std::to_string(unloaded));

    // No negative inventory: loads in time order against cumulative output.
    std::vector<const CargoAction*> by_time = loads[t.task_id];
    std::stable_sort(by_time.begin(), by_time.end(),
                     [](auto* a, auto* b) { return a->time < b->time; });
    double cum = 0;
    for (const auto* c : by_time) {
      cum += c->quantity;
      double made = 0;
      for (const auto& s : ss) made += s.rate * std::clamp(c->time - s.time, 0.0, s.finish - s.time);
      if (cum > made + tol(made)) fail(t.task_id + ": load at " + std::to_string(c->time) + " before output exists");
    }

    // Deadline.
    double last = 0;
    for (const auto& s : plan.steps) {
      if (action_task(s.action) != t.task_id) continue;
      if (env.policy.deadline_check == DeadlineCheck::arrival) {
        if (const auto* u = std::get_if<UnloadAction>(&s.action)) last = std::max(last, u->time);
      } else if (const auto* b = std::get_if<BackAction>(&s.action)) {
        last = std::max(last, b->time);
      }
    }
    if (last > t.deadline + 1e-9) fail(t.task_id + ": late " + std::to_string(last));
    (void)product;
  }

  // Line non-overlap and changeover, in time order per line.
  std::map<Id, std::vector<StartAction>> per_line;
  for (const auto& s : all_starts) per_line[s.line_id].push_back(s);
  for (auto& [l, v] : per_line) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
    for (std::size_t i = 1; i < v.size(); ++i) {
      const double gap = v[i].product_id == v[i - 1].product_id ? 0 : env.policy.changeover_hours;
      if (v[i].time + 1e-9 < v[i - 1].finish + gap) fail(l + ": runs overlap or skip changeover");
    }
  }

  // Worker concurrency and utility totals.
  for (const auto& probe : all_starts) {
    double w = 0;
    for (const auto& s : all_starts)
      if (s.time <= probe.time + 1e-12 && probe.time < s.finish - 1e-12)
        w += env.line(s.line_id).capability.at(s.product_id).workers;
    if (w > env.worker_total + 1e-9) fail("workers " + std::to_string(w) + " at " + std::to_string(probe.time));
  }
  std::map<Id, double> used;
  for (const auto& s : all_starts)
    for (const auto& [u, d] : env.line(s.line_id).capability.at(s.product_id).utility_draw)
      used[u] += d * (s.finish - s.time);
  for (const auto& [u, v] : used)
    if (v > env.utility_totals.at(u) + tol(v)) fail(u + " over budget");

  // Vehicle trips: leg order, durations, and no overlap between trips.
  std::map<Id, std::vector<const Action*>> legs;
  for (const auto& s : plan.steps)
    if (!std::holds_alternative<StartAction>(s.action) && !std::holds_alternative<ShortageAction>(s.action))
      legs[std::visit([](const auto& a) -> Id {
        if constexpr (requires { a.vehicle_id; }) return a.vehicle_id;
        else return {};
      }, s.action)].push_back(&s.action);
  for (const auto& [v, seq] : legs) {
    const auto& veh = env.vehicle(v);
    double free = 0;
    if (seq.size() % 4 != 0) {
      fail(v + ": incomplete trip");
      continue;
    }
    std::vector<std::array<const Action*, 4>> trips;
    for (std::size_t i = 0; i < seq.size(); i += 4) trips.push_back({seq[i], seq[i + 1], seq[i + 2], seq[i + 3]});
    std::sort(trips.begin(), trips.end(), [](const auto& a, const auto& b) {
      return std::get<LoadAction>(*a[0]).time < std::get<LoadAction>(*b[0]).time;
    });
    for (const auto& tr : trips) {
      const auto* ld = std::get_if<LoadAction>(tr[0]);
      const auto* tp = std::get_if<TransportAction>(tr[1]);
      const auto* ul = std::get_if<UnloadAction>(tr[2]);
      const auto* bk = std::get_if<BackAction>(tr[3]);
      if (!ld || !tp || !ul || !bk) {
        fail(v + ": legs out of order");
        break;
      }
      const auto& task = by_id.at(ld->task_id);
      const auto& p = env.product(task.product_id);
      const double dist = env.distance_to(task.destination);
      auto near = [](double a, double b) { return std::abs(a - b) <= 1e-6; };
      if (ld->time + 1e-9 < free) fail(v + ": trips overlap");
      if (!near(tp->time, ld->time + ld->quantity / p.load_rate) ||
          !near(ul->time, tp->time + dist / veh.speed) ||
          !near(bk->time, ul->time + ul->quantity / p.unload_rate))
        fail(v + ": leg durations wrong");
      free = bk->time + dist / veh.speed;
    }
  }
  return bad;
}

// Capable vehicles ranked by speed/trip_cost, ties by id (own ranking).
inline std::vector<Id> ranked_vehicles(const EnterpriseEnvironment& env, const Id& product) {
  std::vector<std::pair<double, Id>> v;
  for (const auto& [id, veh] : env.vehicles)
    if (veh.capacity.count(product)) v.push_back({veh.speed / veh.trip_cost, id});
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<Id> out;
  for (const auto& x : v) out.push_back(x.second);
  return out;
}

// Brute-force material ledger: tasks in urgency order (own sort), skipping
// the ones reported infeasible.
inline std::vector<ShortageRecord> replay_shortages(const EnterpriseEnvironment& env,
                                                    std::vector<MobilizationTask> tasks,
                                                    const Plan& plan) {
  std::sort(tasks.begin(), tasks.end(), [](const auto& a, const auto& b) {
    // a before b iff a.amount/a.deadline > b.amount/b.deadline, exact in
    // integers for the generated instances.
    const double l = a.amount * b.deadline, r = b.amount * a.deadline;
    if (l != r) return l > r;
    return a.task_id < b.task_id;
  });
  std::map<Id, double> stock = env.material_stock;
  std::vector<ShortageRecord> out;
  for (const auto& t : tasks) {
    if (plan.reported_infeasible(t.task_id)) continue;
    for (const auto& [m, per] : env.product(t.product_id).bom) {
      if (per <= 0) continue;
      const double demand = per * t.amount;
      const double lack = std::max(0.0, demand - stock[m]);
      if (lack > 0) out.push_back({t.task_id, m, lack});
      stock[m] = stock[m] + lack - demand;
    }
  }
  return out;
}

// Minimum last arrival over every claim order: at each claim any pool
// member may take min(capacity, remaining).
inline double best_dispatch(const std::vector<PoolMember>& pool, const ProductionSchedule& schedule,
                            double total, double distance, const Product& product) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> free;
  for (const auto& m : pool) free.push_back(m.free_at);
  std::function<void(double, double)> go = [&](double claimed, double last) {
    if (last >= best) return;
    if (total - claimed <= 1e-9) {
      best = last;
      return;
    }
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto& v = *pool[i].vehicle;
      const double q = std::min(*v.capacity_for(product.product_id), total - claimed);
      const double ready = schedule.available_at(std::min(claimed + q, schedule.total));
      const double load = std::max(ready, free[i]);
      const double arrive = load + q / product.load_rate + distance / v.speed;
      const double back = arrive + q / product.unload_rate + distance / v.speed;
      const double saved = free[i];
      free[i] = back;
      go(claimed + q, std::max(last, arrive));
      free[i] = saved;
    }
  };
  go(0, 0);
  return best;
}

// Exhaustive feasibility over the decision space the domain exposes (line
// sets allowed by the policy, gamma-prefix vehicle pools), for every task
// in urgency order. Written as plain nested enumeration over a small
// private state, independent of the HTN search.
inline bool exhaustive_feasible(const EnterpriseEnvironment& env, std::vector<MobilizationTask> tasks) {
  std::sort(tasks.begin(), tasks.end(), [](const auto& a, const auto& b) {
    const double l = a.amount * b.deadline, r = b.amount * a.deadline;
    if (l != r) return l > r;
    return a.task_id < b.task_id;
  });
  struct Res { double start, end, workers; };
  struct S {
    std::map<Id, double> line_free, vehicle_free, utilities;
    std::map<Id, Id> last_product;
    std::vector<Res> workers;
  };
  auto rank = [](std::vector<std::pair<double, Id>> v) {
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::vector<Id> ids;
    for (const auto& x : v) ids.push_back(x.second);
    return ids;
  };

  std::function<bool(std::size_t, const S&)> go = [&](std::size_t k, const S& s) {
    if (k == tasks.size()) return true;
    const auto& t = tasks[k];
    const auto& product = env.product(t.product_id);
    std::vector<std::pair<double, Id>> lr, vr;
    for (const auto& [id, l] : env.lines)
      if (l.produces(t.product_id)) {
        const auto& c = l.capability.at(t.product_id);
        lr.push_back({c.rate / c.cost_rate, id});
      }
    for (const auto& [id, v] : env.vehicles)
      if (v.capacity_for(t.product_id)) vr.push_back({v.speed / v.trip_cost, id});
    const auto lines = rank(lr), vehicles = rank(vr);
    std::vector<std::vector<Id>> line_sets;
    if (env.policy.line_policy == LinePolicy::all_capable) {
      if (!lines.empty()) line_sets.push_back(lines);
    } else {
      for (std::size_t n = 1; n <= lines.size(); ++n) line_sets.emplace_back(lines.begin(), lines.begin() + n);
    }
    for (const auto& set : line_sets) {
      std::vector<LineStart> ls;
      for (const auto& id : set) {
        double st = s.line_free.count(id) ? s.line_free.at(id) : 0;
        if (s.last_product.count(id) && s.last_product.at(id) != t.product_id) st += env.policy.changeover_hours;
        ls.push_back({id, st, env.line(id).capability.at(t.product_id).rate});
      }
      const auto sched = joint_finish(ls, t.amount);
      S n = s;
      bool ok = true;
      for (const auto& seg : sched.segments) {
        const auto& c = env.line(seg.line_id).capability.at(t.product_id);
        for (const auto& [u, d] : c.utility_draw) {
          n.utilities[u] -= d * (seg.end - seg.start);
          if (n.utilities[u] < -1e-9) ok = false;
        }
        n.workers.push_back({seg.start, seg.end, c.workers});
        n.line_free[seg.line_id] = seg.end;
        n.last_product[seg.line_id] = t.product_id;
      }
      for (const auto& p : n.workers) {
        double w = 0;
        for (const auto& r : n.workers)
          if (r.start <= p.start && p.start < r.end) w += r.workers;
        if (w > env.worker_total + 1e-9) ok = false;
      }
      if (!ok) continue;
      std::vector<PoolMember> pool;
      for (const auto& vid : vehicles) {
        pool.push_back({&env.vehicle(vid), n.vehicle_free.count(vid) ? n.vehicle_free.at(vid) : 0.0});
        const auto d = simulate_dispatch(pool, sched, t.amount, env.distance_to(t.destination), product);
        const double when = env.policy.deadline_check == DeadlineCheck::arrival ? d.last_arrival
                                                                                : d.last_unload_complete;
        if (when > t.deadline + 1e-9) continue;
        S m = n;
        for (const auto& tr : d.trips) m.vehicle_free[tr.vehicle_id] = std::max(m.vehicle_free[tr.vehicle_id], tr.return_at);
        if (go(k + 1, m)) return true;
      }
    }
    return false;
  };
  S s0;
  s0.utilities = env.utility_totals;
  return go(0, s0);
}

// A random plan for render/parse round trips; values need not be feasible.
inline Plan random_plan(std::mt19937& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto real = [&](double hi) { return std::uniform_real_distribution<double>(0, hi)(rng); };
  auto id = [](char c, int i) {
    char b[8];
    std::snprintf(b, sizeof b, "%c%03d", c, i);
    return std::string(b);
  };
  Plan p;
  const int n = pick(1, 30);
  for (int i = 0; i < n; ++i) {
    const Id task = id('t', pick(1, 3)), product = id('p', pick(1, 3)), vehicle = id('c', pick(1, 8));
    switch (pick(0, 5)) {
      case 0: p.steps.push_back({0, StartAction{id('l', pick(1, 3)), task, "", real(50)}}); break;
      case 1: p.steps.push_back({0, LoadAction{{vehicle, task, product, 1 + real(80), real(50)}}}); break;
      case 2: p.steps.push_back({0, TransportAction{{vehicle, task, product, 1 + real(80), real(50)}}}); break;
      case 3: p.steps.push_back({0, UnloadAction{{vehicle, task, product, 1 + real(80), real(50)}}}); break;
      case 4: p.steps.push_back({0, BackAction{vehicle, task, product, real(50)}}); break;
      default: p.steps.push_back({0, ShortageAction{task, id('m', pick(1, 4)), 0.1 + real(500)}}); break;
    }
  }
  renumber(p);
  if (pick(0, 1)) p.infeasible.push_back({id('t', pick(4, 6)), InfeasibleReason::deadline});
  return p;
}

// ---------------------------------------------------------------------------
// Fixture provenance: each table cell's JSON pointer must resolve in the raw
// file and in the parsed model to the recorded value; "-" cells must be
// absent from both.

// Value of a domain-file JSON pointer as seen through the parsed model.
inline std::optional<double> model_cell(const EnterpriseEnvironment& env, const std::string& pointer) {
  std::vector<std::string> k;
  for (std::size_t pos = 1; pos <= pointer.size();) {
    const auto next = pointer.find('/', pos);
    k.push_back(pointer.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    pos = next == std::string::npos ? pointer.size() + 1 : next + 1;
  }
  auto in = [](const auto& m, const std::string& key) -> std::optional<double> {
    auto it = m.find(key);
    if (it == m.end()) return std::nullopt;
    return it->second;
  };
  if (k.size() == 1 && k[0] == "workers") return env.worker_total;
  if (k.size() == 2 && k[0] == "utilities") return in(env.utility_totals, k[1]);
  if (k.size() == 2 && k[0] == "materials") return in(env.material_stock, k[1]);
  if (k.size() >= 3 && k[0] == "products") {
    auto it = env.products.find(k[1]);
    if (it == env.products.end()) return std::nullopt;
    if (k[2] == "load_rate") return it->second.load_rate;
    if (k[2] == "unload_rate") return it->second.unload_rate;
    if (k[2] == "bom" && k.size() == 4) return in(it->second.bom, k[3]);
    return std::nullopt;
  }
  if (k.size() >= 3 && k[0] == "lines") {
    auto it = env.lines.find(k[1]);
    if (it == env.lines.end()) return std::nullopt;
    auto c = it->second.capability.find(k[2]);
    if (c == it->second.capability.end()) return std::nullopt;
    if (k.size() == 3) return c->second.rate;  // presence probe
    if (k[3] == "rate") return c->second.rate;
    if (k[3] == "cost_rate") return c->second.cost_rate;
    if (k[3] == "workers") return c->second.workers;
    if (k[3] == "utility_draw" && k.size() == 5) return in(c->second.utility_draw, k[4]);
    return std::nullopt;
  }
  if (k.size() >= 3 && k[0] == "vehicles") {
    auto it = env.vehicles.find(k[1]);
    if (it == env.vehicles.end()) return std::nullopt;
    if (k[2] == "speed") return it->second.speed;
    if (k[2] == "trip_cost") return it->second.trip_cost;
    if (k[2] == "capacity" && k.size() == 4) return in(it->second.capacity, k[3]);
    return std::nullopt;
  }
  if (k.size() == 3 && k[0] == "routes") {
    auto it = env.routes.find({k[1], k[2]});
    if (it == env.routes.end()) return std::nullopt;
    return it->second;
  }
  return std::nullopt;
}

struct ProvenanceResult {
  std::size_t cells = 0, absent = 0;
  std::vector<std::string> problems;
};

inline ProvenanceResult check_provenance() {
  using nlohmann::json;
  ProvenanceResult r;
  const json prov = json::parse(read_file(data_path("provenance.json")));
  const std::string text = read_file(data_path("reference-domain.json"));
  const json raw = json::parse(text);
  const auto env = io::parse_domain(text);
  for (const auto& c : prov.at("cells")) {
    ++r.cells;
    const std::string ptr = c.at("pointer");
    const double want = c.at("value");
    const json::json_pointer jp(ptr);
    if (!raw.contains(jp) || raw.at(jp).get<double>() != want)
      r.problems.push_back(ptr + ": file value differs from " + c.at("cell").get<std::string>());
    const auto got = model_cell(env, ptr);
    if (!got || *got != want) r.problems.push_back(ptr + ": parsed model differs");
  }
  for (const auto& c : prov.at("absent")) {
    ++r.absent;
    const std::string ptr = c.at("pointer");
    if (raw.contains(json::json_pointer(ptr))) r.problems.push_back(ptr + ": present in file");
    if (model_cell(env, ptr)) r.problems.push_back(ptr + ": present in parsed model");
  }
  return r;
}

}  // namespace testsupport
