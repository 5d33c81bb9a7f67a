#pragma once

// The mobilization planning domain: world state, the primitive operators
// (start, load, transport, unload, back, ResourceShortage) and the two
// decomposition layers
//
//   mobilize(task) --engage-lines--> ResourceShortage*, deliver(task, lines)
//   deliver(task, lines) --dispatch-pool--> start/load/transport/unload/back
//
// Line engagements and vehicle pools are the choice points; both are
// ordered by their gamma ratio.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mobhtn/environment.hpp"
#include "mobhtn/gamma.hpp"
#include "mobhtn/htn.hpp"
#include "mobhtn/plan.hpp"
#include "mobhtn/shortage.hpp"
#include "mobhtn/timeline.hpp"

namespace mobhtn {

struct WorkerReservation {
  Id line_id;
  double start = 0;
  double end = 0;
  double workers = 0;

  friend bool operator==(const WorkerReservation&, const WorkerReservation&) = default;
};

// A round trip that has been started but not finished.
struct TripInProgress {
  enum class Stage { loaded, transported, unloaded };
  Id task_id;
  Id product_id;
  double quantity = 0;
  Stage stage = Stage::loaded;
  double next_at = 0;  // earliest start of the next leg

  friend bool operator==(const TripInProgress&, const TripInProgress&) = default;
};

struct WorldState {
  MaterialLedger ledger;
  std::map<Id, double> utility_remaining;
  std::vector<WorkerReservation> worker_reservations;
  std::map<Id, double> line_free_at;
  std::map<Id, Id> line_last_product;  // absent = never used
  std::map<Id, double> vehicle_free_at;
  std::map<Id, TripInProgress> trips_in_progress;
  std::map<Id, ProductionSchedule> inventory_streams;  // per task
  std::map<Id, double> claimed;                        // per task, loaded so far
  std::map<Id, double> delivered;                      // per task, unloaded so far

  static WorldState initial(const EnterpriseEnvironment& env) {
    WorldState s;
    s.ledger = MaterialLedger(env.material_stock);
    s.utility_remaining = env.utility_totals;
    for (const auto& [id, l] : env.lines) s.line_free_at[id] = 0;
    for (const auto& [id, v] : env.vehicles) s.vehicle_free_at[id] = 0;
    return s;
  }

  double line_ready(const Id& line, const Id& product, double changeover) const {
    double t = line_free_at.count(line) ? line_free_at.at(line) : 0.0;
    auto it = line_last_product.find(line);
    if (it != line_last_product.end() && it->second != product) t += changeover;
    return t;
  }

  double produced_by(const Id& task, double t) const {
    auto it = inventory_streams.find(task);
    return it == inventory_streams.end() ? 0.0 : it->second.produced_by(t);
  }

  // Exact textual image of the state; equal fingerprints mean equal states.
  std::string fingerprint() const {
    std::ostringstream o;
    o << std::hexfloat;
    for (const auto& [m, v] : ledger.stock()) o << "s:" << m << '=' << v << ';';
    for (const auto& [m, v] : ledger.virtualized()) o << "v:" << m << '=' << v << ';';
    o << "h:" << ledger.history().size() << ';';
    for (const auto& [u, v] : utility_remaining) o << "u:" << u << '=' << v << ';';
    for (const auto& r : worker_reservations)
      o << "w:" << r.line_id << ',' << r.start << ',' << r.end << ',' << r.workers << ';';
    for (const auto& [l, v] : line_free_at) o << "lf:" << l << '=' << v << ';';
    for (const auto& [l, p] : line_last_product) o << "lp:" << l << '=' << p << ';';
    for (const auto& [c, v] : vehicle_free_at) o << "vf:" << c << '=' << v << ';';
    for (const auto& [c, t] : trips_in_progress)
      o << "tp:" << c << ',' << t.task_id << ',' << t.quantity << ',' << int(t.stage) << ','
        << t.next_at << ';';
    for (const auto& [task, sch] : inventory_streams) {
      o << "is:" << task << ',' << sch.total;
      for (const auto& seg : sch.segments)
        o << '[' << seg.line_id << ',' << seg.start << ',' << seg.end << ',' << seg.rate << ']';
      o << ';';
    }
    for (const auto& [t, v] : claimed) o << "c:" << t << '=' << v << ';';
    for (const auto& [t, v] : delivered) o << "d:" << t << '=' << v << ';';
    return o.str();
  }

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

// Highest simultaneous worker count over a set of reservations.
inline double peak_workers(const std::vector<WorkerReservation>& rs) {
  double peak = 0;
  for (const auto& probe : rs) {
    double sum = 0;
    for (const auto& r : rs)
      if (r.start <= probe.start && probe.start < r.end) sum += r.workers;
    peak = std::max(peak, sum);
  }
  return peak;
}

// ---------------------------------------------------------------------------
// Production

// One way of producing a task's amount: the lines that run and their schedule.
struct Engagement {
  std::vector<Id> lines;  // gamma order
  ProductionSchedule schedule;
  double score = 0;  // gamma of the least efficient engaged line
};

inline bool fits_budgets(const Engagement& e, const Id& product, const WorldState& s,
                         const EnterpriseEnvironment& env) {
  std::map<Id, double> use;
  auto reservations = s.worker_reservations;
  for (const auto& seg : e.schedule.segments) {
    const auto& cap = env.line(seg.line_id).capability.at(product);
    for (const auto& [u, draw] : cap.utility_draw) use[u] += draw * (seg.end - seg.start);
    reservations.push_back({seg.line_id, seg.start, seg.end, cap.workers});
  }
  for (const auto& [u, need] : use) {
    auto it = s.utility_remaining.find(u);
    const double have = it == s.utility_remaining.end() ? 0.0 : it->second;
    if (need > have + 1e-9 * std::max(1.0, need)) return false;
  }
  return peak_workers(reservations) <= env.worker_total + 1e-9;
}

inline ProductionSchedule schedule_lines(const std::vector<Id>& lines, const MobilizationTask& task,
                                         const WorldState& s, const EnterpriseEnvironment& env) {
  std::vector<LineStart> starts;
  for (const auto& id : lines) {
    const auto& cap = env.line(id).capability.at(task.product_id);
    starts.push_back({id, s.line_ready(id, task.product_id, env.policy.changeover_hours), cap.rate});
  }
  return joint_finish(std::move(starts), task.amount);
}

/// Candidate line engagements in the order the planner tries them. Under
/// all-capable there is one; under gamma-escalation there is one per
/// gamma-ordered prefix. Engagements that break a utility or worker budget
/// are dropped.
inline std::vector<Engagement> engagement_options(const MobilizationTask& task, const WorldState& s,
                                                  const EnterpriseEnvironment& env) {
  const auto capable = capable_lines(env, task.product_id);
  std::vector<std::vector<const ProductionLine*>> sets;
  if (env.policy.line_policy == LinePolicy::all_capable) {
    if (!capable.empty()) sets.push_back(capable);
  } else {
    for (std::size_t k = 1; k <= capable.size(); ++k)
      sets.emplace_back(capable.begin(), capable.begin() + static_cast<std::ptrdiff_t>(k));
  }

  std::vector<Engagement> out;
  for (const auto& set : sets) {
    std::vector<Id> ids;
    for (const auto* l : set) ids.push_back(l->line_id);
    Engagement e;
    e.schedule = schedule_lines(ids, task, s, env);
    for (const auto* l : set) {
      const bool runs = std::any_of(e.schedule.segments.begin(), e.schedule.segments.end(),
                                    [&](const auto& seg) { return seg.line_id == l->line_id; });
      if (runs) {
        e.lines.push_back(l->line_id);
        e.score = gamma_line(*l, task.product_id);
      }
    }
    const bool duplicate = std::any_of(out.begin(), out.end(),
                                       [&](const auto& o) { return o.lines == e.lines; });
    if (!duplicate && fits_budgets(e, task.product_id, s, env)) out.push_back(std::move(e));
  }
  return out;
}

// Start actions in emission order for a schedule: by start time, then
// larger rate first, then id.
inline std::vector<StartAction> start_actions(const MobilizationTask& task,
                                              const ProductionSchedule& schedule) {
  std::vector<StartAction> out;
  for (const auto& seg : schedule.segments)
    out.push_back({seg.line_id, task.task_id, task.product_id, seg.start, seg.end, seg.rate});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.rate != b.rate) return a.rate > b.rate;
    return a.line_id < b.line_id;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Transport

inline double arrival_measure(const DispatchResult& d, DeadlineCheck check) {
  return check == DeadlineCheck::arrival ? d.last_arrival : d.last_unload_complete;
}

struct PoolOption {
  std::vector<Id> vehicles;  // gamma order
  DispatchResult dispatch;
  double score = 0;  // gamma of the last vehicle added
};

/// Vehicle pools that meet the task deadline, smallest gamma-prefix first.
inline std::vector<PoolOption> pool_options(const MobilizationTask& task,
                                            const ProductionSchedule& schedule,
                                            const WorldState& s,
                                            const EnterpriseEnvironment& env) {
  const auto capable = capable_vehicles(env, task.product_id);
  const auto& product = env.product(task.product_id);
  const double distance = env.distance_to(task.destination);
  std::vector<PoolOption> out;
  std::vector<PoolMember> pool;
  PoolOption opt;
  for (const auto* v : capable) {
    const auto it = s.vehicle_free_at.find(v->vehicle_id);
    pool.push_back({v, it == s.vehicle_free_at.end() ? 0.0 : it->second});
    opt.vehicles.push_back(v->vehicle_id);
    opt.score = gamma_vehicle(*v);
    opt.dispatch = simulate_dispatch(pool, schedule, task.amount, distance, product, task.task_id);
    if (arrival_measure(opt.dispatch, env.policy.deadline_check) <= task.deadline + kTimeEps)
      out.push_back(opt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// HTN encoding

namespace detail {

inline htn::Task mobilize_task(const MobilizationTask& t) {
  return {"mobilize", {t.task_id, t.deadline, t.amount, t.product_id, t.destination}};
}

inline MobilizationTask task_from_args(const htn::Task& t) {
  return {t.str(0), t.num(1), t.num(2), t.str(3), t.str(4)};
}

inline std::string join(const std::vector<Id>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : "+") + id;
  return s;
}

inline std::string numbered(const char* prefix, std::size_t k, const std::vector<Id>& ids) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s-%02zu:", prefix, k);
  return buf + join(ids);
}

inline htn::Task cargo_task(const char* name, const TripSchedule& trip, double time) {
  return {name, {trip.vehicle_id, trip.task_id, trip.product_id, trip.quantity, time}};
}

inline bool close_enough(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace detail

using MobilizationDomain = htn::Domain<WorldState, Action>;

inline const char* operator_name(const Action& a) {
  static constexpr const char* names[] = {"!start",  "!load", "!transport",
                                          "!unload", "!back", "!ResourceShortage"};
  return names[a.index()];
}

/// Builds the operator and method library over `env` for a set of goal
/// tasks (their destinations fix the haul distances). The environment must
/// outlive the returned domain.
inline MobilizationDomain build_domain(const EnterpriseEnvironment& env,
                                       const std::vector<MobilizationTask>& tasks = {}) {
  using detail::close_enough;
  MobilizationDomain d;
  const EnterpriseEnvironment* e = &env;
  auto distances = std::make_shared<const std::map<Id, double>>([&] {
    std::map<Id, double> m;
    for (const auto& t : tasks) m[t.task_id] = env.distance_to(t.destination);
    return m;
  }());
  auto amounts = std::make_shared<const std::map<Id, double>>([&] {
    std::map<Id, double> m;
    for (const auto& t : tasks) m[t.task_id] = t.amount;
    return m;
  }());
  // Material debited by a start: the whole task demand on its first start,
  // nothing on later ones. Tasks unknown to the domain debit per line.
  auto debit_units = [amounts](const WorldState& s, const StartAction& x) {
    auto it = amounts->find(x.task_id);
    if (it == amounts->end()) return x.quantity();
    return s.inventory_streams.count(x.task_id) ? 0.0 : it->second;
  };
  auto haul = [distances](const Id& task) {
    auto it = distances->find(task);
    if (it == distances->end()) throw InputError("no destination known for task " + task);
    return it->second;
  };

  // !ResourceShortage task material lack
  d.add_operator({"!ResourceShortage",
                  [](const WorldState&, const htn::Task& t) {
                    return std::vector<Action>{ShortageAction{t.str(0), t.str(1), t.num(2)}};
                  },
                  [](const WorldState&, const Action& a) {
                    return std::get<ShortageAction>(a).lack > 0;
                  },
                  [](const WorldState& s, const Action& a) {
                    const auto& x = std::get<ShortageAction>(a);
                    WorldState n = s;
                    n.ledger.virtualize(x.task_id, x.material_id, x.lack);
                    return n;
                  }});

  // !start line task product time finish rate
  d.add_operator(
      {"!start",
       [](const WorldState&, const htn::Task& t) {
         return std::vector<Action>{
             StartAction{t.str(0), t.str(1), t.str(2), t.num(3), t.num(4), t.num(5)}};
       },
       [e, debit_units](const WorldState& s, const Action& a) {
         const auto& x = std::get<StartAction>(a);
         auto lit = e->lines.find(x.line_id);
         if (lit == e->lines.end() || !lit->second.produces(x.product_id)) return false;
         const auto& cap = lit->second.capability.at(x.product_id);
         if (!close_enough(cap.rate, x.rate) || !(x.finish > x.time)) return false;
         if (x.time + kTimeEps < s.line_ready(x.line_id, x.product_id, e->policy.changeover_hours))
           return false;
         const double hours = x.finish - x.time;
         for (const auto& [u, draw] : cap.utility_draw) {
           auto it = s.utility_remaining.find(u);
           if (it == s.utility_remaining.end() || draw * hours > it->second + 1e-9) return false;
         }
         for (const auto& [m, per_unit] : e->product(x.product_id).bom)
           if (!s.ledger.can_debit(m, per_unit * debit_units(s, x))) return false;
         auto rs = s.worker_reservations;
         rs.push_back({x.line_id, x.time, x.finish, cap.workers});
         return peak_workers(rs) <= e->worker_total + 1e-9;
       },
       [e, debit_units](const WorldState& s, const Action& a) {
         const auto& x = std::get<StartAction>(a);
         const auto& cap = e->line(x.line_id).capability.at(x.product_id);
         WorldState n = s;
         const double hours = x.finish - x.time;
         for (const auto& [u, draw] : cap.utility_draw)
           n.utility_remaining[u] = std::max(0.0, n.utility_remaining[u] - draw * hours);
         n.worker_reservations.push_back({x.line_id, x.time, x.finish, cap.workers});
         n.line_free_at[x.line_id] = x.finish;
         n.line_last_product[x.line_id] = x.product_id;
         const double units = debit_units(s, x);
         for (const auto& [m, per_unit] : e->product(x.product_id).bom)
           if (per_unit > 0 && units > 0) n.ledger.debit(x.task_id, m, per_unit * units);
         auto& stream = n.inventory_streams[x.task_id];
         stream.segments.push_back({x.line_id, x.time, x.finish, x.rate});
         stream.total += x.quantity();
         return n;
       }});

  // !load vehicle task product quantity time
  d.add_operator({"!load",
                  [](const WorldState&, const htn::Task& t) {
                    return std::vector<Action>{
                        LoadAction{{t.str(0), t.str(1), t.str(2), t.num(3), t.num(4)}}};
                  },
                  [e](const WorldState& s, const Action& a) {
                    const auto& x = std::get<LoadAction>(a);
                    auto vit = e->vehicles.find(x.vehicle_id);
                    if (vit == e->vehicles.end()) return false;
                    const auto cap = vit->second.capacity_for(x.product_id);
                    if (!cap || !(x.quantity > 0) || x.quantity > *cap + 1e-9) return false;
                    if (s.trips_in_progress.count(x.vehicle_id)) return false;
                    auto fit = s.vehicle_free_at.find(x.vehicle_id);
                    if (fit != s.vehicle_free_at.end() && x.time + kTimeEps < fit->second)
                      return false;
                    const double already = s.claimed.count(x.task_id) ? s.claimed.at(x.task_id) : 0;
                    const double made = s.produced_by(x.task_id, x.time);
                    return already + x.quantity <= made + 1e-9 * std::max(1.0, made);
                  },
                  [e](const WorldState& s, const Action& a) {
                    const auto& x = std::get<LoadAction>(a);
                    WorldState n = s;
                    n.claimed[x.task_id] += x.quantity;
                    n.trips_in_progress[x.vehicle_id] = {
                        x.task_id, x.product_id, x.quantity, TripInProgress::Stage::loaded,
                        x.time + x.quantity / e->product(x.product_id).load_rate};
                    return n;
                  }});

  // Shared applicability for the later legs of a trip.
  auto leg_ok = [](const WorldState& s, const CargoAction& x, TripInProgress::Stage expect) {
    auto it = s.trips_in_progress.find(x.vehicle_id);
    if (it == s.trips_in_progress.end()) return false;
    const auto& tr = it->second;
    return tr.stage == expect && tr.task_id == x.task_id && tr.product_id == x.product_id &&
           close_enough(tr.quantity, x.quantity) && x.time + kTimeEps >= tr.next_at;
  };


  d.add_operator({"!transport",
                  [](const WorldState&, const htn::Task& t) {
                    return std::vector<Action>{
                        TransportAction{{t.str(0), t.str(1), t.str(2), t.num(3), t.num(4)}}};
                  },
                  [leg_ok](const WorldState& s, const Action& a) {
                    return leg_ok(s, std::get<TransportAction>(a), TripInProgress::Stage::loaded);
                  },
                  [e, haul](const WorldState& s, const Action& a) {
                    const auto& x = std::get<TransportAction>(a);
                    WorldState n = s;
                    auto& tr = n.trips_in_progress.at(x.vehicle_id);
                    tr.stage = TripInProgress::Stage::transported;
                    tr.next_at = x.time + haul(x.task_id) / e->vehicle(x.vehicle_id).speed;
                    return n;
                  }});

  d.add_operator({"!unload",
                  [](const WorldState&, const htn::Task& t) {
                    return std::vector<Action>{
                        UnloadAction{{t.str(0), t.str(1), t.str(2), t.num(3), t.num(4)}}};
                  },
                  [leg_ok](const WorldState& s, const Action& a) {
                    return leg_ok(s, std::get<UnloadAction>(a), TripInProgress::Stage::transported);
                  },
                  [e](const WorldState& s, const Action& a) {
                    const auto& x = std::get<UnloadAction>(a);
                    WorldState n = s;
                    auto& tr = n.trips_in_progress.at(x.vehicle_id);
                    tr.stage = TripInProgress::Stage::unloaded;
                    tr.next_at = x.time + x.quantity / e->product(x.product_id).unload_rate;
                    n.delivered[x.task_id] += x.quantity;
                    return n;
                  }});

  d.add_operator({"!back",
                  [](const WorldState&, const htn::Task& t) {
                    return std::vector<Action>{BackAction{t.str(0), t.str(1), t.str(2), t.num(3)}};
                  },
                  [](const WorldState& s, const Action& a) {
                    const auto& x = std::get<BackAction>(a);
                    auto it = s.trips_in_progress.find(x.vehicle_id);
                    return it != s.trips_in_progress.end() &&
                           it->second.stage == TripInProgress::Stage::unloaded &&
                           it->second.task_id == x.task_id && x.time + kTimeEps >= it->second.next_at;
                  },
                  [e, haul](const WorldState& s, const Action& a) {
                    const auto& x = std::get<BackAction>(a);
                    WorldState n = s;
                    n.trips_in_progress.erase(x.vehicle_id);
                    n.vehicle_free_at[x.vehicle_id] =
                        x.time + haul(x.task_id) / e->vehicle(x.vehicle_id).speed;
                    return n;
                  }});

  // mobilize(task) -> ResourceShortage*, deliver(task, lines...)
  d.add_method({"engage-lines", "mobilize", [e](const WorldState& s, const htn::Task& t) {
                  const auto task = detail::task_from_args(t);
                  std::vector<htn::MethodInstance> out;
                  const auto options = engagement_options(task, s, *e);
                  const auto demands = DemandSet::for_task(e->product(task.product_id), task.amount);
                  const auto shortages = detect_shortages(task.task_id, demands, s.ledger);
                  for (std::size_t k = 0; k < options.size(); ++k) {
                    htn::MethodInstance m;
                    m.id = detail::numbered("lines", k + 1, options[k].lines);
                    m.score = options[k].score;
                    for (const auto& r : shortages)
                      m.subtasks.push_back({"!ResourceShortage", {r.task_id, r.material_id, r.lack_amount}});
                    htn::Task deliver{"deliver", t.args};
                    for (const auto& l : options[k].lines) deliver.args.emplace_back(l);
                    m.subtasks.push_back(std::move(deliver));
                    out.push_back(std::move(m));
                  }
                  return out;
                }});

  // deliver(task, lines...) -> interleaved starts and round trips
  d.add_method({"dispatch-pool", "deliver", [e](const WorldState& s, const htn::Task& t) {
                  const auto task = detail::task_from_args(t);
                  std::vector<Id> lines;
                  for (std::size_t i = 5; i < t.args.size(); ++i) lines.push_back(t.str(i));
                  const auto schedule = schedule_lines(lines, task, s, *e);
                  const auto starts = start_actions(task, schedule);

                  std::vector<htn::MethodInstance> out;
                  const auto pools = pool_options(task, schedule, s, *e);
                  for (std::size_t k = 0; k < pools.size(); ++k) {
                    htn::MethodInstance m;
                    m.id = detail::numbered("pool", pools[k].vehicles.size(), pools[k].vehicles);
                    m.score = pools[k].score;
                    std::vector<bool> emitted(starts.size(), false);
                    auto emit_start = [&](std::size_t i) {
                      const auto& st = starts[i];
                      m.subtasks.push_back({"!start", {st.line_id, st.task_id, st.product_id, st.time,
                                                       st.finish, st.rate}});
                      emitted[i] = true;
                    };
                    // A line's start is emitted just before the first trip that
                    // draws on its output.
                    for (const auto& trip : pools[k].dispatch.trips) {
                      for (std::size_t i = 0; i < starts.size(); ++i)
                        if (!emitted[i] && starts[i].time < trip.ready - kTimeEps) emit_start(i);
                      m.subtasks.push_back(detail::cargo_task("!load", trip, trip.load_start));
                      m.subtasks.push_back(detail::cargo_task("!transport", trip, trip.transport_start));
                      m.subtasks.push_back(detail::cargo_task("!unload", trip, trip.unload_start));
                      m.subtasks.push_back(
                          {"!back", {trip.vehicle_id, trip.task_id, trip.product_id, trip.back_start}});
                    }
                    for (std::size_t i = 0; i < starts.size(); ++i)
                      if (!emitted[i]) emit_start(i);
                    out.push_back(std::move(m));
                  }
                  return out;
                }});

  return d;
}

/// Why a task has no decomposition from state `s`.
inline InfeasibleReason explain_failure(const MobilizationTask& task, const WorldState& s,
                                        const EnterpriseEnvironment& env) {
  if (capable_lines(env, task.product_id).empty() || capable_vehicles(env, task.product_id).empty())
    return InfeasibleReason::no_capability;
  if (engagement_options(task, s, env).empty()) return InfeasibleReason::utility_exhausted;
  return InfeasibleReason::deadline;
}

/// Applies a plan action through its operator (snapshot semantics).
inline WorldState apply_action(const MobilizationDomain& d, const WorldState& s, const Action& a) {
  try {
    return d.apply_action(s, a, operator_name(a));
  } catch (const htn::ContractError& ex) {
    throw ContractViolation(ex.what());
  }
}

// ---------------------------------------------------------------------------
// Planning entry point

struct TaskDecision {
  Id task_id;
  std::vector<Id> lines;
  std::vector<Id> pool;
};

struct PlanningResult {
  Plan plan;
  bool failed = false;  // strict mode only
  std::size_t nodes_expanded = 0;
  std::size_t backtracks = 0;
  std::vector<Id> task_order;
  std::vector<TaskDecision> decisions;
};

namespace detail {

inline std::vector<Id> split_ids(const std::string& instance_id) {
  std::vector<Id> out;
  const auto colon = instance_id.find(':');
  std::string rest = instance_id.substr(colon + 1);
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    const auto plus = rest.find('+', pos);
    out.push_back(rest.substr(pos, plus == std::string::npos ? std::string::npos : plus - pos));
    if (plus == std::string::npos) break;
    pos = plus + 1;
  }
  return out;
}

}  // namespace detail

using ChoiceObserver = std::function<void(std::size_t, std::size_t, const WorldState&)>;

inline PlanningResult plan_mobilization(const EnterpriseEnvironment& env,
                                        const std::vector<MobilizationTask>& tasks,
                                        ChoiceObserver on_choice = {}) {
  std::map<Id, MobilizationTask> by_id;
  for (const auto& t : tasks) {
    env.validate_task(t);
    if (!by_id.emplace(t.task_id, t).second) throw InputError("duplicate task_id " + t.task_id);
  }

  const auto domain = build_domain(env, tasks);
  htn::PlanningProblem<WorldState> problem{WorldState::initial(env), {}};
  for (const auto& t : tasks) problem.goal_tasks.push_back(detail::mobilize_task(t));

  htn::SearchOptions<WorldState> opt;
  opt.goal_priority = [](const htn::Task& t) { return gamma_task(detail::task_from_args(t)); };
  opt.goal_key = [](const htn::Task& t) { return t.str(0); };
  opt.strict = env.policy.strict_deadlines;
  opt.explain_failure = [&env](const WorldState& s, const htn::Task& t) {
    return std::string(to_string(explain_failure(detail::task_from_args(t), s, env)));
  };
  opt.on_choice = std::move(on_choice);

  auto outcome = htn::plan(domain, problem, opt);

  PlanningResult r;
  r.nodes_expanded = outcome.nodes_expanded;
  r.backtracks = outcome.backtracks;
  for (const auto& g : outcome.goal_trace) r.task_order.push_back(g.str(0));

  if (outcome.failed()) {
    r.failed = true;
    // Diagnose with a lenient pass so the caller can say which tasks fail.
    auto lenient_env = env;
    lenient_env.policy.strict_deadlines = false;
    const auto diag = plan_mobilization(lenient_env, tasks);
    r.plan.infeasible = diag.plan.infeasible;
    return r;
  }

  for (const auto& a : outcome.plan->actions) r.plan.steps.push_back({0, a});
  renumber(r.plan);
  for (const auto& f : outcome.plan->failed_goals)
    r.plan.infeasible.push_back({f.task.str(0), parse_infeasible_reason(f.reason)});

  std::map<Id, TaskDecision> decided;
  for (const auto& dc : outcome.decisions) {
    auto& td = decided[dc.task.str(0)];
    td.task_id = dc.task.str(0);
    if (dc.task.name == "mobilize") td.lines = detail::split_ids(dc.method_instance);
    else td.pool = detail::split_ids(dc.method_instance);
  }
  for (const auto& id : r.task_order)
    if (decided.count(id)) r.decisions.push_back(decided.at(id));
  return r;
}

// ---------------------------------------------------------------------------
// Stand-alone production / transport / cost helpers

struct ProductionPlan {
  Engagement engagement;
  std::vector<StartAction> starts;
  std::vector<ShortageRecord> shortages;
  WorldState state;
};

/// Engages lines for `task` (first option in planner order), reports and
/// virtualizes shortages, and applies the start actions.
inline std::variant<ProductionPlan, InfeasibleTaskRecord> plan_production(
    const MobilizationTask& task, const WorldState& state, const EnterpriseEnvironment& env) {
  if (capable_lines(env, task.product_id).empty())
    return InfeasibleTaskRecord{task.task_id, InfeasibleReason::no_capability};
  auto options = engagement_options(task, state, env);
  if (options.empty()) return InfeasibleTaskRecord{task.task_id, InfeasibleReason::utility_exhausted};

  const auto domain = build_domain(env, {task});
  ProductionPlan p;
  p.engagement = std::move(options.front());
  p.starts = start_actions(task, p.engagement.schedule);
  p.state = state;
  const auto demands = DemandSet::for_task(env.product(task.product_id), task.amount);
  p.shortages = detect_shortages(task.task_id, demands, state.ledger);
  for (const auto& r : p.shortages)
    p.state = apply_action(domain, p.state, ShortageAction{r.task_id, r.material_id, r.lack_amount});
  for (const auto& st : p.starts) p.state = apply_action(domain, p.state, st);
  return p;
}

struct TransportPlan {
  std::vector<Id> pool;
  DispatchResult dispatch;
  WorldState state;
};

/// Smallest gamma-prefix pool meeting the deadline over the task's
/// installed production stream.
inline std::variant<TransportPlan, InfeasibleTaskRecord> plan_transport(
    const MobilizationTask& task, const WorldState& state, const EnterpriseEnvironment& env) {
  auto it = state.inventory_streams.find(task.task_id);
  if (it == state.inventory_streams.end())
    throw ContractViolation("plan_transport: no production planned for " + task.task_id);
  if (capable_vehicles(env, task.product_id).empty())
    return InfeasibleTaskRecord{task.task_id, InfeasibleReason::no_capability};
  ProductionSchedule schedule = it->second;
  schedule.total = task.amount;
  auto pools = pool_options(task, schedule, state, env);
  if (pools.empty()) return InfeasibleTaskRecord{task.task_id, InfeasibleReason::deadline};
  TransportPlan p;
  p.pool = pools.front().vehicles;
  p.dispatch = std::move(pools.front().dispatch);
  p.state = state;
  for (const auto& trip : p.dispatch.trips) {
    auto& free = p.state.vehicle_free_at[trip.vehicle_id];
    free = std::max(free, trip.return_at);
    p.state.claimed[task.task_id] += trip.quantity;
    p.state.delivered[task.task_id] += trip.quantity;
  }
  return p;
}

/// Line operating cost plus trip costs over a set of steps. Start steps
/// must carry their finish time (plans produced in-process do).
inline double plan_cost(const std::vector<PlanStep>& steps, const EnterpriseEnvironment& env) {
  double cost = 0;
  for (const auto& s : steps) {
    if (const auto* st = std::get_if<StartAction>(&s.action)) {
      if (std::isnan(st->finish)) throw ContractViolation("plan_cost: start step without finish time");
      cost += env.line(st->line_id).capability.at(st->product_id).cost_rate * (st->finish - st->time);
    } else if (const auto* ld = std::get_if<LoadAction>(&s.action)) {
      cost += env.vehicle(ld->vehicle_id).trip_cost;
    }
  }
  return cost;
}

}  // namespace mobhtn
