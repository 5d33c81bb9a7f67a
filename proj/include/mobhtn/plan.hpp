#pragma once

// Plan representation: ordered actions plus the report of shortages and
// tasks that could not be completed.

#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "mobhtn/environment.hpp"
#include "mobhtn/shortage.hpp"

namespace mobhtn {

struct StartAction {
  Id line_id;
  Id task_id;
  Id product_id;
  double time = 0;
  // Not rendered; NaN when the plan was parsed from text.
  double finish = std::numeric_limits<double>::quiet_NaN();
  double rate = std::numeric_limits<double>::quiet_NaN();

  double quantity() const { return rate * (finish - time); }
};

// load / transport / unload share one shape.
struct CargoAction {
  Id vehicle_id;
  Id task_id;
  Id product_id;
  double quantity = 0;
  double time = 0;
};
struct LoadAction : CargoAction {};
struct TransportAction : CargoAction {};
struct UnloadAction : CargoAction {};

struct BackAction {
  Id vehicle_id;
  Id task_id;
  Id product_id;
  double time = 0;
};

struct ShortageAction {
  Id task_id;
  Id material_id;
  double lack = 0;
};

using Action =
    std::variant<StartAction, LoadAction, TransportAction, UnloadAction, BackAction, ShortageAction>;

inline const char* action_keyword(const Action& a) {
  static constexpr const char* names[] = {"start", "load", "transport", "unload", "back",
                                          "ResourceShortage"};
  return names[a.index()];
}

inline const Id& action_task(const Action& a) {
  return std::visit([](const auto& x) -> const Id& { return x.task_id; }, a);
}

enum class InfeasibleReason { deadline, no_capability, utility_exhausted };

inline const char* to_string(InfeasibleReason r) {
  switch (r) {
    case InfeasibleReason::deadline: return "deadline";
    case InfeasibleReason::no_capability: return "no-capability";
    case InfeasibleReason::utility_exhausted: return "utility-exhausted";
  }
  return "?";
}

inline InfeasibleReason parse_infeasible_reason(const std::string& s) {
  if (s == "deadline") return InfeasibleReason::deadline;
  if (s == "no-capability") return InfeasibleReason::no_capability;
  if (s == "utility-exhausted") return InfeasibleReason::utility_exhausted;
  throw InputError("unknown infeasibility reason '" + s + "'");
}

struct InfeasibleTaskRecord {
  Id task_id;
  InfeasibleReason reason = InfeasibleReason::deadline;

  friend bool operator==(const InfeasibleTaskRecord&, const InfeasibleTaskRecord&) = default;
};

struct PlanStep {
  std::size_t index = 0;  // 1-based
  Action action;
};

struct Plan {
  std::vector<PlanStep> steps;
  std::vector<ShortageRecord> shortages;
  std::vector<InfeasibleTaskRecord> infeasible;

  bool reported_infeasible(const Id& task) const {
    for (const auto& r : infeasible)
      if (r.task_id == task) return true;
    return false;
  }
};

// Numbers steps 1..n and rebuilds the shortage list from the step stream.
inline void renumber(Plan& p) {
  p.shortages.clear();
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    p.steps[i].index = i + 1;
    if (const auto* s = std::get_if<ShortageAction>(&p.steps[i].action))
      p.shortages.push_back({s->task_id, s->material_id, s->lack});
  }
}

}  // namespace mobhtn
