#pragma once

// Efficiency ratios used to order every choice the planner makes:
// task urgency, line efficiency and vehicle efficiency.

#include <algorithm>
#include <vector>

#include "mobhtn/environment.hpp"

namespace mobhtn {

/// Urgency of a goal task: amount per hour of deadline.
inline double gamma_task(const MobilizationTask& t) {
  if (!(t.deadline > 0)) throw ContractViolation("gamma_task: deadline must be > 0");
  return t.amount / t.deadline;
}

/// Output per unit cost of a line on one product.
inline double gamma_line(const ProductionLine& line, const Id& product) {
  auto it = line.capability.find(product);
  if (it == line.capability.end())
    throw InputError("line " + line.line_id + " cannot produce " + product);
  return it->second.rate / it->second.cost_rate;
}

/// Speed per unit trip cost.
inline double gamma_vehicle(const Vehicle& v) {
  if (!(v.trip_cost > 0)) throw ContractViolation("gamma_vehicle: trip_cost must be > 0");
  return v.speed / v.trip_cost;
}

// Lines able to produce `product`, best gamma first, ties by id.
inline std::vector<const ProductionLine*> capable_lines(const EnterpriseEnvironment& env,
                                                        const Id& product) {
  std::vector<const ProductionLine*> out;
  for (const auto& [id, l] : env.lines)
    if (l.produces(product)) out.push_back(&l);
  std::stable_sort(out.begin(), out.end(), [&](const auto* a, const auto* b) {
    return gamma_line(*a, product) > gamma_line(*b, product);
  });
  return out;
}

// Vehicles able to carry `product`, best gamma first, ties by id.
inline std::vector<const Vehicle*> capable_vehicles(const EnterpriseEnvironment& env,
                                                    const Id& product) {
  std::vector<const Vehicle*> out;
  for (const auto& [id, v] : env.vehicles)
    if (v.capacity_for(product)) out.push_back(&v);
  std::stable_sort(out.begin(), out.end(), [](const auto* a, const auto* b) {
    return gamma_vehicle(*a) > gamma_vehicle(*b);
  });
  return out;
}

// Goal tasks in planning order: urgency descending, ties by id.
inline std::vector<MobilizationTask> order_by_urgency(std::vector<MobilizationTask> tasks) {
  std::stable_sort(tasks.begin(), tasks.end(), [](const auto& a, const auto& b) {
    const double ga = gamma_task(a), gb = gamma_task(b);
    if (ga != gb) return ga > gb;
    return a.task_id < b.task_id;
  });
  return tasks;
}

}  // namespace mobhtn
