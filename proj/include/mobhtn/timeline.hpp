#pragma once

// Event arithmetic for production pools and vehicle round trips. Time is
// kept in full double precision; rounding happens only when rendering.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mobhtn/environment.hpp"

namespace mobhtn {

inline constexpr double kTimeEps = 1e-9;

struct ProductionSegment {
  Id line_id;
  double start = 0;
  double end = 0;
  double rate = 0;

  double output() const { return rate * (end - start); }
};

struct ProductionSchedule {
  std::vector<ProductionSegment> segments;
  double total = 0;

  // Cumulative output at time t.
  double produced_by(double t) const {
    double q = 0;
    for (const auto& s : segments)
      if (t > s.start) q += s.rate * (std::min(t, s.end) - s.start);
    return q;
  }

  double finish() const {
    double f = 0;
    for (const auto& s : segments) f = std::max(f, s.end);
    return f;
  }

  /// Smallest t with produced_by(t) >= quantity.
  double available_at(double quantity) const {
    if (quantity < 0) throw ContractViolation("available_at: negative quantity");
    const double tol = 1e-9 * std::max(1.0, total);
    if (quantity > total + tol)
      throw ContractViolation("available_at: quantity " + std::to_string(quantity) +
                              " exceeds scheduled total " + std::to_string(total));
    if (quantity <= 0) return 0;

    std::vector<double> marks;
    for (const auto& s : segments) {
      marks.push_back(s.start);
      marks.push_back(s.end);
    }
    std::sort(marks.begin(), marks.end());
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

    double cum = 0;
    for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
      const double a = marks[i], b = marks[i + 1];
      double rate = 0;
      for (const auto& s : segments)
        if (s.start <= a && s.end >= b) rate += s.rate;
      if (rate > 0 && cum + rate * (b - a) >= quantity) return a + (quantity - cum) / rate;
      cum += rate * (b - a);
    }
    // Only reachable when quantity equals total up to rounding.
    return marks.empty() ? 0 : marks.back();
  }
};

struct LineStart {
  Id line_id;
  double start = 0;
  double rate = 0;
};

/// Runs every line from its start until the common instant at which the
/// pooled output reaches `amount`. Lines whose start is at or after that
/// instant are left out of the schedule.
inline ProductionSchedule joint_finish(std::vector<LineStart> lines, double amount) {
  if (!(amount > 0)) throw ContractViolation("joint_finish: amount must be > 0");
  if (lines.empty()) throw ContractViolation("joint_finish: no lines");
  std::stable_sort(lines.begin(), lines.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });

  double rate_sum = 0, weighted_start = 0, finish = 0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (!(lines[k].rate > 0)) throw ContractViolation("joint_finish: rate must be > 0");
    rate_sum += lines[k].rate;
    weighted_start += lines[k].rate * lines[k].start;
    finish = (amount + weighted_start) / rate_sum;
    used = k + 1;
    if (k + 1 == lines.size() || finish <= lines[k + 1].start) break;
  }

  ProductionSchedule out;
  out.total = amount;
  for (std::size_t k = 0; k < used; ++k)
    out.segments.push_back({lines[k].line_id, lines[k].start, finish, lines[k].rate});
  return out;
}

// One vehicle round trip; all timestamps are action start instants.
struct TripSchedule {
  Id vehicle_id;
  Id task_id;
  Id product_id;
  double quantity = 0;
  double ready = 0;  // instant the claimed cumulative quantity exists
  double load_start = 0;
  double transport_start = 0;
  double unload_start = 0;
  double back_start = 0;
  double return_at = 0;
};

inline TripSchedule schedule_trip(const Vehicle& vehicle, const Product& product, double quantity,
                                  double inventory_ready, double vehicle_free, double distance) {
  const auto cap = vehicle.capacity_for(product.product_id);
  if (!cap)
    throw ContractViolation(vehicle.vehicle_id + " cannot carry " + product.product_id);
  if (!(quantity > 0)) throw ContractViolation("schedule_trip: quantity must be > 0");
  if (quantity > *cap + 1e-9)
    throw ContractViolation("schedule_trip: " + std::to_string(quantity) + " exceeds capacity of " +
                            vehicle.vehicle_id);
  TripSchedule t;
  t.vehicle_id = vehicle.vehicle_id;
  t.product_id = product.product_id;
  t.quantity = quantity;
  t.ready = inventory_ready;
  t.load_start = std::max(inventory_ready, vehicle_free);
  t.transport_start = t.load_start + quantity / product.load_rate;
  t.unload_start = t.transport_start + distance / vehicle.speed;
  t.back_start = t.unload_start + quantity / product.unload_rate;
  t.return_at = t.back_start + distance / vehicle.speed;
  return t;
}

struct PoolMember {
  const Vehicle* vehicle = nullptr;
  double free_at = 0;
};

struct DispatchResult {
  std::vector<TripSchedule> trips;  // in claim order
  double last_arrival = 0;          // latest unload start
  double last_unload_complete = 0;  // latest back start
};

/// Claim-queue dispatch: the earliest-free vehicle (pool order breaks ties)
/// claims min(capacity, unclaimed) from the production stream, loads once
/// that cumulative quantity exists, and rejoins the queue when it returns.
inline DispatchResult simulate_dispatch(const std::vector<PoolMember>& pool,
                                        const ProductionSchedule& schedule, double total,
                                        double distance, const Product& product,
                                        const Id& task_id = {}) {
  if (pool.empty()) throw ContractViolation("simulate_dispatch: empty pool");
  if (!(total > 0)) throw ContractViolation("simulate_dispatch: total must be > 0");

  std::vector<double> free_at;
  for (const auto& m : pool) free_at.push_back(m.free_at);

  DispatchResult out;
  double claimed = 0;
  const double tol = 1e-9 * std::max(1.0, total);
  while (total - claimed > tol) {
    std::size_t pick = 0;
    for (std::size_t i = 1; i < pool.size(); ++i)
      if (free_at[i] < free_at[pick]) pick = i;
    const Vehicle& v = *pool[pick].vehicle;
    const double cap = v.capacity_for(product.product_id).value_or(0);
    if (!(cap > 0)) throw ContractViolation(v.vehicle_id + " cannot carry " + product.product_id);
    double q = std::min(cap, total - claimed);
    if (total - claimed - q <= tol) q = total - claimed;  // absorb rounding dust in the last claim
    claimed += q;
    const double ready = schedule.available_at(std::min(claimed, schedule.total));
    auto trip = schedule_trip(v, product, q, ready, free_at[pick], distance);
    trip.task_id = task_id;
    free_at[pick] = trip.return_at;
    out.last_arrival = std::max(out.last_arrival, trip.unload_start);
    out.last_unload_complete = std::max(out.last_unload_complete, trip.back_start);
    out.trips.push_back(std::move(trip));
  }
  return out;
}

}  // namespace mobhtn
