#pragma once

// Material ledger with shortage detection. When a task demands more of a
// material than is in stock, the deficit is reported and added to the stock
// as a virtual allocation so planning can proceed.

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "mobhtn/environment.hpp"

namespace mobhtn {

struct ShortageRecord {
  Id task_id;
  Id material_id;
  double lack_amount = 0;

  friend bool operator==(const ShortageRecord&, const ShortageRecord&) = default;
};

// Per-task material demand (BOM x amount).
struct DemandSet {
  std::map<Id, double> demands;

  static DemandSet for_task(const Product& product, double amount) {
    DemandSet d;
    for (const auto& [m, per_unit] : product.bom)
      if (per_unit > 0) d.demands[m] = per_unit * amount;
    return d;
  }
};

class MaterialLedger {
 public:
  enum class Entry { virtualize, debit };
  struct HistoryItem {
    Id task_id;
    Id material_id;
    double amount;
    Entry kind;

    friend bool operator==(const HistoryItem&, const HistoryItem&) = default;
  };

  MaterialLedger() = default;
  explicit MaterialLedger(std::map<Id, double> initial) : initial_(initial), stock_(std::move(initial)) {}

  double stock(const Id& m) const { return lookup(stock_, m); }
  double virtualized(const Id& m) const { return lookup(virtualized_, m); }
  const std::map<Id, double>& stock() const { return stock_; }
  const std::map<Id, double>& initial() const { return initial_; }
  const std::map<Id, double>& virtualized() const { return virtualized_; }
  const std::vector<HistoryItem>& history() const { return history_; }

  void virtualize(const Id& task, const Id& m, double amount) {
    if (!(amount > 0)) throw ContractViolation("virtualize: amount must be > 0");
    stock_[m] += amount;
    virtualized_[m] += amount;
    history_.push_back({task, m, amount, Entry::virtualize});
  }

  // Removes `amount` from stock; rounding dust below zero is clamped.
  void debit(const Id& task, const Id& m, double amount) {
    if (amount < 0) throw ContractViolation("debit: negative amount");
    double& s = stock_[m];
    const double after = s - amount;
    if (after < -tolerance(amount))
      throw ContractViolation("debit of " + std::to_string(amount) + " " + m + " for " + task +
                              " exceeds stock " + std::to_string(s));
    s = std::max(0.0, after);
    history_.push_back({task, m, amount, Entry::debit});
  }

  bool can_debit(const Id& m, double amount) const {
    return stock(m) - amount >= -tolerance(amount);
  }

  // Stock obtained by replaying the history over the initial stock.
  std::map<Id, double> replay() const {
    std::map<Id, double> s = initial_;
    for (const auto& h : history_) {
      if (h.kind == Entry::virtualize) s[h.material_id] += h.amount;
      else s[h.material_id] = std::max(0.0, s[h.material_id] - h.amount);
    }
    return s;
  }

  friend bool operator==(const MaterialLedger&, const MaterialLedger&) = default;

 private:
  static double lookup(const std::map<Id, double>& m, const Id& k) {
    auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
  }
  static double tolerance(double amount) { return 1e-9 * std::max(1.0, amount); }

  std::map<Id, double> initial_;
  std::map<Id, double> stock_;
  std::map<Id, double> virtualized_;
  std::vector<HistoryItem> history_;
};

/// Deficits of `demands` against the ledger, by material id, without
/// changing the ledger.
inline std::vector<ShortageRecord> detect_shortages(const Id& task_id, const DemandSet& demands,
                                                    const MaterialLedger& ledger) {
  std::vector<ShortageRecord> out;
  for (const auto& [m, need] : demands.demands) {
    if (need < 0) throw ContractViolation("negative demand for " + m);
    const double have = ledger.stock(m);
    if (need > have) out.push_back({task_id, m, need - have});
  }
  return out;
}

/// Reports every deficit, virtualizes it, then debits the full demand.
inline std::pair<std::vector<ShortageRecord>, MaterialLedger> check_and_virtualize(
    const Id& task_id, const DemandSet& demands, MaterialLedger ledger) {
  auto records = detect_shortages(task_id, demands, ledger);
  for (const auto& r : records) ledger.virtualize(task_id, r.material_id, r.lack_amount);
  for (const auto& [m, need] : demands.demands)
    if (need > 0) ledger.debit(task_id, m, need);
  return {std::move(records), std::move(ledger)};
}

}  // namespace mobhtn
