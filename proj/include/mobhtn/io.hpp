#pragma once

// External formats: domain and problem JSON files, the plan action text
// grammar `[n] (!action args...)`, and a JSON plan emitter.

#include <cctype>
#include <cfenv>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mobhtn/environment.hpp"
#include "mobhtn/plan.hpp"

namespace mobhtn::io {

using nlohmann::json;

/// One-decimal rendering with round-half-to-even on the decimal digit.
inline std::string format_decimal1(double x) {
  if (!std::isfinite(x)) throw ContractViolation("format_decimal1: non-finite value");
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  double tenths = std::nearbyint(x * 10.0);
  std::fesetround(saved);
  if (tenths == 0) tenths = 0;  // drop the sign of -0
  const bool neg = tenths < 0;
  const long long n = static_cast<long long>(std::abs(tenths));
  return (neg ? "-" : "") + std::to_string(n / 10) + "." + std::to_string(n % 10);
}

// ---------------------------------------------------------------------------
// Domain / problem files

namespace detail {

inline std::string path_join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw InputError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw InputError(path_join(path, key) + ": required field missing");
  return *it;
}

inline const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw InputError(path + ": expected an object");
  return j;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw InputError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(path + ": expected a finite number");
  return v;
}

inline double non_negative(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (v < 0) throw InputError(path + ": negative quantity " + std::to_string(v));
  return v;
}

inline double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0)) throw InputError(path + ": must be > 0");
  return v;
}

inline std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw InputError(path + ": expected a string");
  return j.get<std::string>();
}

inline std::map<Id, double> quantity_map(const json& j, const std::string& path,
                                         bool strictly_positive = false) {
  std::map<Id, double> out;
  for (const auto& [k, v] : require_object(j, path).items())
    out[k] = strictly_positive ? positive(v, path_join(path, k)) : non_negative(v, path_join(path, k));
  return out;
}

inline json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; turn it into line/column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') { ++line; col = 1; } else { ++col; }
    }
    throw InputError(std::string(what) + ": JSON syntax error at line " + std::to_string(line) +
                     ", column " + std::to_string(col) + ": " + e.what());
  }
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw InputError(path_join(path, k) + ": unknown field");
  }
}

}  // namespace detail

inline PolicyConfig parse_policy(const json& j, PolicyConfig base = {}) {
  using namespace detail;
  const std::string path = "policy";
  require_object(j, path);
  check_keys(j, path, {"line_policy", "changeover_hours", "deadline_check", "strict_deadlines"});
  if (j.contains("line_policy")) {
    const auto v = string(j["line_policy"], "policy.line_policy");
    if (v == "all-capable") base.line_policy = LinePolicy::all_capable;
    else if (v == "gamma-escalation") base.line_policy = LinePolicy::gamma_escalation;
    else throw InputError("policy.line_policy: expected all-capable or gamma-escalation");
  }
  if (j.contains("changeover_hours"))
    base.changeover_hours = non_negative(j["changeover_hours"], "policy.changeover_hours");
  if (j.contains("deadline_check")) {
    const auto v = string(j["deadline_check"], "policy.deadline_check");
    if (v == "arrival") base.deadline_check = DeadlineCheck::arrival;
    else if (v == "unload-complete") base.deadline_check = DeadlineCheck::unload_complete;
    else throw InputError("policy.deadline_check: expected arrival or unload-complete");
  }
  if (j.contains("strict_deadlines")) {
    if (!j["strict_deadlines"].is_boolean())
      throw InputError("policy.strict_deadlines: expected a boolean");
    base.strict_deadlines = j["strict_deadlines"].get<bool>();
  }
  return base;
}

/// Parses and validates a domain document. Schema: docs/file-formats.md.
inline EnterpriseEnvironment parse_domain(std::string_view text) {
  using namespace detail;
  const json doc = parse_json(text, "domain");
  require_object(doc, "(root)");
  check_keys(doc, "", {"site", "utilities", "workers", "materials", "products", "lines", "vehicles",
                       "routes", "policy"});

  EnterpriseEnvironment env;
  env.site = string(require(doc, "site", ""), "site");
  env.utility_totals = quantity_map(require(doc, "utilities", ""), "utilities");
  env.worker_total = non_negative(require(doc, "workers", ""), "workers");
  env.material_stock = quantity_map(require(doc, "materials", ""), "materials");

  for (const auto& [pid, p] : require_object(require(doc, "products", ""), "products").items()) {
    const std::string at = "products." + pid;
    require_object(p, at);
    check_keys(p, at, {"bom", "load_rate", "unload_rate"});
    Product prod;
    prod.product_id = pid;
    prod.bom = quantity_map(require(p, "bom", at), at + ".bom");
    prod.load_rate = positive(require(p, "load_rate", at), at + ".load_rate");
    prod.unload_rate = positive(require(p, "unload_rate", at), at + ".unload_rate");
    env.products[pid] = std::move(prod);
  }

  for (const auto& [lid, l] : require_object(require(doc, "lines", ""), "lines").items()) {
    const std::string at = "lines." + lid;
    ProductionLine line;
    line.line_id = lid;
    for (const auto& [pid, c] : require_object(l, at).items()) {
      const std::string cat = at + "." + pid;
      require_object(c, cat);
      check_keys(c, cat, {"rate", "cost_rate", "utility_draw", "workers"});
      LineCapability cap;
      cap.rate = positive(require(c, "rate", cat), cat + ".rate");
      cap.cost_rate = positive(require(c, "cost_rate", cat), cat + ".cost_rate");
      cap.utility_draw = quantity_map(require(c, "utility_draw", cat), cat + ".utility_draw");
      cap.workers = non_negative(require(c, "workers", cat), cat + ".workers");
      line.capability[pid] = std::move(cap);
    }
    env.lines[lid] = std::move(line);
  }

  for (const auto& [vid, v] : require_object(require(doc, "vehicles", ""), "vehicles").items()) {
    const std::string at = "vehicles." + vid;
    require_object(v, at);
    check_keys(v, at, {"speed", "capacity", "trip_cost"});
    Vehicle veh;
    veh.vehicle_id = vid;
    veh.speed = positive(require(v, "speed", at), at + ".speed");
    veh.capacity = quantity_map(require(v, "capacity", at), at + ".capacity", true);
    veh.trip_cost = positive(require(v, "trip_cost", at), at + ".trip_cost");
    env.vehicles[vid] = std::move(veh);
  }

  for (const auto& [site, dests] : require_object(require(doc, "routes", ""), "routes").items())
    for (const auto& [dest, d] : require_object(dests, "routes." + site).items())
      env.routes[{site, dest}] = positive(d, "routes." + site + "." + dest);

  if (doc.contains("policy")) env.policy = parse_policy(doc["policy"]);
  env.validate();
  return env;
}

struct ProblemSpec {
  std::vector<MobilizationTask> tasks;  // as written
  std::map<Id, double> material_stock;  // overrides
};

inline ProblemSpec parse_problem(std::string_view text) {
  using namespace detail;
  const json doc = parse_json(text, "problem");
  require_object(doc, "(root)");
  check_keys(doc, "", {"tasks", "material_stock"});
  ProblemSpec out;
  const json& tasks = require(doc, "tasks", "");
  if (!tasks.is_array()) throw InputError("tasks: expected an array");
  std::map<Id, bool> seen;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string at = "tasks[" + std::to_string(i) + "]";
    const json& t = tasks[i];
    require_object(t, at);
    check_keys(t, at, {"task_id", "deadline", "amount", "product", "destination"});
    MobilizationTask task;
    task.task_id = string(require(t, "task_id", at), at + ".task_id");
    task.deadline = positive(require(t, "deadline", at), at + ".deadline");
    task.amount = positive(require(t, "amount", at), at + ".amount");
    task.product_id = string(require(t, "product", at), at + ".product");
    task.destination = string(require(t, "destination", at), at + ".destination");
    if (seen[task.task_id]) throw InputError(at + ".task_id: duplicate task_id " + task.task_id);
    seen[task.task_id] = true;
    out.tasks.push_back(std::move(task));
  }
  if (doc.contains("material_stock"))
    out.material_stock = quantity_map(doc["material_stock"], "material_stock");
  return out;
}

/// Applies problem-level stock overrides and checks every task resolves.
inline EnterpriseEnvironment bind_problem(EnterpriseEnvironment env, const ProblemSpec& problem) {
  for (const auto& [m, v] : problem.material_stock) {
    if (!env.material_stock.count(m))
      throw InputError("material_stock." + m + ": unknown material");
    env.material_stock[m] = v;
  }
  for (const auto& t : problem.tasks) env.validate_task(t);
  return env;
}

// ---------------------------------------------------------------------------
// Plan text

inline std::string render_step(const PlanStep& s) {
  std::ostringstream o;
  o << '[' << s.index << "] (!" << action_keyword(s.action);
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, StartAction>) {
          o << ' ' << a.line_id << ' ' << format_decimal1(a.time) << ' ' << a.task_id;
        } else if constexpr (std::is_same_v<T, BackAction>) {
          o << ' ' << a.vehicle_id << ' ' << a.task_id << ' ' << a.product_id << ' '
            << format_decimal1(a.time);
        } else if constexpr (std::is_same_v<T, ShortageAction>) {
          o << ' ' << a.task_id << ' ' << a.material_id << ' ' << format_decimal1(a.lack);
        } else {
          o << ' ' << a.vehicle_id << ' ' << a.task_id << ' ' << a.product_id << ' '
            << format_decimal1(a.quantity) << ' ' << format_decimal1(a.time);
        }
      },
      s.action);
  o << ')';
  return o.str();
}

/// One line per step; infeasible-task records follow as `;` comment lines.
inline std::string render_plan(const Plan& p) {
  std::string out;
  for (const auto& s : p.steps) out += render_step(s) + "\n";
  for (const auto& r : p.infeasible)
    out += "; infeasible " + r.task_id + " " + to_string(r.reason) + "\n";
  return out;
}

namespace detail {

// The golden text prints line ids as l001, I001 or 1001; all mean l001.
inline std::string canonical_line_id(const std::string& tok) {
  if (tok.size() == 4 && (tok[0] == 'I' || tok[0] == '1' || tok[0] == 'l') &&
      std::isdigit(static_cast<unsigned char>(tok[1])) &&
      std::isdigit(static_cast<unsigned char>(tok[2])) &&
      std::isdigit(static_cast<unsigned char>(tok[3])))
    return "l" + tok.substr(1);
  return tok;
}

inline double plan_number(const std::string& tok, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v))
    throw InputError("plan line " + std::to_string(line_no) + ": expected a number, got '" + tok + "'");
  return v;
}

}  // namespace detail

inline Plan parse_plan(std::string_view text) {
  Plan p;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string line(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    line = line.substr(first);
    const auto err = [&](const std::string& msg) {
      return InputError("plan line " + std::to_string(line_no) + ": " + msg);
    };

    if (line[0] == ';') {
      std::istringstream in(line.substr(1));
      std::string kw, task, reason;
      in >> kw;
      if (kw == "infeasible") {
        if (!(in >> task >> reason)) throw err("malformed infeasible record");
        p.infeasible.push_back({task, parse_infeasible_reason(reason)});
      }
      continue;
    }

    if (line[0] != '[') throw err("expected '[<n>]'");
    const auto close = line.find(']');
    if (close == std::string::npos) throw err("unterminated step index");
    const std::string idx = line.substr(1, close - 1);
    if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos)
      throw err("bad step index '" + idx + "'");
    auto rest = line.substr(close + 1);
    const auto open = rest.find("(!");
    const auto end = rest.rfind(')');
    if (open == std::string::npos || end == std::string::npos || end < open)
      throw err("expected '(!<action> ...)'");
    if (rest.find_first_not_of(" \t", end + 1) != std::string::npos) throw err("trailing text");
    std::istringstream in(rest.substr(open + 2, end - open - 2));
    std::vector<std::string> tok;
    for (std::string t; in >> t;) tok.push_back(t);
    if (tok.empty()) throw err("empty action");
    const std::string kw = tok[0];
    auto want = [&](std::size_t n) {
      if (tok.size() != n + 1)
        throw err("'" + kw + "' takes " + std::to_string(n) + " arguments, got " +
                  std::to_string(tok.size() - 1));
    };
    auto num = [&](std::size_t i) { return detail::plan_number(tok[i], line_no); };

    PlanStep step;
    step.index = std::stoul(idx);
    if (kw == "start") {
      want(3);
      StartAction a;
      a.line_id = detail::canonical_line_id(tok[1]);
      a.time = num(2);
      a.task_id = tok[3];
      step.action = a;
    } else if (kw == "load" || kw == "transport" || kw == "unload") {
      want(5);
      CargoAction c{tok[1], tok[2], tok[3], num(4), num(5)};
      if (kw == "load") step.action = LoadAction{c};
      else if (kw == "transport") step.action = TransportAction{c};
      else step.action = UnloadAction{c};
    } else if (kw == "back") {
      want(4);
      step.action = BackAction{tok[1], tok[2], tok[3], num(4)};
    } else if (kw == "ResourceShortage") {
      want(3);
      step.action = ShortageAction{tok[1], tok[2], num(3)};
      p.shortages.push_back({tok[1], tok[2], num(3)});
    } else {
      throw err("unknown action '" + kw + "'");
    }
    p.steps.push_back(std::move(step));
  }
  return p;
}

// Start steps in rendered text carry no product; fill it from the tasks.
inline void attach_products(Plan& p, const std::vector<MobilizationTask>& tasks) {
  for (auto& s : p.steps)
    if (auto* st = std::get_if<StartAction>(&s.action))
      for (const auto& t : tasks)
        if (t.task_id == st->task_id) st->product_id = t.product_id;
}

// ---------------------------------------------------------------------------
// JSON plan

inline json plan_to_json(const Plan& p) {
  json steps = json::array();
  for (const auto& s : p.steps) {
    json j;
    j["index"] = s.index;
    j["action"] = action_keyword(s.action);
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, StartAction>) {
            j["line"] = a.line_id;
            j["task"] = a.task_id;
            j["product"] = a.product_id;
            j["time"] = a.time;
            if (!std::isnan(a.finish)) j["finish"] = a.finish;
          } else if constexpr (std::is_same_v<T, BackAction>) {
            j["vehicle"] = a.vehicle_id;
            j["task"] = a.task_id;
            j["product"] = a.product_id;
            j["time"] = a.time;
          } else if constexpr (std::is_same_v<T, ShortageAction>) {
            j["task"] = a.task_id;
            j["material"] = a.material_id;
            j["lack"] = a.lack;
          } else {
            j["vehicle"] = a.vehicle_id;
            j["task"] = a.task_id;
            j["product"] = a.product_id;
            j["quantity"] = a.quantity;
            j["time"] = a.time;
          }
        },
        s.action);
    steps.push_back(std::move(j));
  }
  json shortages = json::array();
  for (const auto& r : p.shortages)
    shortages.push_back({{"task", r.task_id}, {"material", r.material_id}, {"lack", r.lack_amount}});
  json infeasible = json::array();
  for (const auto& r : p.infeasible)
    infeasible.push_back({{"task", r.task_id}, {"reason", to_string(r.reason)}});
  return {{"steps", steps}, {"shortages", shortages}, {"infeasible", infeasible}};
}

}  // namespace mobhtn::io
