// mobhtn: plan, validate and inspect mobilization task allocations.
//
//   mobhtn plan     --domain D --problem P [policy flags] [--format text|json] [--stats]
//   mobhtn validate --domain D --problem P --plan F [policy flags] [--format text|json]
//   mobhtn inspect  --domain D [--problem P] [--format text|json]
//
// Exit codes: 0 ok / pass, 1 input error, 2 strict-mode infeasibility,
// 3 validation failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mobhtn/domain.hpp"
#include "mobhtn/gamma.hpp"
#include "mobhtn/io.hpp"
#include "mobhtn/validator.hpp"

namespace {

using namespace mobhtn;

enum Exit { kOk = 0, kInputError = 1, kInfeasible = 2, kInvalid = 3 };

struct Invocation {
  std::string domain_path;
  std::string problem_path;
  std::string plan_path;
  std::string line_policy;
  std::optional<double> changeover;
  std::string deadline_check;
  bool strict = false;
  std::string format = "text";
  bool stats = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Domain file policy, then CLI overrides.
void apply_flags(EnterpriseEnvironment& env, const Invocation& inv) {
  if (!inv.line_policy.empty()) {
    std::string v = inv.line_policy;
    if (v.rfind("lines=", 0) == 0) v = v.substr(6);
    if (v == "all-capable") env.policy.line_policy = LinePolicy::all_capable;
    else if (v == "gamma-escalation") env.policy.line_policy = LinePolicy::gamma_escalation;
    else throw InputError("--policy: expected lines=all-capable or lines=gamma-escalation");
  }
  if (inv.changeover) {
    if (*inv.changeover < 0) throw InputError("--changeover must be >= 0");
    env.policy.changeover_hours = *inv.changeover;
  }
  if (!inv.deadline_check.empty()) {
    if (inv.deadline_check == "arrival") env.policy.deadline_check = DeadlineCheck::arrival;
    else if (inv.deadline_check == "unload-complete")
      env.policy.deadline_check = DeadlineCheck::unload_complete;
    else throw InputError("--deadline-check: expected arrival or unload-complete");
  }
  if (inv.strict) env.policy.strict_deadlines = true;
}

struct Loaded {
  EnterpriseEnvironment env;
  io::ProblemSpec problem;
};

Loaded load(const Invocation& inv, bool need_problem) {
  Loaded l;
  l.env = io::parse_domain(read_file(inv.domain_path));
  if (need_problem || !inv.problem_path.empty()) {
    l.problem = io::parse_problem(read_file(inv.problem_path));
    l.env = io::bind_problem(std::move(l.env), l.problem);
  }
  apply_flags(l.env, inv);
  return l;
}

int cmd_plan(const Invocation& inv) {
  auto [env, problem] = load(inv, true);
  const auto result = plan_mobilization(env, problem.tasks);

  if (inv.stats)
    std::cerr << "nodes_expanded " << result.nodes_expanded << "\nbacktracks " << result.backtracks
              << "\n";
  if (result.failed) {
    std::cerr << "planning failed in strict mode:";
    for (const auto& r : result.plan.infeasible)
      std::cerr << " " << r.task_id << " (" << to_string(r.reason) << ")";
    std::cerr << "\n";
    return kInfeasible;
  }

  if (inv.format == "json") {
    auto j = io::plan_to_json(result.plan);
    nlohmann::json costs = nlohmann::json::object();
    for (const auto& t : problem.tasks) {
      std::vector<PlanStep> mine;
      for (const auto& s : result.plan.steps)
        if (action_task(s.action) == t.task_id) mine.push_back(s);
      if (!mine.empty()) costs[t.task_id] = plan_cost(mine, env);
    }
    j["cost"] = costs;
    j["task_order"] = result.task_order;
    if (inv.stats)
      j["stats"] = {{"nodes_expanded", result.nodes_expanded}, {"backtracks", result.backtracks}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << io::render_plan(result.plan);
  }
  for (const auto& r : result.plan.infeasible)
    std::cerr << "task " << r.task_id << " infeasible: " << to_string(r.reason) << "\n";
  return kOk;
}

int cmd_validate(const Invocation& inv) {
  auto [env, problem] = load(inv, true);
  auto plan = io::parse_plan(read_file(inv.plan_path));
  io::attach_products(plan, problem.tasks);
  const auto report = validate(plan, env, problem.tasks, env.policy);
  if (inv.format == "json") std::cout << report_to_json(report).dump(2) << "\n";
  else std::cout << render_report_text(report);
  return report.pass() ? kOk : kInvalid;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

int cmd_inspect(const Invocation& inv) {
  auto [env, problem] = load(inv, false);
  const auto tasks = order_by_urgency(problem.tasks);

  struct LineRow { Id line, product; double gamma; };
  std::vector<LineRow> lines;
  for (const auto& [lid, l] : env.lines)
    for (const auto& [pid, c] : l.capability) lines.push_back({lid, pid, gamma_line(l, pid)});
  std::stable_sort(lines.begin(), lines.end(),
                   [](const auto& a, const auto& b) { return a.gamma > b.gamma; });
  std::vector<const Vehicle*> vehicles;
  for (const auto& [vid, v] : env.vehicles) vehicles.push_back(&v);
  std::stable_sort(vehicles.begin(), vehicles.end(),
                   [](auto* a, auto* b) { return gamma_vehicle(*a) > gamma_vehicle(*b); });

  if (inv.format == "json") {
    nlohmann::json j;
    j["tasks"] = nlohmann::json::array();
    for (const auto& t : tasks) j["tasks"].push_back({{"task", t.task_id}, {"gamma", gamma_task(t)}});
    j["lines"] = nlohmann::json::array();
    for (const auto& r : lines)
      j["lines"].push_back({{"line", r.line}, {"product", r.product}, {"gamma", r.gamma}});
    j["vehicles"] = nlohmann::json::array();
    for (const auto* v : vehicles)
      j["vehicles"].push_back({{"vehicle", v->vehicle_id}, {"gamma", gamma_vehicle(*v)}});
    std::cout << j.dump(2) << "\n";
    return kOk;
  }
  std::cout << "# task gamma = amount / deadline\n";
  for (const auto& t : tasks) std::cout << t.task_id << " " << fixed(gamma_task(t)) << "\n";
  std::cout << "# line gamma = rate / cost_rate\n";
  for (const auto& r : lines) std::cout << r.line << "@" << r.product << " " << fixed(r.gamma) << "\n";
  std::cout << "# vehicle gamma = speed / trip_cost\n";
  for (const auto* v : vehicles) std::cout << v->vehicle_id << " " << fixed(gamma_vehicle(*v)) << "\n";
  return kOk;
}

void add_policy_flags(CLI::App* cmd, Invocation& inv) {
  cmd->add_option("--policy", inv.line_policy, "lines=all-capable|gamma-escalation");
  cmd->add_option("--changeover", inv.changeover, "product changeover delay in hours");
  cmd->add_option("--deadline-check", inv.deadline_check, "arrival|unload-complete");
  cmd->add_flag("--strict-deadlines", inv.strict, "fail the whole plan when a task is infeasible");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HTN task-allocation planner for production and delivery"};
  app.require_subcommand(1);
  Invocation inv;

  auto* plan = app.add_subcommand("plan", "plan production and delivery for a problem");
  plan->add_option("--domain", inv.domain_path, "domain JSON")->required();
  plan->add_option("--problem", inv.problem_path, "problem JSON")->required();
  add_policy_flags(plan, inv);
  plan->add_option("--format", inv.format)->check(CLI::IsMember({"text", "json"}));
  plan->add_flag("--stats", inv.stats, "print search statistics to stderr");

  auto* val = app.add_subcommand("validate", "validate a plan against a domain and problem");
  val->add_option("--domain", inv.domain_path, "domain JSON")->required();
  val->add_option("--problem", inv.problem_path, "problem JSON")->required();
  val->add_option("--plan", inv.plan_path, "plan text")->required();
  add_policy_flags(val, inv);
  val->add_option("--format", inv.format)->check(CLI::IsMember({"text", "json"}));

  auto* ins = app.add_subcommand("inspect", "print gamma rankings");
  ins->add_option("--domain", inv.domain_path, "domain JSON")->required();
  ins->add_option("--problem", inv.problem_path, "problem JSON");
  ins->add_option("--format", inv.format)->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (plan->parsed()) return cmd_plan(inv);
    if (val->parsed()) return cmd_validate(inv);
    return cmd_inspect(inv);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
}
