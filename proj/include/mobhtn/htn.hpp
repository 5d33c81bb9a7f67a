#pragma once

// Generic total-order forward-decomposition HTN search.
//
// Goal tasks are popped from an unordered pool by a priority function; the
// subtasks of a chosen decomposition are then worked off in order before
// the next goal is selected. Operators and methods are ground on demand and
// tried in preference order, with chronological backtracking over both.
// States are values: every alternative starts from an untouched copy.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mobhtn::htn {

using Value = std::variant<double, std::string>;

class DomainError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class TaskKind { primitive, compound };

struct Task {
  std::string name;
  std::vector<Value> args;

  const std::string& str(std::size_t i) const { return std::get<std::string>(args.at(i)); }
  double num(std::size_t i) const { return std::get<double>(args.at(i)); }

  friend bool operator==(const Task&, const Task&) = default;
};

struct MethodInstance {
  std::string id;
  double score = 0;
  std::vector<Task> subtasks;
};

template <class State, class Action>
struct Operator {
  std::string name;
  // Candidate ground instances for a task, most preferred first.
  std::function<std::vector<Action>(const State&, const Task&)> ground;
  std::function<bool(const State&, const Action&)> applicable;
  // (s - effect-) + effect+
  std::function<State(const State&, const Action&)> apply;
};

template <class State>
struct Method {
  std::string name;
  std::string task;  // compound task name this method decomposes
  std::function<std::vector<MethodInstance>(const State&, const Task&)> ground;
};

template <class State, class Action>
class Domain {
 public:
  void add_operator(Operator<State, Action> op) {
    if (op.name.empty()) throw DomainError("operator with empty name");
    if (!op.ground || !op.applicable || !op.apply)
      throw DomainError("operator " + op.name + " is missing a callback");
    if (operators_.count(op.name) || methods_by_task_.count(op.name))
      throw DomainError("duplicate operator name " + op.name);
    operators_.emplace(op.name, std::move(op));
  }

  void add_method(Method<State> m) {
    if (m.name.empty() || !m.ground) throw DomainError("malformed method");
    if (method_names_.count(m.name)) throw DomainError("duplicate method name " + m.name);
    if (operators_.count(m.task))
      throw DomainError("method " + m.name + " targets primitive task " + m.task);
    method_names_.insert({m.name, m.task});
    methods_by_task_[m.task].push_back(std::move(m));
  }

  TaskKind kind_of(const Task& t) const {
    if (operators_.count(t.name)) return TaskKind::primitive;
    if (methods_by_task_.count(t.name)) return TaskKind::compound;
    throw DomainError("task '" + t.name + "' matches no operator or method");
  }

  const Operator<State, Action>& op(const std::string& name) const {
    auto it = operators_.find(name);
    if (it == operators_.end()) throw DomainError("unknown operator " + name);
    return it->second;
  }

  const std::vector<Method<State>>& methods_for(const std::string& task) const {
    auto it = methods_by_task_.find(task);
    if (it == methods_by_task_.end()) throw DomainError("no method decomposes " + task);
    return it->second;
  }

  /// Applicable ground instances of the task's operator, in operator order.
  std::vector<Action> expand_primitive(const Task& t, const State& s) const {
    const auto& o = op(t.name);
    std::vector<Action> out;
    for (auto& a : o.ground(s, t))
      if (o.applicable(s, a)) out.push_back(std::move(a));
    return out;
  }

  /// Applicable method instances, score descending, ties by id.
  std::vector<MethodInstance> expand_compound(const Task& t, const State& s) const {
    std::vector<MethodInstance> out;
    for (const auto& m : methods_for(t.name)) {
      for (auto& inst : m.ground(s, t)) {
        if (inst.subtasks.empty())
          throw DomainError("method instance " + inst.id + " has no subtasks");
        if (!(inst.score >= 0) || inst.score == std::numeric_limits<double>::infinity())
          throw DomainError("method instance " + inst.id + " has a non-finite or negative score");
        for (const auto& st : inst.subtasks) (void)kind_of(st);
        out.push_back(std::move(inst));
      }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.id < b.id;
    });
    return out;
  }

  /// Applies a ground action; the input state is left untouched.
  State apply_action(const State& s, const Action& a, const std::string& op_name) const {
    const auto& o = op(op_name);
    if (!o.applicable(s, a)) throw ContractError("action of " + op_name + " is not applicable");
    return o.apply(s, a);
  }

 private:
  std::map<std::string, Operator<State, Action>> operators_;
  std::map<std::string, std::vector<Method<State>>> methods_by_task_;
  std::map<std::string, std::string> method_names_;
};

template <class State>
struct PlanningProblem {
  State initial_state;
  std::vector<Task> goal_tasks;
};

struct FailedGoal {
  Task task;
  std::string reason;
};

template <class Action>
struct Plan {
  std::vector<Action> actions;
  std::vector<FailedGoal> failed_goals;
};

struct Decision {
  Task task;
  std::string method_instance;
};

template <class Action>
struct SearchOutcome {
  std::optional<Plan<Action>> plan;  // nullopt means failure
  std::size_t nodes_expanded = 0;
  std::size_t backtracks = 0;
  std::vector<Task> goal_trace;      // goals in the order they were selected
  std::vector<Decision> decisions;   // method choices on the returned path

  bool failed() const { return !plan.has_value(); }
};

template <class State>
struct SearchOptions {
  // Priority of a goal task; larger is planned first.
  std::function<double(const Task&)> goal_priority;
  // Tie-break key; lexically smallest wins.
  std::function<std::string(const Task&)> goal_key;
  // Lenient: a goal with no decomposition is recorded and skipped.
  // Strict: it fails the search (after exhausting earlier choices).
  bool strict = false;
  std::function<std::string(const State&, const Task&)> explain_failure;
  // Called before each alternative at a choice point.
  std::function<void(std::size_t choice_point, std::size_t alternative, const State&)> on_choice;
};

/// Removes and returns the agenda element with the highest score; ties go
/// to the lexically smallest key.
template <class Scorer, class Key>
Task select_next_task(std::vector<Task>& agenda, Scorer&& scorer, Key&& key) {
  if (agenda.empty()) throw ContractError("select_next_task on empty agenda");
  std::size_t best = 0;
  double best_score = scorer(agenda[0]);
  std::string best_key = key(agenda[0]);
  for (std::size_t i = 1; i < agenda.size(); ++i) {
    const double sc = scorer(agenda[i]);
    std::string k = key(agenda[i]);
    if (sc > best_score || (sc == best_score && k < best_key)) {
      best = i;
      best_score = sc;
      best_key = std::move(k);
    }
  }
  Task out = std::move(agenda[best]);
  agenda.erase(agenda.begin() + static_cast<std::ptrdiff_t>(best));
  return out;
}

template <class State, class Action>
class Planner {
 public:
  Planner(const Domain<State, Action>& domain, SearchOptions<State> options)
      : domain_(domain), opt_(std::move(options)) {
    if (!opt_.goal_priority) opt_.goal_priority = [](const Task&) { return 0.0; };
    if (!opt_.goal_key) opt_.goal_key = [](const Task& t) {
      return t.args.empty() || !std::holds_alternative<std::string>(t.args[0]) ? t.name : t.str(0);
    };
  }

  SearchOutcome<Action> plan(const PlanningProblem<State>& problem) {
    out_ = {};
    path_.clear();
    failed_.clear();
    decisions_.clear();
    choice_points_ = 0;
    if (seek(problem.initial_state, {}, problem.goal_tasks)) {
      Plan<Action> p;
      p.actions = path_;
      p.failed_goals = failed_;
      out_.plan = std::move(p);
      out_.decisions = decisions_;
    }
    return std::move(out_);
  }

 private:
  // `pending` is a stack: back() is the next task to work on.
  bool seek(const State& s, std::vector<Task> pending, std::vector<Task> goals) {
    if (pending.empty()) {
      if (goals.empty()) return true;
      Task goal = select_next_task(goals, opt_.goal_priority, opt_.goal_key);
      const std::size_t trace_mark = out_.goal_trace.size();
      const std::size_t failed_mark = failed_.size();
      out_.goal_trace.push_back(goal);
      if (seek(s, {goal}, goals)) return true;
      if (opt_.strict) {
        out_.goal_trace.resize(trace_mark);
        return false;
      }
      failed_.resize(failed_mark);
      out_.goal_trace.resize(trace_mark + 1);
      failed_.push_back({goal, opt_.explain_failure ? opt_.explain_failure(s, goal) : "failure"});
      if (seek(s, {}, std::move(goals))) return true;
      failed_.resize(failed_mark);
      out_.goal_trace.resize(trace_mark);
      return false;
    }

    Task t = std::move(pending.back());
    pending.pop_back();
    ++out_.nodes_expanded;
    const std::size_t cp = choice_points_++;

    if (domain_.kind_of(t) == TaskKind::primitive) {
      const auto& o = domain_.op(t.name);
      auto active = domain_.expand_primitive(t, s);
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (opt_.on_choice) opt_.on_choice(cp, k, s);
        State next = o.apply(s, active[k]);
        path_.push_back(active[k]);
        if (seek(next, pending, goals)) return true;
        path_.pop_back();
        ++out_.backtracks;
      }
      return false;
    }

    auto active = domain_.expand_compound(t, s);
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (opt_.on_choice) opt_.on_choice(cp, k, s);
      auto next = pending;
      for (auto it = active[k].subtasks.rbegin(); it != active[k].subtasks.rend(); ++it)
        next.push_back(*it);
      decisions_.push_back({t, active[k].id});
      const std::size_t path_mark = path_.size();
      if (seek(s, std::move(next), goals)) return true;
      path_.resize(path_mark);
      decisions_.pop_back();
      ++out_.backtracks;
    }
    return false;
  }

  const Domain<State, Action>& domain_;
  SearchOptions<State> opt_;
  SearchOutcome<Action> out_;
  std::vector<Action> path_;
  std::vector<FailedGoal> failed_;
  std::vector<Decision> decisions_;
  std::size_t choice_points_ = 0;
};

template <class State, class Action>
SearchOutcome<Action> plan(const Domain<State, Action>& domain,
                           const PlanningProblem<State>& problem,
                           SearchOptions<State> options = {}) {
  return Planner<State, Action>(domain, std::move(options)).plan(problem);
}

}  // namespace mobhtn::htn
