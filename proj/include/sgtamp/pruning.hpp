#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sgtamp/planner.hpp"
#include "sgtamp/scene_graph.hpp"
#include "sgtamp/task_core.hpp"

namespace sgtamp {

enum class PruneReason { kNotReferenced, kNegatedVisitedClause, kStaticAnalysis };

inline std::string to_string(PruneReason r) {
  switch (r) {
    case PruneReason::kNotReferenced: return "not_referenced";
    case PruneReason::kNegatedVisitedClause: return "negated_visited_clause";
    case PruneReason::kStaticAnalysis: return "static_analysis";
  }
  return "?";
}

struct PruneResult {
  std::set<std::string> kept_places;
  std::set<std::string> removed_places;
  std::map<std::string, PruneReason> reasons;
  std::vector<Fact> removed_facts;
  // Places the symbolic layer forgot but the motion layer must still shun.
  std::set<std::string> avoid_places;
};

namespace detail {

inline std::optional<std::string> init_start_place(ProblemInstance const& p) {
  for (auto const& f : p.init)
    if (f.name == "AtPlace" && f.args.size() == 1) return f.args[0];
  return std::nullopt;
}

/// Signed fact occurrences of a goal formula.
inline void collect_signed(GoalFormula const& g,
                           std::vector<std::pair<Fact, bool>>& out) {
  switch (g.kind) {
    case GoalFormula::Kind::kFact: out.emplace_back(g.atom, true); return;
    case GoalFormula::Kind::kNot: out.emplace_back(g.atom, false); return;
    default:
      for (auto const& c : g.children) collect_signed(c, out);
  }
}

/// Rewrites a goal under the assumption that VisitedPlace(p) is forever
/// false for every p in `dropped` (the motion layer enforces avoidance, so
/// the negated literal is vacuously true). Returns nullopt when the formula
/// collapses to "true".
inline std::optional<GoalFormula> drop_negated_visited(
    GoalFormula const& g, std::set<std::string> const& dropped) {
  switch (g.kind) {
    case GoalFormula::Kind::kFact:
      return g;
    case GoalFormula::Kind::kNot:
      if (g.atom.name == "VisitedPlace" && g.atom.args.size() == 1 &&
          dropped.count(g.atom.args[0]))
        return std::nullopt;
      return g;
    case GoalFormula::Kind::kAnd: {
      std::vector<GoalFormula> kids;
      for (auto const& c : g.children)
        if (auto k = drop_negated_visited(c, dropped)) kids.push_back(*k);
      if (kids.empty()) return std::nullopt;  // empty conjunction: true
      return GoalFormula::conj(std::move(kids));
    }
    case GoalFormula::Kind::kOr: {
      std::vector<GoalFormula> kids;
      for (auto const& c : g.children) {
        auto k = drop_negated_visited(c, dropped);
        if (!k) return std::nullopt;  // a true disjunct satisfies the Or
        kids.push_back(*k);
      }
      return GoalFormula::disj(std::move(kids));
    }
  }
  return g;
}

/// True when every place parameter of every action schema is visit-guarded:
/// applying the action marks the place visited, or its preconditions pin the
/// robot's config to the place (reaching such a config visits the place).
/// This is what makes "no plan may touch a goal-forbidden place" sound.
inline bool places_visit_guarded(ProblemInstance const& p) {
  for (auto const& a : p.actions) {
    for (auto const& prm : a.params) {
      if (prm.kind != SymbolKind::kPlace) continue;
      bool adds_visit = false;
      for (auto const& f : a.eff_add)
        adds_visit |= f.name == "VisitedPlace" && f.args == std::vector<std::string>{prm.name};
      if (adds_visit) continue;
      bool pinned = false;
      for (auto const& l : a.pre) {
        if (!l.positive || l.atom.name != "PoseInPlace") continue;
        if (l.atom.args.size() != 2 || l.atom.args[1] != prm.name) continue;
        for (auto const& l2 : a.pre)
          pinned |= l2.positive && l2.atom.name == "AtConfig" &&
                    l2.atom.args == std::vector<std::string>{l.atom.args[0]};
      }
      if (!pinned) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Removes redundant place symbols from an instance. A place survives when
/// it parameterizes any init fact other than region-layer typing, or any
/// goal fact. A surviving place whose negated VisitedPlace forms a unit
/// clause of the goal CNF is removed anyway (no valid plan may ever touch
/// it) and recorded for the motion layer's avoid set; the rule is skipped
/// wholesale if CNF conversion blows up or the domain's place parameters
/// are not visit-guarded. Init and goal facts over removed places are
/// dropped from the reduced instance.
inline std::pair<ProblemInstance, PruneResult> prune_places(
    ProblemInstance const& problem, SceneGraph const& graph) {
  (void)graph;  // geometry never influences symbolic redundancy
  PruneResult res;

  std::set<std::string> places;
  for (auto const& s : problem.symbols)
    if (s.kind == SymbolKind::kPlace) places.insert(s.name);

  auto start = detail::init_start_place(problem);

  std::set<std::string> anchored;
  if (start) anchored.insert(*start);
  for (auto const& f : problem.init) {
    if (f.name == "AtRoom" || f.name == "PlaceInRoom") continue;
    for (auto const& a : f.args)
      if (places.count(a)) anchored.insert(a);
  }
  std::set<std::string> goal_places;
  for (auto const& f : problem.goal.facts())
    for (auto const& a : f.args)
      if (places.count(a)) goal_places.insert(a);
  anchored.insert(goal_places.begin(), goal_places.end());

  // Unit clauses (not (VisitedPlace p)) kill every plan touching p, so p's
  // symbol is dead weight even though the goal names it. Applicable only
  // when the place can also be erased from the goal without changing its
  // meaning: p must occur nowhere else in the formula.
  std::set<std::string> negated_removed;
  if (detail::places_visit_guarded(problem)) {
    try {
      std::vector<std::pair<Fact, bool>> signed_facts;
      detail::collect_signed(problem.goal, signed_facts);
      for (auto const& clause : to_cnf_clauses(problem.goal)) {
        if (clause.size() != 1 || clause[0].positive) continue;
        if (clause[0].atom.name != "VisitedPlace") continue;
        std::string const& p = clause[0].atom.args[0];
        if (!places.count(p)) continue;
        if (start && p == *start) continue;  // kept ⊇ {start} invariant
        bool only_negated_visited = true;
        for (auto const& [f, positive] : signed_facts) {
          bool mentions = std::find(f.args.begin(), f.args.end(), p) !=
                          f.args.end();
          if (!mentions) continue;
          only_negated_visited &= !positive && f.name == "VisitedPlace";
        }
        if (only_negated_visited) negated_removed.insert(p);
      }
    } catch (CnfBlowupError const&) {
      negated_removed.clear();  // conservative superset kept
    }
  }

  for (auto const& p : places) {
    if (negated_removed.count(p)) {
      res.removed_places.insert(p);
      res.reasons.emplace(p, PruneReason::kNegatedVisitedClause);
      res.avoid_places.insert(p);
    } else if (!anchored.count(p)) {
      res.removed_places.insert(p);
      res.reasons.emplace(p, PruneReason::kNotReferenced);
    } else {
      res.kept_places.insert(p);
    }
  }

  ProblemInstance reduced = problem;
  reduced.symbols.clear();
  for (auto const& s : problem.symbols)
    if (s.kind != SymbolKind::kPlace || !res.removed_places.count(s.name))
      reduced.symbols.push_back(s);
  reduced.init.clear();
  for (auto const& f : problem.init) {
    bool dropped = false;
    for (auto const& a : f.args) dropped |= res.removed_places.count(a) > 0;
    if (dropped)
      res.removed_facts.push_back(f);
    else
      reduced.init.insert(f);
  }
  if (!negated_removed.empty()) {
    auto rewritten = detail::drop_negated_visited(problem.goal, negated_removed);
    reduced.goal = rewritten ? *rewritten : GoalFormula::top();
    for (auto const& p : negated_removed)
      res.removed_facts.push_back(fact("VisitedPlace", {p}));
  }
  validate_instance(reduced);
  return {std::move(reduced), std::move(res)};
}

struct StaticAnalysisResult {
  std::set<std::string> ignorable;
  bool applicable = false;
  std::string diagnostic;
};

/// Sufficient-condition place analysis: with P_static the predicates no
/// action effect touches, a domain where every place parameter of every
/// non-motion action is pinned by a static precondition can ignore all
/// places that parameterize neither a static init fact nor the goal. When
/// the structural premise fails the analysis reports itself inapplicable
/// and ignores nothing.
inline StaticAnalysisResult static_analysis(ProblemInstance const& problem) {
  StaticAnalysisResult out;

  std::set<std::string> dynamic;
  for (auto const& a : problem.actions) {
    for (auto const& f : a.eff_add) dynamic.insert(f.name);
    for (auto const& f : a.eff_del) dynamic.insert(f.name);
  }
  std::set<std::string> static_preds;
  for (auto const& pr : problem.predicates)
    if (!dynamic.count(pr.name)) static_preds.insert(pr.name);

  for (auto const& a : problem.actions) {
    if (a.name == "move" || a.name == "moveRelaxed") continue;
    for (auto const& prm : a.params) {
      if (prm.kind != SymbolKind::kPlace) continue;
      bool pinned = false;
      for (auto const& l : a.pre)
        if (l.positive && static_preds.count(l.atom.name))
          pinned |= std::find(l.atom.args.begin(), l.atom.args.end(),
                              prm.name) != l.atom.args.end();
      if (!pinned) {
        out.diagnostic = "action " + a.name + " place parameter " + prm.name +
                         " is not pinned by any static precondition";
        return out;
      }
    }
  }
  out.applicable = true;

  std::set<std::string> places;
  for (auto const& s : problem.symbols)
    if (s.kind == SymbolKind::kPlace) places.insert(s.name);

  std::set<std::string> anchored;
  for (auto const& f : problem.init) {
    if (!static_preds.count(f.name)) continue;
    if (f.name == "AtRoom" || f.name == "PlaceInRoom") continue;
    for (auto const& a : f.args)
      if (places.count(a)) anchored.insert(a);
  }
  for (auto const& f : problem.goal.facts())
    for (auto const& a : f.args)
      if (places.count(a)) anchored.insert(a);

  for (auto const& p : places)
    if (!anchored.count(p)) out.ignorable.insert(p);
  return out;
}

namespace detail {

/// Motion-equivalence key of an unbound plan: maximal runs of consecutive
/// moves collapse to their endpoint anchors (a pose config anchors to its
/// place, an approach config to its object), and non-motion actions keep
/// their exact argument lists.
inline std::vector<std::string> motion_key(
    std::vector<GroundAction> const& plan, Grounding const& grounding) {
  auto anchor = [&](std::string const& c) -> std::string {
    auto it = grounding.config_roles.find(c);
    if (it == grounding.config_roles.end()) return c;
    switch (it->second.kind) {
      case ConfigRole::Kind::kInit: return c;
      case ConfigRole::Kind::kPlacePose: return "place:" + it->second.place;
      case ConfigRole::Kind::kInspect:
      case ConfigRole::Kind::kGrasp: return "object:" + it->second.object;
    }
    return c;
  };
  std::vector<std::string> key;
  std::optional<std::pair<std::string, std::string>> run;
  auto flush = [&]() {
    if (run) key.push_back("follow " + run->first + " -> " + run->second);
    run.reset();
  };
  for (auto const& ga : plan) {
    if (ga.schema == "move" || ga.schema == "moveRelaxed") {
      std::string from = anchor(ga.args[2]);
      std::string to = anchor(ga.args[3]);
      if (!run) run = {from, to};
      else run->second = to;
      continue;
    }
    flush();
    std::string item = ga.schema;
    for (auto const& a : ga.args) item += " " + a;
    key.push_back(item);
  }
  flush();
  return key;
}

inline bool plan_parameterizes(std::vector<GroundAction> const& plan,
                               std::string const& symbol) {
  for (auto const& ga : plan)
    for (auto const& a : ga.args)
      if (a == symbol) return true;
  return false;
}

}  // namespace detail

/// Brute-force ground truth for place redundancy on tiny instances: a place
/// is redundant when every step-necessary valid plan that names it has an
/// alternate valid plan with the same motion-equivalence key that does not,
/// and the place anchors no precondition-readable init fact or positive
/// goal fact. Enumeration is over the optimistic universe, depth-capped and
/// prefix-minimal; each candidate additionally survives dropping any single
/// action only by losing validity.
inline bool redundancy_oracle(ProblemInstance const& problem,
                              SceneGraph const& graph,
                              std::string const& place, int depth_cap) {
  size_t n_places = 0, n_objects = 0;
  for (auto const& s : problem.symbols) {
    n_places += s.kind == SymbolKind::kPlace;
    n_objects += s.kind == SymbolKind::kObject;
  }
  if (n_places > 9 || n_objects > 2 || depth_cap > 5 || depth_cap < 0)
    throw OracleCapError("redundancy oracle caps exceeded");
  (void)graph;

  // Init facts a precondition could read make the place load-bearing; inert
  // region typing and never-read bookkeeping facts do not.
  std::set<std::string> read_preds;
  for (auto const& a : problem.actions)
    for (auto const& l : a.pre) read_preds.insert(l.atom.name);
  for (auto const& f : problem.init) {
    if (!read_preds.count(f.name)) continue;
    if (std::find(f.args.begin(), f.args.end(), place) != f.args.end())
      return false;
  }
  std::vector<std::pair<Fact, bool>> signed_facts;
  detail::collect_signed(problem.goal, signed_facts);
  for (auto const& [f, positive] : signed_facts)
    if (positive &&
        std::find(f.args.begin(), f.args.end(), place) != f.args.end())
      return false;

  WorkMeter wm;
  Grounding grounding = ground_optimistic(problem, wm);
  State init = problem.init;
  for (auto const& f : grounding.certified) init.insert(f);

  std::vector<std::vector<GroundAction>> plans;
  std::vector<GroundAction> cur;
  auto dfs = [&](auto&& self, State const& s, int depth) -> void {
    if (problem.goal.eval(s)) {
      plans.push_back(cur);
      return;  // extensions of a satisfying plan are never step-necessary
    }
    if (depth == depth_cap) return;
    for (auto const& ga : grounding.actions) {
      if (!applicable(s, ga)) continue;
      cur.push_back(ga);
      self(self, apply_action(s, ga), depth + 1);
      cur.pop_back();
    }
  };
  dfs(dfs, init, 0);

  auto valid = [&](std::vector<GroundAction> const& plan) {
    State s = init;
    for (auto const& ga : plan) {
      if (!applicable(s, ga)) return false;
      s = apply_action(s, ga);
    }
    return problem.goal.eval(s);
  };
  std::vector<std::vector<GroundAction>> necessary;
  for (auto const& plan : plans) {
    bool minimal = true;
    for (size_t drop = 0; drop < plan.size() && minimal; ++drop) {
      std::vector<GroundAction> shorter;
      for (size_t i = 0; i < plan.size(); ++i)
        if (i != drop) shorter.push_back(plan[i]);
      minimal = !valid(shorter);
    }
    if (minimal) necessary.push_back(plan);
  }

  for (auto const& plan : necessary) {
    if (!detail::plan_parameterizes(plan, place)) continue;
    auto key = detail::motion_key(plan, grounding);
    bool rewritable = false;
    for (auto const& alt : necessary) {
      if (detail::plan_parameterizes(alt, place)) continue;
      if (detail::motion_key(alt, grounding) == key) {
        rewritable = true;
        break;
      }
    }
    if (!rewritable) return false;
  }
  return true;
}

}  // namespace sgtamp
