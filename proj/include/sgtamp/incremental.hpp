#pragma once

#include <algorithm>
#include <chrono>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "planner.hpp"
#include "pruning.hpp"

namespace sgtamp {

/// Seed symbol sets for incremental solving: the places the start and goal
/// pin down, the objects the goal names, and the places the goal forbids.
/// Every other object stays out of the instance until a round admits it.
struct InitialSymbols {
  std::set<std::string> places;
  std::set<std::string> objects;
  std::set<std::string> avoid_places;
};

/// What a bound sub-plan runs into among the objects its instance never saw:
/// the offending ids plus the last waypoint reached before the first contact.
struct RemovedCheck {
  std::set<std::string> blockers;
  std::optional<Vec2> last_reachable;
};

enum class NewObjPolicy { kAllBlockers, kNearestBlocker };

inline std::string to_string(NewObjPolicy p) {
  return p == NewObjPolicy::kAllBlockers ? "all_blockers" : "nearest_blocker";
}

struct IncrementalConfig {
  double per_round_budget_s = 10.0;  // virtual seconds per growth round
  double final_budget_s = 60.0;      // virtual seconds for the full-instance try
  int max_skeletons_per_round = 8;
  NewObjPolicy newobj_policy = NewObjPolicy::kAllBlockers;
  uint64_t seed = 0;
  StreamConfig stream;
};

namespace detail {

inline std::set<std::string> goal_objects(ProblemInstance const& p) {
  std::vector<std::pair<Fact, bool>> occ;
  collect_signed(p.goal, occ);
  std::set<std::string> out;
  for (auto const& [f, positive] : occ) {
    (void)positive;  // a negated status goal still anchors its object
    for (auto const& a : f.args)
      if (p.symbol_kind(a) == SymbolKind::kObject) out.insert(a);
  }
  return out;
}

/// Copy of the instance over a subset of its object symbols. Init facts
/// naming a dropped object leave with it; everything else is untouched.
inline ProblemInstance restrict_objects(ProblemInstance const& p,
                                        std::set<std::string> const& keep) {
  ProblemInstance q = p;
  std::set<std::string> dropped;
  q.symbols.clear();
  for (auto const& s : p.symbols) {
    if (s.kind == SymbolKind::kObject && !keep.count(s.name)) {
      dropped.insert(s.name);
      continue;
    }
    q.symbols.push_back(s);
  }
  q.init.clear();
  for (auto const& f : p.init) {
    bool refs = false;
    for (auto const& a : f.args) refs = refs || dropped.count(a) > 0;
    if (!refs) q.init.insert(f);
  }
  validate_instance(q);
  return q;
}

/// Hazard extent of an object the sub-instance cannot act on. Its status is
/// frozen, so a suspicious disc stays inflated; a safe one only matters when
/// the domain can manipulate objects at all.
inline double removed_disc_radius(ObjectNode const& o, bool retrieval,
                                  double clearance) {
  if (o.status == ObjectStatus::kSuspicious) return o.inflated_radius + clearance;
  return retrieval ? o.radius + clearance : 0.0;
}

/// Geometric post-check of a bound plan against objects the solver never
/// saw. Trajectory segments are tested against each hazard disc, deposits
/// against physical overlap; closed semantics throughout to match binding.
inline RemovedCheck check_plan_against_removed(
    BoundPlan const& plan, SceneGraph const& graph,
    std::set<std::string> const& removed, bool retrieval, double clearance) {
  RemovedCheck rc;
  for (auto const& step : plan.steps) {
    if (!step.trajectory) continue;
    auto const& wps = step.trajectory->waypoints;
    size_t segs = wps.size() < 2 ? (wps.empty() ? 0 : 1) : wps.size() - 1;
    for (size_t i = 0; i < segs; ++i) {
      Vec2 a = wps[i].position;
      Vec2 b = wps[std::min(i + 1, wps.size() - 1)].position;
      for (auto const& id : removed) {
        auto oi = graph.object_index(id);
        if (!oi) continue;
        ObjectNode const& o = graph.object(*oi);
        double r = removed_disc_radius(o, retrieval, clearance);
        if (r <= 0.0) continue;
        if (point_segment_distance(o.position, a, b) <= r) {
          rc.blockers.insert(id);
          if (!rc.last_reachable) rc.last_reachable = a;
        }
      }
    }
  }
  for (auto const& [obj, pos] : plan.placements) {
    auto pi = graph.object_index(obj);
    double r_obj = pi ? graph.object(*pi).radius : 0.0;
    for (auto const& id : removed) {
      auto oi = graph.object_index(id);
      if (!oi) continue;
      ObjectNode const& o = graph.object(*oi);
      if (dist(pos, o.position) <= r_obj + o.radius) rc.blockers.insert(id);
    }
  }
  return rc;
}

/// Reference point for distance-based admission: the first positively
/// goal-anchored place's centroid, else the first goal object's position,
/// else the start centroid.
inline Vec2 admission_goal_point(ProblemInstance const& p,
                                 SceneGraph const& g) {
  std::vector<std::pair<Fact, bool>> occ;
  collect_signed(p.goal, occ);
  for (auto const& [f, positive] : occ) {
    if (!positive) continue;
    for (auto const& a : f.args)
      if (auto pi = g.place_index(a)) return g.place(*pi).centroid;
  }
  for (auto const& [f, positive] : occ) {
    (void)positive;
    for (auto const& a : f.args)
      if (auto oi = g.object_index(a)) return g.object(*oi).position;
  }
  if (auto sp = init_start_place(p))
    if (auto pi = g.place_index(*sp)) return g.place(*pi).centroid;
  return {0.0, 0.0};
}

}  // namespace detail

/// Start-of-run symbol sets: restrict the instance to the goal's objects,
/// then prune places. The start place and goal-anchored places survive the
/// prune; places whose only role is a forbidden visit land in avoid_places.
inline InitialSymbols initial_symbols(ProblemInstance const& problem,
                                      SceneGraph const& graph) {
  InitialSymbols out;
  out.objects = detail::goal_objects(problem);
  auto [reduced, pres] =
      prune_places(detail::restrict_objects(problem, out.objects), graph);
  (void)reduced;
  out.places = pres.kept_places;
  out.avoid_places = pres.avoid_places;
  return out;
}

/// Picks the removed objects the next round admits. Blockers in hand: all of
/// them, or just the one nearest the pose where the plan first got stuck.
/// Without usable feedback (round unsolved, or blockers already admitted):
/// up to three remaining objects nearest the goal point, so rounds always
/// make progress. Ties break on id.
inline std::set<std::string> new_objects(RemovedCheck const& feedback,
                                         NewObjPolicy policy,
                                         SceneGraph const& graph,
                                         std::set<std::string> const& remaining,
                                         Vec2 goal_point) {
  std::set<std::string> usable;
  for (auto const& b : feedback.blockers)
    if (remaining.count(b)) usable.insert(b);

  if (!usable.empty()) {
    if (policy == NewObjPolicy::kAllBlockers) return usable;
    Vec2 ref = feedback.last_reachable.value_or(goal_point);
    std::string best;
    double best_d = std::numeric_limits<double>::infinity();
    for (auto const& id : usable) {  // set order makes ties lexicographic
      auto oi = graph.object_index(id);
      if (!oi) continue;
      double d = dist(graph.object(*oi).position, ref);
      if (d < best_d) {
        best_d = d;
        best = id;
      }
    }
    if (!best.empty()) return {best};
  }

  std::vector<std::pair<double, std::string>> by_dist;
  for (auto const& id : remaining) {
    auto oi = graph.object_index(id);
    if (!oi) continue;
    by_dist.emplace_back(dist(graph.object(*oi).position, goal_point), id);
  }
  std::sort(by_dist.begin(), by_dist.end());
  std::set<std::string> out;
  for (size_t i = 0; i < by_dist.size() && i < 3; ++i)
    out.insert(by_dist[i].second);
  return out;
}

/// Grows the object universe round by round. Each round solves the current
/// sub-instance (places re-pruned after every growth step), then checks the
/// bound plan's geometry against the objects the solver never saw; a clean
/// plan is re-validated on the untouched instance and returned, a dirty one
/// feeds its blockers to new_objects. Once every object is in, one final
/// attempt runs on the untouched instance with the full budget, so anything
/// the one-shot solver finds within that budget is still found. Infeasible
/// can only come out of that last attempt. Budgets are per solve call; the
/// reported times aggregate all rounds on one meter.
inline SolveReport inc_solve(SceneGraph const& graph,
                             ProblemInstance const& problem,
                             IncrementalConfig const& cfg = {}) {
  if (cfg.per_round_budget_s <= 0.0 || cfg.final_budget_s <= 0.0)
    throw ValidationError("incremental budgets must be positive");
  auto t0 = std::chrono::steady_clock::now();

  bool const retrieval = problem.schema("pick") != nullptr;
  Vec2 const goal_point = detail::admission_goal_point(problem, graph);

  InitialSymbols const seed_syms = initial_symbols(problem, graph);
  std::set<std::string> o_in = seed_syms.objects;
  std::set<std::string> o_removed;
  for (auto const& s : problem.symbols)
    if (s.kind == SymbolKind::kObject && !o_in.count(s.name))
      o_removed.insert(s.name);
  size_t const n_seed = o_in.size();

  WorkMeter total;  // aggregate only; per-round budgets live on fresh meters
  SolveReport out;
  auto finish = [&](Outcome oc, std::optional<BoundPlan> plan) {
    out.outcome = oc;
    out.plan = std::move(plan);
    out.objects_added = o_in.size() - n_seed;
    detail::fill_times(out.times, total);
    out.times.real_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    return out;
  };

  while (!o_removed.empty()) {
    ++out.rounds;
    ProblemInstance restricted = detail::restrict_objects(problem, o_in);
    total.prune_units += restricted.init.size() + restricted.symbols.size();
    auto [reduced, pres] = prune_places(restricted, graph);

    SolverConfig scfg;
    scfg.budget_s = cfg.per_round_budget_s;
    scfg.max_skeletons = cfg.max_skeletons_per_round;
    scfg.seed = detail::mix64(cfg.seed, out.rounds);
    scfg.stream = cfg.stream;
    scfg.extra_avoid_places = pres.avoid_places;

    WorkMeter wm;
    SolveReport r = solve(graph, reduced, scfg, wm);
    total.add(wm);
    out.skeletons_tried += r.skeletons_tried;
    out.feedback = r.feedback;

    RemovedCheck rc;
    if (r.outcome == Outcome::kSolved && r.plan) {
      rc = detail::check_plan_against_removed(*r.plan, graph, o_removed,
                                              retrieval, cfg.stream.clearance);
      if (rc.blockers.empty()) {
        // Clean of everything it could not see; confirm on the real instance.
        WorkMeter scratch;
        Grounding gr = ground_optimistic(reduced, scratch);
        total.add(scratch);
        auto actions = r.plan->actions();
        if (plan_valid(extend_instance(problem, gr, actions), actions)) {
          out.audit.push_back(
              {out.rounds, {}, "solved; plan clear of removed objects"});
          return finish(Outcome::kSolved, std::move(r.plan));
        }
        out.audit.push_back(
            {out.rounds, {}, "plan failed full-instance validation"});
      }
    }

    auto add = new_objects(rc, cfg.newobj_policy, graph, o_removed, goal_point);
    std::string reason;
    if (!rc.blockers.empty()) {
      reason = "plan crossed removed objects";
    } else {
      reason = "round " + to_string(r.outcome) +
               "; admitting objects nearest the goal";
    }
    std::vector<std::string> added(add.begin(), add.end());
    out.audit.push_back({out.rounds, std::move(added), std::move(reason)});
    for (auto const& id : add) {
      o_removed.erase(id);
      o_in.insert(id);
    }
  }

  // Every object admitted: the sub-instance is the instance. Run it whole so
  // a solvable problem cannot be lost to round-sized budgets.
  ++out.rounds;
  SolverConfig fcfg;
  fcfg.budget_s = cfg.final_budget_s;
  fcfg.seed = detail::mix64(cfg.seed, out.rounds);
  fcfg.stream = cfg.stream;
  WorkMeter wm;
  SolveReport r = solve(graph, problem, fcfg, wm);
  total.add(wm);
  out.skeletons_tried += r.skeletons_tried;
  out.feedback = r.feedback;
  out.audit.push_back({out.rounds,
                       {},
                       "final attempt on the full instance: " +
                           to_string(r.outcome)});
  return finish(r.outcome, std::move(r.plan));
}

}  // namespace sgtamp
