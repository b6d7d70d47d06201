#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sgtamp/planner.hpp"
#include "sgtamp/scene_graph.hpp"
#include "sgtamp/streams.hpp"
#include "sgtamp/task_core.hpp"

namespace sgtamp {

// ---------------------------------------------------------------------------
// Motion sequences
// ---------------------------------------------------------------------------

/// One executable step of a bound plan. Motion carries its trajectory;
/// inspect/pick/place act on an object from wherever the robot stands.
/// approach_object marks a trajectory that ends on an inspect or grasp pose,
/// which is the only case where entering that object's inflated disc is
/// allowed (checked by the simulator).
struct MotionPrimitive {
  enum class Kind { kFollowPath, kInspectObject, kPickObject, kPlaceObject };

  Kind kind = Kind::kFollowPath;
  Trajectory trajectory;                       // kFollowPath
  std::string object;                          // all kinds but kFollowPath
  std::optional<std::string> approach_object;  // kFollowPath
  Vec2 deposit{};                              // kPlaceObject

  static MotionPrimitive follow(Trajectory t,
                                std::optional<std::string> target = {}) {
    MotionPrimitive m;
    m.kind = Kind::kFollowPath;
    m.trajectory = std::move(t);
    m.approach_object = std::move(target);
    return m;
  }
  static MotionPrimitive inspect(std::string o) {
    MotionPrimitive m;
    m.kind = Kind::kInspectObject;
    m.object = std::move(o);
    return m;
  }
  static MotionPrimitive pick(std::string o) {
    MotionPrimitive m;
    m.kind = Kind::kPickObject;
    m.object = std::move(o);
    return m;
  }
  static MotionPrimitive place(std::string o, Vec2 at) {
    MotionPrimitive m;
    m.kind = Kind::kPlaceObject;
    m.object = std::move(o);
    m.deposit = at;
    return m;
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::kFollowPath:
        return "FollowPath(" + std::to_string(trajectory.waypoints.size()) +
               " poses)";
      case Kind::kInspectObject: return "InspectObject(" + object + ")";
      case Kind::kPickObject: return "PickObject(" + object + ")";
      case Kind::kPlaceObject: return "PlaceObject(" + object + ")";
    }
    return "?";
  }
};

/// A bound plan flattened into executable primitives. groups[k] is the
/// half-open primitive range implementing action k; ranges are contiguous
/// and cover every primitive exactly once.
struct MotionSequence {
  std::vector<MotionPrimitive> primitives;
  std::vector<std::pair<size_t, size_t>> groups;

  std::vector<MotionPrimitive> group(size_t k) const {
    auto [b, e] = groups.at(k);
    return {primitives.begin() + b, primitives.begin() + e};
  }
};

/// Flattens a bound plan: motion actions become FollowPath over their bound
/// trajectory, inspect/pick/place become their primitives. A trajectory that
/// ends on a config some inspect or pick action uses is tagged with that
/// object as its approach target. Throws BindingError on a motion step with
/// no trajectory or a place step with no recorded deposit, ValidationError
/// if consecutive trajectories do not chain pose-continuously.
inline MotionSequence motion_sequence(BoundPlan const& plan) {
  std::map<std::string, std::string> approach_for_config;
  for (auto const& step : plan.steps) {
    auto const& ga = step.action;
    if ((ga.schema == "inspect" || ga.schema == "pick") && ga.args.size() >= 2)
      approach_for_config[ga.args[1]] = ga.args[0];
  }

  MotionSequence seq;
  std::optional<Vec2> cursor;  // end of the last trajectory
  for (auto const& step : plan.steps) {
    auto const& ga = step.action;
    size_t begin = seq.primitives.size();
    if (ga.schema == "move" || ga.schema == "moveRelaxed") {
      if (!step.trajectory)
        throw BindingError("motion action " + ga.to_string() +
                           " has no bound trajectory");
      if (step.trajectory->waypoints.empty())
        throw ValidationError("trajectory of " + ga.to_string() +
                              " has no waypoints");
      if (cursor &&
          dist(*cursor, step.trajectory->waypoints.front().position) >
              kGeomTol)
        throw ValidationError("trajectory of " + ga.to_string() +
                              " does not start where the previous one ended");
      cursor = step.trajectory->waypoints.back().position;
      std::optional<std::string> target;
      if (ga.args.size() >= 4) {
        auto it = approach_for_config.find(ga.args[3]);
        if (it != approach_for_config.end()) target = it->second;
      }
      seq.primitives.push_back(
          MotionPrimitive::follow(*step.trajectory, std::move(target)));
    } else if (ga.schema == "inspect") {
      seq.primitives.push_back(MotionPrimitive::inspect(ga.args[0]));
    } else if (ga.schema == "pick") {
      seq.primitives.push_back(MotionPrimitive::pick(ga.args[0]));
    } else if (ga.schema == "place") {
      auto it = plan.placements.find(ga.args[0]);
      if (it == plan.placements.end())
        throw BindingError("place action " + ga.to_string() +
                           " has no recorded deposit position");
      seq.primitives.push_back(
          MotionPrimitive::place(ga.args[0], it->second));
    }
    seq.groups.emplace_back(begin, seq.primitives.size());
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Verifiers
// ---------------------------------------------------------------------------

/// Facts implied by actually executing a motion sub-sequence.
using Verifier = std::function<State(std::vector<MotionPrimitive> const&)>;

/// VisitedPlace(p) for every place whose closed polygon the sub-sequence's
/// trajectories touch, single-point contact included. Non-motion primitives
/// contribute nothing. A one-pose trajectory counts as a degenerate segment,
/// so it reports every place containing that point.
inline State v_place(std::vector<MotionPrimitive> const& mu,
                     SceneGraph const& graph) {
  std::set<size_t> hit;
  for (auto const& prim : mu) {
    if (prim.kind != MotionPrimitive::Kind::kFollowPath) continue;
    auto const& wps = prim.trajectory.waypoints;
    if (wps.size() == 1) {
      for (size_t i :
           graph.segment_place_intersections(wps[0].position, wps[0].position))
        hit.insert(i);
    }
    for (size_t i = 1; i < wps.size(); ++i)
      for (size_t j : graph.segment_place_intersections(wps[i - 1].position,
                                                        wps[i].position))
        hit.insert(j);
  }
  State out;
  for (size_t i : hit) out.insert(fact("VisitedPlace", {graph.place(i).id}));
  return out;
}

inline Verifier place_verifier(SceneGraph const& graph) {
  return [&graph](std::vector<MotionPrimitive> const& mu) {
    return v_place(mu, graph);
  };
}

inline Verifier empty_verifier() {
  return [](std::vector<MotionPrimitive> const&) { return State{}; };
}

// ---------------------------------------------------------------------------
// Extended state plans
// ---------------------------------------------------------------------------

/// States as experienced during execution: the planned states plus whatever
/// the verifier says really happened, carried forward until deleted.
struct ExtendedStatePlan {
  std::vector<State> states;  // one per plan state, index 0 = initial
};

inline ExtendedStatePlan extend_state_plan(StatePlan const& sp,
                                           MotionSequence const& seq,
                                           Verifier const& verifier) {
  if (seq.groups.size() != sp.actions.size())
    throw ValidationError("motion grouping covers " +
                          std::to_string(seq.groups.size()) + " actions, plan has " +
                          std::to_string(sp.actions.size()));
  ExtendedStatePlan ext;
  ext.states.push_back(sp.states.front());
  for (size_t k = 1; k < sp.states.size(); ++k) {
    GroundAction const& a = sp.actions[k - 1];
    State carried = ext.states[k - 1];
    for (auto const& f : a.eff_del) carried.erase(f);
    State next = sp.states[k];
    next.insert(carried.begin(), carried.end());
    State verified = verifier(seq.group(k - 1));
    next.insert(verified.begin(), verified.end());
    ext.states.push_back(std::move(next));
  }
  return ext;
}

// ---------------------------------------------------------------------------
// Execution consistency
// ---------------------------------------------------------------------------

struct ConsistencyViolation {
  size_t step = 0;   // 1-based action step; plan length = terminal goal check
  Fact fact;
  bool expected = true;  // the truth value the plan relies on
  std::string detail;

  std::string to_string() const {
    return std::string(expected ? "" : "not ") + fact.to_string() + " at step " +
           std::to_string(step) + " (" + detail + ")";
  }
};

struct ConsistencyReport {
  bool consistent = true;
  std::vector<ConsistencyViolation> violations;
};

namespace detail {

inline void goal_disagreements(GoalFormula const& g, State const& s,
                               bool positive, size_t step,
                               std::vector<ConsistencyViolation>& out) {
  switch (g.kind) {
    case GoalFormula::Kind::kFact:
      if (positive && !s.count(g.atom))
        out.push_back({step, g.atom, true, "goal requires this fact"});
      break;
    case GoalFormula::Kind::kNot:
      if (positive && s.count(g.atom))
        out.push_back({step, g.atom, false, "goal forbids this fact"});
      break;
    case GoalFormula::Kind::kAnd:
    case GoalFormula::Kind::kOr:
      for (auto const& c : g.children)
        goal_disagreements(c, s, positive, step, out);
      break;
  }
}

}  // namespace detail

/// Replays the plan over states extended with the facts the place verifier
/// says execution would really add, and demands the plan stays valid: every
/// precondition still holds step-wise and the terminal extended state still
/// satisfies the goal. The plan itself must already be valid un-extended.
inline ConsistencyReport check_execution_consistency(
    ProblemInstance const& problem, BoundPlan const& plan,
    MotionSequence const& seq, SceneGraph const& graph) {
  std::vector<GroundAction> actions = plan.actions();
  StatePlan sp = state_plan(problem.init, actions);
  ExtendedStatePlan ext = extend_state_plan(sp, seq, place_verifier(graph));

  ConsistencyReport rep;
  for (size_t k = 1; k < ext.states.size(); ++k) {
    GroundAction const& a = actions[k - 1];
    for (auto const& f : a.pre_pos)
      if (!ext.states[k - 1].count(f))
        rep.violations.push_back(
            {k, f, true, "precondition lost in the extended state"});
    for (auto const& f : a.pre_neg)
      if (ext.states[k - 1].count(f))
        rep.violations.push_back(
            {k, f, false, "negative precondition broken in the extended state"});
  }
  if (!problem.goal.eval(ext.states.back()))
    detail::goal_disagreements(problem.goal, ext.states.back(), true,
                               actions.size(), rep.violations);
  rep.consistent = rep.violations.empty();
  return rep;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct SimConfig {
  double dt = 0.05;        // seconds per tick
  double speed = 1.0;      // m/s along trajectories
  double clearance = 0.2;  // matches the binder's sampling clearance
  // In domains with pick, safe unheld objects block at physical radius.
  bool safe_objects_block = false;
};

struct SimTick {
  double t = 0.0;
  Pose pose;
  std::optional<std::string> place;
  std::map<std::string, ObjectStatus> statuses;
  std::optional<std::string> held;
};

struct SimFault {
  size_t tick = 0;
  std::string object;
  std::string detail;
};

struct ExecutionTrace {
  std::vector<SimTick> ticks;
  std::vector<SimFault> faults;
  std::map<std::string, Vec2> final_positions;
};

namespace detail {

inline Pose pose_at_arclength(std::vector<Pose> const& wps, double s) {
  double acc = 0.0;
  for (size_t i = 1; i < wps.size(); ++i) {
    double seg = dist(wps[i - 1].position, wps[i].position);
    if (seg <= 0.0) continue;
    if (s <= acc + seg) {
      double u = (s - acc) / seg;
      Vec2 d = wps[i].position - wps[i - 1].position;
      return {wps[i - 1].position + d * u,
              normalize_heading(std::atan2(d.y, d.x))};
    }
    acc += seg;
  }
  return wps.back();
}

}  // namespace detail

/// Steps the robot along the sequence at fixed speed, toggling object state
/// on inspect/pick/place, and records pose, containing place, and object
/// statuses per tick. Faults mirror the binder's collision rules: an active
/// disc touched mid-trajectory, a physical disc touched even on approach,
/// entering an approach target's inflated disc on a trajectory that does not
/// end there, leaving it again once entered, or a placement overlapping
/// another object. Planner output must produce an empty fault list.
inline ExecutionTrace simulate(MotionSequence const& seq,
                               SceneGraph const& graph, SimConfig cfg = {}) {
  ExecutionTrace trace;
  std::map<std::string, ObjectStatus> statuses;
  std::map<std::string, Vec2> positions;
  for (auto const& o : graph.objects) {
    statuses[o.id] = o.status;
    positions[o.id] = o.position;
  }
  std::optional<std::string> held;

  Pose pose{{0.0, 0.0}, 0.0};
  for (auto const& prim : seq.primitives)
    if (prim.kind == MotionPrimitive::Kind::kFollowPath &&
        !prim.trajectory.waypoints.empty()) {
      pose = prim.trajectory.waypoints.front();
      break;
    }

  double now = 0.0;
  auto effective_radius = [&](std::string const& id) -> double {
    ObjectNode const& o = graph.object(*graph.object_index(id));
    if (statuses[id] == ObjectStatus::kSuspicious)
      return o.inflated_radius + cfg.clearance;
    if (cfg.safe_objects_block) return o.radius + cfg.clearance;
    return 0.0;
  };

  auto emit = [&]() {
    auto pi = graph.place_containing(pose.position);
    trace.ticks.push_back(
        {now, pose, pi ? std::optional(graph.place(*pi).id) : std::nullopt,
         statuses, held});
  };

  // Collision state for the trajectory currently being walked.
  std::optional<std::string> target;
  bool sanctioned = false;
  bool entered = false;
  auto check = [&]() {
    size_t tick = trace.ticks.size() - 1;
    for (auto const& [id, center] : positions) {
      if (held && *held == id) continue;
      double r_eff = effective_radius(id);
      double d = dist(pose.position, center);
      if (target && *target == id) {
        ObjectNode const& o = graph.object(*graph.object_index(id));
        if (d <= o.radius)
          trace.faults.push_back({tick, id, "entered the physical disc"});
        if (r_eff <= 0.0) continue;
        if (d <= r_eff) {
          if (!sanctioned)
            trace.faults.push_back(
                {tick, id, "crossed the inflated disc on a pass-through"});
          entered = true;
        } else if (entered) {
          trace.faults.push_back(
              {tick, id, "left the approach zone before acting"});
        }
      } else if (r_eff > 0.0 && d <= r_eff) {
        trace.faults.push_back({tick, id, "crossed an active disc"});
      }
    }
  };

  emit();
  check();

  for (auto const& prim : seq.primitives) {
    switch (prim.kind) {
      case MotionPrimitive::Kind::kFollowPath: {
        auto const& wps = prim.trajectory.waypoints;
        if (wps.empty()) break;
        target = prim.approach_object;
        sanctioned = false;
        entered = false;
        if (target && positions.count(*target)) {
          double r_eff = effective_radius(*target);
          sanctioned = r_eff > 0.0 &&
                       dist(wps.back().position, positions[*target]) <= r_eff;
        }
        double L = prim.trajectory.length();
        size_t n = static_cast<size_t>(std::ceil(L / (cfg.speed * cfg.dt)));
        for (size_t j = 1; j <= n; ++j) {
          double s = std::min(static_cast<double>(j) * cfg.speed * cfg.dt, L);
          pose = detail::pose_at_arclength(wps, s);
          if (held) positions[*held] = pose.position;
          now += cfg.dt;
          emit();
          check();
        }
        pose = wps.back();  // exact endpoint, stored approach heading
        target.reset();
        break;
      }
      case MotionPrimitive::Kind::kInspectObject:
        statuses[prim.object] = ObjectStatus::kSafe;
        emit();
        break;
      case MotionPrimitive::Kind::kPickObject:
        held = prim.object;
        emit();
        break;
      case MotionPrimitive::Kind::kPlaceObject: {
        positions[prim.object] = prim.deposit;
        held.reset();
        ObjectNode const& o = graph.object(*graph.object_index(prim.object));
        for (auto const& [id, center] : positions) {
          if (id == prim.object) continue;
          ObjectNode const& other = graph.object(*graph.object_index(id));
          if (dist(prim.deposit, center) <= o.radius + other.radius)
            trace.faults.push_back({trace.ticks.size(), id,
                                    "placement overlaps this object"});
        }
        emit();
        break;
      }
    }
  }

  trace.final_positions = positions;
  return trace;
}

}  // namespace sgtamp
