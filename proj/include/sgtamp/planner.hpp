#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "sgtamp/base.hpp"
#include "sgtamp/domains.hpp"
#include "sgtamp/scene_graph.hpp"
#include "sgtamp/streams.hpp"
#include "sgtamp/task_core.hpp"

namespace sgtamp {

// ---------------------------------------------------------------------------
// Optimistic grounding
// ---------------------------------------------------------------------------

/// How a configuration symbol is meant to be bound: the fixed start pose, a
/// free pose inside a place, or an approach pose near an object.
struct ConfigRole {
  enum class Kind { kInit, kPlacePose, kInspect, kGrasp };
  Kind kind = Kind::kPlacePose;
  std::string place;   // certifying PoseInPlace(c, place)
  std::string object;  // kInspect / kGrasp only
};

/// The optimistic universe: fresh configuration and trajectory symbols, the
/// facts their streams would certify, and every ground action over them.
struct Grounding {
  std::vector<GroundAction> actions;
  std::map<std::string, ConfigRole> config_roles;
  std::map<std::string, std::pair<std::string, std::string>> traj_endpoints;
  State certified;
  std::vector<Symbol> added_symbols;
};

namespace detail {

inline std::string config_for_place(std::string const& place) {
  return "c_" + place;
}

/// Splitmix-style mixer for deterministic per-(skeleton, round) RNG seeds.
inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c = 0) {
  uint64_t x = a * 0x9e3779b97f4a7c15ull + b * 0xbf58476d1ce4e5b9ull +
               c * 0x94d049bb133111ebull + 0x2545f4914f6cdd1dull;
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

}  // namespace detail

/// Start place of an instance, read off the AtPlace fact.
inline std::optional<std::string> instance_start_place(
    ProblemInstance const& problem) {
  for (auto const& f : problem.init)
    if (f.name == "AtPlace" && f.args.size() == 1) return f.args[0];
  return std::nullopt;
}

/// Places the goal forbids: any place under a negated VisitedPlace literal,
/// wherever it occurs in the formula. Binding exempts, per action, the
/// places that action is itself parameterized on.
inline std::set<std::string> goal_avoid_places(GoalFormula const& g) {
  std::set<std::string> out;
  if (g.kind == GoalFormula::Kind::kNot) {
    if (g.atom.name == "VisitedPlace" && g.atom.args.size() == 1)
      out.insert(g.atom.args[0]);
    return out;
  }
  for (auto const& c : g.children) {
    auto sub = goal_avoid_places(c);
    out.insert(sub.begin(), sub.end());
  }
  return out;
}

/// Count of distinct symbols named by the goal's facts.
inline size_t unique_goal_symbols(GoalFormula const& g) {
  std::set<std::string> syms;
  for (auto const& f : g.facts())
    for (auto const& a : f.args) syms.insert(a);
  return syms.size();
}

/// Builds the optimistic universe for an instance: one pose config per place,
/// one approach config per suspicious object (plus one grasp config per
/// object when the domain has pick), a fresh trajectory symbol per ground
/// move, and all ground actions over them. Pre-existing config symbols with
/// certified facts in init participate unchanged. Sparse encodings ground
/// moves between every config pair; same-place moves only toward approach
/// configs (repositioning inside a place has no other symbolic effect). Dense
/// encodings ground along Connected pairs only.
inline Grounding ground_optimistic(ProblemInstance const& problem,
                                   WorkMeter& wm) {
  Grounding g;
  bool const dense = problem.schema("move") != nullptr;
  bool const retrieval = problem.schema("pick") != nullptr;
  ActionSchema const* move_schema =
      dense ? problem.schema("move") : problem.schema("moveRelaxed");
  ActionSchema const* inspect_sc = problem.schema("inspect");
  ActionSchema const* pick_sc = problem.schema("pick");
  ActionSchema const* place_sc = problem.schema("place");

  auto start = instance_start_place(problem);
  if (!start) throw ValidationError("instance has no AtPlace start fact");

  // Object containment and status from init.
  std::map<std::string, std::string> object_place;
  std::set<std::string> suspicious;
  for (auto const& f : problem.init) {
    if (f.name == "ObjectInPlace") object_place[f.args[0]] = f.args[1];
    if (f.name == "Suspicious") suspicious.insert(f.args[0]);
  }

  struct Cfg {
    std::string name;
    std::string place;
  };
  std::vector<Cfg> configs;
  auto add_config = [&](std::string name, ConfigRole role) {
    configs.push_back({name, role.place});
    g.config_roles.emplace(std::move(name), std::move(role));
  };

  // Pre-existing configs keep their certified facts; infer roles from init.
  for (auto const& s : problem.symbols) {
    if (s.kind != SymbolKind::kConfig) continue;
    ConfigRole role;
    role.kind = s.name == kInitConfig ? ConfigRole::Kind::kInit
                                      : ConfigRole::Kind::kPlacePose;
    for (auto const& f : problem.init) {
      if (f.name == "PoseInPlace" && f.args[0] == s.name) role.place = f.args[1];
      if (f.name == "InspectPose" && f.args[0] == s.name) {
        role.kind = ConfigRole::Kind::kInspect;
        role.object = f.args[1];
      }
      if (f.name == "GraspPose" && f.args[0] == s.name) {
        role.kind = ConfigRole::Kind::kGrasp;
        role.object = f.args[1];
      }
    }
    if (role.place.empty()) continue;  // unanchored config: unusable
    add_config(s.name, role);
  }

  auto certify = [&](Fact f) { g.certified.insert(std::move(f)); };

  for (auto const& s : problem.symbols) {
    if (s.kind != SymbolKind::kPlace) continue;
    std::string name = detail::config_for_place(s.name);
    ++wm.ground_units;
    certify(fact("PoseInPlace", {name, s.name}));
    add_config(name, {ConfigRole::Kind::kPlacePose, s.name, ""});
    g.added_symbols.push_back({name, SymbolKind::kConfig});
  }
  for (auto const& s : problem.symbols) {
    if (s.kind != SymbolKind::kObject) continue;
    auto it = object_place.find(s.name);
    if (it == object_place.end()) continue;
    if (suspicious.count(s.name) && inspect_sc) {
      std::string name = "ci_" + s.name;
      ++wm.ground_units;
      certify(fact("InspectPose", {name, s.name}));
      certify(fact("PoseInPlace", {name, it->second}));
      add_config(name, {ConfigRole::Kind::kInspect, it->second, s.name});
      g.added_symbols.push_back({name, SymbolKind::kConfig});
    }
    if (retrieval) {
      std::string name = "cg_" + s.name;
      ++wm.ground_units;
      certify(fact("GraspPose", {name, s.name}));
      certify(fact("PoseInPlace", {name, it->second}));
      add_config(name, {ConfigRole::Kind::kGrasp, it->second, s.name});
      g.added_symbols.push_back({name, SymbolKind::kConfig});
    }
  }

  // Trajectories already certified in init are reused for their config pair.
  std::map<std::pair<std::string, std::string>, std::string> pair_traj;
  for (auto const& f : problem.init) {
    if (f.name == "Trajectory" && f.args.size() == 3) {
      pair_traj.emplace(std::make_pair(f.args[0], f.args[2]), f.args[1]);
      g.traj_endpoints.emplace(f.args[1],
                               std::make_pair(f.args[0], f.args[2]));
    }
  }

  std::set<std::pair<std::string, std::string>> connected;
  for (auto const& f : problem.init)
    if (f.name == "Connected") connected.insert({f.args[0], f.args[1]});

  auto is_approach = [&](std::string const& c) {
    auto k = g.config_roles.at(c).kind;
    return k == ConfigRole::Kind::kInspect || k == ConfigRole::Kind::kGrasp;
  };

  size_t traj_counter = 0;
  if (move_schema) {
    for (auto const& a : configs) {
      for (auto const& b : configs) {
        if (a.name == b.name) continue;
        if (a.place == b.place && !is_approach(b.name)) continue;
        if (dense && !connected.count({a.place, b.place})) continue;
        std::string t;
        auto pt = pair_traj.find({a.name, b.name});
        if (pt != pair_traj.end()) {
          t = pt->second;
        } else {
          t = "t" + std::to_string(traj_counter++);
          g.added_symbols.push_back({t, SymbolKind::kTrajectory});
          g.traj_endpoints.emplace(t, std::make_pair(a.name, b.name));
          certify(fact("Trajectory", {a.name, t, b.name}));
        }
        ++wm.ground_units;
        g.actions.push_back(ground(
            *move_schema, {{a.place, SymbolKind::kPlace},
                           {b.place, SymbolKind::kPlace},
                           {a.name, SymbolKind::kConfig},
                           {b.name, SymbolKind::kConfig},
                           {t, SymbolKind::kTrajectory}}));
      }
    }
  }

  if (inspect_sc) {
    for (auto const& [c, role] : g.config_roles) {
      if (role.kind != ConfigRole::Kind::kInspect) continue;
      ++wm.ground_units;
      g.actions.push_back(ground(*inspect_sc, {{role.object, SymbolKind::kObject},
                                               {c, SymbolKind::kConfig}}));
    }
  }
  if (pick_sc) {
    for (auto const& [c, role] : g.config_roles) {
      if (role.kind != ConfigRole::Kind::kGrasp) continue;
      ++wm.ground_units;
      g.actions.push_back(ground(*pick_sc, {{role.object, SymbolKind::kObject},
                                            {c, SymbolKind::kConfig}}));
    }
  }
  if (place_sc) {
    for (auto const& s : problem.symbols) {
      if (s.kind != SymbolKind::kObject) continue;
      for (auto const& c : configs) {
        ++wm.ground_units;
        g.actions.push_back(ground(*place_sc, {{s.name, SymbolKind::kObject},
                                               {c.name, SymbolKind::kConfig},
                                               {c.place, SymbolKind::kPlace}}));
      }
    }
  }
  return g;
}

/// The instance extended with the optimistic symbols a plan references and
/// their certified facts; the result is what plan_valid judges bound plans
/// against. Works against the solved instance and, because roles only name
/// places and objects that instance shares with its parent, against the
/// original unpruned instance as well.
inline ProblemInstance extend_instance(ProblemInstance base,
                                       Grounding const& grounding,
                                       std::vector<GroundAction> const& plan) {
  std::set<std::string> have;
  for (auto const& s : base.symbols) have.insert(s.name);
  auto add_config = [&](std::string const& c) {
    if (have.count(c) || !grounding.config_roles.count(c)) return;
    have.insert(c);
    base.symbols.push_back({c, SymbolKind::kConfig});
    auto const& role = grounding.config_roles.at(c);
    base.init.insert(fact("PoseInPlace", {c, role.place}));
    if (role.kind == ConfigRole::Kind::kInspect)
      base.init.insert(fact("InspectPose", {c, role.object}));
    if (role.kind == ConfigRole::Kind::kGrasp)
      base.init.insert(fact("GraspPose", {c, role.object}));
  };
  for (auto const& ga : plan) {
    for (auto const& arg : ga.args) {
      if (have.count(arg)) continue;
      auto tr = grounding.traj_endpoints.find(arg);
      if (tr != grounding.traj_endpoints.end()) {
        add_config(tr->second.first);
        add_config(tr->second.second);
        have.insert(arg);
        base.symbols.push_back({arg, SymbolKind::kTrajectory});
        base.init.insert(
            fact("Trajectory", {tr->second.first, arg, tr->second.second}));
      } else {
        add_config(arg);
      }
    }
  }
  return base;
}

// ---------------------------------------------------------------------------
// Skeleton search
// ---------------------------------------------------------------------------

struct PlanSkeleton {
  std::vector<GroundAction> actions;
  int cost = 0;  // action count
};

/// Lazy best-first enumeration of symbolically valid skeletons in
/// nondecreasing cost order without duplicates. Costs are unit; the heuristic
/// is the least over live goal clauses of ceil(unsatisfied / d) where d is
/// the largest number of goal literals any single ground action can flip, so
/// it is admissible and consistent. A clause dies when a negated literal
/// over a never-deleted predicate comes true; with no live clauses a state is
/// pruned.
///
/// Nodes hold only (parent, action); states are replayed on demand, so a node
/// costs 32 bytes and large searches stay in memory. Plan variety is bounded
/// by capping non-goal pops per projected state, where the projection drops
/// VisitedPlace facts of places the goal never names. No action precondition
/// reads VisitedPlace, so applicability, clause status, and hence
/// goal-reachability are functions of the projection alone: skipping a
/// duplicate pop can hide alternative paths but never reachability. The cap
/// starts at 1 (plain deduplicated search) and the whole search restarts with
/// a doubled cap when a caller wants plans beyond the variety the current cap
/// exposed; plans already yielded are skipped by signature. Goal pops bypass
/// the cap entirely. Cycles are refused by comparing projections along the
/// path being extended.
class SkeletonGenerator {
 public:
  SkeletonGenerator(ProblemInstance const& problem, Grounding const& grounding,
                    int max_k, WorkMeter& wm, size_t node_cap = 3'000'000)
      : wm_(wm), max_k_(max_k), node_cap_(node_cap) {
    compile(problem, grounding);
  }

  /// Next cheapest skeleton; nullopt when exhausted, capped, or out of
  /// budget (distinguish with exhausted()).
  std::optional<PlanSkeleton> next() {
    if (exhausted_ || given_up_) return std::nullopt;
    if (yields_ >= static_cast<size_t>(max_k_)) return std::nullopt;
    if (!run_active_) start_run();
    for (;;) {
      while (!open_.empty()) {
        if (wm_.exhausted()) return std::nullopt;
        auto [f, seq, idx] = open_.top();
        open_.pop();
        ++wm_.expansions;
        wm_.replay_units += static_cast<uint64_t>(nodes_[idx].g);
        Node const n = nodes_[idx];
        IdSet state = rebuild(idx);
        if (goal_satisfied(state)) {
          std::vector<int32_t> sig = signature(idx);
          if (!yielded_sigs_.insert(sig).second) continue;  // rerun rediscovery
          // A restarted run can surface a plan cheaper than ones already
          // handed out. Returning it would break the nondecreasing-cost
          // contract, so it is recorded and dropped.
          if (n.g < floor_cost_) continue;
          floor_cost_ = n.g;
          ++yields_;
          new_yield_this_run_ = true;
          return reconstruct(sig);
        }
        int& pops = pops_[project(state)];
        if (pops >= cap_) {
          cap_skipped_ = true;
          continue;
        }
        ++pops;
        if (n.g >= kMaxPlanLen) {
          truncated_ = true;
          continue;
        }
        expand(idx, n, state);
      }
      run_active_ = false;
      // Duplicate pops never hide goal reachability, so a drained open list
      // with zero lifetime yields is a proof of symbolic infeasibility as
      // long as nothing was dropped or depth-truncated.
      if (!dropped_ && !truncated_ && (!cap_skipped_ || yields_ == 0)) {
        exhausted_ = true;
        return std::nullopt;
      }
      if (dropped_ || wm_.exhausted()) return std::nullopt;
      futile_runs_ = new_yield_this_run_ ? 0 : futile_runs_ + 1;
      if (futile_runs_ >= 2 || cap_ > kCapGuard) {
        given_up_ = true;  // doubling the cap stopped paying off
        return std::nullopt;
      }
      cap_ *= 2;
      start_run();
    }
  }

  /// True when the symbolic space is provably used up (no budget involved):
  /// zero lifetime yields then mean symbolic infeasibility.
  bool exhausted() const { return exhausted_; }
  size_t yielded() const { return yields_; }

  static constexpr int kMaxPlanLen = 128;

 private:
  using IdSet = std::vector<uint32_t>;

  struct CompiledAction {
    uint32_t index = 0;  // into actions_
    IdSet pre_pos, pre_neg;  // dynamic facts only
    IdSet add, del;
  };

  struct CompiledClause {
    std::vector<std::pair<uint32_t, bool>> lits;  // (atom id, positive)
  };

  struct Node {
    int32_t g = 0;
    int32_t h = 0;
    uint32_t parent = UINT32_MAX;
    int32_t action = -1;  // compiled index that produced this node
    uint64_t proj_hash = 0;
    uint32_t config_fact = UINT32_MAX;
  };

  static constexpr int kInfinite = 1 << 29;
  static constexpr int kCapGuard = 1 << 20;

  uint32_t intern(Fact const& f) {
    auto it = ids_.find(f);
    if (it != ids_.end()) return it->second;
    uint32_t id = static_cast<uint32_t>(facts_.size());
    facts_.push_back(f);
    ids_.emplace(f, id);
    return id;
  }

  static bool id_contains(IdSet const& s, uint32_t id) {
    return std::binary_search(s.begin(), s.end(), id);
  }
  static bool id_subset(IdSet const& a, IdSet const& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  }
  static IdSet id_apply(IdSet const& s, IdSet const& del, IdSet const& add) {
    IdSet out;
    out.reserve(s.size() + add.size());
    std::set_difference(s.begin(), s.end(), del.begin(), del.end(),
                        std::back_inserter(out));
    IdSet merged;
    merged.reserve(out.size() + add.size());
    std::set_union(out.begin(), out.end(), add.begin(), add.end(),
                   std::back_inserter(merged));
    return merged;
  }

  void compile(ProblemInstance const& problem, Grounding const& grounding) {
    actions_ = grounding.actions;

    std::set<std::string> dynamic_preds;
    for (auto const& a : actions_) {
      for (auto const& f : a.eff_add) dynamic_preds.insert(f.name);
      for (auto const& f : a.eff_del) dynamic_preds.insert(f.name);
    }
    never_deleted_ = dynamic_preds;
    for (auto const& a : actions_)
      for (auto const& f : a.eff_del) never_deleted_.erase(f.name);

    std::set<Fact> static_true;
    IdSet root;
    for (auto const& f : problem.init) {
      if (dynamic_preds.count(f.name)) {
        root.push_back(intern(f));
      } else {
        static_true.insert(f);
      }
    }
    for (auto const& f : grounding.certified)
      if (!dynamic_preds.count(f.name)) static_true.insert(f);
    std::sort(root.begin(), root.end());
    root.erase(std::unique(root.begin(), root.end()), root.end());

    // Compile actions; ones with a statically false precondition are dead.
    for (uint32_t i = 0; i < actions_.size(); ++i) {
      auto const& ga = actions_[i];
      CompiledAction ca;
      ca.index = i;
      bool dead = false;
      for (auto const& f : ga.pre_pos) {
        if (dynamic_preds.count(f.name)) {
          ca.pre_pos.push_back(intern(f));
        } else if (!static_true.count(f)) {
          dead = true;
          break;
        }
      }
      for (auto const& f : ga.pre_neg) {
        if (dynamic_preds.count(f.name)) {
          ca.pre_neg.push_back(intern(f));
        } else if (static_true.count(f)) {
          dead = true;
          break;
        }
      }
      if (dead) continue;
      for (auto const& f : ga.eff_add) ca.add.push_back(intern(f));
      for (auto const& f : ga.eff_del) ca.del.push_back(intern(f));
      for (auto* v : {&ca.pre_pos, &ca.pre_neg, &ca.add, &ca.del}) {
        std::sort(v->begin(), v->end());
        v->erase(std::unique(v->begin(), v->end()), v->end());
      }
      compiled_.push_back(std::move(ca));
    }

    // Goal to DNF with static literals resolved away.
    for (auto const& clause : to_dnf_clauses(problem.goal)) {
      CompiledClause cc;
      bool dead = false;
      for (auto const& lit : clause) {
        if (!dynamic_preds.count(lit.atom.name)) {
          bool holds = static_true.count(lit.atom) != 0;
          if (holds != lit.positive) {
            dead = true;
            break;
          }
          continue;
        }
        cc.lits.emplace_back(intern(lit.atom), lit.positive);
      }
      if (!dead) clauses_.push_back(std::move(cc));
    }

    // Heuristic divisor: most goal literals one action can flip.
    std::set<uint32_t> pos_goal, neg_goal;
    for (auto const& cc : clauses_)
      for (auto const& [id, positive] : cc.lits)
        (positive ? pos_goal : neg_goal).insert(id);
    divisor_ = 1;
    for (auto const& ca : compiled_) {
      int flips = 0;
      for (auto id : ca.add) flips += pos_goal.count(id);
      for (auto id : ca.del) flips += neg_goal.count(id);
      divisor_ = std::max(divisor_, flips);
    }

    // Facts that matter for duplicate detection: everything except
    // VisitedPlace over places the goal never mentions.
    std::set<std::string> goal_places;
    for (auto const& f : problem.goal.facts())
      if (f.name == "VisitedPlace") goal_places.insert(f.args[0]);
    in_key_.assign(facts_.size(), true);
    for (uint32_t id = 0; id < facts_.size(); ++id)
      if (facts_[id].name == "VisitedPlace" &&
          !goal_places.count(facts_[id].args[0]))
        in_key_[id] = false;

    // Index actions by their AtConfig precondition.
    for (uint32_t i = 0; i < compiled_.size(); ++i) {
      uint32_t cf = UINT32_MAX;
      for (auto id : compiled_[i].pre_pos)
        if (facts_[id].name == "AtConfig") cf = id;
      if (cf == UINT32_MAX) {
        unindexed_.push_back(i);
      } else {
        by_config_[cf].push_back(i);
      }
    }

    root_state_ = std::move(root);
    root_h_ = heuristic(root_state_);
    root_proj_hash_ = hash_projection(root_state_);
    for (auto id : root_state_)
      if (facts_[id].name == "AtConfig") root_config_ = id;
  }

  void start_run() {
    nodes_.clear();
    pops_.clear();
    open_ = OpenQueue();
    seq_ = 0;
    cap_skipped_ = false;
    truncated_ = false;
    new_yield_this_run_ = false;
    run_active_ = true;
    if (root_h_ >= kInfinite) return;
    Node root;
    root.h = root_h_;
    root.proj_hash = root_proj_hash_;
    root.config_fact = root_config_;
    nodes_.push_back(root);
    open_.push({root.h, seq_++, 0});
  }

  /// State of a node, replayed from the root along its action chain.
  IdSet rebuild(uint32_t idx) const {
    std::vector<int32_t> chain;
    for (uint32_t at = idx; nodes_[at].action >= 0; at = nodes_[at].parent)
      chain.push_back(nodes_[at].action);
    IdSet s = root_state_;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      auto const& ca = compiled_[static_cast<size_t>(*it)];
      for (auto id : ca.del) {
        auto p = std::lower_bound(s.begin(), s.end(), id);
        if (p != s.end() && *p == id) s.erase(p);
      }
      for (auto id : ca.add) {
        auto p = std::lower_bound(s.begin(), s.end(), id);
        if (p == s.end() || *p != id) s.insert(p, id);
      }
    }
    return s;
  }

  /// Compiled-action indices along the path to a node, execution order.
  std::vector<int32_t> signature(uint32_t idx) const {
    std::vector<int32_t> sig;
    for (uint32_t at = idx; nodes_[at].action >= 0; at = nodes_[at].parent)
      sig.push_back(nodes_[at].action);
    std::reverse(sig.begin(), sig.end());
    return sig;
  }

  int heuristic(IdSet const& s) const {
    int best = kInfinite;
    for (auto const& cc : clauses_) {
      int unsat = 0;
      bool dead = false;
      for (auto const& [id, positive] : cc.lits) {
        bool holds = id_contains(s, id);
        if (positive) {
          unsat += !holds;
        } else if (holds) {
          if (never_deleted_.count(facts_[id].name)) {
            dead = true;
            break;
          }
          ++unsat;
        }
      }
      if (dead) continue;
      best = std::min(best, (unsat + divisor_ - 1) / divisor_);
    }
    return best;
  }

  bool goal_satisfied(IdSet const& s) const {
    for (auto const& cc : clauses_) {
      bool ok = true;
      for (auto const& [id, positive] : cc.lits) {
        if (id_contains(s, id) != positive) {
          ok = false;
          break;
        }
      }
      if (ok) return true;
    }
    return false;
  }

  IdSet project(IdSet const& s) const {
    IdSet out;
    out.reserve(s.size());
    for (auto id : s)
      if (in_key_[id]) out.push_back(id);
    return out;
  }

  uint64_t hash_projection(IdSet const& s) const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (auto id : s) {
      if (!in_key_[id]) continue;
      h ^= id;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  PlanSkeleton reconstruct(std::vector<int32_t> const& sig) const {
    PlanSkeleton sk;
    sk.actions.reserve(sig.size());
    for (auto ci : sig)
      sk.actions.push_back(actions_[compiled_[static_cast<size_t>(ci)].index]);
    sk.cost = static_cast<int>(sk.actions.size());
    return sk;
  }

  void expand(uint32_t idx, Node const& n, IdSet const& state) {
    std::vector<uint32_t> const* indexed = nullptr;
    if (n.config_fact != UINT32_MAX) {
      auto it = by_config_.find(n.config_fact);
      if (it != by_config_.end()) indexed = &it->second;
    }
    auto try_action = [&](uint32_t ci) {
      auto const& ca = compiled_[ci];
      if (!id_subset(ca.pre_pos, state)) return;
      for (auto id : ca.pre_neg)
        if (id_contains(state, id)) return;
      ++wm_.generated;
      IdSet child_state = id_apply(state, ca.del, ca.add);
      uint64_t proj_hash = hash_projection(child_state);
      // Reject cycles: the same projection seen anywhere on this path.
      for (uint32_t at = idx;; at = nodes_[at].parent) {
        if (nodes_[at].proj_hash == proj_hash) return;
        if (nodes_[at].parent == UINT32_MAX) break;
      }
      int h = heuristic(child_state);
      if (h >= kInfinite) return;
      if (nodes_.size() >= node_cap_) {
        dropped_ = true;
        return;
      }
      Node child;
      child.g = n.g + 1;
      child.h = h;
      child.parent = idx;
      child.action = static_cast<int32_t>(ci);
      child.proj_hash = proj_hash;
      child.config_fact = n.config_fact;
      for (auto id : ca.add)
        if (facts_[id].name == "AtConfig") child.config_fact = id;
      nodes_.push_back(child);
      open_.push({child.g + child.h, seq_++,
                  static_cast<uint32_t>(nodes_.size() - 1)});
    };
    if (indexed)
      for (auto ci : *indexed) try_action(ci);
    for (auto ci : unindexed_) try_action(ci);
  }

  WorkMeter& wm_;
  int max_k_;
  size_t node_cap_;

  std::vector<Fact> facts_;
  std::map<Fact, uint32_t> ids_;
  std::vector<GroundAction> actions_;
  std::vector<CompiledAction> compiled_;
  std::vector<CompiledClause> clauses_;
  std::set<std::string> never_deleted_;
  std::vector<bool> in_key_;
  int divisor_ = 1;
  std::map<uint32_t, std::vector<uint32_t>> by_config_;
  std::vector<uint32_t> unindexed_;
  IdSet root_state_;
  int root_h_ = kInfinite;
  uint64_t root_proj_hash_ = 0;
  uint32_t root_config_ = UINT32_MAX;

  // Lifetime enumeration state.
  size_t yields_ = 0;
  int floor_cost_ = 0;
  bool exhausted_ = false;
  bool given_up_ = false;
  bool dropped_ = false;
  int futile_runs_ = 0;
  std::set<std::vector<int32_t>> yielded_sigs_;

  // Per-run state.
  using OpenQueue =
      std::priority_queue<std::tuple<int, uint64_t, uint32_t>,
                          std::vector<std::tuple<int, uint64_t, uint32_t>>,
                          std::greater<>>;
  int cap_ = 1;
  bool run_active_ = false;
  bool cap_skipped_ = false;
  bool truncated_ = false;
  bool new_yield_this_run_ = false;
  std::vector<Node> nodes_;
  std::map<IdSet, int> pops_;
  uint64_t seq_ = 0;
  OpenQueue open_;
};

// ---------------------------------------------------------------------------
// Binding
// ---------------------------------------------------------------------------

/// A failed trajectory attempt: which step of which skeleton, and the ids of
/// the objects whose discs got in the way.
struct BlockingRecord {
  size_t skeleton_index = 0;
  size_t action_index = 0;
  std::vector<std::string> blockers;

  friend bool operator<(BlockingRecord const& a, BlockingRecord const& b) {
    return std::tie(a.skeleton_index, a.action_index, a.blockers) <
           std::tie(b.skeleton_index, b.action_index, b.blockers);
  }
  friend bool operator==(BlockingRecord const& a, BlockingRecord const& b) {
    return a.skeleton_index == b.skeleton_index &&
           a.action_index == b.action_index && a.blockers == b.blockers;
  }
};

struct BoundStep {
  GroundAction action;
  std::optional<Trajectory> trajectory;  // move actions only
};

struct BoundPlan {
  std::vector<BoundStep> steps;
  std::map<std::string, Pose> config_poses;
  std::map<std::string, Vec2> placements;  // object -> put-down position

  std::vector<GroundAction> actions() const {
    std::vector<GroundAction> out;
    out.reserve(steps.size());
    for (auto const& s : steps) out.push_back(s.action);
    return out;
  }
};

enum class BindStatus {
  kBound,
  kRetry,  // sample budget ran out; more samples might succeed
  kDead,   // structural failure (disconnection / avoid severance); never retry
};

struct BindOutcome {
  BindStatus status = BindStatus::kRetry;
  std::optional<BoundPlan> plan;
  std::vector<BlockingRecord> feedback;  // skeleton_index left 0 for caller
};

namespace detail {

inline bool disc_overlaps_polygon(Polygon const& poly, Vec2 center,
                                  double radius) {
  if (point_in_polygon(poly, center)) return true;
  for (size_t i = 0; i < poly.size(); ++i) {
    Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    if (point_segment_distance(center, a, b) <= radius) return true;
  }
  return false;
}

/// Appends to the trajectory's place sequence the new places a segment
/// enters, in crossing order. Used when a radial approach tail is welded
/// onto a refined trajectory.
inline void extend_place_sequence(SceneGraph const& graph, Trajectory& t,
                                  Vec2 a, Vec2 b) {
  std::set<std::string> seen(t.place_sequence.begin(), t.place_sequence.end());
  for (auto const& [param, pi] : graph.ordered_segment_crossings(a, b)) {
    std::string const& id = graph.place(pi).id;
    if (seen.insert(id).second) t.place_sequence.push_back(id);
  }
}

}  // namespace detail

/// Grounds a skeleton's continuous parameters by running the streams in plan
/// order: poses for configurations, then a route plus refinement for each
/// trajectory. Obstacles for step k come from the symbolic state before k:
/// suspicious objects block at inflated radius plus clearance, and in domains
/// with pick, safe unheld objects block at physical radius plus clearance.
/// Goal-forbidden places are avoided except those the current action is
/// parameterized on. An approach pose inside its own target's effective disc
/// is reached by refining to a radial entry point just outside the disc and
/// descending radially, which is checked against the target's physical disc,
/// so the trajectory enters the disc exactly once. The whole attempt restarts
/// with fresh samples until the stream-call budget runs out; structural route
/// failures end it early as dead.
inline BindOutcome bind_skeleton(SceneGraph const& graph,
                                 ProblemInstance const& problem,
                                 Grounding const& grounding,
                                 std::vector<GroundAction> const& skeleton,
                                 std::set<std::string> const& global_avoid,
                                 StreamConfig const& scfg, int sample_budget,
                                 Rng& rng, WorkMeter& wm) {
  BindOutcome out;
  std::set<BlockingRecord> feedback;

  auto start = instance_start_place(problem);
  if (!start) {
    out.status = BindStatus::kDead;
    return out;
  }
  auto start_pi = graph.place_index(*start);
  if (!start_pi) {
    out.status = BindStatus::kDead;
    return out;
  }
  Pose const start_pose{graph.place(*start_pi).centroid, 0.0};

  bool const retrieval = problem.schema("pick") != nullptr;
  std::set<std::string> instance_objects;
  std::set<std::string> init_suspicious;
  for (auto const& s : problem.symbols)
    if (s.kind == SymbolKind::kObject) instance_objects.insert(s.name);
  for (auto const& f : problem.init)
    if (f.name == "Suspicious") init_suspicious.insert(f.args[0]);

  auto record = [&](size_t step, std::vector<std::string> blockers) {
    if (!blockers.empty()) feedback.insert({0, step, std::move(blockers)});
  };

  int calls_used = 0;
  auto charge_call = [&]() {
    ++calls_used;
    return calls_used <= sample_budget && !wm.exhausted();
  };

  while (calls_used < sample_budget && !wm.exhausted()) {
    // One full forward pass with fresh values.
    std::map<std::string, Pose> poses{{kInitConfig, start_pose}};
    std::map<std::string, Trajectory> trajectories;
    std::map<std::string, Vec2> positions;  // current object centers
    std::map<std::string, Vec2> placements;
    std::set<std::string> suspicious = init_suspicious;
    std::optional<std::string> held;
    for (auto const& id : instance_objects) {
      auto oi = graph.object_index(id);
      if (!oi) throw ValidationError("instance object " + id + " not in scene");
      positions[id] = graph.object(*oi).position;
    }

    // Effective obstacle radius of an object in the current symbolic state.
    auto effective_radius = [&](std::string const& id) -> double {
      ObjectNode const& o = graph.object(*graph.object_index(id));
      if (suspicious.count(id)) return o.inflated_radius + scfg.clearance;
      if (retrieval) return o.radius + scfg.clearance;
      return 0.0;  // safe objects do not block inspection-only domains
    };
    auto active_discs = [&](std::string const& exempt) {
      std::vector<Disc> discs;
      for (auto const& id : instance_objects) {
        if (held && *held == id) continue;
        if (id == exempt) continue;
        double r = effective_radius(id);
        if (r <= 0.0) continue;
        discs.push_back({positions[id], r, id});
      }
      return discs;
    };

    bool pass_failed = false;
    bool dead = false;
    std::vector<BoundStep> steps;

    for (size_t k = 0; k < skeleton.size() && !pass_failed; ++k) {
      GroundAction const& ga = skeleton[k];
      std::set<std::string> avoid = global_avoid;
      for (auto const& arg : ga.args) {
        auto kind = problem.symbol_kind(arg);
        if (kind && *kind == SymbolKind::kPlace) avoid.erase(arg);
      }

      if (ga.schema == "moveRelaxed" || ga.schema == "move") {
        std::string const &p1 = ga.args[0], &p2 = ga.args[1];
        std::string const &c1 = ga.args[2], &c2 = ga.args[3];
        std::string const& t = ga.args[4];
        if (!poses.count(c1)) {
          out.status = BindStatus::kDead;  // skeleton not symbolically valid
          out.feedback.assign(feedback.begin(), feedback.end());
          return out;
        }

        auto role_it = grounding.config_roles.find(c2);
        ConfigRole const role = role_it != grounding.config_roles.end()
                                    ? role_it->second
                                    : ConfigRole{ConfigRole::Kind::kPlacePose,
                                                 p2, ""};
        bool const approach = role.kind == ConfigRole::Kind::kInspect ||
                              role.kind == ConfigRole::Kind::kGrasp;

        if (!poses.count(c2)) {
          ObstacleSet obs{active_discs(""), avoid};
          std::optional<Pose> pose;
          if (approach) {
            if (!charge_call()) break;
            double range = role.kind == ConfigRole::Kind::kInspect
                               ? scfg.r_inspect
                               : scfg.r_grasp;
            pose = sample_pose_near_object(graph, role.object, range, obs,
                                           scfg, rng, wm, &role.place,
                                           &positions[role.object]);
          } else {
            if (!charge_call()) break;
            pose = sample_pose_in_place(graph, p2, obs, scfg, rng, wm);
          }
          if (!pose) {
            // Report the discs crowding the target place as feedback.
            std::vector<std::string> blockers;
            auto tp = graph.place_index(p2);
            if (tp) {
              for (auto const& d : obs.discs)
                if (detail::disc_overlaps_polygon(graph.place(*tp).polygon,
                                                  d.center, d.radius))
                  blockers.push_back(d.object_id);
            }
            record(k, std::move(blockers));
            pass_failed = true;
            break;
          }
          poses[c2] = *pose;
        }

        RouteResult rr = route(graph, p1, p2, avoid, wm);
        if (!rr.ok()) {
          dead = true;  // disconnection or avoid severance: never recoverable
          break;
        }

        Pose const& from = poses.at(c1);
        Pose const& to = poses.at(c2);
        Trajectory traj;
        bool sanctioned_entry = false;
        Vec2 entry_q{};
        std::string entry_place;
        double target_eff = 0.0;
        if (approach) {
          target_eff = effective_radius(role.object);
          Vec2 center = positions[role.object];
          double d = dist(to.position, center);
          if (target_eff > 0.0 && d <= target_eff) {
            if (d < kGeomTol) {
              pass_failed = true;
              break;
            }
            sanctioned_entry = true;
            Vec2 u = (to.position - center) * (1.0 / d);
            entry_q = center + u * (target_eff + 1e-3);
            // The entry waypoint is mid-trajectory: any on-map, non-avoided
            // place is fine, it need not be the move's destination place.
            auto qi = graph.place_containing(entry_q);
            if (!qi || avoid.count(graph.place(*qi).id)) {
              pass_failed = true;  // entry point fell off the map
              break;
            }
            entry_place = graph.place(*qi).id;
          }
        }

        if (!charge_call()) break;
        ObstacleSet move_obs{active_discs(""), avoid};
        if (sanctioned_entry) {
          Pose entry_pose{entry_q,
                          normalize_heading(std::atan2(
                              positions[role.object].y - entry_q.y,
                              positions[role.object].x - entry_q.x))};
          std::vector<std::string> entry_route = rr.places;
          if (std::find(entry_route.begin(), entry_route.end(),
                        entry_place) == entry_route.end())
            entry_route.push_back(entry_place);
          RefineResult ref = refine(graph, entry_route, from, entry_pose,
                                    move_obs, scfg, rng, wm);
          if (!ref.ok()) {
            record(k, ref.blockers);
            pass_failed = true;
            break;
          }
          // Radial descent: only the target's physical disc and the other
          // active discs matter on the final straight.
          ObjectNode const& o = graph.object(*graph.object_index(role.object));
          std::vector<Disc> tail = active_discs(role.object);
          tail.push_back({positions[role.object], o.radius, role.object});
          if (!segment_free(entry_q, to.position, tail, wm) ||
              !detail::segment_avoids(graph, entry_q, to.position, avoid, wm)) {
            record(k, blocking_discs(entry_q, to.position, tail, wm));
            pass_failed = true;
            break;
          }
          traj = *ref.trajectory;
          traj.waypoints.push_back(to);
          detail::extend_place_sequence(graph, traj, entry_q, to.position);
        } else {
          RefineResult ref =
              refine(graph, rr.places, from, to, move_obs, scfg, rng, wm);
          if (!ref.ok()) {
            record(k, ref.blockers);
            pass_failed = true;
            break;
          }
          traj = *ref.trajectory;
        }
        trajectories[t] = std::move(traj);
        steps.push_back({ga, trajectories[t]});
      } else if (ga.schema == "inspect") {
        suspicious.erase(ga.args[0]);
        steps.push_back({ga, std::nullopt});
      } else if (ga.schema == "pick") {
        held = ga.args[0];
        steps.push_back({ga, std::nullopt});
      } else if (ga.schema == "place") {
        std::string const& o = ga.args[0];
        std::string const& c = ga.args[1];
        std::string const& p = ga.args[2];
        if (!poses.count(c) || !held || *held != o) {
          out.status = BindStatus::kDead;
          out.feedback.assign(feedback.begin(), feedback.end());
          return out;
        }
        Pose const& at = poses.at(c);
        ObjectNode const& obj = graph.object(*graph.object_index(o));
        Vec2 dir{std::cos(at.heading), std::sin(at.heading)};
        Vec2 deposit =
            at.position + dir * (obj.radius + scfg.clearance + 1e-3);
        auto dp = graph.place_containing(deposit);
        if (!dp || graph.place(*dp).id != p) {
          pass_failed = true;
          break;
        }
        std::vector<std::string> clash;
        for (auto const& id : instance_objects) {
          if (id == o || (held && *held == id)) continue;
          ObjectNode const& other = graph.object(*graph.object_index(id));
          if (dist(deposit, positions[id]) <= obj.radius + other.radius)
            clash.push_back(id);
        }
        if (!clash.empty()) {
          record(k, std::move(clash));
          pass_failed = true;
          break;
        }
        positions[o] = deposit;
        placements[o] = deposit;
        held.reset();
        steps.push_back({ga, std::nullopt});
      } else {
        steps.push_back({ga, std::nullopt});  // unknown schema: symbolic only
      }
    }

    if (dead) {
      out.status = BindStatus::kDead;
      out.feedback.assign(feedback.begin(), feedback.end());
      return out;
    }
    if (!pass_failed && calls_used <= sample_budget && !wm.exhausted() &&
        steps.size() == skeleton.size()) {
      BoundPlan plan;
      plan.steps = std::move(steps);
      plan.config_poses = std::move(poses);
      plan.placements = std::move(placements);
      out.status = BindStatus::kBound;
      out.plan = std::move(plan);
      out.feedback.assign(feedback.begin(), feedback.end());
      return out;
    }
  }

  out.status = BindStatus::kRetry;  // samples exhausted
  out.feedback.assign(feedback.begin(), feedback.end());
  return out;
}

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

enum class Outcome { kSolved, kInfeasible, kTimeout };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kSolved: return "solved";
    case Outcome::kInfeasible: return "infeasible";
    case Outcome::kTimeout: return "timeout";
  }
  return "?";
}

struct PhaseTimes {
  double total_ms = 0;
  double prune_ms = 0;
  double search_ms = 0;
  double bind_ms = 0;
  double real_ms = 0;  // wall clock, for humans; never used in comparisons
};

/// One growth round of the incremental driver: which object symbols were
/// added after the round's solve attempt, and why.
struct RoundAudit {
  size_t round = 0;
  std::vector<std::string> added;
  std::string reason;
};

struct SolveReport {
  Outcome outcome = Outcome::kTimeout;
  std::optional<BoundPlan> plan;
  size_t skeletons_tried = 0;
  std::vector<BlockingRecord> feedback;
  PhaseTimes times;
  size_t objects_added = 0;  // filled by the incremental driver
  size_t rounds = 0;         // likewise
  std::vector<RoundAudit> audit;
};

struct SolverConfig {
  double budget_s = 60.0;        // virtual seconds, shared by search and bind
  int max_skeletons = 64;        // enumeration cap
  int skeletons_per_round = 8;   // new skeletons admitted per round
  int base_samples = 50;         // per-skeleton bind budget, doubled each round
  uint64_t seed = 0;
  StreamConfig stream;
  // Places whose symbols were pruned away but whose avoidance the goal still
  // requires; unioned with the goal's own negated-visited places.
  std::set<std::string> extra_avoid_places;
};

namespace detail {

inline void fill_times(PhaseTimes& t, WorkMeter const& wm) {
  t.prune_ms = wm.prune_virtual_ns() / 1e6;
  t.search_ms = wm.search_virtual_ns() / 1e6;
  t.bind_ms = wm.bind_virtual_ns() / 1e6;
  t.total_ms = wm.total_virtual_ns() / 1e6;
}

}  // namespace detail

/// Skeleton-then-bind loop: admit a few new skeletons per round, round-robin
/// bind attempts across the live ones with a per-skeleton sample budget that
/// doubles every round. The first bound plan that re-validates on the
/// instance (extended with its optimistic symbols) wins. Infeasible when the
/// symbolic space is exhausted without a yield, or when every enumerated
/// skeleton is structurally dead; timeout when the virtual budget runs out.
/// The meter is shared so a caller can account several solves against one
/// budget; its budget is tightened here if it is looser than cfg.budget_s.
inline SolveReport solve(SceneGraph const& graph,
                         ProblemInstance const& problem,
                         SolverConfig const& cfg, WorkMeter& wm) {
  auto t0 = std::chrono::steady_clock::now();
  SolveReport report;
  auto finish = [&](Outcome oc) {
    report.outcome = oc;
    detail::fill_times(report.times, wm);
    report.times.real_ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - t0)
            .count();
    return report;
  };

  uint64_t budget_ns = static_cast<uint64_t>(cfg.budget_s * 1e9);
  wm.budget_virtual_ns = std::min(wm.budget_virtual_ns, budget_ns);

  std::set<std::string> global_avoid = goal_avoid_places(problem.goal);
  global_avoid.insert(cfg.extra_avoid_places.begin(),
                      cfg.extra_avoid_places.end());
  Grounding grounding = ground_optimistic(problem, wm);
  SkeletonGenerator gen(problem, grounding, cfg.max_skeletons, wm);

  struct Slot {
    PlanSkeleton skeleton;
    bool dead = false;
    size_t attempts = 0;
  };
  std::vector<Slot> slots;
  bool no_more = false;

  for (int round = 0;; ++round) {
    if (wm.exhausted()) return finish(Outcome::kTimeout);

    size_t want = std::min<size_t>(
        cfg.max_skeletons, (round + 1) * static_cast<size_t>(cfg.skeletons_per_round));
    while (!no_more && slots.size() < want) {
      auto sk = gen.next();
      if (!sk) {
        no_more = true;
        break;
      }
      slots.push_back({std::move(*sk), false, 0});
    }
    if (slots.empty()) {
      if (gen.exhausted()) return finish(Outcome::kInfeasible);
      return finish(Outcome::kTimeout);  // budget died during search
    }

    int round_budget = cfg.base_samples << std::min(round, 20);
    bool any_live = false;
    for (size_t i = 0; i < slots.size(); ++i) {
      if (slots[i].dead) continue;
      if (wm.exhausted()) return finish(Outcome::kTimeout);
      any_live = true;
      if (slots[i].attempts == 0) ++report.skeletons_tried;
      ++slots[i].attempts;
      Rng bind_rng(detail::mix64(cfg.seed, i, round));
      BindOutcome bo =
          bind_skeleton(graph, problem, grounding, slots[i].skeleton.actions,
                        global_avoid, cfg.stream, round_budget, bind_rng, wm);
      for (auto& rec : bo.feedback) {
        rec.skeleton_index = i;
        report.feedback.push_back(rec);
      }
      if (bo.status == BindStatus::kDead) slots[i].dead = true;
      if (bo.status == BindStatus::kBound) {
        ProblemInstance extended =
            extend_instance(problem, grounding, slots[i].skeleton.actions);
        if (plan_valid(extended, slots[i].skeleton.actions)) {
          report.plan = std::move(bo.plan);
          return finish(Outcome::kSolved);
        }
        slots[i].dead = true;  // defensive: bound but symbolically broken
      }
    }
    if (!any_live && no_more) {
      // Every skeleton structurally dead and none left to enumerate.
      if (gen.exhausted()) return finish(Outcome::kInfeasible);
      return finish(Outcome::kTimeout);
    }
  }
}

inline SolveReport solve(SceneGraph const& graph,
                         ProblemInstance const& problem,
                         SolverConfig const& cfg) {
  WorkMeter wm;
  return solve(graph, problem, cfg, wm);
}

}  // namespace sgtamp
