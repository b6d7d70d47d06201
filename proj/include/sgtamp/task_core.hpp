#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgtamp/base.hpp"
#include "sgtamp/scene_graph.hpp"

namespace sgtamp {

using json = nlohmann::json;

enum class SymbolKind { kRobot, kPlace, kObject, kConfig, kTrajectory, kRegion };

inline std::string to_string(SymbolKind k) {
  switch (k) {
    case SymbolKind::kRobot: return "robot";
    case SymbolKind::kPlace: return "place";
    case SymbolKind::kObject: return "object";
    case SymbolKind::kConfig: return "config";
    case SymbolKind::kTrajectory: return "trajectory";
    case SymbolKind::kRegion: return "region";
  }
  return "?";
}

struct Symbol {
  std::string name;
  SymbolKind kind;
  friend auto operator<=>(Symbol const&, Symbol const&) = default;
};

struct Fact {
  std::string name;
  std::vector<std::string> args;
  friend auto operator<=>(Fact const&, Fact const&) = default;

  std::string to_string() const {
    std::string s = name + "(";
    for (size_t i = 0; i < args.size(); ++i) s += (i ? "," : "") + args[i];
    return s + ")";
  }
};

inline Fact fact(std::string name, std::vector<std::string> args = {}) {
  return Fact{std::move(name), std::move(args)};
}

/// Literal over either schema parameters (in schemas/streams) or symbols
/// (when ground). `positive == false` means negation.
struct Literal {
  bool positive = true;
  Fact atom;
  friend auto operator<=>(Literal const&, Literal const&) = default;

  std::string to_string() const {
    return positive ? atom.to_string() : "!" + atom.to_string();
  }
};

/// Canonical sorted fact set; the symbolic state representation.
using State = std::set<Fact>;

inline bool contains(State const& s, Fact const& f) { return s.count(f) != 0; }

struct PredicateDecl {
  std::string name;
  std::vector<SymbolKind> arg_kinds;
};

struct Param {
  std::string name;
  SymbolKind kind;
};

struct ActionSchema {
  std::string name;
  std::vector<Param> params;
  std::vector<Literal> pre;   // conjunction of literals
  std::vector<Fact> eff_add;
  std::vector<Fact> eff_del;
};

/// Declared sampler/solver: consumes input symbols, emits fresh output
/// symbols, and certifies fact templates over inputs and outputs.
struct StreamDecl {
  std::string name;
  std::vector<Param> inputs;
  std::vector<Param> outputs;
  std::vector<Fact> certified;  // templates over input/output param names
};

struct GroundAction {
  std::string schema;
  std::vector<std::string> args;  // symbol names, in schema param order
  std::vector<Fact> pre_pos;
  std::vector<Fact> pre_neg;
  std::vector<Fact> eff_add;
  std::vector<Fact> eff_del;

  friend auto operator<=>(GroundAction const&, GroundAction const&) = default;

  std::string to_string() const {
    std::string s = schema + "(";
    for (size_t i = 0; i < args.size(); ++i) s += (i ? "," : "") + args[i];
    return s + ")";
  }
};

// ---------------------------------------------------------------------------
// Goal formulas
// ---------------------------------------------------------------------------

/// Boolean formula in negation normal form: negation appears only directly
/// over facts. Quantifiers are not representable.
struct GoalFormula {
  enum class Kind { kFact, kNot, kAnd, kOr };

  Kind kind = Kind::kAnd;  // default: empty conjunction == true
  Fact atom;               // kFact / kNot
  std::vector<GoalFormula> children;  // kAnd / kOr

  static GoalFormula lit(Fact f, bool positive = true) {
    GoalFormula g;
    g.kind = positive ? Kind::kFact : Kind::kNot;
    g.atom = std::move(f);
    return g;
  }
  static GoalFormula conj(std::vector<GoalFormula> xs) {
    if (xs.size() == 1) return xs[0];
    GoalFormula g;
    g.kind = Kind::kAnd;
    g.children = std::move(xs);
    return g;
  }
  static GoalFormula disj(std::vector<GoalFormula> xs) {
    if (xs.size() == 1) return xs[0];
    GoalFormula g;
    g.kind = Kind::kOr;
    g.children = std::move(xs);
    return g;
  }
  static GoalFormula top() { return GoalFormula{}; }

  bool eval(std::function<bool(Fact const&)> const& truth) const {
    switch (kind) {
      case Kind::kFact: return truth(atom);
      case Kind::kNot: return !truth(atom);
      case Kind::kAnd:
        for (auto const& c : children)
          if (!c.eval(truth)) return false;
        return true;
      case Kind::kOr:
        for (auto const& c : children)
          if (c.eval(truth)) return true;
        return false;
    }
    return false;
  }

  bool eval(State const& s) const {
    return eval([&](Fact const& f) { return contains(s, f); });
  }

  /// Distinct facts used anywhere in the formula, sorted.
  std::vector<Fact> facts() const {
    std::set<Fact> out;
    collect(out);
    return {out.begin(), out.end()};
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::kFact: return atom.to_string();
      case Kind::kNot: return "!" + atom.to_string();
      case Kind::kAnd:
      case Kind::kOr: {
        std::string op = kind == Kind::kAnd ? "and" : "or";
        std::string s = "(" + op;
        for (auto const& c : children) s += " " + c.to_string();
        return s + ")";
      }
    }
    return "?";
  }

 private:
  void collect(std::set<Fact>& out) const {
    if (kind == Kind::kFact || kind == Kind::kNot) {
      out.insert(atom);
      return;
    }
    for (auto const& c : children) c.collect(out);
  }
};

/// Clause form used by CNF/DNF conversion and the planner heuristic.
using Clause = std::vector<Literal>;  // sorted, deduplicated

namespace detail {

inline void canon_clause(Clause& c) {
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
}

inline bool clause_tautological(Clause const& c) {
  for (auto const& l : c) {
    Literal inv{!l.positive, l.atom};
    if (std::binary_search(c.begin(), c.end(), inv)) return true;
  }
  return false;
}

inline bool clause_subsumes(Clause const& a, Clause const& b) {
  // a ⊆ b ⇒ a subsumes b (a is the stronger clause).
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline std::vector<Clause> simplify_clauses(std::vector<Clause> cs) {
  std::vector<Clause> keep;
  for (auto& c : cs) {
    canon_clause(c);
    if (!clause_tautological(c)) keep.push_back(std::move(c));
  }
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  std::vector<Clause> out;
  for (size_t i = 0; i < keep.size(); ++i) {
    bool subsumed = false;
    for (size_t j = 0; j < keep.size() && !subsumed; ++j) {
      if (i != j && keep[j].size() <= keep[i].size() &&
          clause_subsumes(keep[j], keep[i]) &&
          !(keep[j] == keep[i] && j > i)) {
        subsumed = true;
      }
    }
    if (!subsumed) out.push_back(keep[i]);
  }
  return out;
}

/// Recursive clause-set construction. `conjunctive` selects CNF (clauses are
/// disjunctions, joined by And) vs DNF (clauses are conjunctions, joined by
/// Or). The two are duals: swapping the roles of And/Or gives the other.
inline std::vector<Clause> to_clauses(GoalFormula const& g, bool conjunctive,
                                      size_t cap) {
  auto blow = [&]() {
    throw CnfBlowupError(conjunctive ? "CNF clause cap exceeded"
                                     : "DNF clause cap exceeded");
  };
  switch (g.kind) {
    case GoalFormula::Kind::kFact:
      return {{Literal{true, g.atom}}};
    case GoalFormula::Kind::kNot:
      return {{Literal{false, g.atom}}};
    case GoalFormula::Kind::kAnd:
    case GoalFormula::Kind::kOr: {
      bool concat = (g.kind == GoalFormula::Kind::kAnd) == conjunctive;
      std::vector<std::vector<Clause>> parts;
      for (auto const& c : g.children)
        parts.push_back(to_clauses(c, conjunctive, cap));
      if (concat) {
        std::vector<Clause> out;
        for (auto& p : parts)
          for (auto& c : p) {
            out.push_back(std::move(c));
            if (out.size() > cap) blow();
          }
        return simplify_clauses(std::move(out));
      }
      // Cross product: distribute over the joining connective.
      std::vector<Clause> acc{{}};
      for (auto& p : parts) {
        std::vector<Clause> next;
        for (auto const& a : acc)
          for (auto const& c : p) {
            Clause merged = a;
            merged.insert(merged.end(), c.begin(), c.end());
            next.push_back(std::move(merged));
            if (next.size() > cap) blow();
          }
        acc = std::move(next);
      }
      return simplify_clauses(std::move(acc));
    }
  }
  return {};
}

}  // namespace detail

inline constexpr size_t kClauseCap = 4096;

/// CNF of an NNF formula as simplified clause list (each clause a
/// disjunction). Empty clause list means "true"; an empty clause means
/// "false". Throws CnfBlowupError above kClauseCap clauses.
inline std::vector<Clause> to_cnf_clauses(GoalFormula const& g,
                                          size_t cap = kClauseCap) {
  return detail::to_clauses(g, /*conjunctive=*/true, cap);
}

/// DNF of an NNF formula (each clause a conjunction). Empty clause list
/// means "false"; an empty clause means "true".
inline std::vector<Clause> to_dnf_clauses(GoalFormula const& g,
                                          size_t cap = kClauseCap) {
  return detail::to_clauses(g, /*conjunctive=*/false, cap);
}

/// CNF as a GoalFormula: And of Or-clauses.
inline GoalFormula to_cnf(GoalFormula const& g, size_t cap = kClauseCap) {
  auto clauses = to_cnf_clauses(g, cap);
  std::vector<GoalFormula> ands;
  for (auto const& c : clauses) {
    std::vector<GoalFormula> ors;
    for (auto const& l : c) ors.push_back(GoalFormula::lit(l.atom, l.positive));
    if (ors.empty()) {
      // Empty disjunction is false; encode as x and !x over a dummy? Instead
      // keep a canonical unsatisfiable pair over the first known fact. This
      // branch is unreachable for satisfiable inputs produced by our
      // samplers, but must still round-trip as "false".
      Fact f = fact("__false");
      ands.push_back(GoalFormula::lit(f, true));
      ands.push_back(GoalFormula::lit(f, false));
      continue;
    }
    ands.push_back(GoalFormula::disj(std::move(ors)));
  }
  return GoalFormula::conj(std::move(ands));
}

// ---------------------------------------------------------------------------
// Problem instances
// ---------------------------------------------------------------------------

struct ProblemInstance {
  std::string domain_name;
  std::vector<PredicateDecl> predicates;
  std::vector<ActionSchema> actions;
  std::vector<StreamDecl> streams;
  std::vector<Symbol> symbols;
  State init;
  GoalFormula goal;

  std::optional<SymbolKind> symbol_kind(std::string const& name) const {
    for (auto const& s : symbols)
      if (s.name == name) return s.kind;
    return std::nullopt;
  }

  PredicateDecl const* predicate(std::string const& name) const {
    for (auto const& p : predicates)
      if (p.name == name) return &p;
    return nullptr;
  }

  ActionSchema const* schema(std::string const& name) const {
    for (auto const& a : actions)
      if (a.name == name) return &a;
    return nullptr;
  }

  StreamDecl const* stream(std::string const& name) const {
    for (auto const& s : streams)
      if (s.name == name) return &s;
    return nullptr;
  }
};

namespace detail {

inline std::optional<SymbolKind> param_kind(std::vector<Param> const& ps,
                                            std::string const& name) {
  for (auto const& p : ps)
    if (p.name == name) return p.kind;
  return std::nullopt;
}

}  // namespace detail

/// Structural checks on a schema: declared predicates, matching arities and
/// kinds, all literal arguments drawn from params, disjoint effect sets.
inline void validate_schema(ActionSchema const& a,
                            std::vector<PredicateDecl> const& preds) {
  auto check_atom = [&](Fact const& f, char const* where) {
    PredicateDecl const* d = nullptr;
    for (auto const& p : preds)
      if (p.name == f.name) d = &p;
    if (!d)
      throw ValidationError("action " + a.name + ": undeclared predicate " +
                            f.name + " in " + where);
    if (d->arg_kinds.size() != f.args.size())
      throw ValidationError("action " + a.name + ": arity mismatch for " +
                            f.name);
    for (size_t i = 0; i < f.args.size(); ++i) {
      auto k = detail::param_kind(a.params, f.args[i]);
      if (!k)
        throw ValidationError("action " + a.name + ": unknown parameter " +
                              f.args[i] + " in " + f.to_string());
      if (*k != d->arg_kinds[i])
        throw ValidationError("action " + a.name + ": parameter " +
                              f.args[i] + " has kind " + to_string(*k) +
                              ", predicate " + f.name + " expects " +
                              to_string(d->arg_kinds[i]));
    }
  };
  for (auto const& l : a.pre) check_atom(l.atom, "preconditions");
  for (auto const& f : a.eff_add) check_atom(f, "effects");
  for (auto const& f : a.eff_del) check_atom(f, "effects");
  for (auto const& f : a.eff_add)
    for (auto const& g : a.eff_del)
      if (f == g)
        throw ValidationError("action " + a.name + ": " + f.to_string() +
                              " appears in both add and delete effects");
}

/// Checks instance-level referential integrity: facts in the initial state
/// and goal use declared predicates with kind-correct declared symbols.
inline void validate_instance(ProblemInstance const& p) {
  std::map<std::string, SymbolKind> kinds;
  for (auto const& s : p.symbols) {
    if (!kinds.emplace(s.name, s.kind).second)
      throw ValidationError("duplicate symbol " + s.name);
  }
  auto check_fact = [&](Fact const& f, char const* where) {
    auto const* d = p.predicate(f.name);
    if (!d)
      throw ValidationError(std::string(where) + ": undeclared predicate " +
                            f.name);
    if (d->arg_kinds.size() != f.args.size())
      throw ValidationError(std::string(where) + ": arity mismatch for " +
                            f.to_string());
    for (size_t i = 0; i < f.args.size(); ++i) {
      auto it = kinds.find(f.args[i]);
      if (it == kinds.end())
        throw ValidationError(std::string(where) + ": undeclared symbol " +
                              f.args[i] + " in " + f.to_string());
      if (it->second != d->arg_kinds[i])
        throw ValidationError(std::string(where) + ": symbol " + f.args[i] +
                              " has kind " + to_string(it->second) +
                              ", predicate " + f.name + " expects " +
                              to_string(d->arg_kinds[i]));
    }
  };
  for (auto const& a : p.actions) validate_schema(a, p.predicates);
  for (auto const& f : p.init) check_fact(f, "initial state");
  for (auto const& f : p.goal.facts()) check_fact(f, "goal");
}

// ---------------------------------------------------------------------------
// Grounding and state transition
// ---------------------------------------------------------------------------

/// Instantiates a schema with positional symbol bindings. Kind mismatches
/// and arity mismatches raise BindingError.
inline GroundAction ground(ActionSchema const& schema,
                           std::vector<Symbol> const& bindings) {
  if (bindings.size() != schema.params.size())
    throw BindingError("action " + schema.name + " expects " +
                       std::to_string(schema.params.size()) + " arguments, got " +
                       std::to_string(bindings.size()));
  std::map<std::string, std::string> sub;
  for (size_t i = 0; i < bindings.size(); ++i) {
    if (bindings[i].kind != schema.params[i].kind)
      throw BindingError("action " + schema.name + ": argument " +
                         bindings[i].name + " has kind " +
                         to_string(bindings[i].kind) + ", parameter " +
                         schema.params[i].name + " expects " +
                         to_string(schema.params[i].kind));
    sub[schema.params[i].name] = bindings[i].name;
  }
  auto subst = [&](Fact const& f) {
    Fact g{f.name, {}};
    g.args.reserve(f.args.size());
    for (auto const& a : f.args) g.args.push_back(sub.at(a));
    return g;
  };
  GroundAction ga;
  ga.schema = schema.name;
  for (auto const& b : bindings) ga.args.push_back(b.name);
  for (auto const& l : schema.pre)
    (l.positive ? ga.pre_pos : ga.pre_neg).push_back(subst(l.atom));
  for (auto const& f : schema.eff_add) ga.eff_add.push_back(subst(f));
  for (auto const& f : schema.eff_del) ga.eff_del.push_back(subst(f));
  return ga;
}

inline bool applicable(State const& s, GroundAction const& ga) {
  for (auto const& f : ga.pre_pos)
    if (!contains(s, f)) return false;
  for (auto const& f : ga.pre_neg)
    if (contains(s, f)) return false;
  return true;
}

inline State apply_action(State const& s, GroundAction const& ga) {
  State out = s;
  for (auto const& f : ga.eff_del) out.erase(f);
  for (auto const& f : ga.eff_add) out.insert(f);
  return out;
}

struct StatePlan {
  std::vector<State> states;  // I0 … IN
  std::vector<GroundAction> actions;
};

/// The state plan induced by applying the actions in order, regardless of
/// applicability (validity is a separate question).
inline StatePlan state_plan(State init, std::vector<GroundAction> const& plan) {
  StatePlan sp;
  sp.states.push_back(std::move(init));
  for (auto const& a : plan) {
    sp.states.push_back(apply_action(sp.states.back(), a));
    sp.actions.push_back(a);
  }
  return sp;
}

/// True iff every action is applicable from its predecessor state and the
/// terminal state satisfies the goal. Actions referencing undeclared symbols
/// raise ValidationError (distinct from a false result).
inline bool plan_valid(ProblemInstance const& problem,
                       std::vector<GroundAction> const& plan) {
  for (auto const& ga : plan) {
    for (auto const& arg : ga.args)
      if (!problem.symbol_kind(arg))
        throw ValidationError("plan action " + ga.to_string() +
                              " references undeclared symbol " + arg);
  }
  State s = problem.init;
  for (auto const& ga : plan) {
    if (!applicable(s, ga)) return false;
    s = apply_action(s, ga);
  }
  return problem.goal.eval(s);
}

// ---------------------------------------------------------------------------
// Goal sampling
// ---------------------------------------------------------------------------

/// DNF goal with exactly `n` clauses of `k` literals each, drawn from
/// VisitedPlace(p), !VisitedPlace(p), and Safe(o) over suspicious objects.
/// No clause contains both polarities of one fact. Deterministic under seed.
inline GoalFormula sample_goal(SceneGraph const& graph, int n, int k,
                               uint64_t seed) {
  if (n < 1 || k < 1) throw GenerationError("goal shape must satisfy N,K >= 1");
  std::vector<Fact> candidates;
  for (auto const& p : graph.places)
    candidates.push_back(fact("VisitedPlace", {p.id}));
  size_t n_negatable = candidates.size();  // place facts may be negated
  for (auto const& o : graph.objects)
    if (o.status == ObjectStatus::kSuspicious)
      candidates.push_back(fact("Safe", {o.id}));
  if (candidates.size() < static_cast<size_t>(k))
    throw GenerationError("goal sampling needs at least " + std::to_string(k) +
                          " candidate facts, scene has " +
                          std::to_string(candidates.size()));
  Rng rng(seed);
  std::vector<GoalFormula> clauses;
  for (int ci = 0; ci < n; ++ci) {
    // Partial Fisher-Yates over candidate indices: k distinct facts.
    std::vector<size_t> idx(candidates.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<GoalFormula> lits;
    for (int li = 0; li < k; ++li) {
      size_t pick = li + rng.uniform_index(idx.size() - li);
      std::swap(idx[li], idx[pick]);
      Fact const& f = candidates[idx[li]];
      bool can_negate = idx[li] < n_negatable;
      bool positive = can_negate ? rng.uniform01() < 0.5 : true;
      lits.push_back(GoalFormula::lit(f, positive));
    }
    clauses.push_back(GoalFormula::conj(std::move(lits)));
  }
  return GoalFormula::disj(std::move(clauses));
}

// ---------------------------------------------------------------------------
// Goal JSON
// ---------------------------------------------------------------------------

inline json goal_to_json(GoalFormula const& g) {
  switch (g.kind) {
    case GoalFormula::Kind::kFact:
      return json{{"fact", {{"name", g.atom.name}, {"args", g.atom.args}}}};
    case GoalFormula::Kind::kNot:
      return json{{"not", goal_to_json(GoalFormula::lit(g.atom, true))}};
    case GoalFormula::Kind::kAnd:
    case GoalFormula::Kind::kOr: {
      json arr = json::array();
      for (auto const& c : g.children) arr.push_back(goal_to_json(c));
      return json{{g.kind == GoalFormula::Kind::kAnd ? "and" : "or", arr}};
    }
  }
  return json{};
}

inline GoalFormula goal_from_json(json const& j) {
  if (!j.is_object() || j.size() != 1)
    throw ParseError("goal node must be a single-key object (and/or/not/fact)");
  std::string key = j.begin().key();
  if (key == "forall" || key == "exists")
    throw ParseError("quantifiers are not supported in goals (found '" + key +
                     "')");
  if (key == "fact") {
    json const& f = j.at("fact");
    if (!f.contains("name") || !f.contains("args"))
      throw ParseError("goal fact needs 'name' and 'args'");
    Fact a{f.at("name").get<std::string>(),
           f.at("args").get<std::vector<std::string>>()};
    return GoalFormula::lit(std::move(a), true);
  }
  if (key == "not") {
    GoalFormula inner = goal_from_json(j.at("not"));
    if (inner.kind != GoalFormula::Kind::kFact)
      throw ParseError(
          "goal must be in negation normal form: 'not' may wrap only a fact");
    return GoalFormula::lit(inner.atom, false);
  }
  if (key == "and" || key == "or") {
    if (!j.at(key).is_array())
      throw ParseError("'" + key + "' expects an array of goal nodes");
    std::vector<GoalFormula> kids;
    for (auto const& c : j.at(key)) kids.push_back(goal_from_json(c));
    GoalFormula g;
    g.kind = key == "and" ? GoalFormula::Kind::kAnd : GoalFormula::Kind::kOr;
    g.children = std::move(kids);
    return g;
  }
  throw ParseError("unknown goal connective '" + key + "'");
}

}  // namespace sgtamp
