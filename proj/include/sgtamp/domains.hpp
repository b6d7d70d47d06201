#pragma once

#include <string>
#include <vector>

#include "sgtamp/scene_graph.hpp"
#include "sgtamp/task_core.hpp"

namespace sgtamp {

enum class Encoding { kSparse, kDense };

inline std::string to_string(Encoding e) {
  return e == Encoding::kSparse ? "sparse" : "dense";
}

struct DomainDefinition {
  std::string name;  // "inspection" | "retrieval"
  Encoding encoding = Encoding::kSparse;
  std::vector<PredicateDecl> predicates;
  std::vector<ActionSchema> actions;
  std::vector<StreamDecl> streams;

  ActionSchema const* schema(std::string const& n) const {
    for (auto const& a : actions)
      if (a.name == n) return &a;
    return nullptr;
  }
};

namespace detail {

inline std::vector<PredicateDecl> base_predicates() {
  using K = SymbolKind;
  return {
      // Type predicates (declared for completeness; symbol kinds carry the
      // same information, so instances do not materialize these facts).
      {"Place", {K::kPlace}},
      {"Object", {K::kObject}},
      {"Configuration", {K::kConfig}},
      // Agent state.
      {"AtConfig", {K::kConfig}},
      {"AtPlace", {K::kPlace}},
      // Same-layer connectivity.
      {"Connected", {K::kPlace, K::kPlace}},
      // Cross-layer inclusion.
      {"PoseInPlace", {K::kConfig, K::kPlace}},
      {"ObjectInPlace", {K::kObject, K::kPlace}},
      // Stream-certified action support.
      {"Trajectory", {K::kConfig, K::kTrajectory, K::kConfig}},
      {"InspectPose", {K::kConfig, K::kObject}},
      // Problem-specific.
      {"VisitedPlace", {K::kPlace}},
      {"Safe", {K::kObject}},
      {"Suspicious", {K::kObject}},
      // Region-layer pass-through typing; no action reads or writes these.
      {"AtRoom", {K::kRegion}},
      {"PlaceInRoom", {K::kPlace, K::kRegion}},
  };
}

inline std::vector<StreamDecl> base_streams() {
  using K = SymbolKind;
  std::vector<StreamDecl> out;
  out.push_back({"s_place_pose",
                 {{"p", K::kPlace}},
                 {{"c", K::kConfig}},
                 {fact("PoseInPlace", {"c", "p"})}});
  out.push_back({"s_inspect_pose",
                 {{"o", K::kObject}, {"p", K::kPlace}},
                 {{"c", K::kConfig}},
                 {fact("InspectPose", {"c", "o"}), fact("PoseInPlace", {"c", "p"})}});
  out.push_back({"s_motion",
                 {{"c1", K::kConfig}, {"c2", K::kConfig}},
                 {{"t", K::kTrajectory}},
                 {fact("Trajectory", {"c1", "t", "c2"})}});
  return out;
}

inline ActionSchema move_schema(bool require_connected, std::string name) {
  using K = SymbolKind;
  ActionSchema a;
  a.name = std::move(name);
  a.params = {{"p1", K::kPlace},
              {"p2", K::kPlace},
              {"c1", K::kConfig},
              {"c2", K::kConfig},
              {"t", K::kTrajectory}};
  a.pre = {Literal{true, fact("AtConfig", {"c1"})},
           Literal{true, fact("Trajectory", {"c1", "t", "c2"})},
           Literal{true, fact("PoseInPlace", {"c1", "p1"})},
           Literal{true, fact("PoseInPlace", {"c2", "p2"})}};
  if (require_connected)
    a.pre.push_back(Literal{true, fact("Connected", {"p1", "p2"})});
  a.eff_add = {fact("AtConfig", {"c2"}), fact("VisitedPlace", {"p1"}),
               fact("VisitedPlace", {"p2"})};
  a.eff_del = {fact("AtConfig", {"c1"})};
  return a;
}

inline ActionSchema inspect_schema() {
  using K = SymbolKind;
  ActionSchema a;
  a.name = "inspect";
  a.params = {{"o", K::kObject}, {"c", K::kConfig}};
  a.pre = {Literal{true, fact("AtConfig", {"c"})},
           Literal{true, fact("InspectPose", {"c", "o"})},
           Literal{true, fact("Suspicious", {"o"})}};
  a.eff_add = {fact("Safe", {"o"})};
  a.eff_del = {fact("Suspicious", {"o"})};
  return a;
}

}  // namespace detail

/// Inspection domain. The sparse encoding's moveRelaxed connects any two
/// places and delegates routing to the lower planners; the dense encoding's
/// move additionally requires Connected(p1,p2), so plan length tracks the
/// geometric path length.
inline DomainDefinition inspection_domain(Encoding enc) {
  DomainDefinition d;
  d.name = "inspection";
  d.encoding = enc;
  d.predicates = detail::base_predicates();
  d.streams = detail::base_streams();
  if (enc == Encoding::kSparse) {
    d.actions = {detail::move_schema(false, "moveRelaxed"),
                 detail::inspect_schema()};
  } else {
    d.actions = {detail::move_schema(true, "move"), detail::inspect_schema()};
  }
  return d;
}

/// Retrieval domain: inspection (sparse) plus pick and place. Pick takes no
/// place parameter so moveRelaxed and place remain the only
/// place-parameterized actions.
inline DomainDefinition retrieval_domain() {
  using K = SymbolKind;
  DomainDefinition d = inspection_domain(Encoding::kSparse);
  d.name = "retrieval";
  d.predicates.push_back({"Holding", {K::kObject}});
  d.predicates.push_back({"HandEmpty", {}});
  d.predicates.push_back({"ObjectAtPlace", {K::kObject, K::kPlace}});
  d.predicates.push_back({"GraspPose", {K::kConfig, K::kObject}});

  d.streams.push_back({"s_grasp_pose",
                       {{"o", K::kObject}, {"p", K::kPlace}},
                       {{"c", K::kConfig}},
                       {fact("GraspPose", {"c", "o"}),
                        fact("PoseInPlace", {"c", "p"})}});

  ActionSchema pick;
  pick.name = "pick";
  pick.params = {{"o", K::kObject}, {"c", K::kConfig}};
  pick.pre = {Literal{true, fact("AtConfig", {"c"})},
              Literal{true, fact("GraspPose", {"c", "o"})},
              Literal{true, fact("HandEmpty", {})}};
  pick.eff_add = {fact("Holding", {"o"})};
  pick.eff_del = {fact("HandEmpty", {})};
  d.actions.push_back(pick);

  ActionSchema put;
  put.name = "place";
  put.params = {{"o", K::kObject}, {"c", K::kConfig}, {"p", K::kPlace}};
  put.pre = {Literal{true, fact("Holding", {"o"})},
             Literal{true, fact("AtConfig", {"c"})},
             Literal{true, fact("PoseInPlace", {"c", "p"})}};
  put.eff_add = {fact("ObjectAtPlace", {"o", "p"}), fact("HandEmpty", {})};
  put.eff_del = {fact("Holding", {"o"})};
  d.actions.push_back(put);
  return d;
}

/// Initial configuration symbol name; its pose is the start place centroid
/// with heading 0 by convention.
inline constexpr char kInitConfig[] = "c0";

/// Builds the ground problem instance for a scene. The initial state places
/// the robot at the start place's centroid (config c0), marks the start
/// place visited, and records object containment and status. The dense
/// encoding adds Connected facts for every adjacent ordered pair; retrieval
/// adds HandEmpty and per-object ObjectAtPlace.
inline ProblemInstance build_instance(DomainDefinition const& domain,
                                      SceneGraph const& graph,
                                      std::string const& start_place,
                                      GoalFormula goal) {
  if (!graph.place_index(start_place))
    throw ValidationError("start place " + start_place + " not in scene");
  ProblemInstance p;
  p.domain_name = domain.name + "/" + to_string(domain.encoding);
  p.predicates = domain.predicates;
  p.actions = domain.actions;
  p.streams = domain.streams;

  p.symbols.push_back({"robot", SymbolKind::kRobot});
  for (auto const& pl : graph.places)
    p.symbols.push_back({pl.id, SymbolKind::kPlace});
  for (auto const& o : graph.objects)
    p.symbols.push_back({o.id, SymbolKind::kObject});
  for (auto const& r : graph.regions)
    p.symbols.push_back({r.id, SymbolKind::kRegion});
  p.symbols.push_back({kInitConfig, SymbolKind::kConfig});

  p.init.insert(fact("AtConfig", {kInitConfig}));
  p.init.insert(fact("AtPlace", {start_place}));
  p.init.insert(fact("PoseInPlace", {kInitConfig, start_place}));
  p.init.insert(fact("VisitedPlace", {start_place}));
  // Region layer is pass-through typing: inert facts, no action touches them.
  for (auto const& pl : graph.places)
    if (pl.region) p.init.insert(fact("PlaceInRoom", {pl.id, *pl.region}));
  if (auto const& sr = graph.place(*graph.place_index(start_place)).region)
    p.init.insert(fact("AtRoom", {*sr}));
  for (auto const& o : graph.objects) {
    p.init.insert(fact("ObjectInPlace", {o.id, o.place}));
    p.init.insert(fact(o.status == ObjectStatus::kSuspicious ? "Suspicious"
                                                             : "Safe",
                       {o.id}));
  }
  if (domain.encoding == Encoding::kDense) {
    for (auto const& [a, b] : graph.place_edges) {
      p.init.insert(fact("Connected", {a, b}));
      p.init.insert(fact("Connected", {b, a}));
    }
  }
  if (domain.name == "retrieval") {
    p.init.insert(fact("HandEmpty", {}));
    for (auto const& o : graph.objects)
      p.init.insert(fact("ObjectAtPlace", {o.id, o.place}));
  }
  p.goal = std::move(goal);
  validate_instance(p);
  return p;
}

}  // namespace sgtamp
