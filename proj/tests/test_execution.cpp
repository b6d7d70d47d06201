#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sgtamp/domains.hpp"
#include "sgtamp/execution.hpp"
#include "sgtamp/generators.hpp"
#include "sgtamp/planner.hpp"

using namespace sgtamp;

namespace {

// Two rows of three unit squares: P0 P1 P2 on top, P3 P4 P5 below.
SceneGraph two_by_three() {
  SceneGraph g;
  auto cell = [](double x, double y) {
    return Polygon{{x, y}, {x + 1, y}, {x + 1, y + 1}, {x, y + 1}};
  };
  g.places.push_back({"P0", cell(0, 1)});
  g.places.push_back({"P1", cell(1, 1)});
  g.places.push_back({"P2", cell(2, 1)});
  g.places.push_back({"P3", cell(0, 0)});
  g.places.push_back({"P4", cell(1, 0)});
  g.places.push_back({"P5", cell(2, 0)});
  g.finalize();
  return g;
}

SceneGraph severed_alley() {
  SceneGraph g = gen_alley(4, 2.0);
  g.objects.push_back(
      {"O9", {2.5, 1.0}, 0.3, 0.8, ObjectStatus::kSuspicious, "P2"});
  g.finalize();
  return g;
}

Trajectory straight(Vec2 a, Vec2 b) {
  Trajectory t;
  t.waypoints = {{a, 0.0}, {b, 0.0}};
  return t;
}

SolveReport solve_severed_alley(SceneGraph const& g, ProblemInstance const& p) {
  SolverConfig cfg;
  cfg.seed = 7;
  return solve(g, p, cfg);
}

std::set<std::string> visited_names(State const& s) {
  std::set<std::string> out;
  for (auto const& f : s)
    if (f.name == "VisitedPlace") out.insert(f.args[0]);
  return out;
}

}  // namespace

TEST_CASE("motion sequences flatten bound plans into primitives") {
  SECTION("an empty plan flattens to nothing") {
    MotionSequence seq = motion_sequence(BoundPlan{});
    CHECK(seq.primitives.empty());
    CHECK(seq.groups.empty());
  }

  SECTION("move then inspect becomes FollowPath then InspectObject") {
    BoundPlan plan;
    GroundAction mv;
    mv.schema = "moveRelaxed";
    mv.args = {"P0", "P1", "c0", "ci_O1", "t1"};
    GroundAction ins;
    ins.schema = "inspect";
    ins.args = {"O1", "ci_O1"};
    plan.steps.push_back({mv, straight({0.5, 1.5}, {1.5, 1.5})});
    plan.steps.push_back({ins, std::nullopt});

    MotionSequence seq = motion_sequence(plan);
    REQUIRE(seq.primitives.size() == 2);
    CHECK(seq.primitives[0].kind == MotionPrimitive::Kind::kFollowPath);
    CHECK(seq.primitives[1].kind == MotionPrimitive::Kind::kInspectObject);
    CHECK(seq.primitives[1].object == "O1");
    // The trajectory ends on O1's inspect config, so it is an approach.
    REQUIRE(seq.primitives[0].approach_object.has_value());
    CHECK(*seq.primitives[0].approach_object == "O1");
    REQUIRE(seq.groups.size() == 2);
    CHECK(seq.groups[0] == std::pair<size_t, size_t>{0, 1});
    CHECK(seq.groups[1] == std::pair<size_t, size_t>{1, 2});
  }

  SECTION("a motion step without a trajectory is rejected") {
    BoundPlan plan;
    GroundAction mv;
    mv.schema = "moveRelaxed";
    mv.args = {"P0", "P1", "c0", "c1", "t1"};
    plan.steps.push_back({mv, std::nullopt});
    CHECK_THROWS_AS(motion_sequence(plan), BindingError);
  }

  SECTION("a place step without a recorded deposit is rejected") {
    BoundPlan plan;
    GroundAction pl;
    pl.schema = "place";
    pl.args = {"O1", "c_P0", "P0"};
    plan.steps.push_back({pl, std::nullopt});
    CHECK_THROWS_AS(motion_sequence(plan), BindingError);
  }

  SECTION("trajectories must chain pose-continuously") {
    BoundPlan plan;
    GroundAction mv1;
    mv1.schema = "moveRelaxed";
    mv1.args = {"P0", "P1", "c0", "c1", "t1"};
    GroundAction mv2 = mv1;
    mv2.args = {"P1", "P2", "c1", "c2", "t2"};
    plan.steps.push_back({mv1, straight({0.5, 1.5}, {1.5, 1.5})});
    plan.steps.push_back({mv2, straight({1.6, 1.5}, {2.5, 1.5})});
    CHECK_THROWS_AS(motion_sequence(plan), ValidationError);
  }
}

TEST_CASE("the solved alley plan flattens with chained place sequences") {
  SceneGraph g = severed_alley();
  auto problem = build_instance(inspection_domain(Encoding::kSparse), g, "P0",
                                GoalFormula::lit(fact("VisitedPlace", {"P3"})));
  SolveReport rep = solve_severed_alley(g, problem);
  REQUIRE(rep.outcome == Outcome::kSolved);

  MotionSequence seq = motion_sequence(*rep.plan);
  std::vector<size_t> follows;
  for (size_t i = 0; i < seq.primitives.size(); ++i)
    if (seq.primitives[i].kind == MotionPrimitive::Kind::kFollowPath)
      follows.push_back(i);
  REQUIRE(follows.size() >= 2);
  for (size_t i = 1; i < follows.size(); ++i) {
    auto const& prev = seq.primitives[follows[i - 1]].trajectory;
    auto const& next = seq.primitives[follows[i]].trajectory;
    CHECK(dist(prev.waypoints.back().position,
               next.waypoints.front().position) <= kGeomTol);
    REQUIRE(!prev.place_sequence.empty());
    REQUIRE(!next.place_sequence.empty());
    CHECK(prev.place_sequence.back() == next.place_sequence.front());
  }
}

TEST_CASE("the place verifier reports every place a trajectory touches") {
  SceneGraph g = two_by_three();

  SECTION("an L-shaped run through four cells yields exactly those four") {
    Trajectory t;
    t.waypoints = {{{0.5, 1.5}, 0.0},
                   {{1.5, 1.5}, 0.0},
                   {{1.5, 0.5}, 0.0},
                   {{2.5, 0.5}, 0.0}};
    State facts = v_place({MotionPrimitive::follow(t)}, g);
    CHECK(visited_names(facts) ==
          std::set<std::string>{"P0", "P1", "P4", "P5"});
  }

  SECTION("an empty sub-sequence verifies nothing") {
    CHECK(v_place({}, g).empty());
    CHECK(v_place({MotionPrimitive::inspect("O1")}, g).empty());
  }

  SECTION("a zero-length trajectory reports its containing place") {
    Trajectory t;
    t.waypoints = {{{0.5, 1.5}, 0.0}};
    State facts = v_place({MotionPrimitive::follow(t)}, g);
    CHECK(facts == State{fact("VisitedPlace", {"P0"})});
  }
}

TEST_CASE("state plans extend with verifier facts") {
  SECTION("the empty verifier changes nothing") {
    SceneGraph g = severed_alley();
    auto problem =
        build_instance(inspection_domain(Encoding::kSparse), g, "P0",
                       GoalFormula::lit(fact("VisitedPlace", {"P3"})));
    SolveReport rep = solve_severed_alley(g, problem);
    REQUIRE(rep.outcome == Outcome::kSolved);
    WorkMeter wm;
    ProblemInstance ext_problem = extend_instance(
        problem, ground_optimistic(problem, wm), rep.plan->actions());
    StatePlan sp = state_plan(ext_problem.init, rep.plan->actions());
    MotionSequence seq = motion_sequence(*rep.plan);
    ExtendedStatePlan ext = extend_state_plan(sp, seq, empty_verifier());
    REQUIRE(ext.states.size() == sp.states.size());
    for (size_t k = 0; k < sp.states.size(); ++k)
      CHECK(ext.states[k] == sp.states[k]);
  }

  SECTION("a verifier fact is carried forward until an action deletes it") {
    GroundAction a1;
    a1.schema = "stamp";
    a1.eff_add = {fact("B", {})};
    GroundAction a2;
    a2.schema = "wipe";
    a2.eff_del = {fact("C", {})};
    StatePlan sp = state_plan({fact("A", {})}, {a1, a2});

    MotionSequence seq;
    seq.primitives = {MotionPrimitive::inspect("x1"),
                      MotionPrimitive::inspect("x2")};
    seq.groups = {{0, 1}, {1, 2}};
    Verifier v = [](std::vector<MotionPrimitive> const& mu) {
      State out;
      for (auto const& m : mu)
        if (m.object == "x1") out.insert(fact("C", {}));
      return out;
    };
    ExtendedStatePlan ext = extend_state_plan(sp, seq, v);
    CHECK(ext.states[1].count(fact("C", {})));
    CHECK(!ext.states[2].count(fact("C", {})));
    CHECK(ext.states[2] == State{fact("A", {}), fact("B", {})});
  }

  SECTION("a grouping that misses actions is rejected") {
    GroundAction a1;
    a1.schema = "stamp";
    StatePlan sp = state_plan({}, {a1});
    MotionSequence seq;  // no groups
    CHECK_THROWS_AS(extend_state_plan(sp, seq, empty_verifier()),
                    ValidationError);
  }
}

TEST_CASE("the alley plan's extended states pick up en-route places") {
  SceneGraph g = severed_alley();
  auto problem = build_instance(inspection_domain(Encoding::kSparse), g, "P0",
                                GoalFormula::lit(fact("VisitedPlace", {"P3"})));
  SolveReport rep = solve_severed_alley(g, problem);
  REQUIRE(rep.outcome == Outcome::kSolved);
  REQUIRE(rep.plan->steps.size() == 3);  // approach, inspect, move on

  WorkMeter wm;
  ProblemInstance ext_problem = extend_instance(
      problem, ground_optimistic(problem, wm), rep.plan->actions());
  StatePlan sp = state_plan(ext_problem.init, rep.plan->actions());
  MotionSequence seq = motion_sequence(*rep.plan);
  ExtendedStatePlan ext = extend_state_plan(sp, seq, place_verifier(g));

  // Hand recurrence: each extended state is the planned one, plus carried
  // leftovers minus deletions, plus what the verifier saw on that action.
  std::vector<State> expect{sp.states[0]};
  for (size_t k = 1; k < sp.states.size(); ++k) {
    State carried = expect[k - 1];
    for (auto const& f : sp.actions[k - 1].eff_del) carried.erase(f);
    State s = sp.states[k];
    s.insert(carried.begin(), carried.end());
    State seen = v_place(seq.group(k - 1), g);
    s.insert(seen.begin(), seen.end());
    expect.push_back(s);
  }
  REQUIRE(ext.states.size() == expect.size());
  for (size_t k = 0; k < expect.size(); ++k) CHECK(ext.states[k] == expect[k]);

  // The corridor forces the first trajectory through P1: en route only,
  // never a planned effect.
  CHECK(!sp.states[1].count(fact("VisitedPlace", {"P1"})));
  CHECK(ext.states[1].count(fact("VisitedPlace", {"P1"})));
  CHECK(visited_names(ext.states.back()) ==
        std::set<std::string>{"P0", "P1", "P2", "P3"});
}

TEST_CASE("planner output is execution consistent") {
  SECTION("on the severed alley") {
    SceneGraph g = severed_alley();
    auto problem =
        build_instance(inspection_domain(Encoding::kSparse), g, "P0",
                       GoalFormula::lit(fact("VisitedPlace", {"P3"})));
    SolveReport rep = solve_severed_alley(g, problem);
    REQUIRE(rep.outcome == Outcome::kSolved);
    WorkMeter wm;
    ProblemInstance ext = extend_instance(
        problem, ground_optimistic(problem, wm), rep.plan->actions());
    REQUIRE(plan_valid(ext, rep.plan->actions()));
    ConsistencyReport rep2 =
        check_execution_consistency(ext, *rep.plan, motion_sequence(*rep.plan), g);
    CHECK(rep2.consistent);
    CHECK(rep2.violations.empty());
  }

  SECTION("across random scenes, with the avoid-set invariant") {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      SceneGraph g = gen_random(6, 1, seed);
      g.objects[0].status = ObjectStatus::kSuspicious;
      g.finalize();
      std::string start = g.places[0].id;
      GoalFormula goal =
          seed % 2 == 0
              ? GoalFormula::conj(
                    {GoalFormula::lit(fact("VisitedPlace", {g.places[4].id})),
                     GoalFormula::lit(fact("VisitedPlace", {g.places[2].id}),
                                      false)})
              : GoalFormula::lit(fact("VisitedPlace", {g.places[4].id}));
      auto problem = build_instance(inspection_domain(Encoding::kSparse), g,
                                    start, goal);
      SolverConfig cfg;
      cfg.seed = seed;
      SolveReport rep = solve(g, problem, cfg);
      if (rep.outcome != Outcome::kSolved) continue;

      WorkMeter wm;
      ProblemInstance ext = extend_instance(
          problem, ground_optimistic(problem, wm), rep.plan->actions());
      REQUIRE(plan_valid(ext, rep.plan->actions()));
      MotionSequence seq = motion_sequence(*rep.plan);
      INFO("seed " << seed);
      CHECK(check_execution_consistency(ext, *rep.plan, seq, g).consistent);

      // Trajectories never touch an avoided place the action is not
      // explicitly parameterized on.
      std::set<std::string> avoid = goal_avoid_places(problem.goal);
      auto const& actions = rep.plan->actions();
      for (size_t k = 0; k < actions.size(); ++k) {
        std::set<std::string> args(actions[k].args.begin(),
                                   actions[k].args.end());
        for (auto const& p : visited_names(v_place(seq.group(k), g)))
          CHECK((!avoid.count(p) || args.count(p)));
      }
    }
  }

  SECTION("an empty plan over a satisfied goal is consistent") {
    SceneGraph g = severed_alley();
    auto problem =
        build_instance(inspection_domain(Encoding::kSparse), g, "P0",
                       GoalFormula::lit(fact("VisitedPlace", {"P0"})));
    ConsistencyReport rep =
        check_execution_consistency(problem, BoundPlan{}, MotionSequence{}, g);
    CHECK(rep.consistent);
  }
}

TEST_CASE("a shortcut through a forbidden place is caught at execution level") {
  SceneGraph g = gen_alley(3, 2.0);
  g.finalize();
  auto problem = build_instance(
      inspection_domain(Encoding::kSparse), g, "P0",
      GoalFormula::conj(
          {GoalFormula::lit(fact("VisitedPlace", {"P2"})),
           GoalFormula::lit(fact("VisitedPlace", {"P1"}), false)}));
  WorkMeter wm;
  Grounding gr = ground_optimistic(problem, wm);

  // moveRelaxed(P0,P2) straight down the corridor: symbolically fine, since
  // P1 is not a parameter and VisitedPlace(P1) is no effect of the action.
  GroundAction const* shortcut = nullptr;
  for (auto const& ga : gr.actions)
    if (ga.schema == "moveRelaxed" && ga.args[0] == "P0" &&
        ga.args[1] == "P2" && ga.args[2] == kInitConfig)
      shortcut = &ga;
  REQUIRE(shortcut != nullptr);

  ProblemInstance ext = extend_instance(problem, gr, {*shortcut});
  REQUIRE(plan_valid(ext, {*shortcut}));

  BoundPlan plan;
  plan.steps.push_back({*shortcut, straight({0.5, 1.0}, {2.5, 1.0})});
  MotionSequence seq = motion_sequence(plan);
  ConsistencyReport rep = check_execution_consistency(ext, plan, seq, g);
  CHECK(!rep.consistent);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].fact == fact("VisitedPlace", {"P1"}));
  CHECK(rep.violations[0].expected == false);
  CHECK(rep.violations[0].step == 1);
}

TEST_CASE("the simulator steps trajectories tick by tick") {
  SceneGraph g = two_by_three();

  SECTION("an empty sequence yields a single tick") {
    ExecutionTrace tr = simulate(MotionSequence{}, g);
    CHECK(tr.ticks.size() == 1);
    CHECK(tr.faults.empty());
  }

  SECTION("a 1 m straight line at 1 m/s and 0.05 s ticks gives 21 ticks") {
    MotionSequence seq;
    seq.primitives = {MotionPrimitive::follow(straight({0.2, 1.2}, {1.2, 1.2}))};
    seq.groups = {{0, 1}};
    ExecutionTrace tr = simulate(seq, g);
    CHECK(tr.ticks.size() == 21);
    CHECK(tr.faults.empty());
    CHECK(tr.ticks.front().place == "P0");
    CHECK(tr.ticks.back().place == "P1");
    CHECK(tr.ticks.back().t == Catch::Approx(1.0));
    CHECK(dist(tr.ticks.back().pose.position, {1.2, 1.2}) <= kGeomTol);
  }
}

TEST_CASE("the simulator mirrors the binder's collision rules") {
  SECTION("crossing a suspicious disc mid-run is a fault") {
    SceneGraph g = gen_alley(3, 2.0);
    g.objects.push_back(
        {"O9", {1.5, 1.0}, 0.3, 0.8, ObjectStatus::kSuspicious, "P1"});
    g.finalize();
    MotionSequence seq;
    seq.primitives = {MotionPrimitive::follow(straight({0.5, 1.0}, {2.5, 1.0}))};
    seq.groups = {{0, 1}};
    ExecutionTrace tr = simulate(seq, g);
    REQUIRE(!tr.faults.empty());
    CHECK(tr.faults.front().object == "O9");
  }

  SECTION("safe objects only block when the domain says so") {
    SceneGraph g = gen_alley(3, 2.0);
    g.objects.push_back(
        {"O1", {1.5, 1.0}, 0.3, 0.3, ObjectStatus::kSafe, "P1"});
    g.finalize();
    MotionSequence seq;
    seq.primitives = {MotionPrimitive::follow(straight({0.5, 1.0}, {2.5, 1.0}))};
    seq.groups = {{0, 1}};
    CHECK(simulate(seq, g).faults.empty());
    SimConfig retrieval_cfg;
    retrieval_cfg.safe_objects_block = true;
    CHECK(!simulate(seq, g, retrieval_cfg).faults.empty());
  }

  SECTION("an overlapping deposit is a fault") {
    SceneGraph g = gen_alley(2, 2.0);
    g.objects.push_back({"O1", {0.5, 1.0}, 0.3, 0.3, ObjectStatus::kSafe, "P0"});
    g.objects.push_back({"O2", {1.4, 1.0}, 0.3, 0.3, ObjectStatus::kSafe, "P1"});
    g.finalize();
    MotionSequence seq;
    seq.primitives = {MotionPrimitive::pick("O1"),
                      MotionPrimitive::place("O1", {1.5, 1.0})};
    seq.groups = {{0, 1}, {1, 2}};
    ExecutionTrace tr = simulate(seq, g);
    REQUIRE(!tr.faults.empty());
    CHECK(tr.faults.front().object == "O2");
    CHECK(dist(tr.final_positions.at("O1"), {1.5, 1.0}) <= kGeomTol);
  }
}

TEST_CASE("solved plans simulate without faults") {
  SECTION("the severed alley run, with the inspection visible in the trace") {
    SceneGraph g = severed_alley();
    auto problem =
        build_instance(inspection_domain(Encoding::kSparse), g, "P0",
                       GoalFormula::lit(fact("VisitedPlace", {"P3"})));
    SolveReport rep = solve_severed_alley(g, problem);
    REQUIRE(rep.outcome == Outcome::kSolved);
    ExecutionTrace tr = simulate(motion_sequence(*rep.plan), g);
    CHECK(tr.faults.empty());
    CHECK(tr.ticks.front().statuses.at("O9") == ObjectStatus::kSuspicious);
    CHECK(tr.ticks.back().statuses.at("O9") == ObjectStatus::kSafe);
    CHECK(tr.ticks.back().place == "P3");
    for (auto const& tick : tr.ticks) CHECK(tick.place.has_value());
  }

  SECTION("a retrieval fetch-and-deposit run") {
    SceneGraph g = gen_grid(1, 2, 4.0);
    g.objects.push_back({"O1", {6, 2}, 0.3, 0.3, ObjectStatus::kSafe, "P(0,1)"});
    g.finalize();
    auto problem = build_instance(
        retrieval_domain(), g, "P(0,0)",
        GoalFormula::lit(fact("ObjectAtPlace", {"O1", "P(0,0)"})));
    SolverConfig cfg;
    cfg.seed = 5;
    SolveReport rep = solve(g, problem, cfg);
    REQUIRE(rep.outcome == Outcome::kSolved);

    WorkMeter wm;
    ProblemInstance ext = extend_instance(
        problem, ground_optimistic(problem, wm), rep.plan->actions());
    MotionSequence seq = motion_sequence(*rep.plan);
    CHECK(check_execution_consistency(ext, *rep.plan, seq, g).consistent);

    SimConfig sim_cfg;
    sim_cfg.safe_objects_block = true;
    ExecutionTrace tr = simulate(seq, g, sim_cfg);
    CHECK(tr.faults.empty());
    // The object ends up where the plan said it would.
    CHECK(dist(tr.final_positions.at("O1"), rep.plan->placements.at("O1")) <=
          kGeomTol);
    bool carried = false;
    for (auto const& tick : tr.ticks) carried |= tick.held == "O1";
    CHECK(carried);
  }

  SECTION("across the random corpus") {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      SceneGraph g = gen_random(6, 1, seed);
      g.objects[0].status = ObjectStatus::kSuspicious;
      g.finalize();
      auto problem = build_instance(
          inspection_domain(Encoding::kSparse), g, g.places[0].id,
          GoalFormula::lit(fact("VisitedPlace", {g.places[4].id})));
      SolverConfig cfg;
      cfg.seed = seed;
      SolveReport rep = solve(g, problem, cfg);
      if (rep.outcome != Outcome::kSolved) continue;
      INFO("seed " << seed);
      CHECK(simulate(motion_sequence(*rep.plan), g).faults.empty());
    }
  }
}
