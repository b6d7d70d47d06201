#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "sgtamp/generators.hpp"
#include "sgtamp/streams.hpp"

using namespace sgtamp;

namespace {

// Point-sampling reference for segment/disc collision at 1 mm resolution.
// Sampling can miss grazing contacts, so: oracle says hit => hit.
bool sampled_hit(Vec2 a, Vec2 b, Disc const& d) {
  double len = dist(a, b);
  int steps = std::max(1, static_cast<int>(std::ceil(len / 1e-3)));
  for (int i = 0; i <= steps; ++i) {
    Vec2 p = a + (b - a) * (static_cast<double>(i) / steps);
    if (dist(p, d.center) <= d.radius) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("segment collision kernel boundary semantics") {
  WorkMeter wm;
  Disc d{{0, 0}, 1.0, "O1"};
  CHECK(!segment_free({-2, 0}, {2, 0}, {d}, wm));  // through the center
  CHECK(!segment_free({-2, 1.0}, {2, 1.0}, {d}, wm));  // exact tangency blocks
  CHECK(segment_free({-2, 1.01}, {2, 1.01}, {d}, wm));
  CHECK(segment_free({5, 5}, {6, 6}, {d}, wm));
  CHECK(blocking_discs({-2, 0}, {2, 0}, {d}, wm) ==
        std::vector<std::string>{"O1"});
}

TEST_CASE("segment collision agrees with point-sampling oracle") {
  Rng rng(77);
  WorkMeter wm;
  for (int trial = 0; trial < 300; ++trial) {
    Disc d{{rng.uniform(-2, 2), rng.uniform(-2, 2)}, rng.uniform(0.1, 1.5),
           "O"};
    Vec2 a{rng.uniform(-4, 4), rng.uniform(-4, 4)};
    Vec2 b{rng.uniform(-4, 4), rng.uniform(-4, 4)};
    bool free = segment_free(a, b, {d}, wm);
    if (sampled_hit(a, b, d)) {
      CHECK(!free);
    } else {
      // The sampler can only miss contacts thinner than its resolution.
      if (free) continue;
      double gap = point_segment_distance(d.center, a, b);
      CHECK(gap <= d.radius + 1e-3);
    }
  }
}

TEST_CASE("pose sampling in free and covered places") {
  SceneGraph g = gen_grid(1, 1, 1.0);
  StreamConfig cfg;
  WorkMeter wm;
  ObstacleSet none;

  Rng rng(1);
  auto pose = sample_pose_in_place(g, "P(0,0)", none, cfg, rng, wm);
  REQUIRE(pose.has_value());
  CHECK(point_in_polygon(g.places[0].polygon, pose->position));

  ObstacleSet full;
  full.discs.push_back({{0.5, 0.5}, 1.2, "O1"});  // covers the unit cell
  Rng rng2(2);
  CHECK(!sample_pose_in_place(g, "P(0,0)", full, cfg, rng2, wm).has_value());

  ObstacleSet avoid;
  avoid.avoid_places.insert("P(0,0)");
  Rng rng3(3);
  CHECK(!sample_pose_in_place(g, "P(0,0)", avoid, cfg, rng3, wm).has_value());
}

TEST_CASE("pose sampling lands in the free half of a half-covered place") {
  // Disc covers x < 1 of a 2x1 place; free fraction is about one half.
  SceneGraph g = gen_grid(1, 1, 2.0);
  ObstacleSet obs;
  obs.discs.push_back({{0.0, 1.0}, 1.0, "O1"});
  double frac = oracles::free_area_fraction(g.places[0], obs.discs, 99);
  CHECK(frac > 0.4);
  CHECK(frac < 0.9);

  StreamConfig cfg;
  WorkMeter wm;
  int successes = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    auto pose = sample_pose_in_place(g, "P(0,0)", obs, cfg, rng, wm);
    if (!pose) continue;
    ++successes;
    CHECK(dist(pose->position, obs.discs[0].center) > obs.discs[0].radius);
  }
  CHECK(successes >= 95);
}

TEST_CASE("object approach poses stay in the legal annulus") {
  SceneGraph g = gen_grid(1, 1, 4.0);
  g.objects.push_back({"O1", {2, 2}, 0.3, 1.0, ObjectStatus::kSuspicious,
                       "P(0,0)"});
  g.finalize();
  StreamConfig cfg;
  WorkMeter wm;
  // The object's own inflated disc is active; poses may still enter it.
  ObstacleSet obs = make_obstacles(g, {"O1"}, {}, cfg);

  int inside_inflated = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    auto pose =
        sample_pose_near_object(g, "O1", cfg.r_inspect, obs, cfg, rng, wm);
    REQUIRE(pose.has_value());
    double d = dist(pose->position, Vec2{2, 2});
    CHECK(d > 0.3);
    CHECK(d <= cfg.r_inspect);
    if (d <= obs.discs[0].radius) ++inside_inflated;
    // Heading faces the object.
    Vec2 toward{2 - pose->position.x, 2 - pose->position.y};
    double expect = std::atan2(toward.y, toward.x);
    CHECK(std::abs(normalize_heading(pose->heading - expect)) < 1e-9);
  }
  CHECK(inside_inflated > 0);  // the annulus overlaps the inflated disc
}

TEST_CASE("object approach fails when the annulus misses every place") {
  SceneGraph g;
  g.places.push_back({"P0", {{0, 0}, {0.2, 0}, {0.2, 0.2}, {0, 0.2}}, {}, {}});
  g.objects.push_back({"O1", {0.1, 0.1}, 0.16, 0.16, ObjectStatus::kSuspicious,
                       "P0"});
  g.finalize();
  StreamConfig cfg;
  WorkMeter wm;
  Rng rng(5);
  CHECK(!sample_pose_near_object(g, "O1", cfg.r_inspect, ObstacleSet{}, cfg,
                                 rng, wm)
             .has_value());
}

TEST_CASE("route basics") {
  WorkMeter wm;
  SceneGraph g2 = gen_grid(1, 2, 1.0);
  auto r = route(g2, "P(0,0)", "P(0,1)", {}, wm);
  REQUIRE(r.ok());
  CHECK(r.places == std::vector<std::string>{"P(0,0)", "P(0,1)"});

  auto self = route(g2, "P(0,0)", "P(0,0)", {}, wm);
  REQUIRE(self.ok());
  CHECK(self.places == std::vector<std::string>{"P(0,0)"});
}

TEST_CASE("route threads the one gap in an avoided column") {
  SceneGraph g = gen_grid(10, 10, 1.0);
  std::set<std::string> avoid;
  for (int r = 0; r < 10; ++r) {
    if (r == 7) continue;  // the gap
    avoid.insert("P(" + std::to_string(r) + ",5)");
  }
  WorkMeter wm;
  auto res = route(g, "P(0,0)", "P(9,9)", avoid, wm);
  REQUIRE(res.ok());
  CHECK(std::find(res.places.begin(), res.places.end(), "P(7,5)") !=
        res.places.end());
  for (auto const& p : res.places) CHECK(avoid.count(p) == 0);
  double oracle = oracles::dijkstra_route_cost(g, "P(0,0)", "P(9,9)", avoid);
  CHECK(oracles::path_cost(g, res.places) == Catch::Approx(oracle));
}

TEST_CASE("route is shortest on random graphs") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    SceneGraph g = gen_random(60, 0, seed);
    Rng rng(seed * 101 + 7);
    WorkMeter wm;
    for (int trial = 0; trial < 12; ++trial) {
      std::string a = g.places[rng.uniform_index(g.place_count())].id;
      std::string b = g.places[rng.uniform_index(g.place_count())].id;
      std::set<std::string> avoid;
      for (int k = 0; k < 6; ++k) {
        std::string c = g.places[rng.uniform_index(g.place_count())].id;
        if (c != a && c != b) avoid.insert(c);
      }
      auto res = route(g, a, b, avoid, wm);
      double oracle = oracles::dijkstra_route_cost(g, a, b, avoid);
      if (res.ok()) {
        CHECK(oracles::path_cost(g, res.places) == Catch::Approx(oracle));
      } else {
        CHECK(std::isinf(oracle));
      }
    }
  }
}

TEST_CASE("route failures distinguish disconnection from blocking") {
  // Two disjoint places: never reachable.
  SceneGraph g;
  g.places.push_back({"A", {{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {}, {}});
  g.places.push_back({"B", {{5, 0}, {6, 0}, {6, 1}, {5, 1}}, {}, {}});
  g.finalize();
  WorkMeter wm;
  auto r1 = route(g, "A", "B", {}, wm);
  CHECK(r1.status == RouteResult::Status::kDisconnected);

  SceneGraph alley = gen_alley(3, 1.0);
  auto r2 = route(alley, "P0", "P2", {"P1"}, wm);
  CHECK(r2.status == RouteResult::Status::kBlocked);
  auto r3 = route(alley, "P0", "P2", {"P2"}, wm);
  CHECK(r3.status == RouteResult::Status::kBlocked);  // avoided endpoint
}

TEST_CASE("refine produces a straight two-point trajectory when clear") {
  SceneGraph alley = gen_alley(6, 2.0);
  StreamConfig cfg;
  WorkMeter wm;
  Rng rng(11);
  Pose start{{0.5, 1.0}, 0.0};
  Pose goal{{5.5, 1.0}, 0.0};
  auto res = refine(alley, {"P0", "P1", "P2", "P3", "P4", "P5"}, start, goal,
                    ObstacleSet{}, cfg, rng, wm);
  REQUIRE(res.ok());
  // Interior centroids are collinear with the endpoints here, so every
  // segment is straight; the trajectory must visit all six strips in order.
  CHECK(res.trajectory->place_sequence ==
        std::vector<std::string>{"P0", "P1", "P2", "P3", "P4", "P5"});
  CHECK(res.trajectory->length() == Catch::Approx(5.0));
}

TEST_CASE("refine detours around a disc that leaves a gap") {
  SceneGraph alley = gen_alley(6, 2.0);
  StreamConfig cfg;
  WorkMeter wm;
  Rng rng(13);
  ObstacleSet obs;
  obs.discs.push_back({{3.0, 1.0}, 0.6, "O1"});  // center of the alley
  REQUIRE(oracles::flood_fill_reachable(alley, {0.5, 1.0}, {5.5, 1.0},
                                        obs.discs));
  Pose start{{0.5, 1.0}, 0.0};
  Pose goal{{5.5, 1.0}, 0.0};
  auto res = refine(alley, {"P0", "P1", "P2", "P3", "P4", "P5"}, start, goal,
                    obs, cfg, rng, wm);
  REQUIRE(res.ok());
  auto const& w = res.trajectory->waypoints;
  REQUIRE(w.size() >= 2);
  WorkMeter wm2;
  for (size_t i = 1; i < w.size(); ++i)
    CHECK(segment_free(w[i - 1].position, w[i].position, obs.discs, wm2));
  CHECK(w.front().position.x == Catch::Approx(0.5));
  CHECK(w.back().position.x == Catch::Approx(5.5));
}

TEST_CASE("refine fails with blocker ids when the corridor is severed") {
  SceneGraph alley = gen_alley(6, 1.0);
  StreamConfig cfg;
  WorkMeter wm;
  Rng rng(17);
  ObstacleSet obs;
  obs.discs.push_back({{3.0, 0.5}, 0.8, "O9"});  // spans the full width
  REQUIRE(!oracles::flood_fill_reachable(alley, {0.5, 0.5}, {5.5, 0.5},
                                         obs.discs));
  Pose start{{0.5, 0.5}, 0.0};
  Pose goal{{5.5, 0.5}, 0.0};
  auto res = refine(alley, {"P0", "P1", "P2", "P3", "P4", "P5"}, start, goal,
                    obs, cfg, rng, wm);
  REQUIRE(!res.ok());
  CHECK(res.blockers == std::vector<std::string>{"O9"});
}

TEST_CASE("refined trajectories never clip avoided places") {
  SceneGraph g = gen_grid(3, 3, 1.0);
  StreamConfig cfg;
  std::set<std::string> avoid{"P(1,1)"};
  // Route around the center; the straight chain through centroids stays in
  // the ring, but corner cutting toward P(1,1) must be rejected.
  std::vector<std::string> ring{"P(0,0)", "P(0,1)", "P(0,2)",
                                "P(1,2)", "P(2,2)"};
  ObstacleSet obs;
  obs.avoid_places = avoid;
  WorkMeter wm;
  Rng rng(19);
  Pose start{{0.2, 0.2}, 0.0};
  Pose goal{{2.8, 2.8}, 0.0};
  auto res = refine(g, ring, start, goal, obs, cfg, rng, wm);
  REQUIRE(res.ok());
  auto center = g.place_index("P(1,1)");
  for (size_t i = 1; i < res.trajectory->waypoints.size(); ++i) {
    CHECK(!segment_intersects_polygon(
        g.place(*center).polygon, res.trajectory->waypoints[i - 1].position,
        res.trajectory->waypoints[i].position));
  }
  for (auto const& id : res.trajectory->place_sequence) CHECK(id != "P(1,1)");
}

TEST_CASE("trajectory place sequences match a recomputation") {
  SceneGraph g = gen_grid(4, 4, 1.0);
  StreamConfig cfg;
  WorkMeter wm;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    Pose start{{rng.uniform(0.1, 3.9), rng.uniform(0.1, 3.9)}, 0.0};
    Pose goal{{rng.uniform(0.1, 3.9), rng.uniform(0.1, 3.9)}, 0.0};
    auto sp = g.place_containing(start.position);
    auto gp = g.place_containing(goal.position);
    auto r = route(g, g.place(*sp).id, g.place(*gp).id, {}, wm);
    REQUIRE(r.ok());
    auto res = refine(g, r.places, start, goal, ObstacleSet{}, cfg, rng, wm);
    REQUIRE(res.ok());
    std::set<size_t> seen;
    std::vector<std::string> expect;
    auto const& w = res.trajectory->waypoints;
    for (size_t i = 0; i + 1 < w.size(); ++i) {
      for (auto const& [t, pi] :
           g.ordered_segment_crossings(w[i].position, w[i + 1].position)) {
        if (seen.insert(pi).second) expect.push_back(g.place(pi).id);
      }
    }
    if (w.size() == 1) {
      for (auto const& [t, pi] :
           g.ordered_segment_crossings(w[0].position, w[0].position))
        if (seen.insert(pi).second) expect.push_back(g.place(pi).id);
    }
    CHECK(res.trajectory->place_sequence == expect);
  }
}

TEST_CASE("zero-length refinement yields a single-pose trajectory") {
  SceneGraph g = gen_grid(1, 1, 1.0);
  StreamConfig cfg;
  WorkMeter wm;
  Rng rng(3);
  Pose p{{0.4, 0.6}, 1.0};
  auto res = refine(g, {"P(0,0)"}, p, p, ObstacleSet{}, cfg, rng, wm);
  REQUIRE(res.ok());
  CHECK(res.trajectory->waypoints.size() == 1);
  CHECK(res.trajectory->place_sequence == std::vector<std::string>{"P(0,0)"});
  CHECK(res.trajectory->length() == 0.0);
}

TEST_CASE("work meter accumulates stream effort deterministically") {
  SceneGraph g = gen_grid(5, 5, 1.0);
  auto run = [&]() {
    WorkMeter wm;
    Rng rng(23);
    StreamConfig cfg;
    route(g, "P(0,0)", "P(4,4)", {}, wm);
    sample_pose_in_place(g, "P(2,2)", ObstacleSet{}, cfg, rng, wm);
    return wm.total_virtual_ns();
  };
  uint64_t a = run();
  uint64_t b = run();
  CHECK(a == b);
  CHECK(a > 0);
}
