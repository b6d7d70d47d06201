#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgtamp/base.hpp"
#include "sgtamp/geometry.hpp"
#include "sgtamp/scene_graph.hpp"

namespace sgtamp {

using json = nlohmann::json;

inline constexpr double kPi = 3.14159265358979323846;

struct Pose {
  Vec2 position;
  double heading = 0.0;  // radians in [-pi, pi)
  friend bool operator==(Pose const& a, Pose const& b) {
    return a.position.x == b.position.x && a.position.y == b.position.y &&
           a.heading == b.heading;
  }
};

inline double normalize_heading(double h) {
  while (h >= kPi) h -= 2 * kPi;
  while (h < -kPi) h += 2 * kPi;
  return h;
}

struct Disc {
  Vec2 center;
  double radius = 0.0;  // effective blocking radius, clearance included
  std::string object_id;
};

struct ObstacleSet {
  std::vector<Disc> discs;
  std::set<std::string> avoid_places;
};

struct Trajectory {
  std::vector<Pose> waypoints;                // at least one pose
  std::vector<std::string> place_sequence;    // first-crossing order

  double length() const {
    double L = 0;
    for (size_t i = 1; i < waypoints.size(); ++i)
      L += dist(waypoints[i - 1].position, waypoints[i].position);
    return L;
  }
};

/// Sampler and motion-planner knobs. Values are fixed here rather than read
/// from the environment so runs are reproducible.
struct StreamConfig {
  double clearance = 0.2;    // added to every inflated radius
  double r_inspect = 1.5;    // max distance to inspect an object
  double r_grasp = 1.0;      // max distance to grasp an object
  int max_attempts = 200;    // rejection sampling cap
  int rrt_max_nodes = 2000;
  double rrt_goal_bias = 0.1;
  double rrt_step = 0.25;
};

// ---------------------------------------------------------------------------
// Collision kernel
// ---------------------------------------------------------------------------

/// True iff the segment keeps distance strictly greater than each disc's
/// radius (closed discs: tangency blocks).
inline bool segment_free(Vec2 a, Vec2 b, std::vector<Disc> const& discs,
                         WorkMeter& wm) {
  wm.seg_checks += std::max<size_t>(discs.size(), 1);
  for (auto const& d : discs) {
    if (point_segment_distance(d.center, a, b) <= d.radius) return false;
  }
  return true;
}

/// Ids of discs the segment hits, sorted and deduplicated.
inline std::vector<std::string> blocking_discs(Vec2 a, Vec2 b,
                                               std::vector<Disc> const& discs,
                                               WorkMeter& wm) {
  wm.seg_checks += std::max<size_t>(discs.size(), 1);
  std::set<std::string> hit;
  for (auto const& d : discs) {
    if (point_segment_distance(d.center, a, b) <= d.radius)
      hit.insert(d.object_id);
  }
  return {hit.begin(), hit.end()};
}

inline bool point_free(Vec2 p, std::vector<Disc> const& discs) {
  for (auto const& d : discs)
    if (dist(p, d.center) <= d.radius) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Pose samplers
// ---------------------------------------------------------------------------

/// Rejection-samples a pose inside the place polygon, outside every obstacle
/// disc. Fails (nullopt) if the place is in the avoid set or attempts run
/// out — callers treat that as a stream failure.
inline std::optional<Pose> sample_pose_in_place(SceneGraph const& graph,
                                                std::string const& place_id,
                                                ObstacleSet const& obstacles,
                                                StreamConfig const& cfg,
                                                Rng& rng, WorkMeter& wm) {
  auto pi = graph.place_index(place_id);
  if (!pi) return std::nullopt;
  if (obstacles.avoid_places.count(place_id)) return std::nullopt;
  PlaceNode const& place = graph.place(*pi);
  BBox box = bbox_of(place.polygon);
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    ++wm.stream_samples;
    Vec2 p{rng.uniform(box.min_x, box.max_x), rng.uniform(box.min_y, box.max_y)};
    if (!point_in_polygon(place.polygon, p)) continue;
    if (!point_free(p, obstacles.discs)) continue;
    double heading = normalize_heading(rng.uniform(-kPi, kPi));
    return Pose{p, heading};
  }
  return std::nullopt;
}

/// Samples a pose at distance d from the object center with
/// physical radius < d <= max_range, inside some non-avoided place, outside
/// every active disc except the target object's own. The pose faces the
/// object. Serves both inspect (max_range = r_inspect) and grasp
/// (max_range = r_grasp) streams. `required_place` pins the containing place
/// (rejecting poses that spill into a neighbor); `center_override` relocates
/// the object, used after it has been put down somewhere else.
inline std::optional<Pose> sample_pose_near_object(
    SceneGraph const& graph, std::string const& object_id, double max_range,
    ObstacleSet const& obstacles, StreamConfig const& cfg, Rng& rng,
    WorkMeter& wm, std::string const* required_place = nullptr,
    Vec2 const* center_override = nullptr) {
  auto oi = graph.object_index(object_id);
  if (!oi) return std::nullopt;
  ObjectNode const& obj = graph.object(*oi);
  Vec2 center = center_override ? *center_override : obj.position;
  if (max_range <= obj.radius) return std::nullopt;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    ++wm.stream_samples;
    // (radius, max_range]: 1 - uniform01() lies in (0, 1].
    double d = obj.radius + (1.0 - rng.uniform01()) * (max_range - obj.radius);
    double ang = rng.uniform(-kPi, kPi);
    Vec2 p = center + Vec2{d * std::cos(ang), d * std::sin(ang)};
    auto pi = graph.place_containing(p);
    if (!pi) continue;
    if (required_place && graph.place(*pi).id != *required_place) continue;
    if (obstacles.avoid_places.count(graph.place(*pi).id)) continue;
    bool clear = true;
    for (auto const& disc : obstacles.discs) {
      if (disc.object_id == object_id) continue;
      if (dist(p, disc.center) <= disc.radius) {
        clear = false;
        break;
      }
    }
    if (!clear) continue;
    double heading =
        normalize_heading(std::atan2(center.y - p.y, center.x - p.x));
    return Pose{p, heading};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Mid-level route planner
// ---------------------------------------------------------------------------

struct RouteResult {
  enum class Status { kOk, kDisconnected, kBlocked };
  Status status = Status::kDisconnected;
  std::vector<std::string> places;  // start … goal on success

  bool ok() const { return status == Status::kOk; }
};

/// Shortest place path by centroid Euclidean edge length (A* with the
/// straight-line heuristic). Avoided places are excluded outright, endpoints
/// included — callers exempt explicitly parameterized places by removing
/// them from `avoid` before the call. Failure distinguishes a disconnected
/// graph from a path severed by the avoid set.
inline RouteResult route(SceneGraph const& graph, std::string const& start_id,
                         std::string const& goal_id,
                         std::set<std::string> const& avoid, WorkMeter& wm) {
  RouteResult res;
  auto si = graph.place_index(start_id);
  auto gi = graph.place_index(goal_id);
  if (!si || !gi) return res;  // kDisconnected: unknown endpoints

  size_t n = graph.place_count();
  std::vector<bool> avoided(n, false);
  for (size_t i = 0; i < n; ++i)
    avoided[i] = avoid.count(graph.place(i).id) != 0;

  auto classify_failure = [&]() {
    auto seen = graph.reachable(*si, std::vector<bool>(n, false));
    res.status = seen[*gi] ? RouteResult::Status::kBlocked
                           : RouteResult::Status::kDisconnected;
    return res;
  };
  if (avoided[*si] || avoided[*gi]) return classify_failure();

  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<size_t> parent(n, SIZE_MAX);
  std::vector<bool> closed(n, false);
  auto h = [&](size_t i) {
    return dist(graph.place(i).centroid, graph.place(*gi).centroid);
  };
  // (f, node); lazy-deletion binary heap.
  std::priority_queue<std::pair<double, size_t>,
                      std::vector<std::pair<double, size_t>>,
                      std::greater<>>
      open;
  g[*si] = 0;
  open.push({h(*si), *si});
  while (!open.empty()) {
    auto [f, cur] = open.top();
    open.pop();
    if (closed[cur]) continue;
    closed[cur] = true;
    if (cur == *gi) {
      std::vector<std::string> path;
      for (size_t at = cur; at != SIZE_MAX; at = parent[at])
        path.push_back(graph.place(at).id);
      std::reverse(path.begin(), path.end());
      res.status = RouteResult::Status::kOk;
      res.places = std::move(path);
      return res;
    }
    for (size_t nb : graph.neighbors(cur)) {
      if (avoided[nb] || closed[nb]) continue;
      ++wm.route_relax;
      double cand =
          g[cur] + dist(graph.place(cur).centroid, graph.place(nb).centroid);
      if (cand < g[nb]) {
        g[nb] = cand;
        parent[nb] = cur;
        open.push({cand + h(nb), nb});
      }
    }
  }
  return classify_failure();
}

// ---------------------------------------------------------------------------
// Trajectory refinement
// ---------------------------------------------------------------------------

struct RefineResult {
  std::optional<Trajectory> trajectory;
  std::vector<std::string> blockers;  // discs on the straight attempt

  bool ok() const { return trajectory.has_value(); }
};

namespace detail {

/// True if the segment stays clear of every avoided place polygon.
inline bool segment_avoids(SceneGraph const& graph, Vec2 a, Vec2 b,
                           std::set<std::string> const& avoid, WorkMeter& wm) {
  if (avoid.empty()) return true;
  for (auto const& id : avoid) {
    auto pi = graph.place_index(id);
    if (!pi) continue;
    ++wm.seg_checks;
    if (segment_intersects_polygon(graph.place(*pi).polygon, a, b))
      return false;
  }
  return true;
}

inline bool point_in_region(std::vector<Polygon const*> const& region, Vec2 p) {
  for (auto const* poly : region)
    if (point_in_polygon(*poly, p)) return true;
  return false;
}

/// RRT from `from` to `to`, sampling inside the route polygons, with edges
/// checked against discs and avoided places. Returns the waypoint list
/// (excluding `from`, including `to`) or nullopt.
inline std::optional<std::vector<Vec2>> rrt_connect(
    SceneGraph const& graph, std::vector<Polygon const*> const& region,
    Vec2 from, Vec2 to, ObstacleSet const& obstacles, StreamConfig const& cfg,
    Rng& rng, WorkMeter& wm) {
  double inf = std::numeric_limits<double>::infinity();
  BBox box{inf, inf, -inf, -inf};
  for (auto const* poly : region) {
    BBox b = bbox_of(*poly);
    box.min_x = std::min(box.min_x, b.min_x);
    box.min_y = std::min(box.min_y, b.min_y);
    box.max_x = std::max(box.max_x, b.max_x);
    box.max_y = std::max(box.max_y, b.max_y);
  }
  std::vector<Vec2> nodes{from};
  std::vector<int> parents{-1};

  auto edge_free = [&](Vec2 a, Vec2 b) {
    return segment_free(a, b, obstacles.discs, wm) &&
           segment_avoids(graph, a, b, obstacles.avoid_places, wm);
  };

  for (int it = 0; it < cfg.rrt_max_nodes; ++it) {
    ++wm.rrt_nodes;
    Vec2 target;
    if (rng.uniform01() < cfg.rrt_goal_bias) {
      target = to;
    } else {
      target = {rng.uniform(box.min_x, box.max_x),
                rng.uniform(box.min_y, box.max_y)};
      if (!point_in_region(region, target)) continue;
    }
    size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < nodes.size(); ++i) {
      double d = dist(nodes[i], target);
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    Vec2 base = nodes[nearest];
    Vec2 step = target - base;
    double len = dist(base, target);
    if (len < kGeomTol) continue;
    if (len > cfg.rrt_step) step = step * (cfg.rrt_step / len);
    Vec2 fresh = base + step;
    if (!point_in_region(region, fresh)) continue;
    if (!point_free(fresh, obstacles.discs)) continue;
    if (!edge_free(base, fresh)) continue;
    nodes.push_back(fresh);
    parents.push_back(static_cast<int>(nearest));

    if (dist(fresh, to) <= cfg.rrt_step && edge_free(fresh, to)) {
      std::vector<Vec2> path{to};
      for (int at = static_cast<int>(nodes.size()) - 1; at > 0;
           at = parents[at])
        path.push_back(nodes[at]);
      path.push_back(from);
      std::reverse(path.begin(), path.end());
      // Greedy shortcutting: skip ahead to the farthest directly reachable
      // waypoint at each step.
      std::vector<Vec2> kept{path.front()};
      size_t i = 0;
      while (i + 1 < path.size()) {
        size_t j = path.size() - 1;
        for (; j > i + 1; --j) {
          if (edge_free(path[i], path[j])) break;
        }
        kept.push_back(path[j]);
        i = j;
      }
      kept.erase(kept.begin());  // drop `from`
      return kept;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Refines a place route into a trajectory: straight waypoint chain through
/// interior place centroids, with colliding segments re-planned by an RRT
/// confined to the route polygons. On failure, reports the obstacle discs
/// that intersect the straight segment. The returned trajectory's
/// place_sequence is recomputed from its final waypoints.
inline RefineResult refine(SceneGraph const& graph,
                           std::vector<std::string> const& route_places,
                           Pose start, Pose goal, ObstacleSet const& obstacles,
                           StreamConfig const& cfg, Rng& rng, WorkMeter& wm) {
  RefineResult res;
  if (route_places.empty()) return res;

  std::vector<Polygon const*> region;
  for (auto const& id : route_places) {
    auto pi = graph.place_index(id);
    if (!pi) return res;
    region.push_back(&graph.place(*pi).polygon);
  }

  // Interior centroids are guidance only; ones covered by a disc would force
  // the detour planner through an obstacle, so skip them.
  std::vector<Vec2> chain{start.position};
  for (size_t i = 1; i + 1 < route_places.size(); ++i) {
    auto pi = graph.place_index(route_places[i]);
    Vec2 c = graph.place(*pi).centroid;
    if (point_free(c, obstacles.discs)) chain.push_back(c);
  }
  if (dist(start.position, goal.position) > kGeomTol ||
      route_places.size() > 1)
    chain.push_back(goal.position);

  std::vector<Vec2> final_points{chain[0]};
  std::set<std::string> blockers;
  for (size_t i = 1; i < chain.size(); ++i) {
    Vec2 a = chain[i - 1];
    Vec2 b = chain[i];
    if (segment_free(a, b, obstacles.discs, wm) &&
        detail::segment_avoids(graph, a, b, obstacles.avoid_places, wm)) {
      final_points.push_back(b);
      continue;
    }
    for (auto const& id : blocking_discs(a, b, obstacles.discs, wm))
      blockers.insert(id);
    auto detour = detail::rrt_connect(graph, region, a, b, obstacles, cfg,
                                      rng, wm);
    if (!detour) {
      res.blockers = {blockers.begin(), blockers.end()};
      return res;
    }
    for (auto const& p : *detour) final_points.push_back(p);
  }

  Trajectory traj;
  for (size_t i = 0; i < final_points.size(); ++i) {
    double heading = goal.heading;
    if (i + 1 < final_points.size()) {
      Vec2 d = final_points[i + 1] - final_points[i];
      heading = normalize_heading(std::atan2(d.y, d.x));
    }
    if (i == 0) heading = start.heading;
    traj.waypoints.push_back({final_points[i], heading});
  }
  if (traj.waypoints.size() > 1) traj.waypoints.back().heading = goal.heading;

  // Record crossed places in first-entry order.
  std::set<size_t> seen;
  size_t last = traj.waypoints.size() > 1 ? traj.waypoints.size() - 1 : 1;
  for (size_t i = 0; i < last; ++i) {
    Vec2 a = traj.waypoints[i].position;
    Vec2 b = traj.waypoints[std::min(i + 1, traj.waypoints.size() - 1)].position;
    for (auto const& [t, pi] : graph.ordered_segment_crossings(a, b)) {
      if (seen.insert(pi).second)
        traj.place_sequence.push_back(graph.place(pi).id);
    }
  }
  res.trajectory = std::move(traj);
  return res;
}

/// Builds the active obstacle set: one disc per listed object at inflated
/// radius plus clearance.
inline ObstacleSet make_obstacles(SceneGraph const& graph,
                                  std::vector<std::string> const& object_ids,
                                  std::set<std::string> avoid_places,
                                  StreamConfig const& cfg) {
  ObstacleSet out;
  out.avoid_places = std::move(avoid_places);
  for (auto const& id : object_ids) {
    auto oi = graph.object_index(id);
    if (!oi) throw ValidationError("unknown object in obstacle set: " + id);
    ObjectNode const& o = graph.object(*oi);
    out.discs.push_back({o.position, o.inflated_radius + cfg.clearance, o.id});
  }
  return out;
}

inline json trajectory_to_json(Trajectory const& t) {
  json w = json::array();
  for (auto const& p : t.waypoints)
    w.push_back({{"x", p.position.x}, {"y", p.position.y}, {"heading", p.heading}});
  return json{{"waypoints", w}, {"place_sequence", t.place_sequence}};
}

inline Trajectory trajectory_from_json(json const& j) {
  Trajectory t;
  for (auto const& w : j.at("waypoints"))
    t.waypoints.push_back({{w.at("x").get<double>(), w.at("y").get<double>()},
                           w.at("heading").get<double>()});
  t.place_sequence =
      j.at("place_sequence").get<std::vector<std::string>>();
  return t;
}

}  // namespace sgtamp
