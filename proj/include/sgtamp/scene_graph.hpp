#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "sgtamp/base.hpp"
#include "sgtamp/geometry.hpp"

namespace sgtamp {

// Two places are graph-adjacent only if their polygons touch within this
// tolerance.
inline constexpr double kAdjacencyEps = 1e-6;

enum class ObjectStatus { kSafe, kSuspicious };

inline std::string to_string(ObjectStatus s) {
  return s == ObjectStatus::kSafe ? "safe" : "suspicious";
}

struct PlaceNode {
  std::string id;
  Polygon polygon;  // CCW, meters
  Vec2 centroid;    // derived on finalize
  std::optional<std::string> region;
};

struct ObjectNode {
  std::string id;
  Vec2 position;
  double radius = 0.0;
  double inflated_radius = 0.0;  // >= radius; hazard extent while suspicious
  ObjectStatus status = ObjectStatus::kSafe;
  std::string place;  // containing place id
};

struct RegionNode {
  std::string id;
  std::string name;
};

/// Hierarchical 2D map: region -> place -> object layers, with an undirected
/// adjacency graph over places. Call finalize() after mutating the public
/// containers; queries assume it ran.
class SceneGraph {
 public:
  std::vector<PlaceNode> places;
  std::vector<std::pair<std::string, std::string>> place_edges;
  std::vector<ObjectNode> objects;
  std::vector<RegionNode> regions;

  /// Validates invariants and (re)builds indices. Throws ValidationError
  /// naming the offending node.
  void finalize() {
    if (places.empty()) throw ValidationError("scene has no places");

    place_idx_.clear();
    object_idx_.clear();
    bboxes_.clear();
    adjacency_.clear();

    std::set<std::string> region_ids;
    for (auto const& r : regions) {
      if (!region_ids.insert(r.id).second) {
        throw ValidationError("duplicate region id: " + r.id);
      }
    }

    for (size_t i = 0; i < places.size(); ++i) {
      PlaceNode& p = places[i];
      if (p.id.empty()) throw ValidationError("place with empty id");
      if (!place_idx_.emplace(p.id, i).second) {
        throw ValidationError("duplicate place id: " + p.id);
      }
      if (p.polygon.size() < 3) {
        throw ValidationError("place " + p.id + ": polygon needs >= 3 vertices");
      }
      double area = polygon_area_signed(p.polygon);
      if (std::abs(area) <= kGeomTol) {
        throw ValidationError("place " + p.id + ": degenerate polygon");
      }
      if (area < 0.0) std::reverse(p.polygon.begin(), p.polygon.end());
      check_simple(p);
      p.centroid = polygon_centroid(p.polygon);
      if (p.region && !region_ids.count(*p.region)) {
        throw ValidationError("place " + p.id + ": unknown region " + *p.region);
      }
      bboxes_.push_back(bbox_of(p.polygon));
    }

    for (size_t i = 0; i < objects.size(); ++i) {
      ObjectNode const& o = objects[i];
      if (o.id.empty()) throw ValidationError("object with empty id");
      if (!object_idx_.emplace(o.id, i).second) {
        throw ValidationError("duplicate object id: " + o.id);
      }
      if (o.radius < 0.0 || o.inflated_radius < o.radius) {
        throw ValidationError("object " + o.id + ": need inflated_radius >= radius >= 0");
      }
      auto it = place_idx_.find(o.place);
      if (it == place_idx_.end()) {
        throw ValidationError("object " + o.id + ": unknown place " + o.place);
      }
      if (!point_in_polygon(places[it->second].polygon, o.position)) {
        throw ValidationError("object " + o.id + ": position outside place " + o.place);
      }
    }

    adjacency_.assign(places.size(), {});
    std::set<std::pair<size_t, size_t>> seen;
    for (auto const& e : place_edges) {
      auto a = place_idx_.find(e.first);
      auto b = place_idx_.find(e.second);
      if (a == place_idx_.end() || b == place_idx_.end()) {
        throw ValidationError("place edge references unknown place: " + e.first + " -- " +
                              e.second);
      }
      if (a->second == b->second) {
        throw ValidationError("self edge on place " + e.first);
      }
      if (polygon_polygon_distance(places[a->second].polygon, places[b->second].polygon) >
          kAdjacencyEps) {
        throw ValidationError("place edge " + e.first + " -- " + e.second +
                              ": polygons do not touch");
      }
      auto key = std::minmax(a->second, b->second);
      if (!seen.insert(key).second) continue;
      adjacency_[a->second].push_back(b->second);
      adjacency_[b->second].push_back(a->second);
    }
    for (auto& nbrs : adjacency_) {
      std::sort(nbrs.begin(), nbrs.end(),
                [this](size_t x, size_t y) { return places[x].id < places[y].id; });
    }
  }

  size_t place_count() const { return places.size(); }
  size_t object_count() const { return objects.size(); }

  std::optional<size_t> place_index(std::string const& id) const {
    auto it = place_idx_.find(id);
    if (it == place_idx_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<size_t> object_index(std::string const& id) const {
    auto it = object_idx_.find(id);
    if (it == object_idx_.end()) return std::nullopt;
    return it->second;
  }

  PlaceNode const& place(size_t i) const { return places[i]; }
  ObjectNode const& object(size_t i) const { return objects[i]; }
  std::vector<size_t> const& neighbors(size_t i) const { return adjacency_[i]; }

  bool adjacent(size_t i, size_t j) const {
    for (size_t n : adjacency_[i]) {
      if (n == j) return true;
    }
    return false;
  }

  /// Place containing the point (closed polygons). Boundary points resolve to
  /// the lowest place id.
  std::optional<size_t> place_containing(Vec2 p) const {
    std::optional<size_t> best;
    for (size_t i = 0; i < places.size(); ++i) {
      if (!bboxes_[i].contains(p, kGeomTol)) continue;
      if (point_in_polygon(places[i].polygon, p)) {
        if (!best || places[i].id < places[*best].id) best = i;
      }
    }
    return best;
  }

  /// All places whose closed polygon intersects the closed segment [a,b]
  /// (single-point contact counts). Returned sorted by place id.
  std::vector<size_t> segment_place_intersections(Vec2 a, Vec2 b) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < places.size(); ++i) {
      if (!bboxes_[i].overlaps_segment(a, b, kGeomTol)) continue;
      if (segment_intersects_polygon(places[i].polygon, a, b)) out.push_back(i);
    }
    std::sort(out.begin(), out.end(),
              [this](size_t x, size_t y) { return places[x].id < places[y].id; });
    return out;
  }

  /// Crossings of [a,b] ordered by entry parameter (ties by place id). Used
  /// to build trajectory place sequences.
  std::vector<std::pair<double, size_t>> ordered_segment_crossings(Vec2 a, Vec2 b) const {
    std::vector<std::pair<double, size_t>> out;
    for (size_t i : segment_place_intersections(a, b)) {
      auto intervals = segment_polygon_intervals(places[i].polygon, a, b);
      if (!intervals.empty()) out.emplace_back(intervals.front().first, i);
    }
    std::sort(out.begin(), out.end(), [this](auto const& x, auto const& y) {
      if (x.first != y.first) return x.first < y.first;
      return places[x.second].id < places[y.second].id;
    });
    return out;
  }

  /// Places reachable from `from` over adjacency, skipping `avoid` (indices).
  std::vector<bool> reachable(size_t from, std::vector<bool> const& avoid) const {
    std::vector<bool> seen(places.size(), false);
    if (from >= places.size() || (from < avoid.size() && avoid[from])) return seen;
    std::vector<size_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      size_t cur = stack.back();
      stack.pop_back();
      for (size_t n : adjacency_[cur]) {
        if (seen[n] || (n < avoid.size() && avoid[n])) continue;
        seen[n] = true;
        stack.push_back(n);
      }
    }
    return seen;
  }

  bool connected() const {
    auto seen = reachable(0, std::vector<bool>(places.size(), false));
    for (bool s : seen) {
      if (!s) return false;
    }
    return true;
  }

 private:
  void check_simple(PlaceNode const& p) const {
    size_t n = p.polygon.size();
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i + 1; j < n; ++j) {
        if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
        if (segments_properly_intersect(p.polygon[i], p.polygon[(i + 1) % n], p.polygon[j],
                                        p.polygon[(j + 1) % n])) {
          throw ValidationError("place " + p.id + ": polygon is not simple");
        }
      }
    }
  }

  std::unordered_map<std::string, size_t> place_idx_;
  std::unordered_map<std::string, size_t> object_idx_;
  std::vector<BBox> bboxes_;
  std::vector<std::vector<size_t>> adjacency_;
};

}  // namespace sgtamp
