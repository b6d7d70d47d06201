#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace sgtamp {

// Tolerance for boundary/incidence decisions. Generated maps have unit-scale
// coordinates, so an absolute tolerance is appropriate.
inline constexpr double kGeomTol = 1e-9;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(Vec2 o) const { return x == o.x && y == o.y; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

using Polygon = std::vector<Vec2>;

struct BBox {
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;

  bool contains(Vec2 p, double tol) const {
    return p.x >= min_x - tol && p.x <= max_x + tol && p.y >= min_y - tol &&
           p.y <= max_y + tol;
  }
  bool overlaps_segment(Vec2 a, Vec2 b, double tol) const {
    double lo_x = std::min(a.x, b.x) - tol, hi_x = std::max(a.x, b.x) + tol;
    double lo_y = std::min(a.y, b.y) - tol, hi_y = std::max(a.y, b.y) + tol;
    return !(hi_x < min_x || lo_x > max_x || hi_y < min_y || lo_y > max_y);
  }
};

inline BBox bbox_of(Polygon const& poly) {
  BBox b{poly[0].x, poly[0].y, poly[0].x, poly[0].y};
  for (auto const& v : poly) {
    b.min_x = std::min(b.min_x, v.x);
    b.min_y = std::min(b.min_y, v.y);
    b.max_x = std::max(b.max_x, v.x);
    b.max_y = std::max(b.max_y, v.y);
  }
  return b;
}

inline double polygon_area_signed(Polygon const& poly) {
  double a = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    a += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * a;
}

inline Vec2 polygon_centroid(Polygon const& poly) {
  double a = 0.0;
  Vec2 c{0, 0};
  for (size_t i = 0; i < poly.size(); ++i) {
    Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
    double w = cross(p, q);
    a += w;
    c.x += (p.x + q.x) * w;
    c.y += (p.y + q.y) * w;
  }
  if (std::abs(a) < kGeomTol) {  // degenerate: average the vertices
    Vec2 m{0, 0};
    for (auto const& v : poly) m = m + v;
    return m * (1.0 / static_cast<double>(poly.size()));
  }
  return c * (1.0 / (3.0 * a));
}

/// Distance from p to segment [a, b].
inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = dot(ab, ab);
  if (len2 <= 0.0) return dist(p, a);
  double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return dist(p, a + ab * t);
}

/// Closed-set point-in-polygon: boundary points (within tol) count as inside.
inline bool point_in_polygon(Polygon const& poly, Vec2 p, double tol = kGeomTol) {
  size_t n = poly.size();
  bool inside = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    if (point_segment_distance(p, poly[j], poly[i]) <= tol) return true;
    bool crosses = (poly[i].y > p.y) != (poly[j].y > p.y);
    if (crosses) {
      double x_at =
          poly[j].x + (poly[i].x - poly[j].x) * (p.y - poly[j].y) / (poly[i].y - poly[j].y);
      if (p.x < x_at) inside = !inside;
    }
  }
  return inside;
}

inline bool segments_properly_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  double d1 = cross(b - a, c - a);
  double d2 = cross(b - a, d - a);
  double d3 = cross(d - c, a - c);
  double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

inline double segment_segment_distance(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  if (segments_properly_intersect(a, b, c, d)) return 0.0;
  return std::min(std::min(point_segment_distance(a, c, d), point_segment_distance(b, c, d)),
                  std::min(point_segment_distance(c, a, b), point_segment_distance(d, a, b)));
}

/// Min distance between the closed segment [a,b] and the closed polygon
/// (0 when they touch or the segment passes inside).
inline double segment_polygon_distance(Polygon const& poly, Vec2 a, Vec2 b) {
  if (point_in_polygon(poly, a) || point_in_polygon(poly, b)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    best = std::min(best, segment_segment_distance(a, b, poly[j], poly[i]));
    if (best <= 0.0) return 0.0;
  }
  return best;
}

inline bool segment_intersects_polygon(Polygon const& poly, Vec2 a, Vec2 b,
                                       double tol = kGeomTol) {
  return segment_polygon_distance(poly, a, b) <= tol;
}

/// Parameter intervals of [a,b] (t in [0,1]) that lie inside the closed
/// polygon. Used to order place crossings along a trajectory segment.
inline std::vector<std::pair<double, double>> segment_polygon_intervals(
    Polygon const& poly, Vec2 a, Vec2 b, double tol = kGeomTol) {
  std::vector<double> ts{0.0, 1.0};
  Vec2 ab = b - a;
  double len2 = dot(ab, ab);
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    Vec2 c = poly[j], d = poly[i];
    Vec2 cd = d - c;
    double denom = cross(ab, cd);
    if (std::abs(denom) > kGeomTol) {
      double t = cross(c - a, cd) / denom;
      double u = cross(c - a, ab) / denom;
      if (t > 0.0 && t < 1.0 && u >= -kGeomTol && u <= 1.0 + kGeomTol) ts.push_back(t);
    } else if (len2 > 0.0) {
      // Collinear overlap: project the edge endpoints onto [a,b].
      if (point_segment_distance(c, a, b) <= tol) {
        double t = dot(c - a, ab) / len2;
        if (t > 0.0 && t < 1.0) ts.push_back(t);
      }
      if (point_segment_distance(d, a, b) <= tol) {
        double t = dot(d - a, ab) / len2;
        if (t > 0.0 && t < 1.0) ts.push_back(t);
      }
    }
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(),
                       [](double x, double y) { return std::abs(x - y) < 1e-12; }),
           ts.end());
  std::vector<std::pair<double, double>> out;
  for (size_t i = 0; i + 1 < ts.size(); ++i) {
    Vec2 mid = a + ab * ((ts[i] + ts[i + 1]) * 0.5);
    if (point_in_polygon(poly, mid, tol)) {
      if (!out.empty() && std::abs(out.back().second - ts[i]) < 1e-12) {
        out.back().second = ts[i + 1];
      } else {
        out.emplace_back(ts[i], ts[i + 1]);
      }
    }
  }
  // A single-point touch (e.g. a corner) yields no midpoint interval; detect
  // it so closed-set semantics still report the contact.
  if (out.empty()) {
    for (double t : ts) {
      Vec2 p = a + ab * t;
      if (point_in_polygon(poly, p, tol)) {
        out.emplace_back(t, t);
        break;
      }
    }
  }
  return out;
}

inline double polygon_polygon_distance(Polygon const& pa, Polygon const& pb) {
  double best = std::numeric_limits<double>::infinity();
  for (auto const& v : pa) {
    if (point_in_polygon(pb, v)) return 0.0;
  }
  for (auto const& v : pb) {
    if (point_in_polygon(pa, v)) return 0.0;
  }
  size_t na = pa.size(), nb = pb.size();
  for (size_t i = 0, j = na - 1; i < na; j = i++) {
    for (size_t k = 0, l = nb - 1; k < nb; l = k++) {
      best = std::min(best, segment_segment_distance(pa[j], pa[i], pb[l], pb[k]));
      if (best <= 0.0) return 0.0;
    }
  }
  return best;
}

/// Min distance from the closed segment [a,b] to a point (disc center).
/// A disc of radius r blocks the segment iff this is <= r (closed disc:
/// tangency counts as contact).
inline bool segment_hits_disc(Vec2 a, Vec2 b, Vec2 center, double radius) {
  return point_segment_distance(center, a, b) <= radius;
}

}  // namespace sgtamp
