#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "sgtamp/scene_graph.hpp"

namespace sgtamp {

namespace detail {

inline Polygon rect_polygon(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

inline std::string grid_place_id(size_t r, size_t c) {
  return "P(" + std::to_string(r) + "," + std::to_string(c) + ")";
}

}  // namespace detail

/// rows x cols unit-cell grid, 4-connected. Cell (r, c) spans
/// [c*s, (c+1)*s] x [r*s, (r+1)*s] and is named P(r,c). The seed is accepted
/// for interface uniformity; the construction is deterministic.
inline SceneGraph gen_grid(size_t rows, size_t cols, double cell_size, uint64_t /*seed*/ = 0) {
  SceneGraph g;
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) {
      PlaceNode p;
      p.id = detail::grid_place_id(r, c);
      p.polygon = detail::rect_polygon(c * cell_size, r * cell_size, (c + 1) * cell_size,
                                       (r + 1) * cell_size);
      g.places.push_back(std::move(p));
      if (c + 1 < cols) {
        g.place_edges.emplace_back(detail::grid_place_id(r, c), detail::grid_place_id(r, c + 1));
      }
      if (r + 1 < rows) {
        g.place_edges.emplace_back(detail::grid_place_id(r, c), detail::grid_place_id(r + 1, c));
      }
    }
  }
  g.finalize();
  return g;
}

/// Single-file corridor: `length` strips of 1m depth and `width` m breadth,
/// chained left to right. P0 .. P(length-1).
inline SceneGraph gen_alley(size_t length, double width) {
  SceneGraph g;
  for (size_t i = 0; i < length; ++i) {
    PlaceNode p;
    p.id = "P" + std::to_string(i);
    p.polygon = detail::rect_polygon(static_cast<double>(i), 0.0, static_cast<double>(i + 1),
                                     width);
    g.places.push_back(std::move(p));
    if (i + 1 < length) {
      g.place_edges.emplace_back("P" + std::to_string(i), "P" + std::to_string(i + 1));
    }
  }
  g.finalize();
  return g;
}

/// Random rectangular partition of a square arena: repeatedly split the
/// largest cell until n_places remain. Cells are convex, tile the arena, and
/// the adjacency graph is connected by construction. Objects are dropped into
/// random cells with status "safe".
inline SceneGraph gen_random(size_t n_places, size_t n_objects, uint64_t seed) {
  if (n_places == 0) throw ValidationError("gen_random: n_places must be > 0");
  Rng rng(seed ^ 0xa02f1c5d9e8b7735ull);

  struct Cell {
    double x0, y0, x1, y1;
  };
  double side = std::ceil(std::sqrt(static_cast<double>(n_places)));
  std::vector<Cell> cells{{0.0, 0.0, side, side}};
  while (cells.size() < n_places) {
    size_t widest = 0;
    double best = -1.0;
    for (size_t i = 0; i < cells.size(); ++i) {
      double area = (cells[i].x1 - cells[i].x0) * (cells[i].y1 - cells[i].y0);
      if (area > best) {
        best = area;
        widest = i;
      }
    }
    Cell cell = cells[widest];
    double w = cell.x1 - cell.x0, h = cell.y1 - cell.y0;
    double f = rng.uniform(0.35, 0.65);
    Cell a = cell, b = cell;
    if (w >= h) {
      double cut = cell.x0 + f * w;
      a.x1 = cut;
      b.x0 = cut;
    } else {
      double cut = cell.y0 + f * h;
      a.y1 = cut;
      b.y0 = cut;
    }
    cells[widest] = a;
    cells.push_back(b);
  }
  std::sort(cells.begin(), cells.end(), [](Cell const& a, Cell const& b) {
    if (a.y0 != b.y0) return a.y0 < b.y0;
    return a.x0 < b.x0;
  });

  SceneGraph g;
  for (size_t i = 0; i < cells.size(); ++i) {
    PlaceNode p;
    p.id = "P" + std::to_string(i);
    p.polygon = detail::rect_polygon(cells[i].x0, cells[i].y0, cells[i].x1, cells[i].y1);
    g.places.push_back(std::move(p));
  }
  // Adjacent iff the rectangles share a boundary run long enough to traverse.
  constexpr double kMinDoorway = 0.1;
  for (size_t i = 0; i < cells.size(); ++i) {
    for (size_t j = i + 1; j < cells.size(); ++j) {
      Cell const& a = cells[i];
      Cell const& b = cells[j];
      bool touch_x = std::abs(a.x1 - b.x0) <= kAdjacencyEps || std::abs(b.x1 - a.x0) <= kAdjacencyEps;
      bool touch_y = std::abs(a.y1 - b.y0) <= kAdjacencyEps || std::abs(b.y1 - a.y0) <= kAdjacencyEps;
      double overlap_y = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
      double overlap_x = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
      if ((touch_x && overlap_y >= kMinDoorway) || (touch_y && overlap_x >= kMinDoorway)) {
        g.place_edges.emplace_back(g.places[i].id, g.places[j].id);
      }
    }
  }

  for (size_t k = 0; k < n_objects; ++k) {
    size_t pi = rng.uniform_index(cells.size());
    Cell const& c = cells[pi];
    double r = rng.uniform(0.10, 0.20);
    double inflated = r * rng.uniform(2.0, 3.5);
    ObjectNode o;
    o.id = "O" + std::to_string(k);
    o.radius = r;
    o.inflated_radius = inflated;
    o.place = g.places[pi].id;
    double mx = std::min(r, (c.x1 - c.x0) * 0.25);
    double my = std::min(r, (c.y1 - c.y0) * 0.25);
    o.position = {rng.uniform(c.x0 + mx, c.x1 - mx), rng.uniform(c.y0 + my, c.y1 - my)};
    g.objects.push_back(std::move(o));
  }

  g.finalize();
  return g;
}

/// Room lattice joined by one-cell-wide corridors; a subset of corridors is
/// severed by suspicious objects whose inflated disc spans the corridor.
/// Used by the obstruction benchmark.
inline SceneGraph gen_rooms(size_t rooms_x, size_t rooms_y, size_t room_cells,
                            size_t corridor_len, size_t n_blockers, uint64_t seed) {
  SceneGraph g;
  double const pitch = static_cast<double>(room_cells + corridor_len);

  auto room_cell_id = [](size_t rx, size_t ry, size_t r, size_t c) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "R(%zu,%zu)c(%zu,%zu)", rx, ry, r, c);
    return std::string(buf);
  };

  for (size_t ry = 0; ry < rooms_y; ++ry) {
    for (size_t rx = 0; rx < rooms_x; ++rx) {
      double ox = rx * pitch, oy = ry * pitch;
      for (size_t r = 0; r < room_cells; ++r) {
        for (size_t c = 0; c < room_cells; ++c) {
          PlaceNode p;
          p.id = room_cell_id(rx, ry, r, c);
          p.polygon = detail::rect_polygon(ox + c, oy + r, ox + c + 1, oy + r + 1);
          g.places.push_back(std::move(p));
          if (c + 1 < room_cells) {
            g.place_edges.emplace_back(room_cell_id(rx, ry, r, c), room_cell_id(rx, ry, r, c + 1));
          }
          if (r + 1 < room_cells) {
            g.place_edges.emplace_back(room_cell_id(rx, ry, r, c), room_cell_id(rx, ry, r + 1, c));
          }
        }
      }
    }
  }

  size_t mid = room_cells / 2;
  std::vector<std::string> corridor_mid_cells;
  auto add_corridor = [&](std::string const& tag, double x0, double y0, bool horizontal,
                          std::string const& from_cell, std::string const& to_cell) {
    std::string prev = from_cell;
    std::string mid_cell;
    for (size_t k = 0; k < corridor_len; ++k) {
      PlaceNode p;
      p.id = tag + "k" + std::to_string(k);
      if (horizontal) {
        p.polygon = detail::rect_polygon(x0 + k, y0, x0 + k + 1, y0 + 1);
      } else {
        p.polygon = detail::rect_polygon(x0, y0 + k, x0 + 1, y0 + k + 1);
      }
      if (k == corridor_len / 2) mid_cell = p.id;
      g.places.push_back(std::move(p));
      g.place_edges.emplace_back(prev, tag + "k" + std::to_string(k));
      prev = tag + "k" + std::to_string(k);
    }
    g.place_edges.emplace_back(prev, to_cell);
    corridor_mid_cells.push_back(mid_cell);
  };

  for (size_t ry = 0; ry < rooms_y; ++ry) {
    for (size_t rx = 0; rx < rooms_x; ++rx) {
      double ox = rx * pitch, oy = ry * pitch;
      if (rx + 1 < rooms_x) {
        char tag[64];
        std::snprintf(tag, sizeof(tag), "H(%zu,%zu)", rx, ry);
        add_corridor(tag, ox + room_cells, oy + mid, true,
                     room_cell_id(rx, ry, mid, room_cells - 1),
                     room_cell_id(rx + 1, ry, mid, 0));
      }
      if (ry + 1 < rooms_y) {
        char tag[64];
        std::snprintf(tag, sizeof(tag), "V(%zu,%zu)", rx, ry);
        add_corridor(tag, ox + mid, oy + room_cells, false,
                     room_cell_id(rx, ry, room_cells - 1, mid),
                     room_cell_id(rx, ry + 1, 0, mid));
      }
    }
  }

  Rng rng(seed ^ 0x517cc1b727220a95ull);
  size_t n = std::min(n_blockers, corridor_mid_cells.size());
  // Deterministic shuffle, then take the first n corridors.
  for (size_t i = corridor_mid_cells.size(); i > 1; --i) {
    size_t j = rng.uniform_index(i);
    std::swap(corridor_mid_cells[i - 1], corridor_mid_cells[j]);
  }
  g.finalize();  // need centroids for object placement
  for (size_t k = 0; k < n; ++k) {
    auto idx = g.place_index(corridor_mid_cells[k]);
    ObjectNode o;
    o.id = "O" + std::to_string(k);
    o.position = g.place(*idx).centroid;
    o.radius = 0.2;
    o.inflated_radius = 0.8;
    o.status = ObjectStatus::kSuspicious;
    o.place = corridor_mid_cells[k];
    g.objects.push_back(std::move(o));
  }
  g.finalize();
  return g;
}

}  // namespace sgtamp
