#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sgtamp/scene_graph.hpp"

namespace sgtamp {

using json = nlohmann::json;

namespace detail {

inline Vec2 parse_vec2(json const& j, std::string const& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError(where + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline SceneGraph scene_from_json(json const& j) {
  if (!j.is_object()) throw ParseError("scene: expected a JSON object");
  SceneGraph g;

  for (auto const& jr : j.value("regions", json::array())) {
    RegionNode r;
    r.id = jr.value("id", "");
    if (r.id.empty()) throw ParseError("region without id");
    r.name = jr.value("name", "");
    g.regions.push_back(std::move(r));
  }

  if (!j.contains("places") || !j["places"].is_array() || j["places"].empty()) {
    throw ParseError("scene has no places");
  }
  for (auto const& jp : j["places"]) {
    PlaceNode p;
    p.id = jp.value("id", "");
    if (p.id.empty()) throw ParseError("place without id");
    if (!jp.contains("vertices") || !jp["vertices"].is_array()) {
      throw ParseError("place " + p.id + ": missing vertices");
    }
    for (auto const& jv : jp["vertices"]) {
      p.polygon.push_back(detail::parse_vec2(jv, "place " + p.id + " vertex"));
    }
    if (jp.contains("region") && !jp["region"].is_null()) {
      p.region = jp["region"].get<std::string>();
    }
    g.places.push_back(std::move(p));
  }

  for (auto const& je : j.value("place_edges", json::array())) {
    if (!je.is_array() || je.size() != 2) {
      throw ParseError("place_edges entries must be [idA, idB]");
    }
    g.place_edges.emplace_back(je[0].get<std::string>(), je[1].get<std::string>());
  }

  for (auto const& jo : j.value("objects", json::array())) {
    ObjectNode o;
    o.id = jo.value("id", "");
    if (o.id.empty()) throw ParseError("object without id");
    if (!jo.contains("position")) throw ParseError("object " + o.id + ": missing position");
    o.position = detail::parse_vec2(jo["position"], "object " + o.id + " position");
    if (!jo.contains("radius") || !jo.contains("inflated_radius")) {
      throw ParseError("object " + o.id + ": missing radius/inflated_radius");
    }
    o.radius = jo["radius"].get<double>();
    o.inflated_radius = jo["inflated_radius"].get<double>();
    std::string status = jo.value("status", "safe");
    if (status == "safe") {
      o.status = ObjectStatus::kSafe;
    } else if (status == "suspicious") {
      o.status = ObjectStatus::kSuspicious;
    } else {
      throw ParseError("object " + o.id + ": unknown status '" + status + "'");
    }
    o.place = jo.value("place", "");
    if (o.place.empty()) throw ParseError("object " + o.id + ": missing place");
    g.objects.push_back(std::move(o));
  }

  g.finalize();
  return g;
}

inline json scene_to_json(SceneGraph const& g) {
  json j;
  j["places"] = json::array();
  for (auto const& p : g.places) {
    json jp;
    jp["id"] = p.id;
    jp["vertices"] = json::array();
    for (auto const& v : p.polygon) jp["vertices"].push_back({v.x, v.y});
    if (p.region) jp["region"] = *p.region;
    j["places"].push_back(std::move(jp));
  }
  j["place_edges"] = json::array();
  for (auto const& e : g.place_edges) j["place_edges"].push_back({e.first, e.second});
  j["objects"] = json::array();
  for (auto const& o : g.objects) {
    json jo;
    jo["id"] = o.id;
    jo["position"] = {o.position.x, o.position.y};
    jo["radius"] = o.radius;
    jo["inflated_radius"] = o.inflated_radius;
    jo["status"] = to_string(o.status);
    jo["place"] = o.place;
    j["objects"].push_back(std::move(jo));
  }
  j["regions"] = json::array();
  for (auto const& r : g.regions) {
    j["regions"].push_back({{"id", r.id}, {"name", r.name}});
  }
  return j;
}

inline SceneGraph load_scene(std::string const& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scene file: " + path);
  json j;
  try {
    in >> j;
  } catch (json::exception const& e) {
    throw ParseError("scene file " + path + ": " + e.what());
  }
  return scene_from_json(j);
}

inline void save_scene(SceneGraph const& g, std::string const& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file: " + path);
  out << scene_to_json(g).dump(2) << "\n";
}

}  // namespace sgtamp
