#include "ccesar/maskgen/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ccesar/error.hpp"
#include "ccesar/log.hpp"

namespace ccesar {

namespace {

void validate_ring(const Ring& r, const char* what) {
  if (r.size() < 3) throw PolygonError(std::string(what) + " ring has fewer than 3 vertices");
  for (const auto& p : r)
    if (!std::isfinite(p.lon) || !std::isfinite(p.lat)) throw PolygonError(std::string(what) + " ring has a non-finite coordinate");
}

void drop_closing_vertex(Ring& r) {
  if (r.size() > 1 && r.front() == r.back()) r.pop_back();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

Ring parse_ring_text(const std::string& text, int lineno) {
  Ring ring;
  std::stringstream ss(text);
  for (std::string vertex; std::getline(ss, vertex, ';');) {
    vertex = trim(vertex);
    if (vertex.empty()) continue;
    std::istringstream vs(vertex);
    LonLat p;
    std::string extra;
    if (!(vs >> p.lon >> p.lat) || (vs >> extra))
      throw PolygonError("line " + std::to_string(lineno) + ": cannot parse vertex '" + vertex + "'");
    ring.push_back(p);
  }
  drop_closing_vertex(ring);
  return ring;
}

Ring ring_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw PolygonError("GeoJSON ring must be an array of positions");
  Ring r;
  for (const auto& pos : j) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
      throw PolygonError("GeoJSON position must be [lon, lat]");
    r.push_back({pos[0].get<double>(), pos[1].get<double>()});
  }
  drop_closing_vertex(r);
  return r;
}

Polygon polygon_from_json(const nlohmann::json& rings) {
  if (!rings.is_array() || rings.empty()) throw PolygonError("GeoJSON polygon needs at least one ring");
  Polygon p;
  p.exterior = ring_from_json(rings[0]);
  for (std::size_t i = 1; i < rings.size(); ++i) p.holes.push_back(ring_from_json(rings[i]));
  p.validate();
  return p;
}

void collect_geojson(const nlohmann::json& j, PolygonSet& out) {
  if (!j.is_object() || !j.contains("type")) throw PolygonError("GeoJSON object without a type");
  const auto type = j.at("type").get<std::string>();
  if (type == "FeatureCollection") {
    for (const auto& f : j.value("features", nlohmann::json::array())) collect_geojson(f, out);
  } else if (type == "Feature") {
    if (j.contains("geometry") && !j["geometry"].is_null()) collect_geojson(j["geometry"], out);
  } else if (type == "GeometryCollection") {
    for (const auto& g : j.value("geometries", nlohmann::json::array())) collect_geojson(g, out);
  } else if (type == "Polygon") {
    out.polygons.push_back(polygon_from_json(j.at("coordinates")));
  } else if (type == "MultiPolygon") {
    for (const auto& rings : j.at("coordinates")) out.polygons.push_back(polygon_from_json(rings));
  } else {
    logger().warn("ignoring GeoJSON geometry of type {}", type);
  }
}

enum class Side { Left, Right, Bottom, Top };

bool inside(const LonLat& p, Side s, double v) {
  switch (s) {
    case Side::Left: return p.lon >= v;
    case Side::Right: return p.lon <= v;
    case Side::Bottom: return p.lat >= v;
    case Side::Top: return p.lat <= v;
  }
  return false;
}

LonLat intersect(const LonLat& a, const LonLat& b, Side s, double v) {
  if (s == Side::Left || s == Side::Right) {
    const double t = (v - a.lon) / (b.lon - a.lon);
    return {v, a.lat + t * (b.lat - a.lat)};
  }
  const double t = (v - a.lat) / (b.lat - a.lat);
  return {a.lon + t * (b.lon - a.lon), v};
}

Ring clip_ring(const Ring& ring, const GeoBoundingBox& box) {
  Ring cur = ring;
  const std::pair<Side, double> edges[] = {
      {Side::Left, box.min_lon}, {Side::Right, box.max_lon}, {Side::Bottom, box.min_lat}, {Side::Top, box.max_lat}};
  for (const auto& [side, v] : edges) {
    if (cur.empty()) break;
    Ring next;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const LonLat& a = cur[(i + cur.size() - 1) % cur.size()];
      const LonLat& b = cur[i];
      const bool ain = inside(a, side, v), bin = inside(b, side, v);
      if (bin) {
        if (!ain) next.push_back(intersect(a, b, side, v));
        next.push_back(b);
      } else if (ain) {
        next.push_back(intersect(a, b, side, v));
      }
    }
    cur = std::move(next);
  }
  // Collapse consecutive duplicates produced at box corners.
  Ring out;
  for (const auto& p : cur)
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  if (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

bool degenerate(const Ring& r) { return r.size() < 3 || signed_area(r) == 0.0; }

/// Adds the lon coordinate of every crossing of row latitude `lat` by the ring.
void crossings(const Ring& ring, double lat, std::vector<double>& xs) {
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const LonLat& a = ring[i];
    const LonLat& b = ring[(i + 1) % ring.size()];
    if ((a.lat <= lat) != (b.lat <= lat)) xs.push_back(a.lon + (lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon));
  }
}

}  // namespace

void Polygon::validate() const {
  validate_ring(exterior, "exterior");
  for (const auto& h : holes) validate_ring(h, "hole");
}

double signed_area(const Ring& ring) {
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const auto& p = ring[i];
    const auto& q = ring[(i + 1) % ring.size()];
    a += p.lon * q.lat - q.lon * p.lat;
  }
  return 0.5 * a;
}

PolygonSet parse_polygon_text(std::string_view text) {
  PolygonSet set;
  std::istringstream in{std::string(text)};
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    std::vector<Ring> rings;
    std::stringstream ss(line);
    for (std::string part; std::getline(ss, part, '|');) rings.push_back(parse_ring_text(part, lineno));
    Polygon p;
    p.exterior = std::move(rings.front());
    p.holes.assign(std::make_move_iterator(rings.begin() + 1), std::make_move_iterator(rings.end()));
    try {
      p.validate();
    } catch (const PolygonError& e) {
      throw PolygonError("line " + std::to_string(lineno) + ": " + e.what());
    }
    set.polygons.push_back(std::move(p));
  }
  return set;
}

PolygonSet parse_polygon_geojson(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PolygonError(std::string("invalid GeoJSON: ") + e.what());
  }
  PolygonSet set;
  try {
    collect_geojson(j, set);
  } catch (const nlohmann::json::exception& e) {
    throw PolygonError(std::string("invalid GeoJSON structure: ") + e.what());
  }
  return set;
}

PolygonSet load_polygons(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PolygonError("cannot open polygon file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return parse_polygon_geojson(text);
  return parse_polygon_text(text);
}

PolygonSet clip_polygon_to_box(const Polygon& polygon, const GeoBoundingBox& bbox) {
  PolygonSet out;
  Polygon p;
  p.exterior = clip_ring(polygon.exterior, bbox);
  if (degenerate(p.exterior)) return out;
  for (const auto& h : polygon.holes) {
    auto c = clip_ring(h, bbox);
    if (!degenerate(c)) p.holes.push_back(std::move(c));
  }
  out.polygons.push_back(std::move(p));
  return out;
}

BinaryMask rasterize_polygons(const PolygonSet& polys, const GeoBoundingBox& bbox, int width, int height) {
  if (!bbox.valid()) throw GeoError("rasterize_polygons: invalid bounding box");
  if (width < 1 || height < 1) throw ShapeError("rasterize_polygons: grid must be at least 1x1");
  BinaryMask mask(width, height);
  const double dx = (bbox.max_lon - bbox.min_lon) / width;
  const double dy = (bbox.max_lat - bbox.min_lat) / height;
  std::vector<double> xs;
  for (int row = 0; row < height; ++row) {
    const double lat = bbox.max_lat - (row + 0.5) * dy;
    for (const auto& poly : polys.polygons) {
      xs.clear();
      crossings(poly.exterior, lat, xs);
      for (const auto& h : poly.holes) crossings(h, lat, xs);
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        // Columns whose centre lon satisfies xs[k] <= lon <= xs[k+1].
        const int c0 = std::max(0, static_cast<int>(std::ceil((xs[k] - bbox.min_lon) / dx - 0.5)));
        const int c1 = std::min(width - 1, static_cast<int>(std::floor((xs[k + 1] - bbox.min_lon) / dx - 0.5)));
        for (int col = c0; col <= c1; ++col) {
          const double lon = bbox.min_lon + (col + 0.5) * dx;
          if (lon >= xs[k] && lon <= xs[k + 1]) mask.set_land(row, col, true);
        }
        // Guard the rounding of the index bounds at the span ends.
        for (int col : {c0 - 1, c1 + 1}) {
          if (col < 0 || col >= width) continue;
          const double lon = bbox.min_lon + (col + 0.5) * dx;
          if (lon >= xs[k] && lon <= xs[k + 1]) mask.set_land(row, col, true);
        }
      }
    }
  }
  return mask;
}

BinaryMask generate_mask_for_raster(const Raster& raster, const PolygonSet& land) {
  if (!raster.geo_bbox()) throw GeoError("raster has no geographic bounding box");
  const auto& box = *raster.geo_bbox();
  PolygonSet clipped;
  for (const auto& p : land.polygons) {
    auto c = clip_polygon_to_box(p, box);
    for (auto& q : c.polygons) clipped.polygons.push_back(std::move(q));
  }
  auto mask = rasterize_polygons(clipped, box, raster.width(), raster.height());
  if (mask.land_count() == 0) logger().warn("scene has no land inside its bounding box; mask is all water");
  return mask;
}

}  // namespace ccesar
