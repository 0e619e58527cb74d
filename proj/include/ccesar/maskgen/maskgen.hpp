#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "ccesar/dataio/raster.hpp"

namespace ccesar {

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
  bool operator==(const LonLat&) const = default;
};

/// Implicitly closed vertex ring (first vertex is not repeated).
using Ring = std::vector<LonLat>;

struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;

  /// Throws PolygonError for rings with < 3 vertices or NaN coordinates.
  void validate() const;
  bool operator==(const Polygon&) const = default;
};

struct PolygonSet {
  std::vector<Polygon> polygons;

  bool empty() const { return polygons.empty(); }
  std::size_t size() const { return polygons.size(); }
};

/// Signed shoelace area (counter-clockwise positive).
double signed_area(const Ring& ring);

/// Text format: one polygon per line, `lon lat; lon lat; ...`, with `|`
/// separating the exterior from each hole ring. `#` starts a comment.
PolygonSet parse_polygon_text(std::string_view text);

/// GeoJSON Polygon, MultiPolygon, Feature, FeatureCollection or
/// GeometryCollection documents.
PolygonSet parse_polygon_geojson(std::string_view text);

/// Dispatches on content: a document starting with `{` is GeoJSON.
PolygonSet load_polygons(const std::filesystem::path& path);

/// Sutherland-Hodgman clip of each ring against the box; zero-area rings are
/// dropped (a dropped exterior drops the polygon).
PolygonSet clip_polygon_to_box(const Polygon& polygon, const GeoBoundingBox& bbox);

/// Pixel (row, col) is land when its centre lies inside any polygon under the
/// even-odd rule; centres on an edge count as inside. Row 0 is the north edge.
BinaryMask rasterize_polygons(const PolygonSet& polys, const GeoBoundingBox& bbox, int width, int height);

/// Clip every polygon to raster.geo_bbox() and rasterize at raster size.
BinaryMask generate_mask_for_raster(const Raster& raster, const PolygonSet& land);

}  // namespace ccesar
