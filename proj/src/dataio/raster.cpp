#include "ccesar/dataio/raster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccesar/error.hpp"

namespace ccesar {

std::string_view to_string(CoastClass c) { return c == CoastClass::Natural ? "natural" : "built"; }

CoastClass coast_class_from_string(std::string_view s) {
  if (s == "natural") return CoastClass::Natural;
  if (s == "built") return CoastClass::Built;
  throw DomainError("unknown coastline class '" + std::string(s) + "'");
}

bool GeoBoundingBox::valid() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return finite(min_lon) && finite(min_lat) && finite(max_lon) && finite(max_lat) && min_lon < max_lon &&
         min_lat < max_lat && min_lon >= -180.0 && max_lon <= 180.0 && min_lat >= -90.0 && max_lat <= 90.0;
}

namespace {

void check_dims(int width, int height, int channels) {
  if (width < 1 || height < 1) throw ShapeError("raster dimensions must be positive");
  if (channels < 1 || channels > 2) throw ShapeError("raster must have 1 or 2 channels");
}

}  // namespace

Raster::Raster(int width, int height, int channels, PixelDepth depth, double ground_resolution_m)
    : Raster(width, height, channels, depth,
             std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) *
                                std::max(channels, 0)),
             ground_resolution_m) {}

Raster::Raster(int width, int height, int channels, PixelDepth depth, std::vector<float> pixels,
               double ground_resolution_m)
    : width_(width), height_(height), channels_(channels), depth_(depth), pixels_(std::move(pixels)) {
  check_dims(width, height, channels);
  if (pixels_.size() != static_cast<std::size_t>(width) * height * channels)
    throw ShapeError("pixel buffer length does not match width*height*channels");
  set_ground_resolution_m(ground_resolution_m);
  for (float v : pixels_) {
    if (!std::isfinite(v)) throw DomainError("raster pixels must be finite");
    if (depth_ == PixelDepth::U8 && (v < 0.0f || v > 255.0f || v != std::floor(v)))
      throw DomainError("U8 raster pixel outside the integers 0..255");
  }
}

void Raster::set_ground_resolution_m(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("ground resolution must be positive");
  ground_resolution_m_ = r;
}

void Raster::set_geo_bbox(std::optional<GeoBoundingBox> bbox) {
  if (bbox && !bbox->valid()) throw GeoError("invalid geographic bounding box");
  geo_bbox_ = bbox;
}

Raster Raster::channel(int c) const {
  if (c < 0 || c >= channels_) throw ShapeError("channel index out of range");
  std::vector<float> out(static_cast<std::size_t>(width_) * height_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixels_[i * channels_ + c];
  Raster r(width_, height_, 1, depth_, std::move(out), ground_resolution_m_);
  r.geo_bbox_ = geo_bbox_;
  return r;
}

BinaryMask::BinaryMask(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw ShapeError("mask dimensions must be positive");
  if (fill != kLand && fill != kWater) throw DomainError("mask fill must be 0 or 255");
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

BinaryMask BinaryMask::from_values(int width, int height, std::vector<std::uint8_t> values) {
  BinaryMask m(width, height);
  if (values.size() != m.values_.size()) throw ShapeError("mask value count does not match dimensions");
  for (auto v : values)
    if (v != kLand && v != kWater) throw DomainError("mask values must be 0 or 255");
  m.values_ = std::move(values);
  return m;
}

std::size_t BinaryMask::land_count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), kLand));
}

BinaryMask mask_from_raster(const Raster& r) {
  BinaryMask m(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) m.set_land(y, x, r.at(y, x) >= 127.5f);
  return m;
}

Raster raster_from_mask(const BinaryMask& m) {
  std::vector<float> px(m.values().begin(), m.values().end());
  return Raster(m.width(), m.height(), 1, PixelDepth::U8, std::move(px));
}

BinaryMask resample_mask_nearest(const BinaryMask& m, int width, int height) {
  if (width == m.width() && height == m.height()) return m;
  BinaryMask out(width, height);
  const double sx = static_cast<double>(m.width()) / width;
  const double sy = static_cast<double>(m.height()) / height;
  for (int y = 0; y < height; ++y) {
    const int src_y = std::min(m.height() - 1, static_cast<int>(std::floor((y + 0.5) * sy)));
    for (int x = 0; x < width; ++x) {
      const int src_x = std::min(m.width() - 1, static_cast<int>(std::floor((x + 0.5) * sx)));
      out.set_land(y, x, m.land(src_y, src_x));
    }
  }
  return out;
}

}  // namespace ccesar
