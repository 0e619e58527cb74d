#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ccesar {

enum class PixelDepth { U8, F32 };

enum class CoastClass { Natural = 0, Built = 1 };

std::string_view to_string(CoastClass c);
CoastClass coast_class_from_string(std::string_view s);

struct GeoBoundingBox {
  double min_lon = 0.0;
  double min_lat = 0.0;
  double max_lon = 0.0;
  double max_lat = 0.0;

  bool valid() const;
  bool operator==(const GeoBoundingBox&) const = default;
};

/// Single- or dual-polarisation image. Pixels are stored row-major with the
/// channels interleaved; U8 rasters keep their integral values in the float
/// buffer so both depths share one code path.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels, PixelDepth depth,
         double ground_resolution_m = 10.0);
  Raster(int width, int height, int channels, PixelDepth depth,
         std::vector<float> pixels, double ground_resolution_m = 10.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  PixelDepth depth() const { return depth_; }
  double ground_resolution_m() const { return ground_resolution_m_; }
  void set_ground_resolution_m(double r);

  const std::optional<GeoBoundingBox>& geo_bbox() const { return geo_bbox_; }
  void set_geo_bbox(std::optional<GeoBoundingBox> bbox);

  std::size_t size() const { return pixels_.size(); }
  std::span<const float> pixels() const { return pixels_; }
  std::span<float> pixels() { return pixels_; }

  float at(int row, int col, int channel = 0) const {
    return pixels_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
  }
  float& at(int row, int col, int channel = 0) {
    return pixels_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
  }

  /// Copy of a single channel as a one-channel raster with the same metadata.
  Raster channel(int c) const;

  bool operator==(const Raster&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  PixelDepth depth_ = PixelDepth::F32;
  double ground_resolution_m_ = 10.0;
  std::optional<GeoBoundingBox> geo_bbox_;
  std::vector<float> pixels_;
};

/// Land/water labels: land = 255, water = 0.
class BinaryMask {
 public:
  static constexpr std::uint8_t kLand = 255;
  static constexpr std::uint8_t kWater = 0;

  BinaryMask() = default;
  BinaryMask(int width, int height, std::uint8_t fill = kWater);

  /// Builds a mask from arbitrary byte values; anything other than 0/255 is a
  /// DomainError.
  static BinaryMask from_values(int width, int height, std::vector<std::uint8_t> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> values() const { return values_; }

  bool land(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * width_ + col] == kLand;
  }
  void set_land(int row, int col, bool is_land) {
    values_[static_cast<std::size_t>(row) * width_ + col] = is_land ? kLand : kWater;
  }
  std::size_t land_count() const;

  bool operator==(const BinaryMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> values_;
};

/// Raster -> mask (value >= 127.5 on the 0..255 scale is land). Used to read
/// ground-truth masks stored as U8 TIFFs.
BinaryMask mask_from_raster(const Raster& r);
Raster raster_from_mask(const BinaryMask& m);

/// Nearest-neighbour resampling of a mask onto a width x height grid, sampling
/// at pixel centres.
BinaryMask resample_mask_nearest(const BinaryMask& m, int width, int height);

}  // namespace ccesar
