#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "ccesar/dataio/raster.hpp"
#include "ccesar/postprocess/coastline.hpp"

namespace ccesar {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kMaskBoundaryColor{0, 160, 255};
inline constexpr Rgb kCoastlineColor{255, 32, 32};

/// RGB image, row-major, 3 bytes per pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Rgb at(int row, int col) const;
};

/// Greyscale rendering of channel 0 (U8 as-is, F32 min-max stretched) with
/// the mask's interior land/water boundary and the coastline drawn on top.
RgbImage render_overlay(const Raster& raster, const BinaryMask& mask, const CoastlinePath& coastline);

void write_png(const RgbImage& image, const std::filesystem::path& path);

void write_overlay_png(const Raster& raster, const BinaryMask& mask, const CoastlinePath& coastline,
                       const std::filesystem::path& path);

}  // namespace ccesar
