#pragma once

#include <filesystem>

#include "ccesar/dataio/raster.hpp"

namespace ccesar {

// Baseline TIFF subset: uncompressed, striped, chunky 1 or 2 samples per
// pixel, uint8 or float32 samples, optional GeoTIFF ModelPixelScale and
// ModelTiepoint tags. Everything else is rejected with UnsupportedTiff.

namespace tiff_tag {
inline constexpr std::uint16_t kImageWidth = 256;
inline constexpr std::uint16_t kImageLength = 257;
inline constexpr std::uint16_t kBitsPerSample = 258;
inline constexpr std::uint16_t kCompression = 259;
inline constexpr std::uint16_t kPhotometric = 262;
inline constexpr std::uint16_t kStripOffsets = 273;
inline constexpr std::uint16_t kSamplesPerPixel = 277;
inline constexpr std::uint16_t kRowsPerStrip = 278;
inline constexpr std::uint16_t kStripByteCounts = 279;
inline constexpr std::uint16_t kPlanarConfiguration = 284;
inline constexpr std::uint16_t kTileWidth = 322;
inline constexpr std::uint16_t kSampleFormat = 339;
inline constexpr std::uint16_t kModelPixelScale = 33550;
inline constexpr std::uint16_t kModelTiepoint = 33922;
}  // namespace tiff_tag

/// Reads a raster. Non-finite F32 samples are replaced by 0 and counted in a
/// warning log line.
Raster read_tiff(const std::filesystem::path& path);

/// Writes a little-endian single-strip TIFF. Geo tags are emitted iff the
/// raster carries a bounding box.
void write_tiff(const Raster& raster, const std::filesystem::path& path);

}  // namespace ccesar
