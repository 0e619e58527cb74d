#include "ccesar/dataio/overlay.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>

#include "ccesar/error.hpp"

namespace ccesar {

Rgb RgbImage::at(int row, int col) const {
  const std::size_t i = (static_cast<std::size_t>(row) * width + col) * 3;
  return {data[i], data[i + 1], data[i + 2]};
}

RgbImage render_overlay(const Raster& raster, const BinaryMask& mask, const CoastlinePath& coastline) {
  if (raster.width() != mask.width() || raster.height() != mask.height())
    throw ShapeError("overlay: raster and mask dimensions differ");
  const int w = raster.width(), h = raster.height();
  RgbImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};

  float lo = 0.0f, hi = 255.0f;
  if (raster.depth() == PixelDepth::F32) {
    lo = hi = raster.at(0, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        lo = std::min(lo, raster.at(y, x));
        hi = std::max(hi, raster.at(y, x));
      }
  }
  const float range = hi > lo ? hi - lo : 1.0f;
  auto put = [&](int y, int x, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
    std::copy(c.begin(), c.end(), img.data.begin() + static_cast<std::ptrdiff_t>(i));
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto g = static_cast<std::uint8_t>(std::clamp((raster.at(y, x) - lo) / range * 255.0f + 0.5f, 0.0f, 255.0f));
      put(y, x, {g, g, g});
    }

  // Land pixels with a water 4-neighbour inside the image.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask.land(y, x)) continue;
      const bool boundary = (y > 0 && !mask.land(y - 1, x)) || (y + 1 < h && !mask.land(y + 1, x)) ||
                            (x > 0 && !mask.land(y, x - 1)) || (x + 1 < w && !mask.land(y, x + 1));
      if (boundary) put(y, x, kMaskBoundaryColor);
    }
  for (const auto& p : coastline.pixels) {
    if (p.row < 0 || p.row >= h || p.col < 0 || p.col >= w) throw ShapeError("overlay: coastline pixel outside image");
    put(p.row, p.col, kCoastlineColor);
  }
  return img;
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw WriteError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw WriteError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw WriteError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    auto* row = const_cast<png_bytep>(image.data.data() + static_cast<std::size_t>(y) * image.width * 3);
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_overlay_png(const Raster& raster, const BinaryMask& mask, const CoastlinePath& coastline,
                       const std::filesystem::path& path) {
  write_png(render_overlay(raster, mask, coastline), path);
}

}  // namespace ccesar
