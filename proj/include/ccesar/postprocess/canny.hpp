#pragma once

#include "ccesar/dataio/raster.hpp"
#include "ccesar/postprocess/coastline.hpp"

namespace ccesar {

struct CannyConfig {
  double tau_low = 50.0;
  double tau_high = 150.0;
  double gaussian_sigma = 1.4;
  int gaussian_size = 5;

  void validate() const;
};

/// Gradient magnitude after Gaussian smoothing and Sobel filtering, scaled so
/// that a full-contrast (0 -> 255) straight step scores 255; clamped to 255.
std::vector<double> canny_magnitude(const std::vector<double>& image, int width, int height, const CannyConfig& cfg,
                                    std::vector<double>* gx_out = nullptr, std::vector<double>* gy_out = nullptr);

/// Canny edges of a 0..255 grid (row-major).
EdgeMap canny(const std::vector<double>& image, int width, int height, const CannyConfig& cfg = {});
EdgeMap canny(const BinaryMask& mask, const CannyConfig& cfg = {});
/// U8 rasters are used as-is, F32 rasters are taken to be on [0,1] and
/// scaled by 255. Multi-channel input is a ShapeError.
EdgeMap canny(const Raster& raster, const CannyConfig& cfg = {});

/// Largest 8-connected component; ties go to the component whose first pixel
/// in row-major order comes first.
CoastlinePath longest_edge(const EdgeMap& edges);

struct Discrepancy {
  double directed_px = 0.0;   // mean over predicted pixels of the distance to truth
  double symmetric_px = 0.0;  // mean of both directed values
  double directed_km = 0.0;
  double symmetric_km = 0.0;
  bool operator==(const Discrepancy&) const = default;
};

/// Mean minimum Euclidean distance from pred to truth, via an exact
/// Euclidean distance transform. Empty pred or truth -> MetricUndefined.
Discrepancy avg_min_distance(const CoastlinePath& pred, const CoastlinePath& truth, double resolution_m);

/// Directed pixel distance only.
double directed_min_distance(const std::vector<PixelCoord>& from, const std::vector<PixelCoord>& to);

}  // namespace ccesar
