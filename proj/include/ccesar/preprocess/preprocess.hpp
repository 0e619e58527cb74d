#pragma once

#include <optional>

#include "ccesar/dataio/raster.hpp"

namespace ccesar {

struct PreprocessConfig {
  int lee_window = 5;
  std::optional<double> noise_cv;  // estimated from the image when unset
  double upsample_factor = 2.0;
  double epsilon_db_floor = 1e-6;

  void validate() const;
};

/// Reflect-101 index into [0, n): -1 -> 1, n -> n-2.
int reflect101(int i, int n);

/// Lee speckle filter, applied per channel. Window variance uses the unbiased
/// (N-1) estimator. Returns an F32 raster.
Raster lee_filter(const Raster& raster, const PreprocessConfig& cfg);

/// Coefficient of variation sqrt(s^2)/m of every window (0 where m == 0).
std::vector<double> local_cv(const Raster& single_channel, int window);

/// dB conversion followed by per-channel min-max scaling to [0,1].
Raster normalize_backscatter(const Raster& raster, const PreprocessConfig& cfg);

/// Bilinear resampling onto a width x height grid with half-pixel-centre
/// alignment and clamped edges.
Raster resize_bilinear(const Raster& raster, int width, int height);

/// Output size round(size * factor); ground resolution divided by factor.
Raster upsample_bilinear(const Raster& raster, double factor);

/// F32: Lee -> normalize -> upsample. U8: divided by 255, nothing else.
Raster preprocess_pipeline(const Raster& raster, const PreprocessConfig& cfg);

}  // namespace ccesar
