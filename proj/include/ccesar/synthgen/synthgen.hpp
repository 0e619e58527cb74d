#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "ccesar/dataio/manifest.hpp"
#include "ccesar/dataio/raster.hpp"

namespace ccesar {

struct SynthConfig {
  int image_size = 64;
  int n_train_per_class = 200;
  int n_test_per_class = 40;
  std::uint64_t seed = 0;
  int speckle_looks = 1;
  std::array<double, 2> land_fraction_range{0.3, 0.7};
  bool emit_f32 = true;
  bool emit_u8 = true;
  int workers = 1;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct SynthSample {
  Raster raster;  // F32 linear backscatter, speckled
  BinaryMask mask;
};

/// Smooth shoreline from 1-D midpoint displacement; land 0.6, water 0.15.
SynthSample generate_natural(std::uint64_t seed, int size, const SynthConfig& cfg = {});

/// Rectilinear harbour front with jetties/basins, paved quays and bright
/// building blocks inland.
SynthSample generate_built(std::uint64_t seed, int size, const SynthConfig& cfg = {});

/// Per-image min-max scaling to 0..255 with rounding.
Raster quantize_u8(const Raster& r);

struct GeneratedCorpus {
  std::optional<DatasetManifest> f32;  // manifest_32bit.csv
  std::optional<DatasetManifest> u8;   // manifest_8bit.csv
};

inline constexpr const char* kManifest32 = "manifest_32bit.csv";
inline constexpr const char* kManifest8 = "manifest_8bit.csv";

/// Writes images, masks and manifests under out_dir. Image i of (class, split)
/// uses seed derive_seed(cfg.seed, {class, split, i}).
GeneratedCorpus generate_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace ccesar
