#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ccesar/nnet/models.hpp"
#include "ccesar/postprocess/canny.hpp"
#include "ccesar/preprocess/preprocess.hpp"
#include "ccesar/synthgen/synthgen.hpp"
#include "ccesar/training/training.hpp"

namespace ccesar {

enum class Precision { F32, U8 };
std::string_view to_string(Precision p);  // "32bit" / "8bit"
std::string_view precision_tag(Precision p);  // "32-bit" / "8-bit" as printed in reports
Precision precision_from_string(std::string_view s);

/// Everything a CLI run needs. Sub-stage seeds are derived from `seed`.
struct RunConfig {
  SynthConfig synth;
  PreprocessConfig preprocess;
  TrainConfig train;
  CannyConfig canny;
  nn::ClassifierSpec classifier;
  nn::SegmenterSpec segmenter;
  std::filesystem::path data_dir = "data";
  std::filesystem::path weights_dir = "weights";
  std::filesystem::path report_dir = "reports";
  Precision precision = Precision::F32;
  std::uint64_t seed = 0;
  int workers = 1;
  bool overlays = true;

  /// Pushes seed and workers into the sub-configs.
  void propagate();
  /// Validates every sub-config; ConfigError on the first violation.
  void validate() const;
  /// Canonical `section.key = value` listing, stable for a given config.
  std::string to_text() const;

  std::filesystem::path manifest_path() const;
};

/// Applies `section.key = value` lines on top of `base`. `#` starts a comment.
/// Unknown keys and malformed values raise ConfigError.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace ccesar
