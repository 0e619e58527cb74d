#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccesar/nnet/inference.hpp"
#include "ccesar/postprocess/canny.hpp"
#include "ccesar/training/training.hpp"

namespace ccesar {

/// Land-class intersection over union; both masks without land -> 1.0.
double iou(const BinaryMask& pred, const BinaryMask& truth);

struct AccuracyReport {
  double overall_pct = 0.0;
  std::optional<double> natural_pct;  // unset when no image of that class
  std::optional<double> built_pct;
  std::size_t correct = 0;
  std::size_t total = 0;
};

AccuracyReport classification_accuracy(std::span<const CoastClass> predictions, std::span<const CoastClass> labels);

struct InferenceResult {
  CoastClass predicted = CoastClass::Natural;
  double built_probability = 0.0;
  BinaryMask mask;
  CoastlinePath coastline;
};

/// Binarised segmentation -> Canny -> longest edge.
CoastlinePath extract_coastline(const BinaryMask& mask, const CannyConfig& cfg);

/// Two-stage inference on a preprocessed image: classify (built when p >= 0.5),
/// segment with the matching model, extract the coastline.
InferenceResult ccesar_infer(const Raster& image, CoastClassifier& classifier, LandSegmenter& natural,
                             LandSegmenter& built, const CannyConfig& cfg);

enum class ExperimentId { E1 = 1, E2, E3, E4, E5 };
std::string to_string(ExperimentId id);
ExperimentId experiment_from_string(std::string_view s);
std::vector<ExperimentId> all_experiments();

/// Models available to an experiment. Pointers are borrowed; an experiment
/// needing an absent model raises ModelError.
struct ModelSet {
  CoastClassifier* classifier = nullptr;
  LandSegmenter* natural = nullptr;  // S_N
  LandSegmenter* built = nullptr;    // S_B
  LandSegmenter* mixed = nullptr;    // single model trained on both classes
};

struct ImageRecord;

/// Called once per evaluated image, in report order, with the predicted mask
/// and coastline.
using ImageCallback =
    std::function<void(const ImageRecord&, const Sample&, const BinaryMask&, const CoastlinePath&)>;

struct EvalConfig {
  CannyConfig canny;
  ImageCallback on_image;
  int workers = 1;
  std::string precision = "32-bit";
  std::uint64_t seed = 0;
  std::string config_snapshot;
};

struct ImageRecord {
  std::string row;  // report row this image belongs to
  std::string image;
  CoastClass truth = CoastClass::Natural;
  std::optional<CoastClass> predicted;  // E5 only
  std::string model;                    // S_N, S_B or S_mixed
  double iou = 0.0;
  std::optional<Discrepancy> discrepancy;  // unset when undefined
  bool operator==(const ImageRecord&) const = default;
};

struct RowSummary {
  std::string row;
  std::size_t images = 0;
  double mean_iou_pct = 0.0;
  std::optional<Discrepancy> mean_discrepancy;  // over defined entries
  std::size_t undefined = 0;
  bool operator==(const RowSummary&) const = default;
};

struct MetricsReport {
  std::vector<ImageRecord> images;
  std::vector<RowSummary> rows;
  RowSummary overall;  // over every per-image record
  std::optional<AccuracyReport> accuracy;
};

struct ExperimentResult {
  ExperimentId id = ExperimentId::E1;
  std::string precision;
  std::uint64_t seed = 0;
  std::string config_snapshot;
  MetricsReport report;
};

/// Evaluates one experiment on preprocessed test samples.
/// E1: mixed model on all images. E2: S_N on natural, S_B on built.
/// E3: S_N on built, S_B on natural. E4: S_N and S_B each on all images.
/// E5: classifier routes every image to S_N or S_B.
ExperimentResult run_experiment(ExperimentId id, const std::vector<Sample>& test, const ModelSet& models,
                                const EvalConfig& cfg);

/// Summaries recomputed from the per-image records.
RowSummary summarize(const std::string& row, const std::vector<const ImageRecord*>& records);

/// Per-image records keyed by image name compare equal (row labels ignored),
/// along with the overall summary. Used to check routing equivalences.
bool same_image_metrics(const MetricsReport& a, const MetricsReport& b);

std::string format_report_text(const ExperimentResult& r);
std::string format_report_csv(const ExperimentResult& r);
/// Writes <dir>/<id>.txt and <dir>/<id>.csv.
void write_report(const ExperimentResult& r, const std::filesystem::path& dir);

}  // namespace ccesar
