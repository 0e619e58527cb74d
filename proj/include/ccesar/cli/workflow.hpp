#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ccesar/cli/config.hpp"
#include "ccesar/evaluation/evaluation.hpp"

namespace ccesar {

enum class TrainRole { Classifier, SegNatural, SegBuilt, SegMixed };
std::string_view to_string(TrainRole r);  // classifier | seg-natural | seg-built | seg-mixed
TrainRole train_role_from_string(std::string_view s);
std::vector<TrainRole> all_train_roles();

/// <weights_dir>/<role>.ccw
std::filesystem::path weights_file(const RunConfig& cfg, TrainRole role);

/// Synthetic corpus under cfg.data_dir.
GeneratedCorpus cmd_synth(const RunConfig& cfg);

/// Rasterises the land polygons onto every TIFF in raster_dir (each needs a
/// geographic bounding box) and writes <stem>_mask.tif into out_dir.
std::size_t cmd_genmasks(const std::filesystem::path& raster_dir, const std::filesystem::path& polygon_file,
                         const std::filesystem::path& out_dir);

/// Writes the preprocessed rasters of a manifest plus a new manifest
/// (manifest.csv) pointing at them and the resampled masks.
DatasetManifest cmd_preprocess(const DatasetManifest& manifest, const RunConfig& cfg,
                               const std::filesystem::path& out_dir);

/// Trains one role on the configured manifest; writes the weights and
/// <weights_dir>/<role>_log.csv.
nn::ModelWeights cmd_train(TrainRole role, const RunConfig& cfg);
nn::ModelWeights cmd_train(TrainRole role, const std::vector<Sample>& train, const RunConfig& cfg);

/// Evaluates the experiments on the test split with the weights found in
/// cfg.weights_dir and writes reports (and overlays) under cfg.report_dir.
std::vector<ExperimentResult> cmd_experiment(const std::vector<ExperimentId>& ids, const RunConfig& cfg);

/// Single-image inference; writes <stem>_coastline.txt and <stem>_overlay.png
/// into out_dir.
InferenceResult cmd_extract(const std::filesystem::path& image, const RunConfig& cfg,
                            const std::filesystem::path& out_dir);

/// synth -> train every role -> all experiments.
std::vector<ExperimentResult> run_pipeline(const RunConfig& cfg);

/// Command-line entry point; returns the process exit status
/// (0 ok, 1 runtime failure, 2 config error, 3 missing input).
int run_cli(int argc, const char* const* argv);

}  // namespace ccesar
