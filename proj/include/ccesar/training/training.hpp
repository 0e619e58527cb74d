#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ccesar/dataio/manifest.hpp"
#include "ccesar/nnet/models.hpp"
#include "ccesar/preprocess/preprocess.hpp"

namespace ccesar {

struct TrainConfig {
  double learning_rate = 1e-5;
  double l2_coefficient = 0.001;
  int epochs = 25;
  int batch_size = 12;
  std::string loss = "bce";
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> pred, std::span<const double> target);

struct AdamState {
  std::vector<std::vector<double>> m, v;  // one pair per parameter tensor
  std::int64_t step = 0;
};

/// One Adam step with bias correction on a single tensor; L2 is added to the
/// gradient (g + l2 * w) before the moment updates. `slot` selects the moment
/// buffers; the caller advances state.step once per step.
template <class T>
void adam_update(std::span<T> params, std::span<const T> grads, AdamState& state, std::size_t slot,
                 const TrainConfig& cfg);

/// Adam step over every trainable parameter of the store.
template <class T>
void adam_step(nn::ParamStore<T>& params, AdamState& state, const TrainConfig& cfg);

/// A preprocessed image with its ground truth, ready for training or evaluation.
struct Sample {
  std::string name;
  Raster image;  // F32 on [0,1]
  BinaryMask mask;
  CoastClass label = CoastClass::Natural;
};

/// Reads and preprocesses one split; masks are resampled (nearest) to the
/// preprocessed image size.
std::vector<Sample> load_samples(const DatasetManifest& manifest, Split split, const PreprocessConfig& pre,
                                 int workers = 1);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double metric = 0.0;  // classifier: train accuracy; segmenter: pixel accuracy
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  /// `epoch,loss,metric` lines.
  void write(const std::filesystem::path& path) const;
};

enum class ClassFilter { Natural, Built, Both };
std::string_view class_tag(ClassFilter f);
ClassFilter class_filter_from_string(std::string_view s);

/// Trains the stage-one classifier on the training samples (label 1 = built).
nn::ModelWeights train_classifier(const std::vector<Sample>& train, const nn::ClassifierSpec& spec,
                                  const TrainConfig& cfg, TrainingLog* log = nullptr);

/// Trains a U-Net on the samples passing `filter`.
nn::ModelWeights train_segmenter(const std::vector<Sample>& train, ClassFilter filter, const nn::SegmenterSpec& spec,
                                 const TrainConfig& cfg, TrainingLog* log = nullptr);

/// Manifest-level wrappers: load + preprocess the train split, then train.
nn::ModelWeights train_classifier(const DatasetManifest& manifest, const PreprocessConfig& pre,
                                  const nn::ClassifierSpec& spec, const TrainConfig& cfg, TrainingLog* log = nullptr);
nn::ModelWeights train_segmenter(const DatasetManifest& manifest, const PreprocessConfig& pre, ClassFilter filter,
                                 const nn::SegmenterSpec& spec, const TrainConfig& cfg, TrainingLog* log = nullptr);

}  // namespace ccesar
