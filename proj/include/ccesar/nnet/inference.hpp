#pragma once

#include <memory>
#include <vector>

#include "ccesar/dataio/raster.hpp"
#include "ccesar/nnet/models.hpp"

namespace ccesar {

/// Stacks the first `channels` channels of equally sized rasters into a
/// [channels][n][h][w] tensor.
nn::Tensor<float> batch_from_rasters(const std::vector<const Raster*>& images, int channels);

/// Stage one: natural (0) vs built (1).
class CoastClassifier {
 public:
  virtual ~CoastClassifier() = default;
  /// Probability that the image shows a built coastline.
  virtual double built_probability(const Raster& image) = 0;
};

/// Stage two: land/water segmentation.
class LandSegmenter {
 public:
  virtual ~LandSegmenter() = default;
  /// Per-pixel land probability, row-major, image size.
  virtual std::vector<float> land_probability(const Raster& image) = 0;
  /// Probabilities binarised at 0.5 (land when p >= 0.5).
  BinaryMask segment(const Raster& image);
};

/// Classifier network in eval mode; images are bilinearly resized to the
/// model's input size first.
class NetClassifier final : public CoastClassifier {
 public:
  explicit NetClassifier(const nn::ModelWeights& w);
  double built_probability(const Raster& image) override;
  const nn::ModelWeights& weights() const { return weights_; }

 private:
  nn::ModelWeights weights_;
  std::unique_ptr<nn::Classifier<float>> net_;
};

class NetSegmenter final : public LandSegmenter {
 public:
  explicit NetSegmenter(const nn::ModelWeights& w);
  std::vector<float> land_probability(const Raster& image) override;
  const nn::ModelWeights& weights() const { return weights_; }

 private:
  nn::ModelWeights weights_;
  std::unique_ptr<nn::UNet<float>> net_;
};

}  // namespace ccesar
