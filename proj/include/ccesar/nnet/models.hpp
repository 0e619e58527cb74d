#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ccesar/nnet/layers.hpp"

namespace ccesar::nn {

enum class ModelKind { Classifier, Segmenter };

struct ClassifierSpec {
  int in_channels = 1;
  std::vector<int> filters{32, 64, 128, 256};
  int dense = 512;
  double dropout = 0.5;
  int input_size = 64;        // images are resized to input_size^2 before the network
  double input_offset = 0.5;  // subtracted from every input value

  void validate() const;
  bool operator==(const ClassifierSpec&) const = default;
};

struct SegmenterSpec {
  int in_channels = 1;
  int depth = 4;
  int base_filters = 32;
  double input_offset = 0.5;

  void validate() const;
  bool operator==(const SegmenterSpec&) const = default;
};

/// Architecture plus training metadata; serialised as the text descriptor.
struct ArchDescriptor {
  ModelKind kind = ModelKind::Segmenter;
  ClassifierSpec classifier;
  SegmenterSpec segmenter;
  std::string class_tag = "mixed";  // natural | built | mixed
  int epochs = 0;
  std::uint64_t seed = 0;

  std::string to_text() const;
  static ArchDescriptor from_text(const std::string& text);
  /// Only the architecture matching `kind` takes part; the other one is not serialised.
  bool operator==(const ArchDescriptor& o) const;
};

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
  bool operator==(const NamedTensor&) const = default;
};

struct ModelWeights {
  ArchDescriptor arch;
  std::vector<NamedTensor> tensors;
  bool operator==(const ModelWeights&) const = default;
};

/// Binary format: "CCESAR-W1\n", u32 descriptor length + descriptor text,
/// u32 tensor count, then per tensor: u32 name length + name, u32 rank,
/// i32 dims, little-endian float32 values.
void save_weights(const ModelWeights& w, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);

/// Common interface: forward returns logits; backward takes dL/dlogits and
/// accumulates parameter gradients.
template <class T>
class Network {
 public:
  virtual ~Network() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
  virtual void backward(const Tensor<T>& dlogits) = 0;
  virtual ArchDescriptor descriptor() const = 0;
  /// Hash of every ReLU on/off state and max-pool choice of the last forward
  /// pass. Two passes with equal fingerprints ran through the same linear
  /// piece of the network.
  virtual std::uint64_t activation_fingerprint() const = 0;

  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  ModelWeights export_weights() const;
  /// Copies values by name; any missing or mis-shaped tensor is a ModelError.
  void import_weights(const ModelWeights& w);

 protected:
  ParamStore<T> params_;
};

template <class T>
class Classifier final : public Network<T> {
 public:
  Classifier(const ClassifierSpec& spec, std::uint64_t seed);
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  void backward(const Tensor<T>& dlogits) override;
  ArchDescriptor descriptor() const override;
  std::uint64_t activation_fingerprint() const override;
  const ClassifierSpec& spec() const { return spec_; }
  /// Reseeds the dropout mask generator.
  void seed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

 private:
  struct Block {
    Conv2d<T> conv1, conv2;
    BatchNorm2d<T> bn1, bn2;
    ReLU<T> relu1, relu2;
    MaxPool2<T> pool;
  };
  ClassifierSpec spec_;
  std::vector<Block> blocks_;
  Dense<T> fc1_, fc2_;
  ReLU<T> fc_relu_;
  Dropout<T> dropout_;
  std::mt19937_64 dropout_rng_;
  int gap_h_ = 0, gap_w_ = 0;
};

template <class T>
class UNet final : public Network<T> {
 public:
  UNet(const SegmenterSpec& spec, std::uint64_t seed);
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  void backward(const Tensor<T>& dlogits) override;
  ArchDescriptor descriptor() const override;
  std::uint64_t activation_fingerprint() const override;
  const SegmenterSpec& spec() const { return spec_; }

 private:
  struct DoubleConv {
    Conv2d<T> c1, c2;
    ReLU<T> r1, r2;
  };
  struct Up {
    Conv2d<T> conv;  // after nearest x2 upsampling
    DoubleConv dc;
    int skip_channels = 0;
  };
  Tensor<T> run(DoubleConv& d, const Tensor<T>& x);
  Tensor<T> back(DoubleConv& d, const Tensor<T>& dy, bool need_dx);

  SegmenterSpec spec_;
  std::vector<DoubleConv> enc_;
  std::vector<MaxPool2<T>> pools_;
  DoubleConv bottleneck_;
  std::vector<Up> dec_;  // dec_[0] is the deepest level
  Conv2d<T> head_;
  int in_h_ = 0, in_w_ = 0, pad_h_ = 0, pad_w_ = 0;
};

/// Builds a network from weights, checking the architecture kind.
template <class T>
std::unique_ptr<Classifier<T>> make_classifier(const ModelWeights& w);
template <class T>
std::unique_ptr<UNet<T>> make_segmenter(const ModelWeights& w);

template <class T>
T sigmoid(T z);

/// Classifier probabilities, one per batch item ([1][n][1][1]).
template <class T>
Tensor<T> classifier_forward(Classifier<T>& model, const Tensor<T>& batch, bool train_mode);
/// Per-pixel land probabilities, same spatial size as the input.
template <class T>
Tensor<T> unet_forward(UNet<T>& model, const Tensor<T>& batch);

/// Mean BCE of sigmoid(logits) vs targets; dlogits (if given) receives
/// (sigmoid(z) - t) / N.
template <class T>
double bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets, Tensor<T>* dlogits);

/// Zeroes the gradients, runs a train-mode forward and backward with BCE, and
/// returns the loss. Gradients are left in model.params().
template <class T>
double gradients(Network<T>& model, const Tensor<T>& batch, const Tensor<T>& targets);

}  // namespace ccesar::nn
