#pragma once

#include <cstdint>
#include <random>

#include "ccesar/nnet/tensor.hpp"

namespace ccesar::nn {

/// k x k convolution (k = 1 or 3), stride 1, zero padding k/2.
template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore<T>& ps, const std::string& name, int cin, int cout, int k);
  void init_he(ParamStore<T>& ps, std::mt19937_64& rng) const;
  Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>& ps);
  /// Accumulates parameter gradients; returns dL/dx when need_dx.
  Tensor<T> backward(const Tensor<T>& dy, ParamStore<T>& ps, bool need_dx);
  int cout() const { return cout_; }

 private:
  int cin_ = 0, cout_ = 0, k_ = 3;
  std::size_t w_ = 0, b_ = 0;
  Tensor<T> x_;
};

/// Per-channel batch normalisation. Running statistics use momentum 0.9 and
/// the unbiased batch variance.
template <class T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParamStore<T>& ps, const std::string& name, int channels);
  void init(ParamStore<T>& ps) const;
  Tensor<T> forward(const Tensor<T>& x, ParamStore<T>& ps, bool train);
  Tensor<T> backward(const Tensor<T>& dy, ParamStore<T>& ps);

  static constexpr double kMomentum = 0.9;
  static constexpr double kEps = 1e-5;

 private:
  int c_ = 0;
  std::size_t gamma_ = 0, beta_ = 0, mean_ = 0, var_ = 0;
  bool train_ = false;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

template <class T>
class ReLU {
 public:
  void forward_inplace(Tensor<T>& x);
  void backward_inplace(Tensor<T>& dy) const;
  const std::vector<std::uint8_t>& pattern() const { return on_; }

 private:
  std::vector<std::uint8_t> on_;
};

/// 2 x 2 max pooling, stride 2, floor on odd sizes.
template <class T>
class MaxPool2 {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& dy) const;
  const std::vector<std::uint32_t>& argmax() const { return argmax_; }

 private:
  int in_h_ = 0, in_w_ = 0;
  std::vector<std::uint32_t> argmax_;
};

/// Nearest-neighbour x2 upsampling.
template <class T>
Tensor<T> upsample2_forward(const Tensor<T>& x);
template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& dy);

/// Channel concatenation [a; b] and its inverse.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
void split_channels(const Tensor<T>& ab, int ca, Tensor<T>& a, Tensor<T>& b);

/// Global average pool to [c][n][1][1].
template <class T>
Tensor<T> gap_forward(const Tensor<T>& x);
template <class T>
Tensor<T> gap_backward(const Tensor<T>& dy, int h, int w);

/// Fully connected layer on [in][n][1][1] tensors.
template <class T>
class Dense {
 public:
  Dense() = default;
  Dense(ParamStore<T>& ps, const std::string& name, int in, int out);
  void init_he(ParamStore<T>& ps, std::mt19937_64& rng) const;
  Tensor<T> forward(const Tensor<T>& x, const ParamStore<T>& ps);
  Tensor<T> backward(const Tensor<T>& dy, ParamStore<T>& ps, bool need_dx);

 private:
  int in_ = 0, out_ = 0;
  std::size_t w_ = 0, b_ = 0;
  Tensor<T> x_;
};

/// Inverted dropout; the mask is drawn from the caller's generator.
template <class T>
class Dropout {
 public:
  explicit Dropout(double rate = 0.5) : rate_(rate) {}
  Tensor<T> forward(const Tensor<T>& x, bool train, std::mt19937_64& rng);
  Tensor<T> backward(const Tensor<T>& dy) const;
  double rate() const { return rate_; }

 private:
  double rate_;
  bool train_ = false;
  std::vector<T> scale_;
};

}  // namespace ccesar::nn
