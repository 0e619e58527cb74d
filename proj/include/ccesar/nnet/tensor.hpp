#pragma once

#include <cstddef>
#include <new>
#include <string>
#include <vector>

namespace ccesar::nn {

/// Cache-line aligned storage. Eigen picks its vectorised reduction path from
/// the buffer address, so unaligned heap blocks would make float results vary
/// between otherwise identical runs.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <class T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// Dense 4-D tensor stored channel-major: [c][n][h][w]. Keeping each channel
/// contiguous over the whole batch lets convolutions run as one GEMM.
template <class T>
struct Tensor {
  int c = 0, n = 0, h = 0, w = 0;
  Buffer<T> data;

  Tensor() = default;
  Tensor(int c_, int n_, int h_, int w_, T fill = T(0))
      : c(c_), n(n_), h(h_), w(w_), data(static_cast<std::size_t>(c_) * n_ * h_ * w_, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(n) * h * w; }
  std::size_t size() const { return data.size(); }
  T* channel(int ci) { return data.data() + ci * plane(); }
  const T* channel(int ci) const { return data.data() + ci * plane(); }
  T& at(int ci, int ni, int y, int x) {
    return data[((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x];
  }
  T at(int ci, int ni, int y, int x) const {
    return data[((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x];
  }
  bool same_shape(const Tensor& o) const { return c == o.c && n == o.n && h == o.h && w == o.w; }
};

template <class T>
struct Param {
  std::string name;
  std::vector<int> shape;
  Buffer<T> value;
  Buffer<T> grad;
  bool trainable = true;  // false for batch-norm running statistics
};

/// Owns every parameter of a network; layers refer to entries by index.
template <class T>
class ParamStore {
 public:
  std::size_t add(std::string name, std::vector<int> shape, bool trainable = true) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    params_.push_back({std::move(name), std::move(shape), Buffer<T>(count), Buffer<T>(trainable ? count : 0),
                       trainable});
    return params_.size() - 1;
  }
  Param<T>& operator[](std::size_t i) { return params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::vector<Param<T>>& all() { return params_; }
  const std::vector<Param<T>>& all() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
  }

 private:
  std::vector<Param<T>> params_;
};

}  // namespace ccesar::nn
