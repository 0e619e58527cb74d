#include "ccesar/nnet/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "ccesar/error.hpp"

namespace ccesar::nn {

namespace {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapR = Eigen::Map<MatR<T>>;
template <class T>
using CMapR = Eigen::Map<const MatR<T>>;

/// 3x3 patches with zero padding: row (ci*3+ky)*3+kx holds x shifted by
/// (ky-1, kx-1) over the whole batch plane.
template <class T>
void im2col3(const Tensor<T>& x, T* col) {
  const int H = x.h, W = x.w;
  const std::size_t P = x.plane();
  for (int ci = 0; ci < x.c; ++ci)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + static_cast<std::size_t>((ci * 3 + ky) * 3 + kx) * P;
        for (int ni = 0; ni < x.n; ++ni)
          for (int y = 0; y < H; ++y) {
            T* d = dst + (static_cast<std::size_t>(ni) * H + y) * W;
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= H) {
              std::fill(d, d + W, T(0));
              continue;
            }
            const T* s = x.channel(ci) + (static_cast<std::size_t>(ni) * H + sy) * W;
            if (kx == 1) {
              std::copy(s, s + W, d);
            } else if (kx == 0) {
              d[0] = T(0);
              std::copy(s, s + W - 1, d + 1);
            } else {
              std::copy(s + 1, s + W, d);
              d[W - 1] = T(0);
            }
          }
      }
}

template <class T>
void col2im3(const T* col, Tensor<T>& dx) {
  const int H = dx.h, W = dx.w;
  const std::size_t P = dx.plane();
  for (int ci = 0; ci < dx.c; ++ci)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + static_cast<std::size_t>((ci * 3 + ky) * 3 + kx) * P;
        for (int ni = 0; ni < dx.n; ++ni)
          for (int y = 0; y < H; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= H) continue;
            const T* s = src + (static_cast<std::size_t>(ni) * H + y) * W;
            T* d = dx.channel(ci) + (static_cast<std::size_t>(ni) * H + sy) * W;
            if (kx == 1) {
              for (int i = 0; i < W; ++i) d[i] += s[i];
            } else if (kx == 0) {
              for (int i = 0; i + 1 < W; ++i) d[i] += s[i + 1];
            } else {
              for (int i = 1; i < W; ++i) d[i] += s[i - 1];
            }
          }
      }
}

template <class T>
void he_normal(Buffer<T>& v, int fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (auto& x : v) x = static_cast<T>(dist(rng));
}

}  // namespace

// ---- Conv2d ----

template <class T>
Conv2d<T>::Conv2d(ParamStore<T>& ps, const std::string& name, int cin, int cout, int k) : cin_(cin), cout_(cout), k_(k) {
  if (k != 1 && k != 3) throw ModelError("only 1x1 and 3x3 convolutions are supported");
  w_ = ps.add(name + ".weight", {cout, cin, k, k});
  b_ = ps.add(name + ".bias", {cout});
}

template <class T>
void Conv2d<T>::init_he(ParamStore<T>& ps, std::mt19937_64& rng) const {
  he_normal(ps[w_].value, cin_ * k_ * k_, rng);
  std::fill(ps[b_].value.begin(), ps[b_].value.end(), T(0));
}

template <class T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, const ParamStore<T>& ps) {
  if (x.c != cin_) throw ShapeError("conv input has " + std::to_string(x.c) + " channels, expected " + std::to_string(cin_));
  x_ = x;
  const auto P = static_cast<Eigen::Index>(x.plane());
  const Eigen::Index K = static_cast<Eigen::Index>(cin_) * k_ * k_;
  Tensor<T> y(cout_, x.n, x.h, x.w);
  CMapR<T> W(ps[w_].value.data(), cout_, K);
  MapR<T> Y(y.data.data(), cout_, P);
  if (k_ == 1) {
    Y.noalias() = W * CMapR<T>(x.data.data(), K, P);
  } else {
    Buffer<T> col(static_cast<std::size_t>(K * P));
    im2col3(x, col.data());
    Y.noalias() = W * CMapR<T>(col.data(), K, P);
  }
  const auto& b = ps[b_].value;
  for (int co = 0; co < cout_; ++co) Y.row(co).array() += b[static_cast<std::size_t>(co)];
  return y;
}

template <class T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy, ParamStore<T>& ps, bool need_dx) {
  const auto P = static_cast<Eigen::Index>(x_.plane());
  const Eigen::Index K = static_cast<Eigen::Index>(cin_) * k_ * k_;
  CMapR<T> dY(dy.data.data(), cout_, P);
  MapR<T> dW(ps[w_].grad.data(), cout_, K);
  auto& db = ps[b_].grad;
  for (int co = 0; co < cout_; ++co) db[static_cast<std::size_t>(co)] += dY.row(co).sum();
  CMapR<T> W(ps[w_].value.data(), cout_, K);

  Tensor<T> dx;
  if (k_ == 1) {
    dW.noalias() += dY * CMapR<T>(x_.data.data(), K, P).transpose();
    if (need_dx) {
      dx = Tensor<T>(cin_, x_.n, x_.h, x_.w);
      MapR<T>(dx.data.data(), K, P).noalias() = W.transpose() * dY;
    }
  } else {
    Buffer<T> col(static_cast<std::size_t>(K * P));
    im2col3(x_, col.data());
    dW.noalias() += dY * CMapR<T>(col.data(), K, P).transpose();
    if (need_dx) {
      MapR<T>(col.data(), K, P).noalias() = W.transpose() * dY;
      dx = Tensor<T>(cin_, x_.n, x_.h, x_.w);
      col2im3(col.data(), dx);
    }
  }
  return dx;
}

// ---- BatchNorm2d ----

template <class T>
BatchNorm2d<T>::BatchNorm2d(ParamStore<T>& ps, const std::string& name, int channels) : c_(channels) {
  gamma_ = ps.add(name + ".gamma", {channels});
  beta_ = ps.add(name + ".beta", {channels});
  mean_ = ps.add(name + ".running_mean", {channels}, false);
  var_ = ps.add(name + ".running_var", {channels}, false);
}

template <class T>
void BatchNorm2d<T>::init(ParamStore<T>& ps) const {
  std::fill(ps[gamma_].value.begin(), ps[gamma_].value.end(), T(1));
  std::fill(ps[beta_].value.begin(), ps[beta_].value.end(), T(0));
  std::fill(ps[mean_].value.begin(), ps[mean_].value.end(), T(0));
  std::fill(ps[var_].value.begin(), ps[var_].value.end(), T(1));
}

template <class T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, ParamStore<T>& ps, bool train) {
  if (x.c != c_) throw ShapeError("batch-norm channel mismatch");
  train_ = train;
  const std::size_t P = x.plane();
  Tensor<T> y(x.c, x.n, x.h, x.w);
  xhat_ = Tensor<T>(x.c, x.n, x.h, x.w);
  inv_std_.assign(static_cast<std::size_t>(c_), T(0));
  auto& gamma = ps[gamma_].value;
  auto& beta = ps[beta_].value;
  auto& rmean = ps[mean_].value;
  auto& rvar = ps[var_].value;
  for (int ci = 0; ci < c_; ++ci) {
    const T* xs = x.channel(ci);
    double mean, var;
    if (train) {
      double s = 0.0;
      for (std::size_t i = 0; i < P; ++i) s += xs[i];
      mean = s / static_cast<double>(P);
      double ss = 0.0;
      for (std::size_t i = 0; i < P; ++i) ss += (xs[i] - mean) * (xs[i] - mean);
      var = ss / static_cast<double>(P);
      const double unbiased = P > 1 ? ss / static_cast<double>(P - 1) : var;
      rmean[ci] = static_cast<T>(kMomentum * rmean[ci] + (1.0 - kMomentum) * mean);
      rvar[ci] = static_cast<T>(kMomentum * rvar[ci] + (1.0 - kMomentum) * unbiased);
    } else {
      mean = rmean[ci];
      var = rvar[ci];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
    inv_std_[ci] = inv;
    const T m = static_cast<T>(mean);
    T* xh = xhat_.channel(ci);
    T* ys = y.channel(ci);
    for (std::size_t i = 0; i < P; ++i) {
      xh[i] = (xs[i] - m) * inv;
      ys[i] = gamma[ci] * xh[i] + beta[ci];
    }
  }
  return y;
}

template <class T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& dy, ParamStore<T>& ps) {
  const std::size_t P = dy.plane();
  Tensor<T> dx(dy.c, dy.n, dy.h, dy.w);
  const auto& gamma = ps[gamma_].value;
  auto& dgamma = ps[gamma_].grad;
  auto& dbeta = ps[beta_].grad;
  for (int ci = 0; ci < c_; ++ci) {
    const T* g = dy.channel(ci);
    const T* xh = xhat_.channel(ci);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      sum_g += g[i];
      sum_gx += static_cast<double>(g[i]) * xh[i];
    }
    dgamma[ci] += static_cast<T>(sum_gx);
    dbeta[ci] += static_cast<T>(sum_g);
    T* d = dx.channel(ci);
    if (train_) {
      const double k = gamma[ci] * inv_std_[ci] / static_cast<double>(P);
      const double mg = sum_g, mgx = sum_gx, np = static_cast<double>(P);
      for (std::size_t i = 0; i < P; ++i) d[i] = static_cast<T>(k * (np * g[i] - mg - xh[i] * mgx));
    } else {
      const T k = gamma[ci] * inv_std_[ci];
      for (std::size_t i = 0; i < P; ++i) d[i] = g[i] * k;
    }
  }
  return dx;
}

// ---- ReLU ----

template <class T>
void ReLU<T>::forward_inplace(Tensor<T>& x) {
  on_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    on_[i] = x.data[i] > T(0);
    if (!on_[i]) x.data[i] = T(0);
  }
}

template <class T>
void ReLU<T>::backward_inplace(Tensor<T>& dy) const {
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!on_[i]) dy.data[i] = T(0);
}

// ---- MaxPool2 ----

template <class T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x) {
  in_h_ = x.h;
  in_w_ = x.w;
  const int oh = x.h / 2, ow = x.w / 2;
  if (oh < 1 || ow < 1) throw ShapeError("max pool input smaller than 2x2");
  Tensor<T> y(x.c, x.n, oh, ow);
  argmax_.resize(y.size());
  std::size_t o = 0;
  for (int ci = 0; ci < x.c; ++ci)
    for (int ni = 0; ni < x.n; ++ni) {
      const std::size_t base = (static_cast<std::size_t>(ci) * x.n + ni) * x.h * x.w;
      for (int y0 = 0; y0 < oh; ++y0)
        for (int x0 = 0; x0 < ow; ++x0, ++o) {
          std::size_t best = base + static_cast<std::size_t>(2 * y0) * x.w + 2 * x0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t i = base + static_cast<std::size_t>(2 * y0 + dy) * x.w + 2 * x0 + dx;
              if (x.data[i] > x.data[best]) best = i;
            }
          y.data[o] = x.data[best];
          argmax_[o] = static_cast<std::uint32_t>(best);
        }
    }
  return y;
}

template <class T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& dy) const {
  Tensor<T> dx(dy.c, dy.n, in_h_, in_w_);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
  return dx;
}

// ---- upsample / concat / gap ----

template <class T>
Tensor<T> upsample2_forward(const Tensor<T>& x) {
  Tensor<T> y(x.c, x.n, 2 * x.h, 2 * x.w);
  for (int ci = 0; ci < x.c; ++ci)
    for (int ni = 0; ni < x.n; ++ni)
      for (int yy = 0; yy < y.h; ++yy)
        for (int xx = 0; xx < y.w; ++xx) y.at(ci, ni, yy, xx) = x.at(ci, ni, yy / 2, xx / 2);
  return y;
}

template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.c, dy.n, dy.h / 2, dy.w / 2);
  for (int ci = 0; ci < dy.c; ++ci)
    for (int ni = 0; ni < dy.n; ++ni)
      for (int yy = 0; yy < dy.h; ++yy)
        for (int xx = 0; xx < dy.w; ++xx) dx.at(ci, ni, yy / 2, xx / 2) += dy.at(ci, ni, yy, xx);
  return dx;
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) throw ShapeError("concat: spatial/batch shapes differ");
  Tensor<T> y(a.c + b.c, a.n, a.h, a.w);
  std::copy(a.data.begin(), a.data.end(), y.data.begin());
  std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return y;
}

template <class T>
void split_channels(const Tensor<T>& ab, int ca, Tensor<T>& a, Tensor<T>& b) {
  a = Tensor<T>(ca, ab.n, ab.h, ab.w);
  b = Tensor<T>(ab.c - ca, ab.n, ab.h, ab.w);
  std::copy(ab.data.begin(), ab.data.begin() + static_cast<std::ptrdiff_t>(a.size()), a.data.begin());
  std::copy(ab.data.begin() + static_cast<std::ptrdiff_t>(a.size()), ab.data.end(), b.data.begin());
}

template <class T>
Tensor<T> gap_forward(const Tensor<T>& x) {
  Tensor<T> y(x.c, x.n, 1, 1);
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  for (int ci = 0; ci < x.c; ++ci)
    for (int ni = 0; ni < x.n; ++ni) {
      const T* s = x.channel(ci) + static_cast<std::size_t>(ni) * hw;
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += s[i];
      y.at(ci, ni, 0, 0) = static_cast<T>(acc / static_cast<double>(hw));
    }
  return y;
}

template <class T>
Tensor<T> gap_backward(const Tensor<T>& dy, int h, int w) {
  Tensor<T> dx(dy.c, dy.n, h, w);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < dy.c; ++ci)
    for (int ni = 0; ni < dy.n; ++ni) {
      const T g = dy.at(ci, ni, 0, 0) / static_cast<T>(hw);
      T* d = dx.channel(ci) + static_cast<std::size_t>(ni) * hw;
      std::fill(d, d + hw, g);
    }
  return dx;
}

// ---- Dense ----

template <class T>
Dense<T>::Dense(ParamStore<T>& ps, const std::string& name, int in, int out) : in_(in), out_(out) {
  w_ = ps.add(name + ".weight", {out, in});
  b_ = ps.add(name + ".bias", {out});
}

template <class T>
void Dense<T>::init_he(ParamStore<T>& ps, std::mt19937_64& rng) const {
  he_normal(ps[w_].value, in_, rng);
  std::fill(ps[b_].value.begin(), ps[b_].value.end(), T(0));
}

template <class T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, const ParamStore<T>& ps) {
  if (x.c != in_ || x.h != 1 || x.w != 1) throw ShapeError("dense input shape mismatch");
  x_ = x;
  Tensor<T> y(out_, x.n, 1, 1);
  MapR<T> Y(y.data.data(), out_, x.n);
  Y.noalias() = CMapR<T>(ps[w_].value.data(), out_, in_) * CMapR<T>(x.data.data(), in_, x.n);
  for (int o = 0; o < out_; ++o) Y.row(o).array() += ps[b_].value[static_cast<std::size_t>(o)];
  return y;
}

template <class T>
Tensor<T> Dense<T>::backward(const Tensor<T>& dy, ParamStore<T>& ps, bool need_dx) {
  CMapR<T> dY(dy.data.data(), out_, dy.n);
  MapR<T>(ps[w_].grad.data(), out_, in_).noalias() += dY * CMapR<T>(x_.data.data(), in_, x_.n).transpose();
  for (int o = 0; o < out_; ++o) ps[b_].grad[static_cast<std::size_t>(o)] += dY.row(o).sum();
  Tensor<T> dx;
  if (need_dx) {
    dx = Tensor<T>(in_, dy.n, 1, 1);
    MapR<T>(dx.data.data(), in_, dy.n).noalias() = CMapR<T>(ps[w_].value.data(), out_, in_).transpose() * dY;
  }
  return dx;
}

// ---- Dropout ----

template <class T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, bool train, std::mt19937_64& rng) {
  train_ = train;
  if (!train || rate_ <= 0.0) return x;
  scale_.resize(x.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const T keep = static_cast<T>(1.0 / (1.0 - rate_));
  Tensor<T> y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale_[i] = u(rng) < rate_ ? T(0) : keep;
    y.data[i] *= scale_[i];
  }
  return y;
}

template <class T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& dy) const {
  if (!train_ || rate_ <= 0.0) return dy;
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= scale_[i];
  return dx;
}

#define CCESAR_INSTANTIATE(T)                                                        \
  template class Conv2d<T>;                                                          \
  template class BatchNorm2d<T>;                                                     \
  template class ReLU<T>;                                                            \
  template class MaxPool2<T>;                                                        \
  template class Dense<T>;                                                           \
  template class Dropout<T>;                                                         \
  template Tensor<T> upsample2_forward(const Tensor<T>&);                            \
  template Tensor<T> upsample2_backward(const Tensor<T>&);                           \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);            \
  template void split_channels(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);       \
  template Tensor<T> gap_forward(const Tensor<T>&);                                  \
  template Tensor<T> gap_backward(const Tensor<T>&, int, int);

CCESAR_INSTANTIATE(float)
CCESAR_INSTANTIATE(double)

#undef CCESAR_INSTANTIATE

}  // namespace ccesar::nn
