#include "ccesar/postprocess/canny.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ccesar/error.hpp"
#include "ccesar/preprocess/preprocess.hpp"

namespace ccesar {

void CannyConfig::validate() const {
  if (!(tau_low > 0.0 && tau_low < tau_high && tau_high <= 255.0))
    throw ConfigError("canny thresholds must satisfy 0 < tau_low < tau_high <= 255");
  if (!(gaussian_sigma > 0.0)) throw ConfigError("canny.gaussian_sigma must be > 0");
  if (gaussian_size < 1 || gaussian_size % 2 == 0) throw ConfigError("canny.gaussian_size must be odd");
}

namespace {

std::vector<double> gaussian_kernel(double sigma, int size) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const int half = size / 2;
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) sum += k[i + half] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable convolution with reflect-101 borders.
std::vector<double> separable(const std::vector<double>& img, int w, int h, const std::vector<double>& kx,
                              const std::vector<double>& ky) {
  const int hx = static_cast<int>(kx.size()) / 2, hy = static_cast<int>(ky.size()) / 2;
  std::vector<double> tmp(img.size()), out(img.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -hx; i <= hx; ++i) s += kx[i + hx] * img[static_cast<std::size_t>(y) * w + reflect101(x + i, w)];
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -hy; i <= hy; ++i) s += ky[i + hy] * tmp[static_cast<std::size_t>(reflect101(y + i, h)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

// Sobel x = [1 2 1]^T (smoothing, vertical) times [-1 0 1] (derivative, horizontal).
const std::vector<double> kSobelSmooth{1.0, 2.0, 1.0};
const std::vector<double> kSobelDeriv{-1.0, 0.0, 1.0};

/// Response of Gaussian + Sobel-x to an ideal vertical 0 -> 1 step: the sum of
/// the composite kernel's positive entries.
double step_response(const std::vector<double>& g) {
  // Composite 1-D derivative kernel along x: g convolved with [-1 0 1];
  // the orthogonal direction sums to sum(g) * sum([1 2 1]) = 4.
  const int n = static_cast<int>(g.size());
  std::vector<double> d(static_cast<std::size_t>(n + 2), 0.0);
  for (int i = 0; i < n; ++i) {
    d[static_cast<std::size_t>(i)] -= g[static_cast<std::size_t>(i)];
    d[static_cast<std::size_t>(i + 2)] += g[static_cast<std::size_t>(i)];
  }
  double pos = 0.0;
  for (double v : d) pos += std::max(v, 0.0);
  return 4.0 * pos;
}

}  // namespace

std::vector<double> canny_magnitude(const std::vector<double>& image, int w, int h, const CannyConfig& cfg,
                                    std::vector<double>* gx_out, std::vector<double>* gy_out) {
  cfg.validate();
  if (image.size() != static_cast<std::size_t>(w) * h) throw ShapeError("canny: image size mismatch");
  const auto g = gaussian_kernel(cfg.gaussian_sigma, cfg.gaussian_size);
  const auto smooth = separable(image, w, h, g, g);
  auto gx = separable(smooth, w, h, kSobelDeriv, kSobelSmooth);
  auto gy = separable(smooth, w, h, kSobelSmooth, kSobelDeriv);
  const double scale = 1.0 / step_response(g);
  std::vector<double> mag(image.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::min(255.0, std::hypot(gx[i], gy[i]) * scale);
  if (gx_out) *gx_out = std::move(gx);
  if (gy_out) *gy_out = std::move(gy);
  return mag;
}

EdgeMap canny(const std::vector<double>& image, int w, int h, const CannyConfig& cfg) {
  std::vector<double> gx, gy;
  const auto mag = canny_magnitude(image, w, h, cfg, &gx, &gy);
  auto m = [&](int y, int x) {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };

  // Non-maximum suppression along the gradient direction quantised to
  // 0/45/90/135 degrees (rows grow downwards).
  std::vector<std::uint8_t> cls(mag.size(), 0);  // 0 none, 1 weak, 2 strong
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      const double v = mag[i];
      if (v < cfg.tau_low) continue;
      double angle = std::atan2(gy[i], gx[i]) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      int dy, dx;
      if (angle < 22.5 || angle >= 157.5) {
        dy = 0, dx = 1;
      } else if (angle < 67.5) {
        dy = 1, dx = 1;
      } else if (angle < 112.5) {
        dy = 1, dx = 0;
      } else {
        dy = 1, dx = -1;
      }
      if (!(v > m(y - dy, x - dx) && v >= m(y + dy, x + dx))) continue;
      cls[i] = v >= cfg.tau_high ? 2 : 1;
    }

  // Hysteresis: flood from strong pixels through weak ones (8-connected).
  EdgeMap edges(w, h);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (cls[static_cast<std::size_t>(y) * w + x] == 2 && !edges.edge(y, x)) {
        edges.set(y, x);
        stack.push_back({y, x});
        while (!stack.empty()) {
          const auto [cy, cx] = stack.back();
          stack.pop_back();
          for (int ny = cy - 1; ny <= cy + 1; ++ny)
            for (int nx = cx - 1; nx <= cx + 1; ++nx) {
              if (ny < 0 || ny >= h || nx < 0 || nx >= w || edges.edge(ny, nx)) continue;
              if (cls[static_cast<std::size_t>(ny) * w + nx] == 0) continue;
              edges.set(ny, nx);
              stack.push_back({ny, nx});
            }
        }
      }
  return edges;
}

EdgeMap canny(const BinaryMask& mask, const CannyConfig& cfg) {
  std::vector<double> img(mask.values().begin(), mask.values().end());
  return canny(img, mask.width(), mask.height(), cfg);
}

EdgeMap canny(const Raster& raster, const CannyConfig& cfg) {
  if (raster.channels() != 1) throw ShapeError("canny expects a single-channel input");
  const double scale = raster.depth() == PixelDepth::F32 ? 255.0 : 1.0;
  std::vector<double> img(raster.size());
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = raster.pixels()[i] * scale;
  return canny(img, raster.width(), raster.height(), cfg);
}

CoastlinePath longest_edge(const EdgeMap& edges) {
  const int w = edges.width(), h = edges.height();
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  CoastlinePath best;
  std::vector<PixelCoord> comp, stack;
  int next = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!edges.edge(y, x) || label[static_cast<std::size_t>(y) * w + x] >= 0) continue;
      comp.clear();
      stack = {{y, x}};
      label[static_cast<std::size_t>(y) * w + x] = next;
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        comp.push_back(p);
        for (int ny = p.row - 1; ny <= p.row + 1; ++ny)
          for (int nx = p.col - 1; nx <= p.col + 1; ++nx) {
            if (ny < 0 || ny >= h || nx < 0 || nx >= w || !edges.edge(ny, nx)) continue;
            auto& l = label[static_cast<std::size_t>(ny) * w + nx];
            if (l >= 0) continue;
            l = next;
            stack.push_back({ny, nx});
          }
      }
      ++next;
      if (comp.size() > best.pixels.size()) best.pixels = comp;
    }
  std::sort(best.pixels.begin(), best.pixels.end());
  return best;
}

namespace {

/// Stand-in for "no target"; large enough to never win, small enough that
/// parabola intersections stay finite.
constexpr double kFar = 1e20;

/// 1-D squared distance transform (lower envelope of parabolas).
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  auto sect = [&](int q, int p) {
    return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
  };
  std::size_t k = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = sect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = sect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

}  // namespace

double directed_min_distance(const std::vector<PixelCoord>& from, const std::vector<PixelCoord>& to) {
  if (from.empty() || to.empty()) throw MetricUndefined("distance between edge sets needs two nonempty sets");
  int r0 = from.front().row, r1 = r0, c0 = from.front().col, c1 = c0;
  for (const auto* set : {&from, &to})
    for (const auto& p : *set) {
      r0 = std::min(r0, p.row), r1 = std::max(r1, p.row);
      c0 = std::min(c0, p.col), c1 = std::max(c1, p.col);
    }
  const int h = r1 - r0 + 1, w = c1 - c0 + 1;
  std::vector<double> grid(static_cast<std::size_t>(w) * h, kFar);
  for (const auto& p : to) grid[static_cast<std::size_t>(p.row - r0) * w + (p.col - c0)] = 0.0;

  std::vector<int> v;
  std::vector<double> z, f(static_cast<std::size_t>(std::max(w, h))), d(f.size());
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(y)];
  }
  for (int y = 0; y < h; ++y) {
    double* row = grid.data() + static_cast<std::size_t>(y) * w;
    std::copy(row, row + w, f.begin());
    edt_1d(f.data(), row, w, v, z);
  }
  double sum = 0.0;
  for (const auto& p : from) sum += std::sqrt(grid[static_cast<std::size_t>(p.row - r0) * w + (p.col - c0)]);
  return sum / static_cast<double>(from.size());
}

Discrepancy avg_min_distance(const CoastlinePath& pred, const CoastlinePath& truth, double resolution_m) {
  if (truth.empty()) throw MetricUndefined("ground-truth coastline is empty");
  if (pred.empty()) throw MetricUndefined("predicted coastline is empty");
  Discrepancy d;
  d.directed_px = directed_min_distance(pred.pixels, truth.pixels);
  d.symmetric_px = 0.5 * (d.directed_px + directed_min_distance(truth.pixels, pred.pixels));
  d.directed_km = d.directed_px * resolution_m / 1000.0;
  d.symmetric_km = d.symmetric_px * resolution_m / 1000.0;
  return d;
}

}  // namespace ccesar
