#include "ccesar/preprocess/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "ccesar/error.hpp"

namespace ccesar {

void PreprocessConfig::validate() const {
  if (lee_window < 3 || lee_window % 2 == 0) throw ConfigError("preprocess.lee_window must be odd and >= 3");
  if (noise_cv && !(*noise_cv >= 0.0)) throw ConfigError("preprocess.noise_cv must be >= 0");
  if (!(upsample_factor >= 1.0) || !std::isfinite(upsample_factor))
    throw ConfigError("preprocess.upsample_factor must be >= 1");
  if (!(epsilon_db_floor > 0.0)) throw ConfigError("preprocess.epsilon_db_floor must be > 0");
}

int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace {

struct WindowStats {
  std::vector<double> mean, var;
};

WindowStats window_stats(const Raster& r, int c, int window) {
  const int w = r.width(), h = r.height(), half = window / 2;
  const double count = static_cast<double>(window) * window;
  WindowStats s{std::vector<double>(static_cast<std::size_t>(w) * h), std::vector<double>(static_cast<std::size_t>(w) * h)};
  std::vector<double> vals(static_cast<std::size_t>(window) * window);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      std::size_t k = 0;
      for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) {
          vals[k] = r.at(reflect101(y + dy, h), reflect101(x + dx, w), c);
          sum += vals[k++];
        }
      const double m = sum / count;
      double ss = 0.0;
      for (double v : vals) ss += (v - m) * (v - m);
      const auto i = static_cast<std::size_t>(y) * w + x;
      s.mean[i] = m;
      s.var[i] = ss / (count - 1.0);
    }
  return s;
}

std::vector<double> cv_from_stats(const WindowStats& s) {
  std::vector<double> cz(s.mean.size());
  for (std::size_t i = 0; i < cz.size(); ++i) cz[i] = s.mean[i] > 0.0 ? std::sqrt(s.var[i]) / s.mean[i] : 0.0;
  return cz;
}

/// Linear-interpolated percentile (p in [0,100]).
double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void require_nonnegative(const Raster& r, const char* what) {
  for (float v : r.pixels())
    if (v < 0.0f) throw DomainError(std::string(what) + ": pixels must be nonnegative");
}

}  // namespace

std::vector<double> local_cv(const Raster& r, int window) { return cv_from_stats(window_stats(r, 0, window)); }

Raster lee_filter(const Raster& raster, const PreprocessConfig& cfg) {
  cfg.validate();
  require_nonnegative(raster, "lee_filter");
  Raster out(raster.width(), raster.height(), raster.channels(), PixelDepth::F32, raster.ground_resolution_m());
  out.set_geo_bbox(raster.geo_bbox());
  for (int c = 0; c < raster.channels(); ++c) {
    const auto stats = window_stats(raster, c, cfg.lee_window);
    const auto cz = cv_from_stats(stats);
    const double cv = cfg.noise_cv ? *cfg.noise_cv : percentile(cz, 10.0);
    for (int y = 0; y < raster.height(); ++y)
      for (int x = 0; x < raster.width(); ++x) {
        const auto i = static_cast<std::size_t>(y) * raster.width() + x;
        const double m = stats.mean[i];
        double weight = 0.0;
        if (m > 0.0 && cz[i] > 0.0) weight = std::clamp(1.0 - (cv * cv) / (cz[i] * cz[i]), 0.0, 1.0);
        out.at(y, x, c) = static_cast<float>(m + weight * (raster.at(y, x, c) - m));
      }
  }
  return out;
}

Raster normalize_backscatter(const Raster& raster, const PreprocessConfig& cfg) {
  cfg.validate();
  require_nonnegative(raster, "normalize_backscatter");
  const int chans = raster.channels();
  const std::size_t n = static_cast<std::size_t>(raster.width()) * raster.height();
  std::vector<float> out(raster.size());
  for (int c = 0; c < chans; ++c) {
    std::vector<double> db(n);
    for (std::size_t i = 0; i < n; ++i)
      db[i] = 10.0 * std::log10(std::max<double>(raster.pixels()[i * chans + c], cfg.epsilon_db_floor));
    const auto [lo, hi] = std::minmax_element(db.begin(), db.end());
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < n; ++i)
      out[i * chans + c] = range > 0.0 ? static_cast<float>(std::clamp((db[i] - *lo) / range, 0.0, 1.0)) : 0.0f;
  }
  Raster r(raster.width(), raster.height(), chans, PixelDepth::F32, std::move(out), raster.ground_resolution_m());
  r.set_geo_bbox(raster.geo_bbox());
  return r;
}

Raster resize_bilinear(const Raster& raster, int width, int height) {
  if (width < 1 || height < 1) throw ShapeError("resize target must be at least 1x1");
  const int iw = raster.width(), ih = raster.height(), chans = raster.channels();
  const double sx = static_cast<double>(iw) / width, sy = static_cast<double>(ih) / height;
  std::vector<float> out(static_cast<std::size_t>(width) * height * chans);
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(ih - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, ih - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(iw - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, iw - 1);
      const double tx = fx - x0;
      for (int c = 0; c < chans; ++c) {
        const double top = raster.at(y0, x0, c) * (1.0 - tx) + raster.at(y0, x1, c) * tx;
        const double bot = raster.at(y1, x0, c) * (1.0 - tx) + raster.at(y1, x1, c) * tx;
        out[(static_cast<std::size_t>(y) * width + x) * chans + c] = static_cast<float>(top * (1.0 - ty) + bot * ty);
      }
    }
  }
  Raster r(width, height, chans, PixelDepth::F32, std::move(out),
           raster.ground_resolution_m() * std::sqrt(sx * sy));
  r.set_geo_bbox(raster.geo_bbox());
  return r;
}

Raster upsample_bilinear(const Raster& raster, double factor) {
  if (!(factor >= 1.0) || !std::isfinite(factor)) throw DomainError("upsample factor must be >= 1");
  if (factor == 1.0) return raster;
  const int w = static_cast<int>(std::lround(raster.width() * factor));
  const int h = static_cast<int>(std::lround(raster.height() * factor));
  Raster r = resize_bilinear(raster, w, h);
  r.set_ground_resolution_m(raster.ground_resolution_m() / factor);
  return r;
}

Raster preprocess_pipeline(const Raster& raster, const PreprocessConfig& cfg) {
  cfg.validate();
  if (raster.depth() == PixelDepth::U8) {
    std::vector<float> px(raster.pixels().begin(), raster.pixels().end());
    for (auto& v : px) v /= 255.0f;
    Raster r(raster.width(), raster.height(), raster.channels(), PixelDepth::F32, std::move(px),
             raster.ground_resolution_m());
    r.set_geo_bbox(raster.geo_bbox());
    return r;
  }
  return upsample_bilinear(normalize_backscatter(lee_filter(raster, cfg), cfg), cfg.upsample_factor);
}

}  // namespace ccesar
