#include "ccesar/synthgen/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "ccesar/dataio/tiff.hpp"
#include "ccesar/error.hpp"
#include "ccesar/parallel.hpp"
#include "ccesar/seed.hpp"

namespace ccesar {

namespace {

constexpr double kNaturalLand = 0.6;
constexpr double kNaturalWater = 0.15;
constexpr double kHarbourWater = 0.6;
constexpr double kPaved = 0.15;
constexpr double kBlock = 0.9;
constexpr int kMaxAttempts = 100;

using Rng = std::mt19937_64;
using Grid = std::vector<double>;  // size x size, row-major

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// Land above the per-column boundary height f[x] (row 0 is the top edge).
std::vector<std::uint8_t> mask_from_heights(const std::vector<int>& f, int n) {
  std::vector<std::uint8_t> land(static_cast<std::size_t>(n) * n, 0);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) land[static_cast<std::size_t>(y) * n + x] = y < f[x];
  return land;
}

double land_fraction(const std::vector<std::uint8_t>& land) {
  return static_cast<double>(std::count(land.begin(), land.end(), std::uint8_t{1})) / static_cast<double>(land.size());
}

bool fraction_ok(double frac, const SynthConfig& cfg) {
  return frac >= cfg.land_fraction_range[0] && frac <= cfg.land_fraction_range[1];
}

/// k quarter-turns counter-clockwise, then an optional left-right flip.
template <class V>
std::vector<V> orient(const std::vector<V>& a, int n, int k, bool flip) {
  std::vector<V> cur = a, next(a.size());
  for (int t = 0; t < k; ++t) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) next[static_cast<std::size_t>(i) * n + j] = cur[static_cast<std::size_t>(j) * n + (n - 1 - i)];
    std::swap(cur, next);
  }
  if (flip)
    for (int i = 0; i < n; ++i) std::reverse(cur.begin() + static_cast<std::ptrdiff_t>(i) * n, cur.begin() + static_cast<std::ptrdiff_t>(i + 1) * n);
  return cur;
}

SynthSample finish(Rng& rng, const Grid& base, const std::vector<std::uint8_t>& land, int n, const SynthConfig& cfg) {
  const int k = uniform_int(rng, 0, 3);
  const bool flip = uniform_int(rng, 0, 1) == 1;
  const Grid b = orient(base, n, k, flip);
  const auto l = orient(land, n, k, flip);

  std::gamma_distribution<double> speckle(cfg.speckle_looks, 1.0 / cfg.speckle_looks);
  std::vector<float> px(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) px[i] = static_cast<float>(b[i] * speckle(rng));

  std::vector<std::uint8_t> mv(l.size());
  std::transform(l.begin(), l.end(), mv.begin(), [](std::uint8_t v) { return v ? BinaryMask::kLand : BinaryMask::kWater; });
  return {Raster(n, n, 1, PixelDepth::F32, std::move(px)), BinaryMask::from_values(n, n, std::move(mv))};
}

void check_size(int size) {
  if (size < 16) throw DomainError("synthetic image size must be at least 16");
}

/// Midpoint-displacement profile in [0,1] sampled at n columns.
std::vector<double> midpoint_profile(Rng& rng, int n, double roughness, int octaves) {
  std::vector<double> pts{uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7)};
  double amp = 0.25;
  for (int o = 0; o < octaves; ++o) {
    std::vector<double> next{pts.front()};
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      next.push_back(0.5 * (pts[i] + pts[i + 1]) + uniform(rng, -amp, amp));
      next.push_back(pts[i + 1]);
    }
    pts = std::move(next);
    amp *= roughness;
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  const double span = static_cast<double>(pts.size() - 1);
  for (int x = 0; x < n; ++x) {
    const double t = n == 1 ? 0.0 : span * x / (n - 1);
    const auto i = std::min(static_cast<std::size_t>(t), pts.size() - 2);
    const double u = t - static_cast<double>(i);
    out[static_cast<std::size_t>(x)] = pts[i] * (1.0 - u) + pts[i + 1] * u;
  }
  return out;
}

/// One 4-neighbour erosion step; pixels outside the image count as land.
std::vector<std::uint8_t> erode(const std::vector<std::uint8_t>& a, int n) {
  auto at = [&](int y, int x) { return y < 0 || y >= n || x < 0 || x >= n || a[static_cast<std::size_t>(y) * n + x]; };
  std::vector<std::uint8_t> out(a.size());
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      out[static_cast<std::size_t>(y) * n + x] = at(y, x) && at(y - 1, x) && at(y + 1, x) && at(y, x - 1) && at(y, x + 1);
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (image_size < 16) throw ConfigError("synth.image_size must be >= 16");
  if (n_train_per_class < 1 || n_test_per_class < 1) throw ConfigError("synth counts must be >= 1");
  if (speckle_looks < 1) throw ConfigError("synth.speckle_looks must be a positive integer");
  if (!(land_fraction_range[0] > 0.0 && land_fraction_range[0] <= land_fraction_range[1] && land_fraction_range[1] < 1.0))
    throw ConfigError("synth.land_fraction_range must lie within (0,1)");
  if (!emit_f32 && !emit_u8) throw ConfigError("synth must emit at least one precision");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

SynthSample generate_natural(std::uint64_t seed, int size, const SynthConfig& cfg) {
  check_size(size);
  Rng rng(seed);
  const int n = size;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const auto prof = midpoint_profile(rng, n, 0.5, 5);
    std::vector<int> f(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) f[x] = std::clamp(static_cast<int>(std::lround(prof[x] * n)), 1, n - 1);
    const auto land = mask_from_heights(f, n);
    if (!fraction_ok(land_fraction(land), cfg)) continue;
    Grid base(land.size());
    for (std::size_t i = 0; i < land.size(); ++i) base[i] = land[i] ? kNaturalLand : kNaturalWater;
    return finish(rng, base, land, n, cfg);
  }
  throw GenerationError("natural coastline: land fraction outside range after 100 attempts");
}

SynthSample generate_built(std::uint64_t seed, int size, const SynthConfig& cfg) {
  check_size(size);
  Rng rng(seed);
  const int n = size;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    // Quay front: 1-3 straight segments at different distances from the top.
    const int nseg = uniform_int(rng, 1, 3);
    std::vector<int> cuts;
    while (static_cast<int>(cuts.size()) < nseg - 1) {
      const int c = uniform_int(rng, 4, n - 5);
      if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<int> edges{0};
    edges.insert(edges.end(), cuts.begin(), cuts.end());
    edges.push_back(n);
    std::vector<int> f(static_cast<std::size_t>(n));
    int prev = -100;
    for (int s = 0; s < nseg; ++s) {
      int level;
      do level = uniform_int(rng, static_cast<int>(0.3 * n), static_cast<int>(0.7 * n) - 1);
      while (std::abs(level - prev) < 2);
      prev = level;
      std::fill(f.begin() + edges[s], f.begin() + edges[s + 1], level);
    }
    // Jetties (into the water) and basins (into the land).
    const int nprot = uniform_int(rng, 1, 3);
    for (int p = 0; p < nprot; ++p) {
      const int w = uniform_int(rng, 3, std::max(3, n / 8 - 1));
      const int x0 = uniform_int(rng, 0, n - w);
      const int dmin = std::max(2, n / 10);
      int d = uniform_int(rng, dmin, std::max(dmin, n / 4 - 1));
      if (uniform(rng, 0.0, 1.0) >= 0.6) d = -d;
      for (int x = x0; x < x0 + w; ++x) f[x] += d;
    }
    for (auto& v : f) v = std::clamp(v, 2, n - 2);
    const auto land = mask_from_heights(f, n);
    if (!fraction_ok(land_fraction(land), cfg)) continue;

    Grid base(land.size());
    for (std::size_t i = 0; i < land.size(); ++i) base[i] = land[i] ? kPaved : kHarbourWater;

    // Bright blocks behind a paved quay strip, separated by narrow streets.
    const int nblocks = uniform_int(rng, 2, 5);
    const int quay = uniform_int(rng, 3, 5);
    auto inland = land;
    for (int q = 0; q < quay; ++q) inland = erode(inland, n);
    for (int b = 0; b < nblocks; ++b) {
      const int street = uniform_int(rng, 1, 2);
      const int lo = b * n / nblocks + (b > 0 ? street : 0);
      const int hi = (b + 1) * n / nblocks - (b < nblocks - 1 ? street : 0);
      for (int y = 0; y < n; ++y)
        for (int x = lo; x < hi; ++x) {
          const auto i = static_cast<std::size_t>(y) * n + x;
          if (inland[i]) base[i] = kBlock;
        }
    }
    return finish(rng, base, land, n, cfg);
  }
  throw GenerationError("built coastline: land fraction outside range after 100 attempts");
}

Raster quantize_u8(const Raster& r) {
  const auto px = r.pixels();
  const auto [lo_it, hi_it] = std::minmax_element(px.begin(), px.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<float> out(px.size(), 0.0f);
  if (hi > lo)
    for (std::size_t i = 0; i < px.size(); ++i) out[i] = static_cast<float>(std::round((px[i] - lo) / (hi - lo) * 255.0));
  Raster q(r.width(), r.height(), r.channels(), PixelDepth::U8, std::move(out), r.ground_resolution_m());
  q.set_geo_bbox(r.geo_bbox());
  return q;
}

GeneratedCorpus generate_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  struct Job {
    CoastClass cls;
    Split split;
    int index;
  };
  std::vector<Job> jobs;
  for (Split s : {Split::Train, Split::Test}) {
    const int count = s == Split::Train ? cfg.n_train_per_class : cfg.n_test_per_class;
    for (CoastClass c : {CoastClass::Natural, CoastClass::Built})
      for (int i = 0; i < count; ++i) jobs.push_back({c, s, i});
  }
  auto stem = [](const Job& j) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d", std::string(to_string(j.cls)).c_str(), j.index);
    return std::string(buf);
  };
  try {
    for (Split s : {Split::Train, Split::Test}) {
      const auto sub = std::string(to_string(s));
      fs::create_directories(out_dir / "masks" / sub);
      if (cfg.emit_f32) fs::create_directories(out_dir / "images_32bit" / sub);
      if (cfg.emit_u8) fs::create_directories(out_dir / "images_8bit" / sub);
    }
  } catch (const fs::filesystem_error& e) {
    throw WriteError(std::string("cannot create output directories: ") + e.what());
  }

  std::vector<ManifestEntry> e32(jobs.size()), e8(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t k) {
    const Job& j = jobs[k];
    const auto seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(j.cls), static_cast<std::uint64_t>(j.split),
                                             static_cast<std::uint64_t>(j.index)});
    const auto sample = j.cls == CoastClass::Natural ? generate_natural(seed, cfg.image_size, cfg)
                                                     : generate_built(seed, cfg.image_size, cfg);
    const auto sub = std::string(to_string(j.split));
    const auto mask_path = out_dir / "masks" / sub / (stem(j) + "_mask.tif");
    write_tiff(raster_from_mask(sample.mask), mask_path);
    if (cfg.emit_f32) {
      const auto p = out_dir / "images_32bit" / sub / (stem(j) + ".tif");
      write_tiff(sample.raster, p);
      e32[k] = {p, mask_path, j.cls, j.split};
    }
    if (cfg.emit_u8) {
      const auto p = out_dir / "images_8bit" / sub / (stem(j) + ".tif");
      write_tiff(quantize_u8(sample.raster), p);
      e8[k] = {p, mask_path, j.cls, j.split};
    }
  });

  GeneratedCorpus out;
  if (cfg.emit_f32) {
    out.f32 = DatasetManifest(std::move(e32));
    save_manifest(*out.f32, out_dir / kManifest32);
  }
  if (cfg.emit_u8) {
    out.u8 = DatasetManifest(std::move(e8));
    save_manifest(*out.u8, out_dir / kManifest8);
  }
  return out;
}

}  // namespace ccesar
