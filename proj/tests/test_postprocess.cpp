#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "ccesar/error.hpp"
#include "ccesar/postprocess/canny.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ccesar;

namespace {

BinaryMask half_plane(int n) {
  BinaryMask m(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = n / 2; x < n; ++x) m.set_land(y, x, true);
  return m;
}

BinaryMask disk(int n, double cx, double cy, double r) {
  BinaryMask m(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) m.set_land(y, x, (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r);
  return m;
}

// Number of 8-connected components, by flood fill.
int components(const EdgeMap& e) {
  std::set<PixelCoord> left;
  for (const auto& p : e.pixels()) left.insert(p);
  int n = 0;
  while (!left.empty()) {
    ++n;
    std::vector<PixelCoord> stack{*left.begin()};
    left.erase(left.begin());
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const auto it = left.find({p.row + dy, p.col + dx});
          if (it == left.end()) continue;
          stack.push_back(*it);
          left.erase(it);
        }
    }
  }
  return n;
}

std::vector<PixelCoord> random_set(std::mt19937_64& rng, int count, int n) {
  std::uniform_int_distribution<int> u(0, n - 1);
  std::set<PixelCoord> s;
  while (static_cast<int>(s.size()) < count) s.insert({u(rng), u(rng)});
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("uniform input has no edges") {
  CHECK(canny(BinaryMask(20, 20)).count() == 0u);
  CHECK(canny(BinaryMask(20, 20, BinaryMask::kLand)).count() == 0u);
}

TEST_CASE("half-plane mask gives one vertical line") {
  const EdgeMap e = canny(half_plane(32));
  const auto px = e.pixels();
  CHECK(px.size() >= 28u);
  CHECK(px.size() <= 32u);
  std::set<int> cols;
  for (const auto& p : px) cols.insert(p.col);
  CHECK(cols.size() == 1u);
  CHECK(std::abs(*cols.begin() - 16) <= 1);
}

TEST_CASE("disk gives one closed loop of about its perimeter") {
  const EdgeMap e = canny(disk(64, 32.0, 32.0, 10.0));
  CHECK(components(e) == 1);
  const double perimeter = 2 * 3.14159265358979 * 10.0;
  CHECK(std::abs(static_cast<double>(e.count()) - perimeter) <= 0.2 * perimeter);
  // Closed: every edge pixel has at least two 8-neighbours on the edge.
  for (const auto& p : e.pixels()) {
    int nb = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if ((dy || dx) && e.edge(p.row + dy, p.col + dx)) ++nb;
    CHECK(nb >= 2);
  }
}

TEST_CASE("adding a constant leaves the edges unchanged") {
  std::vector<double> img(40 * 30);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 200.0);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) img[y * 40 + x] = (x > 13 ? 180.0 : 10.0) + 0.1 * u(rng);
  auto shifted = img;
  for (auto& v : shifted) v += 37.0;
  CHECK(canny(img, 40, 30) == canny(shifted, 40, 30));
}

TEST_CASE("magnitude of a full-contrast step is 255") {
  const auto m = half_plane(32);
  std::vector<double> img(m.values().begin(), m.values().end());
  const auto mag = canny_magnitude(img, 32, 32, {});
  CHECK(*std::max_element(mag.begin(), mag.end()) == doctest::Approx(255.0).epsilon(1e-9));
}

TEST_CASE("raster input: F32 on [0,1] is scaled like a mask, multi-channel rejected") {
  const BinaryMask m = half_plane(24);
  Raster f(24, 24, 1, PixelDepth::F32);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) f.at(y, x) = m.land(y, x) ? 1.0f : 0.0f;
  CHECK(canny(f) == canny(m));
  CHECK(canny(raster_from_mask(m)) == canny(m));
  CHECK_THROWS_AS(canny(Raster(8, 8, 2, PixelDepth::F32)), ShapeError);
}

TEST_CASE("config validation") {
  CannyConfig c;
  CHECK_NOTHROW(c.validate());
  c.tau_low = 200;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.tau_high = 300;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.gaussian_size = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("longest_edge") {
  CHECK(longest_edge(EdgeMap(10, 10)).empty());

  EdgeMap e(64, 64);
  for (int c = 0; c < 40; ++c) e.set(30, 10 + c);  // 40 pixels
  for (int r = 0; r < 12; ++r) e.set(2 + r, 2);    // 12 pixels
  const auto path = longest_edge(e);
  CHECK(path.size() == 40u);
  for (const auto& p : path.pixels) CHECK(p.row == 30);
  CHECK(path.bounding_box() == std::array<int, 4>{30, 10, 30, 49});

  EdgeMap single(16, 16);
  for (int i = 0; i < 10; ++i) single.set(i, i);  // diagonal: one 8-connected component
  CHECK(longest_edge(single).pixels == single.pixels());

  // Equal sizes: the component whose first row-major pixel comes first wins.
  EdgeMap tie(16, 16);
  for (int c = 0; c < 5; ++c) tie.set(8, c);
  for (int c = 0; c < 5; ++c) tie.set(3, 10 + c);
  CHECK(longest_edge(tie).pixels.front().row == 3);
}

TEST_CASE("avg_min_distance examples") {
  CoastlinePath a, b;
  for (int r = 0; r < 20; ++r) {
    a.pixels.push_back({r, 10});
    b.pixels.push_back({r, 13});
  }
  const auto d = avg_min_distance(a, b, 10.0);
  CHECK(d.directed_px == doctest::Approx(3.0));
  CHECK(d.directed_km == doctest::Approx(0.03));
  CHECK(d.symmetric_px == doctest::Approx(3.0));
  CHECK(avg_min_distance(a, a, 10.0).directed_px == 0.0);
  CHECK_THROWS_AS(avg_min_distance({}, b, 10.0), MetricUndefined);
  CHECK_THROWS_AS(avg_min_distance(a, {}, 10.0), MetricUndefined);
}

TEST_CASE("distance transform equals the brute-force double loop") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_set(rng, 20, 64), q = random_set(rng, 20, 64);
    CHECK(std::abs(directed_min_distance(p, q) - oracle::directed_distance(p, q)) < 1e-9);
    CoastlinePath pp{p}, qq{q};
    const auto d = avg_min_distance(pp, qq, 10.0);
    const double sym = 0.5 * (oracle::directed_distance(p, q) + oracle::directed_distance(q, p));
    CHECK(std::abs(d.symmetric_px - sym) < 1e-9);
  }
}

TEST_CASE("distance is translation equivariant") {
  std::mt19937_64 rng(7);
  const auto p = random_set(rng, 15, 30), q = random_set(rng, 25, 30);
  auto shift = [](std::vector<PixelCoord> v) {
    for (auto& c : v) {
      c.row += 17;
      c.col += 5;
    }
    return v;
  };
  CHECK(directed_min_distance(shift(p), shift(q)) == doctest::Approx(directed_min_distance(p, q)).epsilon(1e-12));
}

TEST_CASE("coastline text export") {
  const auto dir = testutil::scratch_dir("coast");
  CoastlinePath c{{{1, 2}, {3, 4}}};
  write_coastline_text(c, dir / "c.txt");
  std::ifstream f(dir / "c.txt");
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() == "1,2\n3,4\n");
  CHECK_THROWS_AS(write_coastline_text(c, dir / "missing" / "c.txt"), WriteError);
}
