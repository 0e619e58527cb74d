#include <cstring>
#include <fstream>
#include <random>

#include "ccesar/dataio/manifest.hpp"
#include "ccesar/dataio/overlay.hpp"
#include "ccesar/dataio/raster.hpp"
#include "ccesar/dataio/tiff.hpp"
#include "ccesar/error.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ccesar;

namespace {

// Minimal big-endian TIFF writer used as an independent fixture source.
struct BeWriter {
  std::vector<std::uint8_t> bytes;
  void u16(std::uint16_t v) {
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    bytes.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) bytes.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void entry(std::uint16_t tag, std::uint16_t type, std::uint32_t count, std::uint32_t value) {
    u16(tag);
    u16(type);
    u32(count);
    if (type == 3 && count == 1) {
      u16(static_cast<std::uint16_t>(value));
      u16(0);
    } else {
      u32(value);
    }
  }
};

// 3x2 single-channel image, big-endian, with the given compression value.
std::vector<std::uint8_t> big_endian_u8_tiff(std::uint16_t compression) {
  BeWriter w;
  w.bytes = {'M', 'M'};
  w.u16(42);
  w.u32(8 + 6);  // IFD right after the pixel data
  for (std::uint8_t v : {1, 2, 3, 4, 5, 250}) w.bytes.push_back(v);
  w.u16(8);
  w.entry(256, 3, 1, 3);
  w.entry(257, 3, 1, 2);
  w.entry(258, 3, 1, 8);
  w.entry(259, 3, 1, compression);
  w.entry(262, 3, 1, 1);
  w.entry(273, 4, 1, 8);
  w.entry(277, 3, 1, 1);
  w.entry(279, 4, 1, 6);
  w.u32(0);
  return w.bytes;
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("tiff round-trips a 4x3 F32 raster") {
  auto dir = testutil::scratch_dir("tiff_f32");
  std::vector<float> px;
  for (int i = 0; i < 12; ++i) px.push_back(0.1f * static_cast<float>(i) - 0.35f);
  Raster r(4, 3, 1, PixelDepth::F32, px);
  write_tiff(r, dir / "a.tif");
  const Raster back = read_tiff(dir / "a.tif");
  CHECK(back == r);
  CHECK(back.width() == 4);
  CHECK(back.height() == 3);
}

TEST_CASE("tiff 1x1 U8 zero") {
  auto dir = testutil::scratch_dir("tiff_1x1");
  write_tiff(Raster(1, 1, 1, PixelDepth::U8, std::vector<float>{0.0f}), dir / "a.tif");
  const Raster back = read_tiff(dir / "a.tif");
  CHECK(back.width() == 1);
  CHECK(back.height() == 1);
  CHECK(back.depth() == PixelDepth::U8);
  CHECK(back.at(0, 0) == 0.0f);
}

TEST_CASE("tiff U8 checkerboard and F32 ramp round-trip") {
  auto dir = testutil::scratch_dir("tiff_patterns");
  Raster board(8, 8, 1, PixelDepth::U8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) board.at(y, x) = ((x + y) % 2) ? 255.0f : 0.0f;
  write_tiff(board, dir / "board.tif");
  CHECK(read_tiff(dir / "board.tif") == board);

  Raster ramp(5, 7, 1, PixelDepth::F32);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 5; ++x) ramp.at(y, x) = 1.5f * x - 0.25f * y + 1e-3f;
  write_tiff(ramp, dir / "ramp.tif");
  CHECK(read_tiff(dir / "ramp.tif") == ramp);
}

TEST_CASE("tiff round-trip property over random rasters, both depths, 1-2 channels, with geo tags") {
  auto dir = testutil::scratch_dir("tiff_prop");
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = std::uniform_int_distribution<int>(1, 23)(rng);
    const int h = std::uniform_int_distribution<int>(1, 17)(rng);
    const int c = std::uniform_int_distribution<int>(1, 2)(rng);
    const bool u8 = trial % 2 == 0;
    Raster r(w, h, c, u8 ? PixelDepth::U8 : PixelDepth::F32);
    for (auto& v : r.pixels())
      v = u8 ? static_cast<float>(std::uniform_int_distribution<int>(0, 255)(rng))
             : std::normal_distribution<float>(0.0f, 100.0f)(rng);
    if (trial % 3 == 0) r.set_geo_bbox(GeoBoundingBox{10.0, 50.0, 10.0 + 0.001 * w, 50.0 + 0.001 * h});
    const auto path = dir / ("r" + std::to_string(trial) + ".tif");
    write_tiff(r, path);
    const Raster back = read_tiff(path);
    CHECK(back.width() == r.width());
    CHECK(back.channels() == r.channels());
    CHECK(back.pixels().size() == r.pixels().size());
    CHECK(std::equal(back.pixels().begin(), back.pixels().end(), r.pixels().begin()));
    CHECK(back.geo_bbox().has_value() == r.geo_bbox().has_value());
    if (r.geo_bbox()) {
      CHECK(back.geo_bbox()->min_lon == doctest::Approx(r.geo_bbox()->min_lon).epsilon(1e-12));
      CHECK(back.geo_bbox()->max_lat == doctest::Approx(r.geo_bbox()->max_lat).epsilon(1e-12));
      CHECK(back.geo_bbox()->max_lon == doctest::Approx(r.geo_bbox()->max_lon).epsilon(1e-12));
      CHECK(back.geo_bbox()->min_lat == doctest::Approx(r.geo_bbox()->min_lat).epsilon(1e-12));
    }
  }
}

TEST_CASE("tiff reads big-endian files and rejects compression") {
  auto dir = testutil::scratch_dir("tiff_be");
  write_bytes(dir / "be.tif", big_endian_u8_tiff(1));
  const Raster r = read_tiff(dir / "be.tif");
  CHECK(r.width() == 3);
  CHECK(r.height() == 2);
  CHECK(r.at(0, 0) == 1.0f);
  CHECK(r.at(1, 2) == 250.0f);

  write_bytes(dir / "lzw.tif", big_endian_u8_tiff(5));
  CHECK_THROWS_AS(read_tiff(dir / "lzw.tif"), UnsupportedTiff);
}

TEST_CASE("tiff malformed inputs") {
  auto dir = testutil::scratch_dir("tiff_bad");
  write_bytes(dir / "short.tif", {'I', 'I', 42});
  CHECK_THROWS_AS(read_tiff(dir / "short.tif"), MalformedTiff);
  auto bytes = big_endian_u8_tiff(1);
  bytes.resize(bytes.size() - 20);
  write_bytes(dir / "trunc.tif", bytes);
  CHECK_THROWS_AS(read_tiff(dir / "trunc.tif"), MalformedTiff);
}

TEST_CASE("tiff replaces NaN with zero") {
  auto dir = testutil::scratch_dir("tiff_nan");
  Raster r(2, 1, 1, PixelDepth::F32, std::vector<float>{1.0f, 2.0f});
  write_tiff(r, dir / "a.tif");
  // Patch the second float (pixel data begins at offset 8) to NaN.
  std::fstream f(dir / "a.tif", std::ios::in | std::ios::out | std::ios::binary);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  f.seekp(12);
  f.write(reinterpret_cast<const char*>(&nan), 4);
  f.close();
  const Raster back = read_tiff(dir / "a.tif");
  CHECK(back.at(0, 0) == 1.0f);
  CHECK(back.at(0, 1) == 0.0f);
}

TEST_CASE("tiff write to unwritable path") {
  Raster r(2, 2, 1, PixelDepth::U8);
  CHECK_THROWS_AS(write_tiff(r, "/nonexistent_dir/x/y.tif"), WriteError);
}

TEST_CASE("raster invariants") {
  CHECK_THROWS_AS(Raster(2, 2, 1, PixelDepth::F32, std::vector<float>(3)), ShapeError);
  CHECK_THROWS_AS(Raster(1, 1, 3, PixelDepth::F32), ShapeError);
  CHECK_THROWS_AS(Raster(1, 1, 1, PixelDepth::U8, std::vector<float>{256.0f}), DomainError);
  CHECK_THROWS_AS(Raster(1, 1, 1, PixelDepth::F32, 0.0), DomainError);
  CHECK_THROWS_AS(BinaryMask::from_values(1, 1, {7}), DomainError);
  Raster r(1, 1, 1, PixelDepth::F32);
  CHECK_THROWS_AS(r.set_geo_bbox(GeoBoundingBox{1, 1, 0, 2}), GeoError);
}

TEST_CASE("manifest counts, round-trip and errors") {
  auto dir = testutil::scratch_dir("manifest");
  DatasetManifest m;
  auto touch = [&](const std::string& name) {
    std::ofstream(dir / name) << "x";
    return dir / name;
  };
  for (int i = 0; i < 240; ++i) {
    const auto img = touch("n" + std::to_string(i) + ".tif");
    const auto msk = touch("n" + std::to_string(i) + "_mask.tif");
    m.add({img, msk, CoastClass::Natural, i < 200 ? Split::Train : Split::Test});
  }
  CHECK(m.count(CoastClass::Natural, Split::Train) == 200);
  CHECK(m.count(CoastClass::Natural, Split::Test) == 40);
  CHECK(m.count(CoastClass::Built, Split::Train) == 0);
  CHECK(m.select(Split::Test).size() == 40);

  save_manifest(m, dir / "manifest.csv");
  const auto back = load_manifest(dir / "manifest.csv");
  CHECK(back == m);

  CHECK_THROWS_AS(m.add(m.entries().front()), ManifestError);

  std::ofstream(dir / "empty.csv") << "";
  const auto empty = load_manifest(dir / "empty.csv");
  CHECK(empty.empty());
  CHECK(empty.count(CoastClass::Built, Split::Test) == 0);

  std::ofstream(dir / "badclass.csv") << "n0.tif,n0_mask.tif,rocky,train\n";
  CHECK_THROWS_AS(load_manifest(dir / "badclass.csv"), ManifestError);
  std::ofstream(dir / "badsplit.csv") << "n0.tif,n0_mask.tif,natural,validation\n";
  CHECK_THROWS_AS(load_manifest(dir / "badsplit.csv"), ManifestError);
  std::ofstream(dir / "missing.csv") << "nope.tif,n0_mask.tif,natural,train\n";
  CHECK_THROWS_AS(load_manifest(dir / "missing.csv"), ManifestError);
  CHECK_THROWS_AS(load_manifest(dir / "does_not_exist.csv"), ManifestError);
}

TEST_CASE("overlay colours") {
  Raster r(16, 16, 1, PixelDepth::U8);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) r.at(y, x) = static_cast<float>(x * 10);
  auto count_color = [](const RgbImage& img, Rgb c) {
    int n = 0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) n += img.at(y, x) == c;
    return n;
  };

  SUBCASE("empty coastline draws no coastline colour") {
    BinaryMask m(16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 8; ++x) m.set_land(y, x, true);
    const auto img = render_overlay(r, m, {});
    CHECK(count_color(img, kCoastlineColor) == 0);
    CHECK(count_color(img, kMaskBoundaryColor) == 16);
  }
  SUBCASE("full-land mask has no boundary") {
    const auto img = render_overlay(r, BinaryMask(16, 16, BinaryMask::kLand), {});
    CHECK(count_color(img, kMaskBoundaryColor) == 0);
  }
  SUBCASE("known 3-pixel path") {
    CoastlinePath path{{{3, 4}, {4, 5}, {5, 5}}};
    const auto img = render_overlay(r, BinaryMask(16, 16), path);
    CHECK(count_color(img, kCoastlineColor) == 3);
    for (const auto& p : path.pixels) CHECK(img.at(p.row, p.col) == kCoastlineColor);
    CHECK(img.at(0, 1) == Rgb{10, 10, 10});
  }
  SUBCASE("dimension mismatch") { CHECK_THROWS_AS(render_overlay(r, BinaryMask(8, 16), {}), ShapeError); }
  SUBCASE("png file is written") {
    auto dir = testutil::scratch_dir("overlay");
    write_overlay_png(r, BinaryMask(16, 16), {}, dir / "o.png");
    std::ifstream in(dir / "o.png", std::ios::binary);
    char sig[8] = {};
    in.read(sig, 8);
    CHECK(std::memcmp(sig, "\x89PNG\r\n\x1a\n", 8) == 0);
  }
}
