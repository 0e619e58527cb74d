#include "ccesar/dataio/tiff.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "ccesar/error.hpp"
#include "ccesar/log.hpp"

namespace ccesar {

namespace {

enum FieldType : std::uint16_t {
  kByte = 1,
  kAscii = 2,
  kShort = 3,
  kLong = 4,
  kRational = 5,
  kSByte = 6,
  kUndefined = 7,
  kSShort = 8,
  kSLong = 9,
  kSRational = 10,
  kFloat = 11,
  kDouble = 12,
};

std::size_t type_size(std::uint16_t type) {
  switch (type) {
    case kByte:
    case kAscii:
    case kSByte:
    case kUndefined:
      return 1;
    case kShort:
    case kSShort:
      return 2;
    case kLong:
    case kSLong:
    case kFloat:
      return 4;
    case kRational:
    case kSRational:
    case kDouble:
      return 8;
    default:
      return 0;
  }
}

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& data, bool big_endian) : data_(data), big_endian_(big_endian) {}

  std::size_t size() const { return data_.size(); }

  void require(std::uint64_t offset, std::uint64_t len) const {
    if (offset > data_.size() || len > data_.size() - offset) throw MalformedTiff("offset points past end of file");
  }

  std::uint16_t u16(std::uint64_t off) const {
    require(off, 2);
    const auto* p = &data_[off];
    return big_endian_ ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }

  std::uint32_t u32(std::uint64_t off) const {
    require(off, 4);
    const auto* p = &data_[off];
    if (big_endian_)
      return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
    return (std::uint32_t{p[3]} << 24) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[1]} << 8) | p[0];
  }

  std::uint64_t u64(std::uint64_t off) const {
    const std::uint64_t a = u32(off), b = u32(off + 4);
    return big_endian_ ? (a << 32) | b : (b << 32) | a;
  }

  float f32(std::uint64_t off) const { return std::bit_cast<float>(u32(off)); }
  double f64(std::uint64_t off) const { return std::bit_cast<double>(u64(off)); }

  const std::uint8_t* ptr(std::uint64_t off) const { return &data_[off]; }

 private:
  const std::vector<std::uint8_t>& data_;
  bool big_endian_;
};

struct IfdEntry {
  std::uint16_t type = 0;
  std::uint32_t count = 0;
  std::uint64_t value_offset = 0;  // where the values live in the file
};

std::vector<double> read_values(const ByteReader& r, const IfdEntry& e) {
  const std::size_t sz = type_size(e.type);
  if (sz == 0) throw MalformedTiff("unknown IFD field type " + std::to_string(e.type));
  r.require(e.value_offset, std::uint64_t{e.count} * sz);
  std::vector<double> out;
  out.reserve(e.count);
  for (std::uint32_t i = 0; i < e.count; ++i) {
    const std::uint64_t off = e.value_offset + std::uint64_t{i} * sz;
    switch (e.type) {
      case kByte:
      case kUndefined:
      case kAscii:
        out.push_back(*r.ptr(off));
        break;
      case kSByte:
        out.push_back(static_cast<std::int8_t>(*r.ptr(off)));
        break;
      case kShort:
        out.push_back(r.u16(off));
        break;
      case kSShort:
        out.push_back(static_cast<std::int16_t>(r.u16(off)));
        break;
      case kLong:
        out.push_back(r.u32(off));
        break;
      case kSLong:
        out.push_back(static_cast<std::int32_t>(r.u32(off)));
        break;
      case kRational:
        out.push_back(r.u32(off + 4) == 0 ? 0.0 : static_cast<double>(r.u32(off)) / r.u32(off + 4));
        break;
      case kSRational: {
        const auto den = static_cast<std::int32_t>(r.u32(off + 4));
        out.push_back(den == 0 ? 0.0 : static_cast<double>(static_cast<std::int32_t>(r.u32(off))) / den);
        break;
      }
      case kFloat:
        out.push_back(r.f32(off));
        break;
      case kDouble:
        out.push_back(r.f64(off));
        break;
    }
  }
  return out;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedTiff("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Raster read_tiff(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() < 8) throw MalformedTiff(path.string() + ": file too short for a TIFF header");
  bool big_endian = false;
  if (bytes[0] == 'I' && bytes[1] == 'I')
    big_endian = false;
  else if (bytes[0] == 'M' && bytes[1] == 'M')
    big_endian = true;
  else
    throw MalformedTiff(path.string() + ": bad byte-order mark");
  const ByteReader r(bytes, big_endian);
  const auto magic = r.u16(2);
  if (magic == 43) throw UnsupportedTiff(path.string() + ": BigTIFF is not supported");
  if (magic != 42) throw MalformedTiff(path.string() + ": bad TIFF magic number");

  const std::uint64_t ifd = r.u32(4);
  const std::uint16_t n_entries = r.u16(ifd);
  r.require(ifd + 2, std::uint64_t{n_entries} * 12);
  std::map<std::uint16_t, IfdEntry> tags;
  for (std::uint16_t i = 0; i < n_entries; ++i) {
    const std::uint64_t base = ifd + 2 + std::uint64_t{i} * 12;
    IfdEntry e;
    const std::uint16_t tag = r.u16(base);
    e.type = r.u16(base + 2);
    e.count = r.u32(base + 4);
    const std::size_t sz = type_size(e.type);
    if (sz == 0) continue;  // unknown types belong to tags we do not interpret
    e.value_offset = (std::uint64_t{e.count} * sz <= 4) ? base + 8 : r.u32(base + 8);
    tags[tag] = e;
  }

  auto get = [&](std::uint16_t tag) -> std::vector<double> {
    auto it = tags.find(tag);
    if (it == tags.end()) return {};
    return read_values(r, it->second);
  };
  auto scalar = [&](std::uint16_t tag, std::optional<double> fallback) -> double {
    auto v = get(tag);
    if (v.empty()) {
      if (!fallback) throw MalformedTiff(path.string() + ": missing required tag " + std::to_string(tag));
      return *fallback;
    }
    return v.front();
  };

  const auto width = static_cast<std::int64_t>(scalar(tiff_tag::kImageWidth, std::nullopt));
  const auto height = static_cast<std::int64_t>(scalar(tiff_tag::kImageLength, std::nullopt));
  if (width < 1 || height < 1 || width > (1 << 20) || height > (1 << 20))
    throw MalformedTiff(path.string() + ": implausible image dimensions");

  if (const double c = scalar(tiff_tag::kCompression, 1.0); c != 1.0)
    throw UnsupportedTiff(path.string() + ": compression " + std::to_string(static_cast<int>(c)) + " (only 1 = none)");
  if (tags.contains(tiff_tag::kTileWidth)) throw UnsupportedTiff(path.string() + ": tiled layout");
  const int spp = static_cast<int>(scalar(tiff_tag::kSamplesPerPixel, 1.0));
  if (spp < 1 || spp > 2) throw UnsupportedTiff(path.string() + ": " + std::to_string(spp) + " samples per pixel");
  if (spp > 1 && scalar(tiff_tag::kPlanarConfiguration, 1.0) != 1.0)
    throw UnsupportedTiff(path.string() + ": planar sample layout");

  auto bps = get(tiff_tag::kBitsPerSample);
  if (bps.empty()) bps.assign(static_cast<std::size_t>(spp), 1.0);
  for (double b : bps)
    if (b != bps.front()) throw UnsupportedTiff(path.string() + ": mixed bits per sample");
  auto fmt = get(tiff_tag::kSampleFormat);
  if (fmt.empty()) fmt.assign(static_cast<std::size_t>(spp), 1.0);
  for (double f : fmt)
    if (f != fmt.front()) throw UnsupportedTiff(path.string() + ": mixed sample formats");

  PixelDepth depth;
  if (bps.front() == 8 && fmt.front() == 1)
    depth = PixelDepth::U8;
  else if (bps.front() == 32 && fmt.front() == 3)
    depth = PixelDepth::F32;
  else
    throw UnsupportedTiff(path.string() + ": only uint8 and float32 samples are supported");
  const std::size_t bytes_per_sample = depth == PixelDepth::U8 ? 1 : 4;

  const auto offsets = get(tiff_tag::kStripOffsets);
  const auto counts = get(tiff_tag::kStripByteCounts);
  if (offsets.empty() || offsets.size() != counts.size())
    throw MalformedTiff(path.string() + ": strip offsets/byte counts missing or inconsistent");
  auto rows_per_strip = static_cast<std::int64_t>(scalar(tiff_tag::kRowsPerStrip, static_cast<double>(height)));
  if (rows_per_strip < 1 || rows_per_strip > height) rows_per_strip = height;
  const std::size_t expected_strips = static_cast<std::size_t>((height + rows_per_strip - 1) / rows_per_strip);
  if (offsets.size() != expected_strips) throw MalformedTiff(path.string() + ": strip count does not match RowsPerStrip");

  const std::size_t row_bytes = static_cast<std::size_t>(width) * spp * bytes_per_sample;
  std::vector<float> pixels(static_cast<std::size_t>(width) * height * spp);
  std::size_t nonfinite = 0;
  for (std::size_t s = 0; s < expected_strips; ++s) {
    const std::int64_t row0 = static_cast<std::int64_t>(s) * rows_per_strip;
    const std::int64_t rows = std::min(rows_per_strip, height - row0);
    const std::size_t need = row_bytes * static_cast<std::size_t>(rows);
    if (counts[s] < static_cast<double>(need)) throw MalformedTiff(path.string() + ": strip shorter than its rows");
    const auto off = static_cast<std::uint64_t>(offsets[s]);
    r.require(off, need);
    const std::size_t first = static_cast<std::size_t>(row0) * width * spp;
    const std::size_t n = static_cast<std::size_t>(rows) * width * spp;
    for (std::size_t i = 0; i < n; ++i) {
      if (depth == PixelDepth::U8) {
        pixels[first + i] = *r.ptr(off + i);
      } else {
        float v = r.f32(off + i * 4);
        if (!std::isfinite(v)) {
          v = 0.0f;
          ++nonfinite;
        }
        pixels[first + i] = v;
      }
    }
  }
  if (nonfinite > 0)
    logger().warn("{}: replaced {} non-finite samples with 0", path.string(), nonfinite);

  Raster raster(static_cast<int>(width), static_cast<int>(height), spp, depth, std::move(pixels));

  const auto scale = get(tiff_tag::kModelPixelScale);
  const auto tie = get(tiff_tag::kModelTiepoint);
  if (!scale.empty() || !tie.empty()) {
    if (scale.size() < 2 || tie.size() < 6) throw MalformedTiff(path.string() + ": incomplete GeoTIFF tags");
    GeoBoundingBox bb;
    bb.min_lon = tie[3] - tie[0] * scale[0];
    bb.max_lat = tie[4] + tie[1] * scale[1];
    bb.max_lon = bb.min_lon + static_cast<double>(width) * scale[0];
    bb.min_lat = bb.max_lat - static_cast<double>(height) * scale[1];
    if (!bb.valid()) throw MalformedTiff(path.string() + ": GeoTIFF tags do not describe a valid lon/lat box");
    raster.set_geo_bbox(bb);
  }
  return raster;
}

namespace {

class ByteWriter {
 public:
  void u16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v & 0xff));
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void f64(double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void byte(std::uint8_t b) { buf_.push_back(b); }
  void align2() {
    if (buf_.size() % 2) buf_.push_back(0);
  }
  std::size_t pos() const { return buf_.size(); }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

struct OutEntry {
  std::uint16_t tag;
  std::uint16_t type;
  std::uint32_t count;
  std::uint32_t value;  // inline value (left-justified) or offset
};

std::uint32_t inline_shorts(std::uint16_t a, std::uint16_t b = 0) { return std::uint32_t{a} | (std::uint32_t{b} << 16); }

}  // namespace

void write_tiff(const Raster& raster, const std::filesystem::path& path) {
  const int spp = raster.channels();
  const bool f32 = raster.depth() == PixelDepth::F32;
  const std::uint16_t bits = f32 ? 32 : 8;
  const std::uint16_t format = f32 ? 3 : 1;

  ByteWriter w;
  w.byte('I');
  w.byte('I');
  w.u16(42);
  w.u32(0);  // IFD offset, patched below

  const std::uint32_t data_offset = static_cast<std::uint32_t>(w.pos());
  for (float v : raster.pixels()) {
    if (f32) {
      w.u32(std::bit_cast<std::uint32_t>(v));
    } else {
      w.byte(static_cast<std::uint8_t>(v));
    }
  }
  const auto data_bytes = static_cast<std::uint32_t>(w.pos() - data_offset);
  w.align2();

  std::uint32_t scale_offset = 0, tie_offset = 0;
  if (const auto& bb = raster.geo_bbox()) {
    scale_offset = static_cast<std::uint32_t>(w.pos());
    w.f64((bb->max_lon - bb->min_lon) / raster.width());
    w.f64((bb->max_lat - bb->min_lat) / raster.height());
    w.f64(0.0);
    tie_offset = static_cast<std::uint32_t>(w.pos());
    for (double d : {0.0, 0.0, 0.0, bb->min_lon, bb->max_lat, 0.0}) w.f64(d);
  }

  std::vector<OutEntry> entries = {
      {tiff_tag::kImageWidth, kLong, 1, static_cast<std::uint32_t>(raster.width())},
      {tiff_tag::kImageLength, kLong, 1, static_cast<std::uint32_t>(raster.height())},
      {tiff_tag::kBitsPerSample, kShort, static_cast<std::uint32_t>(spp), inline_shorts(bits, spp == 2 ? bits : 0)},
      {tiff_tag::kCompression, kShort, 1, inline_shorts(1)},
      {tiff_tag::kPhotometric, kShort, 1, inline_shorts(1)},
      {tiff_tag::kStripOffsets, kLong, 1, data_offset},
      {tiff_tag::kSamplesPerPixel, kShort, 1, inline_shorts(static_cast<std::uint16_t>(spp))},
      {tiff_tag::kRowsPerStrip, kLong, 1, static_cast<std::uint32_t>(raster.height())},
      {tiff_tag::kStripByteCounts, kLong, 1, data_bytes},
      {tiff_tag::kPlanarConfiguration, kShort, 1, inline_shorts(1)},
      {tiff_tag::kSampleFormat, kShort, static_cast<std::uint32_t>(spp), inline_shorts(format, spp == 2 ? format : 0)},
  };
  if (raster.geo_bbox()) {
    entries.push_back({tiff_tag::kModelPixelScale, kDouble, 3, scale_offset});
    entries.push_back({tiff_tag::kModelTiepoint, kDouble, 6, tie_offset});
  }

  const auto ifd_offset = static_cast<std::uint32_t>(w.pos());
  w.u16(static_cast<std::uint16_t>(entries.size()));
  for (const auto& e : entries) {
    w.u16(e.tag);
    w.u16(e.type);
    w.u32(e.count);
    w.u32(e.value);
  }
  w.u32(0);  // no further IFDs

  auto bytes = w.bytes();
  for (int i = 0; i < 4; ++i) bytes[4 + i] = static_cast<std::uint8_t>((ifd_offset >> (8 * i)) & 0xff);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WriteError("failed writing " + path.string());
}

}  // namespace ccesar
