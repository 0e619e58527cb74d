#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace ccesar {

struct PixelCoord {
  int row = 0;
  int col = 0;
  auto operator<=>(const PixelCoord&) const = default;
};

/// Boolean edge flags on a width x height grid.
class EdgeMap {
 public:
  EdgeMap() = default;
  EdgeMap(int width, int height) : width_(width), height_(height), flags_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool edge(int row, int col) const { return flags_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  void set(int row, int col, bool on = true) { flags_[static_cast<std::size_t>(row) * width_ + col] = on ? 1 : 0; }
  std::size_t count() const;
  std::vector<PixelCoord> pixels() const;

  bool operator==(const EdgeMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> flags_;
};

/// One 8-connected component of edge pixels (the extracted coastline), sorted
/// in (row, col) order. An empty path means nothing was detected.
struct CoastlinePath {
  std::vector<PixelCoord> pixels;

  bool empty() const { return pixels.empty(); }
  std::size_t size() const { return pixels.size(); }
  /// Inclusive bounding box {min_row, min_col, max_row, max_col}; undefined for empty paths.
  std::array<int, 4> bounding_box() const;

  bool operator==(const CoastlinePath&) const = default;
};

/// `row,col` per line.
void write_coastline_text(const CoastlinePath& path, const std::filesystem::path& file);

}  // namespace ccesar
