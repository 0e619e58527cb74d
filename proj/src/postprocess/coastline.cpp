#include "ccesar/postprocess/coastline.hpp"

#include <algorithm>
#include <fstream>

#include "ccesar/error.hpp"

namespace ccesar {

std::size_t EdgeMap::count() const {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
}

std::vector<PixelCoord> EdgeMap::pixels() const {
  std::vector<PixelCoord> out;
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (edge(y, x)) out.push_back({y, x});
  return out;
}

std::array<int, 4> CoastlinePath::bounding_box() const {
  std::array<int, 4> bb{0, 0, -1, -1};
  if (pixels.empty()) return bb;
  bb = {pixels.front().row, pixels.front().col, pixels.front().row, pixels.front().col};
  for (const auto& p : pixels) {
    bb[0] = std::min(bb[0], p.row);
    bb[1] = std::min(bb[1], p.col);
    bb[2] = std::max(bb[2], p.row);
    bb[3] = std::max(bb[3], p.col);
  }
  return bb;
}

void write_coastline_text(const CoastlinePath& path, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw WriteError("cannot write " + file.string());
  for (const auto& p : path.pixels) out << p.row << ',' << p.col << '\n';
  if (!out) throw WriteError("failed writing " + file.string());
}

}  // namespace ccesar
