#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ccesar/dataio/raster.hpp"

namespace ccesar {

enum class Split { Train, Test };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct ManifestEntry {
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
  CoastClass label = CoastClass::Natural;
  Split split = Split::Train;

  bool operator==(const ManifestEntry&) const = default;
};

/// Dataset listing with per-(class, split) counts.
class DatasetManifest {
 public:
  DatasetManifest() = default;
  explicit DatasetManifest(std::vector<ManifestEntry> entries);

  /// Appends an entry; duplicate image paths are a ManifestError.
  void add(ManifestEntry e);

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::size_t count(CoastClass c, Split s) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Entries of one split, optionally restricted to one class, in file order.
  std::vector<ManifestEntry> select(Split s) const;
  std::vector<ManifestEntry> select(Split s, CoastClass c) const;

  bool operator==(const DatasetManifest&) const = default;

 private:
  std::vector<ManifestEntry> entries_;
};

// File format: UTF-8 text, one `image_path,mask_path,class,split` entry per
// line, `#` starts a comment. Relative paths resolve against the manifest's
// directory. load_manifest checks that every referenced file exists.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace ccesar
