#include "ccesar/dataio/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ccesar/error.hpp"

namespace ccesar {

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw ManifestError("unknown split '" + std::string(s) + "'");
}

DatasetManifest::DatasetManifest(std::vector<ManifestEntry> entries) {
  for (auto& e : entries) add(std::move(e));
}

void DatasetManifest::add(ManifestEntry e) {
  const bool dup = std::any_of(entries_.begin(), entries_.end(),
                               [&](const ManifestEntry& x) { return x.image_path == e.image_path; });
  if (dup) throw ManifestError("duplicate image path " + e.image_path.string());
  entries_.push_back(std::move(e));
}

std::size_t DatasetManifest::count(CoastClass c, Split s) const {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [&](const ManifestEntry& e) {
    return e.label == c && e.split == s;
  }));
}

std::vector<ManifestEntry> DatasetManifest::select(Split s) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries_.begin(), entries_.end(), std::back_inserter(out), [&](const auto& e) { return e.split == s; });
  return out;
}

std::vector<ManifestEntry> DatasetManifest::select(Split s, CoastClass c) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries_.begin(), entries_.end(), std::back_inserter(out),
               [&](const auto& e) { return e.split == s && e.label == c; });
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  DatasetManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != 4) throw ManifestError(where + ": expected 4 comma-separated fields");
    ManifestEntry e;
    e.image_path = fields[0];
    e.mask_path = fields[1];
    if (e.image_path.is_relative()) e.image_path = base / e.image_path;
    if (e.mask_path.is_relative()) e.mask_path = base / e.mask_path;
    try {
      e.label = coast_class_from_string(fields[2]);
    } catch (const DomainError&) {
      throw ManifestError(where + ": unknown class '" + fields[2] + "'");
    }
    try {
      e.split = split_from_string(fields[3]);
    } catch (const ManifestError&) {
      throw ManifestError(where + ": unknown split '" + fields[3] + "'");
    }
    for (const auto& p : {e.image_path, e.mask_path})
      if (!std::filesystem::exists(p)) throw ManifestError(where + ": missing file " + p.string());
    m.add(std::move(e));
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw WriteError("cannot write manifest " + path.string());
  const auto base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    if (p.is_relative() || base.empty()) return p.generic_string();
    return p.lexically_relative(base).generic_string();
  };
  out << "# image_path,mask_path,class,split\n";
  for (const auto& e : m.entries())
    out << rel(e.image_path) << ',' << rel(e.mask_path) << ',' << to_string(e.label) << ',' << to_string(e.split)
        << '\n';
  if (!out) throw WriteError("failed writing manifest " + path.string());
}

}  // namespace ccesar
