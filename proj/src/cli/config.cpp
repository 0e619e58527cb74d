#include "ccesar/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ccesar/error.hpp"
#include "ccesar/seed.hpp"

namespace ccesar {

std::string_view to_string(Precision p) { return p == Precision::F32 ? "32bit" : "8bit"; }
std::string_view precision_tag(Precision p) { return p == Precision::F32 ? "32-bit" : "8-bit"; }

Precision precision_from_string(std::string_view s) {
  if (s == "32bit" || s == "32-bit" || s == "f32") return Precision::F32;
  if (s == "8bit" || s == "8-bit" || s == "u8") return Precision::U8;
  throw ConfigError("unknown precision '" + std::string(s) + "' (expected 8bit or 32bit)");
}

void RunConfig::propagate() {
  synth.seed = derive_seed(seed, {1});
  synth.workers = workers;
  train.seed = derive_seed(seed, {2});
}

void RunConfig::validate() const {
  synth.validate();
  preprocess.validate();
  train.validate();
  canny.validate();
  try {
    classifier.validate();
    segmenter.validate();
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  if (workers < 1) throw ConfigError("run.workers must be >= 1");
}

std::filesystem::path RunConfig::manifest_path() const {
  return data_dir / (precision == Precision::F32 ? kManifest32 : kManifest8);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": cannot parse '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto i = [](auto member) {
      return Setter([member](RunConfig& c, const std::string& k, const std::string& v) {
        member(c) = parse_number<std::remove_reference_t<decltype(member(c))>>(k, v);
      });
    };
    t["synth.image_size"] = i([](RunConfig& c) -> int& { return c.synth.image_size; });
    t["synth.n_train"] = i([](RunConfig& c) -> int& { return c.synth.n_train_per_class; });
    t["synth.n_test"] = i([](RunConfig& c) -> int& { return c.synth.n_test_per_class; });
    t["synth.speckle_looks"] = i([](RunConfig& c) -> int& { return c.synth.speckle_looks; });
    t["synth.land_fraction_min"] = i([](RunConfig& c) -> double& { return c.synth.land_fraction_range[0]; });
    t["synth.land_fraction_max"] = i([](RunConfig& c) -> double& { return c.synth.land_fraction_range[1]; });
    t["synth.emit_f32"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.synth.emit_f32 = parse_bool(k, v);
    };
    t["synth.emit_u8"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.synth.emit_u8 = parse_bool(k, v);
    };
    t["preprocess.lee_window"] = i([](RunConfig& c) -> int& { return c.preprocess.lee_window; });
    t["preprocess.noise_cv"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "auto")
        c.preprocess.noise_cv.reset();
      else
        c.preprocess.noise_cv = parse_number<double>(k, v);
    };
    t["preprocess.upsample_factor"] = i([](RunConfig& c) -> double& { return c.preprocess.upsample_factor; });
    t["preprocess.epsilon_db_floor"] = i([](RunConfig& c) -> double& { return c.preprocess.epsilon_db_floor; });
    t["train.learning_rate"] = i([](RunConfig& c) -> double& { return c.train.learning_rate; });
    t["train.l2"] = i([](RunConfig& c) -> double& { return c.train.l2_coefficient; });
    t["train.epochs"] = i([](RunConfig& c) -> int& { return c.train.epochs; });
    t["train.batch_size"] = i([](RunConfig& c) -> int& { return c.train.batch_size; });
    t["train.loss"] = [](RunConfig& c, const std::string&, const std::string& v) { c.train.loss = v; };
    t["canny.tau_low"] = i([](RunConfig& c) -> double& { return c.canny.tau_low; });
    t["canny.tau_high"] = i([](RunConfig& c) -> double& { return c.canny.tau_high; });
    t["canny.sigma"] = i([](RunConfig& c) -> double& { return c.canny.gaussian_sigma; });
    t["canny.size"] = i([](RunConfig& c) -> int& { return c.canny.gaussian_size; });
    t["classifier.filters"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.classifier.filters = parse_int_list(k, v);
    };
    t["classifier.dense"] = i([](RunConfig& c) -> int& { return c.classifier.dense; });
    t["classifier.dropout"] = i([](RunConfig& c) -> double& { return c.classifier.dropout; });
    t["classifier.input_size"] = i([](RunConfig& c) -> int& { return c.classifier.input_size; });
    t["classifier.input_offset"] = i([](RunConfig& c) -> double& { return c.classifier.input_offset; });
    t["classifier.in_channels"] = i([](RunConfig& c) -> int& { return c.classifier.in_channels; });
    t["segmenter.depth"] = i([](RunConfig& c) -> int& { return c.segmenter.depth; });
    t["segmenter.base_filters"] = i([](RunConfig& c) -> int& { return c.segmenter.base_filters; });
    t["segmenter.input_offset"] = i([](RunConfig& c) -> double& { return c.segmenter.input_offset; });
    t["segmenter.in_channels"] = i([](RunConfig& c) -> int& { return c.segmenter.in_channels; });
    t["paths.data"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; };
    t["paths.weights"] = [](RunConfig& c, const std::string&, const std::string& v) { c.weights_dir = v; };
    t["paths.reports"] = [](RunConfig& c, const std::string&, const std::string& v) { c.report_dir = v; };
    t["run.seed"] = i([](RunConfig& c) -> std::uint64_t& { return c.seed; });
    t["run.workers"] = i([](RunConfig& c) -> int& { return c.workers; });
    t["run.precision"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.precision = precision_from_string(v);
    };
    t["run.overlays"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.overlays = parse_bool(k, v); };
    return t;
  }();
  return table;
}

}  // namespace

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'section.key = value'");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (value.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    it->second(base, key, value);
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string RunConfig::to_text() const {
  std::ostringstream o;
  o.precision(17);
  auto list = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  o << "synth.image_size = " << synth.image_size << "\n"
    << "synth.n_train = " << synth.n_train_per_class << "\n"
    << "synth.n_test = " << synth.n_test_per_class << "\n"
    << "synth.speckle_looks = " << synth.speckle_looks << "\n"
    << "synth.land_fraction_min = " << synth.land_fraction_range[0] << "\n"
    << "synth.land_fraction_max = " << synth.land_fraction_range[1] << "\n"
    << "preprocess.lee_window = " << preprocess.lee_window << "\n"
    << "preprocess.noise_cv = ";
  if (preprocess.noise_cv)
    o << *preprocess.noise_cv << "\n";
  else
    o << "auto\n";
  o << "preprocess.upsample_factor = " << preprocess.upsample_factor << "\n"
    << "preprocess.epsilon_db_floor = " << preprocess.epsilon_db_floor << "\n"
    << "train.learning_rate = " << train.learning_rate << "\n"
    << "train.l2 = " << train.l2_coefficient << "\n"
    << "train.epochs = " << train.epochs << "\n"
    << "train.batch_size = " << train.batch_size << "\n"
    << "train.loss = " << train.loss << "\n"
    << "canny.tau_low = " << canny.tau_low << "\n"
    << "canny.tau_high = " << canny.tau_high << "\n"
    << "canny.sigma = " << canny.gaussian_sigma << "\n"
    << "canny.size = " << canny.gaussian_size << "\n"
    << "classifier.filters = " << list(classifier.filters) << "\n"
    << "classifier.dense = " << classifier.dense << "\n"
    << "classifier.dropout = " << classifier.dropout << "\n"
    << "classifier.input_size = " << classifier.input_size << "\n"
    << "classifier.input_offset = " << classifier.input_offset << "\n"
    << "segmenter.depth = " << segmenter.depth << "\n"
    << "segmenter.base_filters = " << segmenter.base_filters << "\n"
    << "segmenter.input_offset = " << segmenter.input_offset << "\n"
    << "run.seed = " << seed << "\n"
    << "run.precision = " << to_string(precision) << "\n";
  return o.str();
}

}  // namespace ccesar
