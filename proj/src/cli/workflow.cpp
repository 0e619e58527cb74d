#include "ccesar/cli/workflow.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <iostream>

#include "ccesar/dataio/overlay.hpp"
#include "ccesar/dataio/tiff.hpp"
#include "ccesar/error.hpp"
#include "ccesar/log.hpp"
#include "ccesar/maskgen/maskgen.hpp"

namespace fs = std::filesystem;

namespace ccesar {

std::string_view to_string(TrainRole r) {
  switch (r) {
    case TrainRole::Classifier: return "classifier";
    case TrainRole::SegNatural: return "seg-natural";
    case TrainRole::SegBuilt: return "seg-built";
    default: return "seg-mixed";
  }
}

TrainRole train_role_from_string(std::string_view s) {
  for (auto r : all_train_roles())
    if (to_string(r) == s) return r;
  throw ConfigError("unknown training role '" + std::string(s) + "'");
}

std::vector<TrainRole> all_train_roles() {
  return {TrainRole::Classifier, TrainRole::SegNatural, TrainRole::SegBuilt, TrainRole::SegMixed};
}

fs::path weights_file(const RunConfig& cfg, TrainRole role) {
  return cfg.weights_dir / (std::string(to_string(role)) + ".ccw");
}

namespace {

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw MissingInput(what + " not found: " + p.string());
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw WriteError("cannot create directory " + p.string() + ": " + ec.message());
}

DatasetManifest configured_manifest(const RunConfig& cfg) {
  require_file(cfg.manifest_path(), "manifest");
  return load_manifest(cfg.manifest_path());
}

ClassFilter filter_of(TrainRole r) {
  switch (r) {
    case TrainRole::SegNatural: return ClassFilter::Natural;
    case TrainRole::SegBuilt: return ClassFilter::Built;
    default: return ClassFilter::Both;
  }
}

nn::ModelWeights load_role(const RunConfig& cfg, TrainRole role) {
  const fs::path p = weights_file(cfg, role);
  require_file(p, std::string(to_string(role)) + " weights");
  return nn::load_weights(p);
}

}  // namespace

GeneratedCorpus cmd_synth(const RunConfig& cfg) {
  make_dir(cfg.data_dir);
  return generate_dataset(cfg.synth, cfg.data_dir);
}

std::size_t cmd_genmasks(const fs::path& raster_dir, const fs::path& polygon_file, const fs::path& out_dir) {
  if (!fs::is_directory(raster_dir)) throw MissingInput("raster directory not found: " + raster_dir.string());
  require_file(polygon_file, "polygon file");
  const PolygonSet land = load_polygons(polygon_file);
  std::vector<fs::path> rasters;
  for (const auto& e : fs::directory_iterator(raster_dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".tif" || ext == ".tiff")) rasters.push_back(e.path());
  }
  std::sort(rasters.begin(), rasters.end());
  make_dir(out_dir);
  for (const auto& p : rasters) {
    const BinaryMask m = generate_mask_for_raster(read_tiff(p), land);
    write_tiff(raster_from_mask(m), out_dir / (p.stem().string() + "_mask.tif"));
  }
  logger().info("wrote {} masks to {}", rasters.size(), out_dir.string());
  return rasters.size();
}

DatasetManifest cmd_preprocess(const DatasetManifest& manifest, const RunConfig& cfg, const fs::path& out_dir) {
  DatasetManifest out;
  for (Split split : {Split::Train, Split::Test}) {
    const auto entries = manifest.select(split);
    const auto samples = load_samples(manifest, split, cfg.preprocess, cfg.workers);
    const fs::path dir = out_dir / std::string(to_string(split));
    make_dir(dir);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const fs::path img = dir / (entries[i].image_path.stem().string() + ".tif");
      const fs::path mask = dir / (entries[i].image_path.stem().string() + "_mask.tif");
      write_tiff(samples[i].image, img);
      write_tiff(raster_from_mask(samples[i].mask), mask);
      out.add({img, mask, samples[i].label, split});
    }
  }
  save_manifest(out, out_dir / "manifest.csv");
  return out;
}

nn::ModelWeights cmd_train(TrainRole role, const std::vector<Sample>& train, const RunConfig& cfg) {
  TrainingLog log;
  nn::ModelWeights w = role == TrainRole::Classifier
                           ? train_classifier(train, cfg.classifier, cfg.train, &log)
                           : train_segmenter(train, filter_of(role), cfg.segmenter, cfg.train, &log);
  make_dir(cfg.weights_dir);
  nn::save_weights(w, weights_file(cfg, role));
  log.write(cfg.weights_dir / (std::string(to_string(role)) + "_log.csv"));
  return w;
}

nn::ModelWeights cmd_train(TrainRole role, const RunConfig& cfg) {
  const DatasetManifest m = configured_manifest(cfg);
  return cmd_train(role, load_samples(m, Split::Train, cfg.preprocess, cfg.workers), cfg);
}

namespace {

std::vector<ExperimentResult> evaluate(const std::vector<ExperimentId>& ids, const std::vector<Sample>& test,
                                       const RunConfig& cfg) {
  bool need[4] = {false, false, false, false};
  for (auto id : ids) {
    if (id == ExperimentId::E1) need[3] = true;
    if (id != ExperimentId::E1) need[1] = need[2] = true;
    if (id == ExperimentId::E5) need[0] = true;
  }
  std::unique_ptr<NetClassifier> clf;
  std::unique_ptr<NetSegmenter> sn, sb, sm;
  if (need[0]) clf = std::make_unique<NetClassifier>(load_role(cfg, TrainRole::Classifier));
  if (need[1]) sn = std::make_unique<NetSegmenter>(load_role(cfg, TrainRole::SegNatural));
  if (need[2]) sb = std::make_unique<NetSegmenter>(load_role(cfg, TrainRole::SegBuilt));
  if (need[3]) sm = std::make_unique<NetSegmenter>(load_role(cfg, TrainRole::SegMixed));
  const ModelSet models{clf.get(), sn.get(), sb.get(), sm.get()};

  make_dir(cfg.report_dir);
  std::vector<ExperimentResult> results;
  for (auto id : ids) {
    EvalConfig ec;
    ec.canny = cfg.canny;
    ec.workers = cfg.workers;
    ec.precision = std::string(precision_tag(cfg.precision));
    ec.seed = cfg.seed;
    ec.config_snapshot = cfg.to_text();
    if (cfg.overlays) {
      const fs::path dir = cfg.report_dir / "overlays" / to_string(id);
      make_dir(dir);
      ec.on_image = [dir](const ImageRecord& r, const Sample& s, const BinaryMask& mask, const CoastlinePath& line) {
        write_overlay_png(s.image, mask, line, dir / (r.image + "_" + r.model + ".png"));
      };
    }
    results.push_back(run_experiment(id, test, models, ec));
    write_report(results.back(), cfg.report_dir);
  }
  return results;
}

}  // namespace

std::vector<ExperimentResult> cmd_experiment(const std::vector<ExperimentId>& ids, const RunConfig& cfg) {
  const DatasetManifest m = configured_manifest(cfg);
  return evaluate(ids, load_samples(m, Split::Test, cfg.preprocess, cfg.workers), cfg);
}

InferenceResult cmd_extract(const fs::path& image, const RunConfig& cfg, const fs::path& out_dir) {
  require_file(image, "image");
  NetClassifier clf(load_role(cfg, TrainRole::Classifier));
  NetSegmenter sn(load_role(cfg, TrainRole::SegNatural));
  NetSegmenter sb(load_role(cfg, TrainRole::SegBuilt));
  const Raster pre = preprocess_pipeline(read_tiff(image), cfg.preprocess);
  InferenceResult r = ccesar_infer(pre, clf, sn, sb, cfg.canny);
  logger().info("{}: routed to {} (p_built {:.4f}), coastline of {} pixels", image.filename().string(),
                to_string(r.predicted), r.built_probability, r.coastline.size());
  make_dir(out_dir);
  const std::string stem = image.stem().string();
  write_coastline_text(r.coastline, out_dir / (stem + "_coastline.txt"));
  write_overlay_png(pre, r.mask, r.coastline, out_dir / (stem + "_overlay.png"));
  return r;
}

std::vector<ExperimentResult> run_pipeline(const RunConfig& cfg) {
  cmd_synth(cfg);
  const DatasetManifest m = configured_manifest(cfg);
  const auto train = load_samples(m, Split::Train, cfg.preprocess, cfg.workers);
  for (auto role : all_train_roles()) cmd_train(role, train, cfg);
  return evaluate(all_experiments(), load_samples(m, Split::Test, cfg.preprocess, cfg.workers), cfg);
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Two-stage SAR coastline extraction: classify the coastline type, then segment land and water."};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, precision, out_dir, log_level = "info";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  app.add_option("--config", config_path, "config file of 'section.key = value' lines");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--precision", precision, "dataset precision: 8bit or 32bit");
  app.add_option("--workers", workers, "worker threads for per-image stages");
  app.add_option("--out", out_dir, "output root; sets data/, weights/ and reports/ below it");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  auto* genmasks = app.add_subcommand("genmasks", "rasterise land polygons onto georeferenced images");
  std::string raster_dir, polygons, mask_out;
  genmasks->add_option("--rasters", raster_dir, "directory of GeoTIFF images")->required();
  genmasks->add_option("--polygons", polygons, "polygon file (text or GeoJSON)")->required();
  genmasks->add_option("--mask-out", mask_out, "output directory (default <data>/generated_masks)");
  auto* preprocess = app.add_subcommand("preprocess", "write preprocessed rasters for a manifest");
  std::string manifest_arg, pre_out;
  preprocess->add_option("--manifest", manifest_arg, "manifest (default: the configured precision's manifest)");
  preprocess->add_option("--pre-out", pre_out, "output directory (default <data>/preprocessed_<precision>)");
  auto* train = app.add_subcommand("train", "train one model role or all of them");
  std::string role = "all";
  train->add_option("--role", role, "classifier, seg-natural, seg-built, seg-mixed or all");
  auto* experiment = app.add_subcommand("experiment", "run E1..E5 and write reports");
  std::string exp_id = "all";
  experiment->add_option("--id", exp_id, "E1..E5 or all");
  auto* extract = app.add_subcommand("extract", "extract the coastline of a single image");
  std::string image, extract_out;
  extract->add_option("--image", image, "input TIFF")->required();
  extract->add_option("--extract-out", extract_out, "output directory (default <reports>/extract)");
  auto* run = app.add_subcommand("run", "synth, train every model and run all experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    logger().set_level(spdlog::level::from_str(log_level));
    RunConfig cfg;
    if (!config_path.empty()) {
      require_file(config_path, "config file");
      cfg = load_config(config_path);
    }
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (!precision.empty()) cfg.precision = precision_from_string(precision);
    if (!out_dir.empty()) {
      cfg.data_dir = fs::path(out_dir) / "data";
      cfg.weights_dir = fs::path(out_dir) / "weights";
      cfg.report_dir = fs::path(out_dir) / "reports";
    }
    cfg.propagate();
    cfg.validate();
    // Argument values are checked before anything is written.
    std::vector<TrainRole> roles;
    if (*train) roles = role == "all" ? all_train_roles() : std::vector<TrainRole>{train_role_from_string(role)};
    std::vector<ExperimentId> ids;
    if (*experiment) ids = exp_id == "all" ? all_experiments() : std::vector<ExperimentId>{experiment_from_string(exp_id)};

    if (*synth) {
      cmd_synth(cfg);
    } else if (*genmasks) {
      cmd_genmasks(raster_dir, polygons, mask_out.empty() ? cfg.data_dir / "generated_masks" : fs::path(mask_out));
    } else if (*preprocess) {
      const fs::path mpath = manifest_arg.empty() ? cfg.manifest_path() : fs::path(manifest_arg);
      require_file(mpath, "manifest");
      const fs::path out = pre_out.empty() ? cfg.data_dir / ("preprocessed_" + std::string(to_string(cfg.precision)))
                                           : fs::path(pre_out);
      cmd_preprocess(load_manifest(mpath), cfg, out);
    } else if (*train) {
      const DatasetManifest m = configured_manifest(cfg);
      const auto samples = load_samples(m, Split::Train, cfg.preprocess, cfg.workers);
      for (auto r : roles) cmd_train(r, samples, cfg);
    } else if (*experiment) {
      cmd_experiment(ids, cfg);
    } else if (*extract) {
      cmd_extract(image, cfg, extract_out.empty() ? cfg.report_dir / "extract" : fs::path(extract_out));
    } else if (*run) {
      run_pipeline(cfg);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error [%s]: %s\n", e.category().c_str(), e.what());
    return 2;
  } catch (const MissingInput& e) {
    std::fprintf(stderr, "error [%s]: %s\n", e.category().c_str(), e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", e.category().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [runtime]: %s\n", e.what());
    return 1;
  }
}

}  // namespace ccesar
