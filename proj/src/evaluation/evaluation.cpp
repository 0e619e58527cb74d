#include "ccesar/evaluation/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "ccesar/error.hpp"
#include "ccesar/log.hpp"
#include "ccesar/parallel.hpp"

namespace ccesar {

namespace {
constexpr const char* kUndefined = "\u2014";
}

double iou(const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.width() != truth.width() || pred.height() != truth.height())
    throw ShapeError("IoU masks differ in size");
  std::size_t inter = 0, uni = 0;
  const auto a = pred.values(), b = truth.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] == BinaryMask::kLand, pb = b[i] == BinaryMask::kLand;
    inter += pa && pb;
    uni += pa || pb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

AccuracyReport classification_accuracy(std::span<const CoastClass> predictions, std::span<const CoastClass> labels) {
  if (predictions.size() != labels.size()) throw ShapeError("prediction and label counts differ");
  if (labels.empty()) throw MetricUndefined("accuracy of an empty set");
  std::size_t correct[2] = {0, 0}, total[2] = {0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = static_cast<int>(labels[i]);
    ++total[c];
    correct[c] += predictions[i] == labels[i];
  }
  AccuracyReport r;
  r.correct = correct[0] + correct[1];
  r.total = labels.size();
  r.overall_pct = 100.0 * static_cast<double>(r.correct) / static_cast<double>(r.total);
  if (total[0]) r.natural_pct = 100.0 * static_cast<double>(correct[0]) / static_cast<double>(total[0]);
  if (total[1]) r.built_pct = 100.0 * static_cast<double>(correct[1]) / static_cast<double>(total[1]);
  return r;
}

CoastlinePath extract_coastline(const BinaryMask& mask, const CannyConfig& cfg) {
  return longest_edge(canny(mask, cfg));
}

InferenceResult ccesar_infer(const Raster& image, CoastClassifier& classifier, LandSegmenter& natural,
                             LandSegmenter& built, const CannyConfig& cfg) {
  InferenceResult r;
  r.built_probability = classifier.built_probability(image);
  r.predicted = r.built_probability >= 0.5 ? CoastClass::Built : CoastClass::Natural;
  r.mask = (r.predicted == CoastClass::Built ? built : natural).segment(image);
  r.coastline = extract_coastline(r.mask, cfg);
  return r;
}

std::string to_string(ExperimentId id) { return "E" + std::to_string(static_cast<int>(id)); }

ExperimentId experiment_from_string(std::string_view s) {
  if (s.size() == 2 && (s[0] == 'E' || s[0] == 'e') && s[1] >= '1' && s[1] <= '5')
    return static_cast<ExperimentId>(s[1] - '0');
  throw ConfigError("unknown experiment '" + std::string(s) + "'");
}

std::vector<ExperimentId> all_experiments() {
  return {ExperimentId::E1, ExperimentId::E2, ExperimentId::E3, ExperimentId::E4, ExperimentId::E5};
}

RowSummary summarize(const std::string& row, const std::vector<const ImageRecord*>& records) {
  RowSummary s;
  s.row = row;
  s.images = records.size();
  double iou_sum = 0.0;
  Discrepancy d{};
  std::size_t defined = 0;
  for (const auto* r : records) {
    iou_sum += r->iou;
    if (!r->discrepancy) {
      ++s.undefined;
      continue;
    }
    ++defined;
    d.directed_px += r->discrepancy->directed_px;
    d.symmetric_px += r->discrepancy->symmetric_px;
    d.directed_km += r->discrepancy->directed_km;
    d.symmetric_km += r->discrepancy->symmetric_km;
  }
  if (!records.empty()) s.mean_iou_pct = 100.0 * iou_sum / static_cast<double>(records.size());
  if (defined) {
    const double n = static_cast<double>(defined);
    s.mean_discrepancy = Discrepancy{d.directed_px / n, d.symmetric_px / n, d.directed_km / n, d.symmetric_km / n};
  }
  return s;
}

namespace {

struct Job {
  std::string row;
  std::size_t sample = 0;
  LandSegmenter* model = nullptr;
  std::string model_name;
  std::optional<CoastClass> predicted;
};

LandSegmenter* require(LandSegmenter* s, const char* name, ExperimentId id) {
  if (!s) throw ModelError(to_string(id) + " needs the " + name + " segmenter");
  return s;
}

}  // namespace

ExperimentResult run_experiment(ExperimentId id, const std::vector<Sample>& test, const ModelSet& models,
                                const EvalConfig& cfg) {
  cfg.canny.validate();
  if (test.empty()) throw DataError("no test samples");

  std::vector<std::string> row_order;
  std::vector<Job> jobs;
  auto add_rows = [&](const std::string& row, LandSegmenter* seg, const char* name, std::optional<CoastClass> only) {
    row_order.push_back(row);
    for (std::size_t i = 0; i < test.size(); ++i)
      if (!only || test[i].label == *only) jobs.push_back({row, i, seg, name, std::nullopt});
  };
  switch (id) {
    case ExperimentId::E1:
      add_rows("S_mixed / all", require(models.mixed, "mixed", id), "S_mixed", std::nullopt);
      break;
    case ExperimentId::E2:
      add_rows("S_N / natural", require(models.natural, "natural", id), "S_N", CoastClass::Natural);
      add_rows("S_B / built", require(models.built, "built", id), "S_B", CoastClass::Built);
      break;
    case ExperimentId::E3:
      add_rows("S_N / built", require(models.natural, "natural", id), "S_N", CoastClass::Built);
      add_rows("S_B / natural", require(models.built, "built", id), "S_B", CoastClass::Natural);
      break;
    case ExperimentId::E4:
      add_rows("S_N / all", require(models.natural, "natural", id), "S_N", std::nullopt);
      add_rows("S_B / all", require(models.built, "built", id), "S_B", std::nullopt);
      break;
    case ExperimentId::E5: {
      if (!models.classifier) throw ModelError("E5 needs the classifier");
      LandSegmenter* sn = require(models.natural, "natural", id);
      LandSegmenter* sb = require(models.built, "built", id);
      row_order.push_back("CCESAR / all");
      for (std::size_t i = 0; i < test.size(); ++i) {
        const double p = models.classifier->built_probability(test[i].image);
        const CoastClass c = p >= 0.5 ? CoastClass::Built : CoastClass::Natural;
        jobs.push_back({row_order.back(), i, c == CoastClass::Built ? sb : sn, c == CoastClass::Built ? "S_B" : "S_N", c});
      }
      break;
    }
  }

  // Network inference stays on one thread; models keep per-call state.
  std::vector<BinaryMask> masks(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) masks[j] = jobs[j].model->segment(test[jobs[j].sample].image);

  std::vector<CoastlinePath> truth_lines(test.size());
  std::vector<char> truth_needed(test.size(), 0);
  for (const auto& j : jobs) truth_needed[j.sample] = 1;
  parallel_for(test.size(), cfg.workers, [&](std::size_t i) {
    if (truth_needed[i]) truth_lines[i] = extract_coastline(test[i].mask, cfg.canny);
  });

  std::vector<ImageRecord> records(jobs.size());
  std::vector<CoastlinePath> lines(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
    const Job& job = jobs[j];
    const Sample& s = test[job.sample];
    ImageRecord& r = records[j];
    r.row = job.row;
    r.image = s.name;
    r.truth = s.label;
    r.predicted = job.predicted;
    r.model = job.model_name;
    r.iou = iou(masks[j], s.mask);
    lines[j] = extract_coastline(masks[j], cfg.canny);
    try {
      r.discrepancy = avg_min_distance(lines[j], truth_lines[job.sample],
                                       s.image.ground_resolution_m());
    } catch (const MetricUndefined&) {
      r.discrepancy.reset();
    }
  });

  if (cfg.on_image)
    for (std::size_t j = 0; j < jobs.size(); ++j) cfg.on_image(records[j], test[jobs[j].sample], masks[j], lines[j]);

  ExperimentResult out;
  out.id = id;
  out.precision = cfg.precision;
  out.seed = cfg.seed;
  out.config_snapshot = cfg.config_snapshot;
  MetricsReport& rep = out.report;
  rep.images = std::move(records);
  std::vector<const ImageRecord*> all;
  for (const auto& row : row_order) {
    std::vector<const ImageRecord*> sel;
    for (const auto& r : rep.images)
      if (r.row == row) sel.push_back(&r);
    rep.rows.push_back(summarize(row, sel));
  }
  // Accumulate the overall figures in test-set order so that experiments which
  // visit the same images through different rows sum identically.
  for (const auto& r : rep.images) all.push_back(&r);
  std::stable_sort(all.begin(), all.end(), [&](const ImageRecord* a, const ImageRecord* b) {
    return jobs[static_cast<std::size_t>(a - rep.images.data())].sample <
           jobs[static_cast<std::size_t>(b - rep.images.data())].sample;
  });
  rep.overall = summarize("overall", all);
  if (id == ExperimentId::E5) {
    std::vector<CoastClass> pred, truth;
    for (const auto& r : rep.images) {
      pred.push_back(*r.predicted);
      truth.push_back(r.truth);
    }
    rep.accuracy = classification_accuracy(pred, truth);
  }
  logger().info("{} mean IoU {:.2f}% over {} images", to_string(id), rep.overall.mean_iou_pct, rep.images.size());
  return out;
}

bool same_image_metrics(const MetricsReport& a, const MetricsReport& b) {
  if (a.images.size() != b.images.size()) return false;
  auto key = [](const MetricsReport& r) {
    std::map<std::string, const ImageRecord*> m;
    for (const auto& i : r.images) m[i.image] = &i;
    return m;
  };
  const auto ka = key(a), kb = key(b);
  if (ka.size() != a.images.size() || kb.size() != b.images.size()) return false;
  for (const auto& [name, ra] : ka) {
    const auto it = kb.find(name);
    if (it == kb.end()) return false;
    const ImageRecord* rb = it->second;
    if (ra->truth != rb->truth || ra->model != rb->model || ra->iou != rb->iou || ra->discrepancy != rb->discrepancy)
      return false;
  }
  auto core = [](RowSummary s) {
    s.row.clear();
    return s;
  };
  return core(a.overall) == core(b.overall);
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string opt_class(const std::optional<CoastClass>& c) { return c ? std::string(to_string(*c)) : kUndefined; }

std::string pad(const std::string& s, std::size_t w, bool right = true) {
  // Width counts code points so the undefined marker aligns like one character.
  std::size_t len = 0;
  for (unsigned char ch : s) len += (ch & 0xC0) != 0x80;
  if (len >= w) return s;
  return right ? std::string(w - len, ' ') + s : s + std::string(w - len, ' ');
}

std::string describe(ExperimentId id) {
  switch (id) {
    case ExperimentId::E1: return "single segmenter trained on both classes";
    case ExperimentId::E2: return "class-specific segmenters on their own class";
    case ExperimentId::E3: return "class-specific segmenters on the other class";
    case ExperimentId::E4: return "class-specific segmenters on both classes";
    default: return "classifier followed by S_N or S_B";
  }
}

void summary_line(std::string& out, const RowSummary& s) {
  out += pad(s.row, 16, false) + pad(std::to_string(s.images), 7) + pad(fmt("%.2f", s.mean_iou_pct), 9);
  if (s.mean_discrepancy) {
    out += pad(fmt("%.4f", s.mean_discrepancy->directed_px), 11) + pad(fmt("%.5f", s.mean_discrepancy->directed_km), 11) +
           pad(fmt("%.4f", s.mean_discrepancy->symmetric_px), 11) + pad(fmt("%.5f", s.mean_discrepancy->symmetric_km), 11);
  } else {
    for (int i = 0; i < 4; ++i) out += pad(kUndefined, 11);
  }
  out += pad(std::to_string(s.undefined), 11) + "\n";
}

}  // namespace

std::string format_report_text(const ExperimentResult& r) {
  std::string out;
  out += "experiment " + to_string(r.id) + ": " + describe(r.id) + "\n";
  out += "precision " + r.precision + ", seed " + std::to_string(r.seed) + "\n\n";
  out += pad("row", 16, false) + pad("images", 7) + pad("IoU %", 9) + pad("disc px", 11) + pad("disc km", 11) +
         pad("sym px", 11) + pad("sym km", 11) + pad("undefined", 11) + "\n";
  for (const auto& s : r.report.rows) summary_line(out, s);
  if (r.report.rows.size() > 1) summary_line(out, r.report.overall);
  if (const auto& a = r.report.accuracy) {
    out += "\nclassification accuracy: overall " + fmt("%.2f", a->overall_pct) + " % (" + std::to_string(a->correct) +
           "/" + std::to_string(a->total) + "), natural " +
           (a->natural_pct ? fmt("%.2f", *a->natural_pct) + " %" : std::string(kUndefined)) + ", built " +
           (a->built_pct ? fmt("%.2f", *a->built_pct) + " %" : std::string(kUndefined)) + "\n";
  }
  out += "\n" + pad("image", 20, false) + pad("row", 16, false) + pad("class", 9, false) + pad("predicted", 11, false) +
         pad("model", 9, false) + pad("IoU", 8) + pad("disc px", 11) + pad("disc km", 11) + "\n";
  for (const auto& i : r.report.images) {
    out += pad(i.image, 20, false) + pad(i.row, 16, false) + pad(std::string(to_string(i.truth)), 9, false) +
           pad(opt_class(i.predicted), 11, false) + pad(i.model, 9, false) + pad(fmt("%.4f", i.iou), 8);
    if (i.discrepancy)
      out += pad(fmt("%.4f", i.discrepancy->directed_px), 11) + pad(fmt("%.5f", i.discrepancy->directed_km), 11);
    else
      out += pad(kUndefined, 11) + pad(kUndefined, 11);
    out += "\n";
  }
  out += "\nundefined discrepancy entries: " + std::to_string(r.report.overall.undefined) + "\n";
  if (!r.config_snapshot.empty()) out += "\nconfig\n" + r.config_snapshot + (r.config_snapshot.back() == '\n' ? "" : "\n");
  return out;
}

std::string format_report_csv(const ExperimentResult& r) {
  std::string out = "experiment,precision,seed,row,image,true_class,predicted_class,model,iou,disc_px,disc_km,sym_px,sym_km\n";
  const std::string head = to_string(r.id) + "," + r.precision + "," + std::to_string(r.seed) + ",";
  auto disc = [](const std::optional<Discrepancy>& d) {
    if (!d) return std::string(kUndefined) + "," + kUndefined + "," + kUndefined + "," + kUndefined;
    return fmt("%.6f", d->directed_px) + "," + fmt("%.6f", d->directed_km) + "," + fmt("%.6f", d->symmetric_px) + "," +
           fmt("%.6f", d->symmetric_km);
  };
  for (const auto& i : r.report.images)
    out += head + i.row + "," + i.image + "," + std::string(to_string(i.truth)) + "," + opt_class(i.predicted) + "," +
           i.model + "," + fmt("%.6f", i.iou) + "," + disc(i.discrepancy) + "\n";
  // Aggregate lines use image "ALL" and report IoU as a percentage.
  auto agg = [&](const RowSummary& s) {
    out += head + s.row + ",ALL," + kUndefined + "," + kUndefined + "," + kUndefined + "," + fmt("%.4f", s.mean_iou_pct) +
           "," + disc(s.mean_discrepancy) + "\n";
  };
  for (const auto& s : r.report.rows) agg(s);
  agg(r.report.overall);
  return out;
}

void write_report(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (const auto& [ext, body] : {std::pair{".txt", format_report_text(r)}, std::pair{".csv", format_report_csv(r)}}) {
    const auto path = dir / (to_string(r.id) + ext);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw WriteError("cannot write " + path.string());
    f << body;
    if (!f) throw WriteError("failed writing " + path.string());
  }
}

}  // namespace ccesar
