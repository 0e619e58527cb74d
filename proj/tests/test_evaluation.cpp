#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "ccesar/error.hpp"
#include "ccesar/evaluation/evaluation.hpp"
#include "ccesar/synthgen/synthgen.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "stubs.hpp"
#include "test_util.hpp"

using namespace ccesar;

namespace {

std::vector<Sample> test_set(int per_class, int size) {
  PreprocessConfig pre;
  pre.upsample_factor = 1.0;
  std::vector<Sample> out;
  for (CoastClass c : {CoastClass::Natural, CoastClass::Built})
    for (int i = 0; i < per_class; ++i) {
      const auto s = c == CoastClass::Natural ? generate_natural(500 + i, size) : generate_built(500 + i, size);
      char name[32];
      std::snprintf(name, sizeof name, "%s_%04d", std::string(to_string(c)).c_str(), i);
      out.push_back({name, preprocess_pipeline(s.raster, pre), s.mask, c});
    }
  return out;
}

BinaryMask random_mask(std::mt19937_64& rng, int n) {
  BinaryMask m(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) m.set_land(y, x, rng() % 2);
  return m;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("iou examples") {
  BinaryMask left(64, 64), top(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      left.set_land(y, x, x < 32);
      top.set_land(y, x, y < 32);
    }
  CHECK(iou(left, left) == 1.0);
  CHECK(iou(left, top) == doctest::Approx(1024.0 / 3072.0).epsilon(1e-15));
  BinaryMask right(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 32; x < 64; ++x) right.set_land(y, x, true);
  CHECK(iou(left, right) == 0.0);
  CHECK(iou(BinaryMask(4, 4), BinaryMask(4, 4)) == 1.0);
  CHECK_THROWS_AS(iou(BinaryMask(4, 4), BinaryMask(4, 5)), ShapeError);
}

TEST_CASE("iou equals the counting oracle, is symmetric and grows with true positives") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 50; ++t) {
    BinaryMask a = random_mask(rng, 16), b = random_mask(rng, 16);
    CHECK(iou(a, b) == oracle::iou(a, b));
    CHECK(iou(a, b) == iou(b, a));
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (b.land(y, x) && !a.land(y, x)) {
          const double before = iou(a, b);
          a.set_land(y, x, true);
          CHECK(iou(a, b) >= before);
          y = 16;
          break;
        }
  }
}

TEST_CASE("classification accuracy") {
  std::vector<CoastClass> labels, pred;
  for (int i = 0; i < 40; ++i) {
    labels.push_back(CoastClass::Natural);
    pred.push_back(i < 27 ? CoastClass::Natural : CoastClass::Built);
  }
  for (int i = 0; i < 40; ++i) {
    labels.push_back(CoastClass::Built);
    pred.push_back(i < 33 ? CoastClass::Built : CoastClass::Natural);
  }
  const auto r = classification_accuracy(pred, labels);
  CHECK(*r.natural_pct == doctest::Approx(67.5));
  CHECK(*r.built_pct == doctest::Approx(82.5));
  CHECK(r.overall_pct == doctest::Approx(75.0));

  std::vector<CoastClass> l40(40, CoastClass::Natural), p40 = l40;
  for (int i = 0; i < 10; ++i) p40[i] = CoastClass::Built;
  CHECK(classification_accuracy(p40, l40).overall_pct == doctest::Approx(75.0));
  CHECK_FALSE(classification_accuracy(p40, l40).built_pct.has_value());
  CHECK(classification_accuracy(l40, l40).overall_pct == 100.0);
  CHECK_THROWS_AS(classification_accuracy({}, {}), MetricUndefined);
}

TEST_CASE("ccesar_infer routes on the 0.5 threshold") {
  const auto data = test_set(1, 32);
  stubs::ThresholdSegmenter land(0.5f);
  stubs::ThresholdSegmenter water(2.0f);  // never land
  stubs::ConstantClassifier low(0.2), high(0.9), edge(0.5);
  const auto a = ccesar_infer(data[0].image, low, land, water, {});
  CHECK(a.predicted == CoastClass::Natural);
  CHECK(a.mask.land_count() > 0u);
  const auto b = ccesar_infer(data[0].image, high, land, water, {});
  CHECK(b.predicted == CoastClass::Built);
  CHECK(b.mask.land_count() == 0u);
  CHECK(b.coastline.empty());
  CHECK(ccesar_infer(data[0].image, edge, land, water, {}).predicted == CoastClass::Built);
}

TEST_CASE("E2 with an oracle segmenter scores 100%") {
  const auto data = test_set(3, 32);
  stubs::OracleSegmenter oracle_seg(data);
  ModelSet models{nullptr, &oracle_seg, &oracle_seg, nullptr};
  const auto r = run_experiment(ExperimentId::E2, data, models, {});
  CHECK(r.report.overall.mean_iou_pct == 100.0);
  REQUIRE(r.report.rows.size() == 2u);
  CHECK(r.report.rows[0].images == 3u);
  CHECK(r.report.overall.mean_discrepancy->directed_px == 0.0);
  CHECK(r.report.overall.undefined == 0u);
}

TEST_CASE("E5 routing equivalences") {
  const auto data = test_set(4, 32);
  stubs::ThresholdSegmenter sn(0.45f), sb(0.6f);
  stubs::LabelClassifier perfect(data, false), inverted(data, true);
  ModelSet m{&perfect, &sn, &sb, nullptr};
  const auto e2 = run_experiment(ExperimentId::E2, data, m, {});
  const auto e3 = run_experiment(ExperimentId::E3, data, m, {});
  const auto e5 = run_experiment(ExperimentId::E5, data, m, {});
  CHECK(same_image_metrics(e5.report, e2.report));
  CHECK(e5.report.accuracy->overall_pct == 100.0);
  m.classifier = &inverted;
  const auto e5_bad = run_experiment(ExperimentId::E5, data, m, {});
  CHECK(same_image_metrics(e5_bad.report, e3.report));
  CHECK(e5_bad.report.accuracy->overall_pct == 0.0);
  CHECK_FALSE(same_image_metrics(e5_bad.report, e2.report));
}

TEST_CASE("row layout per experiment and missing models") {
  const auto data = test_set(2, 32);
  stubs::ThresholdSegmenter s(0.5f);
  stubs::ConstantClassifier c(0.1);
  const ModelSet all{&c, &s, &s, &s};
  const std::map<ExperimentId, std::size_t> rows{{ExperimentId::E1, 1}, {ExperimentId::E2, 2}, {ExperimentId::E3, 2},
                                                 {ExperimentId::E4, 2}, {ExperimentId::E5, 1}};
  const std::map<ExperimentId, std::size_t> images{{ExperimentId::E1, 4}, {ExperimentId::E2, 4}, {ExperimentId::E3, 4},
                                                   {ExperimentId::E4, 8}, {ExperimentId::E5, 4}};
  for (auto id : all_experiments()) {
    const auto r = run_experiment(id, data, all, {});
    CHECK(r.report.rows.size() == rows.at(id));
    CHECK(r.report.images.size() == images.at(id));
    CHECK(r.report.accuracy.has_value() == (id == ExperimentId::E5));
  }
  CHECK_THROWS_AS(run_experiment(ExperimentId::E1, data, ModelSet{&c, &s, &s, nullptr}, {}), ModelError);
  CHECK_THROWS_AS(run_experiment(ExperimentId::E2, data, ModelSet{&c, nullptr, &s, &s}, {}), ModelError);
  CHECK_THROWS_AS(run_experiment(ExperimentId::E5, data, ModelSet{nullptr, &s, &s, &s}, {}), ModelError);
  CHECK_THROWS_AS(run_experiment(ExperimentId::E1, {}, all, {}), DataError);
}

TEST_CASE("aggregates are recomputable from per-image rows") {
  const auto data = test_set(3, 32);
  stubs::ThresholdSegmenter s(0.5f);
  const auto r = run_experiment(ExperimentId::E4, data, ModelSet{nullptr, &s, &s, nullptr}, {});
  double sum = 0.0;
  for (const auto& i : r.report.images) {
    CHECK(i.iou >= 0.0);
    CHECK(i.iou <= 1.0);
    const auto& sample = *std::find_if(data.begin(), data.end(), [&](const Sample& d) { return d.name == i.image; });
    CHECK(i.iou == oracle::iou(s.segment(sample.image), sample.mask));
    sum += i.iou;
  }
  CHECK(r.report.overall.mean_iou_pct == doctest::Approx(100.0 * sum / r.report.images.size()).epsilon(1e-12));
  for (const auto& row : r.report.rows) {
    std::vector<const ImageRecord*> sel;
    for (const auto& i : r.report.images)
      if (i.row == row.row) sel.push_back(&i);
    CHECK(summarize(row.row, sel) == row);
  }
}

TEST_CASE("undefined discrepancies render as a dash with a count") {
  const auto data = test_set(2, 32);
  stubs::ThresholdSegmenter water(2.0f);
  EvalConfig cfg;
  cfg.seed = 5;
  const auto r = run_experiment(ExperimentId::E1, data, ModelSet{nullptr, nullptr, nullptr, &water}, cfg);
  CHECK(r.report.overall.undefined == 4u);
  CHECK_FALSE(r.report.overall.mean_discrepancy.has_value());
  const std::string text = format_report_text(r);
  CHECK(text.find("\u2014") != std::string::npos);
  CHECK(text.find("undefined discrepancy entries: 4") != std::string::npos);
  CHECK(format_report_csv(r).find("\u2014") != std::string::npos);
}

TEST_CASE("reports are written and reproducible") {
  const auto data = test_set(2, 32);
  stubs::ThresholdSegmenter s(0.5f);
  stubs::ConstantClassifier c(0.7);
  EvalConfig cfg;
  cfg.config_snapshot = "run.seed = 1\n";
  const ModelSet m{&c, &s, &s, &s};
  const auto dir = testutil::scratch_dir("reports");
  write_report(run_experiment(ExperimentId::E5, data, m, cfg), dir);
  const std::string first = read_file(dir / "E5.txt");
  const std::string csv = read_file(dir / "E5.csv");
  CHECK(first.find("classification accuracy") != std::string::npos);
  CHECK(first.find("run.seed = 1") != std::string::npos);
  CHECK(csv.rfind("experiment,precision,seed,row,image", 0) == 0);
  write_report(run_experiment(ExperimentId::E5, data, m, cfg), dir);
  CHECK(read_file(dir / "E5.txt") == first);
  CHECK(read_file(dir / "E5.csv") == csv);
}

TEST_CASE("worker count does not change results") {
  const auto data = test_set(3, 32);
  stubs::ThresholdSegmenter s(0.5f);
  EvalConfig one, three;
  three.workers = 3;
  const ModelSet m{nullptr, &s, &s, nullptr};
  CHECK(format_report_csv(run_experiment(ExperimentId::E4, data, m, one)) ==
        format_report_csv(run_experiment(ExperimentId::E4, data, m, three)));
}

TEST_CASE("image callback sees every record in order") {
  const auto data = test_set(2, 32);
  stubs::ThresholdSegmenter s(0.5f);
  EvalConfig cfg;
  std::vector<std::string> seen;
  cfg.on_image = [&](const ImageRecord& r, const Sample& sample, const BinaryMask& mask, const CoastlinePath&) {
    CHECK(r.image == sample.name);
    CHECK(iou(mask, sample.mask) == r.iou);
    seen.push_back(r.image);
  };
  const auto r = run_experiment(ExperimentId::E1, data, ModelSet{nullptr, nullptr, nullptr, &s}, cfg);
  REQUIRE(seen.size() == r.report.images.size());
  for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == r.report.images[i].image);
}

TEST_CASE("experiment ids") {
  CHECK(experiment_from_string("E3") == ExperimentId::E3);
  CHECK(to_string(ExperimentId::E5) == "E5");
  CHECK_THROWS_AS(experiment_from_string("E6"), ConfigError);
  CHECK(all_experiments().size() == 5u);
}
