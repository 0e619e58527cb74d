#include <fstream>
#include <sstream>

#include "ccesar/cli/workflow.hpp"
#include "ccesar/dataio/tiff.hpp"
#include "ccesar/error.hpp"
#include "ccesar/log.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ccesar;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(# small end-to-end run
synth.image_size = 16
synth.n_train = 3
synth.n_test = 2
preprocess.upsample_factor = 1
train.epochs = 1
train.batch_size = 4
classifier.filters = 2,2
classifier.dense = 4
classifier.input_size = 16
segmenter.depth = 2
segmenter.base_filters = 2
run.seed = 7
)";

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "run.cfg";
  std::ofstream(p) << body;
  return p;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ccesar");
  args.push_back("--log-level");
  args.push_back("warn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(kTiny);
  CHECK(c.synth.image_size == 16);
  CHECK(c.classifier.filters == std::vector<int>{2, 2});
  CHECK(c.seed == 7u);
  CHECK(c.preprocess.upsample_factor == 1.0);
  CHECK(parse_config(c.to_text()).to_text() == c.to_text());
  CHECK(parse_config("run.precision = 8bit\n").precision == Precision::U8);
  CHECK(parse_config("preprocess.noise_cv = 0.3\n").preprocess.noise_cv == 0.3);

  CHECK_THROWS_AS(parse_config("synth.colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("synth.image_size 16\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("synth.image_size = sixteen\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.epochs =\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("run.overlays = maybe\n"), ConfigError);
  CHECK_THROWS_AS(precision_from_string("16bit"), ConfigError);
}

TEST_CASE("seed fans out to sub-stages") {
  RunConfig a = parse_config("run.seed = 1\n"), b = parse_config("run.seed = 2\n");
  a.propagate();
  b.propagate();
  CHECK(a.synth.seed != b.synth.seed);
  CHECK(a.train.seed != b.train.seed);
  CHECK(a.synth.seed != a.train.seed);
}

TEST_CASE("malformed config exits 2 without writing anything") {
  const auto dir = testutil::scratch_dir("cli_bad");
  const auto cfg = write_config(dir, "synth.image_size = 16\nthis line is wrong\n");
  CHECK(cli({"synth", "--config", cfg.string(), "--out", (dir / "out").string()}) == 2);
  CHECK_FALSE(fs::exists(dir / "out"));

  const auto invalid = write_config(dir, "synth.image_size = 4\n");
  CHECK(cli({"synth", "--config", invalid.string(), "--out", (dir / "out").string()}) == 2);
  CHECK_FALSE(fs::exists(dir / "out"));

  CHECK(cli({"synth", "--precision", "12bit", "--out", (dir / "out").string()}) == 2);
  CHECK(cli({"nonsense"}) == 2);
  CHECK(cli({"train", "--role", "painter", "--out", (dir / "out").string()}) == 2);
  CHECK(cli({"experiment", "--id", "E9", "--out", (dir / "out").string()}) == 2);
  CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("missing inputs exit 3") {
  const auto dir = testutil::scratch_dir("cli_missing");
  CHECK(cli({"synth", "--config", (dir / "nope.cfg").string()}) == 3);
  CHECK(cli({"train", "--out", (dir / "empty").string()}) == 3);
  CHECK(cli({"extract", "--image", (dir / "missing.tif").string(), "--out", dir.string()}) == 3);
}

TEST_CASE("full run writes reports, weights and overlays; extract writes a coastline") {
  const auto dir = testutil::scratch_dir("cli_run");
  const auto cfg = write_config(dir, kTiny);
  const auto out = dir / "out";
  REQUIRE(cli({"run", "--config", cfg.string(), "--out", out.string()}) == 0);
  for (const char* id : {"E1", "E2", "E3", "E4", "E5"}) {
    CHECK(fs::exists(out / "reports" / (std::string(id) + ".txt")));
    CHECK(fs::exists(out / "reports" / (std::string(id) + ".csv")));
  }
  for (const char* role : {"classifier", "seg-natural", "seg-built", "seg-mixed"}) {
    CHECK(fs::exists(out / "weights" / (std::string(role) + ".ccw")));
    CHECK(fs::exists(out / "weights" / (std::string(role) + "_log.csv")));
  }
  const bool overlay = fs::exists(out / "reports" / "overlays" / "E5" / "natural_0000_S_N.png") ||
                       fs::exists(out / "reports" / "overlays" / "E5" / "natural_0000_S_B.png");
  CHECK(overlay);

  // Re-running the experiments reproduces the reports byte for byte.
  const std::string e4 = read_file(out / "reports" / "E4.csv");
  REQUIRE(cli({"experiment", "--config", cfg.string(), "--out", out.string()}) == 0);
  CHECK(read_file(out / "reports" / "E4.csv") == e4);
  REQUIRE(cli({"experiment", "--id", "E2", "--config", cfg.string(), "--out", out.string()}) == 0);

  const auto image = out / "data" / "images_32bit" / "test" / "natural_0000.tif";
  REQUIRE(fs::exists(image));
  REQUIRE(cli({"extract", "--image", image.string(), "--config", cfg.string(), "--out", out.string()}) == 0);
  CHECK(fs::exists(out / "reports" / "extract" / "natural_0000_coastline.txt"));
  CHECK(fs::exists(out / "reports" / "extract" / "natural_0000_overlay.png"));

  REQUIRE(cli({"preprocess", "--config", cfg.string(), "--out", out.string()}) == 0);
  CHECK(fs::exists(out / "data" / "preprocessed_32bit" / "manifest.csv"));

  REQUIRE(cli({"train", "--role", "seg-built", "--precision", "8bit", "--config", cfg.string(), "--out",
               (dir / "u8").string()}) == 3);  // no corpus there yet
}

TEST_CASE("experiment without weights exits 3") {
  const auto dir = testutil::scratch_dir("cli_noweights");
  const auto cfg = write_config(dir, kTiny);
  REQUIRE(cli({"synth", "--config", cfg.string(), "--out", dir.string()}) == 0);
  CHECK(fs::exists(dir / "data" / "manifest_32bit.csv"));
  CHECK(fs::exists(dir / "data" / "manifest_8bit.csv"));
  CHECK(cli({"experiment", "--id", "E1", "--config", cfg.string(), "--out", dir.string()}) == 3);
}

TEST_CASE("genmasks rasterises polygons for georeferenced rasters") {
  const auto dir = testutil::scratch_dir("cli_genmasks");
  fs::create_directories(dir / "rasters");
  Raster r(16, 16, 1, PixelDepth::F32);
  r.set_geo_bbox(GeoBoundingBox{10, 50, 11, 51});
  write_tiff(r, dir / "rasters" / "scene.tif");
  std::ofstream(dir / "land.txt") << "10 50; 10.5 50; 10.5 51; 10 51\n";
  REQUIRE(cli({"genmasks", "--rasters", (dir / "rasters").string(), "--polygons", (dir / "land.txt").string(),
               "--mask-out", (dir / "masks").string()}) == 0);
  const BinaryMask m = mask_from_raster(read_tiff(dir / "masks" / "scene_mask.tif"));
  CHECK(m.land_count() == 128u);
  CHECK(cli({"genmasks", "--rasters", (dir / "none").string(), "--polygons", (dir / "land.txt").string()}) == 3);
}

TEST_CASE("training role names") {
  CHECK(train_role_from_string("seg-mixed") == TrainRole::SegMixed);
  CHECK(to_string(TrainRole::Classifier) == "classifier");
  CHECK_THROWS_AS(train_role_from_string("x"), ConfigError);
}
