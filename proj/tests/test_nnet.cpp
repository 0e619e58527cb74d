#include <cmath>
#include <fstream>
#include <random>

#include "ccesar/error.hpp"
#include "ccesar/nnet/inference.hpp"
#include "ccesar/nnet/models.hpp"
#include "doctest.h"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace ccesar;
using namespace ccesar::nn;

namespace {

Tensor<double> random_tensor(std::mt19937_64& rng, int c, int n, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<double> t(c, n, h, w);
  for (auto& v : t.data) v = u(rng);
  return t;
}

ClassifierSpec tiny_classifier() {
  ClassifierSpec s;
  s.filters = {2, 2};
  s.dense = 4;
  s.input_size = 16;
  return s;
}

SegmenterSpec tiny_unet() {
  SegmenterSpec s;
  s.depth = 2;
  s.base_filters = 2;
  return s;
}

}  // namespace

TEST_CASE("conv2d matches a direct convolution") {
  ParamStore<double> ps;
  Conv2d<double> conv(ps, "c", 2, 3, 3);
  std::mt19937_64 rng(1);
  conv.init_he(ps, rng);
  for (auto& b : ps[1].value) b = 0.25;
  const auto x = random_tensor(rng, 2, 2, 5, 6);
  const auto y = conv.forward(x, ps);
  REQUIRE(y.c == 3);
  REQUIRE(y.h == 5);
  const auto& w = ps[0].value;
  for (int co = 0; co < 3; ++co)
    for (int n = 0; n < 2; ++n)
      for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 6; ++c) {
          double s = 0.25;
          for (int ci = 0; ci < 2; ++ci)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int yy = r + ky - 1, xx = c + kx - 1;
                if (yy < 0 || yy >= 5 || xx < 0 || xx >= 6) continue;
                s += w[((co * 2 + ci) * 3 + ky) * 3 + kx] * x.at(ci, n, yy, xx);
              }
          CHECK(y.at(co, n, r, c) == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("max pool and nearest upsampling") {
  Tensor<double> x(1, 1, 2, 4);
  x.data = {1, 5, 2, 0, 3, 4, 7, 8};
  MaxPool2<double> pool;
  const auto y = pool.forward(x);
  CHECK(y.w == 2);
  CHECK(y.data == nn::Buffer<double>{5, 8});
  Tensor<double> dy(1, 1, 1, 2);
  dy.data = {1.0, 2.0};
  CHECK(pool.backward(dy).data == nn::Buffer<double>{0, 1, 0, 0, 0, 0, 0, 2});

  const auto up = upsample2_forward(y);
  CHECK(up.data == nn::Buffer<double>{5, 5, 8, 8, 5, 5, 8, 8});
  CHECK(upsample2_backward(up).data == nn::Buffer<double>{20, 32});
}

TEST_CASE("batch norm normalises in training and uses running stats in eval") {
  ParamStore<double> ps;
  BatchNorm2d<double> bn(ps, "bn", 1);
  bn.init(ps);
  Tensor<double> x(1, 2, 1, 2);
  x.data = {1, 2, 3, 4};
  const auto y = bn.forward(x, ps, true);
  double m = 0, v = 0;
  for (double d : y.data) m += d / 4;
  for (double d : y.data) v += (d - m) * (d - m) / 4;
  CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v == doctest::Approx(1.25 / (1.25 + BatchNorm2d<double>::kEps)).epsilon(1e-9));
  // running mean moved 10% of the way to 2.5; running var towards the unbiased 5/3
  CHECK(ps[2].value[0] == doctest::Approx(0.25));
  CHECK(ps[3].value[0] == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0));
}

TEST_CASE("classifier analytic gradients agree with finite differences") {
  std::mt19937_64 rng(3);
  Classifier<double> net(tiny_classifier(), 3);
  const auto x = random_tensor(rng, 1, 4, 16, 16);
  Tensor<double> t(1, 4, 1, 1);
  t.data = {0, 1, 0, 1};
  // At h=1e-6 the difference quotient carries ~1e-10 of roundoff, so tiny
  // gradients are judged on absolute error through a 1e-6 floor.
  const auto fine = gradcheck::run(net, x, t, 1e-6, 1e-3, 1e-6);
  CHECK(fine.max_abs_grad > 1e-4);  // network not dead
  CHECK(fine.kink_free_max_rel < 1e-3);
  const auto coarse = gradcheck::run(net, x, t, 1e-3, 1e-3);
  CHECK(coarse.kink_free_max_rel < 1e-4);
}

TEST_CASE("U-Net analytic gradients agree with finite differences") {
  std::mt19937_64 rng(4);
  UNet<double> net(tiny_unet(), 4);
  const auto x = random_tensor(rng, 1, 1, 16, 16);
  Tensor<double> t(1, 1, 16, 16);
  for (auto& v : t.data) v = rng() % 2;
  // At h=1e-6 the difference quotient carries ~1e-10 of roundoff, so tiny
  // gradients are judged on absolute error through a 1e-6 floor.
  const auto fine = gradcheck::run(net, x, t, 1e-6, 1e-3, 1e-6);
  CHECK(fine.max_abs_grad > 1e-4);
  CHECK(fine.kink_free_max_rel < 1e-3);
  const auto coarse = gradcheck::run(net, x, t, 1e-3, 1e-3);
  CHECK(coarse.kink_free_max_rel < 1e-4);
}

TEST_CASE("U-Net handles sizes that are not a multiple of 2^depth") {
  UNet<float> net(tiny_unet(), 1);
  Tensor<float> x(1, 2, 13, 10, 0.3f);
  const auto y = net.forward(x, false);
  CHECK(y.c == 1);
  CHECK(y.n == 2);
  CHECK(y.h == 13);
  CHECK(y.w == 10);
  const auto p = unet_forward(net, x);
  for (float v : p.data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("classifier rejects inputs smaller than its pooling depth") {
  ClassifierSpec s;
  s.filters = {2, 2, 2, 2};
  s.input_size = 8;
  CHECK_THROWS_AS(s.validate(), ModelError);
  s.filters.clear();
  s.input_size = 16;
  CHECK_THROWS_AS(s.validate(), ModelError);
}

TEST_CASE("BCE with logits") {
  Tensor<double> z(1, 1, 1, 2), t(1, 1, 1, 2), dz;
  z.data = {0.0, 2.0};
  t.data = {1.0, 0.0};
  const double l = bce_with_logits(z, t, &dz);
  const double want = 0.5 * (std::log(2.0) + std::log(1.0 + std::exp(2.0)));
  CHECK(l == doctest::Approx(want).epsilon(1e-9));
  CHECK(dz.data[0] == doctest::Approx((0.5 - 1.0) / 2));
  CHECK(dz.data[1] == doctest::Approx(sigmoid(2.0) / 2));
  Tensor<double> bad(1, 1, 1, 3);
  CHECK_THROWS_AS(bce_with_logits(z, bad, &dz), ShapeError);
}

TEST_CASE("same seed gives the same initial weights") {
  Classifier<float> a(tiny_classifier(), 8), b(tiny_classifier(), 8), c(tiny_classifier(), 9);
  CHECK(a.export_weights() == b.export_weights());
  CHECK_FALSE(a.export_weights() == c.export_weights());
}

TEST_CASE("descriptor text round trip") {
  ArchDescriptor d;
  d.kind = ModelKind::Classifier;
  d.classifier.filters = {4, 8};
  d.classifier.input_size = 32;
  d.class_tag = "mixed";
  d.epochs = 7;
  d.seed = 123456789012345ULL;
  CHECK(ArchDescriptor::from_text(d.to_text()) == d);
  d.kind = ModelKind::Segmenter;
  d.segmenter.base_filters = 8;
  d.class_tag = "built";
  CHECK(ArchDescriptor::from_text(d.to_text()) == d);
  CHECK_THROWS_AS(ArchDescriptor::from_text("kind=unknown\n"), ModelError);
}

TEST_CASE("weights save/load round trip and import checks") {
  const auto dir = testutil::scratch_dir("weights");
  UNet<float> net(tiny_unet(), 5);
  auto w = net.export_weights();
  w.arch.class_tag = "natural";
  save_weights(w, dir / "n.ccw");
  const auto back = load_weights(dir / "n.ccw");
  CHECK(back == w);

  UNet<float> other(tiny_unet(), 6);
  other.import_weights(back);
  CHECK(other.export_weights().tensors == w.tensors);

  auto seg = make_segmenter<float>(back);
  CHECK(seg->spec() == tiny_unet());
  CHECK_THROWS_AS(make_classifier<float>(back), ModelError);

  auto missing = w;
  missing.tensors.pop_back();
  CHECK_THROWS_AS(other.import_weights(missing), ModelError);
  auto reshaped = w;
  reshaped.tensors.front().shape.front() += 1;
  CHECK_THROWS_AS(other.import_weights(reshaped), ModelError);

  std::ofstream(dir / "junk.ccw") << "not weights";
  CHECK_THROWS_AS(load_weights(dir / "junk.ccw"), ModelError);
}

TEST_CASE("inference wrappers") {
  Classifier<float> c(tiny_classifier(), 2);
  NetClassifier clf(c.export_weights());
  Raster img(40, 40, 1, PixelDepth::F32);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels()[i] = static_cast<float>((i % 7) / 7.0);
  const double p = clf.built_probability(img);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  CHECK(clf.built_probability(img) == p);  // eval mode is deterministic

  UNet<float> u(tiny_unet(), 2);
  NetSegmenter seg(u.export_weights());
  const auto probs = seg.land_probability(img);
  CHECK(probs.size() == img.size());
  const auto mask = seg.segment(img);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) CHECK(mask.land(y, x) == (probs[y * 40 + x] >= 0.5f));

  Raster two(8, 8, 2, PixelDepth::F32);
  CHECK(batch_from_rasters({&two}, 2).c == 2);
  Raster one(8, 8, 1, PixelDepth::F32);
  CHECK_THROWS_AS(batch_from_rasters({&one}, 2), ShapeError);
  Raster other(9, 8, 1, PixelDepth::F32);
  CHECK_THROWS_AS(batch_from_rasters({&one, &other}, 1), ShapeError);
}

TEST_CASE("zeroed classifier outputs exactly one half in eval mode") {
  Classifier<float> net(tiny_classifier(), 9);
  for (auto& p : net.params().all()) {
    const bool gamma = p.name.ends_with(".gamma") || p.name.ends_with(".running_var");
    std::fill(p.value.begin(), p.value.end(), gamma ? 1.0f : 0.0f);
  }
  std::mt19937_64 rng(1);
  Tensor<float> x(1, 3, 16, 16);
  for (auto& v : x.data) v = static_cast<float>(rng() % 1000) / 1000.0f;
  const auto p = classifier_forward(net, x, false);
  for (float v : p.data) CHECK(v == 0.5f);
}

TEST_CASE("identical inputs in one eval batch give identical outputs") {
  Classifier<float> net(tiny_classifier(), 4);
  std::mt19937_64 rng(2);
  Tensor<float> x(1, 2, 16, 16);
  for (int i = 0; i < 256; ++i) x.data[i] = x.data[256 + i] = static_cast<float>(rng() % 100) / 100.0f;
  const auto p = classifier_forward(net, x, false);
  CHECK(p.data[0] == p.data[1]);
}

TEST_CASE("dropout zeroes about rate of the units in training only") {
  Dropout<double> d(0.5);
  std::mt19937_64 rng(77);
  Tensor<double> x(1, 1, 1, 1000, 1.0);
  const auto y = d.forward(x, true, rng);
  const auto zeros = std::count(y.data.begin(), y.data.end(), 0.0);
  CHECK(std::abs(zeros / 1000.0 - 0.5) <= 0.05);
  CHECK(d.forward(x, false, rng).data == x.data);
}

TEST_CASE("U-Net keeps a 100x100 input at 100x100") {
  SegmenterSpec s = tiny_unet();
  s.depth = 3;
  UNet<float> net(s, 3);
  const auto y = net.forward(Tensor<float>(1, 1, 100, 100, 0.4f), false);
  CHECK(y.h == 100);
  CHECK(y.w == 100);
}

TEST_CASE("gradients have the shape of their parameters") {
  std::mt19937_64 rng(5);
  UNet<double> net(tiny_unet(), 5);
  Tensor<double> t(1, 2, 16, 16);
  for (auto& v : t.data) v = rng() % 2;
  gradients(net, random_tensor(rng, 1, 2, 16, 16), t);
  for (const auto& p : net.params().all()) {
    if (!p.trainable) continue;
    std::size_t n = 1;
    for (int d : p.shape) n *= static_cast<std::size_t>(d);
    CHECK(p.grad.size() == n);
    CHECK(p.value.size() == n);
  }
}
