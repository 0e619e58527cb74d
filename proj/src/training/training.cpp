#include "ccesar/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "ccesar/dataio/tiff.hpp"
#include "ccesar/error.hpp"
#include "ccesar/log.hpp"
#include "ccesar/nnet/inference.hpp"
#include "ccesar/parallel.hpp"
#include "ccesar/seed.hpp"

namespace ccesar {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(l2_coefficient >= 0.0) || !std::isfinite(l2_coefficient)) throw ConfigError("l2_coefficient must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (loss != "bce") throw ConfigError("unsupported loss '" + loss + "'");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0,1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be > 0");
}

double bce_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("prediction and target lengths differ");
  if (pred.empty()) throw ShapeError("empty prediction");
  constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], lo, hi);
    sum -= target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(pred.size());
}

template <class T>
void adam_update(std::span<T> params, std::span<const T> grads, AdamState& state, std::size_t slot,
                 const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("parameter and gradient lengths differ");
  if (state.step < 1) throw DomainError("Adam step counter must be advanced before the update");
  if (state.m.size() <= slot) {
    state.m.resize(slot + 1);
    state.v.resize(slot + 1);
  }
  auto& m = state.m[slot];
  auto& v = state.v[slot];
  if (m.size() != params.size()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
  }
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double w = params[i];
    const double g = static_cast<double>(grads[i]) + cfg.l2_coefficient * w;
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    const double mh = m[i] / c1, vh = v[i] / c2;
    params[i] = static_cast<T>(w - cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_epsilon));
  }
}

template <class T>
void adam_step(nn::ParamStore<T>& params, AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  std::size_t slot = 0;
  for (auto& p : params.all()) {
    if (!p.trainable) continue;
    adam_update<T>(std::span<T>(p.value), std::span<const T>(p.grad), state, slot++, cfg);
  }
}

template void adam_update<float>(std::span<float>, std::span<const float>, AdamState&, std::size_t,
                                 const TrainConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>, AdamState&, std::size_t,
                                  const TrainConfig&);
template void adam_step<float>(nn::ParamStore<float>&, AdamState&, const TrainConfig&);
template void adam_step<double>(nn::ParamStore<double>&, AdamState&, const TrainConfig&);

std::vector<Sample> load_samples(const DatasetManifest& manifest, Split split, const PreprocessConfig& pre,
                                 int workers) {
  pre.validate();
  const auto entries = manifest.select(split);
  std::vector<Sample> out(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    const auto& e = entries[i];
    Sample s;
    s.name = e.image_path.stem().string();
    s.label = e.label;
    const Raster raw = read_tiff(e.image_path);
    s.image = preprocess_pipeline(raw, pre);
    const BinaryMask truth = mask_from_raster(read_tiff(e.mask_path));
    if (truth.width() != raw.width() || truth.height() != raw.height())
      throw ShapeError("mask " + e.mask_path.string() + " does not match its image size");
    s.mask = resample_mask_nearest(truth, s.image.width(), s.image.height());
    out[i] = std::move(s);
  });
  return out;
}

void TrainingLog::write(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw WriteError("cannot write " + path.string());
  f << "epoch,loss,metric\n";
  char buf[96];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", e.epoch, e.loss, e.metric);
    f << buf;
  }
  if (!f) throw WriteError("failed writing " + path.string());
}

std::string_view class_tag(ClassFilter f) {
  switch (f) {
    case ClassFilter::Natural: return "natural";
    case ClassFilter::Built: return "built";
    default: return "mixed";
  }
}

ClassFilter class_filter_from_string(std::string_view s) {
  if (s == "natural") return ClassFilter::Natural;
  if (s == "built") return ClassFilter::Built;
  if (s == "both" || s == "mixed") return ClassFilter::Both;
  throw ConfigError("unknown class filter '" + std::string(s) + "'");
}

namespace {

// Fisher-Yates with a plain modulo draw so the order depends only on the
// engine output, not on the standard library's distribution code.
void shuffle(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
}

template <class Net, class MakeBatch, class Score>
void run_epochs(Net& net, std::size_t n, const TrainConfig& cfg, std::uint64_t shuffle_seed, MakeBatch make_batch,
                Score score, TrainingLog* log, const char* what) {
  AdamState adam;
  std::mt19937_64 rng(shuffle_seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0, hits = 0.0, total = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + bs)));
      nn::Tensor<float> x, t;
      make_batch(idx, x, t);
      net.params().zero_grad();
      const auto logits = net.forward(x, true);
      nn::Tensor<float> dlogits;
      const double loss = nn::bce_with_logits(logits, t, &dlogits);
      net.backward(dlogits);
      adam_step(net.params(), adam, cfg);
      if (!std::isfinite(loss)) throw DataError(std::string(what) + " training diverged (non-finite loss)");
      loss_sum += loss * static_cast<double>(idx.size());
      const auto [h, tot] = score(logits, t);
      hits += h;
      total += tot;
    }
    const EpochRecord rec{epoch, loss_sum / static_cast<double>(n), total > 0 ? hits / total : 0.0};
    if (log) log->epochs.push_back(rec);
    logger().info("{} epoch {}/{} loss {:.5f} metric {:.4f}", what, epoch, cfg.epochs, rec.loss, rec.metric);
  }
}

std::pair<double, double> agreement(const nn::Tensor<float>& logits, const nn::Tensor<float>& t) {
  double hits = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) hits += ((logits.data[i] >= 0.0f) == (t.data[i] >= 0.5f));
  return {hits, static_cast<double>(logits.size())};
}

}  // namespace

nn::ModelWeights train_classifier(const std::vector<Sample>& train, const nn::ClassifierSpec& spec,
                                  const TrainConfig& cfg, TrainingLog* log) {
  cfg.validate();
  spec.validate();
  if (train.empty()) throw DataError("no training samples for the classifier");
  const bool has_n = std::any_of(train.begin(), train.end(), [](auto& s) { return s.label == CoastClass::Natural; });
  const bool has_b = std::any_of(train.begin(), train.end(), [](auto& s) { return s.label == CoastClass::Built; });
  if (!has_n || !has_b) throw DataError("classifier training needs both natural and built samples");

  std::vector<Raster> inputs;
  inputs.reserve(train.size());
  for (const auto& s : train) {
    if (s.image.width() == spec.input_size && s.image.height() == spec.input_size)
      inputs.push_back(s.image);
    else
      inputs.push_back(resize_bilinear(s.image, spec.input_size, spec.input_size));
  }

  nn::Classifier<float> net(spec, derive_seed(cfg.seed, {101}));
  net.seed_dropout(derive_seed(cfg.seed, {102}));
  auto make_batch = [&](const std::vector<std::size_t>& idx, nn::Tensor<float>& x, nn::Tensor<float>& t) {
    std::vector<const Raster*> imgs;
    for (auto i : idx) imgs.push_back(&inputs[i]);
    x = batch_from_rasters(imgs, spec.in_channels);
    t = nn::Tensor<float>(1, static_cast<int>(idx.size()), 1, 1);
    for (std::size_t k = 0; k < idx.size(); ++k) t.data[k] = train[idx[k]].label == CoastClass::Built ? 1.0f : 0.0f;
  };
  logger().info("training classifier on {} images ({} epochs)", train.size(), cfg.epochs);
  run_epochs(net, train.size(), cfg, derive_seed(cfg.seed, {103}), make_batch, agreement, log, "classifier");

  auto w = net.export_weights();
  w.arch.class_tag = "mixed";
  w.arch.epochs = cfg.epochs;
  w.arch.seed = cfg.seed;
  return w;
}

nn::ModelWeights train_segmenter(const std::vector<Sample>& all, ClassFilter filter, const nn::SegmenterSpec& spec,
                                 const TrainConfig& cfg, TrainingLog* log) {
  cfg.validate();
  spec.validate();
  std::vector<const Sample*> train;
  for (const auto& s : all) {
    if (filter == ClassFilter::Both || (filter == ClassFilter::Natural) == (s.label == CoastClass::Natural))
      train.push_back(&s);
  }
  if (train.empty()) throw DataError("no training samples for the " + std::string(class_tag(filter)) + " segmenter");

  const std::uint64_t role = 200 + static_cast<std::uint64_t>(filter);
  nn::UNet<float> net(spec, derive_seed(cfg.seed, {role}));
  auto make_batch = [&](const std::vector<std::size_t>& idx, nn::Tensor<float>& x, nn::Tensor<float>& t) {
    std::vector<const Raster*> imgs;
    for (auto i : idx) imgs.push_back(&train[i]->image);
    x = batch_from_rasters(imgs, spec.in_channels);
    t = nn::Tensor<float>(1, x.n, x.h, x.w);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const BinaryMask& m = train[idx[k]]->mask;
      for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) t.at(0, static_cast<int>(k), y, xx) = m.land(y, xx) ? 1.0f : 0.0f;
    }
  };
  logger().info("training {} segmenter on {} images ({} epochs)", class_tag(filter), train.size(), cfg.epochs);
  run_epochs(net, train.size(), cfg, derive_seed(cfg.seed, {role, 1}), make_batch, agreement, log, "segmenter");

  auto w = net.export_weights();
  w.arch.class_tag = std::string(class_tag(filter));
  w.arch.epochs = cfg.epochs;
  w.arch.seed = cfg.seed;
  return w;
}

nn::ModelWeights train_classifier(const DatasetManifest& manifest, const PreprocessConfig& pre,
                                  const nn::ClassifierSpec& spec, const TrainConfig& cfg, TrainingLog* log) {
  return train_classifier(load_samples(manifest, Split::Train, pre), spec, cfg, log);
}

nn::ModelWeights train_segmenter(const DatasetManifest& manifest, const PreprocessConfig& pre, ClassFilter filter,
                                 const nn::SegmenterSpec& spec, const TrainConfig& cfg, TrainingLog* log) {
  return train_segmenter(load_samples(manifest, Split::Train, pre), filter, spec, cfg, log);
}

}  // namespace ccesar
