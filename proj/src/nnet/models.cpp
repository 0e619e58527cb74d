#include "ccesar/nnet/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ccesar/error.hpp"
#include "ccesar/preprocess/preprocess.hpp"
#include "ccesar/seed.hpp"

namespace ccesar::nn {

// ---- specs and descriptor ----

void ClassifierSpec::validate() const {
  if (in_channels < 1 || in_channels > 2) throw ModelError("classifier in_channels must be 1 or 2");
  if (filters.empty()) throw ModelError("classifier needs at least one conv block");
  for (int f : filters)
    if (f < 1) throw ModelError("classifier filter counts must be positive");
  if (dense < 1) throw ModelError("classifier dense width must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ModelError("classifier dropout must be in [0,1)");
  if (input_size < (1 << filters.size())) throw ModelError("classifier input_size too small for its pooling stages");
}

void SegmenterSpec::validate() const {
  if (in_channels < 1 || in_channels > 2) throw ModelError("segmenter in_channels must be 1 or 2");
  if (depth < 1 || depth > 6) throw ModelError("segmenter depth must be in 1..6");
  if (base_filters < 1) throw ModelError("segmenter base_filters must be positive");
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) out.push_back(std::stoi(tok));
  return out;
}

}  // namespace

std::string ArchDescriptor::to_text() const {
  std::ostringstream o;
  if (kind == ModelKind::Classifier) {
    o << "kind=classifier\n"
      << "in_channels=" << classifier.in_channels << "\n"
      << "filters=" << join(classifier.filters) << "\n"
      << "dense=" << classifier.dense << "\n"
      << "dropout=" << fmt_double(classifier.dropout) << "\n"
      << "input_size=" << classifier.input_size << "\n"
      << "input_offset=" << fmt_double(classifier.input_offset) << "\n";
  } else {
    o << "kind=segmenter\n"
      << "in_channels=" << segmenter.in_channels << "\n"
      << "depth=" << segmenter.depth << "\n"
      << "base_filters=" << segmenter.base_filters << "\n"
      << "input_offset=" << fmt_double(segmenter.input_offset) << "\n";
  }
  o << "class_tag=" << class_tag << "\n"
    << "epochs=" << epochs << "\n"
    << "seed=" << seed << "\n";
  return o.str();
}

bool ArchDescriptor::operator==(const ArchDescriptor& o) const {
  if (kind != o.kind || class_tag != o.class_tag || epochs != o.epochs || seed != o.seed) return false;
  return kind == ModelKind::Classifier ? classifier == o.classifier : segmenter == o.segmenter;
}

ArchDescriptor ArchDescriptor::from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ModelError("bad descriptor line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ModelError("descriptor missing '" + k + "'");
    return it->second;
  };
  ArchDescriptor d;
  try {
    const auto kind = get("kind");
    if (kind == "classifier") {
      d.kind = ModelKind::Classifier;
      d.classifier.in_channels = std::stoi(get("in_channels"));
      d.classifier.filters = split_ints(get("filters"));
      d.classifier.dense = std::stoi(get("dense"));
      d.classifier.dropout = std::stod(get("dropout"));
      d.classifier.input_size = std::stoi(get("input_size"));
      d.classifier.input_offset = std::stod(get("input_offset"));
    } else if (kind == "segmenter") {
      d.kind = ModelKind::Segmenter;
      d.segmenter.in_channels = std::stoi(get("in_channels"));
      d.segmenter.depth = std::stoi(get("depth"));
      d.segmenter.base_filters = std::stoi(get("base_filters"));
      d.segmenter.input_offset = std::stod(get("input_offset"));
    } else {
      throw ModelError("unknown model kind '" + kind + "'");
    }
    d.class_tag = get("class_tag");
    d.epochs = std::stoi(get("epochs"));
    d.seed = std::stoull(get("seed"));
  } catch (const std::logic_error& e) {
    throw ModelError(std::string("malformed descriptor value: ") + e.what());
  }
  return d;
}

// ---- weight file ----

namespace {

constexpr char kMagic[] = "CCESAR-W1\n";

void put_u32(std::ostream& o, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  o.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ModelError("weight file truncated");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string get_string(std::istream& in, std::uint32_t limit) {
  const auto n = get_u32(in);
  if (n > limit) throw ModelError("weight file string too long");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw ModelError("weight file truncated");
  return s;
}

}  // namespace

void save_weights(const ModelWeights& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError("cannot write weights to " + path.string());
  out.write(kMagic, sizeof kMagic - 1);
  const auto desc = w.arch.to_text();
  put_u32(out, static_cast<std::uint32_t>(desc.size()));
  out.write(desc.data(), static_cast<std::streamsize>(desc.size()));
  put_u32(out, static_cast<std::uint32_t>(w.tensors.size()));
  for (const auto& t : w.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw WriteError("failed writing weights to " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open weights " + path.string());
  char magic[sizeof kMagic - 1];
  if (!in.read(magic, sizeof magic) || std::string(magic, sizeof magic) != kMagic)
    throw ModelError(path.string() + " is not a weight file");
  ModelWeights w;
  w.arch = ArchDescriptor::from_text(get_string(in, 1 << 16));
  const auto count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = get_string(in, 1 << 12);
    const auto rank = get_u32(in);
    if (rank > 8) throw ModelError("weight tensor rank too large");
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(static_cast<int>(get_u32(in)));
      n *= static_cast<std::size_t>(t.shape.back());
    }
    if (n > (std::size_t{1} << 28)) throw ModelError("weight tensor too large");
    t.values.resize(n);
    for (auto& v : t.values) v = std::bit_cast<float>(get_u32(in));
    w.tensors.push_back(std::move(t));
  }
  return w;
}

// ---- Network ----

template <class T>
ModelWeights Network<T>::export_weights() const {
  ModelWeights w;
  w.arch = descriptor();
  for (const auto& p : params_.all())
    w.tensors.push_back({p.name, p.shape, std::vector<float>(p.value.begin(), p.value.end())});
  return w;
}

template <class T>
void Network<T>::import_weights(const ModelWeights& w) {
  const auto mine = descriptor();
  if (w.arch.kind != mine.kind || w.arch.classifier != mine.classifier || w.arch.segmenter != mine.segmenter)
    throw ModelError("weights were saved for a different architecture");
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : w.tensors) by_name[t.name] = &t;
  for (auto& p : params_.all()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ModelError("weights missing tensor " + p.name);
    if (it->second->shape != p.shape) throw ModelError("shape mismatch for tensor " + p.name);
    std::copy(it->second->values.begin(), it->second->values.end(), p.value.begin());
  }
  if (by_name.size() != params_.size()) throw ModelError("weights contain unexpected tensors");
}

namespace {

template <class V>
void mix(std::uint64_t& h, const std::vector<V>& v) {
  for (auto x : v) h = splitmix64(h ^ static_cast<std::uint64_t>(x));
  h = splitmix64(h ^ v.size());
}

}  // namespace

// ---- Classifier ----

template <class T>
Classifier<T>::Classifier(const ClassifierSpec& spec, std::uint64_t seed) : spec_(spec), dropout_(spec.dropout) {
  spec_.validate();
  auto& ps = this->params_;
  int cin = spec_.in_channels;
  for (std::size_t b = 0; b < spec_.filters.size(); ++b) {
    const int f = spec_.filters[b];
    const auto n = "block" + std::to_string(b);
    Block blk;
    blk.conv1 = Conv2d<T>(ps, n + ".conv1", cin, f, 3);
    blk.bn1 = BatchNorm2d<T>(ps, n + ".bn1", f);
    blk.conv2 = Conv2d<T>(ps, n + ".conv2", f, f, 3);
    blk.bn2 = BatchNorm2d<T>(ps, n + ".bn2", f);
    blocks_.push_back(std::move(blk));
    cin = f;
  }
  fc1_ = Dense<T>(ps, "fc1", cin, spec_.dense);
  fc2_ = Dense<T>(ps, "fc2", spec_.dense, 1);

  std::mt19937_64 rng(derive_seed(seed, {1}));
  for (auto& b : blocks_) {
    b.conv1.init_he(ps, rng);
    b.bn1.init(ps);
    b.conv2.init_he(ps, rng);
    b.bn2.init(ps);
  }
  fc1_.init_he(ps, rng);
  fc2_.init_he(ps, rng);
  dropout_rng_.seed(derive_seed(seed, {2}));
}

template <class T>
ArchDescriptor Classifier<T>::descriptor() const {
  ArchDescriptor d;
  d.kind = ModelKind::Classifier;
  d.classifier = spec_;
  return d;
}

template <class T>
std::uint64_t Classifier<T>::activation_fingerprint() const {
  std::uint64_t h = 0;
  for (const auto& b : blocks_) {
    mix(h, b.relu1.pattern());
    mix(h, b.relu2.pattern());
    mix(h, b.pool.argmax());
  }
  mix(h, fc_relu_.pattern());
  return h;
}

template <class T>
Tensor<T> Classifier<T>::forward(const Tensor<T>& x, bool train) {
  const int min_size = 1 << blocks_.size();
  if (x.h < min_size || x.w < min_size)
    throw ShapeError("classifier input " + std::to_string(x.h) + "x" + std::to_string(x.w) + " is smaller than " +
                     std::to_string(min_size) + "x" + std::to_string(min_size));
  if (x.c != spec_.in_channels) throw ShapeError("classifier input channel count mismatch");
  auto& ps = this->params_;
  Tensor<T> h = x;
  const T off = static_cast<T>(spec_.input_offset);
  for (auto& v : h.data) v -= off;
  for (auto& b : blocks_) {
    h = b.conv1.forward(h, ps);
    h = b.bn1.forward(h, ps, train);
    b.relu1.forward_inplace(h);
    h = b.conv2.forward(h, ps);
    h = b.bn2.forward(h, ps, train);
    b.relu2.forward_inplace(h);
    h = b.pool.forward(h);
  }
  gap_h_ = h.h;
  gap_w_ = h.w;
  h = gap_forward(h);
  h = fc1_.forward(h, ps);
  fc_relu_.forward_inplace(h);
  h = dropout_.forward(h, train, dropout_rng_);
  return fc2_.forward(h, ps);
}

template <class T>
void Classifier<T>::backward(const Tensor<T>& dlogits) {
  auto& ps = this->params_;
  Tensor<T> d = fc2_.backward(dlogits, ps, true);
  d = dropout_.backward(d);
  fc_relu_.backward_inplace(d);
  d = fc1_.backward(d, ps, true);
  d = gap_backward(d, gap_h_, gap_w_);
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    auto& b = blocks_[i];
    d = b.pool.backward(d);
    b.relu2.backward_inplace(d);
    d = b.bn2.backward(d, ps);
    d = b.conv2.backward(d, ps, true);
    b.relu1.backward_inplace(d);
    d = b.bn1.backward(d, ps);
    d = b.conv1.backward(d, ps, i > 0);
  }
}

// ---- UNet ----

template <class T>
UNet<T>::UNet(const SegmenterSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  auto& ps = this->params_;
  auto make_dc = [&](const std::string& n, int cin, int f) {
    DoubleConv d;
    d.c1 = Conv2d<T>(ps, n + ".conv1", cin, f, 3);
    d.c2 = Conv2d<T>(ps, n + ".conv2", f, f, 3);
    return d;
  };
  int c = spec_.in_channels;
  std::vector<int> widths;
  for (int l = 0; l < spec_.depth; ++l) {
    const int f = spec_.base_filters << l;
    enc_.push_back(make_dc("enc" + std::to_string(l), c, f));
    pools_.emplace_back();
    widths.push_back(f);
    c = f;
  }
  bottleneck_ = make_dc("bottleneck", c, spec_.base_filters << spec_.depth);
  c = spec_.base_filters << spec_.depth;
  for (int l = spec_.depth - 1; l >= 0; --l) {
    const int f = widths[static_cast<std::size_t>(l)];
    Up u;
    const auto n = "dec" + std::to_string(l);
    u.conv = Conv2d<T>(ps, n + ".up", c, f, 3);
    u.dc = make_dc(n, 2 * f, f);
    u.skip_channels = f;
    dec_.push_back(std::move(u));
    c = f;
  }
  head_ = Conv2d<T>(ps, "head", c, 1, 1);

  std::mt19937_64 rng(derive_seed(seed, {3}));
  auto init_dc = [&](const DoubleConv& d) {
    d.c1.init_he(ps, rng);
    d.c2.init_he(ps, rng);
  };
  for (const auto& e : enc_) init_dc(e);
  init_dc(bottleneck_);
  for (const auto& u : dec_) {
    u.conv.init_he(ps, rng);
    init_dc(u.dc);
  }
  head_.init_he(ps, rng);
}

template <class T>
ArchDescriptor UNet<T>::descriptor() const {
  ArchDescriptor d;
  d.kind = ModelKind::Segmenter;
  d.segmenter = spec_;
  return d;
}

template <class T>
std::uint64_t UNet<T>::activation_fingerprint() const {
  std::uint64_t h = 0;
  auto dc = [&](const DoubleConv& d) {
    mix(h, d.r1.pattern());
    mix(h, d.r2.pattern());
  };
  for (const auto& e : enc_) dc(e);
  for (const auto& p : pools_) mix(h, p.argmax());
  dc(bottleneck_);
  for (const auto& u : dec_) dc(u.dc);
  return h;
}

template <class T>
Tensor<T> UNet<T>::run(DoubleConv& d, const Tensor<T>& x) {
  auto& ps = this->params_;
  Tensor<T> h = d.c1.forward(x, ps);
  d.r1.forward_inplace(h);
  h = d.c2.forward(h, ps);
  d.r2.forward_inplace(h);
  return h;
}

template <class T>
Tensor<T> UNet<T>::back(DoubleConv& d, const Tensor<T>& dy, bool need_dx) {
  auto& ps = this->params_;
  Tensor<T> g = dy;
  d.r2.backward_inplace(g);
  g = d.c2.backward(g, ps, true);
  d.r1.backward_inplace(g);
  return d.c1.backward(g, ps, need_dx);
}

template <class T>
Tensor<T> UNet<T>::forward(const Tensor<T>& x, bool /*train*/) {
  if (x.c != spec_.in_channels) throw ShapeError("segmenter input channel count mismatch");
  const int mult = 1 << spec_.depth;
  in_h_ = x.h;
  in_w_ = x.w;
  const int ph = (x.h + mult - 1) / mult * mult, pw = (x.w + mult - 1) / mult * mult;
  pad_h_ = ph - x.h;
  pad_w_ = pw - x.w;
  Tensor<T> h(x.c, x.n, ph, pw);
  const T off = static_cast<T>(spec_.input_offset);
  for (int ci = 0; ci < x.c; ++ci)
    for (int ni = 0; ni < x.n; ++ni)
      for (int yy = 0; yy < ph; ++yy)
        for (int xx = 0; xx < pw; ++xx)
          h.at(ci, ni, yy, xx) = x.at(ci, ni, reflect101(yy, x.h), reflect101(xx, x.w)) - off;

  auto& ps = this->params_;
  std::vector<Tensor<T>> skips;
  for (int l = 0; l < spec_.depth; ++l) {
    h = run(enc_[static_cast<std::size_t>(l)], h);
    skips.push_back(h);
    h = pools_[static_cast<std::size_t>(l)].forward(h);
  }
  h = run(bottleneck_, h);
  for (auto& u : dec_) {
    Tensor<T> up = u.conv.forward(upsample2_forward(h), ps);
    h = run(u.dc, concat_channels(skips.back(), up));
    skips.pop_back();
  }
  Tensor<T> z = head_.forward(h, ps);
  if (pad_h_ == 0 && pad_w_ == 0) return z;
  Tensor<T> out(1, x.n, x.h, x.w);
  for (int ni = 0; ni < x.n; ++ni)
    for (int yy = 0; yy < x.h; ++yy)
      for (int xx = 0; xx < x.w; ++xx) out.at(0, ni, yy, xx) = z.at(0, ni, yy, xx);
  return out;
}

template <class T>
void UNet<T>::backward(const Tensor<T>& dlogits) {
  auto& ps = this->params_;
  Tensor<T> dz = dlogits;
  if (pad_h_ || pad_w_) {
    dz = Tensor<T>(1, dlogits.n, in_h_ + pad_h_, in_w_ + pad_w_);
    for (int ni = 0; ni < dlogits.n; ++ni)
      for (int yy = 0; yy < in_h_; ++yy)
        for (int xx = 0; xx < in_w_; ++xx) dz.at(0, ni, yy, xx) = dlogits.at(0, ni, yy, xx);
  }
  Tensor<T> d = head_.backward(dz, ps, true);
  std::vector<Tensor<T>> dskips(static_cast<std::size_t>(spec_.depth));
  for (std::size_t i = dec_.size(); i-- > 0;) {
    auto& u = dec_[i];
    d = back(u.dc, d, true);
    Tensor<T> dskip, dup;
    split_channels(d, u.skip_channels, dskip, dup);
    dskips[static_cast<std::size_t>(spec_.depth) - 1 - i] = std::move(dskip);
    d = upsample2_backward(u.conv.backward(dup, ps, true));
  }
  d = back(bottleneck_, d, true);
  for (int l = spec_.depth - 1; l >= 0; --l) {
    d = pools_[static_cast<std::size_t>(l)].backward(d);
    const auto& ds = dskips[static_cast<std::size_t>(l)];
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += ds.data[i];
    d = back(enc_[static_cast<std::size_t>(l)], d, l > 0);
  }
}

// ---- helpers ----

template <class T>
std::unique_ptr<Classifier<T>> make_classifier(const ModelWeights& w) {
  if (w.arch.kind != ModelKind::Classifier) throw ModelError("weights do not describe a classifier");
  auto m = std::make_unique<Classifier<T>>(w.arch.classifier, w.arch.seed);
  m->import_weights(w);
  return m;
}

template <class T>
std::unique_ptr<UNet<T>> make_segmenter(const ModelWeights& w) {
  if (w.arch.kind != ModelKind::Segmenter) throw ModelError("weights do not describe a segmenter");
  auto m = std::make_unique<UNet<T>>(w.arch.segmenter, w.arch.seed);
  m->import_weights(w);
  return m;
}

template <class T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <class T>
Tensor<T> classifier_forward(Classifier<T>& model, const Tensor<T>& batch, bool train_mode) {
  Tensor<T> z = model.forward(batch, train_mode);
  for (auto& v : z.data) v = sigmoid(v);
  return z;
}

template <class T>
Tensor<T> unet_forward(UNet<T>& model, const Tensor<T>& batch) {
  Tensor<T> z = model.forward(batch, false);
  for (auto& v : z.data) v = sigmoid(v);
  return z;
}

template <class T>
double bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets, Tensor<T>* dlogits) {
  if (!logits.same_shape(targets)) throw ShapeError("loss: prediction and target shapes differ");
  const double n = static_cast<double>(logits.size());
  if (dlogits) *dlogits = Tensor<T>(logits.c, logits.n, logits.h, logits.w);
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = sigmoid(static_cast<double>(logits.data[i]));
    const double t = targets.data[i];
    const double pc = std::clamp(p, 1e-7, 1.0 - 1e-7);
    loss -= t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc);
    if (dlogits) dlogits->data[i] = static_cast<T>((p - t) / n);
  }
  return loss / n;
}

template <class T>
double gradients(Network<T>& model, const Tensor<T>& batch, const Tensor<T>& targets) {
  model.params().zero_grad();
  const Tensor<T> z = model.forward(batch, true);
  Tensor<T> dz;
  const double loss = bce_with_logits(z, targets, &dz);
  model.backward(dz);
  return loss;
}

#define CCESAR_INSTANTIATE(T)                                                               \
  template class Network<T>;                                                                \
  template class Classifier<T>;                                                             \
  template class UNet<T>;                                                                   \
  template std::unique_ptr<Classifier<T>> make_classifier<T>(const ModelWeights&);          \
  template std::unique_ptr<UNet<T>> make_segmenter<T>(const ModelWeights&);                 \
  template T sigmoid<T>(T);                                                                 \
  template Tensor<T> classifier_forward<T>(Classifier<T>&, const Tensor<T>&, bool);         \
  template Tensor<T> unet_forward<T>(UNet<T>&, const Tensor<T>&);                           \
  template double bce_with_logits<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);       \
  template double gradients<T>(Network<T>&, const Tensor<T>&, const Tensor<T>&);

CCESAR_INSTANTIATE(float)
CCESAR_INSTANTIATE(double)

#undef CCESAR_INSTANTIATE

}  // namespace ccesar::nn
