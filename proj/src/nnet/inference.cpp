#include "ccesar/nnet/inference.hpp"

#include "ccesar/error.hpp"
#include "ccesar/preprocess/preprocess.hpp"

namespace ccesar {

nn::Tensor<float> batch_from_rasters(const std::vector<const Raster*>& images, int channels) {
  if (images.empty()) throw ShapeError("empty batch");
  const int h = images.front()->height(), w = images.front()->width();
  nn::Tensor<float> t(channels, static_cast<int>(images.size()), h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Raster& r = *images[i];
    if (r.width() != w || r.height() != h) throw ShapeError("batch images differ in size");
    if (r.channels() < channels) throw ShapeError("image has fewer channels than the model expects");
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) t.at(c, static_cast<int>(i), y, x) = r.at(y, x, c);
  }
  return t;
}

BinaryMask LandSegmenter::segment(const Raster& image) {
  const auto p = land_probability(image);
  BinaryMask m(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) m.set_land(y, x, p[static_cast<std::size_t>(y) * image.width() + x] >= 0.5f);
  return m;
}

NetClassifier::NetClassifier(const nn::ModelWeights& w) : weights_(w), net_(nn::make_classifier<float>(w)) {}

double NetClassifier::built_probability(const Raster& image) {
  const auto& spec = net_->spec();
  const Raster resized = (image.width() == spec.input_size && image.height() == spec.input_size)
                             ? image
                             : resize_bilinear(image, spec.input_size, spec.input_size);
  const auto out = nn::classifier_forward(*net_, batch_from_rasters({&resized}, spec.in_channels), false);
  return out.data[0];
}

NetSegmenter::NetSegmenter(const nn::ModelWeights& w) : weights_(w), net_(nn::make_segmenter<float>(w)) {}

std::vector<float> NetSegmenter::land_probability(const Raster& image) {
  const auto out = nn::unet_forward(*net_, batch_from_rasters({&image}, net_->spec().in_channels));
  return {out.data.begin(), out.data.end()};
}

}  // namespace ccesar
