#include "psoctseg/segnet.hpp"

#include <cmath>
#include <random>

#include "psoctseg/errors.hpp"
#include "psoctseg/nn/checkpoint.hpp"

namespace psoctseg {

using nn::Tensor;

template <typename T>
ConvComplex<T>::ConvComplex(const std::string& name, int in_channels, int features, T slope)
    : c1(name + ".conv1", in_channels, features, 3),
      c2(name + ".conv2", features, features, 3),
      c3(name + ".conv3", features, features, 3),
      has_proj_(in_channels != features),
      slope_(slope) {
  if (has_proj_) proj = nn::Conv2d<T>(name + ".skip", in_channels, features, 1);
}

template <typename T>
Tensor<T> ConvComplex<T>::forward(const Tensor<T>& x, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.x = x;
  c.y1 = nn::leaky_relu(c1.forward(x), slope_);
  c.y2 = nn::leaky_relu(c2.forward(c.y1), slope_);
  c.y3 = nn::leaky_relu(c3.forward(c.y2), slope_);
  Tensor<T> out = c.y3;
  nn::add_inplace(out, has_proj_ ? proj.forward(x) : x);
  return out;
}

template <typename T>
Tensor<T> ConvComplex<T>::backward(const Cache& c, const Tensor<T>& dy, bool input_grad) {
  Tensor<T> g = nn::leaky_relu_backward(c.y3, dy, slope_);
  g = c3.backward(c.y2, g, true, true);
  g = nn::leaky_relu_backward(c.y2, g, slope_);
  g = c2.backward(c.y1, g, true, true);
  g = nn::leaky_relu_backward(c.y1, g, slope_);
  g = c1.backward(c.x, g, true, input_grad);
  if (has_proj_) {
    Tensor<T> gs = proj.backward(c.x, dy, true, input_grad);
    if (input_grad) nn::add_inplace(g, gs);
  } else if (input_grad) {
    nn::add_inplace(g, dy);
  }
  return g;
}

template <typename T>
void ConvComplex<T>::collect(std::vector<nn::Parameter<T>*>& out) {
  for (auto* l : {&c1, &c2, &c3}) {
    out.push_back(&l->weight);
    out.push_back(&l->bias);
  }
  if (has_proj_) {
    out.push_back(&proj.weight);
    out.push_back(&proj.bias);
  }
}

template class ConvComplex<float>;
template class ConvComplex<double>;

// ------------------------------------------------------------ network

nlohmann::json SegNetConfig::to_json() const {
  return {{"features", features}, {"latent_features", latent_features}, {"lrelu_slope", lrelu_slope}};
}

SegNetConfig SegNetConfig::from_json(const nlohmann::json& j) {
  SegNetConfig c;
  c.features = j.at("features").get<std::array<int, 3>>();
  c.latent_features = j.at("latent_features").get<int>();
  c.lrelu_slope = j.at("lrelu_slope").get<double>();
  return c;
}

namespace {

template <typename T>
void init_complex(ConvComplex<T>& cx, std::mt19937_64& rng) {
  for (auto* l : {&cx.c1, &cx.c2, &cx.c3}) nn::glorot_uniform(l->weight, l->in_channels() * 9, l->out_channels() * 9, rng);
  if (cx.has_projection()) nn::glorot_uniform(cx.proj.weight, cx.proj.in_channels(), cx.proj.out_channels(), rng);
}

}  // namespace

template <typename T>
SegNet<T>::SegNet(const SegNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  const T s = static_cast<T>(cfg.lrelu_slope);
  const auto& f = cfg.features;
  const int L = cfg.latent_features;
  enc_[0] = ConvComplex<T>("enc1", kNumChannels, f[0], s);
  enc_[1] = ConvComplex<T>("enc2", f[0], f[1], s);
  enc_[2] = ConvComplex<T>("enc3", f[1], f[2], s);
  lat_[0] = ConvComplex<T>("latent1", f[2], L, s);
  lat_[1] = ConvComplex<T>("latent2", L, L, s);
  dec_[0] = ConvComplex<T>("dec3", L + f[2], f[2], s);
  upconv_[0] = nn::Conv2d<T>("up2", f[2], f[1], 3);
  dec_[1] = ConvComplex<T>("dec2", 2 * f[1], f[1], s);
  upconv_[1] = nn::Conv2d<T>("up1", f[1], f[0], 3);
  dec_[2] = ConvComplex<T>("dec1", 2 * f[0], f[0], s);
  head_ = nn::Conv2d<T>("head", f[0], kNumClasses, 1);

  std::mt19937_64 rng(seed);
  for (auto& c : enc_) init_complex(c, rng);
  for (auto& c : lat_) init_complex(c, rng);
  for (int k = 0; k < 3; ++k) {
    init_complex(dec_[k], rng);
    if (k < 2) nn::glorot_uniform(upconv_[k].weight, upconv_[k].in_channels() * 9, upconv_[k].out_channels() * 9, rng);
  }
  nn::glorot_uniform(head_.weight, f[0], kNumClasses, rng);
}

template <typename T>
Tensor<T> SegNet<T>::forward(const Tensor<T>& images, Cache* cache) const {
  if (images.c != kNumChannels) throw ShapeMismatch("segnet: 3 input channels required");
  if (images.h % 4 != 0 || images.w % 4 != 0)
    throw ShapeMismatch("segnet: R and A must be multiples of 4, got " + std::to_string(images.h) + "x" +
                        std::to_string(images.w));
  Cache local;
  Cache& c = cache ? *cache : local;
  c.x = images;
  const std::size_t plane = images.plane();
  for (int n = 0; n < images.n; ++n)
    for (int ch = 0; ch < kNumChannels; ++ch) {
      T* p = c.x.data.data() + (static_cast<std::size_t>(n) * kNumChannels + ch) * plane;
      const T m = static_cast<T>(mean[ch]), s = static_cast<T>(stddev[ch]);
      for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - m) / s;
    }

  c.skip[0] = enc_[0].forward(c.x, &c.enc[0]);
  const Tensor<T>& e1 = c.skip[0];
  c.pool[0] = nn::max_pool2(e1);
  c.skip[1] = enc_[1].forward(c.pool[0].y, &c.enc[1]);
  const Tensor<T>& e2 = c.skip[1];
  c.pool[1] = nn::max_pool2(e2);
  const Tensor<T> e3 = enc_[2].forward(c.pool[1].y, &c.enc[2]);
  const Tensor<T> l1 = lat_[0].forward(e3, &c.lat[0]);
  const Tensor<T> l2 = lat_[1].forward(l1, &c.lat[1]);

  const Tensor<T> d3 = dec_[0].forward(nn::concat_channels(l2, e3), &c.dec[0]);
  c.up[0] = nn::upsample2(d3);
  const Tensor<T> d2 = dec_[1].forward(nn::concat_channels(upconv_[0].forward(c.up[0]), e2), &c.dec[1]);
  c.up[1] = nn::upsample2(d2);
  c.features = dec_[2].forward(nn::concat_channels(upconv_[1].forward(c.up[1]), e1), &c.dec[2]);
  c.probs = nn::softmax_channels(head_.forward(c.features));
  return c.probs;
}

template <typename T>
void SegNet<T>::backward(const Cache& c, const Tensor<T>& dprobs) {
  const auto& f = cfg_.features;
  Tensor<T> g = nn::softmax_channels_backward(c.probs, dprobs);
  g = head_.backward(c.features, g, true, true);

  Tensor<T> gu, ge1, ge2, ge3, gl2;
  g = dec_[2].backward(c.dec[2], g, true);
  nn::split_channels(g, f[0], gu, ge1);
  g = upconv_[1].backward(c.up[1], gu, true, true);
  g = nn::upsample2_backward(g, c.up[1].h / 2, c.up[1].w / 2);

  g = dec_[1].backward(c.dec[1], g, true);
  nn::split_channels(g, f[1], gu, ge2);
  g = upconv_[0].backward(c.up[0], gu, true, true);
  g = nn::upsample2_backward(g, c.up[0].h / 2, c.up[0].w / 2);

  g = dec_[0].backward(c.dec[0], g, true);
  nn::split_channels(g, cfg_.latent_features, gl2, ge3);
  g = lat_[1].backward(c.lat[1], gl2, true);
  g = lat_[0].backward(c.lat[0], g, true);
  nn::add_inplace(ge3, g);

  g = enc_[2].backward(c.enc[2], ge3, true);
  nn::add_inplace(ge2, nn::max_pool2_backward(c.skip[1], c.pool[1], g));
  g = enc_[1].backward(c.enc[1], ge2, true);
  nn::add_inplace(ge1, nn::max_pool2_backward(c.skip[0], c.pool[0], g));
  enc_[0].backward(c.enc[0], ge1, false);
}

template <typename T>
std::vector<nn::Parameter<T>*> SegNet<T>::parameters() {
  std::vector<nn::Parameter<T>*> p;
  for (auto& c : enc_) c.collect(p);
  for (auto& c : lat_) c.collect(p);
  for (int k = 0; k < 3; ++k) {
    dec_[k].collect(p);
    if (k < 2) {
      p.push_back(&upconv_[k].weight);
      p.push_back(&upconv_[k].bias);
    }
  }
  p.push_back(&head_.weight);
  p.push_back(&head_.bias);
  return p;
}

template <typename T>
std::vector<const nn::Parameter<T>*> SegNet<T>::parameters() const {
  auto p = const_cast<SegNet*>(this)->parameters();
  return {p.begin(), p.end()};
}

template <typename T>
std::size_t SegNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

template <typename T>
void SegNet<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
void SegNet<T>::fit_normalization(std::span<const PolarImage> images) {
  for (int ch = 0; ch < kNumChannels; ++ch) {
    double sum = 0.0, sq = 0.0, count = 0.0;
    for (const auto& im : images) {
      const std::size_t plane = static_cast<std::size_t>(im.R) * im.A;
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = im.data[ch * plane + i];
        sum += v;
        sq += v * v;
        count += 1.0;
      }
    }
    if (count == 0.0) continue;
    const double m = sum / count;
    const double var = std::max(0.0, sq / count - m * m);
    mean[ch] = static_cast<float>(m);
    stddev[ch] = static_cast<float>(var > 1e-12 ? std::sqrt(var) : 1.0);
  }
}

template <typename T>
template <typename U>
SegNet<U> SegNet<T>::cast() const {
  SegNet<U> out(cfg_);
  auto src = parameters();
  auto dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value.assign(src[i]->value.begin(), src[i]->value.end());
  out.mean = mean;
  out.stddev = stddev;
  return out;
}

template class SegNet<float>;
template class SegNet<double>;
template SegNet<double> SegNet<float>::cast<double>() const;

// ------------------------------------------------------------ conversions

template <typename T>
Tensor<T> image_tensor(std::span<const PolarImage> images) {
  if (images.empty()) return {};
  Tensor<T> x(static_cast<int>(images.size()), kNumChannels, images[0].R, images[0].A);
  for (int n = 0; n < x.n; ++n) {
    if (images[n].R != x.h || images[n].A != x.w) throw ShapeMismatch("image_tensor: image sizes differ");
    std::copy(images[n].data.begin(), images[n].data.end(), x.sample(n).begin());
  }
  return x;
}

template <typename T>
std::vector<ProbMap> to_probmaps(const Tensor<T>& probs) {
  std::vector<ProbMap> out;
  out.reserve(probs.n);
  for (int n = 0; n < probs.n; ++n) {
    ProbMap p(probs.h, probs.w);
    for (int c = 0; c < kNumClasses; ++c)
      for (int r = 0; r < probs.h; ++r)
        for (int a = 0; a < probs.w; ++a) p.at(r, a, c) = static_cast<double>(probs(n, c, r, a));
    out.push_back(std::move(p));
  }
  return out;
}

template <typename T>
Tensor<T> from_probmaps(std::span<const ProbMap> maps) {
  if (maps.empty()) return {};
  Tensor<T> t(static_cast<int>(maps.size()), kNumClasses, maps[0].R, maps[0].A);
  for (int n = 0; n < t.n; ++n)
    for (int c = 0; c < kNumClasses; ++c)
      for (int r = 0; r < t.h; ++r)
        for (int a = 0; a < t.w; ++a) t(n, c, r, a) = static_cast<T>(maps[n].at(r, a, c));
  return t;
}

template Tensor<float> image_tensor<float>(std::span<const PolarImage>);
template Tensor<double> image_tensor<double>(std::span<const PolarImage>);
template std::vector<ProbMap> to_probmaps<float>(const Tensor<float>&);
template std::vector<ProbMap> to_probmaps<double>(const Tensor<double>&);
template Tensor<float> from_probmaps<float>(std::span<const ProbMap>);
template Tensor<double> from_probmaps<double>(std::span<const ProbMap>);

// ------------------------------------------------------------ checkpoints

void save_segnet(const std::filesystem::path& path, const SegNet<float>& net, const nlohmann::json& extra_header) {
  nlohmann::json header = net.config().to_json();
  if (extra_header.is_object())
    for (const auto& [k, v] : extra_header.items()) header[k] = v;
  header["kind"] = "segnet";
  header["version"] = 1;
  header["input_channels"] = kNumChannels;
  header["classes"] = kNumClasses;
  header["param_count"] = net.parameter_count();
  header["normalization"] = "mean[3], stddev[3] appended after the parameters";
  std::vector<float> extra(net.mean.begin(), net.mean.end());
  extra.insert(extra.end(), net.stddev.begin(), net.stddev.end());
  nn::save_checkpoint(path, header, net.parameters(), extra);
}

SegNet<float> load_segnet(const std::filesystem::path& path) {
  const auto ck = nn::read_checkpoint(path);
  if (ck.header.value("kind", "") != "segnet") throw FormatError(path.string() + " is not a segnet checkpoint");
  if (ck.extra.size() != 2 * kNumChannels) throw FormatError("segnet checkpoint lacks normalization statistics");
  SegNet<float> net(SegNetConfig::from_json(ck.header));
  nn::assign_parameters(ck, net.parameters());
  std::copy_n(ck.extra.begin(), kNumChannels, net.mean.begin());
  std::copy_n(ck.extra.begin() + kNumChannels, kNumChannels, net.stddev.begin());
  return net;
}

std::vector<ProbMap> predict(const SegNet<float>& net, std::span<const PolarImage> images, int batch) {
  std::vector<ProbMap> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += batch) {
    const std::size_t len = std::min<std::size_t>(batch, images.size() - start);
    for (auto& p : to_probmaps(net.forward(image_tensor<float>(images.subspan(start, len))))) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace psoctseg
