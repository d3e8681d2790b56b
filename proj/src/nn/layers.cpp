#include "psoctseg/nn/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <limits>

namespace psoctseg::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// Unfolds one sample (c, h, w) into a (c*k*k, h*w) column matrix.
template <typename T>
void im2col(const T* src, int c, int h, int w, int k, T* cols) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    const T* plane = src + ch * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * hw;
        // angular offset, normalised into [0, w)
        const int dx = ((kx - pad) % w + w) % w;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          T* dst = row + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::memset(dst, 0, sizeof(T) * w);
            continue;
          }
          const T* s = plane + static_cast<std::size_t>(sy) * w;
          // dst[x] = s[(x + dx) mod w]
          std::memcpy(dst, s + dx, sizeof(T) * (w - dx));
          if (dx > 0) std::memcpy(dst + (w - dx), s, sizeof(T) * dx);
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int c, int h, int w, int k, T* dst) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    T* plane = dst + ch * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * hw;
        const int dx = ((kx - pad) % w + w) % w;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const T* s = row + static_cast<std::size_t>(y) * w;
          T* d = plane + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < w - dx; ++x) d[x + dx] += s[x];
          for (int x = w - dx; x < w; ++x) d[x + dx - w] += s[x];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Parameter<T>::Parameter(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
  std::size_t total = 1;
  for (int d : shape) total *= static_cast<std::size_t>(d);
  value.assign(total, T(0));
  grad.assign(total, T(0));
}

template <typename T>
void glorot_uniform(Parameter<T>& p, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : p.value) v = static_cast<T>(dist(rng));
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel)
    : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels),
      k_(kernel) {
  if (kernel % 2 != 1) throw std::invalid_argument("Conv2d: kernel must be odd");
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  if (x.c != in_) throw std::invalid_argument(weight.name + ": channel mismatch");
  Tensor<T> y(x.n, out_, x.h, x.w);
  const int kk = in_ * k_ * k_;
  const Eigen::Index hw = static_cast<Eigen::Index>(x.plane());
  ConstMapMat<T> wmat(weight.value.data(), out_, kk);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.value.data(), out_);
  Buffer<T> cols;
  if (k_ > 1) cols.resize(static_cast<std::size_t>(kk) * hw);
  for (int s = 0; s < x.n; ++s) {
    const T* src = x.data.data() + s * x.sample_size();
    MapMat<T> out(y.data.data() + s * y.sample_size(), out_, hw);
    if (k_ > 1) {
      im2col(src, in_, x.h, x.w, k_, cols.data());
      out.noalias() = wmat * ConstMapMat<T>(cols.data(), kk, hw);
    } else {
      out.noalias() = wmat * ConstMapMat<T>(src, kk, hw);
    }
    out.colwise() += b;
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& x, const Tensor<T>& dy, bool param_grads,
                              bool input_grad) {
  const int kk = in_ * k_ * k_;
  const Eigen::Index hw = static_cast<Eigen::Index>(x.plane());
  ConstMapMat<T> wmat(weight.value.data(), out_, kk);
  MapMat<T> dw(weight.grad.data(), out_, kk);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bias.grad.data(), out_);
  Tensor<T> dx;
  if (input_grad) dx = Tensor<T>(x.n, x.c, x.h, x.w);
  Buffer<T> cols(static_cast<std::size_t>(kk) * hw);
  for (int s = 0; s < x.n; ++s) {
    const T* src = x.data.data() + s * x.sample_size();
    ConstMapMat<T> g(dy.data.data() + s * dy.sample_size(), out_, hw);
    if (param_grads) {
      if (k_ > 1) {
        im2col(src, in_, x.h, x.w, k_, cols.data());
        dw.noalias() += g * ConstMapMat<T>(cols.data(), kk, hw).transpose();
      } else {
        dw.noalias() += g * ConstMapMat<T>(src, kk, hw).transpose();
      }
      db += g.rowwise().sum();
    }
    if (input_grad) {
      T* dst = dx.data.data() + s * dx.sample_size();
      if (k_ > 1) {
        MapMat<T> dcols(cols.data(), kk, hw);
        dcols.noalias() = wmat.transpose() * g;
        col2im_add(cols.data(), in_, x.h, x.w, k_, dst);
      } else {
        MapMat<T>(dst, kk, hw).noalias() = wmat.transpose() * g;
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> Conv2d<T>::backward_input(const Tensor<T>& x, const Tensor<T>& dy) const {
  const int kk = in_ * k_ * k_;
  const Eigen::Index hw = static_cast<Eigen::Index>(x.plane());
  ConstMapMat<T> wmat(weight.value.data(), out_, kk);
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  Buffer<T> cols(static_cast<std::size_t>(kk) * hw);
  for (int s = 0; s < x.n; ++s) {
    ConstMapMat<T> g(dy.data.data() + s * dy.sample_size(), out_, hw);
    T* dst = dx.data.data() + s * dx.sample_size();
    if (k_ > 1) {
      MapMat<T>(cols.data(), kk, hw).noalias() = wmat.transpose() * g;
      col2im_add(cols.data(), in_, x.h, x.w, k_, dst);
    } else {
      MapMat<T>(dst, kk, hw).noalias() = wmat.transpose() * g;
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(const std::string& name, int in_features, int out_features)
    : weight(name + ".weight", {out_features, in_features}),
      bias(name + ".bias", {out_features}),
      in_(in_features),
      out_(out_features) {}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x) const {
  if (static_cast<int>(x.sample_size()) != in_) throw std::invalid_argument(weight.name + ": size mismatch");
  Tensor<T> y(x.n, out_, 1, 1);
  ConstMapMat<T> xin(x.data.data(), x.n, in_);
  ConstMapMat<T> wmat(weight.value.data(), out_, in_);
  MapMat<T> out(y.data.data(), x.n, out_);
  out.noalias() = xin * wmat.transpose();
  out.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.value.data(), out_);
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& x, const Tensor<T>& dy, bool param_grads, bool input_grad) {
  ConstMapMat<T> xin(x.data.data(), x.n, in_);
  ConstMapMat<T> g(dy.data.data(), x.n, out_);
  if (param_grads) {
    MapMat<T>(weight.grad.data(), out_, in_).noalias() += g.transpose() * xin;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.grad.data(), out_) += g.colwise().sum();
  }
  Tensor<T> dx;
  if (input_grad) {
    dx = Tensor<T>(x.n, x.c, x.h, x.w);
    MapMat<T>(dx.data.data(), x.n, in_).noalias() = g * ConstMapMat<T>(weight.value.data(), out_, in_);
  }
  return dx;
}

template <typename T>
Tensor<T> Dense<T>::backward_input(const Tensor<T>& x, const Tensor<T>& dy) const {
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  MapMat<T>(dx.data.data(), x.n, in_).noalias() =
      ConstMapMat<T>(dy.data.data(), x.n, out_) * ConstMapMat<T>(weight.value.data(), out_, in_);
  return dx;
}

// ---------------------------------------------------------------- activations

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  Tensor<T> y = x;
  for (auto& v : y.data) v = v > T(0) ? v : v * slope;
  return y;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& y, const Tensor<T>& dy, T slope) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.data.size(); ++i)
    if (!(y.data[i] > T(0))) dx.data[i] *= slope;
  return dx;
}

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.data) v = std::tanh(v);
  return y;
}

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= T(1) - y.data[i] * y.data[i];
  return dx;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h, x.w);
  const std::size_t hw = x.plane();
  for (int s = 0; s < x.n; ++s) {
    const T* in = x.data.data() + s * x.sample_size();
    T* out = y.data.data() + s * y.sample_size();
    for (std::size_t p = 0; p < hw; ++p) {
      T m = in[p];
      for (int ch = 1; ch < x.c; ++ch) m = std::max(m, in[ch * hw + p]);
      T z = 0;
      for (int ch = 0; ch < x.c; ++ch) {
        const T e = std::exp(in[ch * hw + p] - m);
        out[ch * hw + p] = e;
        z += e;
      }
      for (int ch = 0; ch < x.c; ++ch) out[ch * hw + p] /= z;
    }
  }
  return y;
}

template <typename T>
Tensor<T> softmax_channels_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(y.n, y.c, y.h, y.w);
  const std::size_t hw = y.plane();
  for (int s = 0; s < y.n; ++s) {
    const T* p = y.data.data() + s * y.sample_size();
    const T* g = dy.data.data() + s * dy.sample_size();
    T* d = dx.data.data() + s * dx.sample_size();
    for (std::size_t i = 0; i < hw; ++i) {
      T dot = 0;
      for (int ch = 0; ch < y.c; ++ch) dot += p[ch * hw + i] * g[ch * hw + i];
      for (int ch = 0; ch < y.c; ++ch) d[ch * hw + i] = p[ch * hw + i] * (g[ch * hw + i] - dot);
    }
  }
  return dx;
}

// ---------------------------------------------------------------- pooling

template <typename T>
MaxPoolResult<T> max_pool2(const Tensor<T>& x) {
  const int oh = (x.h + 1) / 2;
  const int ow = (x.w + 1) / 2;
  MaxPoolResult<T> r;
  r.y = Tensor<T>(x.n, x.c, oh, ow);
  r.argmax.resize(r.y.size());
  std::size_t o = 0;
  for (int s = 0; s < x.n; ++s) {
    for (int ch = 0; ch < x.c; ++ch) {
      const T* plane = x.data.data() + (static_cast<std::size_t>(s) * x.c + ch) * x.plane();
      for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          int bi = -1;
          for (int dy = 0; dy < 2; ++dy) {
            const int iy = 2 * y + dy;
            if (iy >= x.h) break;
            for (int dx = 0; dx < 2; ++dx) {
              const int ix = 2 * xo + dx;
              if (ix >= x.w) break;
              const int idx = iy * x.w + ix;
              if (bi < 0 || plane[idx] > best) {
                best = plane[idx];
                bi = idx;
              }
            }
          }
          r.y.data[o] = best;
          r.argmax[o] = bi;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> max_pool2_backward(const Tensor<T>& x, const MaxPoolResult<T>& fwd, const Tensor<T>& dy) {
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  const std::size_t per_plane = fwd.y.plane();
  for (std::size_t o = 0; o < dy.size(); ++o) {
    const std::size_t plane_idx = o / per_plane;
    dx.data[plane_idx * x.plane() + fwd.argmax[o]] += dy.data[o];
  }
  return dx;
}

// ---------------------------------------------------------------- upsampling

namespace {

struct Tap {
  int i0, i1;
  double w0, w1;
};

// Source taps for output index `o` of a 2x upsampling of length `n`.
Tap up_tap(int o, int n, bool wrap) {
  const double src = (o + 0.5) / 2.0 - 0.5;
  const int lo = static_cast<int>(std::floor(src));
  const double f = src - lo;
  int i0 = lo;
  int i1 = lo + 1;
  if (wrap) {
    i0 = (i0 % n + n) % n;
    i1 = (i1 % n + n) % n;
  } else {
    i0 = std::clamp(i0, 0, n - 1);
    i1 = std::clamp(i1, 0, n - 1);
  }
  return {i0, i1, 1.0 - f, f};
}

}  // namespace

template <typename T>
Tensor<T> upsample2(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, 2 * x.h, 2 * x.w);
  std::vector<Tap> ty(y.h), tx(y.w);
  for (int i = 0; i < y.h; ++i) ty[i] = up_tap(i, x.h, false);
  for (int i = 0; i < y.w; ++i) tx[i] = up_tap(i, x.w, true);
  for (int p = 0; p < x.n * x.c; ++p) {
    const T* in = x.data.data() + p * x.plane();
    T* out = y.data.data() + p * y.plane();
    for (int oy = 0; oy < y.h; ++oy) {
      const Tap& a = ty[oy];
      const T* r0 = in + a.i0 * x.w;
      const T* r1 = in + a.i1 * x.w;
      for (int ox = 0; ox < y.w; ++ox) {
        const Tap& b = tx[ox];
        const double v = a.w0 * (b.w0 * r0[b.i0] + b.w1 * r0[b.i1]) + a.w1 * (b.w0 * r1[b.i0] + b.w1 * r1[b.i1]);
        out[oy * y.w + ox] = static_cast<T>(v);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy, int in_h, int in_w) {
  Tensor<T> dx(dy.n, dy.c, in_h, in_w);
  std::vector<Tap> ty(dy.h), tx(dy.w);
  for (int i = 0; i < dy.h; ++i) ty[i] = up_tap(i, in_h, false);
  for (int i = 0; i < dy.w; ++i) tx[i] = up_tap(i, in_w, true);
  for (int p = 0; p < dy.n * dy.c; ++p) {
    const T* g = dy.data.data() + p * dy.plane();
    T* d = dx.data.data() + p * dx.plane();
    for (int oy = 0; oy < dy.h; ++oy) {
      const Tap& a = ty[oy];
      for (int ox = 0; ox < dy.w; ++ox) {
        const Tap& b = tx[ox];
        const T v = g[oy * dy.w + ox];
        d[a.i0 * in_w + b.i0] += static_cast<T>(a.w0 * b.w0) * v;
        d[a.i0 * in_w + b.i1] += static_cast<T>(a.w0 * b.w1) * v;
        d[a.i1 * in_w + b.i0] += static_cast<T>(a.w1 * b.w0) * v;
        d[a.i1 * in_w + b.i1] += static_cast<T>(a.w1 * b.w1) * v;
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- plumbing

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) throw std::invalid_argument("concat_channels: shape mismatch");
  Tensor<T> y(a.n, a.c + b.c, a.h, a.w);
  for (int s = 0; s < a.n; ++s) {
    auto dst = y.data.begin() + s * y.sample_size();
    auto sa = a.sample(s);
    auto sb = b.sample(s);
    std::copy(sa.begin(), sa.end(), dst);
    std::copy(sb.begin(), sb.end(), dst + sa.size());
  }
  return y;
}

template <typename T>
void split_channels(const Tensor<T>& dy, int ca, Tensor<T>& da, Tensor<T>& db) {
  da = Tensor<T>(dy.n, ca, dy.h, dy.w);
  db = Tensor<T>(dy.n, dy.c - ca, dy.h, dy.w);
  for (int s = 0; s < dy.n; ++s) {
    auto src = dy.sample(s);
    std::copy(src.begin(), src.begin() + da.sample_size(), da.sample(s).begin());
    std::copy(src.begin() + da.sample_size(), src.end(), db.sample(s).begin());
  }
}

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x) {
  if (!acc.same_shape(x)) throw std::invalid_argument("add_inplace: shape mismatch");
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += x.data[i];
}

#define PSOCTSEG_INSTANTIATE(T)                                                                   \
  template struct Parameter<T>;                                                                   \
  template void glorot_uniform<T>(Parameter<T>&, int, int, std::mt19937_64&);                      \
  template class Conv2d<T>;                                                                       \
  template class Dense<T>;                                                                        \
  template Tensor<T> leaky_relu<T>(const Tensor<T>&, T);                                          \
  template Tensor<T> leaky_relu_backward<T>(const Tensor<T>&, const Tensor<T>&, T);               \
  template Tensor<T> tanh_forward<T>(const Tensor<T>&);                                           \
  template Tensor<T> tanh_backward<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> softmax_channels<T>(const Tensor<T>&);                                       \
  template Tensor<T> softmax_channels_backward<T>(const Tensor<T>&, const Tensor<T>&);            \
  template MaxPoolResult<T> max_pool2<T>(const Tensor<T>&);                                       \
  template Tensor<T> max_pool2_backward<T>(const Tensor<T>&, const MaxPoolResult<T>&, const Tensor<T>&); \
  template Tensor<T> upsample2<T>(const Tensor<T>&);                                              \
  template Tensor<T> upsample2_backward<T>(const Tensor<T>&, int, int);                           \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                      \
  template void split_channels<T>(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);                 \
  template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);

PSOCTSEG_INSTANTIATE(float)
PSOCTSEG_INSTANTIATE(double)

#undef PSOCTSEG_INSTANTIATE

}  // namespace psoctseg::nn
