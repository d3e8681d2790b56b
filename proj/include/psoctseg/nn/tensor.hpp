#pragma once

#include <algorithm>
#include <cstddef>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace psoctseg::nn {

/// 64-byte aligned storage; reductions over mapped buffers then sum in the
/// same order on every run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// Dense NCHW activation tensor. H is the radial axis, W the angular axis.
template <typename T>
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  Buffer<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  [[nodiscard]] std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }

  T& operator()(int b, int ch, int y, int x) {
    return data[((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x];
  }
  const T& operator()(int b, int ch, int y, int x) const {
    return data[((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x];
  }

  std::span<T> sample(int b) { return {data.data() + b * sample_size(), sample_size()}; }
  std::span<const T> sample(int b) const { return {data.data() + b * sample_size(), sample_size()}; }

  [[nodiscard]] bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void zero() { std::fill(data.begin(), data.end(), T(0)); }

  template <typename U>
  [[nodiscard]] Tensor<U> cast() const {
    Tensor<U> out;
    out.n = n;
    out.c = c;
    out.h = h;
    out.w = w;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

template <typename T>
void require_shape(const Tensor<T>& t, int c, int h, int w, const char* who) {
  if (t.c != c || t.h != h || t.w != w) {
    throw std::invalid_argument(std::string(who) + ": expected (" + std::to_string(c) + "," +
                                std::to_string(h) + "," + std::to_string(w) + "), got (" +
                                std::to_string(t.c) + "," + std::to_string(t.h) + "," +
                                std::to_string(t.w) + ")");
  }
}

}  // namespace psoctseg::nn
