#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "tfdm/errors.hpp"

namespace tfdm {

// Dense rank-4 tensor, batch x height x width x channels, row major with
// channels fastest. All feature maps and filter banks in the library use
// this layout, so a flatten is a plain copy of the underlying vector.
template <typename T>
struct Tensor4 {
  int b = 0, h = 0, w = 0, c = 0;
  std::vector<T> v;

  Tensor4() = default;
  Tensor4(int b_, int h_, int w_, int c_)
      : b(b_), h(h_), w(w_), c(c_),
        v(static_cast<size_t>(b_) * h_ * w_ * c_, T(0)) {
    if (b_ < 0 || h_ < 0 || w_ < 0 || c_ < 0)
      throw ShapeError("negative tensor dimension " + shape_str());
  }

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }

  std::int64_t idx(int bi, int y, int x, int ci) const {
    return ((static_cast<std::int64_t>(bi) * h + y) * w + x) * c + ci;
  }

  T& at(int bi, int y, int x, int ci) { return v[idx(bi, y, x, ci)]; }
  const T& at(int bi, int y, int x, int ci) const { return v[idx(bi, y, x, ci)]; }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  bool same_shape(const Tensor4& o) const {
    return b == o.b && h == o.h && w == o.w && c == o.c;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[" << b << "," << h << "," << w << "," << c << "]";
    return os.str();
  }

  void fill(T value) { std::fill(v.begin(), v.end(), value); }

  // Index of the first non-finite element, or -1 if all are finite.
  std::int64_t first_non_finite() const {
    for (std::int64_t i = 0; i < size(); ++i)
      if (!std::isfinite(static_cast<double>(v[i]))) return i;
    return -1;
  }
};

// Splits a flat index back into coordinates for diagnostics.
template <typename T>
inline std::string coord_str(const Tensor4<T>& t, std::int64_t flat) {
  std::int64_t ci = flat % t.c;
  std::int64_t rest = flat / t.c;
  std::int64_t x = rest % t.w;
  rest /= t.w;
  std::int64_t y = rest % t.h;
  std::int64_t bi = rest / t.h;
  std::ostringstream os;
  os << "(b=" << bi << ",y=" << y << ",x=" << x << ",c=" << ci << ")";
  return os.str();
}

// Complex rank-4 tensor stored as separate real and imaginary planes of
// identical shape. Split storage keeps the real-plane operations (weight
// fixation, branch heads, norm layers) free of strided complex access.
template <typename T>
struct ComplexTensor4 {
  Tensor4<T> re, im;

  ComplexTensor4() = default;
  ComplexTensor4(int b_, int h_, int w_, int c_) : re(b_, h_, w_, c_), im(b_, h_, w_, c_) {}
  explicit ComplexTensor4(Tensor4<T> real_part)
      : re(std::move(real_part)), im(re.b, re.h, re.w, re.c) {}

  int b() const { return re.b; }
  int h() const { return re.h; }
  int w() const { return re.w; }
  int c() const { return re.c; }
  std::int64_t size() const { return re.size(); }
  bool same_shape(const ComplexTensor4& o) const { return re.same_shape(o.re); }
  std::string shape_str() const { return re.shape_str(); }
};

// A feature map flowing through a network: either a time-domain real tensor
// (re plane only, im left empty) or a frequency-domain complex tensor.
template <typename T>
struct Feature {
  ComplexTensor4<T> t;
  bool freq = false;

  Feature() = default;
  static Feature time(Tensor4<T> x) {
    Feature f;
    f.t.re = std::move(x);
    f.freq = false;
    return f;
  }
  static Feature frequency(ComplexTensor4<T> x) {
    Feature f;
    f.t = std::move(x);
    f.freq = true;
    return f;
  }
  int b() const { return t.re.b; }
  int h() const { return t.re.h; }
  int w() const { return t.re.w; }
  int c() const { return t.re.c; }
};

template <typename T>
inline void require_same_shape(const Tensor4<T>& a, const Tensor4<T>& b,
                               const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": " + a.shape_str() + " vs " + b.shape_str());
}

template <typename T>
inline void require_finite(const Tensor4<T>& t, const char* what) {
  std::int64_t bad = t.first_non_finite();
  if (bad >= 0)
    throw NumericError(std::string(what) + ": non-finite value at " + coord_str(t, bad));
}

}  // namespace tfdm
