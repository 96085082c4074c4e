#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "tfdm/errors.hpp"
#include "tfdm/parallel.hpp"
#include "tfdm/tensor.hpp"

namespace tfdm {

using cd = std::complex<double>;

// Mixed-radix Cooley-Tukey plan for one transform length. Composite lengths
// recurse on the smallest prime factor; prime lengths fall back to the
// direct O(p^2) sum against the same twiddle table. Twiddles are tabulated
// once per length in double precision. Forward is unnormalized with the
// negative-exponent kernel; the inverse runs the forward plan on conjugated
// data and leaves the 1/N scaling to the 2D wrappers.
class FftPlan {
 public:
  explicit FftPlan(int n);

  int length() const { return n_; }

  // Out-of-place transform of `in` (contiguous, length n) into `out`.
  // `scratch` must hold at least n elements.
  void forward(const cd* in, cd* out, cd* scratch) const;

 private:
  void rec(const cd* in, std::int64_t stride, cd* out, int len, int mult, cd* scratch) const;

  int n_;
  std::vector<cd> tw_;  // tw_[j] = exp(-2*pi*i*j/n)
};

// Shared, mutex-guarded cache of plans keyed by length.
const FftPlan& plan_for(int n);

// Scratch buffers for one worker transforming 2D planes of a fixed size.
struct PlaneWorkspace {
  std::vector<cd> plane, line, out_line, scratch;
  void resize(int h, int w);
};

// Unnormalized 2D transform of one plane held in `ws.plane` (row major,
// h rows of w), in place. `inverse` applies the positive-exponent kernel
// and scales by 1/(h*w).
void plane_dft2(PlaneWorkspace& ws, int h, int w, bool inverse);

namespace detail {

template <typename T, typename Loader, typename Storer>
void transform_slices(int b, int h, int w, int c, bool inverse, Loader load, Storer store) {
  if (h <= 0 || w <= 0) throw ShapeError("transform needs positive height and width");
  plan_for(h);  // warm the cache outside the parallel region
  plan_for(w);
  const std::int64_t slices = static_cast<std::int64_t>(b) * c;
  parallel_for(slices, [&](std::int64_t lo, std::int64_t hi) {
    PlaneWorkspace ws;
    ws.resize(h, w);
    for (std::int64_t s = lo; s < hi; ++s) {
      int bi = static_cast<int>(s / c);
      int ci = static_cast<int>(s % c);
      load(bi, ci, ws.plane.data());
      plane_dft2(ws, h, w, inverse);
      store(bi, ci, ws.plane.data());
    }
  });
}

}  // namespace detail

// Forward 2D transform of every (batch, channel) slice. Unnormalized:
// the zero bin of a constant plane of value v is v*h*w.
template <typename T>
ComplexTensor4<T> dft2(const Tensor4<T>& x) {
  require_finite(x, "dft2 input");
  ComplexTensor4<T> out(x.b, x.h, x.w, x.c);
  detail::transform_slices<T>(
      x.b, x.h, x.w, x.c, false,
      [&](int bi, int ci, cd* plane) {
        for (int y = 0; y < x.h; ++y)
          for (int xx = 0; xx < x.w; ++xx)
            plane[static_cast<std::int64_t>(y) * x.w + xx] =
                cd(static_cast<double>(x.at(bi, y, xx, ci)), 0.0);
      },
      [&](int bi, int ci, const cd* plane) {
        for (int y = 0; y < x.h; ++y)
          for (int xx = 0; xx < x.w; ++xx) {
            const cd& z = plane[static_cast<std::int64_t>(y) * x.w + xx];
            out.re.at(bi, y, xx, ci) = static_cast<T>(z.real());
            out.im.at(bi, y, xx, ci) = static_cast<T>(z.imag());
          }
      });
  return out;
}

template <typename T>
ComplexTensor4<T> dft2(const ComplexTensor4<T>& x) {
  require_finite(x.re, "dft2 input (real plane)");
  require_finite(x.im, "dft2 input (imag plane)");
  ComplexTensor4<T> out(x.b(), x.h(), x.w(), x.c());
  detail::transform_slices<T>(
      x.b(), x.h(), x.w(), x.c(), false,
      [&](int bi, int ci, cd* plane) {
        for (int y = 0; y < x.h(); ++y)
          for (int xx = 0; xx < x.w(); ++xx)
            plane[static_cast<std::int64_t>(y) * x.w() + xx] =
                cd(static_cast<double>(x.re.at(bi, y, xx, ci)),
                   static_cast<double>(x.im.at(bi, y, xx, ci)));
      },
      [&](int bi, int ci, const cd* plane) {
        for (int y = 0; y < x.h(); ++y)
          for (int xx = 0; xx < x.w(); ++xx) {
            const cd& z = plane[static_cast<std::int64_t>(y) * x.w() + xx];
            out.re.at(bi, y, xx, ci) = static_cast<T>(z.real());
            out.im.at(bi, y, xx, ci) = static_cast<T>(z.imag());
          }
      });
  return out;
}

// Inverse 2D transform, scaled by 1/(h*w): idft2(dft2(x)) == x.
template <typename T>
ComplexTensor4<T> idft2(const ComplexTensor4<T>& x) {
  require_finite(x.re, "idft2 input (real plane)");
  require_finite(x.im, "idft2 input (imag plane)");
  ComplexTensor4<T> out(x.b(), x.h(), x.w(), x.c());
  detail::transform_slices<T>(
      x.b(), x.h(), x.w(), x.c(), true,
      [&](int bi, int ci, cd* plane) {
        for (int y = 0; y < x.h(); ++y)
          for (int xx = 0; xx < x.w(); ++xx)
            plane[static_cast<std::int64_t>(y) * x.w() + xx] =
                cd(static_cast<double>(x.re.at(bi, y, xx, ci)),
                   static_cast<double>(x.im.at(bi, y, xx, ci)));
      },
      [&](int bi, int ci, const cd* plane) {
        for (int y = 0; y < x.h(); ++y)
          for (int xx = 0; xx < x.w(); ++xx) {
            const cd& z = plane[static_cast<std::int64_t>(y) * x.w() + xx];
            out.re.at(bi, y, xx, ci) = static_cast<T>(z.real());
            out.im.at(bi, y, xx, ci) = static_cast<T>(z.imag());
          }
      });
  return out;
}

// Relative Parseval residual of a real tensor:
//   | sum|x|^2 - sum|X|^2/(h*w) | / max(sum|x|^2, tiny).
// A healthy transform keeps this below 1e-5 in single precision.
template <typename T>
double parseval_gap(const Tensor4<T>& x) {
  ComplexTensor4<T> X = dft2(x);
  double time_e = 0.0, freq_e = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    double v = static_cast<double>(x.v[i]);
    time_e += v * v;
  }
  for (std::int64_t i = 0; i < X.size(); ++i) {
    double r = static_cast<double>(X.re.v[i]);
    double m = static_cast<double>(X.im.v[i]);
    freq_e += r * r + m * m;
  }
  freq_e /= static_cast<double>(x.h) * x.w;
  double denom = time_e > 1e-300 ? time_e : 1e-300;
  return std::abs(time_e - freq_e) / denom;
}

}  // namespace tfdm
