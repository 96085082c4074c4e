#pragma once

#include <cstdint>
#include <vector>

#include "tfdm/dft.hpp"
#include "tfdm/errors.hpp"
#include "tfdm/rng.hpp"
#include "tfdm/tensor.hpp"

namespace tfdm {

// Support mask for the frequency-domain weight constraint: exactly k*k ones
// in the top-left corner of an h*w grid. A product layer whose spatial
// weights are confined to this support behaves like a k*k filter.
struct FixationMask {
  int h = 0, w = 0, k = 0;
  std::vector<std::uint8_t> m;  // row major h*w, values 0/1

  FixationMask() = default;
  FixationMask(int h_, int w_, int k_) : h(h_), w(w_), k(k_), m(static_cast<size_t>(h_) * w_, 0) {
    if (k_ < 1 || k_ > h_ || k_ > w_)
      throw ConfigError("fixation support k=" + std::to_string(k_) +
                        " must lie in [1, min(h,w)] for grid " + std::to_string(h_) + "x" +
                        std::to_string(w_));
    for (int y = 0; y < k_; ++y)
      for (int x = 0; x < k_; ++x) m[static_cast<size_t>(y) * w_ + x] = 1;
  }

  std::int64_t ones() const {
    std::int64_t n = 0;
    for (auto v : m) n += v;
    return n;
  }
};

// Lifts a k*k spatial filter into full-grid frequency weights: zero-pad to
// h*w with the filter in the top-left corner, then transform. The result is
// exactly the fixed point of the fixation projection below.
template <typename T>
ComplexTensor4<T> lift_filter(const Tensor4<T>& spatial, int h, int w) {
  // spatial is [1, k, k, n] holding n independent planes.
  if (spatial.h > h || spatial.w > w)
    throw ShapeError("filter " + spatial.shape_str() + " larger than grid");
  Tensor4<T> padded(spatial.b, h, w, spatial.c);
  for (int bi = 0; bi < spatial.b; ++bi)
    for (int y = 0; y < spatial.h; ++y)
      for (int x = 0; x < spatial.w; ++x)
        for (int ci = 0; ci < spatial.c; ++ci)
          padded.at(bi, y, x, ci) = spatial.at(bi, y, x, ci);
  return dft2(padded);
}

// One complex plane (contiguous h*w) of the fixation projection:
// inverse transform, drop the imaginary part, zero everything outside the
// mask support, forward transform. Idempotent by construction, and it costs
// two transforms per plane every time it runs.
inline void fixate_plane(PlaneWorkspace& ws, const FixationMask& mask) {
  plane_dft2(ws, mask.h, mask.w, true);
  const std::int64_t total = static_cast<std::int64_t>(mask.h) * mask.w;
  for (std::int64_t i = 0; i < total; ++i)
    ws.plane[i] = cd(mask.m[i] ? ws.plane[i].real() : 0.0, 0.0);
  plane_dft2(ws, mask.h, mask.w, false);
}

// Glorot-uniform k*k spatial filters lifted to the frequency grid.
// Weight layout matches the product layer: ((y*w+x)*cin+ci)*cout+co.
template <typename T>
void init_spectral_weights(std::vector<T>& w_re, std::vector<T>& w_im, int h, int w, int cin,
                           int cout, int k, Rng& rng) {
  const double limit = std::sqrt(6.0 / (static_cast<double>(k) * k * cin +
                                        static_cast<double>(k) * k * cout));
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t pairs = static_cast<std::int64_t>(cin) * cout;
  w_re.assign(plane * pairs, T(0));
  w_im.assign(plane * pairs, T(0));
  // Draw in (ci, co, y, x) order so the draw sequence does not depend on
  // the grid size, then lift each spatial filter.
  PlaneWorkspace ws;
  ws.resize(h, w);
  for (int ci = 0; ci < cin; ++ci)
    for (int co = 0; co < cout; ++co) {
      std::fill(ws.plane.begin(), ws.plane.end(), cd(0.0, 0.0));
      for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x)
          ws.plane[static_cast<std::int64_t>(y) * w + x] = cd(rng.uniform(-limit, limit), 0.0);
      plane_dft2(ws, h, w, false);
      for (std::int64_t i = 0; i < plane; ++i) {
        std::int64_t at = i * pairs + static_cast<std::int64_t>(ci) * cout + co;
        w_re[at] = static_cast<T>(ws.plane[i].real());
        w_im[at] = static_cast<T>(ws.plane[i].imag());
      }
    }
}

}  // namespace tfdm
