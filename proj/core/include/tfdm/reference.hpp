#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace tfdm {
namespace reference {

// Slow direct-sum implementations written straight from the defining
// formulas. They share no code with the fast engine (no plans, no twiddle
// tables) and exist to pin its behavior in tests and verification, so keep
// them dumb: four nested loops, std::cos/std::sin per term.

using cd = std::complex<double>;

// Row-major h*w plane, unnormalized forward transform:
//   X[u,v] = sum_{y,x} x[y,x] * exp(-2*pi*i*(u*y/h + v*x/w))
std::vector<cd> dft2_plane(const std::vector<cd>& x, int h, int w);

// Inverse with 1/(h*w):
//   x[y,x] = (1/(h*w)) * sum_{u,v} X[u,v] * exp(+2*pi*i*(u*y/h + v*x/w))
std::vector<cd> idft2_plane(const std::vector<cd>& x, int h, int w);

// Circular cross-correlation of two real h*w planes:
//   R[dy,dx] = sum_{y,x} u[y,x] * v[(y+dy) mod h, (x+dx) mod w]
std::vector<double> circular_cross_correlation(const std::vector<double>& u,
                                               const std::vector<double>& v, int h, int w);

// Zero-padded "same-math" convolution used by the interior equivalence
// checks: the kernel anchored at its top-left tap,
//   Z[p,q] = sum_{ky,kx} x[p+ky, q+kx] * k[ky,kx]
// with out-of-range x treated as zero. Output is h*w.
std::vector<double> anchored_convolution(const std::vector<double>& x, int h, int w,
                                         const std::vector<double>& kernel, int k);

// Direct multichannel convolution over a batch, stride s, symmetric zero
// padding chosen so out = ceil(in/s) ("same"). Layouts match Tensor4:
// input ((b*h+y)*w+x)*cin+ci, kernel ((ky*k+kx)*cin+ci)*cout+co.
// Every kernel tap contributes one multiply to *mul_count when the pointer
// is non-null, including taps over the zero padding; the fast path and the
// op-count model use the same convention.
std::vector<float> conv2d_forward(const std::vector<float>& in, int b, int h, int w, int cin,
                                  const std::vector<float>& kernel, int k, int cout,
                                  const std::vector<float>& bias, int stride, int* out_h,
                                  int* out_w, std::int64_t* mul_count = nullptr);

// Direct frequency-domain product layer: for every output channel,
//   out[bi,:,:,co] = sum_ci conj(in[bi,:,:,ci]) * w[:,:,ci,co]
// Input layout ((bi*h+y)*w+x)*cin+ci as interleaved complex, weights
// ((y*w+x)*cin+ci)*cout+co. Counts 4 real multiplies per complex product.
std::vector<cd> eml_forward(const std::vector<cd>& in, int b, int h, int w, int cin,
                            const std::vector<cd>& weights, int cout,
                            std::int64_t* mul_count = nullptr);

}  // namespace reference
}  // namespace tfdm
