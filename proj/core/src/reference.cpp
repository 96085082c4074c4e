#include "tfdm/reference.hpp"

#include <cmath>

namespace tfdm {
namespace reference {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::vector<cd> dft2_plane(const std::vector<cd>& x, int h, int w) {
  std::vector<cd> out(static_cast<size_t>(h) * w);
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      cd acc(0.0, 0.0);
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          double ang = -kTwoPi * (static_cast<double>(u) * y / h +
                                  static_cast<double>(v) * xx / w);
          acc += x[static_cast<size_t>(y) * w + xx] * cd(std::cos(ang), std::sin(ang));
        }
      }
      out[static_cast<size_t>(u) * w + v] = acc;
    }
  }
  return out;
}

std::vector<cd> idft2_plane(const std::vector<cd>& x, int h, int w) {
  std::vector<cd> out(static_cast<size_t>(h) * w);
  const double scale = 1.0 / (static_cast<double>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      cd acc(0.0, 0.0);
      for (int u = 0; u < h; ++u) {
        for (int v = 0; v < w; ++v) {
          double ang = kTwoPi * (static_cast<double>(u) * y / h +
                                 static_cast<double>(v) * xx / w);
          acc += x[static_cast<size_t>(u) * w + v] * cd(std::cos(ang), std::sin(ang));
        }
      }
      out[static_cast<size_t>(y) * w + xx] = acc * scale;
    }
  }
  return out;
}

std::vector<double> circular_cross_correlation(const std::vector<double>& u,
                                               const std::vector<double>& v, int h, int w) {
  std::vector<double> out(static_cast<size_t>(h) * w, 0.0);
  for (int dy = 0; dy < h; ++dy)
    for (int dx = 0; dx < w; ++dx) {
      double acc = 0.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          acc += u[static_cast<size_t>(y) * w + x] *
                 v[static_cast<size_t>((y + dy) % h) * w + (x + dx) % w];
      out[static_cast<size_t>(dy) * w + dx] = acc;
    }
  return out;
}

std::vector<double> anchored_convolution(const std::vector<double>& x, int h, int w,
                                         const std::vector<double>& kernel, int k) {
  std::vector<double> out(static_cast<size_t>(h) * w, 0.0);
  for (int p = 0; p < h; ++p)
    for (int q = 0; q < w; ++q) {
      double acc = 0.0;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          int y = p + ky, xx = q + kx;
          if (y >= h || xx >= w) continue;
          acc += x[static_cast<size_t>(y) * w + xx] * kernel[static_cast<size_t>(ky) * k + kx];
        }
      out[static_cast<size_t>(p) * w + q] = acc;
    }
  return out;
}

std::vector<float> conv2d_forward(const std::vector<float>& in, int b, int h, int w, int cin,
                                  const std::vector<float>& kernel, int k, int cout,
                                  const std::vector<float>& bias, int stride, int* out_h,
                                  int* out_w, std::int64_t* mul_count) {
  const int ho = (h + stride - 1) / stride;
  const int wo = (w + stride - 1) / stride;
  const int pad_h = ((ho - 1) * stride + k > h) ? (ho - 1) * stride + k - h : 0;
  const int pad_w = ((wo - 1) * stride + k > w) ? (wo - 1) * stride + k - w : 0;
  const int top = pad_h / 2, left = pad_w / 2;
  *out_h = ho;
  *out_w = wo;
  std::vector<float> out(static_cast<size_t>(b) * ho * wo * cout, 0.0f);
  std::int64_t muls = 0;
  for (int bi = 0; bi < b; ++bi)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int co = 0; co < cout; ++co) {
          double acc = bias.empty() ? 0.0 : static_cast<double>(bias[co]);
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              for (int ci = 0; ci < cin; ++ci) {
                int y = oy * stride + ky - top;
                int x = ox * stride + kx - left;
                float v = 0.0f;
                if (y >= 0 && y < h && x >= 0 && x < w)
                  v = in[((static_cast<size_t>(bi) * h + y) * w + x) * cin + ci];
                acc += static_cast<double>(v) *
                       kernel[((static_cast<size_t>(ky) * k + kx) * cin + ci) * cout + co];
                ++muls;
              }
          out[((static_cast<size_t>(bi) * ho + oy) * wo + ox) * cout + co] =
              static_cast<float>(acc);
        }
  if (mul_count) *mul_count += muls;
  return out;
}

std::vector<cd> eml_forward(const std::vector<cd>& in, int b, int h, int w, int cin,
                            const std::vector<cd>& weights, int cout,
                            std::int64_t* mul_count) {
  std::vector<cd> out(static_cast<size_t>(b) * h * w * cout, cd(0.0, 0.0));
  std::int64_t muls = 0;
  for (int bi = 0; bi < b; ++bi)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int co = 0; co < cout; ++co) {
          cd acc(0.0, 0.0);
          for (int ci = 0; ci < cin; ++ci) {
            cd a = std::conj(in[((static_cast<size_t>(bi) * h + y) * w + x) * cin + ci]);
            cd wv = weights[((static_cast<size_t>(y) * w + x) * cin + ci) * cout + co];
            acc += a * wv;
            muls += 4;
          }
          out[((static_cast<size_t>(bi) * h + y) * w + x) * cout + co] = acc;
        }
  if (mul_count) *mul_count += muls;
  return out;
}

}  // namespace reference
}  // namespace tfdm
