#include "tfdm/dft.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace tfdm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

int smallest_factor(int n) {
  if (n % 2 == 0) return 2;
  for (int p = 3; static_cast<std::int64_t>(p) * p <= n; p += 2)
    if (n % p == 0) return p;
  return n;
}
}  // namespace

FftPlan::FftPlan(int n) : n_(n) {
  if (n < 1) throw ShapeError("transform length must be >= 1");
  tw_.resize(n);
  for (int j = 0; j < n; ++j) {
    double a = -kTwoPi * j / n;
    tw_[j] = cd(std::cos(a), std::sin(a));
  }
}

// Decimation in time on the smallest prime factor p of len:
//   X[k1 + m*k2] = sum_r w_len^(r*k1) * w_p^(r*k2) * Y_r[k1]
// where Y_r is the length-m transform of the r-th residue class. `mult`
// maps exponents at the current level onto the master table: the level's
// unit root w_len^j equals tw_[j*mult] with mult = n_/len.
void FftPlan::rec(const cd* in, std::int64_t stride, cd* out, int len, int mult,
                  cd* scratch) const {
  if (len == 1) {
    out[0] = in[0];
    return;
  }
  int p = smallest_factor(len);
  if (p == len) {  // prime: direct sum
    for (int k = 0; k < len; ++k) {
      cd acc(0.0, 0.0);
      std::int64_t jk = 0;
      for (int j = 0; j < len; ++j) {
        acc += in[j * stride] * tw_[(jk % len) * mult];
        jk += k;
      }
      out[k] = acc;
    }
    return;
  }
  const int m = len / p;
  for (int r = 0; r < p; ++r)
    rec(in + r * stride, stride * p, out + static_cast<std::int64_t>(r) * m, m, mult * p,
        scratch);
  // Combine the p sub-transforms. zr holds the twiddled k1-th bin of each.
  cd zr_small[64];
  std::vector<cd> zr_big;
  cd* zr = zr_small;
  if (p > 64) {
    zr_big.resize(p);
    zr = zr_big.data();
  }
  for (int k1 = 0; k1 < m; ++k1) {
    for (int r = 0; r < p; ++r) {
      std::int64_t e = static_cast<std::int64_t>(r) * k1 * mult % n_;
      zr[r] = out[static_cast<std::int64_t>(r) * m + k1] * tw_[e];
    }
    for (int k2 = 0; k2 < p; ++k2) {
      cd acc(0.0, 0.0);
      for (int r = 0; r < p; ++r) {
        std::int64_t e = static_cast<std::int64_t>(r) * k2 * m % len * mult;
        acc += zr[r] * tw_[e];
      }
      scratch[k1 + static_cast<std::int64_t>(m) * k2] = acc;
    }
  }
  for (int i = 0; i < len; ++i) out[i] = scratch[i];
}

void FftPlan::forward(const cd* in, cd* out, cd* scratch) const {
  rec(in, 1, out, n_, 1, scratch);
}

const FftPlan& plan_for(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<FftPlan>> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::make_unique<FftPlan>(n)).first;
  return *it->second;
}

void PlaneWorkspace::resize(int h, int w) {
  int m = h > w ? h : w;
  plane.resize(static_cast<size_t>(h) * w);
  line.resize(m);
  out_line.resize(m);
  scratch.resize(m);
}

// The inverse is conj(forward(conj(x))) / (h*w); conjugating the whole
// plane once on each side lets both directions share the forward plan.
void plane_dft2(PlaneWorkspace& ws, int h, int w, bool inverse) {
  const FftPlan& row_plan = plan_for(w);
  const FftPlan& col_plan = plan_for(h);
  cd* plane = ws.plane.data();
  const std::int64_t total = static_cast<std::int64_t>(h) * w;
  if (inverse)
    for (std::int64_t i = 0; i < total; ++i) plane[i] = std::conj(plane[i]);
  for (int y = 0; y < h; ++y) {
    cd* row = plane + static_cast<std::int64_t>(y) * w;
    row_plan.forward(row, ws.out_line.data(), ws.scratch.data());
    for (int x = 0; x < w; ++x) row[x] = ws.out_line[x];
  }
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) ws.line[y] = plane[static_cast<std::int64_t>(y) * w + x];
    col_plan.forward(ws.line.data(), ws.out_line.data(), ws.scratch.data());
    for (int y = 0; y < h; ++y) plane[static_cast<std::int64_t>(y) * w + x] = ws.out_line[y];
  }
  if (inverse) {
    double scale = 1.0 / static_cast<double>(total);
    for (std::int64_t i = 0; i < total; ++i) plane[i] = std::conj(plane[i]) * scale;
  }
}

}  // namespace tfdm
