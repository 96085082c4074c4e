// Pins the direct-sum reference implementations to hand-computed values and
// to each other (transform product identity vs direct correlation). The
// fast engine is tested against these elsewhere; this file makes sure the
// oracle itself cannot drift.

#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

#include "tfdm/reference.hpp"
#include "tfdm/rng.hpp"

using tfdm::reference::cd;

TEST_CASE("plane transform matches hand-expanded sums") {
  // 1x3 row: X[v] = sum_x x[x] e^{-2pi i v x / 3}
  std::vector<cd> row = {{1, 0}, {2, 0}, {3, 0}};
  std::vector<cd> R = tfdm::reference::dft2_plane(row, 1, 3);
  CHECK(std::abs(R[0] - cd(6, 0)) < 1e-12);
  CHECK(std::abs(R[1] - cd(-1.5, std::sqrt(3.0) / 2.0)) < 1e-12);
  CHECK(std::abs(R[2] - cd(-1.5, -std::sqrt(3.0) / 2.0)) < 1e-12);

  std::vector<cd> sq = {{1, 0}, {2, 0}, {3, 0}, {4, 0}};
  std::vector<cd> S = tfdm::reference::dft2_plane(sq, 2, 2);
  CHECK(std::abs(S[0] - cd(10, 0)) < 1e-12);
  CHECK(std::abs(S[1] - cd(-2, 0)) < 1e-12);
  CHECK(std::abs(S[2] - cd(-4, 0)) < 1e-12);
  CHECK(std::abs(S[3] - cd(0, 0)) < 1e-12);
}

TEST_CASE("inverse plane transform is the exact inverse") {
  tfdm::Rng rng(21);
  for (int h : {1, 2, 3, 5}) {
    for (int w : {1, 2, 4, 7}) {
      std::vector<cd> x(static_cast<size_t>(h) * w);
      for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      std::vector<cd> back = tfdm::reference::idft2_plane(tfdm::reference::dft2_plane(x, h, w), h, w);
      double worst = 0.0;
      for (size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(back[i] - x[i]));
      CHECK(worst < 1e-11);
    }
  }
}

TEST_CASE("circular cross-correlation: hand example with wraparound") {
  // u = [1,2,3], v = [10,20,30] on a 1x3 ring:
  //   R[d] = sum_x u[x] * v[(x+d) mod 3]
  std::vector<double> u = {1, 2, 3}, v = {10, 20, 30};
  std::vector<double> r = tfdm::reference::circular_cross_correlation(u, v, 1, 3);
  CHECK(r[0] == doctest::Approx(1 * 10 + 2 * 20 + 3 * 30));  // 140
  CHECK(r[1] == doctest::Approx(1 * 20 + 2 * 30 + 3 * 10));  // 110
  CHECK(r[2] == doctest::Approx(1 * 30 + 2 * 10 + 3 * 20));  // 110
}

TEST_CASE("anchored convolution: hand example and zero padding") {
  // 2x2 image, 2x2 kernel anchored top-left; positions past the edge read 0.
  std::vector<double> x = {1, 2, 3, 4};
  std::vector<double> k = {1, 10, 100, 1000};
  std::vector<double> z = tfdm::reference::anchored_convolution(x, 2, 2, k, 2);
  CHECK(z[0] == doctest::Approx(1 * 1 + 2 * 10 + 3 * 100 + 4 * 1000));
  CHECK(z[1] == doctest::Approx(2 * 1 + 4 * 100));
  CHECK(z[2] == doctest::Approx(3 * 1 + 4 * 10));
  CHECK(z[3] == doctest::Approx(4 * 1));
}

TEST_CASE("transform product with conjugation equals circular cross-correlation") {
  tfdm::Rng rng(22);
  for (int h : {2, 3, 4, 6}) {
    for (int w : {2, 5, 8}) {
      const size_t n = static_cast<size_t>(h) * w;
      std::vector<double> u(n), v(n);
      for (auto& e : u) e = rng.uniform(-1, 1);
      for (auto& e : v) e = rng.uniform(-1, 1);
      std::vector<cd> uc(n), vc(n);
      for (size_t i = 0; i < n; ++i) {
        uc[i] = {u[i], 0};
        vc[i] = {v[i], 0};
      }
      std::vector<cd> U = tfdm::reference::dft2_plane(uc, h, w);
      std::vector<cd> V = tfdm::reference::dft2_plane(vc, h, w);
      std::vector<cd> prod(n);
      for (size_t i = 0; i < n; ++i) prod[i] = std::conj(U[i]) * V[i];
      std::vector<cd> corr = tfdm::reference::idft2_plane(prod, h, w);
      std::vector<double> want = tfdm::reference::circular_cross_correlation(u, v, h, w);
      double worst = 0.0;
      for (size_t i = 0; i < n; ++i) {
        worst = std::max(worst, tt::rel_err(corr[i].real(), want[i]));
        worst = std::max(worst, std::abs(corr[i].imag()));
      }
      INFO(h << "x" << w);
      CHECK(worst < 1e-10);
    }
  }
}

TEST_CASE("negative control: dropping the conjugation breaks the identity") {
  tfdm::Rng rng(23);
  const int h = 4, w = 4;
  const size_t n = h * w;
  std::vector<double> u(n), v(n);
  for (auto& e : u) e = rng.uniform(-1, 1);
  for (auto& e : v) e = rng.uniform(-1, 1);
  std::vector<cd> uc(n), vc(n);
  for (size_t i = 0; i < n; ++i) {
    uc[i] = {u[i], 0};
    vc[i] = {v[i], 0};
  }
  std::vector<cd> U = tfdm::reference::dft2_plane(uc, h, w);
  std::vector<cd> V = tfdm::reference::dft2_plane(vc, h, w);
  std::vector<cd> prod(n);
  for (size_t i = 0; i < n; ++i) prod[i] = U[i] * V[i];  // conj(U) is the correct factor
  std::vector<cd> wrong = tfdm::reference::idft2_plane(prod, h, w);
  std::vector<double> want = tfdm::reference::circular_cross_correlation(u, v, h, w);
  double worst = 0.0;
  for (size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(wrong[i].real() - want[i]));
  // The unconjugated product is a circular convolution instead; on random
  // planes the two differ by O(1).
  CHECK(worst > 1e-3);
}

TEST_CASE("multichannel convolution: one-channel hand example, stride and multiply count") {
  // 1x(3x3x1) image, identity-ish 3x3 kernel with a single off-center tap.
  std::vector<float> img = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<float> kernel(9 * 1 * 1, 0.0f);
  kernel[(0 * 3 + 0) * 1 + 0] = 1.0f;  // top-left tap
  std::vector<float> bias = {0.5f};
  int oh = 0, ow = 0;
  std::int64_t muls = 0;
  std::vector<float> out = tfdm::reference::conv2d_forward(img, 1, 3, 3, 1, kernel, 3, 1, bias, 1,
                                                           &oh, &ow, &muls);
  REQUIRE(oh == 3);
  REQUIRE(ow == 3);
  // "same" padding for k=3, stride 1 centers the kernel, so the top-left
  // tap reads the pixel one up and one left.
  CHECK(out[0 * 3 + 0] == doctest::Approx(0.5));      // reads padding
  CHECK(out[1 * 3 + 1] == doctest::Approx(1 + 0.5));  // reads pixel (0,0)
  CHECK(out[2 * 3 + 2] == doctest::Approx(5 + 0.5));  // reads pixel (1,1)
  // Every output position charges all k*k*cin taps.
  CHECK(muls == 9 * 9);

  std::int64_t muls2 = 0;
  out = tfdm::reference::conv2d_forward(img, 1, 3, 3, 1, kernel, 3, 1, bias, 2, &oh, &ow, &muls2);
  REQUIRE(oh == 2);  // ceil(3/2)
  REQUIRE(ow == 2);
  CHECK(muls2 == 4 * 9);
}

TEST_CASE("frequency product layer reference: frozen example and multiply count") {
  // Input spectrum all (1+2i), single in/out channel, weights all (3-1i):
  // out = conj(1+2i)*(3-1i) = (1-2i)*(3-1i) = 1-7i at every bin.
  const int h = 2, w = 3;
  const size_t n = h * w;
  std::vector<cd> in(n, cd(1, 2)), wts(n, cd(3, -1));
  std::int64_t muls = 0;
  std::vector<cd> out = tfdm::reference::eml_forward(in, 1, h, w, 1, wts, 1, &muls);
  REQUIRE(out.size() == n);
  for (const cd& o : out) CHECK(std::abs(o - cd(1, -7)) < 1e-12);
  CHECK(muls == 4 * static_cast<std::int64_t>(n));

  // Two input channels sum after the per-channel product.
  std::vector<cd> in2(n * 2, cd(1, 2)), wts2(n * 2, cd(3, -1));
  std::int64_t muls2 = 0;
  std::vector<cd> out2 = tfdm::reference::eml_forward(in2, 1, h, w, 2, wts2, 1, &muls2);
  for (const cd& o : out2) CHECK(std::abs(o - cd(2, -14)) < 1e-12);
  CHECK(muls2 == 2 * 4 * static_cast<std::int64_t>(n));
}
