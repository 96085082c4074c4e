#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

#include "tfdm/dft.hpp"
#include "tfdm/errors.hpp"
#include "tfdm/reference.hpp"
#include "tfdm/rng.hpp"

using tfdm::ComplexTensor4;
using tfdm::Tensor4;

namespace {

// Sizes hitting every kernel path: 1, powers of two, odd primes, prime
// powers, and the composite image sizes the networks actually use.
const std::vector<int> kSizes = {1, 2, 3, 4, 5, 7, 8, 9, 11, 12, 16, 25, 27, 28, 32};

}  // namespace

TEST_CASE("two-by-two transform matches the hand computation") {
  // [[1,2],[3,4]]: DC 10, row bin -2, column bin -4, diagonal 0.
  Tensor4<double> x(1, 2, 2, 1);
  x.v = {1, 2, 3, 4};
  ComplexTensor4<double> X = tfdm::dft2(x);
  CHECK(X.re.v[0] == doctest::Approx(10).epsilon(1e-12));
  CHECK(X.re.v[1] == doctest::Approx(-2).epsilon(1e-12));
  CHECK(X.re.v[2] == doctest::Approx(-4).epsilon(1e-12));
  CHECK(X.re.v[3] == doctest::Approx(0).epsilon(1e-12));
  for (double im : X.im.v) CHECK(std::abs(im) < 1e-12);
}

TEST_CASE("constant plane transforms to a pure DC bin") {
  Tensor4<double> x(1, 4, 6, 1);
  for (auto& v : x.v) v = 0.5;
  ComplexTensor4<double> X = tfdm::dft2(x);
  CHECK(X.re.v[0] == doctest::Approx(0.5 * 4 * 6).epsilon(1e-12));
  for (size_t i = 1; i < X.re.v.size(); ++i) {
    CHECK(std::abs(X.re.v[i]) < 1e-12);
    CHECK(std::abs(X.im.v[i]) < 1e-12);
  }
}

TEST_CASE("inverse undoes forward across sizes, batches and channels") {
  tfdm::Rng rng(11);
  for (int h : kSizes) {
    for (int w : {h, 3}) {
      Tensor4<double> x = tt::random_tensor<double>(2, h, w, 2, rng);
      ComplexTensor4<double> back = tfdm::idft2(tfdm::dft2(x));
      double worst = 0.0;
      for (std::int64_t i = 0; i < x.size(); ++i) {
        worst = std::max(worst, std::abs(back.re.v[i] - x.v[i]));
        worst = std::max(worst, std::abs(back.im.v[i]));
      }
      INFO("size " << h << "x" << w);
      CHECK(worst < 1e-10);
    }
  }
}

TEST_CASE("transform is linear") {
  tfdm::Rng rng(12);
  Tensor4<double> a = tt::random_tensor<double>(1, 12, 7, 1, rng);
  Tensor4<double> b = tt::random_tensor<double>(1, 12, 7, 1, rng);
  Tensor4<double> mix(1, 12, 7, 1);
  const double ka = 2.25, kb = -0.75;
  for (std::int64_t i = 0; i < mix.size(); ++i) mix.v[i] = ka * a.v[i] + kb * b.v[i];
  ComplexTensor4<double> A = tfdm::dft2(a), B = tfdm::dft2(b), M = tfdm::dft2(mix);
  double worst = 0.0;
  for (std::int64_t i = 0; i < M.size(); ++i) {
    worst = std::max(worst, std::abs(M.re.v[i] - (ka * A.re.v[i] + kb * B.re.v[i])));
    worst = std::max(worst, std::abs(M.im.v[i] - (ka * A.im.v[i] + kb * B.im.v[i])));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("real input gives a conjugate-symmetric spectrum") {
  tfdm::Rng rng(13);
  const int h = 6, w = 9;
  Tensor4<double> x = tt::random_tensor<double>(1, h, w, 1, rng);
  ComplexTensor4<double> X = tfdm::dft2(x);
  double worst = 0.0;
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      int mu = (h - u) % h, mv = (w - v) % w;
      worst = std::max(worst, std::abs(X.re.v[u * w + v] - X.re.v[mu * w + mv]));
      worst = std::max(worst, std::abs(X.im.v[u * w + v] + X.im.v[mu * w + mv]));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("fast engine agrees with the direct-sum reference both ways") {
  tfdm::Rng rng(14);
  for (int h : {1, 2, 3, 4, 5, 6, 7, 8}) {
    for (int w : {1, 3, 5, 8}) {
      std::vector<tfdm::reference::cd> plane(static_cast<size_t>(h) * w);
      Tensor4<double> xr(1, h, w, 1);
      Tensor4<double> xi(1, h, w, 1);
      for (size_t i = 0; i < plane.size(); ++i) {
        double re = rng.uniform(-1, 1), im = rng.uniform(-1, 1);
        plane[i] = {re, im};
        xr.v[i] = re;
        xi.v[i] = im;
      }
      ComplexTensor4<double> x(1, h, w, 1);
      x.re = xr;
      x.im = xi;

      std::vector<tfdm::reference::cd> want = tfdm::reference::dft2_plane(plane, h, w);
      ComplexTensor4<double> got = tfdm::dft2(x);
      double worst = 0.0;
      for (size_t i = 0; i < plane.size(); ++i) {
        worst = std::max(worst, std::abs(got.re.v[i] - want[i].real()));
        worst = std::max(worst, std::abs(got.im.v[i] - want[i].imag()));
      }
      INFO("forward " << h << "x" << w);
      CHECK(worst < 1e-9);

      std::vector<tfdm::reference::cd> iwant = tfdm::reference::idft2_plane(plane, h, w);
      ComplexTensor4<double> igot = tfdm::idft2(x);
      worst = 0.0;
      for (size_t i = 0; i < plane.size(); ++i) {
        worst = std::max(worst, std::abs(igot.re.v[i] - iwant[i].real()));
        worst = std::max(worst, std::abs(igot.im.v[i] - iwant[i].imag()));
      }
      INFO("inverse " << h << "x" << w);
      CHECK(worst < 1e-9);
    }
  }
}

TEST_CASE("energy is preserved up to the grid normalization") {
  tfdm::Rng rng(15);
  for (int n : {5, 8, 28}) {
    Tensor4<float> x = tt::random_tensor<float>(2, n, n, 3, rng);
    CHECK(tfdm::parseval_gap(x) < 1e-4);
  }
  Tensor4<double> x = tt::random_tensor<double>(1, 27, 16, 2, rng);
  CHECK(tfdm::parseval_gap(x) < 1e-10);
}

TEST_CASE("non-finite input is rejected with the offending coordinate") {
  Tensor4<double> x(1, 4, 4, 1);
  for (auto& v : x.v) v = 1.0;
  x.v[1 * 4 + 2] = std::nan("");
  CHECK_THROWS_WITH_AS(tfdm::dft2(x), doctest::Contains("y=1"), tfdm::NumericError);
}

TEST_CASE("planes transform independently across batch and channel") {
  tfdm::Rng rng(16);
  Tensor4<double> both = tt::random_tensor<double>(2, 5, 4, 2, rng);
  ComplexTensor4<double> whole = tfdm::dft2(both);
  for (int b = 0; b < 2; ++b) {
    for (int c = 0; c < 2; ++c) {
      Tensor4<double> one(1, 5, 4, 1);
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 4; ++x) one.v[y * 4 + x] = both.at(b, y, x, c);
      ComplexTensor4<double> single = tfdm::dft2(one);
      double worst = 0.0;
      for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 4; ++x) {
          worst = std::max(worst, std::abs(single.re.v[y * 4 + x] - whole.re.at(b, y, x, c)));
          worst = std::max(worst, std::abs(single.im.v[y * 4 + x] - whole.im.at(b, y, x, c)));
        }
      }
      CHECK(worst < 1e-12);
    }
  }
}
