#include "tfdm/verify.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "tfdm/data.hpp"
#include "tfdm/gradcheck.hpp"
#include "tfdm/loss.hpp"
#include "tfdm/network.hpp"
#include "tfdm/optim.hpp"
#include "tfdm/reference.hpp"

namespace tfdm {

namespace {

Tensor4<double> random_plane(int h, int w, Rng& rng, int b = 1, int c = 1) {
  Tensor4<double> t(b, h, w, c);
  for (auto& v : t.v) v = rng.uniform(-1.0, 1.0);
  return t;
}

double rel_or_abs(double got, double want) {
  double denom = std::max(std::abs(want), 1.0);
  return std::abs(got - want) / denom;
}

struct Suite {
  VerifyReport rep;
  void add(const std::string& name, double measured, double tol, const std::string& detail = "") {
    VerifyCheck c;
    c.name = name;
    c.measured = measured;
    c.tolerance = tol;
    c.pass = measured <= tol;
    c.detail = detail;
    rep.checks.push_back(std::move(c));
  }
  void add_flag(const std::string& name, bool pass, const std::string& detail = "") {
    VerifyCheck c;
    c.name = name;
    c.pass = pass;
    c.measured = pass ? 0.0 : 1.0;
    c.tolerance = 0.0;
    c.detail = detail;
    rep.checks.push_back(std::move(c));
  }
};

std::vector<int> roundtrip_sizes(bool full) {
  if (full) {
    std::vector<int> s;
    for (int n = 1; n <= 32; ++n) s.push_back(n);
    return s;
  }
  return {1, 2, 3, 4, 5, 7, 8, 9, 12, 16, 27, 28};
}

// ------------------------------------------------------------------ dft ---

void check_dft(Suite& s, bool full, Rng& rng) {
  {
    Tensor4<double> x(1, 2, 2, 1);
    x.v = {1, 2, 3, 4};
    ComplexTensor4<double> X = dft2(x);
    double err = 0.0;
    const double want_re[4] = {10, -2, -4, 0};
    for (int i = 0; i < 4; ++i) {
      err = std::max(err, std::abs(X.re.v[i] - want_re[i]));
      err = std::max(err, std::abs(X.im.v[i]));
    }
    s.add("dft.frozen-2x2-bins", err, 1e-12, "bins of [[1,2],[3,4]] vs {10,-2,-4,0}");
  }
  {
    Tensor4<double> x(1, 6, 7, 1);
    x.fill(5.5);
    ComplexTensor4<double> X = dft2(x);
    double err = std::abs(X.re.v[0] - 5.5 * 42.0);
    for (std::int64_t i = 1; i < X.size(); ++i)
      err = std::max(err, std::max(std::abs(X.re.v[i]), std::abs(X.im.v[i])));
    s.add("dft.constant-dc", err, 1e-9, "constant plane concentrates at the zero bin");
  }
  {
    double worst = 0.0;
    for (int n : roundtrip_sizes(full)) {
      Tensor4<double> x = random_plane(n, n, rng, 2, 2);
      ComplexTensor4<double> back = idft2(dft2(x));
      double scale = 0.0, err = 0.0;
      for (std::int64_t i = 0; i < x.size(); ++i) {
        scale = std::max(scale, std::abs(x.v[i]));
        err = std::max(err, std::abs(back.re.v[i] - x.v[i]));
        err = std::max(err, std::abs(back.im.v[i]));
      }
      worst = std::max(worst, err / std::max(scale, 1e-30));
    }
    s.add("dft.roundtrip", worst, 1e-10, "idft2(dft2(x)) == x over the size sweep");
  }
  {
    double worst = 0.0;
    for (int n : {3, 7, 12, 28}) {
      Tensor4<double> a = random_plane(n, n, rng);
      Tensor4<double> b = random_plane(n, n, rng);
      const double al = 1.7, be = -0.4;
      Tensor4<double> mix(1, n, n, 1);
      for (std::int64_t i = 0; i < mix.size(); ++i) mix.v[i] = al * a.v[i] + be * b.v[i];
      ComplexTensor4<double> L = dft2(mix);
      ComplexTensor4<double> A = dft2(a), B = dft2(b);
      for (std::int64_t i = 0; i < L.size(); ++i) {
        worst = std::max(worst, std::abs(L.re.v[i] - (al * A.re.v[i] + be * B.re.v[i])));
        worst = std::max(worst, std::abs(L.im.v[i] - (al * A.im.v[i] + be * B.im.v[i])));
      }
    }
    s.add("dft.linearity", worst, 1e-9, "dft2(a*x + b*y) == a*dft2(x) + b*dft2(y)");
  }
  {
    double worst = 0.0;
    for (int n : {4, 7, 28}) {
      Tensor4<double> x = random_plane(n, n, rng);
      ComplexTensor4<double> X = dft2(x);
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
          int mu = (n - u) % n, mv = (n - v) % n;
          worst = std::max(worst, std::abs(X.re.at(0, u, v, 0) - X.re.at(0, mu, mv, 0)));
          worst = std::max(worst, std::abs(X.im.at(0, u, v, 0) + X.im.at(0, mu, mv, 0)));
        }
    }
    s.add("dft.conjugate-symmetry", worst, 1e-9, "real input: X[u,v] == conj(X[-u,-v])");
  }
  {
    double worst = 0.0;
    for (auto [h, w] : std::vector<std::pair<int, int>>{{1, 1}, {2, 3}, {5, 7}, {8, 8}, {7, 5}}) {
      Tensor4<double> x = random_plane(h, w, rng);
      ComplexTensor4<double> fast = dft2(x);
      std::vector<reference::cd> plane(static_cast<size_t>(h) * w);
      for (std::int64_t i = 0; i < x.size(); ++i) plane[i] = reference::cd(x.v[i], 0.0);
      std::vector<reference::cd> slow = reference::dft2_plane(plane, h, w);
      double scale = 1e-30;
      for (const auto& z : slow) scale = std::max(scale, std::abs(z));
      for (std::int64_t i = 0; i < x.size(); ++i) {
        worst = std::max(worst, std::abs(fast.re.v[i] - slow[i].real()) / scale);
        worst = std::max(worst, std::abs(fast.im.v[i] - slow[i].imag()) / scale);
      }
      // inverse against the slow inverse as well
      ComplexTensor4<double> fast_inv = idft2(fast);
      std::vector<reference::cd> slow_inv = reference::idft2_plane(slow, h, w);
      for (std::int64_t i = 0; i < x.size(); ++i)
        worst = std::max(worst, std::abs(fast_inv.re.v[i] - slow_inv[i].real()));
    }
    s.add("dft.naive-agreement", worst, 1e-9, "plan engine vs direct-sum reference");
  }
  {
    double worst = 0.0;
    std::vector<int> sizes = full ? roundtrip_sizes(true) : std::vector<int>{2, 3, 8, 16, 28};
    Rng frng(rng.next_u64());
    for (int n : sizes) {
      Tensor4<float> x(1, n, n, 2);
      for (auto& v : x.v) v = static_cast<float>(frng.uniform(-1.0, 1.0));
      worst = std::max(worst, parseval_gap(x));
    }
    s.add("dft.parseval", worst, 1e-5, "relative energy gap, single-precision tensors");
  }
  {
    Tensor4<double> x(1, 4, 4, 1);
    x.v[5] = std::nan("");
    bool threw = false;
    std::string msg;
    try {
      dft2(x);
    } catch (const NumericError& e) {
      threw = true;
      msg = e.what();
    }
    s.add_flag("dft.nonfinite-rejected", threw && msg.find("y=1") != std::string::npos,
               "NaN input names the offending index");
  }
}

// ------------------------------------------------- correlation and eml ---

void check_xcorr(Suite& s, bool full, Rng& rng) {
  (void)full;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    int h = 1 + static_cast<int>(rng.next_u64() % 16);
    int w = 1 + static_cast<int>(rng.next_u64() % 16);
    std::vector<double> u(static_cast<size_t>(h) * w), v(u.size());
    for (auto& x : u) x = rng.uniform(-1.0, 1.0);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    Tensor4<double> ut(1, h, w, 1), vt(1, h, w, 1);
    ut.v = u;
    vt.v = v;
    ComplexTensor4<double> U = dft2(ut), V = dft2(vt);
    ComplexTensor4<double> prod(1, h, w, 1);
    for (std::int64_t i = 0; i < U.size(); ++i) {
      // conj(U) * V
      prod.re.v[i] = U.re.v[i] * V.re.v[i] + U.im.v[i] * V.im.v[i];
      prod.im.v[i] = U.re.v[i] * V.im.v[i] - U.im.v[i] * V.re.v[i];
    }
    ComplexTensor4<double> got = idft2(prod);
    std::vector<double> want = reference::circular_cross_correlation(u, v, h, w);
    double scale = 1e-12;
    for (double x : want) scale = std::max(scale, std::abs(x));
    for (std::int64_t i = 0; i < got.size(); ++i)
      worst = std::max(worst, std::abs(got.re.v[i] - want[i]) / scale);
  }
  s.add("xcorr.theorem", worst, 1e-4,
        "idft2(conj(dft2 u) * dft2 v) vs direct circular cross-correlation, 100 pairs");
}

void check_eml(Suite& s, bool full, Rng& rng) {
  {
    // Hand example: input [[1,2],[3,4]], filter [[1,0],[0,1]]; the layer's
    // output spectrum back in the time domain is all fives.
    Tensor4<double> x(1, 2, 2, 1);
    x.v = {1, 2, 3, 4};
    Tensor4<double> filt(1, 2, 2, 1);
    filt.v = {1, 0, 0, 1};
    ComplexTensor4<double> W = lift_filter(filt, 2, 2);
    ComplexTensor4<double> X = dft2(x);
    std::vector<reference::cd> xin(4), win(4);
    for (int i = 0; i < 4; ++i) {
      xin[i] = reference::cd(X.re.v[i], X.im.v[i]);
      win[i] = reference::cd(W.re.v[i], W.im.v[i]);
    }
    std::vector<reference::cd> out = reference::eml_forward(xin, 1, 2, 2, 1, win, 1);
    ComplexTensor4<double> Y(1, 2, 2, 1);
    for (int i = 0; i < 4; ++i) {
      Y.re.v[i] = out[i].real();
      Y.im.v[i] = out[i].imag();
    }
    ComplexTensor4<double> y = idft2(Y);
    double err = 0.0;
    for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(y.re.v[i] - 5.0));
    s.add("eml.frozen-2x2", err, 1e-9, "input [[1,2],[3,4]], filter [[1,0],[0,1]] -> all 5s");
  }
  {
    // A one-hot filter at the origin makes the layer a pure reflection:
    // time output at position p equals input at (-p mod n).
    const int n = 6;
    Tensor4<double> x = random_plane(n, n, rng);
    Tensor4<double> filt(1, 1, 1, 1);
    filt.v = {1.0};
    ComplexTensor4<double> W = lift_filter(filt, n, n);
    ComplexTensor4<double> X = dft2(x);
    ComplexTensor4<double> Y(1, n, n, 1);
    for (std::int64_t i = 0; i < X.size(); ++i) {
      Y.re.v[i] = X.re.v[i] * W.re.v[i] + X.im.v[i] * W.im.v[i];
      Y.im.v[i] = X.re.v[i] * W.im.v[i] - X.im.v[i] * W.re.v[i];
    }
    ComplexTensor4<double> y = idft2(Y);
    double err = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        err = std::max(err, std::abs(y.re.at(0, p, q, 0) -
                                     x.at(0, (n - p) % n, (n - q) % n, 0)));
    s.add("eml.identity-filter-reflects", err, 1e-9,
          "origin delta filter returns the coordinate-reflected input");
  }
  {
    // Interior equivalence against zero-padded convolution: with the filter
    // anchored at its top-left tap, the layer's time-domain output at
    // (-p mod n) equals the padded convolution at p wherever the k*k window
    // stays inside the image (p in [0, n-k]^2, no wraparound).
    const int n = 8, k = 3, cin = full ? 2 : 1;
    double err = 0.0;
    for (int ci = 0; ci < cin; ++ci) {
      std::vector<double> img(n * n), ker(k * k);
      for (auto& v : img) v = rng.uniform(-1.0, 1.0);
      for (auto& v : ker) v = rng.uniform(-1.0, 1.0);
      Tensor4<double> x(1, n, n, 1);
      x.v = img;
      Tensor4<double> filt(1, k, k, 1);
      filt.v = ker;
      ComplexTensor4<double> W = lift_filter(filt, n, n);
      ComplexTensor4<double> X = dft2(x);
      ComplexTensor4<double> Y(1, n, n, 1);
      for (std::int64_t i = 0; i < X.size(); ++i) {
        Y.re.v[i] = X.re.v[i] * W.re.v[i] + X.im.v[i] * W.im.v[i];
        Y.im.v[i] = X.re.v[i] * W.im.v[i] - X.im.v[i] * W.re.v[i];
      }
      ComplexTensor4<double> y = idft2(Y);
      std::vector<double> z = reference::anchored_convolution(img, n, n, ker, k);
      for (int p = 0; p <= n - k; ++p)
        for (int q = 0; q <= n - k; ++q)
          err = std::max(err, std::abs(y.re.at(0, (n - p) % n, (n - q) % n, 0) -
                                       z[static_cast<size_t>(p) * n + q]));
    }
    s.add("eml.interior-equivalence", err, 1e-4,
          "8x8 image, 3x3 filter, non-wrapping interior vs zero-padded convolution");
  }
  {
    // Linearity adjoint check of the layer's input gradient: for the map
    // x -> forward(x), <forward(x), g> must equal <x, backward(g)> under
    // the split-real inner product.
    Rng lrng(42);
    EmlLayer<double> eml("eml.dot", 5, 4, 2, 3, 2, lrng);
    RunContext ctx;
    ComplexTensor4<double> x(2, 5, 4, 2), g(2, 5, 4, 3);
    for (auto& v : x.re.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : x.im.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : g.re.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : g.im.v) v = rng.uniform(-1.0, 1.0);
    Feature<double> y = eml.forward(Feature<double>::frequency(x), Mode::kProbe, ctx);
    Feature<double> gx = eml.backward(Feature<double>::frequency(g));
    double lhs = 0.0, rhs = 0.0;
    for (std::int64_t i = 0; i < y.t.size(); ++i)
      lhs += y.t.re.v[i] * g.re.v[i] + y.t.im.v[i] * g.im.v[i];
    for (std::int64_t i = 0; i < x.size(); ++i)
      rhs += x.re.v[i] * gx.t.re.v[i] + x.im.v[i] * gx.t.im.v[i];
    s.add("eml.input-adjoint-dot", rel_or_abs(lhs, rhs), 1e-10,
          "<forward(x), g> == <x, backward(g)>");
  }
}

void check_fixation(Suite& s, Rng& rng) {
  Rng lrng(99);
  EmlLayer<double> eml("fix", 7, 7, 2, 3, 3, lrng);
  // knock the weights off the constraint set
  for (auto& v : eml.weights_re()) v += rng.uniform(-0.5, 0.5);
  for (auto& v : eml.weights_im()) v += rng.uniform(-0.5, 0.5);
  eml.weight_fixation();
  std::vector<double> once_re = eml.weights_re(), once_im = eml.weights_im();
  double resid = eml.constraint_residual();
  eml.weight_fixation();
  double drift = 0.0, scale = 1e-30;
  for (size_t i = 0; i < once_re.size(); ++i) {
    scale = std::max(scale, std::abs(once_re[i]));
    drift = std::max(drift, std::abs(eml.weights_re()[i] - once_re[i]));
    drift = std::max(drift, std::abs(eml.weights_im()[i] - once_im[i]));
  }
  s.add("fixation.idempotent", drift / scale, 1e-12, "second projection is a no-op");
  s.add("fixation.support-clean", resid, 1e-20,
        "energy outside the k*k real corner after projection");
  s.add_flag("fixation.dof-count",
             eml.free_param_count() == 3LL * 3 * 2 * 3 &&
                 eml.param_count() == 2LL * 7 * 7 * 2 * 3,
             "free parameters k*k*cin*cout, stored 2*h*w*cin*cout");
}

// ---------------------------------------------------- bridges and pool ---

void check_bridges(Suite& s, Rng& rng) {
  RunContext ctx;
  {
    BridgeToFreqLayer<double> to_f("bf");
    BridgeToTimeLayer<double> to_t("bt");
    Tensor4<double> x = random_plane(6, 9, rng, 2, 3);
    Feature<double> f = to_f.forward(Feature<double>::time(x), Mode::kProbe, ctx);
    Feature<double> back = to_t.forward(f, Mode::kProbe, ctx);
    double err = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i)
      err = std::max(err, std::abs(back.t.re.v[i] - x.v[i]));
    err = std::max(err, to_t.imag_residual());
    s.add("bridge.roundtrip", err, 1e-10, "to-frequency then to-time returns the input");
  }
  {
    BridgeToFreqLayer<double> bf("bf");
    Tensor4<double> x = random_plane(5, 7, rng, 2, 2);
    ComplexTensor4<double> g(2, 5, 7, 2);
    for (auto& v : g.re.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : g.im.v) v = rng.uniform(-1.0, 1.0);
    Feature<double> y = bf.forward(Feature<double>::time(x), Mode::kProbe, ctx);
    Feature<double> gx = bf.backward(Feature<double>::frequency(g));
    double lhs = 0.0, rhs = 0.0;
    for (std::int64_t i = 0; i < y.t.size(); ++i)
      lhs += y.t.re.v[i] * g.re.v[i] + y.t.im.v[i] * g.im.v[i];
    for (std::int64_t i = 0; i < x.size(); ++i) rhs += x.v[i] * gx.t.re.v[i];
    s.add("bridge.to-freq-adjoint-dot", rel_or_abs(lhs, rhs), 1e-10, "");
  }
  {
    BridgeToTimeLayer<double> bt("bt");
    ComplexTensor4<double> x(2, 5, 7, 2);
    for (auto& v : x.re.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : x.im.v) v = rng.uniform(-1.0, 1.0);
    Tensor4<double> g = random_plane(5, 7, rng, 2, 2);
    Feature<double> y = bt.forward(Feature<double>::frequency(x), Mode::kProbe, ctx);
    Feature<double> gx = bt.backward(Feature<double>::time(g));
    double lhs = 0.0, rhs = 0.0;
    for (std::int64_t i = 0; i < y.t.size(); ++i) lhs += y.t.re.v[i] * g.v[i];
    for (std::int64_t i = 0; i < x.size(); ++i)
      rhs += x.re.v[i] * gx.t.re.v[i] + x.im.v[i] * gx.t.im.v[i];
    s.add("bridge.to-time-adjoint-dot", rel_or_abs(lhs, rhs), 1e-10, "");
  }
  {
    FreqMaxPoolLayer<double> pool("fp", 2, 2);
    Tensor4<double> xt = random_plane(6, 6, rng, 2, 2);
    ComplexTensor4<double> x = dft2(xt);  // realistic spectra (conj-symmetric)
    ComplexTensor4<double> g(2, 3, 3, 2);
    for (auto& v : g.re.v) v = rng.uniform(-1.0, 1.0);
    for (auto& v : g.im.v) v = rng.uniform(-1.0, 1.0);
    Feature<double> y = pool.forward(Feature<double>::frequency(x), Mode::kProbe, ctx);
    Feature<double> gx = pool.backward(Feature<double>::frequency(g));
    double lhs = 0.0, rhs = 0.0;
    for (std::int64_t i = 0; i < y.t.size(); ++i)
      lhs += y.t.re.v[i] * g.re.v[i] + y.t.im.v[i] * g.im.v[i];
    for (std::int64_t i = 0; i < x.size(); ++i)
      rhs += x.re.v[i] * gx.t.re.v[i] + x.im.v[i] * gx.t.im.v[i];
    double err = rel_or_abs(lhs, rhs);
    err = std::max(err, pool.imag_residual());
    s.add("pool.freq-adjoint-dot", err, 1e-9,
          "pooling round trip adjoint; imaginary residual of a real spectrum");
  }
}

// --------------------------------------------------------- norm layers ---

void check_bn(Suite& s, Rng& rng) {
  RunContext ctx;
  {
    BatchNormLayer<double> bn("bn", 3);
    Tensor4<double> x = random_plane(4, 5, rng, 6, 3);
    for (auto& v : x.v) v = v * 2.3 + 0.7;
    Feature<double> y = bn.forward(Feature<double>::time(x), Mode::kProbe, ctx);
    const std::int64_t n = 6LL * 4 * 5;
    double worst = 0.0;
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0, var = 0.0;
      for (std::int64_t i = 0; i < n; ++i) mean += y.t.re.v[i * 3 + c];
      mean /= static_cast<double>(n);
      for (std::int64_t i = 0; i < n; ++i) {
        double d = y.t.re.v[i * 3 + c] - mean;
        var += d * d;
      }
      var /= static_cast<double>(n);
      worst = std::max(worst, std::abs(mean));
      worst = std::max(worst, std::abs(var - 1.0));
    }
    s.add("bn.normalizes", worst, 1e-4, "train-mode output per channel: mean 0, variance 1");
  }
  {
    BatchNormLayer<double> bn("bn", 2);
    Tensor4<double> x = random_plane(2, 2, rng, 1, 2);
    bool threw = false;
    try {
      bn.forward(Feature<double>::time(x), Mode::kTrain, ctx);
    } catch (const ConfigError&) {
      threw = true;
    }
    s.add_flag("bn.batch1-rejected", threw, "training statistics on a single sample");
  }
  {
    // Correspondence between time-domain normalization and the real branch
    // of frequency-domain normalization. On an antithetic batch {z, -z}
    // both spatial and spectral means vanish, so matching the scale factor
    // gamma_f = gamma_t * sigma_freq_real / sigma_time makes
    //   freq_bn(dft2(x)).re == dft2(time_bn(x)).re exactly.
    const int n = 6, b = 4, c = 2;
    Tensor4<double> x(b, n, n, c);
    for (int bi = 0; bi < b / 2; ++bi)
      for (int yy = 0; yy < n; ++yy)
        for (int xx = 0; xx < n; ++xx)
          for (int ci = 0; ci < c; ++ci) {
            double v = rng.uniform(-1.0, 1.0);
            x.at(2 * bi, yy, xx, ci) = v;
            x.at(2 * bi + 1, yy, xx, ci) = -v;
          }
    const double gamma_t = 1.7;
    const double eps = 1e-5;
    // time-domain statistics
    std::vector<double> var_t(c, 0.0);
    const std::int64_t cnt = static_cast<std::int64_t>(b) * n * n;
    for (std::int64_t i = 0; i < cnt; ++i)
      for (int ci = 0; ci < c; ++ci) var_t[ci] += x.v[i * c + ci] * x.v[i * c + ci];
    for (int ci = 0; ci < c; ++ci) var_t[ci] /= static_cast<double>(cnt);

    BatchNormLayer<double> tbn("tbn", c);
    for (int ci = 0; ci < c; ++ci) tbn.core().gamma[ci] = gamma_t;
    Feature<double> yt = tbn.forward(Feature<double>::time(x), Mode::kProbe, ctx);
    ComplexTensor4<double> want = dft2(yt.t.re);

    ComplexTensor4<double> X = dft2(x);
    std::vector<double> var_f(c, 0.0);
    for (std::int64_t i = 0; i < cnt; ++i)
      for (int ci = 0; ci < c; ++ci) var_f[ci] += X.re.v[i * c + ci] * X.re.v[i * c + ci];
    for (int ci = 0; ci < c; ++ci) var_f[ci] /= static_cast<double>(cnt);

    FreqBatchNormLayer<double> fbn("fbn", c);
    for (int ci = 0; ci < c; ++ci)
      fbn.real_core().gamma[ci] =
          gamma_t * std::sqrt((var_f[ci] + eps) / (var_t[ci] + eps));
    Feature<double> yf = fbn.forward(Feature<double>::frequency(X), Mode::kProbe, ctx);
    double scale = 1e-30, err = 0.0;
    for (std::int64_t i = 0; i < want.size(); ++i) scale = std::max(scale, std::abs(want.re.v[i]));
    for (std::int64_t i = 0; i < want.size(); ++i)
      err = std::max(err, std::abs(yf.t.re.v[i] - want.re.v[i]) / scale);
    s.add("bn.freq-time-correspondence", err, 1e-4,
          "real-branch normalization equals transform of time-domain normalization after rescale");
  }
}

// -------------------------------------------------------------- dropout ---

void check_dropout(Suite& s, bool full) {
  (void)full;
  // Multiplier statistics at p = 0.5: Normal(1, 0.25).
  const std::int64_t draws = 1000000;
  CounterRng crng(mix_key(2024, 0x5eedull));
  double sum = 0.0, sq = 0.0;
  std::int64_t inside = 0;
  for (std::int64_t i = 0; i < draws; ++i) {
    double r = crng.normal(static_cast<std::uint64_t>(i), 1.0, 0.25);
    sum += r;
    sq += r * r;
    if (r >= 0.5 && r <= 1.5) ++inside;
  }
  double mean = sum / draws;
  double sd = std::sqrt(sq / draws - mean * mean);
  double mass = static_cast<double>(inside) / draws;
  s.add("dropout.mean", std::abs(mean - 1.0), 0.01, "multiplier mean at p=0.5");
  s.add("dropout.std", std::abs(sd - 0.25), 0.01, "multiplier standard deviation at p=0.5");
  s.add("dropout.mass-1sigma2", std::abs(mass - 0.954), 0.005,
        "fraction of multipliers inside [0.5, 1.5]");

  RunContext ctx;
  ctx.seed = 5;
  ctx.step = 12;
  FreqDropoutLayer<double> drop("fd", 0.5, 3);
  ComplexTensor4<double> x(2, 4, 4, 2);
  Rng r2(8);
  for (auto& v : x.re.v) v = r2.uniform(-1.0, 1.0);
  for (auto& v : x.im.v) v = r2.uniform(-1.0, 1.0);
  Feature<double> ev = drop.forward(Feature<double>::frequency(x), Mode::kEval, ctx);
  bool identical = ev.t.re.v == x.re.v && ev.t.im.v == x.im.v;
  s.add_flag("dropout.eval-identity", identical, "inference applies no noise and no rescale");

  Feature<double> p1 = drop.forward(Feature<double>::frequency(x), Mode::kProbe, ctx);
  Feature<double> p2 = drop.forward(Feature<double>::frequency(x), Mode::kProbe, ctx);
  s.add_flag("dropout.probe-stable", p1.t.re.v == p2.t.re.v && p1.t.im.v == p2.t.im.v,
             "noise at a fixed step is a pure function of (seed, step, layer, element)");
}

// ------------------------------------------------------------ gradients ---

void check_gradients(Suite& s, bool full) {
  NetworkConfig cfg = mini_mixture_config();
  Network<double> net(cfg, 11);
  Rng rng(31);
  Tensor4<double> x = random_plane(cfg.in_h, cfg.in_w, rng, 3, cfg.in_c);
  std::vector<int> labels = {0, 2, 1};
  GradCheckReport rep = gradcheck(net, x, labels, 1e-4, full ? 0 : 25);
  std::int64_t checked = 0;
  for (const auto& e : rep.entries) checked += e.checked;
  std::ostringstream detail;
  detail << checked << " elements across " << rep.entries.size() << " tensors; worst " <<
      rep.worst_param;
  s.add("grad.mini-network", rep.max_rel_err, 1e-4, detail.str());
}

void check_overfit(Suite& s) {
  // Memorization sanity: a 32-sample set must be drivable to near-zero loss.
  DatasetPair data = synthetic_dataset(32, 8, 28, 28, 1, 10, 77);
  Network<float> net(preset("tfdm-lenet"), 5);
  Optimizer<float> opt(OptKind::kRmsProp, 1e-3);
  Tensor4<float> images;
  std::vector<int> labels;
  std::vector<std::int64_t> rows(32);
  for (int i = 0; i < 32; ++i) rows[i] = i;
  gather_batch(data.train, rows, &images, &labels);
  double best = 1e30;
  int steps = 0;
  for (; steps < 500; ++steps) {
    net.ctx().step += 1;
    net.zero_grad();
    Tensor4<float> logits = net.forward(images, Mode::kTrain);
    LossResult<float> lr = softmax_cross_entropy(logits, labels);
    best = std::min(best, lr.loss);
    if (best < 0.01) break;
    net.backward(lr.grad_logits);
    opt.step(net.params());
    net.apply_weight_fixation();
  }
  std::ostringstream detail;
  detail << "loss " << best << " after " << steps << " steps";
  s.add("train.overfit-32", best, 0.01, detail.str());
}

void check_loss_and_opt(Suite& s) {
  {
    Tensor4<double> logits(3, 1, 1, 10);
    std::vector<int> labels = {1, 5, 9};
    LossResult<double> r = softmax_cross_entropy(logits, labels);
    s.add("loss.uniform-logits", std::abs(r.loss - std::log(10.0)), 1e-12,
          "zero logits give ln(classes)");
  }
  {
    std::vector<double> p = {1.0}, g = {1.0};
    std::vector<ParamRef<double>> refs = {{"p", &p, &g}};
    Optimizer<double> opt(OptKind::kRmsProp, 0.01);
    opt.step(refs);
    double want = 1.0 - 0.01 / std::sqrt(0.1 + 1e-7);
    s.add("opt.rmsprop-one-step", std::abs(p[0] - want), 1e-15,
          "acc = 0.1, delta = -lr/sqrt(acc + 1e-7)");
  }
  {
    std::vector<double> p = {1.0}, g = {1.0};
    std::vector<ParamRef<double>> refs = {{"p", &p, &g}};
    Optimizer<double> opt(OptKind::kSgd, 0.1);
    opt.set_momentum(0.0);
    opt.step(refs);
    s.add("opt.sgd-one-step", std::abs(p[0] - 0.9), 1e-15, "momentum 0: p -= lr*g");
  }
}

}  // namespace

// The input size is chosen so the last frequency grid is 3x3: a 2x2 grid
// would have an all-real spectrum (the 2-point transform kernel is +-1),
// which starves the head's imaginary branch and parks its rectifier units
// exactly on their kinks where finite differences are meaningless.
NetworkConfig mini_mixture_config() {
  NetworkConfig cfg;
  cfg.name = "mini-mixture";
  cfg.in_h = cfg.in_w = 12;
  cfg.in_c = 2;
  cfg.classes = 3;
  auto mk = [](const char* kind) {
    LayerSpec l;
    l.kind = kind;
    return l;
  };
  LayerSpec conv = mk("conv");
  conv.k = 3;
  conv.out_channels = 3;
  conv.stride = 1;
  LayerSpec pool = mk("max_pool");
  pool.window = 2;
  pool.stride = 2;
  LayerSpec drop = mk("dropout");
  drop.p = 0.25;  // live noise: probe mode must hold it fixed for the check
  LayerSpec eml = mk("eml");
  eml.k = 2;
  eml.out_channels = 4;
  LayerSpec head = mk("head");
  head.hidden = {6};
  cfg.layers = {conv, mk("batch_norm"), mk("activation"), pool, drop, mk("bridge_to_freq"),
                eml, mk("batch_norm"), mk("activation"), pool, drop, head};
  return cfg;
}

VerifyReport run_verification(bool full, std::uint64_t seed) {
  Suite s;
  Rng rng(seed);
  check_dft(s, full, rng);
  check_xcorr(s, full, rng);
  check_eml(s, full, rng);
  check_fixation(s, rng);
  check_bridges(s, rng);
  check_bn(s, rng);
  check_dropout(s, full);
  check_loss_and_opt(s);
  check_gradients(s, full);
  if (full) check_overfit(s);
  return s.rep;
}

std::string VerifyReport::to_text() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-34s measured=%.3e tol=%.3e", c.name.c_str(), c.measured,
                  c.tolerance);
    os << (c.pass ? "PASS " : "FAIL ") << buf;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << "\n";
  }
  int passed = 0;
  for (const auto& c : checks) passed += c.pass ? 1 : 0;
  os << (all_pass() ? "VERIFY PASS" : "VERIFY FAIL") << " " << passed << "/" << checks.size()
     << " checks\n";
  return os.str();
}

}  // namespace tfdm
