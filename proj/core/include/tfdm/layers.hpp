#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tfdm/dft.hpp"
#include "tfdm/errors.hpp"
#include "tfdm/parallel.hpp"
#include "tfdm/rng.hpp"
#include "tfdm/spectral.hpp"
#include "tfdm/tensor.hpp"

namespace tfdm {

// Probe runs the training-mode math (batch statistics, step-keyed noise)
// without side effects on running statistics; finite-difference loops use it
// so repeated forward passes at one step see identical functions.
enum class Mode { kTrain, kEval, kProbe };

struct RunContext {
  std::uint64_t seed = 1;
  std::int64_t step = 0;
};

template <typename T>
struct ParamRef {
  std::string name;
  std::vector<T>* value = nullptr;
  std::vector<T>* grad = nullptr;  // null for non-trainable state
};

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  virtual Feature<T> forward(const Feature<T>& in, Mode mode, const RunContext& ctx) = 0;
  virtual Feature<T> backward(const Feature<T>& grad_out) = 0;

  virtual void collect_params(std::vector<ParamRef<T>>& out) { (void)out; }
  virtual void collect_state(std::vector<ParamRef<T>>& out) { (void)out; }
  virtual void zero_grad() {}
  // Multiply-accumulate parameter count and the count of independently
  // trainable degrees of freedom (smaller for fixated spectral weights).
  virtual std::int64_t param_count() const { return 0; }
  virtual std::int64_t free_param_count() const { return param_count(); }

  const std::string& name() const { return name_; }

 protected:
  void require_freq(const Feature<T>& f, bool want) const {
    if (f.freq != want)
      throw ShapeError(name_ + ": expected " + (want ? "frequency" : "time") +
                       "-domain input, got the other domain");
  }
  void require_cache(bool have) const {
    if (!have) throw Error(name_ + ": backward called without a cached forward pass");
  }

  std::string name_;
  Mode fwd_mode_ = Mode::kEval;
};

// ---------------------------------------------------------------------------
// Element-wise multiplication layer (frequency domain).
//
// out[b,:,:,co] = sum_ci conj(in[b,:,:,ci]) * w[:,:,ci,co]
//
// With w the transform of a zero-padded spatial filter, each term is the
// spectrum of the circular cross-correlation of input and filter. Weights
// live on the full h*w grid; weight_fixation() projects them back onto
// k*k-supported real spatial filters after every optimizer step, so the
// trainable degrees of freedom stay at k*k*cin*cout per layer.
// ---------------------------------------------------------------------------
template <typename T>
class EmlLayer : public Layer<T> {
 public:
  EmlLayer(std::string name, int h, int w, int cin, int cout, int k, Rng& rng)
      : Layer<T>(std::move(name)), h_(h), w_(w), cin_(cin), cout_(cout), k_(k),
        mask_(h, w, k) {
    init_spectral_weights(w_re_, w_im_, h, w, cin, cout, k, rng);
    g_re_.assign(w_re_.size(), T(0));
    g_im_.assign(w_im_.size(), T(0));
  }

  Feature<T> forward(const Feature<T>& in, Mode mode, const RunContext&) override {
    this->require_freq(in, true);
    if (in.h() != h_ || in.w() != w_ || in.c() != cin_)
      throw ShapeError(this->name_ + ": input " + in.t.shape_str() + " does not match grid " +
                       std::to_string(h_) + "x" + std::to_string(w_) + "x" +
                       std::to_string(cin_));
    this->fwd_mode_ = mode;
    if (mode != Mode::kEval) {
      cached_in_ = in.t;
      have_cache_ = true;
    }
    const int b = in.b();
    ComplexTensor4<T> out(b, h_, w_, cout_);
    const T* ir = in.t.re.data();
    const T* ii = in.t.im.data();
    T* orr = out.re.data();
    T* oi = out.im.data();
    const std::int64_t plane = static_cast<std::int64_t>(h_) * w_;
    parallel_for(static_cast<std::int64_t>(b) * plane, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t s = lo; s < hi; ++s) {
        const std::int64_t pos = s % plane;  // (y*w + x)
        const std::int64_t in_off = s * cin_;
        const std::int64_t out_off = s * cout_;
        const std::int64_t w_off = pos * cin_ * cout_;
        for (int co = 0; co < cout_; ++co) {
          double ar = 0.0, ai = 0.0;
          for (int ci = 0; ci < cin_; ++ci) {
            const double xr = ir[in_off + ci];
            const double xi = ii[in_off + ci];
            const double wr = w_re_[w_off + static_cast<std::int64_t>(ci) * cout_ + co];
            const double wi = w_im_[w_off + static_cast<std::int64_t>(ci) * cout_ + co];
            // conj(x) * w
            ar += xr * wr + xi * wi;
            ai += xr * wi - xi * wr;
          }
          orr[out_off + co] = static_cast<T>(ar);
          oi[out_off + co] = static_cast<T>(ai);
        }
      }
    });
    return Feature<T>::frequency(std::move(out));
  }

  Feature<T> backward(const Feature<T>& grad_out) override {
    this->require_cache(have_cache_);
    const int b = cached_in_.b();
    const std::int64_t plane = static_cast<std::int64_t>(h_) * w_;
    const T* ir = cached_in_.re.data();
    const T* ii = cached_in_.im.data();
    const T* gr = grad_out.t.re.data();
    const T* gi = grad_out.t.im.data();

    // d/dW: for fixed (y,x,ci,co), sum over batch of in * g (no conjugate;
    // the conjugate on the input in the forward pass cancels against the
    // split-real chain rule, checked against finite differences).
    parallel_for(plane, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t pos = lo; pos < hi; ++pos) {
        const std::int64_t w_off = pos * cin_ * cout_;
        for (int ci = 0; ci < cin_; ++ci)
          for (int co = 0; co < cout_; ++co) {
            double ar = 0.0, ai = 0.0;
            for (int bi = 0; bi < b; ++bi) {
              const std::int64_t in_at = (static_cast<std::int64_t>(bi) * plane + pos) * cin_ + ci;
              const std::int64_t g_at = (static_cast<std::int64_t>(bi) * plane + pos) * cout_ + co;
              const double xr = ir[in_at], xi = ii[in_at];
              const double hr = gr[g_at], hi2 = gi[g_at];
              ar += xr * hr - xi * hi2;
              ai += xr * hi2 + xi * hr;
            }
            const std::int64_t w_at = w_off + static_cast<std::int64_t>(ci) * cout_ + co;
            g_re_[w_at] += static_cast<T>(ar);
            g_im_[w_at] += static_cast<T>(ai);
          }
      }
    });

    // d/d input: sum over co of w * conj(g).
    ComplexTensor4<T> gin(b, h_, w_, cin_);
    T* qr = gin.re.data();
    T* qi = gin.im.data();
    parallel_for(static_cast<std::int64_t>(b) * plane, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t s = lo; s < hi; ++s) {
        const std::int64_t pos = s % plane;
        const std::int64_t w_off = pos * cin_ * cout_;
        const std::int64_t g_off = s * cout_;
        const std::int64_t q_off = s * cin_;
        for (int ci = 0; ci < cin_; ++ci) {
          double ar = 0.0, ai = 0.0;
          for (int co = 0; co < cout_; ++co) {
            const double wr = w_re_[w_off + static_cast<std::int64_t>(ci) * cout_ + co];
            const double wi = w_im_[w_off + static_cast<std::int64_t>(ci) * cout_ + co];
            const double hr = gr[g_off + co], hi2 = gi[g_off + co];
            ar += wr * hr + wi * hi2;
            ai += wi * hr - wr * hi2;
          }
          qr[q_off + ci] = static_cast<T>(ar);
          qi[q_off + ci] = static_cast<T>(ai);
        }
      }
    });
    return Feature<T>::frequency(std::move(gin));
  }

  // Projection back onto the constraint set: spatial, real, k*k support.
  // Applying it twice changes nothing.
  void weight_fixation() {
    const std::int64_t pairs = static_cast<std::int64_t>(cin_) * cout_;
    const std::int64_t plane = static_cast<std::int64_t>(h_) * w_;
    parallel_for(pairs, [&](std::int64_t lo, std::int64_t hi) {
      PlaneWorkspace ws;
      ws.resize(h_, w_);
      for (std::int64_t p = lo; p < hi; ++p) {
        for (std::int64_t i = 0; i < plane; ++i)
          ws.plane[i] = cd(static_cast<double>(w_re_[i * pairs + p]),
                           static_cast<double>(w_im_[i * pairs + p]));
        fixate_plane(ws, mask_);
        for (std::int64_t i = 0; i < plane; ++i) {
          w_re_[i * pairs + p] = static_cast<T>(ws.plane[i].real());
          w_im_[i * pairs + p] = static_cast<T>(ws.plane[i].imag());
        }
      }
    });
  }

  // Energy of the weights outside the constraint set, relative to their
  // total energy: transform to spatial, measure |imag| plus |real outside
  // the k*k corner|. Zero (to rounding) right after weight_fixation().
  double constraint_residual() const {
    const std::int64_t pairs = static_cast<std::int64_t>(cin_) * cout_;
    const std::int64_t plane = static_cast<std::int64_t>(h_) * w_;
    double off = 0.0, total = 0.0;
    PlaneWorkspace ws;
    ws.resize(h_, w_);
    for (std::int64_t p = 0; p < pairs; ++p) {
      for (std::int64_t i = 0; i < plane; ++i)
        ws.plane[i] = cd(static_cast<double>(w_re_[i * pairs + p]),
                         static_cast<double>(w_im_[i * pairs + p]));
      plane_dft2(ws, h_, w_, true);
      for (std::int64_t i = 0; i < plane; ++i) {
        double re = ws.plane[i].real(), im = ws.plane[i].imag();
        total += re * re + im * im;
        im *= im;
        off += im;
        if (!mask_.m[i]) off += re * re;
      }
    }
    return total > 1e-300 ? off / total : 0.0;
  }

  void collect_params(std::vector<ParamRef<T>>& out) override {
    out.push_back({this->name_ + "/w_re", &w_re_, &g_re_});
    out.push_back({this->name_ + "/w_im", &w_im_, &g_im_});
  }
  void zero_grad() override {
    std::fill(g_re_.begin(), g_re_.end(), T(0));
    std::fill(g_im_.begin(), g_im_.end(), T(0));
  }
  std::int64_t param_count() const override {
    return 2 * static_cast<std::int64_t>(h_) * w_ * cin_ * cout_;
  }
  std::int64_t free_param_count() const override {
    return static_cast<std::int64_t>(k_) * k_ * cin_ * cout_;
  }

  int grid_h() const { return h_; }
  int grid_w() const { return w_; }
  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }
  int support() const { return k_; }
  std::vector<T>& weights_re() { return w_re_; }
  std::vector<T>& weights_im() { return w_im_; }

 private:
  int h_, w_, cin_, cout_, k_;
  FixationMask mask_;
  std::vector<T> w_re_, w_im_, g_re_, g_im_;
  ComplexTensor4<T> cached_in_;
  bool have_cache_ = false;
};

// ---------------------------------------------------------------------------
// Plain time-domain convolution, stride s, "same" zero padding
// (out = ceil(in/s), pad split evenly with the extra row/column at the
// bottom/right). Kernel layout ((ky*k+kx)*cin+ci)*cout+co.
// ---------------------------------------------------------------------------
template <typename T>
class ConvLayer : public Layer<T> {
 public:
  ConvLayer(std::string name, int cin, int cout, int k, int stride, Rng& rng)
      : Layer<T>(std::move(name)), cin_(cin), cout_(cout), k_(k), stride_(stride) {
    const double limit = std::sqrt(6.0 / (static_cast<double>(k) * k * cin +
                                          static_cast<double>(k) * k * cout));
    kernel_.resize(static_cast<size_t>(k) * k * cin * cout);
    for (auto& v : kernel_) v = static_cast<T>(rng.uniform(-limit, limit));
    bias_.assign(cout, T(0));
    g_kernel_.assign(kernel_.size(), T(0));
    g_bias_.assign(bias_.size(), T(0));
  }

  Feature<T> forward(const Feature<T>& in, Mode mode, const RunContext&) override {
    this->require_freq(in, false);
    if (in.c() != cin_)
      throw ShapeError(this->name_ + ": expected " + std::to_string(cin_) + " channels, got " +
                       std::to_string(in.c()));
    this->fwd_mode_ = mode;
    const Tensor4<T>& x = in.t.re;
    if (mode != Mode::kEval) {
      cached_in_ = x;
      have_cache_ = true;
    }
    in_h_ = x.h;
    in_w_ = x.w;
    const int ho = (x.h + stride_ - 1) / stride_;
    const int wo = (x.w + stride_ - 1) / stride_;
    const int pad_h = std::max((ho - 1) * stride_ + k_ - x.h, 0);
    const int pad_w = std::max((wo - 1) * stride_ + k_ - x.w, 0);
    top_ = pad_h / 2;
    left_ = pad_w / 2;
    Tensor4<T> out(x.b, ho, wo, cout_);
    parallel_for(x.b, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t bi = lo; bi < hi; ++bi)
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox) {
            T* o = &out.at(static_cast<int>(bi), oy, ox, 0);
            for (int co = 0; co < cout_; ++co) o[co] = bias_[co];
            for (int ky = 0; ky < k_; ++ky) {
              const int y = oy * stride_ + ky - top_;
              if (y < 0 || y >= x.h) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int xx = ox * stride_ + kx - left_;
                if (xx < 0 || xx >= x.w) continue;
                const T* xin = &x.at(static_cast<int>(bi), y, xx, 0);
                const T* kw = &kernel_[(static_cast<size_t>(ky) * k_ + kx) * cin_ * cout_];
                for (int ci = 0; ci < cin_; ++ci) {
                  const T xv = xin[ci];
                  const T* kc = kw + static_cast<size_t>(ci) * cout_;
                  for (int co = 0; co < cout_; ++co) o[co] += xv * kc[co];
                }
              }
            }
          }
    });
    return Feature<T>::time(std::move(out));
  }

  Feature<T> backward(const Feature<T>& grad_out) override {
    this->require_cache(have_cache_);
    const Tensor4<T>& g = grad_out.t.re;
    const Tensor4<T>& x = cached_in_;
    const int ho = g.h, wo = g.w;

    for (int co = 0; co < cout_; ++co) {
      double acc = 0.0;
      for (int bi = 0; bi < g.b; ++bi)
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox) acc += static_cast<double>(g.at(bi, oy, ox, co));
      g_bias_[co] += static_cast<T>(acc);
    }

    parallel_for(static_cast<std::int64_t>(k_) * k_, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t kk = lo; kk < hi; ++kk) {
        const int ky = static_cast<int>(kk / k_);
        const int kx = static_cast<int>(kk % k_);
        for (int ci = 0; ci < cin_; ++ci)
          for (int co = 0; co < cout_; ++co) {
            double acc = 0.0;
            for (int bi = 0; bi < g.b; ++bi)
              for (int oy = 0; oy < ho; ++oy) {
                const int y = oy * stride_ + ky - top_;
                if (y < 0 || y >= x.h) continue;
                for (int ox = 0; ox < wo; ++ox) {
                  const int xx = ox * stride_ + kx - left_;
                  if (xx < 0 || xx >= x.w) continue;
                  acc += static_cast<double>(x.at(bi, y, xx, ci)) *
                         static_cast<double>(g.at(bi, oy, ox, co));
                }
              }
            g_kernel_[(kk * cin_ + ci) * cout_ + co] += static_cast<T>(acc);
          }
      }
    });

    Tensor4<T> gin(x.b, x.h, x.w, cin_);
    parallel_for(x.b, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t bi = lo; bi < hi; ++bi)
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox) {
            const T* go = &g.at(static_cast<int>(bi), oy, ox, 0);
            for (int ky = 0; ky < k_; ++ky) {
              const int y = oy * stride_ + ky - top_;
              if (y < 0 || y >= x.h) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int xx = ox * stride_ + kx - left_;
                if (xx < 0 || xx >= x.w) continue;
                T* q = &gin.at(static_cast<int>(bi), y, xx, 0);
                const T* kw = &kernel_[(static_cast<size_t>(ky) * k_ + kx) * cin_ * cout_];
                for (int ci = 0; ci < cin_; ++ci) {
                  double acc = 0.0;
                  const T* kc = kw + static_cast<size_t>(ci) * cout_;
                  for (int co = 0; co < cout_; ++co)
                    acc += static_cast<double>(kc[co]) * static_cast<double>(go[co]);
                  q[ci] += static_cast<T>(acc);
                }
              }
            }
          }
    });
    return Feature<T>::time(std::move(gin));
  }

  void collect_params(std::vector<ParamRef<T>>& out) override {
    out.push_back({this->name_ + "/kernel", &kernel_, &g_kernel_});
    out.push_back({this->name_ + "/bias", &bias_, &g_bias_});
  }
  void zero_grad() override {
    std::fill(g_kernel_.begin(), g_kernel_.end(), T(0));
    std::fill(g_bias_.begin(), g_bias_.end(), T(0));
  }
  std::int64_t param_count() const override {
    return static_cast<std::int64_t>(k_) * k_ * cin_ * cout_ + cout_;
  }

  std::vector<T>& kernel() { return kernel_; }
  std::vector<T>& bias() { return bias_; }

 private:
  int cin_, cout_, k_, stride_;
  int in_h_ = 0, in_w_ = 0, top_ = 0, left_ = 0;
  std::vector<T> kernel_, bias_, g_kernel_, g_bias_;
  Tensor4<T> cached_in_;
  bool have_cache_ = false;
};

// ---------------------------------------------------------------------------
// Batch normalization core shared by the time-domain layer (one core) and
// the frequency-domain layer (one core per complex component). Per-channel
// statistics over (batch, height, width), biased variance, running stats
// updated as run = momentum*run + (1-momentum)*batch in training mode only.
// ---------------------------------------------------------------------------
template <typename T>
struct BnCore {
  int channels = 0;
  double eps = 1e-5, momentum = 0.9;
  std::vector<T> gamma, beta, g_gamma, g_beta, run_mean, run_var;

  // backward cache
  Tensor4<T> xhat;
  std::vector<double> invstd;
  Mode mode = Mode::kEval;

  void init(int c) {
    channels = c;
    gamma.assign(c, T(1));
    beta.assign(c, T(0));
    g_gamma.assign(c, T(0));
    g_beta.assign(c, T(0));
    run_mean.assign(c, T(0));
    run_var.assign(c, T(1));
  }

  Tensor4<T> forward(const Tensor4<T>& x, Mode m, const std::string& who) {
    mode = m;
    Tensor4<T> out(x.b, x.h, x.w, x.c);
    const std::int64_t n = static_cast<std::int64_t>(x.b) * x.h * x.w;
    if (m == Mode::kEval) {
      std::vector<double> scale(channels), shift(channels);
      for (int c = 0; c < channels; ++c) {
        double inv = 1.0 / std::sqrt(static_cast<double>(run_var[c]) + eps);
        scale[c] = static_cast<double>(gamma[c]) * inv;
        shift[c] = static_cast<double>(beta[c]) - scale[c] * static_cast<double>(run_mean[c]);
      }
      parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
          for (int c = 0; c < channels; ++c)
            out.v[i * channels + c] =
                static_cast<T>(static_cast<double>(x.v[i * channels + c]) * scale[c] + shift[c]);
      });
      return out;
    }
    if (x.b < 2)
      throw ConfigError(who + ": batch statistics need batch size >= 2, got " +
                        std::to_string(x.b));
    std::vector<double> mean(channels, 0.0), var(channels, 0.0);
    for (std::int64_t i = 0; i < n; ++i)
      for (int c = 0; c < channels; ++c) mean[c] += static_cast<double>(x.v[i * channels + c]);
    for (int c = 0; c < channels; ++c) mean[c] /= static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i)
      for (int c = 0; c < channels; ++c) {
        double d = static_cast<double>(x.v[i * channels + c]) - mean[c];
        var[c] += d * d;
      }
    for (int c = 0; c < channels; ++c) var[c] /= static_cast<double>(n);
    invstd.assign(channels, 0.0);
    for (int c = 0; c < channels; ++c) invstd[c] = 1.0 / std::sqrt(var[c] + eps);
    xhat = Tensor4<T>(x.b, x.h, x.w, x.c);
    parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t i = lo; i < hi; ++i)
        for (int c = 0; c < channels; ++c) {
          double xh = (static_cast<double>(x.v[i * channels + c]) - mean[c]) * invstd[c];
          xhat.v[i * channels + c] = static_cast<T>(xh);
          out.v[i * channels + c] =
              static_cast<T>(static_cast<double>(gamma[c]) * xh + static_cast<double>(beta[c]));
        }
    });
    if (m == Mode::kTrain) {
      for (int c = 0; c < channels; ++c) {
        run_mean[c] = static_cast<T>(momentum * static_cast<double>(run_mean[c]) +
                                     (1.0 - momentum) * mean[c]);
        run_var[c] = static_cast<T>(momentum * static_cast<double>(run_var[c]) +
                                    (1.0 - momentum) * var[c]);
      }
    }
    return out;
  }

  Tensor4<T> backward(const Tensor4<T>& g) {
    Tensor4<T> gin(g.b, g.h, g.w, g.c);
    const std::int64_t n = static_cast<std::int64_t>(g.b) * g.h * g.w;
    if (mode == Mode::kEval) {
      for (std::int64_t i = 0; i < n; ++i)
        for (int c = 0; c < channels; ++c) {
          double inv = 1.0 / std::sqrt(static_cast<double>(run_var[c]) + eps);
          gin.v[i * channels + c] = static_cast<T>(static_cast<double>(g.v[i * channels + c]) *
                                                   static_cast<double>(gamma[c]) * inv);
        }
      return gin;
    }
    std::vector<double> sum_g(channels, 0.0), sum_gx(channels, 0.0);
    for (std::int64_t i = 0; i < n; ++i)
      for (int c = 0; c < channels; ++c) {
        double gv = static_cast<double>(g.v[i * channels + c]);
        sum_g[c] += gv;
        sum_gx[c] += gv * static_cast<double>(xhat.v[i * channels + c]);
      }
    for (int c = 0; c < channels; ++c) {
      g_beta[c] += static_cast<T>(sum_g[c]);
      g_gamma[c] += static_cast<T>(sum_gx[c]);
    }
    const double dn = static_cast<double>(n);
    parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t i = lo; i < hi; ++i)
        for (int c = 0; c < channels; ++c) {
          double gv = static_cast<double>(g.v[i * channels + c]);
          double xh = static_cast<double>(xhat.v[i * channels + c]);
          double dx = static_cast<double>(gamma[c]) * invstd[c] *
                      (gv - sum_g[c] / dn - xh * sum_gx[c] / dn);
          gin.v[i * channels + c] = static_cast<T>(dx);
        }
    });
    return gin;
  }
};

template <typename T>
class BatchNormLayer : public Layer<T> {
 public:
  BatchNormLayer(std::string name, int channels) : Layer<T>(std::move(name)) {
    core_.init(channels);
  }

  Feature<T> forward(const Feature<T>& in, Mode mode, const RunContext&) override {
    this->require_freq(in, false);
    return Feature<T>::time(core_.forward(in.t.re, mode, this->name_));
  }
  Feature<T> backward(const Feature<T>& g) override {
    return Feature<T>::time(core_.backward(g.t.re));
  }
  void collect_params(std::vector<ParamRef<T>>& out) override {
    out.push_back({this->name_ + "/gamma", &core_.gamma, &core_.g_gamma});
    out.push_back({this->name_ + "/beta", &core_.beta, &core_.g_beta});
  }
  void collect_state(std::vector<ParamRef<T>>& out) override {
    out.push_back({this->name_ + "/run_mean", &core_.run_mean, nullptr});
    out.push_back({this->name_ + "/run_var", &core_.run_var, nullptr});
  }
  void zero_grad() override {
    std::fill(core_.g_gamma.begin(), core_.g_gamma.end(), T(0));
    std::fill(core_.g_beta.begin(), core_.g_beta.end(), T(0));
  }
  std::int64_t param_count() const override { return 2 * core_.channels; }
  BnCore<T>& core() { return core_; }

 private:
  BnCore<T> core_;
};

// Frequency-domain batch normalization: the real and imaginary planes are
// normalized independently, each with its own affine parameters and running
// statistics. Normalizing the two components separately keeps the layer a
// real-linear operation on split storage.
template <typename T>
class FreqBatchNormLayer : public Layer<T> {
 public:
  FreqBatchNormLayer(std::string name, int channels) : Layer<T>(std::move(name)) {
    re_.init(channels);
    im_.init(channels);
  }

  Feature<T> forward(const Feature<T>& in, Mode mode, const RunContext&) override {
    this->require_freq(in, true);
    ComplexTensor4<T> out;
    out.re = re_.forward(in.t.re, mode, this->name_ + "[re]");
    out.im = im_.forward(in.t.im, mode, this->name_ + "[im]");
    return Feature<T>::frequency(std::move(out));
  }
  Feature<T> backward(const Feature<T>& g) override {
    ComplexTensor4<T> gin;
    gin.re = re_.backward(g.t.re);
    gin.im = im_.backward(g.t.im);
    return Feature<T>::frequency(std::move(gin));
  }
  void collect_params(std::vector<ParamRef<T>>& out) override {
    out.push_back({this->name_ + "/re_gamma", &re_.gamma, &re_.g_gamma});
    out.push_back({this->name_ + "/re_beta", &re_.beta, &re_.g_beta});
    out.push_back({this->name_ + "/im_gamma", &im_.gamma, &im_.g_gamma});
    out.push_back({this->name_ + "/im_beta", &im_.beta, &im_.g_beta});
  }
  void collect_state(std::vector<ParamRef<T>>& out) override {
    out.push_back({this->name_ + "/re_run_mean", &re_.run_mean, nullptr});
    out.push_back({this->name_ + "/re_run_var", &re_.run_var, nullptr});
    out.push_back({this->name_ + "/im_run_mean", &im_.run_mean, nullptr});
    out.push_back({this->name_ + "/im_run_var", &im_.run_var, nullptr});
  }
  void zero_grad() override {
    std::fill(re_.g_gamma.begin(), re_.g_gamma.end(), T(0));
    std::fill(re_.g_beta.begin(), re_.g_beta.end(), T(0));
    std::fill(im_.g_gamma.begin(), im_.g_gamma.end(), T(0));
    std::fill(im_.g_beta.begin(), im_.g_beta.end(), T(0));
  }
  std::int64_t param_count() const override { return 4 * re_.channels; }
  BnCore<T>& real_core() { return re_; }
  BnCore<T>& imag_core() { return im_; }

 private:
  BnCore<T> re_, im_;
};

template <typename T>
class ReluLayer : public Layer<T> {
 public:
  explicit ReluLayer(std::string name) : Layer<T>(std::move(name)) {}
  Feature<T> forward(const Feature<T>& in, Mode, const RunContext&) override {
    this->require_freq(in, false);
    Tensor4<T> out = in.t.re;
    mask_.assign(out.v.size(), 0);
    for (size_t i = 0; i < out.v.size(); ++i) {
      if (out.v[i] > T(0))
        mask_[i] = 1;
      else
        out.v[i] = T(0);
    }
    have_cache_ = true;
    return Feature<T>::time(std::move(out));
  }
  Feature<T> backward(const Feature<T>& g) override {
    this->require_cache(have_cache_);
    Tensor4<T> gin = g.t.re;
    for (size_t i = 0; i < gin.v.size(); ++i)
      if (!mask_[i]) gin.v[i] = T(0);
    return Feature<T>::time(std::move(gin));
  }

 private:
  std::vector<std::uint8_t> mask_;
  bool have_cache_ = false;
};

// Rectification applied to the real and imaginary planes independently.
template <typename T>
class SplitReluLayer : public Layer<T> {
 public:
  explicit SplitReluLayer(std::string name) : Layer<T>(std::move(name)) {}
  Feature<T> forward(const Feature<T>& in, Mode, const RunContext&) override {
    this->require_freq(in, true);
    ComplexTensor4<T> out = in.t;
    mask_re_.assign(out.re.v.size(), 0);
    mask_im_.assign(out.im.v.size(), 0);
    for (size_t i = 0; i < out.re.v.size(); ++i) {
      if (out.re.v[i] > T(0))
        mask_re_[i] = 1;
      else
        out.re.v[i] = T(0);
      if (out.im.v[i] > T(0))
        mask_im_[i] = 1;
      else
        out.im.v[i] = T(0);
    }
    have_cache_ = true;
    return Feature<T>::frequency(std::move(out));
  }
  Feature<T> backward(const Feature<T>& g) override {
    this->require_cache(have_cache_);
    ComplexTensor4<T> gin = g.t;
    for (size_t i = 0; i < gin.re.v.size(); ++i) {
      if (!mask_re_[i]) gin.re.v[i] = T(0);
      if (!mask_im_[i]) gin.im.v[i] = T(0);
    }
    return Feature<T>::frequency(std::move(gin));
  }

 private:
  std::vector<std::uint8_t> mask_re_, mask_im_;
  bool have_cache_ = false;
};

// Shared max-pool machinery: forward picks the first maximum in row-major
// window order (ties go to the earliest element, which keeps results
// deterministic), backward scatters into the recorded positions.
template <typename T>
struct PoolCore {
  int window = 2, stride = 2;
  int in_h = 0, in_w = 0;
  std::vector<std::int64_t> argmax;  // flat index into the input tensor

  Tensor4<T> forward(const Tensor4<T>& x, const std::string& who) {
    const int ho = (x.h - window) / stride + 1;
    const int wo = (x.w - window) / stride + 1;
    if (x.h < window || x.w < window)
      throw ShapeError(who + ": input " + x.shape_str() + " smaller than window " +
                       std::to_string(window));
    in_h = x.h;
    in_w = x.w;
    Tensor4<T> out(x.b, ho, wo, x.c);
    argmax.assign(out.v.size(), 0);
    parallel_for(x.b, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t bi = lo; bi < hi; ++bi)
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox)
            for (int c = 0; c < x.c; ++c) {
              T best = x.at(static_cast<int>(bi), oy * stride, ox * stride, c);
              std::int64_t best_at = x.idx(static_cast<int>(bi), oy * stride, ox * stride, c);
              for (int dy = 0; dy < window; ++dy)
                for (int dx = 0; dx < window; ++dx) {
                  T v = x.at(static_cast<int>(bi), oy * stride + dy, ox * stride + dx, c);
                  if (v > best) {
                    best = v;
                    best_at = x.idx(static_cast<int>(bi), oy * stride + dy, ox * stride + dx, c);
                  }
                }
              std::int64_t o_at = out.idx(static_cast<int>(bi), oy, ox, c);
              out.v[o_at] = best;
              argmax[o_at] = best_at;
            }
    });
    return out;
  }

  Tensor4<T> backward(const Tensor4<T>& g, int b, int c) {
    Tensor4<T> gin(b, in_h, in_w, c);
    for (size_t i = 0; i < g.v.size(); ++i) gin.v[argmax[i]] += g.v[i];
    return gin;
  }
};

template <typename T>
class MaxPoolLayer : public Layer<T> {
 public:
  MaxPoolLayer(std::string name, int window, int stride) : Layer<T>(std::move(name)) {
    core_.window = window;
    core_.stride = stride;
  }
  Feature<T> forward(const Feature<T>& in, Mode, const RunContext&) override {
    this->require_freq(in, false);
    b_ = in.b();
    c_ = in.c();
    have_cache_ = true;
    return Feature<T>::time(core_.forward(in.t.re, this->name_));
  }
  Feature<T> backward(const Feature<T>& g) override {
    this->require_cache(have_cache_);
    return Feature<T>::time(core_.backward(g.t.re, b_, c_));
  }

 private:
  PoolCore<T> core_;
  int b_ = 0, c_ = 0;
  bool have_cache_ = false;
};

// Frequency-domain pooling by a round trip through the time domain:
// inverse transform, take the real plane (the imaginary residual is
// reported, not silently dropped into the gradient), max-pool, forward
// transform at the pooled size. The backward pass chains the pool scatter
// between the two transform adjoints.
template <typename T>
class FreqMaxPoolLayer : public Layer<T> {
 public:
  FreqMaxPoolLayer(std::string name, int window, int stride) : Layer<T>(std::move(name)) {
    core_.window = window;
    core_.stride = stride;
  }

  Feature<T> forward(const Feature<T>& in, Mode, const RunContext&) override {
    this->require_freq(in, true);
    b_ = in.b();
    c_ = in.c();
    ComplexTensor4<T> t = idft2(in.t);
    imag_residual_ = 0.0;
    for (const T& v : t.im.v)
      imag_residual_ = std::max(imag_residual_, std::abs(static_cast<double>(v)));
    Tensor4<T> pooled = core_.forward(t.re, this->name_);
    out_h_ = pooled.h;
    out_w_ = pooled.w;
    have_cache_ = true;
    return Feature<T>::frequency(dft2(pooled));
  }

  Feature<T> backward(const Feature<T>& g) override {
    this->require_cache(have_cache_);
    // adjoint of the pooled-size forward transform: (out_h*out_w) * idft2
    ComplexTensor4<T> gm = idft2(g.t);
    const double scale_out = static_cast<double>(out_h_) * out_w_;
    Tensor4<T> g_pool(g.b(), out_h_, out_w_, c_);
    for (std::int64_t i = 0; i < g_pool.size(); ++i)
      g_pool.v[i] = static_cast<T>(scale_out * static_cast<double>(gm.re.v[i]));
    Tensor4<T> g_grid = core_.backward(g_pool, b_, c_);
    // adjoint of Re(idft2(.)) at the input size: dft2 / (in_h*in_w)
    ComplexTensor4<T> gx = dft2(g_grid);
    const double inv = 1.0 / (static_cast<double>(g_grid.h) * g_grid.w);
    for (std::int64_t i = 0; i < gx.size(); ++i) {
      gx.re.v[i] = static_cast<T>(static_cast<double>(gx.re.v[i]) * inv);
      gx.im.v[i] = static_cast<T>(static_cast<double>(gx.im.v[i]) * inv);
    }
    return Feature<T>::frequency(std::move(gx));
  }

  double imag_residual() const { return imag_residual_; }

 private:
  PoolCore<T> core_;
  int b_ = 0, c_ = 0, out_h_ = 0, out_w_ = 0;
  double imag_residual_ = 0.0;
  bool have_cache_ = false;
};

// Time-domain dropout, inverted scaling. Noise comes from the counter
// generator keyed on (seed, step, layer id, element), so a probe pass at
// the same step sees the same mask and finite differences stay clean.
template <typename T>
class DropoutLayer : public Layer<T> {
 public:
  DropoutLayer(std::string name, double p, int layer_id)
      : Layer<T>(std::move(name)), p_(p), layer_id_(layer_id) {
    if (p < 0.0 || p >= 1.0)
      throw ConfigError(this->name_ + ": dropout rate must lie in [0, 1), got " +
                        std::to_string(p));
  }

  Feature<T> forward(const Feature<T>& in, Mode mode, const RunContext& ctx) override {
    this->require_freq(in, false);
    if (mode == Mode::kEval || p_ == 0.0) {
      have_cache_ = false;
      identity_ = true;
      return in;
    }
    identity_ = false;
    CounterRng rng(dropout_key(ctx.seed, ctx.step, layer_id_));
    Tensor4<T> out = in.t.re;
    keep_.assign(out.v.size(), 0);
    const double inv_keep = 1.0 / (1.0 - p_);
    for (size_t i = 0; i < out.v.size(); ++i) {
      if (rng.uniform01(i) >= p_) {
        keep_[i] = 1;
        out.v[i] = static_cast<T>(static_cast<double>(out.v[i]) * inv_keep);
      } else {
        out.v[i] = T(0);
      }
    }
    have_cache_ = true;
    return Feature<T>::time(std::move(out));
  }

  Feature<T> backward(const Feature<T>& g) override {
    if (identity_) return g;
    this->require_cache(have_cache_);
    Tensor4<T> gin = g.t.re;
    const double inv_keep = 1.0 / (1.0 - p_);
    for (size_t i = 0; i < gin.v.size(); ++i)
      gin.v[i] = keep_[i] ? static_cast<T>(static_cast<double>(gin.v[i]) * inv_keep) : T(0);
    return Feature<T>::time(std::move(gin));
  }

  static std::uint64_t dropout_key(std::uint64_t seed, std::int64_t step, int layer_id) {
    return mix_key(mix_key(seed, static_cast<std::uint64_t>(step)),
                   0x0d0ull + static_cast<std::uint64_t>(layer_id));
  }

 private:
  double p_;
  int layer_id_;
  std::vector<std::uint8_t> keep_;
  bool have_cache_ = false, identity_ = true;
};

// Frequency-domain dropout approximation: instead of zeroing, multiply every
// element by noise drawn from Normal(1, p/2), independently per element and
// per complex component. Mean 1 keeps the expected activation unchanged, so
// inference is an exact identity with no rescaling.
template <typename T>
class FreqDropoutLayer : public Layer<T> {
 public:
  FreqDropoutLayer(std::string name, double p, int layer_id)
      : Layer<T>(std::move(name)), p_(p), layer_id_(layer_id) {
    if (p < 0.0 || p >= 1.0)
      throw ConfigError(this->name_ + ": dropout rate must lie in [0, 1), got " +
                        std::to_string(p));
  }

  Feature<T> forward(const Feature<T>& in, Mode mode, const RunContext& ctx) override {
    this->require_freq(in, true);
    if (mode == Mode::kEval || p_ == 0.0) {
      have_cache_ = false;
      identity_ = true;
      return in;
    }
    identity_ = false;
    CounterRng rng(DropoutLayer<T>::dropout_key(ctx.seed, ctx.step, layer_id_));
    ComplexTensor4<T> out = in.t;
    noise_re_.resize(out.re.v.size());
    noise_im_.resize(out.im.v.size());
    const double sd = p_ / 2.0;
    for (size_t i = 0; i < out.re.v.size(); ++i) {
      noise_re_[i] = static_cast<T>(rng.normal(2 * i, 1.0, sd));
      noise_im_[i] = static_cast<T>(rng.normal(2 * i + 1, 1.0, sd));
      out.re.v[i] *= noise_re_[i];
      out.im.v[i] *= noise_im_[i];
    }
    have_cache_ = true;
    return Feature<T>::frequency(std::move(out));
  }

  Feature<T> backward(const Feature<T>& g) override {
    if (identity_) return g;
    this->require_cache(have_cache_);
    ComplexTensor4<T> gin = g.t;
    for (size_t i = 0; i < gin.re.v.size(); ++i) {
      gin.re.v[i] *= noise_re_[i];
      gin.im.v[i] *= noise_im_[i];
    }
    return Feature<T>::frequency(std::move(gin));
  }

 private:
  double p_;
  int layer_id_;
  std::vector<T> noise_re_, noise_im_;
  bool have_cache_ = false, identity_ = true;
};

// Domain bridges. Forward transforms are exactly dft2 / Re(idft2); the
// backward passes are their adjoints under the split-real inner product:
//   adjoint(dft2 on a real tensor) = h*w * Re(idft2(.))
//   adjoint(Re(idft2(.)))          = dft2(.) / (h*w)
template <typename T>
class BridgeToFreqLayer : public Layer<T> {
 public:
  explicit BridgeToFreqLayer(std::string name) : Layer<T>(std::move(name)) {}
  Feature<T> forward(const Feature<T>& in, Mode, const RunContext&) override {
    this->require_freq(in, false);
    h_ = in.h();
    w_ = in.w();
    have_cache_ = true;
    return Feature<T>::frequency(dft2(in.t.re));
  }
  Feature<T> backward(const Feature<T>& g) override {
    this->require_cache(have_cache_);
    ComplexTensor4<T> gt = idft2(g.t);
    Tensor4<T> gin = std::move(gt.re);
    const double scale = static_cast<double>(h_) * w_;
    for (auto& v : gin.v) v = static_cast<T>(static_cast<double>(v) * scale);
    return Feature<T>::time(std::move(gin));
  }

 private:
  int h_ = 0, w_ = 0;
  bool have_cache_ = false;
};

template <typename T>
class BridgeToTimeLayer : public Layer<T> {
 public:
  explicit BridgeToTimeLayer(std::string name) : Layer<T>(std::move(name)) {}
  Feature<T> forward(const Feature<T>& in, Mode, const RunContext&) override {
    this->require_freq(in, true);
    h_ = in.h();
    w_ = in.w();
    ComplexTensor4<T> t = idft2(in.t);
    imag_residual_ = 0.0;
    for (const T& v : t.im.v)
      imag_residual_ = std::max(imag_residual_, std::abs(static_cast<double>(v)));
    have_cache_ = true;
    return Feature<T>::time(std::move(t.re));
  }
  Feature<T> backward(const Feature<T>& g) override {
    this->require_cache(have_cache_);
    ComplexTensor4<T> gx = dft2(g.t.re);
    const double inv = 1.0 / (static_cast<double>(h_) * w_);
    for (std::int64_t i = 0; i < gx.size(); ++i) {
      gx.re.v[i] = static_cast<T>(static_cast<double>(gx.re.v[i]) * inv);
      gx.im.v[i] = static_cast<T>(static_cast<double>(gx.im.v[i]) * inv);
    }
    return Feature<T>::frequency(std::move(gx));
  }
  double imag_residual() const { return imag_residual_; }

 private:
  int h_ = 0, w_ = 0;
  double imag_residual_ = 0.0;
  bool have_cache_ = false;
};

}  // namespace tfdm
