#pragma once

#include <string>
#include <vector>

#include "tfdm/layers.hpp"

namespace tfdm {

// Fully connected building block on flat row-major matrices (rows = batch).
// Weight layout w[i * out + o].
template <typename T>
struct DenseCore {
  int in = 0, out = 0;
  std::vector<T> w, b, g_w, g_b;
  std::vector<T> cached_in;  // batch * in
  int cached_rows = 0;

  void init(int in_, int out_, Rng& rng) {
    in = in_;
    out = out_;
    const double limit = std::sqrt(6.0 / (static_cast<double>(in_) + out_));
    w.resize(static_cast<size_t>(in_) * out_);
    for (auto& v : w) v = static_cast<T>(rng.uniform(-limit, limit));
    b.assign(out_, T(0));
    g_w.assign(w.size(), T(0));
    g_b.assign(b.size(), T(0));
  }

  std::vector<T> forward(const std::vector<T>& x, int rows, bool keep_cache) {
    if (keep_cache) {
      cached_in = x;
      cached_rows = rows;
    }
    std::vector<T> y(static_cast<size_t>(rows) * out);
    parallel_for(rows, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t r = lo; r < hi; ++r) {
        const T* xr = &x[static_cast<size_t>(r) * in];
        T* yr = &y[static_cast<size_t>(r) * out];
        for (int o = 0; o < out; ++o) yr[o] = b[o];
        for (int i = 0; i < in; ++i) {
          const T xv = xr[i];
          if (xv == T(0)) continue;
          const T* wrow = &w[static_cast<size_t>(i) * out];
          for (int o = 0; o < out; ++o) yr[o] += xv * wrow[o];
        }
      }
    });
    return y;
  }

  std::vector<T> backward(const std::vector<T>& gy) {
    const int rows = cached_rows;
    for (int o = 0; o < out; ++o) {
      double acc = 0.0;
      for (int r = 0; r < rows; ++r) acc += static_cast<double>(gy[static_cast<size_t>(r) * out + o]);
      g_b[o] += static_cast<T>(acc);
    }
    parallel_for(in, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t i = lo; i < hi; ++i) {
        T* gw = &g_w[static_cast<size_t>(i) * out];
        for (int r = 0; r < rows; ++r) {
          const double xv = static_cast<double>(cached_in[static_cast<size_t>(r) * in + i]);
          if (xv == 0.0) continue;
          const T* gyr = &gy[static_cast<size_t>(r) * out];
          for (int o = 0; o < out; ++o)
            gw[o] += static_cast<T>(xv * static_cast<double>(gyr[o]));
        }
      }
    });
    std::vector<T> gx(static_cast<size_t>(rows) * in, T(0));
    parallel_for(rows, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t r = lo; r < hi; ++r) {
        T* gxr = &gx[static_cast<size_t>(r) * in];
        const T* gyr = &gy[static_cast<size_t>(r) * out];
        for (int i = 0; i < in; ++i) {
          double acc = 0.0;
          const T* wrow = &w[static_cast<size_t>(i) * out];
          for (int o = 0; o < out; ++o)
            acc += static_cast<double>(wrow[o]) * static_cast<double>(gyr[o]);
          gxr[i] = static_cast<T>(acc);
        }
      }
    });
    return gx;
  }

  std::int64_t params() const { return static_cast<std::int64_t>(in) * out + out; }
};

// One branch of the head: a chain of dense layers with rectification after
// each, operating on an already-flat input.
template <typename T>
struct DenseStack {
  std::vector<DenseCore<T>> layers;
  std::vector<std::vector<std::uint8_t>> relu_masks;

  void init(int flat_in, const std::vector<int>& hidden, Rng& rng) {
    layers.resize(hidden.size());
    int cur = flat_in;
    for (size_t i = 0; i < hidden.size(); ++i) {
      layers[i].init(cur, hidden[i], rng);
      cur = hidden[i];
    }
    relu_masks.resize(hidden.size());
  }

  std::vector<T> forward(std::vector<T> x, int rows, bool keep_cache) {
    for (size_t i = 0; i < layers.size(); ++i) {
      x = layers[i].forward(x, rows, keep_cache);
      auto& mask = relu_masks[i];
      mask.assign(x.size(), 0);
      for (size_t j = 0; j < x.size(); ++j) {
        if (x[j] > T(0))
          mask[j] = 1;
        else
          x[j] = T(0);
      }
    }
    return x;
  }

  std::vector<T> backward(std::vector<T> g) {
    for (size_t ii = layers.size(); ii-- > 0;) {
      const auto& mask = relu_masks[ii];
      for (size_t j = 0; j < g.size(); ++j)
        if (!mask[j]) g[j] = T(0);
      g = layers[ii].backward(g);
    }
    return g;
  }

  int out_width(int flat_in) const { return layers.empty() ? flat_in : layers.back().out; }
};

// Final classifier. Time-domain input: flatten -> dense stack -> logits.
// Frequency-domain input: the real and imaginary planes are flattened and
// fed through separate dense stacks, the branch outputs are concatenated
// (real first), and one shared dense layer produces the logits.
template <typename T>
class HeadLayer : public Layer<T> {
 public:
  HeadLayer(std::string name, bool freq_in, int h, int w, int c, std::vector<int> hidden,
            int classes, Rng& rng)
      : Layer<T>(std::move(name)), freq_in_(freq_in), h_(h), w_(w), c_(c),
        classes_(classes), hidden_(std::move(hidden)) {
    flat_ = h * w * c;
    if (freq_in_) {
      re_.init(flat_, hidden_, rng);
      im_.init(flat_, hidden_, rng);
      final_.init(re_.out_width(flat_) + im_.out_width(flat_), classes_, rng);
    } else {
      re_.init(flat_, hidden_, rng);
      final_.init(re_.out_width(flat_), classes_, rng);
    }
  }

  Feature<T> forward(const Feature<T>& in, Mode mode, const RunContext&) override {
    this->require_freq(in, freq_in_);
    if (in.h() != h_ || in.w() != w_ || in.c() != c_)
      throw ShapeError(this->name_ + ": input " + in.t.shape_str() + " does not match head input " +
                       std::to_string(h_) + "x" + std::to_string(w_) + "x" + std::to_string(c_));
    const int rows = in.b();
    rows_ = rows;
    const bool cache = mode != Mode::kEval;
    std::vector<T> logits;
    if (freq_in_) {
      std::vector<T> a = re_.forward(in.t.re.v, rows, cache);
      std::vector<T> bvec = im_.forward(in.t.im.v, rows, cache);
      const int wa = re_.out_width(flat_), wb = im_.out_width(flat_);
      std::vector<T> cat(static_cast<size_t>(rows) * (wa + wb));
      for (int r = 0; r < rows; ++r) {
        std::copy_n(&a[static_cast<size_t>(r) * wa], wa, &cat[static_cast<size_t>(r) * (wa + wb)]);
        std::copy_n(&bvec[static_cast<size_t>(r) * wb], wb,
                    &cat[static_cast<size_t>(r) * (wa + wb) + wa]);
      }
      logits = final_.forward(cat, rows, cache);
    } else {
      std::vector<T> a = re_.forward(in.t.re.v, rows, cache);
      logits = final_.forward(a, rows, cache);
    }
    Tensor4<T> out(rows, 1, 1, classes_);
    out.v = std::move(logits);
    return Feature<T>::time(std::move(out));
  }

  Feature<T> backward(const Feature<T>& grad_out) override {
    const int rows = rows_;
    std::vector<T> g = final_.backward(grad_out.t.re.v);
    if (freq_in_) {
      const int wa = re_.out_width(flat_), wb = im_.out_width(flat_);
      std::vector<T> ga(static_cast<size_t>(rows) * wa), gb(static_cast<size_t>(rows) * wb);
      for (int r = 0; r < rows; ++r) {
        std::copy_n(&g[static_cast<size_t>(r) * (wa + wb)], wa, &ga[static_cast<size_t>(r) * wa]);
        std::copy_n(&g[static_cast<size_t>(r) * (wa + wb) + wa], wb,
                    &gb[static_cast<size_t>(r) * wb]);
      }
      ga = re_.backward(std::move(ga));
      gb = im_.backward(std::move(gb));
      ComplexTensor4<T> gin(rows, h_, w_, c_);
      gin.re.v = std::move(ga);
      gin.im.v = std::move(gb);
      return Feature<T>::frequency(std::move(gin));
    }
    g = re_.backward(std::move(g));
    Tensor4<T> gin(rows, h_, w_, c_);
    gin.v = std::move(g);
    return Feature<T>::time(std::move(gin));
  }

  void collect_params(std::vector<ParamRef<T>>& out) override {
    auto add_stack = [&](DenseStack<T>& s, const std::string& tag) {
      for (size_t i = 0; i < s.layers.size(); ++i) {
        out.push_back({this->name_ + "/" + tag + "dense" + std::to_string(i) + "/w",
                       &s.layers[i].w, &s.layers[i].g_w});
        out.push_back({this->name_ + "/" + tag + "dense" + std::to_string(i) + "/b",
                       &s.layers[i].b, &s.layers[i].g_b});
      }
    };
    if (freq_in_) {
      add_stack(re_, "re_");
      add_stack(im_, "im_");
    } else {
      add_stack(re_, "");
    }
    out.push_back({this->name_ + "/logits/w", &final_.w, &final_.g_w});
    out.push_back({this->name_ + "/logits/b", &final_.b, &final_.g_b});
  }
  void zero_grad() override {
    auto z = [](DenseStack<T>& s) {
      for (auto& l : s.layers) {
        std::fill(l.g_w.begin(), l.g_w.end(), T(0));
        std::fill(l.g_b.begin(), l.g_b.end(), T(0));
      }
    };
    z(re_);
    if (freq_in_) z(im_);
    std::fill(final_.g_w.begin(), final_.g_w.end(), T(0));
    std::fill(final_.g_b.begin(), final_.g_b.end(), T(0));
  }
  std::int64_t param_count() const override {
    std::int64_t n = final_.params();
    for (const auto& l : re_.layers) n += l.params();
    if (freq_in_)
      for (const auto& l : im_.layers) n += l.params();
    return n;
  }
  int classes() const { return classes_; }

 private:
  bool freq_in_;
  int h_, w_, c_, flat_ = 0, classes_, rows_ = 0;
  std::vector<int> hidden_;
  DenseStack<T> re_, im_;
  DenseCore<T> final_;
};

}  // namespace tfdm
