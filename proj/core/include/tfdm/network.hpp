#pragma once

#include <memory>
#include <vector>

#include "tfdm/config.hpp"
#include "tfdm/head.hpp"
#include "tfdm/layers.hpp"

namespace tfdm {

// A validated, built network: the layer stack plus the bookkeeping needed
// for training (per-step context for noise keys, fixation targets).
template <typename T>
class Network {
 public:
  Network(NetworkConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    std::vector<ShapeStep> steps = validate_config(cfg_);
    ctx_.seed = seed;
    Rng rng(mix_key(seed, 0x1717ull));
    for (size_t i = 0; i < cfg_.layers.size(); ++i) {
      const LayerSpec& l = cfg_.layers[i];
      const ShapeStep& in = steps[i];
      const std::string nm = "l" + std::to_string(i) + "." + l.kind;
      const int layer_id = static_cast<int>(i);
      if (l.kind == "conv") {
        layers_.push_back(std::make_unique<ConvLayer<T>>(nm, in.c, l.out_channels, l.k,
                                                         l.stride > 0 ? l.stride : 1, rng));
      } else if (l.kind == "eml") {
        auto e = std::make_unique<EmlLayer<T>>(nm, in.h, in.w, in.c, l.out_channels, l.k, rng);
        emls_.push_back(e.get());
        layers_.push_back(std::move(e));
      } else if (l.kind == "batch_norm") {
        if (in.freq)
          layers_.push_back(std::make_unique<FreqBatchNormLayer<T>>(nm, in.c));
        else
          layers_.push_back(std::make_unique<BatchNormLayer<T>>(nm, in.c));
      } else if (l.kind == "activation") {
        if (in.freq)
          layers_.push_back(std::make_unique<SplitReluLayer<T>>(nm));
        else
          layers_.push_back(std::make_unique<ReluLayer<T>>(nm));
      } else if (l.kind == "max_pool") {
        int window = l.window > 0 ? l.window : 2;
        int stride = l.stride > 0 ? l.stride : window;
        if (in.freq)
          layers_.push_back(std::make_unique<FreqMaxPoolLayer<T>>(nm, window, stride));
        else
          layers_.push_back(std::make_unique<MaxPoolLayer<T>>(nm, window, stride));
      } else if (l.kind == "dropout") {
        if (in.freq)
          layers_.push_back(std::make_unique<FreqDropoutLayer<T>>(nm, l.p, layer_id));
        else
          layers_.push_back(std::make_unique<DropoutLayer<T>>(nm, l.p, layer_id));
      } else if (l.kind == "bridge_to_freq") {
        layers_.push_back(std::make_unique<BridgeToFreqLayer<T>>(nm));
      } else if (l.kind == "bridge_to_time") {
        layers_.push_back(std::make_unique<BridgeToTimeLayer<T>>(nm));
      } else if (l.kind == "head") {
        layers_.push_back(std::make_unique<HeadLayer<T>>(nm, in.freq, in.h, in.w, in.c,
                                                         l.hidden, cfg_.classes, rng));
      }
    }
  }

  // Runs the stack on a time-domain image batch, returns logits [b,1,1,classes].
  Tensor4<T> forward(const Tensor4<T>& images, Mode mode) {
    if (images.h != cfg_.in_h || images.w != cfg_.in_w || images.c != cfg_.in_c)
      throw ShapeError("network " + cfg_.name + " expects " + std::to_string(cfg_.in_h) + "x" +
                       std::to_string(cfg_.in_w) + "x" + std::to_string(cfg_.in_c) +
                       " input, got " + images.shape_str());
    Feature<T> f = Feature<T>::time(images);
    for (auto& l : layers_) f = l->forward(f, mode, ctx_);
    return f.t.re;
  }

  // Backpropagates d(loss)/d(logits); gradients accumulate into the layers.
  void backward(const Tensor4<T>& grad_logits) {
    Feature<T> g = Feature<T>::time(grad_logits);
    for (size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (auto& l : layers_) l->collect_params(out);
    return out;
  }
  std::vector<ParamRef<T>> state() {
    std::vector<ParamRef<T>> out;
    for (auto& l : layers_) l->collect_state(out);
    return out;
  }
  void zero_grad() {
    for (auto& l : layers_) l->zero_grad();
  }

  // Projects every spectral weight bank back onto its constraint set; call
  // after each optimizer step.
  void apply_weight_fixation() {
    for (auto* e : emls_) e->weight_fixation();
  }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers_) n += l->param_count();
    return n;
  }
  std::int64_t free_param_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers_) n += l->free_param_count();
    return n;
  }

  const NetworkConfig& config() const { return cfg_; }
  RunContext& ctx() { return ctx_; }
  std::vector<EmlLayer<T>*>& emls() { return emls_; }
  std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }

 private:
  NetworkConfig cfg_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<EmlLayer<T>*> emls_;
  RunContext ctx_;
};

}  // namespace tfdm
