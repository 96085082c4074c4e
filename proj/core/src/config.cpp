#include "tfdm/config.hpp"

#include <set>

#include "json.hpp"

namespace tfdm {

using nlohmann::json;

namespace {

const std::set<std::string>& known_kinds() {
  static const std::set<std::string> k = {"conv",    "eml",      "batch_norm",
                                          "activation", "max_pool", "dropout",
                                          "bridge_to_freq", "bridge_to_time", "head"};
  return k;
}

[[noreturn]] void bad_layer(size_t i, const LayerSpec& l, const std::string& why) {
  throw ConfigError("layer " + std::to_string(i) + " (" + l.kind + "): " + why);
}

}  // namespace

std::vector<ShapeStep> validate_config(const NetworkConfig& cfg) {
  if (cfg.in_h < 1 || cfg.in_w < 1 || cfg.in_c < 1)
    throw ConfigError("input dimensions must be positive, got " + std::to_string(cfg.in_h) +
                      "x" + std::to_string(cfg.in_w) + "x" + std::to_string(cfg.in_c));
  if (cfg.classes < 2) throw ConfigError("need at least 2 classes");
  if (cfg.layers.empty()) throw ConfigError("network has no layers");

  std::vector<ShapeStep> steps;
  ShapeStep s{cfg.in_h, cfg.in_w, cfg.in_c, false};
  steps.push_back(s);
  int bridges_to_freq = 0;
  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    const LayerSpec& l = cfg.layers[i];
    if (!known_kinds().count(l.kind)) bad_layer(i, l, "unknown layer kind");
    const bool last = i + 1 == cfg.layers.size();
    if (l.kind == "head") {
      if (!last) bad_layer(i, l, "head must be the last layer");
      for (int hdim : l.hidden)
        if (hdim < 1) bad_layer(i, l, "hidden width must be >= 1");
      s = ShapeStep{1, 1, cfg.classes, false};
      steps.push_back(s);
      continue;
    }
    if (last) bad_layer(i, l, "the last layer must be a head");
    if (l.kind == "conv") {
      if (s.freq) bad_layer(i, l, "convolution needs a time-domain input");
      int stride = l.stride > 0 ? l.stride : 1;
      if (l.k < 1) bad_layer(i, l, "kernel size must be >= 1");
      if (l.out_channels < 1) bad_layer(i, l, "out_channels must be >= 1");
      s.h = (s.h + stride - 1) / stride;
      s.w = (s.w + stride - 1) / stride;
      s.c = l.out_channels;
    } else if (l.kind == "eml") {
      if (!s.freq) bad_layer(i, l, "element-wise multiplication needs a frequency-domain input");
      if (l.k < 1) bad_layer(i, l, "support size must be >= 1");
      if (l.k > s.h || l.k > s.w)
        bad_layer(i, l, "support " + std::to_string(l.k) + " exceeds grid " +
                            std::to_string(s.h) + "x" + std::to_string(s.w));
      if (l.out_channels < 1) bad_layer(i, l, "out_channels must be >= 1");
      s.c = l.out_channels;
    } else if (l.kind == "batch_norm" || l.kind == "activation") {
      // shape preserved, both domains fine
    } else if (l.kind == "dropout") {
      if (l.p < 0.0 || l.p >= 1.0) bad_layer(i, l, "rate must lie in [0, 1)");
    } else if (l.kind == "max_pool") {
      int window = l.window > 0 ? l.window : 2;
      int stride = l.stride > 0 ? l.stride : window;
      if (s.h < window || s.w < window)
        bad_layer(i, l, "window " + std::to_string(window) + " larger than grid " +
                            std::to_string(s.h) + "x" + std::to_string(s.w));
      s.h = (s.h - window) / stride + 1;
      s.w = (s.w - window) / stride + 1;
    } else if (l.kind == "bridge_to_freq") {
      if (s.freq) bad_layer(i, l, "input is already in the frequency domain");
      if (++bridges_to_freq > 1) bad_layer(i, l, "at most one bridge_to_freq per network");
      s.freq = true;
    } else if (l.kind == "bridge_to_time") {
      if (!s.freq) bad_layer(i, l, "input is already in the time domain");
      s.freq = false;
    }
    steps.push_back(s);
  }
  if (cfg.layers.back().kind != "head")
    throw ConfigError("the last layer must be a head");
  return steps;
}

NetworkConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("not valid JSON: ") + e.what());
  }
  NetworkConfig cfg;
  try {
    cfg.name = j.at("name").get<std::string>();
    cfg.in_h = j.at("input").at("h").get<int>();
    cfg.in_w = j.at("input").at("w").get<int>();
    cfg.in_c = j.at("input").at("c").get<int>();
    cfg.classes = j.at("classes").get<int>();
    for (const auto& lj : j.at("layers")) {
      LayerSpec l;
      l.kind = lj.at("kind").get<std::string>();
      if (lj.contains("k")) l.k = lj.at("k").get<int>();
      if (lj.contains("out_channels")) l.out_channels = lj.at("out_channels").get<int>();
      if (lj.contains("window")) l.window = lj.at("window").get<int>();
      if (lj.contains("stride")) l.stride = lj.at("stride").get<int>();
      if (lj.contains("p")) l.p = lj.at("p").get<double>();
      if (lj.contains("hidden")) l.hidden = lj.at("hidden").get<std::vector<int>>();
      cfg.layers.push_back(std::move(l));
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      if (t.contains("optimizer")) cfg.train.optimizer = t.at("optimizer").get<std::string>();
      if (t.contains("lr")) cfg.train.lr = t.at("lr").get<double>();
      if (t.contains("lr_drop_epochs"))
        cfg.train.lr_drop_epochs = t.at("lr_drop_epochs").get<std::vector<int>>();
      if (t.contains("lr_drop_factor"))
        cfg.train.lr_drop_factor = t.at("lr_drop_factor").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("missing or mistyped field: ") + e.what());
  }
  return cfg;
}

std::string config_to_json(const NetworkConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["input"] = {{"h", cfg.in_h}, {"w", cfg.in_w}, {"c", cfg.in_c}};
  j["classes"] = cfg.classes;
  j["layers"] = json::array();
  for (const auto& l : cfg.layers) {
    json lj;
    lj["kind"] = l.kind;
    if (l.kind == "conv") {
      lj["k"] = l.k;
      lj["out_channels"] = l.out_channels;
      if (l.stride > 1) lj["stride"] = l.stride;
    } else if (l.kind == "eml") {
      lj["k"] = l.k;
      lj["out_channels"] = l.out_channels;
    } else if (l.kind == "max_pool") {
      lj["window"] = l.window;
      if (l.stride > 0 && l.stride != l.window) lj["stride"] = l.stride;
    } else if (l.kind == "dropout") {
      lj["p"] = l.p;
    } else if (l.kind == "head") {
      lj["hidden"] = l.hidden;
    }
    j["layers"].push_back(std::move(lj));
  }
  j["train"] = {{"optimizer", cfg.train.optimizer},
                {"lr", cfg.train.lr},
                {"lr_drop_epochs", cfg.train.lr_drop_epochs},
                {"lr_drop_factor", cfg.train.lr_drop_factor}};
  return j.dump(2);
}

std::uint64_t config_digest(const NetworkConfig& cfg) {
  // nlohmann objects iterate in sorted key order, so dump() is canonical.
  std::string s = config_to_json(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

LayerSpec conv(int k, int out, int stride = 1) {
  LayerSpec l;
  l.kind = "conv";
  l.k = k;
  l.out_channels = out;
  l.stride = stride;
  return l;
}
LayerSpec eml(int k, int out) {
  LayerSpec l;
  l.kind = "eml";
  l.k = k;
  l.out_channels = out;
  return l;
}
LayerSpec bn() {
  LayerSpec l;
  l.kind = "batch_norm";
  return l;
}
LayerSpec act() {
  LayerSpec l;
  l.kind = "activation";
  return l;
}
LayerSpec pool(int window, int stride = 0) {
  LayerSpec l;
  l.kind = "max_pool";
  l.window = window;
  l.stride = stride > 0 ? stride : window;
  return l;
}
LayerSpec dropout(double p) {
  LayerSpec l;
  l.kind = "dropout";
  l.p = p;
  return l;
}
LayerSpec bridge_f() {
  LayerSpec l;
  l.kind = "bridge_to_freq";
  return l;
}
LayerSpec head(std::vector<int> hidden) {
  LayerSpec l;
  l.kind = "head";
  l.hidden = std::move(hidden);
  return l;
}

NetworkConfig lenet_cnn() {
  NetworkConfig c;
  c.name = "lenet-cnn";
  c.in_h = c.in_w = 28;
  c.in_c = 1;
  c.classes = 10;
  c.layers = {conv(5, 6), bn(), act(), pool(2), conv(5, 16), bn(), act(), pool(2),
              dropout(0.5), head({120, 84})};
  c.train.optimizer = "rmsprop";
  c.train.lr = 1e-4;
  return c;
}

NetworkConfig tfdm_lenet() {
  NetworkConfig c = lenet_cnn();
  c.name = "tfdm-lenet";
  c.layers = {bridge_f(), eml(5, 6), bn(), act(), pool(2), eml(5, 16), bn(), act(), pool(2),
              dropout(0.5), head({120, 84})};
  return c;
}

// Five stages on 32x32 input; the grid is 2x2 by the last stage, so the
// frequency variants clip the last spectral support to 2.
NetworkConfig vgg_small_cnn() {
  NetworkConfig c;
  c.name = "vgg-small-cnn";
  c.in_h = c.in_w = 32;
  c.in_c = 3;
  c.classes = 10;
  c.layers = {conv(3, 64),  bn(), act(), pool(2), conv(3, 128), bn(), act(), pool(2),
              conv(3, 256), bn(), act(), pool(2), conv(3, 512), bn(), act(), pool(2),
              conv(3, 512), bn(), act(), pool(2), dropout(0.5), head({512})};
  c.train.optimizer = "rmsprop";
  c.train.lr = 1e-4;
  return c;
}

NetworkConfig vgg_small_tfdm() {
  NetworkConfig c = vgg_small_cnn();
  c.name = "vgg-small-tfdm";
  c.layers = {bridge_f(),   eml(3, 64),  bn(), act(), pool(2), eml(3, 128), bn(), act(),
              pool(2),      eml(3, 256), bn(), act(), pool(2), eml(3, 512), bn(), act(),
              pool(2),      eml(2, 512), bn(), act(), pool(2), dropout(0.5), head({512})};
  return c;
}

NetworkConfig vgg_large_cnn() {
  NetworkConfig c;
  c.name = "vgg-large-cnn";
  c.in_h = c.in_w = 32;
  c.in_c = 3;
  c.classes = 10;
  c.layers = {conv(3, 64),  bn(), act(), conv(3, 64),  bn(), act(), pool(2),
              conv(3, 128), bn(), act(), conv(3, 128), bn(), act(), pool(2),
              conv(3, 256), bn(), act(), conv(3, 256), bn(), act(), pool(2),
              conv(3, 512), bn(), act(), conv(3, 512), bn(), act(), conv(3, 512), bn(), act(), pool(2),
              conv(3, 512), bn(), act(), conv(3, 512), bn(), act(), conv(3, 512), bn(), act(), pool(2),
              dropout(0.5), head({512})};
  c.train.optimizer = "rmsprop";
  c.train.lr = 1e-4;
  return c;
}

// First three stages stay in the time domain, the deep stages run as
// element-wise multiplications.
NetworkConfig vgg_large_mixture() {
  NetworkConfig c = vgg_large_cnn();
  c.name = "vgg-large-mixture";
  c.layers = {conv(3, 64),  bn(), act(), conv(3, 64),  bn(), act(), pool(2),
              conv(3, 128), bn(), act(), conv(3, 128), bn(), act(), pool(2),
              conv(3, 256), bn(), act(), conv(3, 256), bn(), act(), pool(2),
              bridge_f(),
              eml(3, 512), bn(), act(), eml(3, 512), bn(), act(), eml(3, 512), bn(), act(), pool(2),
              eml(2, 512), bn(), act(), eml(2, 512), bn(), act(), eml(2, 512), bn(), act(), pool(2),
              dropout(0.5), head({512})};
  return c;
}

NetworkConfig alexnet_cnn() {
  NetworkConfig c;
  c.name = "alexnet-cnn";
  c.in_h = c.in_w = 224;
  c.in_c = 3;
  c.classes = 1000;
  c.layers = {conv(11, 96, 4), bn(), act(), pool(3, 2),
              conv(5, 256),    bn(), act(), pool(3, 2),
              conv(3, 384),    bn(), act(),
              conv(3, 384),    bn(), act(),
              conv(3, 256),    bn(), act(), pool(3, 2),
              dropout(0.5),    head({4096, 4096})};
  c.train.optimizer = "sgd";
  c.train.lr = 0.01;
  c.train.lr_drop_epochs = {60, 90};
  c.train.lr_drop_factor = 0.1;
  return c;
}

// The strided stem stays a convolution; everything after the first pooling
// runs in the frequency domain.
NetworkConfig alexnet_tfdm() {
  NetworkConfig c = alexnet_cnn();
  c.name = "alexnet-tfdm";
  c.layers = {conv(11, 96, 4), bn(), act(), pool(3, 2),
              bridge_f(),
              eml(5, 256),     bn(), act(), pool(3, 2),
              eml(3, 384),     bn(), act(),
              eml(3, 384),     bn(), act(),
              eml(3, 256),     bn(), act(), pool(3, 2),
              dropout(0.5),    head({4096, 4096})};
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"lenet-cnn",     "tfdm-lenet",     "vgg-small-cnn", "vgg-small-tfdm",
          "vgg-large-cnn", "vgg-large-mixture", "alexnet-cnn", "alexnet-tfdm"};
}

NetworkConfig preset(const std::string& name) {
  if (name == "lenet-cnn") return lenet_cnn();
  if (name == "tfdm-lenet") return tfdm_lenet();
  if (name == "vgg-small-cnn") return vgg_small_cnn();
  if (name == "vgg-small-tfdm") return vgg_small_tfdm();
  if (name == "vgg-large-cnn") return vgg_large_cnn();
  if (name == "vgg-large-mixture") return vgg_large_mixture();
  if (name == "alexnet-cnn") return alexnet_cnn();
  if (name == "alexnet-tfdm") return alexnet_tfdm();
  throw ConfigError("unknown preset '" + name + "'; run the presets command for the list");
}

}  // namespace tfdm
