#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tfdm/errors.hpp"

namespace tfdm {

// One layer in a network description. Only the fields that the kind uses
// are meaningful; validation rejects out-of-place ones being required.
//
// Kinds and their fields:
//   conv            k, out_channels, stride (default 1)     time domain
//   eml             k, out_channels                         frequency domain
//   batch_norm      -                                       either domain
//   activation      -                                       either domain
//   max_pool        window, stride (default = window)       either domain
//   dropout         p                                       either domain
//   bridge_to_freq  -                                       time -> frequency
//   bridge_to_time  -                                       frequency -> time
//   head            hidden (list of layer widths)           either, must be last
struct LayerSpec {
  std::string kind;
  int k = 0;
  int out_channels = 0;
  int window = 0;
  int stride = 0;
  double p = 0.5;
  std::vector<int> hidden;
};

struct TrainHints {
  std::string optimizer = "rmsprop";
  double lr = 1e-4;
  std::vector<int> lr_drop_epochs;  // multiply lr by lr_drop_factor at these epochs
  double lr_drop_factor = 0.1;
};

struct NetworkConfig {
  std::string name;
  int in_h = 0, in_w = 0, in_c = 0;
  int classes = 0;
  std::vector<LayerSpec> layers;
  TrainHints train;
};

// Shape and domain of the tensor flowing between layers.
struct ShapeStep {
  int h = 0, w = 0, c = 0;
  bool freq = false;
};

// Walks the layer list and returns the input shape of every layer plus the
// final output shape (size = layers.size() + 1). Throws ConfigError naming
// the first offending layer. Rules enforced here:
//  - domain compatibility per kind, bridges are the only transitions
//  - at most one bridge_to_freq, before any frequency-domain layer
//  - eml support k must fit the grid at that point
//  - head exists, is unique, and is the last layer
std::vector<ShapeStep> validate_config(const NetworkConfig& cfg);

// JSON round trip. Parsing is strict about types and rejects unknown kinds.
NetworkConfig config_from_json(const std::string& text);
std::string config_to_json(const NetworkConfig& cfg);

// FNV-1a over the canonical serialization; stored in checkpoints so a model
// file cannot be loaded into a differently shaped network.
std::uint64_t config_digest(const NetworkConfig& cfg);

// Built-in architectures, frequency-domain variants next to their
// time-domain twins.
std::vector<std::string> preset_names();
NetworkConfig preset(const std::string& name);

}  // namespace tfdm
