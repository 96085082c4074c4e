#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tfdm/config.hpp"

namespace tfdm {

// Per-layer operation budget for a single input sample.
//
// Counting conventions (also printed in every report header):
//  - mults counts real multiplications in conv kernels, element-wise
//    multiplication layers (4 per complex product), and dense layers.
//    Normalization, activation, pooling and dropout scaling are excluded.
//  - adds counts the reduction adds of those same layers; for the
//    element-wise layers that is the cross-channel sum, 2*(cin-1) real adds
//    per output bin.
//  - dft_ops budgets transforms at c_fft * h * w * c * log2(h*w) per pass
//    and is reported in its own column, never folded into mults.
//  - the per-step weight fixation cost (two transforms per filter pair per
//    spectral layer) is training overhead and reported separately.
struct OpRow {
  std::string layer;
  std::string kind;
  std::string domain;  // "time" or "freq"
  std::int64_t mults = 0;
  std::int64_t adds = 0;
  std::int64_t dft_ops = 0;
  std::int64_t params = 0;
};

struct OpCountReport {
  std::string network;
  int c_fft = 5;
  std::vector<OpRow> rows;
  std::int64_t mult_total = 0, add_total = 0, dft_total = 0, param_total = 0;
  std::int64_t time_mults = 0, freq_mults = 0;
  std::int64_t fixation_dft_per_step = 0;

  std::string to_text() const;
  std::string to_csv() const;
};

OpCountReport count_ops(const NetworkConfig& cfg, int c_fft = 5);

// Side-by-side totals of two networks plus the multiplication ratio.
std::string compare_text(const OpCountReport& a, const OpCountReport& b);
std::string compare_csv(const OpCountReport& a, const OpCountReport& b);

}  // namespace tfdm
