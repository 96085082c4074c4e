#pragma once

#include <unistd.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "tfdm/rng.hpp"
#include "tfdm/tensor.hpp"

namespace tt {

inline double rel_err(double a, double b) {
  double denom = std::max({std::abs(a), std::abs(b), 1e-30});
  return std::abs(a - b) / denom;
}

// Worst relative-or-absolute mismatch between two sequences; absolute when
// both values are tiny so exact zeros compare cleanly.
template <typename A, typename B>
double max_mismatch(const A& a, const B& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double x = static_cast<double>(a[i]);
    double y = static_cast<double>(b[i]);
    double denom = std::max(std::abs(x), std::abs(y));
    double err = denom < 1e-9 ? std::abs(x - y) : std::abs(x - y) / denom;
    worst = std::max(worst, err);
  }
  return worst;
}

template <typename T>
void fill_uniform(std::vector<T>& v, tfdm::Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
tfdm::Tensor4<T> random_tensor(int b, int h, int w, int c, tfdm::Rng& rng) {
  tfdm::Tensor4<T> t(b, h, w, c);
  fill_uniform(t.v, rng);
  return t;
}

// A scratch directory per test binary run, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("tfdm_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace tt
