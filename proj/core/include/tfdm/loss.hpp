#pragma once

#include <cmath>
#include <vector>

#include "tfdm/errors.hpp"
#include "tfdm/tensor.hpp"

namespace tfdm {

template <typename T>
struct LossResult {
  double loss = 0.0;        // mean over the batch
  Tensor4<T> grad_logits;   // d(mean loss)/d(logits)
  int correct = 0;          // argmax matches, ties broken toward lower index
};

// Numerically stable softmax cross entropy over logits [b,1,1,classes].
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor4<T>& logits, const std::vector<int>& labels) {
  if (logits.h != 1 || logits.w != 1)
    throw ShapeError("logits must be [b,1,1,classes], got " + logits.shape_str());
  if (static_cast<int>(labels.size()) != logits.b)
    throw ShapeError("label count " + std::to_string(labels.size()) +
                     " does not match batch " + std::to_string(logits.b));
  const int b = logits.b, c = logits.c;
  LossResult<T> res;
  res.grad_logits = Tensor4<T>(b, 1, 1, c);
  double total = 0.0;
  for (int bi = 0; bi < b; ++bi) {
    if (labels[bi] < 0 || labels[bi] >= c)
      throw DataError("label " + std::to_string(labels[bi]) + " out of range [0, " +
                      std::to_string(c) + ")");
    const T* row = &logits.v[static_cast<size_t>(bi) * c];
    double mx = static_cast<double>(row[0]);
    int arg = 0;
    for (int k = 1; k < c; ++k)
      if (static_cast<double>(row[k]) > mx) {
        mx = static_cast<double>(row[k]);
        arg = k;
      }
    if (arg == labels[bi]) ++res.correct;
    double lse = 0.0;
    for (int k = 0; k < c; ++k) lse += std::exp(static_cast<double>(row[k]) - mx);
    lse = std::log(lse);
    total += lse + mx - static_cast<double>(row[labels[bi]]);
    for (int k = 0; k < c; ++k) {
      double p = std::exp(static_cast<double>(row[k]) - mx - lse);
      double g = (p - (k == labels[bi] ? 1.0 : 0.0)) / static_cast<double>(b);
      res.grad_logits.v[static_cast<size_t>(bi) * c + k] = static_cast<T>(g);
    }
  }
  res.loss = total / static_cast<double>(b);
  return res;
}

}  // namespace tfdm
