#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tfdm/errors.hpp"
#include "tfdm/layers.hpp"

namespace tfdm {

enum class OptKind { kRmsProp, kSgd };

inline const char* opt_kind_name(OptKind k) {
  return k == OptKind::kRmsProp ? "rmsprop" : "sgd";
}

// RMSProp: acc <- 0.9*acc + 0.1*g^2,  p <- p - lr*g/sqrt(acc + 1e-7)
// (epsilon sits inside the square root).
// SGD with momentum: v <- m*v - lr*g,  p <- p + v.
// Slot state is kept per parameter tensor, in parameter order; it is part
// of the checkpoint so training resumes exactly.
template <typename T>
class Optimizer {
 public:
  Optimizer(OptKind kind, double lr) : kind_(kind), lr_(lr) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  OptKind kind() const { return kind_; }

  void step(const std::vector<ParamRef<T>>& params) {
    if (slots_.empty()) {
      slots_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) slots_[i].assign(params[i].value->size(), T(0));
    }
    for (size_t i = 0; i < params.size(); ++i) {
      std::vector<T>& p = *params[i].value;
      const std::vector<T>& g = *params[i].grad;
      std::vector<T>& s = slots_[i];
      for (size_t j = 0; j < p.size(); ++j) {
        const double gv = static_cast<double>(g[j]);
        if (!std::isfinite(gv))
          throw NumericError("non-finite gradient in " + params[i].name + " at element " +
                             std::to_string(j));
        if (kind_ == OptKind::kRmsProp) {
          double acc = 0.9 * static_cast<double>(s[j]) + 0.1 * gv * gv;
          s[j] = static_cast<T>(acc);
          p[j] = static_cast<T>(static_cast<double>(p[j]) - lr_ * gv / std::sqrt(acc + 1e-7));
        } else {
          double v = momentum_ * static_cast<double>(s[j]) - lr_ * gv;
          s[j] = static_cast<T>(v);
          p[j] = static_cast<T>(static_cast<double>(p[j]) + v);
        }
      }
    }
  }

  double momentum() const { return momentum_; }
  void set_momentum(double m) { momentum_ = m; }

  std::vector<std::vector<T>>& slots() { return slots_; }

 private:
  OptKind kind_;
  double lr_;
  double momentum_ = 0.9;
  std::vector<std::vector<T>> slots_;
};

}  // namespace tfdm
