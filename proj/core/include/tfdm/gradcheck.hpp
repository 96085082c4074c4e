#pragma once

#include <string>
#include <vector>

#include "tfdm/loss.hpp"
#include "tfdm/network.hpp"

namespace tfdm {

struct GradCheckEntry {
  std::string param;
  std::int64_t checked = 0;
  double max_rel_err = 0.0;
  double worst_analytic = 0.0, worst_numeric = 0.0;
  std::int64_t worst_index = -1;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  std::string worst_param;

  bool pass(double tol) const { return max_rel_err <= tol; }
};

// Central-difference check of every trainable parameter against the
// backward pass, in double precision. Probe mode keeps batch-statistic and
// noise layers frozen at the current step so the loss is a fixed function
// of the parameters. rel = |a - n| / max(|a|, |n|, 1); the 1 floors the
// denominator so near-zero gradients are compared absolutely.
// max_per_tensor = 0 checks every element. The step is small enough that a
// rectifier or pool-argmax boundary rarely falls inside the probe window;
// truncation stays ~1e-8 in double while the library tolerance is 1e-4.
inline GradCheckReport gradcheck(Network<double>& net, const Tensor4<double>& images,
                                 const std::vector<int>& labels, double h = 1e-4,
                                 std::int64_t max_per_tensor = 0) {
  auto loss_fn = [&]() {
    Tensor4<double> logits = net.forward(images, Mode::kProbe);
    return softmax_cross_entropy(logits, labels).loss;
  };

  net.zero_grad();
  Tensor4<double> logits = net.forward(images, Mode::kProbe);
  LossResult<double> lr = softmax_cross_entropy(logits, labels);
  net.backward(lr.grad_logits);

  GradCheckReport rep;
  for (const ParamRef<double>& p : net.params()) {
    GradCheckEntry e;
    e.param = p.name;
    std::vector<double>& v = *p.value;
    const std::vector<double>& g = *p.grad;
    const std::int64_t n = static_cast<std::int64_t>(v.size());
    // Evenly strided subsample when capped, so every region gets probed.
    std::int64_t count = (max_per_tensor > 0 && max_per_tensor < n) ? max_per_tensor : n;
    for (std::int64_t s = 0; s < count; ++s) {
      std::int64_t i = (count == n) ? s : (s * n) / count;
      const double keep = v[i];
      v[i] = keep + h;
      double up = loss_fn();
      v[i] = keep - h;
      double dn = loss_fn();
      v[i] = keep;
      double numeric = (up - dn) / (2.0 * h);
      double analytic = g[i];
      double denom = std::max({std::abs(analytic), std::abs(numeric), 1.0});
      double rel = std::abs(analytic - numeric) / denom;
      if (rel > e.max_rel_err) {
        e.max_rel_err = rel;
        e.worst_analytic = analytic;
        e.worst_numeric = numeric;
        e.worst_index = i;
      }
      ++e.checked;
    }
    if (e.max_rel_err > rep.max_rel_err) {
      rep.max_rel_err = e.max_rel_err;
      rep.worst_param = e.param;
    }
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

}  // namespace tfdm
