#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

#include "tfdm/errors.hpp"
#include "tfdm/loss.hpp"
#include "tfdm/optim.hpp"

using namespace tfdm;

TEST_CASE("uniform logits cost ln(classes) and spread gradient evenly") {
  const int b = 4, c = 10;
  Tensor4<double> logits(b, 1, 1, c);
  logits.fill(0.37);  // any constant row is a uniform distribution
  std::vector<int> labels = {0, 3, 9, 5};
  LossResult<double> r = softmax_cross_entropy(logits, labels);
  CHECK(r.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  for (int bi = 0; bi < b; ++bi)
    for (int k = 0; k < c; ++k) {
      double want = (0.1 - (k == labels[bi] ? 1.0 : 0.0)) / b;
      CHECK(logits.v.size() == static_cast<size_t>(b  * c));
      CHECK(r.grad_logits.at(bi, 0, 0, k) == doctest::Approx(want).epsilon(1e-12));
    }
  // Constant rows argmax to index 0; only the first sample is "correct".
  CHECK(r.correct == 1);
}

TEST_CASE("gradient rows sum to zero and point from truth to prediction") {
  Rng rng(60);
  Tensor4<double> logits = tt::random_tensor<double>(3, 1, 1, 7, rng);
  std::vector<int> labels = {2, 0, 6};
  LossResult<double> r = softmax_cross_entropy(logits, labels);
  for (int bi = 0; bi < 3; ++bi) {
    double s = 0.0;
    for (int k = 0; k < 7; ++k) s += r.grad_logits.at(bi, 0, 0, k);
    CHECK(std::abs(s) < 1e-15);
    CHECK(r.grad_logits.at(bi, 0, 0, labels[bi]) < 0.0);  // pull up the truth
  }
}

TEST_CASE("loss gradient agrees with finite differences") {
  Rng rng(61);
  Tensor4<double> logits = tt::random_tensor<double>(2, 1, 1, 5, rng);
  std::vector<int> labels = {4, 1};
  LossResult<double> r = softmax_cross_entropy(logits, labels);
  const double h = 1e-6;
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    double keep = logits.v[i];
    logits.v[i] = keep + h;
    double up = softmax_cross_entropy(logits, labels).loss;
    logits.v[i] = keep - h;
    double dn = softmax_cross_entropy(logits, labels).loss;
    logits.v[i] = keep;
    CHECK(tt::rel_err(r.grad_logits.v[i], (up - dn) / (2 * h)) < 1e-7);
  }
}

TEST_CASE("extreme logits stay finite in both loss and gradient") {
  Tensor4<double> logits(2, 1, 1, 3);
  logits.v = {1000.0, -1000.0, 0.0,
              -1000.0, -1000.0, -1000.0};
  std::vector<int> labels = {1, 2};
  LossResult<double> r = softmax_cross_entropy(logits, labels);
  CHECK(std::isfinite(r.loss));
  // Confident and wrong costs the full margin.
  CHECK(r.loss == doctest::Approx((2000.0 + std::log(3.0)) / 2.0).epsilon(1e-6));
  for (double g : r.grad_logits.v) CHECK(std::isfinite(g));
}

TEST_CASE("loss validates shapes and label ranges") {
  Tensor4<double> bad(2, 2, 1, 3);
  CHECK_THROWS_AS(softmax_cross_entropy(bad, std::vector<int>{0, 1}), ShapeError);
  Tensor4<double> ok(2, 1, 1, 3);
  ok.fill(0.0);
  CHECK_THROWS_AS(softmax_cross_entropy(ok, std::vector<int>{0}), ShapeError);
  CHECK_THROWS_AS(softmax_cross_entropy(ok, std::vector<int>{0, 3}), DataError);
  CHECK_THROWS_AS(softmax_cross_entropy(ok, std::vector<int>{-1, 0}), DataError);
}

namespace {

// One named parameter vector with its gradient, for driving the optimizer
// without a network.
struct Knob {
  std::vector<double> value, grad;
  std::vector<ParamRef<double>> refs() {
    return {{"knob", &value, &grad}};
  }
};

}  // namespace

TEST_CASE("first update steps follow the update rules exactly") {
  // RMSProp from zero state: acc = 0.1 g^2, step = -lr*g/sqrt(0.1 g^2 + 1e-7).
  Knob k;
  k.value = {1.0, -2.0};
  k.grad = {0.5, -3.0};
  Optimizer<double> rms(OptKind::kRmsProp, 0.01);
  auto refs = k.refs();
  rms.step(refs);
  for (int i = 0; i < 2; ++i) {
    double g = (i == 0) ? 0.5 : -3.0;
    double want = (i == 0 ? 1.0 : -2.0) - 0.01 * g / std::sqrt(0.1 * g * g + 1e-7);
    CHECK(k.value[i] == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK(rms.slots()[0][0] == doctest::Approx(0.1 * 0.25).epsilon(1e-12));

  // SGD from zero momentum: v = -lr*g, p += v.
  Knob s;
  s.value = {1.0};
  s.grad = {0.25};
  Optimizer<double> sgd(OptKind::kSgd, 0.1);
  auto srefs = s.refs();
  sgd.step(srefs);
  CHECK(s.value[0] == doctest::Approx(1.0 - 0.1 * 0.25).epsilon(1e-12));
  // Second step folds the momentum term in: v = 0.9*v - lr*g.
  sgd.step(srefs);
  double v1 = -0.1 * 0.25;
  double v2 = 0.9 * v1 - 0.1 * 0.25;
  CHECK(s.value[0] == doctest::Approx(1.0 + v1 + v2).epsilon(1e-12));
}

TEST_CASE("rmsprop normalizes step size across gradient scales") {
  // After many identical gradients acc converges toward g^2, so the step
  // approaches lr regardless of |g|.
  for (double g : {1e-3, 1.0, 1e3}) {
    Knob k;
    k.value = {0.0};
    k.grad = {g};
    Optimizer<double> rms(OptKind::kRmsProp, 0.01);
    auto refs = k.refs();
    double prev = 0.0;
    double step = 0.0;
    for (int i = 0; i < 200; ++i) {
      prev = k.value[0];
      rms.step(refs);
      step = std::abs(k.value[0] - prev);
    }
    CHECK(step == doctest::Approx(0.01).epsilon(1e-2));
  }
}

TEST_CASE("optimizer rejects non-finite gradients") {
  Knob k;
  k.value = {1.0};
  k.grad = {std::nan("")};
  Optimizer<double> rms(OptKind::kRmsProp, 0.01);
  auto refs = k.refs();
  CHECK_THROWS_AS(rms.step(refs), NumericError);
}

TEST_CASE("optimizer kind names round trip") {
  CHECK(std::string(opt_kind_name(OptKind::kRmsProp)) == "rmsprop");
  CHECK(std::string(opt_kind_name(OptKind::kSgd)) == "sgd");
}
