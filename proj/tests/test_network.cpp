#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

#include "tfdm/config.hpp"
#include "tfdm/errors.hpp"
#include "tfdm/gradcheck.hpp"
#include "tfdm/network.hpp"

using namespace tfdm;

namespace {

// Small two-domain network touching every layer kind.
NetworkConfig mini_net() {
  NetworkConfig cfg;
  cfg.name = "mini";
  cfg.in_h = 6;
  cfg.in_w = 6;
  cfg.in_c = 1;
  cfg.classes = 3;
  LayerSpec l;
  l.kind = "conv";
  l.k = 3;
  l.out_channels = 2;
  cfg.layers.push_back(l);
  l = {};
  l.kind = "batch_norm";
  cfg.layers.push_back(l);
  l = {};
  l.kind = "activation";
  cfg.layers.push_back(l);
  l = {};
  l.kind = "bridge_to_freq";
  cfg.layers.push_back(l);
  l = {};
  l.kind = "eml";
  l.k = 2;
  l.out_channels = 3;
  cfg.layers.push_back(l);
  l = {};
  l.kind = "batch_norm";
  cfg.layers.push_back(l);
  l = {};
  l.kind = "dropout";
  l.p = 0.25;
  cfg.layers.push_back(l);
  l = {};
  l.kind = "max_pool";
  l.window = 2;
  cfg.layers.push_back(l);
  l = {};
  l.kind = "bridge_to_time";
  cfg.layers.push_back(l);
  l = {};
  l.kind = "head";
  l.hidden = {8};
  cfg.layers.push_back(l);
  return cfg;
}

}  // namespace

TEST_CASE("every preset constructs a network") {
  for (const std::string& name : preset_names()) {
    CAPTURE(name);
    NetworkConfig cfg = preset(name);
    Network<float> net(cfg, 1);
    CHECK(net.param_count() > 0);
    CHECK(net.free_param_count() > 0);
    CHECK(net.free_param_count() <= net.param_count());
  }
}

TEST_CASE("forward produces finite logits of the right shape") {
  for (const char* name : {"lenet-cnn", "tfdm-lenet"}) {
    CAPTURE(name);
    NetworkConfig cfg = preset(name);
    Network<float> net(cfg, 3);
    Rng rng(70);
    Tensor4<float> images = tt::random_tensor<float>(2, cfg.in_h, cfg.in_w, cfg.in_c, rng);
    Tensor4<float> logits = net.forward(images, Mode::kEval);
    CHECK(logits.b == 2);
    CHECK(logits.h == 1);
    CHECK(logits.w == 1);
    CHECK(logits.c == cfg.classes);
    CHECK(logits.first_non_finite() == -1);
  }
}

TEST_CASE("input shape mismatches are rejected with both shapes named") {
  Network<float> net(preset("lenet-cnn"), 1);
  Tensor4<float> wrong(1, 32, 32, 3);
  CHECK_THROWS_AS(net.forward(wrong, Mode::kEval), ShapeError);
}

TEST_CASE("seeding is deterministic and seeds differ") {
  NetworkConfig cfg = mini_net();
  Network<float> a(cfg, 11), b(cfg, 11), c(cfg, 12);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  REQUIRE(pa.size() == pb.size());
  REQUIRE(pa.size() == pc.size());
  bool any_differ = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(*pa[i].value == *pb[i].value);
    if (*pa[i].value != *pc[i].value) any_differ = true;
  }
  CHECK(any_differ);
}

TEST_CASE("spectral banks carry k*k*cin*cout free parameters each") {
  NetworkConfig cfg = preset("tfdm-lenet");
  std::vector<ShapeStep> steps = validate_config(cfg);
  Network<float> net(cfg, 5);
  size_t ei = 0;
  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    if (cfg.layers[i].kind != "eml") continue;
    REQUIRE(ei < net.emls().size());
    EmlLayer<float>* e = net.emls()[ei++];
    std::int64_t want = static_cast<std::int64_t>(cfg.layers[i].k) * cfg.layers[i].k *
                        steps[i].c * cfg.layers[i].out_channels;
    CHECK(e->free_param_count() == want);
    // The raw banks hold the full grid, twice (real and imaginary).
    std::int64_t grid = static_cast<std::int64_t>(steps[i].h) * steps[i].w * steps[i].c *
                        cfg.layers[i].out_channels;
    CHECK(e->param_count() == 2 * grid);
  }
  CHECK(ei == net.emls().size());
}

TEST_CASE("weight fixation projects perturbed banks back onto the constraint") {
  NetworkConfig cfg = mini_net();
  Network<double> net(cfg, 7);
  REQUIRE(net.emls().size() == 1);
  EmlLayer<double>* e = net.emls()[0];
  CHECK(e->constraint_residual() < 1e-12);

  Rng rng(71);
  for (auto& v : e->weights_re()) v += rng.uniform(-0.5, 0.5);
  for (auto& v : e->weights_im()) v += rng.uniform(-0.5, 0.5);
  CHECK(e->constraint_residual() > 1e-3);

  net.apply_weight_fixation();
  CHECK(e->constraint_residual() < 1e-10);

  // Idempotent: projecting twice changes nothing further.
  std::vector<double> once = e->weights_re();
  net.apply_weight_fixation();
  CHECK(tt::max_mismatch(once, e->weights_re()) < 1e-14);
}

TEST_CASE("whole-network gradients pass a strided finite-difference check") {
  NetworkConfig cfg = mini_net();
  Network<double> net(cfg, 9);
  Rng rng(72);
  Tensor4<double> images = tt::random_tensor<double>(2, 6, 6, 1, rng);
  std::vector<int> labels = {0, 2};
  net.ctx().step = 3;  // noise layers keyed off a mid-training step
  GradCheckReport rep = gradcheck(net, images, labels, 1e-4, 6);
  CAPTURE(rep.worst_param);
  CAPTURE(rep.max_rel_err);
  CHECK(rep.pass(1e-4));
  CHECK(rep.entries.size() == net.params().size());
}

TEST_CASE("eval forward is repeatable while train forward draws noise") {
  NetworkConfig cfg = mini_net();
  Network<double> net(cfg, 13);
  Rng rng(73);
  Tensor4<double> images = tt::random_tensor<double>(2, 6, 6, 1, rng);

  Tensor4<double> a = net.forward(images, Mode::kEval);
  Tensor4<double> b = net.forward(images, Mode::kEval);
  CHECK(a.v == b.v);

  net.ctx().step = 1;
  Tensor4<double> t1 = net.forward(images, Mode::kTrain);
  net.ctx().step = 2;
  Tensor4<double> t2 = net.forward(images, Mode::kTrain);
  CHECK(tt::max_mismatch(t1.v, t2.v) > 1e-9);
}
