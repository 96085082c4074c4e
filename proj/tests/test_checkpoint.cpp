#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

#include "tfdm/checkpoint.hpp"
#include "tfdm/config.hpp"
#include "tfdm/errors.hpp"
#include "tfdm/loss.hpp"
#include "tfdm/network.hpp"
#include "tfdm/optim.hpp"

using namespace tfdm;

namespace {

NetworkConfig small_net(int classes = 3) {
  NetworkConfig cfg;
  cfg.name = "ckpt-net";
  cfg.in_h = 6;
  cfg.in_w = 6;
  cfg.in_c = 1;
  cfg.classes = classes;
  LayerSpec l;
  l.kind = "conv";
  l.k = 3;
  l.out_channels = 2;
  cfg.layers.push_back(l);
  l = {};
  l.kind = "batch_norm";
  cfg.layers.push_back(l);
  l = {};
  l.kind = "bridge_to_freq";
  cfg.layers.push_back(l);
  l = {};
  l.kind = "eml";
  l.k = 2;
  l.out_channels = 2;
  cfg.layers.push_back(l);
  l = {};
  l.kind = "bridge_to_time";
  cfg.layers.push_back(l);
  l = {};
  l.kind = "head";
  l.hidden = {4};
  cfg.layers.push_back(l);
  return cfg;
}

// One real optimizer step so slots and running stats hold nontrivial values.
template <typename T>
void nudge(Network<T>& net, Optimizer<T>& opt, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4<T> images = tt::random_tensor<T>(2, 6, 6, 1, rng);
  std::vector<int> labels = {0, 2};
  net.ctx().step += 1;
  net.zero_grad();
  Tensor4<T> logits = net.forward(images, Mode::kTrain);
  LossResult<T> lr = softmax_cross_entropy(logits, labels);
  net.backward(lr.grad_logits);
  opt.step(net.params());
  net.apply_weight_fixation();
}

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(f),
                                    std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoints round trip parameters, state, slots and meta exactly") {
  tt::TempDir dir("ckpt");
  NetworkConfig cfg = small_net();
  Network<float> net(cfg, 21);
  Optimizer<float> opt(OptKind::kRmsProp, 3e-4);
  for (int i = 0; i < 3; ++i) nudge(net, opt, 100 + i);

  CheckpointMeta meta;
  meta.epoch = 7;
  meta.step = net.ctx().step;
  meta.opt = opt.kind();
  meta.lr = opt.lr();
  meta.momentum = opt.momentum();
  meta.config_json = config_to_json(cfg);
  save_checkpoint(dir.file("a.tfdm"), net, &opt, meta);

  // A differently seeded twin starts from different weights.
  Network<float> twin(cfg, 99);
  Optimizer<float> topt(OptKind::kSgd, 1.0);
  CheckpointMeta back = load_checkpoint(dir.file("a.tfdm"), twin, &topt);
  CHECK(back.epoch == 7);
  CHECK(back.step == meta.step);
  CHECK(back.opt == OptKind::kRmsProp);
  CHECK(back.lr == meta.lr);
  CHECK(back.momentum == meta.momentum);
  CHECK(back.config_json == meta.config_json);

  auto pa = net.params(), pb = twin.params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].value == *pb[i].value);
  auto sa = net.state(), sb = twin.state();
  REQUIRE(sa.size() == sb.size());
  for (size_t i = 0; i < sa.size(); ++i) CHECK(*sa[i].value == *sb[i].value);
  REQUIRE(topt.slots().size() == opt.slots().size());
  for (size_t i = 0; i < opt.slots().size(); ++i) CHECK(topt.slots()[i] == opt.slots()[i]);

  // Saving the twin reproduces the file byte for byte.
  save_checkpoint(dir.file("b.tfdm"), twin, &topt, back);
  CHECK(slurp(dir.file("a.tfdm")) == slurp(dir.file("b.tfdm")));
}

TEST_CASE("loading without an optimizer skips slots but fills the network") {
  tt::TempDir dir("ckptnoopt");
  NetworkConfig cfg = small_net();
  Network<float> net(cfg, 5);
  Optimizer<float> opt(OptKind::kRmsProp, 1e-3);
  nudge(net, opt, 500);
  CheckpointMeta meta;
  meta.config_json = config_to_json(cfg);
  save_checkpoint(dir.file("c.tfdm"), net, &opt, meta);

  Network<float> twin(cfg, 6);
  CHECK_NOTHROW(load_checkpoint(dir.file("c.tfdm"), twin, static_cast<Optimizer<float>*>(nullptr)));
  auto pa = net.params(), pb = twin.params();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].value == *pb[i].value);
}

TEST_CASE("the embedded config can be read back without building a network") {
  tt::TempDir dir("ckptpeek");
  NetworkConfig cfg = small_net();
  Network<float> net(cfg, 5);
  CheckpointMeta meta;
  meta.config_json = config_to_json(cfg);
  save_checkpoint(dir.file("d.tfdm"), net, static_cast<Optimizer<float>*>(nullptr), meta);

  std::string json = peek_checkpoint_config(dir.file("d.tfdm"));
  NetworkConfig parsed = config_from_json(json);
  CHECK(config_digest(parsed) == config_digest(cfg));
  CHECK(parsed.name == "ckpt-net");
}

TEST_CASE("each corruption mode gets its own diagnostic") {
  tt::TempDir dir("ckptbad");
  NetworkConfig cfg = small_net();
  Network<float> net(cfg, 5);
  CheckpointMeta meta;
  meta.config_json = config_to_json(cfg);
  const std::string good = dir.file("good.tfdm");
  save_checkpoint(good, net, static_cast<Optimizer<float>*>(nullptr), meta);
  std::vector<unsigned char> bytes = slurp(good);
  Network<float> sink(cfg, 6);
  auto opt_null = static_cast<Optimizer<float>*>(nullptr);

  SUBCASE("wrong magic") {
    bytes[0] = 'X';
    spit(dir.file("bad.tfdm"), bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("bad.tfdm"), sink, opt_null),
                         doctest::Contains("bad magic"), CheckpointError);
  }
  SUBCASE("unsupported version") {
    bytes[4] = 0xee;
    spit(dir.file("bad.tfdm"), bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("bad.tfdm"), sink, opt_null),
                         doctest::Contains("version mismatch"), CheckpointError);
  }
  SUBCASE("flipped payload byte") {
    bytes[bytes.size() / 2] ^= 0x40;
    spit(dir.file("bad.tfdm"), bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("bad.tfdm"), sink, opt_null),
                         doctest::Contains("checksum mismatch"), CheckpointError);
  }
  SUBCASE("file cut below the header") {
    bytes.resize(9);
    spit(dir.file("bad.tfdm"), bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("bad.tfdm"), sink, opt_null),
                         doctest::Contains("truncated"), CheckpointError);
  }
  SUBCASE("file cut mid-tensor") {
    bytes.resize(bytes.size() - bytes.size() / 4);
    spit(dir.file("bad.tfdm"), bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("bad.tfdm"), sink, opt_null),
                         doctest::Contains("checksum mismatch"), CheckpointError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir.file("nothere.tfdm"), sink, opt_null), CheckpointError);
  }
}

TEST_CASE("a checkpoint refuses to load into a different network") {
  tt::TempDir dir("ckptcfg");
  NetworkConfig cfg = small_net(3);
  Network<float> net(cfg, 5);
  CheckpointMeta meta;
  meta.config_json = config_to_json(cfg);
  save_checkpoint(dir.file("e.tfdm"), net, static_cast<Optimizer<float>*>(nullptr), meta);

  NetworkConfig other = small_net(4);  // different head width
  Network<float> wrong(other, 5);
  CHECK_THROWS_WITH_AS(
      load_checkpoint(dir.file("e.tfdm"), wrong, static_cast<Optimizer<float>*>(nullptr)),
      doctest::Contains("config mismatch"), CheckpointError);
}

TEST_CASE("float width is part of the contract") {
  tt::TempDir dir("ckptwidth");
  NetworkConfig cfg = small_net();
  Network<double> net(cfg, 5);
  CheckpointMeta meta;
  meta.config_json = config_to_json(cfg);
  save_checkpoint(dir.file("f.tfdm"), net, static_cast<Optimizer<double>*>(nullptr), meta);

  Network<float> narrow(cfg, 5);
  CHECK_THROWS_WITH_AS(
      load_checkpoint(dir.file("f.tfdm"), narrow, static_cast<Optimizer<float>*>(nullptr)),
      doctest::Contains("floating-point width"), CheckpointError);
}
