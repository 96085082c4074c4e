#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

#include "tfdm/checkpoint.hpp"
#include "tfdm/config.hpp"
#include "tfdm/errors.hpp"
#include "tfdm/network.hpp"
#include "tfdm/train.hpp"

using namespace tfdm;

namespace {

NetworkConfig train_net() {
  NetworkConfig cfg;
  cfg.name = "train-net";
  cfg.in_h = 8;
  cfg.in_w = 8;
  cfg.in_c = 1;
  cfg.classes = 3;
  LayerSpec l;
  l.kind = "bridge_to_freq";
  cfg.layers.push_back(l);
  l = {};
  l.kind = "eml";
  l.k = 3;
  l.out_channels = 4;
  cfg.layers.push_back(l);
  l = {};
  l.kind = "batch_norm";
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
  l.hidden = {12};
  cfg.layers.push_back(l);
  return cfg;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("training reduces loss on separable synthetic data") {
  DatasetPair data = synthetic_dataset(120, 30, 8, 8, 1, 3, 42);
  Network<float> net(train_net(), 1);
  Optimizer<float> opt(OptKind::kRmsProp, 1e-3);
  TrainOptions options;
  options.epochs = 6;
  options.batch_size = 20;
  options.seed = 1;
  options.fixed_timing = true;
  std::vector<EpochRow> rows = train(net, opt, data, options);
  REQUIRE(rows.size() == 6);
  CHECK(rows.back().train_loss < rows.front().train_loss);
  CHECK(rows.back().test_error < 0.5);  // 3 classes, chance is 0.67
  // Steps advance by full batches only: 120/20 = 6 per epoch.
  CHECK(rows.front().step == 6);
  CHECK(rows.back().step == 36);
}

TEST_CASE("identical seeded runs produce identical metrics files") {
  DatasetPair data = synthetic_dataset(60, 20, 8, 8, 1, 3, 7);
  tt::TempDir dir("determinism");

  auto run = [&](const std::string& out) {
    Network<float> net(train_net(), 11);
    Optimizer<float> opt(OptKind::kRmsProp, 5e-4);
    TrainOptions options;
    options.epochs = 3;
    options.batch_size = 20;
    options.seed = 11;
    options.out_dir = out;
    options.fixed_timing = true;
    train(net, opt, data, options);
  };
  run(dir.file("run1"));
  run(dir.file("run2"));

  std::string m1 = read_text(dir.file("run1") + "/metrics.csv");
  std::string m2 = read_text(dir.file("run2") + "/metrics.csv");
  CHECK(m1 == m2);
  CHECK(count_lines(m1) == 1 + 3 * 2);  // header + train/test rows per epoch

  // The checkpoints match byte for byte as well.
  std::ifstream a(dir.file("run1") + "/last.tfdm", std::ios::binary);
  std::ifstream b(dir.file("run2") + "/last.tfdm", std::ios::binary);
  std::vector<char> ba((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::vector<char> bb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);

  // A different seed diverges.
  Network<float> net(train_net(), 12);
  Optimizer<float> opt(OptKind::kRmsProp, 5e-4);
  TrainOptions options;
  options.epochs = 3;
  options.batch_size = 20;
  options.seed = 12;
  options.out_dir = dir.file("run3");
  options.fixed_timing = true;
  train(net, opt, data, options);
  CHECK(read_text(dir.file("run3") + "/metrics.csv") != m1);
}

TEST_CASE("metrics rows carry the schema and fixed timing zeroes seconds") {
  DatasetPair data = synthetic_dataset(40, 10, 8, 8, 1, 3, 3);
  tt::TempDir dir("metrics");
  Network<float> net(train_net(), 2);
  Optimizer<float> opt(OptKind::kRmsProp, 1e-4);
  TrainOptions options;
  options.epochs = 2;
  options.batch_size = 20;
  options.seed = 2;
  options.out_dir = dir.file("out");
  options.fixed_timing = true;
  train(net, opt, data, options);

  std::string m = read_text(dir.file("out") + "/metrics.csv");
  std::istringstream is(m);
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,step,split,loss,error,lr,seconds");
  int trains = 0, tests = 0;
  while (std::getline(is, line)) {
    REQUIRE(line.size() > 6);
    CHECK(line.compare(line.size() - 6, 6, ",0.000") == 0);  // fixed timing
    if (line.find(",train,") != std::string::npos) ++trains;
    if (line.find(",test,") != std::string::npos) ++tests;
  }
  CHECK(trains == 2);
  CHECK(tests == 2);
}

TEST_CASE("learning rate drops multiply at the scheduled epochs") {
  DatasetPair data = synthetic_dataset(40, 10, 8, 8, 1, 3, 3);
  Network<float> net(train_net(), 2);
  Optimizer<float> opt(OptKind::kRmsProp, 1e-3);
  TrainOptions options;
  options.epochs = 4;
  options.batch_size = 20;
  options.seed = 2;
  options.lr_drop_epochs = {2, 4};
  options.lr_drop_factor = 0.5;
  options.fixed_timing = true;
  std::vector<EpochRow> rows = train(net, opt, data, options);
  CHECK(rows[0].lr == doctest::Approx(1e-3));
  CHECK(rows[1].lr == doctest::Approx(5e-4));
  CHECK(rows[2].lr == doctest::Approx(5e-4));
  CHECK(rows[3].lr == doctest::Approx(2.5e-4));
}

TEST_CASE("a zero learning rate leaves every parameter untouched") {
  DatasetPair data = synthetic_dataset(40, 10, 8, 8, 1, 3, 3);
  Network<float> net(train_net(), 2);
  std::vector<std::vector<float>> before;
  for (const auto& p : net.params()) before.push_back(*p.value);

  Optimizer<float> opt(OptKind::kRmsProp, 0.0);
  TrainOptions options;
  options.epochs = 1;
  options.batch_size = 20;
  options.seed = 2;
  options.fixed_timing = true;
  train(net, opt, data, options);

  // The constraint projection after each step rounds the spectral banks
  // through a transform pair, so those may move by float rounding; every
  // other tensor must be bitwise identical.
  auto after = net.params();
  for (size_t i = 0; i < after.size(); ++i) {
    bool spectral = after[i].name.find("/w_re") != std::string::npos ||
                    after[i].name.find("/w_im") != std::string::npos;
    if (spectral)
      CHECK(tt::max_mismatch(*after[i].value, before[i]) < 1e-5);
    else
      CHECK(*after[i].value == before[i]);
  }
}

TEST_CASE("divergence raises a numeric error naming the step") {
  DatasetPair data = synthetic_dataset(40, 10, 8, 8, 1, 3, 3);
  Network<float> net(train_net(), 2);
  Optimizer<float> opt(OptKind::kRmsProp, 1e18);  // guaranteed blow-up
  TrainOptions options;
  options.epochs = 3;
  options.batch_size = 20;
  options.seed = 2;
  options.fixed_timing = true;
  CHECK_THROWS_WITH_AS(train(net, opt, data, options), doctest::Contains("diverged"),
                       NumericError);
}

TEST_CASE("the best checkpoint tracks the lowest test error seen") {
  DatasetPair data = synthetic_dataset(120, 30, 8, 8, 1, 3, 42);
  tt::TempDir dir("best");
  Network<float> net(train_net(), 1);
  Optimizer<float> opt(OptKind::kRmsProp, 1e-3);
  TrainOptions options;
  options.epochs = 5;
  options.batch_size = 20;
  options.seed = 1;
  options.out_dir = dir.file("out");
  options.fixed_timing = true;
  std::vector<EpochRow> rows = train(net, opt, data, options);

  double best = 2.0;
  std::int64_t best_step = -1;
  for (const EpochRow& r : rows) {
    if (r.test_error < best) {
      best = r.test_error;
      best_step = r.step;
    }
  }

  Network<float> loaded(train_net(), 9);
  CheckpointMeta meta = load_checkpoint(dir.file("out") + "/best.tfdm", loaded,
                                        static_cast<Optimizer<float>*>(nullptr));
  CHECK(meta.step == best_step);
  EvalResult ev = evaluate(loaded, data.test, 20);
  CHECK(ev.error == doctest::Approx(best).epsilon(1e-12));

  // The last checkpoint reflects the final epoch instead.
  Network<float> last(train_net(), 10);
  CheckpointMeta lmeta = load_checkpoint(dir.file("out") + "/last.tfdm", last,
                                         static_cast<Optimizer<float>*>(nullptr));
  CHECK(lmeta.epoch == 5);
  CHECK(lmeta.step == rows.back().step);
}
