#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "tfdm/checkpoint.hpp"
#include "tfdm/data.hpp"
#include "tfdm/loss.hpp"
#include "tfdm/network.hpp"
#include "tfdm/optim.hpp"

namespace tfdm {

struct TrainOptions {
  int epochs = 1;
  int batch_size = 100;
  std::uint64_t seed = 1;
  OptKind opt = OptKind::kRmsProp;
  double lr = 1e-4;
  std::vector<int> lr_drop_epochs;
  double lr_drop_factor = 0.1;
  std::string out_dir;  // metrics.csv and last.tfdm land here when non-empty
  // Writes 0.000 into the seconds column. Wall time is the only field that
  // differs between identical seeded runs, so this makes the whole metrics
  // file byte-comparable.
  bool fixed_timing = false;
  std::function<void(const std::string&)> log;  // one line per epoch when set
};

struct EpochRow {
  int epoch = 0;
  std::int64_t step = 0;
  double train_loss = 0.0, train_error = 0.0;
  double test_loss = 0.0, test_error = 0.0;
  double lr = 0.0;
  double train_seconds = 0.0, test_seconds = 0.0;
};

struct EvalResult {
  double loss = 0.0;
  double error = 0.0;  // fraction misclassified
};

template <typename T>
EvalResult evaluate(Network<T>& net, const Dataset& ds, int batch_size) {
  EvalResult res;
  std::int64_t done = 0, wrong = 0;
  double loss_sum = 0.0;
  Tensor4<float> fimages;
  std::vector<int> labels;
  for (std::int64_t at = 0; at < ds.size(); at += batch_size) {
    std::int64_t take = std::min<std::int64_t>(batch_size, ds.size() - at);
    std::vector<std::int64_t> rows(take);
    for (std::int64_t i = 0; i < take; ++i) rows[i] = at + i;
    gather_batch(ds, rows, &fimages, &labels);
    Tensor4<T> images(fimages.b, fimages.h, fimages.w, fimages.c);
    for (std::int64_t i = 0; i < images.size(); ++i) images.v[i] = static_cast<T>(fimages.v[i]);
    Tensor4<T> logits = net.forward(images, Mode::kEval);
    LossResult<T> lr = softmax_cross_entropy(logits, labels);
    loss_sum += lr.loss * static_cast<double>(take);
    wrong += take - lr.correct;
    done += take;
  }
  if (done > 0) {
    res.loss = loss_sum / static_cast<double>(done);
    res.error = static_cast<double>(wrong) / static_cast<double>(done);
  }
  return res;
}

// Writes one train row and one test row per epoch. The seconds column is
// wall time and is the only nondeterministic field; comparisons of repeated
// seeded runs should strip it.
inline std::string metrics_header() { return "epoch,step,split,loss,error,lr,seconds\n"; }

inline std::string metrics_row(int epoch, std::int64_t step, const char* split, double loss,
                               double error, double lr, double seconds) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%lld,%s,%.8f,%.6f,%.8g,%.3f\n", epoch,
                static_cast<long long>(step), split, loss, error, lr, seconds);
  return buf;
}

template <typename T>
std::vector<EpochRow> train(Network<T>& net, Optimizer<T>& opt, const DatasetPair& data,
                            const TrainOptions& options) {
  namespace fs = std::filesystem;
  std::ofstream metrics;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    metrics.open(options.out_dir + "/metrics.csv", std::ios::trunc);
    metrics << metrics_header();
  }

  std::vector<EpochRow> rows;
  double best_error = 2.0;  // any real epoch beats this
  net.ctx().seed = options.seed;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    for (int drop : options.lr_drop_epochs)
      if (drop == epoch) opt.set_lr(opt.lr() * options.lr_drop_factor);

    auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::int64_t seen = 0, correct = 0;
    Tensor4<float> fimages;
    std::vector<int> labels;
    for (const auto& batch :
         epoch_batches(data.train.size(), options.batch_size, options.seed, epoch, true)) {
      gather_batch(data.train, batch, &fimages, &labels);
      Tensor4<T> images(fimages.b, fimages.h, fimages.w, fimages.c);
      for (std::int64_t i = 0; i < images.size(); ++i)
        images.v[i] = static_cast<T>(fimages.v[i]);

      net.ctx().step += 1;
      net.zero_grad();
      Tensor4<T> logits = net.forward(images, Mode::kTrain);
      LossResult<T> lr = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(lr.loss))
        throw NumericError("training diverged: non-finite loss at step " +
                           std::to_string(net.ctx().step) +
                           "; the last epoch checkpoint is the last good state");
      net.backward(lr.grad_logits);
      opt.step(net.params());
      net.apply_weight_fixation();

      loss_sum += lr.loss * static_cast<double>(batch.size());
      correct += lr.correct;
      seen += static_cast<std::int64_t>(batch.size());
    }
    auto t1 = std::chrono::steady_clock::now();
    EvalResult test = evaluate(net, data.test, options.batch_size);
    auto t2 = std::chrono::steady_clock::now();

    EpochRow row;
    row.epoch = epoch;
    row.step = net.ctx().step;
    row.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
    row.train_error =
        seen > 0 ? 1.0 - static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    row.test_loss = test.loss;
    row.test_error = test.error;
    row.lr = opt.lr();
    row.train_seconds =
        options.fixed_timing ? 0.0 : std::chrono::duration<double>(t1 - t0).count();
    row.test_seconds =
        options.fixed_timing ? 0.0 : std::chrono::duration<double>(t2 - t1).count();
    rows.push_back(row);

    if (metrics.is_open()) {
      metrics << metrics_row(epoch, row.step, "train", row.train_loss, row.train_error, row.lr,
                             row.train_seconds);
      metrics << metrics_row(epoch, row.step, "test", row.test_loss, row.test_error, row.lr,
                             row.test_seconds);
      metrics.flush();
    }
    if (!options.out_dir.empty()) {
      CheckpointMeta meta;
      meta.epoch = epoch;
      meta.step = net.ctx().step;
      meta.opt = opt.kind();
      meta.lr = opt.lr();
      meta.momentum = opt.momentum();
      save_checkpoint(options.out_dir + "/last.tfdm", net, &opt, meta);
      if (row.test_error < best_error) {
        best_error = row.test_error;
        save_checkpoint(options.out_dir + "/best.tfdm", net, &opt, meta);
      }
    }
    if (options.log) {
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "epoch=%d train_loss=%.6f train_err=%.4f test_err=%.4f lr=%.8g secs=%.1f",
                    epoch, row.train_loss, row.train_error, row.test_error, row.lr,
                    row.train_seconds + row.test_seconds);
      options.log(buf);
    }
  }
  return rows;
}

}  // namespace tfdm
