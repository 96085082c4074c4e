// tfdm command line: train / eval / verify / count-ops / presets.
//
// Exit codes: 0 success, 1 verification failure, 2 input or config error,
// 3 numerical divergence. Stdout is machine-parsable key=value lines;
// human-oriented tables go to report files under --out.

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tfdm/checkpoint.hpp"
#include "tfdm/config.hpp"
#include "tfdm/data.hpp"
#include "tfdm/errors.hpp"
#include "tfdm/network.hpp"
#include "tfdm/opcount.hpp"
#include "tfdm/optim.hpp"
#include "tfdm/parallel.hpp"
#include "tfdm/train.hpp"
#include "tfdm/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

// --preset and --config are mutually exclusive; unknown preset names list
// what is available so the caller does not have to guess.
tfdm::NetworkConfig resolve_config(const std::string& preset_name, const std::string& config_path) {
  if (!preset_name.empty() && !config_path.empty())
    throw tfdm::ConfigError("give either --preset or --config, not both");
  if (!preset_name.empty()) {
    try {
      return tfdm::preset(preset_name);
    } catch (const tfdm::ConfigError&) {
      throw tfdm::ConfigError("unknown preset '" + preset_name +
                              "'; available: " + join(tfdm::preset_names(), ", "));
    }
  }
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw tfdm::ConfigError("cannot open config file " + config_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return tfdm::config_from_json(text);
  }
  throw tfdm::ConfigError("one of --preset or --config is required; available presets: " +
                          join(tfdm::preset_names(), ", "));
}

// --data-dir falls back to $TFDM_DATA_DIR, then the working directory.
std::string resolve_data_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TFDM_DATA_DIR")) return env;
  return ".";
}

// "auto" picks the dataset whose canonical shape matches the network input:
// 28x28x1 means mnist, 32x32x3 means cifar10, anything else synthetic.
std::string infer_dataset(const tfdm::NetworkConfig& cfg, const std::string& requested) {
  if (requested != "auto") return requested;
  if (cfg.in_h == 28 && cfg.in_w == 28 && cfg.in_c == 1) return "mnist";
  if (cfg.in_h == 32 && cfg.in_w == 32 && cfg.in_c == 3) return "cifar10";
  return "synthetic";
}

tfdm::DatasetPair load_named_dataset(const std::string& name, const std::string& data_dir,
                                     const tfdm::NetworkConfig& cfg, int train_subset,
                                     int test_subset, std::uint64_t seed) {
  if (name == "synthetic") {
    int train_n = train_subset > 0 ? train_subset : 2000;
    int test_n = test_subset > 0 ? test_subset : 500;
    return tfdm::synthetic_dataset(train_n, test_n, cfg.in_h, cfg.in_w, cfg.in_c, cfg.classes,
                                   seed);
  }
  // Accept both the files directly under data_dir and a conventional
  // per-dataset subdirectory.
  std::vector<std::string> candidates = {data_dir, data_dir + "/" + name};
  std::string first_error;
  for (const auto& dir : candidates) {
    try {
      tfdm::DatasetPair ds =
          name == "mnist" ? tfdm::load_mnist(dir) : tfdm::load_cifar10(dir);
      return tfdm::take_subset(std::move(ds), train_subset, test_subset);
    } catch (const tfdm::DataError& e) {
      if (first_error.empty()) first_error = e.what();
    }
  }
  throw tfdm::DataError(first_error);
}

// The dataset must match the network input plane for train/eval to make
// sense; catching it here gives a config diagnostic instead of a shape
// error from deep inside the first forward pass.
void check_dataset_shape(const tfdm::NetworkConfig& cfg, const tfdm::DatasetPair& data) {
  const auto& im = data.train.images;
  if (im.h != cfg.in_h || im.w != cfg.in_w || im.c != cfg.in_c ||
      data.train.classes != cfg.classes)
    throw tfdm::ConfigError(
        "dataset " + data.train.name + " is " + std::to_string(im.h) + "x" + std::to_string(im.w) +
        "x" + std::to_string(im.c) + " with " + std::to_string(data.train.classes) +
        " classes, but the network wants " + std::to_string(cfg.in_h) + "x" +
        std::to_string(cfg.in_w) + "x" + std::to_string(cfg.in_c) + " with " +
        std::to_string(cfg.classes));
}

std::string timestamp_dir() {
  std::time_t now = std::time(nullptr);
  std::tm tm;
  localtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof(buf), "runs/%Y%m%d-%H%M%S", &tm);
  std::string base = buf;
  std::string dir = base;
  for (int i = 2; fs::exists(dir); ++i) dir = base + "-" + std::to_string(i);
  return dir;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Every run that writes files drops a manifest beside them: what ran, on
// which config (by digest), which seed, and which format versions, so an
// output directory stays interpretable after the shell history is gone.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const tfdm::NetworkConfig* cfg, std::uint64_t seed, json extra) {
  json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  j["checkpoint_format_version"] = tfdm::kCheckpointVersion;
  j["seed"] = seed;
  if (cfg) {
    j["config_name"] = cfg->name;
    j["config_digest"] = hex64(tfdm::config_digest(*cfg));
  }
  for (auto& [k, v] : extra.items()) j[k] = v;
  std::ofstream out(out_dir + "/manifest.json", std::ios::trunc);
  out << j.dump(2) << "\n";
}

struct CommonArgs {
  std::string preset, config_path, data_dir, dataset = "auto", out;
  int train_subset = 0, test_subset = 0;
  std::uint64_t seed = 1;
  int batch_size = 100;
};

int cmd_train(const CommonArgs& c, int epochs, double lr_flag, const std::string& opt_flag,
              double momentum, std::vector<int> lr_drop_epochs, double lr_drop_factor,
              bool fixed_timing, int threads) {
  tfdm::NetworkConfig cfg = resolve_config(c.preset, c.config_path);
  tfdm::validate_config(cfg);

  std::string dataset = infer_dataset(cfg, c.dataset);
  tfdm::DatasetPair data = load_named_dataset(dataset, resolve_data_dir(c.data_dir), cfg,
                                              c.train_subset, c.test_subset, c.seed);
  check_dataset_shape(cfg, data);

  std::string out_dir = c.out.empty() ? timestamp_dir() : c.out;
  fs::create_directories(out_dir);

  tfdm::TrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = c.batch_size;
  opts.seed = c.seed;
  opts.lr = lr_flag > 0 ? lr_flag : cfg.train.lr;
  std::string opt_name = opt_flag.empty() ? cfg.train.optimizer : opt_flag;
  if (opt_name == "rmsprop") {
    opts.opt = tfdm::OptKind::kRmsProp;
  } else if (opt_name == "sgd") {
    opts.opt = tfdm::OptKind::kSgd;
  } else {
    throw tfdm::ConfigError("unknown optimizer '" + opt_name + "'; use rmsprop or sgd");
  }
  opts.lr_drop_epochs = lr_drop_epochs.empty() ? cfg.train.lr_drop_epochs : lr_drop_epochs;
  opts.lr_drop_factor = lr_drop_factor > 0 ? lr_drop_factor : cfg.train.lr_drop_factor;
  opts.out_dir = out_dir;
  opts.fixed_timing = fixed_timing;
  opts.log = [](const std::string& line) { std::cout << line << "\n" << std::flush; };

  {
    std::ofstream cf(out_dir + "/config.json", std::ios::trunc);
    cf << tfdm::config_to_json(cfg);
  }
  write_manifest(out_dir, "train", &cfg, c.seed,
                 json{{"dataset", dataset},
                      {"train_examples", data.train.size()},
                      {"test_examples", data.test.size()},
                      {"epochs", epochs},
                      {"batch_size", c.batch_size},
                      {"optimizer", opt_name},
                      {"lr", opts.lr},
                      {"threads", threads},
                      {"fixed_timing", fixed_timing}});

  std::cout << "config=" << cfg.name << "\n";
  std::cout << "dataset=" << dataset << "\n";
  std::cout << "out_dir=" << out_dir << "\n" << std::flush;

  tfdm::Network<float> net(cfg, c.seed);
  tfdm::Optimizer<float> opt(opts.opt, opts.lr);
  opt.set_momentum(momentum);
  std::vector<tfdm::EpochRow> rows = tfdm::train(net, opt, data, opts);

  double best = 2.0;
  for (const auto& r : rows) best = std::min(best, r.test_error);
  std::cout << "final_train_error=" << rows.back().train_error << "\n";
  std::cout << "test_error=" << rows.back().test_error << "\n";
  std::cout << "best_test_error=" << best << "\n";
  std::cout << "metrics=" << out_dir << "/metrics.csv\n";
  std::cout << "checkpoint_last=" << out_dir << "/last.tfdm\n";
  std::cout << "checkpoint_best=" << out_dir << "/best.tfdm\n";
  return 0;
}

int cmd_eval(const CommonArgs& c, const std::string& checkpoint) {
  std::string cfg_json = tfdm::peek_checkpoint_config(checkpoint);
  tfdm::NetworkConfig cfg = tfdm::config_from_json(cfg_json);
  tfdm::validate_config(cfg);
  tfdm::Network<float> net(cfg, /*seed=*/1);
  tfdm::CheckpointMeta meta = tfdm::load_checkpoint<float>(checkpoint, net, nullptr);

  std::string dataset = infer_dataset(cfg, c.dataset);
  tfdm::DatasetPair data = load_named_dataset(dataset, resolve_data_dir(c.data_dir), cfg,
                                              c.train_subset, c.test_subset, c.seed);
  check_dataset_shape(cfg, data);

  tfdm::EvalResult res = tfdm::evaluate(net, data.test, c.batch_size);
  std::cout << "checkpoint=" << checkpoint << "\n";
  std::cout << "config=" << cfg.name << "\n";
  std::cout << "dataset=" << dataset << "\n";
  std::cout << "epoch=" << meta.epoch << "\n";
  std::cout << "test_examples=" << data.test.size() << "\n";
  std::cout << "test_loss=" << res.loss << "\n";
  std::cout << "test_error=" << res.error << "\n";
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_manifest(c.out, "eval", &cfg, c.seed,
                   json{{"checkpoint", checkpoint},
                        {"dataset", dataset},
                        {"test_loss", res.loss},
                        {"test_error", res.error}});
  }
  return 0;
}

int cmd_verify(const std::string& level, std::uint64_t seed, const std::string& out) {
  tfdm::VerifyReport report = tfdm::run_verification(level == "full", seed);
  std::cout << report.to_text() << std::flush;
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream rf(out + "/verify_report.txt", std::ios::trunc);
    rf << report.to_text();
    write_manifest(out, "verify", nullptr, seed,
                   json{{"level", level}, {"all_pass", report.all_pass()}});
  }
  return report.all_pass() ? 0 : 1;
}

int cmd_count_ops(const std::string& preset_name, const std::string& config_path,
                  const std::string& compare_name, const std::string& out) {
  tfdm::NetworkConfig cfg = resolve_config(preset_name, config_path);
  tfdm::validate_config(cfg);
  tfdm::OpCountReport report = tfdm::count_ops(cfg);
  std::cout << "network=" << report.network << "\n";
  std::cout << "mult_ops=" << report.mult_total << "\n";
  std::cout << "add_ops=" << report.add_total << "\n";
  std::cout << "dft_ops=" << report.dft_total << "\n";
  std::cout << "params=" << report.param_total << "\n";
  std::cout << "time_mult_ops=" << report.time_mults << "\n";
  std::cout << "freq_mult_ops=" << report.freq_mults << "\n";
  std::cout << "fixation_dft_per_step=" << report.fixation_dft_per_step << "\n";

  tfdm::OpCountReport other;
  bool has_other = !compare_name.empty();
  if (has_other) {
    tfdm::NetworkConfig ocfg = resolve_config(compare_name, "");
    tfdm::validate_config(ocfg);
    other = tfdm::count_ops(ocfg);
    std::cout << "compare_network=" << other.network << "\n";
    std::cout << "compare_mult_ops=" << other.mult_total << "\n";
    std::cout << "compare_add_ops=" << other.add_total << "\n";
    std::cout << "compare_params=" << other.param_total << "\n";
    std::cout << "mult_ratio="
              << static_cast<double>(report.mult_total) / static_cast<double>(other.mult_total)
              << "\n";
  }

  if (!out.empty()) {
    fs::create_directories(out);
    {
      std::ofstream f(out + "/ops_" + report.network + ".csv", std::ios::trunc);
      f << report.to_csv();
    }
    std::ofstream rf(out + "/ops_report.txt", std::ios::trunc);
    rf << report.to_text();
    if (has_other) {
      std::ofstream f(out + "/ops_" + other.network + ".csv", std::ios::trunc);
      f << other.to_csv();
      rf << "\n" << other.to_text();
      rf << "\n" << tfdm::compare_text(report, other);
      std::ofstream cf(out + "/compare.csv", std::ios::trunc);
      cf << tfdm::compare_csv(report, other);
    }
    write_manifest(out, "count-ops", &cfg, 0,
                   json{{"compare", compare_name}, {"mult_ops", report.mult_total}});
  }
  return 0;
}

int cmd_presets() {
  for (const auto& name : tfdm::preset_names()) {
    tfdm::NetworkConfig cfg = tfdm::preset(name);
    tfdm::OpCountReport report = tfdm::count_ops(cfg);
    std::cout << "preset=" << name << " input=" << cfg.in_h << "x" << cfg.in_w << "x" << cfg.in_c
              << " classes=" << cfg.classes << " layers=" << cfg.layers.size()
              << " params=" << report.param_total << " mult_ops=" << report.mult_total << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "tfdm: train and inspect networks that mix time-domain convolution with\n"
      "trainable frequency-domain layers.\n"
      "Exit codes: 0 success, 1 verification failure, 2 input/config error,\n"
      "3 numerical divergence."};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads for batch-parallel work (0 = logical cores); affects speed "
                 "only, results are identical up to documented floating-point tolerances")
      ->capture_default_str();

  CommonArgs targs;
  int epochs = 10;
  double lr_flag = 0.0;
  std::string opt_flag;
  double momentum = 0.9;
  std::vector<int> lr_drop_epochs;
  double lr_drop_factor = 0.0;
  bool fixed_timing = false;

  auto add_config_flags = [](CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--preset", a.preset, "built-in architecture name (see the presets command)");
    cmd->add_option("--config", a.config_path, "network description JSON file");
  };
  auto add_data_flags = [](CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--data-dir", a.data_dir,
                    "directory holding the dataset files (default: $TFDM_DATA_DIR, then .)");
    cmd->add_option("--dataset", a.dataset,
                    "auto = infer from the network input shape (28x28x1 mnist, 32x32x3 cifar10, "
                    "else synthetic)")
        ->check(CLI::IsMember({"auto", "mnist", "cifar10", "synthetic"}))
        ->capture_default_str();
    cmd->add_option("--train-subset", a.train_subset,
                    "keep only the first N training examples (0 = all; sets the split size for "
                    "synthetic data)")
        ->capture_default_str();
    cmd->add_option("--test-subset", a.test_subset,
                    "keep only the first N test examples (0 = all)")
        ->capture_default_str();
    cmd->add_option("--batch-size", a.batch_size, "examples per step")->capture_default_str();
    cmd->add_option("--seed", a.seed, "seed for init, shuffling and dropout")
        ->capture_default_str();
  };

  CLI::App* train = app.add_subcommand(
      "train", "train a network; writes metrics.csv, last/best checkpoints and a manifest");
  add_config_flags(train, targs);
  add_data_flags(train, targs);
  train->add_option("--epochs", epochs, "training epochs")->capture_default_str();
  train->add_option("--lr", lr_flag, "learning rate (default: the config's hint)");
  train->add_option("--optimizer", opt_flag, "rmsprop or sgd (default: the config's hint)")
      ->check(CLI::IsMember({"", "rmsprop", "sgd"}));
  train->add_option("--momentum", momentum, "sgd momentum coefficient")->capture_default_str();
  train->add_option("--lr-drop-epoch", lr_drop_epochs,
                    "epoch at which to multiply lr by --lr-drop-factor (repeatable)");
  train->add_option("--lr-drop-factor", lr_drop_factor,
                    "lr multiplier applied at each --lr-drop-epoch (default: config hint)");
  train->add_flag("--fixed-timing", fixed_timing,
                  "write 0.000 in the seconds column so repeated seeded runs produce "
                  "byte-identical metrics files");
  train->add_option("--out", targs.out, "output directory (default: runs/<timestamp>)");

  CommonArgs eargs;
  std::string checkpoint;
  CLI::App* eval = app.add_subcommand("eval",
                                      "load a checkpoint, rebuild its network from the embedded "
                                      "config, print test_error on the test split");
  eval->add_option("--checkpoint", checkpoint, "model file written by train")->required();
  add_data_flags(eval, eargs);
  eval->add_option("--out", eargs.out, "optional directory for a manifest of this evaluation");

  std::string level = "fast";
  std::uint64_t vseed = 7;
  std::string vout;
  CLI::App* verify = app.add_subcommand(
      "verify", "self-contained correctness suite; one PASS/FAIL line per property, exit 1 on "
                "any failure (fast <= 60 s, full <= 15 min)");
  verify->add_option("--level", level, "fast skips the long training-based checks")
      ->check(CLI::IsMember({"fast", "full"}))
      ->capture_default_str();
  verify->add_option("--seed", vseed, "seed for the random probes")->capture_default_str();
  verify->add_option("--out", vout, "optional directory for the report file");

  std::string ops_preset, ops_config, ops_compare, ops_out;
  CLI::App* ops = app.add_subcommand(
      "count-ops", "per-layer multiplication/addition/transform budget for one forward pass");
  ops->add_option("--preset", ops_preset, "built-in architecture name");
  ops->add_option("--config", ops_config, "network description JSON file");
  ops->add_option("--compare", ops_compare, "second preset to put side by side");
  ops->add_option("--out", ops_out, "directory for per-layer CSV and text reports");

  CLI::App* presets = app.add_subcommand("presets", "list built-in architectures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // remap CLI11 parse-error codes onto the config-error exit
  }

  try {
    tfdm::ThreadPool::instance().set_threads(threads);
    if (app.got_subcommand(train))
      return cmd_train(targs, epochs, lr_flag, opt_flag, momentum, lr_drop_epochs,
                       lr_drop_factor, fixed_timing, threads);
    if (app.got_subcommand(eval)) return cmd_eval(eargs, checkpoint);
    if (app.got_subcommand(verify)) return cmd_verify(level, vseed, vout);
    if (app.got_subcommand(ops)) return cmd_count_ops(ops_preset, ops_config, ops_compare, ops_out);
    if (app.got_subcommand(presets)) return cmd_presets();
  } catch (const tfdm::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const tfdm::Error& e) {
    // config, data, checkpoint and shape problems are all bad input
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
