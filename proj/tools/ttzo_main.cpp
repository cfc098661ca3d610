// Command-line driver: runs training experiments from flat key=value configs,
// verifies library invariants, and precomputes sparse-grid cache files.
//
// Exit codes for `run`: 0 success, 2 config/setup error, 3 diverged run
// (partial trace is still written).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "ttzo/checkpoint.hpp"
#include "ttzo/config.hpp"
#include "ttzo/mnist.hpp"
#include "ttzo/pinn.hpp"
#include "ttzo/selfcheck.hpp"

namespace {

struct RunOutcome {
  ttzo::TrainResult result;
  double wall_seconds = 0.0;
};

RunOutcome execute(const ttzo::RunConfig& cfg, ttzo::Network& net) {
  using namespace ttzo;
  std::function<bool(double)> early_stop;
  if (!std::isnan(cfg.target_metric)) {
    const double target = cfg.target_metric;
    if (cfg.task == "mnist")
      early_stop = [target](double acc) { return acc >= target; };
    else
      early_stop = [target](double mse) { return mse <= target; };
  }

  RunOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.task == "mnist") {
    const Dataset train = load_dataset(cfg.train_images, cfg.train_labels);
    const Dataset val = load_dataset(cfg.val_images, cfg.val_labels);
    if (cfg.optimizer == "fo-oracle") {
      out.result = fo_train_mnist(net, train, val, cfg.fo_lr, cfg.epochs, cfg.batch,
                                  cfg.seed, cfg.record_time);
    } else {
      out.result = train_mnist(net, train, val, zo_mode_for(cfg.optimizer), cfg.sched,
                               cfg.epochs, cfg.batch, cfg.seed, cfg.record_time,
                               early_stop);
    }
  } else {
    HjbRun run(cfg.hjb, net, cfg.seed);
    if (cfg.hjb.mode == DerivMode::sg && !cfg.grid_cache.empty()) {
      if (std::filesystem::exists(cfg.grid_cache)) {
        run.use_grid(load_grid(cfg.grid_cache));
      } else {
        save_grid(run.smooth.grid, cfg.grid_cache);
      }
    }
    out.result = train_hjb(run, zo_mode_for(cfg.optimizer), cfg.sched, cfg.epochs,
                           cfg.steps_per_epoch, cfg.record_time, early_stop);
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void write_summary(const std::string& path, const ttzo::RunConfig& cfg,
                   const RunOutcome& out) {
  nlohmann::json j;
  j["task"] = cfg.task;
  j["optimizer"] = cfg.optimizer;
  j["seed"] = cfg.seed;
  j["epochs_run"] = out.result.trace.rows.size();
  const char* metric_key = cfg.task == "mnist" ? "val_accuracy" : "validation_mse";
  if (out.result.trace.rows.empty())
    j[metric_key] = nullptr;
  else
    j[metric_key] = out.result.trace.rows.back().val_metric;
  j["total_queries"] = out.result.total_queries;
  j["wall_time_s"] = out.wall_seconds;
  j["diverged"] = out.result.diverged;
  std::ofstream js(path);
  if (!js) throw std::runtime_error("cannot open " + path);
  js << j.dump(2) << "\n";
}

int cmd_run(const std::string& config_path, bool timing, int threads) {
  using namespace ttzo;
  Eigen::setNbThreads(threads);

  RunConfig cfg;
  Network net;
  try {
    cfg = load_run_config(config_path);
    if (timing) cfg.record_time = true;
    std::filesystem::create_directories(cfg.output_dir);
    auto init_rng = make_rng(cfg.seed, Stream::init);
    net = build_network(cfg, init_rng);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  RunOutcome out;
  try {
    out = execute(cfg, net);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return 1;
  }

  try {
    const std::filesystem::path dir(cfg.output_dir);
    out.result.trace.write_csv((dir / "trace.csv").string());
    if (out.result.theta.size() > 0) {
      unpack(net, out.result.theta);
      save_checkpoint(net, (dir / "checkpoint.bin").string());
    }
    write_summary((dir / "summary.json").string(), cfg, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed writing artifacts: %s\n", e.what());
    return 1;
  }

  if (out.result.diverged) {
    std::fprintf(stderr, "run diverged; partial trace retained in %s\n",
                 cfg.output_dir.c_str());
    return 3;
  }
  const auto& rows = out.result.trace.rows;
  std::printf("%s done: %s %.6f, queries %ld, %.1f s\n", cfg.task.c_str(),
              cfg.task == "mnist" ? "val_accuracy" : "validation_mse",
              rows.empty() ? 0.0 : rows.back().val_metric, out.result.total_queries,
              out.wall_seconds);
  return 0;
}

int cmd_gridgen(int D, int k, double sigma, std::string out_path) {
  using namespace ttzo;
  if (out_path.empty())
    out_path = "grid-d" + std::to_string(D) + "-k" + std::to_string(k) + ".bin";
  try {
    const SparseGrid grid = smolyak_build(D, k, sigma);
    save_grid(grid, out_path);
    std::printf("wrote %ld nodes (D=%d, level %d, sigma %g) to %s\n", grid.size(), D,
                k, sigma, out_path.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gridgen failed: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tensor-train networks trained by forward evaluations"};
  app.require_subcommand(1);

  std::string config_path;
  bool timing = false;
  int threads = 1;
  CLI::App* run = app.add_subcommand("run", "train from a key=value config file");
  run->add_option("config", config_path, "config file path")->required();
  run->add_flag("--timing", timing, "record wall time in the trace CSV");
  run->add_option("--threads", threads, "worker threads (1 = bit-reproducible)")
      ->check(CLI::PositiveNumber);

  CLI::App* verify = app.add_subcommand("verify", "run the library invariant suite");

  int grid_dim = 0, grid_level = 0;
  double grid_sigma = 1.0;
  std::string grid_out;
  CLI::App* gridgen = app.add_subcommand("gridgen", "precompute a sparse-grid cache");
  gridgen->add_option("D", grid_dim, "dimension")->required()->check(CLI::PositiveNumber);
  gridgen->add_option("k", grid_level, "level")->required()->check(CLI::PositiveNumber);
  gridgen->add_option("sigma", grid_sigma, "scale")->check(CLI::PositiveNumber);
  gridgen->add_option("out", grid_out, "output path (default grid-d<D>-k<k>.bin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) return cmd_run(config_path, timing, threads);
  if (verify->parsed()) return ttzo::run_selfcheck() ? 0 : 1;
  if (gridgen->parsed()) return cmd_gridgen(grid_dim, grid_level, grid_sigma, grid_out);
  return 2;
}
