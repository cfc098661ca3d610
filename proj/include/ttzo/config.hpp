#pragma once

// Flat key=value run configuration for the command-line driver.
//
// Syntax: one `key = value` per line, `#` starts a comment, blank lines are
// skipped. Unknown or inapplicable keys are rejected so typos fail loudly.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

#include "ttzo/pinn.hpp"
#include "ttzo/zo.hpp"

namespace ttzo {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = path + ":" + std::to_string(lineno);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (val.empty()) throw ConfigError(where + ": empty value for " + key);
    if (!kv.emplace(key, val).second)
      throw ConfigError(where + ": duplicate key " + key);
  }
  return kv;
}

// Typed access over a parsed key=value map. Tracks which keys were read so
// leftovers can be reported after the task-specific branch consumed its part.
class ConfigReader {
 public:
  ConfigReader(std::string origin, std::map<std::string, std::string> kv)
      : origin_(std::move(origin)), kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& fallback) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(it->first);
    return it->second;
  }

  std::string require_str(const std::string& key) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError(origin_ + ": missing required key " + key);
    consumed_.insert(it->first);
    return it->second;
  }

  long get_long(const std::string& key, long fallback) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(it->first);
    try {
      std::size_t pos = 0;
      const long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key " + key + " is not an integer: " + it->second);
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(it->first);
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key " + key +
                        " is not a non-negative integer: " + it->second);
    }
  }

  double get_double(const std::string& key, double fallback) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(it->first);
    if (it->second == "inf") return std::numeric_limits<double>::infinity();
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key " + key + " is not a number: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool fallback) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    consumed_.insert(it->first);
    if (it->second == "1" || it->second == "true") return true;
    if (it->second == "0" || it->second == "false") return false;
    throw ConfigError(origin_ + ": key " + key + " must be 0/1/true/false");
  }

  // After all applicable keys were consumed, anything left is a mistake.
  void reject_leftovers() const {
    for (const auto& [key, value] : kv_)
      if (!consumed_.count(key))
        throw ConfigError(origin_ + ": unknown or inapplicable key " + key);
  }

 private:
  std::string origin_;
  std::map<std::string, std::string> kv_;
  std::set<std::string> consumed_;
};

struct RunConfig {
  std::string task;          // "mnist" | "hjb"
  std::string model = "tt";  // "tt" | "dense"
  int rank = 6;              // TT rank when model == "tt"
  std::string optimizer = "hybrid";
  std::uint64_t seed = 1;
  long epochs = 20;
  std::string output_dir = "out";
  bool record_time = false;

  HybridSchedule sched;
  LrSchedule fo_lr;  // optimizer == "fo-oracle"

  // Optional early stop on the per-epoch validation metric: accuracy >= target
  // for mnist, mse <= target for hjb. NaN disables it.
  double target_metric = std::numeric_limits<double>::quiet_NaN();

  // mnist
  std::string train_images, train_labels, val_images, val_labels;
  int batch = 64;

  // hjb
  HjbConfig hjb;
  int hidden = 768;
  long steps_per_epoch = 100;
  std::string grid_cache;  // optional sparse-grid cache file
};

namespace detail {

inline void read_schedule(ConfigReader& r, HybridSchedule& s) {
  s.rge_samples = static_cast<int>(r.get_long("rge_samples", s.rge_samples));
  s.mu_coarse = r.get_double("mu_coarse", s.mu_coarse);
  s.lr_coarse.lr0 = r.get_double("lr_coarse", s.lr_coarse.lr0);
  s.lr_coarse.decay = r.get_double("lr_coarse_decay", s.lr_coarse.decay);
  s.lr_coarse.every = static_cast<int>(r.get_long("lr_coarse_every", s.lr_coarse.every));
  s.rademacher = r.get_bool("rademacher", s.rademacher);
  s.mu_fine = r.get_double("mu_fine", s.mu_fine);
  s.momentum = r.get_double("momentum", s.momentum);
  s.lr_fine.lr0 = r.get_double("lr_fine", s.lr_fine.lr0);
  s.lr_fine.decay = r.get_double("lr_fine_decay", s.lr_fine.decay);
  s.lr_fine.every = static_cast<int>(r.get_long("lr_fine_every", s.lr_fine.every));
  s.eps_switch = r.get_double("eps_switch", s.eps_switch);
  s.patience = static_cast<int>(r.get_long("patience", s.patience));
  if (s.rge_samples < 1) throw ConfigError("rge_samples must be >= 1");
  if (s.mu_coarse <= 0.0 || s.mu_fine <= 0.0) throw ConfigError("mu must be > 0");
  if (s.lr_coarse.lr0 <= 0.0 || s.lr_fine.lr0 <= 0.0) throw ConfigError("lr must be > 0");
  if (s.momentum < 0.0 || s.momentum >= 1.0)
    throw ConfigError("momentum must be in [0, 1)");
  if (s.eps_switch < 0.0) throw ConfigError("eps_switch must be >= 0");
  if (s.patience < 1) throw ConfigError("patience must be >= 1");
}

inline void require_file(const std::string& what, const std::string& path) {
  if (path.empty()) throw ConfigError("missing required key " + what);
  if (!std::filesystem::exists(path))
    throw ConfigError(what + " does not exist: " + path);
}

}  // namespace detail

inline RunConfig load_run_config(const std::string& path) {
  ConfigReader r(path, parse_kv_file(path));
  RunConfig c;

  c.task = r.require_str("task");
  if (c.task != "mnist" && c.task != "hjb")
    throw ConfigError(path + ": task must be mnist or hjb, got " + c.task);

  c.model = r.get_str("model", c.model);
  if (c.model != "tt" && c.model != "dense")
    throw ConfigError(path + ": model must be tt or dense, got " + c.model);
  c.rank = static_cast<int>(r.get_long("rank", c.rank));
  if (c.rank < 1) throw ConfigError(path + ": rank must be >= 1");

  c.optimizer = r.get_str("optimizer", c.optimizer);
  const bool fo = c.optimizer == "fo-oracle";
  if (!fo && c.optimizer != "zo-rge" && c.optimizer != "zo-signrge" &&
      c.optimizer != "zo-cge" && c.optimizer != "hybrid")
    throw ConfigError(path + ": optimizer must be one of fo-oracle, zo-rge, "
                      "zo-signrge, zo-cge, hybrid; got " + c.optimizer);
  if (fo && c.model != "dense")
    throw ConfigError(path + ": fo-oracle requires model = dense");
  if (fo && c.task != "mnist")
    throw ConfigError(path + ": fo-oracle is only available for the mnist task");

  c.seed = r.get_u64("seed", c.seed);
  c.epochs = r.get_long("epochs", c.epochs);
  if (c.epochs < 1) throw ConfigError(path + ": epochs must be >= 1");
  c.output_dir = r.get_str("output_dir", c.output_dir);
  c.record_time = r.get_bool("record_time", c.record_time);
  c.target_metric = r.get_double("target_metric", c.target_metric);

  if (fo) {
    c.fo_lr.lr0 = r.get_double("lr", c.fo_lr.lr0);
    c.fo_lr.decay = r.get_double("lr_decay", c.fo_lr.decay);
    c.fo_lr.every = static_cast<int>(r.get_long("lr_every", c.fo_lr.every));
    if (c.fo_lr.lr0 <= 0.0) throw ConfigError(path + ": lr must be > 0");
  } else {
    detail::read_schedule(r, c.sched);
  }

  if (c.task == "mnist") {
    c.train_images = r.get_str("train_images", "");
    c.train_labels = r.get_str("train_labels", "");
    c.val_images = r.get_str("val_images", "");
    c.val_labels = r.get_str("val_labels", "");
    detail::require_file("train_images", c.train_images);
    detail::require_file("train_labels", c.train_labels);
    detail::require_file("val_images", c.val_images);
    detail::require_file("val_labels", c.val_labels);
    c.batch = static_cast<int>(r.get_long("batch", c.batch));
    if (c.batch < 1) throw ConfigError(path + ": batch must be >= 1");
  } else {
    c.hjb.D = static_cast<int>(r.get_long("dim", c.hjb.D));
    c.hjb.mode = deriv_mode_from_name(r.get_str("deriv", "sg"));
    c.hjb.fd_h = r.get_double("fd_h", c.hjb.fd_h);
    c.hjb.sigma = r.get_double("sigma", c.hjb.sigma);
    c.hjb.sg_level = static_cast<int>(r.get_long("sg_level", c.hjb.sg_level));
    c.hjb.mc_samples = static_cast<int>(r.get_long("mc_samples", c.hjb.mc_samples));
    c.hjb.collocation_batch =
        static_cast<int>(r.get_long("collocation_batch", c.hjb.collocation_batch));
    c.hjb.val_points = r.get_long("val_points", c.hjb.val_points);
    c.hjb.lambda_terminal = r.get_double("lambda_terminal", c.hjb.lambda_terminal);
    c.hjb.validate();
    c.hidden = static_cast<int>(r.get_long("hidden", c.hidden));
    if (c.hidden < 1) throw ConfigError(path + ": hidden must be >= 1");
    c.steps_per_epoch = r.get_long("steps_per_epoch", c.steps_per_epoch);
    if (c.steps_per_epoch < 1) throw ConfigError(path + ": steps_per_epoch must be >= 1");
    c.grid_cache = r.get_str("grid_cache", "");
  }

  r.reject_leftovers();
  return c;
}

// Builds the configured network; the caller owns the init stream.
inline Network build_network(const RunConfig& cfg, std::mt19937_64& init_rng) {
  if (cfg.task == "mnist")
    return cfg.model == "tt" ? mnist_mlp_tt(cfg.rank, init_rng)
                             : mnist_mlp_dense(init_rng);
  return cfg.model == "tt" ? hjb_mlp_tt(cfg.hjb.D, cfg.hidden, cfg.rank, init_rng)
                           : hjb_mlp_dense(cfg.hjb.D, cfg.hidden, init_rng);
}

// Maps the config-level optimizer name onto the zeroth-order training mode.
inline OptMode zo_mode_for(const std::string& optimizer) {
  if (optimizer == "zo-rge") return OptMode::rge;
  if (optimizer == "zo-signrge") return OptMode::signrge;
  if (optimizer == "zo-cge") return OptMode::cge;
  if (optimizer == "hybrid") return OptMode::hybrid;
  throw ConfigError("optimizer " + optimizer + " is not a zeroth-order mode");
}

}  // namespace ttzo
