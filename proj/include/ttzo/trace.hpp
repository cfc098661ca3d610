#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ttzo {

// One row per training epoch. wall_time stays 0 unless timing was enabled,
// so traces from identical seeds are byte-identical by default.
struct TraceRow {
  long epoch = 0;
  std::string stage;  // "coarse", "fine", "fo"
  double train_loss = 0.0;
  double val_metric = 0.0;
  long cumulative_queries = 0;
  double wall_time = 0.0;
};

struct Trace {
  std::vector<TraceRow> rows;

  static const char* header() {
    return "epoch,stage,train_loss,val_metric,cumulative_queries,wall_time";
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("trace: cannot open " + path);
    out << header() << "\n";
    char buf[160];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof(buf), "%ld,%s,%.9e,%.9e,%ld,%.3f", r.epoch,
                    r.stage.c_str(), r.train_loss, r.val_metric,
                    r.cumulative_queries, r.wall_time);
      out << buf << "\n";
    }
    if (!out) throw std::runtime_error("trace: write failed for " + path);
  }
};

}  // namespace ttzo
