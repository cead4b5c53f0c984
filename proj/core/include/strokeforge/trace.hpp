#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace strokeforge {

/// Long-format training log: one row per (phase, step, metric).
class TrainingTrace {
 public:
  struct Row {
    std::string phase;
    std::int64_t step = 0;
    std::string name;
    double value = 0.0;
  };

  void add(std::string phase, std::int64_t step, std::string name, double value);
  const std::vector<Row>& rows() const { return rows_; }
  std::vector<double> series(const std::string& phase, const std::string& name) const;
  void append(const TrainingTrace& other);

  /// CSV with header `phase,step,name,value`.
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<Row> rows_;
};

/// Progress output on stderr; silenced when STROKEFORGE_QUIET is set.
void log_info(const std::string& message);

}  // namespace strokeforge
