#include "strokeforge/trace.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "strokeforge/error.hpp"

namespace strokeforge {

void TrainingTrace::add(std::string phase, std::int64_t step, std::string name, double value) {
  rows_.push_back({std::move(phase), step, std::move(name), value});
}

std::vector<double> TrainingTrace::series(const std::string& phase, const std::string& name) const {
  std::vector<double> out;
  for (const auto& r : rows_) {
    if (r.phase == phase && r.name == name) out.push_back(r.value);
  }
  return out;
}

void TrainingTrace::append(const TrainingTrace& other) {
  rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

void TrainingTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "phase,step,name,value\n" << std::setprecision(9);
  for (const auto& r : rows_) out << r.phase << ',' << r.step << ',' << r.name << ',' << r.value << '\n';
}

void log_info(const std::string& message) {
  static const bool quiet = std::getenv("STROKEFORGE_QUIET") != nullptr;
  if (!quiet) std::cerr << "[strokeforge] " << message << std::endl;
}

}  // namespace strokeforge
