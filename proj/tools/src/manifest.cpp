#include "strokeforge/cli/manifest.hpp"

#include <torch/version.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "strokeforge/dataset.hpp"
#include "strokeforge/error.hpp"
#include "strokeforge/image.hpp"
#include "strokeforge/version.hpp"

namespace strokeforge::cli {

void RunManifest::add_input(const std::string& role, const std::filesystem::path& path) {
  nlohmann::json entry;
  entry["path"] = path.string();
  if (std::filesystem::is_regular_file(path)) {
    entry["fingerprint"] = file_fingerprint(path);
    const auto sidecar = std::filesystem::path(path.string() + ".json");
    if (std::filesystem::is_regular_file(sidecar)) entry["metadata_fingerprint"] = file_fingerprint(sidecar);
  } else if (std::filesystem::is_directory(path)) {
    // Directory inputs are fingerprinted by their sorted file list and contents.
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::ranges::sort(files);
    std::string combined;
    for (const auto& f : files) combined += std::filesystem::relative(f, path).string() + ":" + file_fingerprint(f) + "\n";
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : combined) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    entry["fingerprint"] = os.str();
    entry["files"] = files.size();
  }
  inputs[role] = entry;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["format"] = "strokeforge-manifest";
  j["version"] = 1;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config;
  j["seeds"] = seeds;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["artifacts"] = artifacts;
  j["metrics"] = metrics;
  j["started_at"] = started_at;
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["versions"] = versions;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "strokeforge-manifest") throw IoError("not a strokeforge run manifest");
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.argv = j.value("argv", std::vector<std::string>{});
  m.config = j.value("config", nlohmann::json::object());
  m.seeds = j.value("seeds", std::map<std::string, std::uint64_t>{});
  m.inputs = j.value("inputs", nlohmann::json::object());
  m.outputs = j.value("outputs", std::map<std::string, std::string>{});
  m.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
  m.metrics = j.value("metrics", nlohmann::json::object());
  m.started_at = j.value("started_at", "");
  m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
  m.versions = j.value("versions", std::map<std::string, std::string>{});
  m.status = j.value("status", "ok");
  m.error = j.value("error", "");
  return m;
}

RunManifest RunManifest::read(const std::filesystem::path& run_dir) {
  const auto path = run_dir / kManifestFile;
  std::ifstream in(path);
  if (!in) throw IoError("no " + std::string(kManifestFile) + " in " + run_dir.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
}

void RunManifest::write(const std::filesystem::path& run_dir) const {
  const auto path = run_dir / kManifestFile;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

std::map<std::string, std::string> library_versions() {
  return {{"strokeforge", STROKEFORGE_VERSION},
          {"libtorch", TORCH_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION},
          {"libpng", png_library_version()}};
}

std::filesystem::path runs_root() {
  if (const char* env = std::getenv("STROKEFORGE_RUNS"); env != nullptr && *env != '\0') return env;
  return "runs";
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str().substr(0, 8);
}

std::string utc_timestamp(std::chrono::system_clock::time_point t, bool compact) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, compact ? "%Y%m%d-%H%M%S" : "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::filesystem::path create_run_dir(const std::string& command, const nlohmann::json& config,
                                     const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  const auto base = command + "-" + utc_timestamp(std::chrono::system_clock::now(), true) + "-" + config_hash(config);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto dir = root / (attempt == 0 ? base : base + "-" + std::to_string(attempt));
    if (std::filesystem::create_directory(dir)) return dir;
  }
  throw IoError("could not create a fresh run directory under " + root.string());
}

}  // namespace strokeforge::cli
