#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace strokeforge::cli {

inline constexpr const char* kManifestFile = "manifest.json";

/// Record of one command invocation, written once into its run directory.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  /// Fully resolved configuration, defaults included.
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::uint64_t> seeds;
  /// role -> {path, fingerprint}
  nlohmann::json inputs = nlohmann::json::object();
  /// role -> path
  std::map<std::string, std::string> outputs;
  /// role -> file name inside the run directory
  std::map<std::string, std::string> artifacts;
  nlohmann::json metrics = nlohmann::json::object();
  std::string started_at;
  double wall_clock_seconds = 0.0;
  std::map<std::string, std::string> versions;
  std::string status = "ok";
  std::string error;

  void add_input(const std::string& role, const std::filesystem::path& path);

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  static RunManifest read(const std::filesystem::path& run_dir);
  void write(const std::filesystem::path& run_dir) const;
};

/// Versions of strokeforge and the libraries it links.
std::map<std::string, std::string> library_versions();

/// Root for run directories: $STROKEFORGE_RUNS, else ./runs.
std::filesystem::path runs_root();

/// Creates `<root>/<command>-<UTC timestamp>-<config hash>`, adding a numeric
/// suffix if that name is taken.
std::filesystem::path create_run_dir(const std::string& command, const nlohmann::json& config,
                                     const std::filesystem::path& root);

/// First 8 hex digits of the FNV-1a hash of the compact config text.
std::string config_hash(const nlohmann::json& config);

std::string utc_timestamp(std::chrono::system_clock::time_point t, bool compact);

}  // namespace strokeforge::cli
