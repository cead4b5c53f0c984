#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "strokeforge/image.hpp"

namespace strokeforge::cli {

/// Line chart of one series on a white background with light axes.
Image plot_series(const std::vector<double>& values, int width = 360, int height = 200);

/// Composes the artifacts and traces of a finished run into `out_dir`
/// (index.html plus PNGs). Throws when the run directory has no manifest or
/// a listed artifact is missing. Returns the HTML path.
std::filesystem::path build_report(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

}  // namespace strokeforge::cli
