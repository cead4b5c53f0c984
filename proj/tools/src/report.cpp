#include "strokeforge/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "strokeforge/cli/manifest.hpp"
#include "strokeforge/error.hpp"

namespace strokeforge::cli {

namespace {

void set_pixel(Image& im, int x, int y, float r, float g, float b) {
  if (x < 0 || y < 0 || x >= im.width() || y >= im.height()) return;
  im.at(y, x, 0) = r;
  im.at(y, x, 1) = g;
  im.at(y, x, 2) = b;
}

void draw_line(Image& im, double x0, double y0, double x1, double y1) {
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    set_pixel(im, x, y, 0.12F, 0.35F, 0.75F);
    set_pixel(im, x, y + 1, 0.12F, 0.35F, 0.75F);
  }
}

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

/// Series keyed by name from either the long training format or step,objective files.
std::map<std::string, std::vector<double>> read_series(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot read " + csv.string());
  std::string header;
  std::getline(in, header);
  std::map<std::string, std::vector<double>> out;
  const auto cols = split_csv(header);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    try {
      if (cols.size() == 4 && cols[0] == "phase" && cells.size() == 4) {
        out[cells[0] + "/" + cells[2]].push_back(std::stod(cells[3]));
      } else if (cells.size() >= 2) {
        for (std::size_t c = 1; c < cells.size() && c < cols.size(); ++c) out[cols[c]].push_back(std::stod(cells[c]));
      }
    } catch (const std::exception&) {
      throw IoError("malformed row in " + csv.string() + ": " + line);
    }
  }
  return out;
}

std::string caption_for(const std::string& role) {
  static const std::map<std::string, std::string> captions{
      {"comparison_grid", "Oracle strokes (left of each pair) next to the painter's output (right)."},
      {"triplets", "Target (left), neural painter canvas (middle), the same actions re-rendered by the oracle (right)."},
      {"sweep_strip", "Painter output while one action component sweeps from 0 to 1."},
      {"canvas", "Final canvas."},
      {"oracle_canvas", "Actions re-rendered by the oracle."},
  };
  const auto it = captions.find(role);
  return it == captions.end() ? role : it->second;
}

}  // namespace

Image plot_series(const std::vector<double>& values, int width, int height) {
  Image im = Image::white(height, width);
  constexpr int kMargin = 12;
  for (int x = kMargin; x < width - kMargin; ++x) set_pixel(im, x, height - kMargin, 0.6F, 0.6F, 0.6F);
  for (int y = kMargin; y <= height - kMargin; ++y) set_pixel(im, kMargin, y, 0.6F, 0.6F, 0.6F);
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.empty()) return im;
  auto [lo_it, hi_it] = std::ranges::minmax_element(finite);
  double lo = *lo_it;
  double hi = *hi_it;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double plot_w = width - 2.0 * kMargin;
  const double plot_h = height - 2.0 * kMargin;
  const auto px = [&](std::size_t i) {
    return kMargin + (finite.size() == 1 ? 0.0 : plot_w * static_cast<double>(i) / static_cast<double>(finite.size() - 1));
  };
  const auto py = [&](double v) { return kMargin + plot_h * (1.0 - (v - lo) / (hi - lo)); };
  if (finite.size() == 1) {
    draw_line(im, px(0), py(finite[0]), px(0) + 1, py(finite[0]));
    return im;
  }
  for (std::size_t i = 1; i < finite.size(); ++i) draw_line(im, px(i - 1), py(finite[i - 1]), px(i), py(finite[i]));
  return im;
}

std::filesystem::path build_report(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir) {
  if (!std::filesystem::is_directory(run_dir)) throw IoError(run_dir.string() + " is not a directory");
  if (std::filesystem::is_empty(run_dir)) throw IoError(run_dir.string() + " is empty");
  const auto manifest = RunManifest::read(run_dir);
  for (const auto& [role, file] : manifest.artifacts) {
    if (!std::filesystem::is_regular_file(run_dir / file)) {
      throw IoError("artifact '" + role + "' is missing: " + (run_dir / file).string());
    }
  }
  if (manifest.artifacts.empty()) throw IoError("run " + run_dir.string() + " recorded no artifacts");
  std::filesystem::create_directories(out_dir);

  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>strokeforge " << html_escape(manifest.command)
       << "</title>\n<style>body{font-family:sans-serif;margin:2em;max-width:70em}"
          "img{image-rendering:pixelated;border:1px solid #ccc;margin:4px}"
          "table{border-collapse:collapse}td,th{border:1px solid #ddd;padding:2px 8px;text-align:left}"
          "pre{background:#f6f6f6;padding:1em;overflow-x:auto}</style></head><body>\n";
  html << "<h1>" << html_escape(manifest.command) << "</h1>\n";
  html << "<p>Run <code>" << html_escape(run_dir.filename().string()) << "</code>, started "
       << html_escape(manifest.started_at) << ", " << manifest.wall_clock_seconds << " s, status "
       << html_escape(manifest.status) << ".</p>\n";

  if (!manifest.metrics.empty()) {
    html << "<h2>Metrics</h2>\n<table><tr><th>metric</th><th>value</th></tr>\n";
    for (const auto& [k, v] : manifest.metrics.items()) {
      html << "<tr><td>" << html_escape(k) << "</td><td>" << html_escape(v.dump()) << "</td></tr>\n";
    }
    html << "</table>\n";
  }

  html << "<h2>Figures</h2>\n";
  for (const auto& [role, file] : manifest.artifacts) {
    const auto src = run_dir / file;
    if (src.extension() == ".png") {
      const auto image = read_png(src);
      const auto dst_name = role + ".png";
      std::filesystem::copy_file(src, out_dir / dst_name, std::filesystem::copy_options::overwrite_existing);
      const int scale = std::max(1, 512 / std::max(1, image.width()));
      html << "<figure><img src=\"" << html_escape(dst_name) << "\" width=\"" << image.width() * std::min(scale, 4)
           << "\"><figcaption>" << html_escape(caption_for(role)) << "</figcaption></figure>\n";
    } else if (src.extension() == ".csv") {
      for (const auto& [name, values] : read_series(src)) {
        std::string safe = role + "-" + name;
        std::ranges::replace_if(safe, [](char c) { return !(std::isalnum(static_cast<unsigned char>(c)) || c == '-'); }, '_');
        write_png(plot_series(values), out_dir / (safe + ".png"));
        html << "<figure><img src=\"" << html_escape(safe) << ".png\"><figcaption>" << html_escape(name) << " ("
             << values.size() << " points)</figcaption></figure>\n";
      }
    }
  }

  html << "<h2>Configuration</h2>\n<pre>" << html_escape(manifest.config.dump(2)) << "</pre>\n";
  html << "<h2>Inputs</h2>\n<pre>" << html_escape(manifest.inputs.dump(2)) << "</pre>\n";
  html << "</body></html>\n";
  const auto index = out_dir / "index.html";
  std::ofstream out(index);
  if (!out) throw IoError("cannot write " + index.string());
  out << html.str();
  return index;
}

}  // namespace strokeforge::cli
