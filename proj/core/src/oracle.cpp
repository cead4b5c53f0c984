#include "strokeforge/oracle.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <string>

#include "strokeforge/error.hpp"
#include "strokeforge/rng.hpp"

namespace strokeforge {

OracleConfig scaled_oracle_config(int canvas_size) {
  OracleConfig cfg;
  cfg.canvas_size = canvas_size;
  cfg.max_radius_px = 8.0 * canvas_size / 64.0;
  return cfg;
}

void OracleConfig::validate() const {
  if (canvas_size < 8) throw InvalidArgument("canvas_size must be >= 8");
  if (!(min_radius_px > 0.0)) throw InvalidArgument("min_radius_px must be > 0");
  if (!(max_radius_px > min_radius_px)) {
    throw InvalidArgument("max_radius_px must exceed min_radius_px");
  }
  if (!(dab_spacing_factor > 0.0)) throw InvalidArgument("dab_spacing_factor must be > 0");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw InvalidArgument("noise_scale must be a finite value >= 0");
  }
}

namespace {

// Area of {0 <= X <= x, 0 <= Y <= y, X^2 + Y^2 <= r^2} for x, y >= 0.
double quadrant_area(double x, double y, double r) {
  x = std::min(x, r);
  y = std::min(y, r);
  const double r2 = r * r;
  if (x * x + y * y <= r2) return x * y;
  const auto antiderivative = [&](double u) {
    const double s = std::sqrt(std::max(0.0, r2 - u * u));
    return 0.5 * (u * s + r2 * std::asin(std::clamp(u / r, -1.0, 1.0)));
  };
  const double xc = std::sqrt(std::max(0.0, r2 - y * y));
  return y * xc + antiderivative(x) - antiderivative(xc);
}

double signed_area(double x, double y, double r) {
  const double sx = x < 0.0 ? -1.0 : 1.0;
  const double sy = y < 0.0 ? -1.0 : 1.0;
  return sx * sy * quadrant_area(std::abs(x), std::abs(y), r);
}

struct Point {
  double x;
  double y;
};

Point bezier(const Point& p0, const Point& p1, const Point& p2, double t) {
  const double u = 1.0 - t;
  return {u * u * p0.x + 2.0 * u * t * p1.x + t * t * p2.x,
          u * u * p0.y + 2.0 * u * t * p1.y + t * t * p2.y};
}

void stamp_dab(Image& image, double cx, double cy, double radius, double opacity,
               const std::array<double, 3>& color) {
  if (radius <= 0.0 || opacity <= 0.0) return;
  const int size_y = image.height();
  const int size_x = image.width();
  const int x_lo = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x_hi = std::min(size_x - 1, static_cast<int>(std::floor(cx + radius)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y_hi = std::min(size_y - 1, static_cast<int>(std::floor(cy + radius)));
  for (int py = y_lo; py <= y_hi; ++py) {
    for (int px = x_lo; px <= x_hi; ++px) {
      const double coverage = disc_rect_coverage(cx, cy, radius, px, py, px + 1.0, py + 1.0);
      if (coverage <= 0.0) continue;
      const double a = opacity * coverage;
      for (int c = 0; c < Image::kChannels; ++c) {
        const double dst = image.at(py, px, c);
        image.at(py, px, c) = static_cast<float>(dst + a * (color[c] - dst));
      }
    }
  }
}

}  // namespace

double disc_rect_coverage(double cx, double cy, double radius, double x0, double y0, double x1,
                          double y1) {
  if (radius <= 0.0) return 0.0;
  const double ax0 = x0 - cx;
  const double ax1 = x1 - cx;
  const double ay0 = y0 - cy;
  const double ay1 = y1 - cy;
  const double area = signed_area(ax1, ay1, radius) - signed_area(ax0, ay1, radius) -
                      signed_area(ax1, ay0, radius) + signed_area(ax0, ay0, radius);
  const double max_area = (x1 - x0) * (y1 - y0);
  return std::clamp(area, 0.0, max_area);
}

Image render_stroke(const Action& action, const OracleConfig& cfg) {
  cfg.validate();
  if (!is_valid(action)) throw InvalidArgument("action components must lie in [0,1]");

  const int size = cfg.canvas_size;
  Image image = Image::white(size, size);

  std::array<double, 3> color{};
  for (int c = 0; c < 3; ++c) {
    const auto field = static_cast<std::size_t>(ActionField::kColorR) + c;
    color[c] = static_cast<double>(to_byte(action[field])) / 255.0;
  }
  const double s = size;
  const Point p0{action[ActionField::kX0] * s, action[ActionField::kY0] * s};
  const Point p1{action[ActionField::kX1] * s, action[ActionField::kY1] * s};
  const Point p2{action[ActionField::kX2] * s, action[ActionField::kY2] * s};

  const double start_p = action.start_pressure();
  const double end_p = action.end_pressure();
  const double brush = action.brush_size();
  const auto pressure = [&](double t) { return (1.0 - t) * start_p + t * end_p; };
  const auto radius = [&](double t) {
    return cfg.min_radius_px + (cfg.max_radius_px - cfg.min_radius_px) * brush * pressure(t);
  };

  Rng rng(cfg.seed);
  const auto stamp = [&](double t) {
    const Point c = bezier(p0, p1, p2, t);
    double cx = c.x;
    double cy = c.y;
    double r = radius(t);
    if (cfg.noise_scale > 0.0) {
      cx += cfg.noise_scale * rng.normal();
      cy += cfg.noise_scale * rng.normal();
      r = std::max(0.0, r * (1.0 + cfg.noise_scale * rng.normal()));
    }
    stamp_dab(image, cx, cy, r, pressure(t), color);
  };

  // Dabs are placed in arc-length order: the curve is oversampled uniformly in
  // t and a dab is emitted whenever the travelled length reaches the spacing.
  stamp(0.0);
  Point prev = p0;
  double travelled = 0.0;
  double last_dab = 0.0;
  for (int k = 1; k <= kArcLengthSamples; ++k) {
    const double t = static_cast<double>(k) / kArcLengthSamples;
    const Point cur = bezier(p0, p1, p2, t);
    travelled += std::hypot(cur.x - prev.x, cur.y - prev.y);
    prev = cur;
    if (travelled - last_dab >= cfg.dab_spacing_factor * radius(t)) {
      stamp(t);
      last_dab = travelled;
    }
  }
  return image;
}

Image render_stroke_discrete(const DiscreteAction& dv, const OracleConfig& cfg) {
  const Action snapped = snap(dv);  // validates levels
  if (dv.lift) {
    cfg.validate();
    return Image::white(cfg.canvas_size, cfg.canvas_size);
  }
  return render_stroke(snapped, cfg);
}

DabOracle::DabOracle(OracleConfig cfg) : cfg_(cfg) { cfg_.validate(); }

namespace {

void write_all(int fd, const void* data, std::size_t size) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  while (size > 0) {
    const ssize_t n = ::write(fd, p, size);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw IoError("external oracle: write failed");
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

void read_all(int fd, void* data, std::size_t size) {
  auto* p = static_cast<std::uint8_t*>(data);
  while (size > 0) {
    const ssize_t n = ::read(fd, p, size);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw IoError("external oracle: short read from painting program");
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

}  // namespace

ExternalOracle::ExternalOracle(std::vector<std::string> argv, int canvas_size)
    : canvas_size_(canvas_size) {
  if (argv.empty()) throw InvalidArgument("external oracle: empty command");
  if (canvas_size < 8) throw InvalidArgument("canvas_size must be >= 8");
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw IoError("external oracle: pipe failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw IoError("external oracle: pipe failed");
  }
  std::signal(SIGPIPE, SIG_IGN);
  const pid_t pid = ::fork();
  if (pid < 0) throw IoError("external oracle: fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    std::vector<char*> args;
    for (auto& a : argv) args.push_back(a.data());
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ExternalOracle::~ExternalOracle() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

Image ExternalOracle::render(const Action& action) {
  if (!is_valid(action)) throw InvalidArgument("action components must lie in [0,1]");
  std::array<std::uint8_t, kActionDim * 4> payload{};
  for (std::size_t i = 0; i < kActionDim; ++i) {
    auto bits = std::bit_cast<std::uint32_t>(action[i]);
    for (int b = 0; b < 4; ++b) payload[i * 4 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  write_all(to_child_, payload.data(), payload.size());
  std::vector<std::uint8_t> frame(static_cast<std::size_t>(canvas_size_) * canvas_size_ * 3);
  read_all(from_child_, frame.data(), frame.size());
  return from_bytes(frame, canvas_size_, canvas_size_);
}

}  // namespace strokeforge
