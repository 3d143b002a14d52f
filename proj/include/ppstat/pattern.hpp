#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "ppstat/errors.hpp"
#include "ppstat/geometry.hpp"
#include "ppstat/rng.hpp"

namespace ppstat {

namespace detail {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& context) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ParseError(context + ": cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace detail

/// A simple point pattern: distinct points inside an observation window.
class PointPattern {
 public:
  PointPattern(Window window, std::vector<Point> points)
      : window_(window), points_(std::move(points)) {
    for (const Point& p : points_) {
      if (!is_finite(p)) throw std::invalid_argument("pattern point not finite");
      if (!window_.contains(p)) {
        throw std::invalid_argument("pattern point outside window");
      }
    }
    auto order = std::vector<std::size_t>(points_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return points_[a].x != points_[b].x ? points_[a].x < points_[b].x
                                          : points_[a].y < points_[b].y;
    });
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      if (points_[order[i]] == points_[order[i + 1]]) {
        throw std::invalid_argument("pattern contains duplicate points");
      }
    }
  }

  const Window& window() const { return window_; }
  const std::vector<Point>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

 private:
  Window window_;
  std::vector<Point> points_;
};

/// Location-dependent retention probabilities p with 0 < p <= 1 and a known
/// positive infimum (and supremum, 1 unless stated otherwise).
struct ThinningSpec {
  std::function<double(Point)> retention;
  double retention_inf = 1.0;
  double retention_sup = 1.0;
};

inline ThinningSpec uniform_thinning(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("retention probability must be in (0, 1]");
  }
  return ThinningSpec{[p](Point) { return p; }, p, p};
}

/// p(x, y) = a * exp(-b * y); caller supplies bounds via the window.
inline ThinningSpec exponential_thinning(double a, double b, const Window& w) {
  const double v0 = a * std::exp(-b * w.ymin());
  const double v1 = a * std::exp(-b * w.ymax());
  const double lo = std::min(v0, v1);
  const double hi = std::max(v0, v1);
  if (!(lo > 0.0) || !(hi <= 1.0)) {
    throw std::invalid_argument("retention must stay in (0, 1] on the window");
  }
  return ThinningSpec{[a, b](Point p) { return a * std::exp(-b * p.y); }, lo, hi};
}

/// Pattern file: `# window xmin xmax ymin ymax`, a `x,y` header, then one
/// decimal row per point.
inline void write_pattern(const PointPattern& pattern, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const Window& w = pattern.window();
  out << "# window " << detail::format_double(w.xmin()) << ' '
      << detail::format_double(w.xmax()) << ' ' << detail::format_double(w.ymin())
      << ' ' << detail::format_double(w.ymax()) << "\nx,y\n";
  for (const Point& p : pattern.points()) {
    out << detail::format_double(p.x) << ',' << detail::format_double(p.y) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline PointPattern read_pattern(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing window line");
  std::string_view header = detail::strip(line);
  constexpr std::string_view kPrefix = "# window ";
  if (header.substr(0, kPrefix.size()) != kPrefix) {
    throw ParseError(path + ": first line must be '# window xmin xmax ymin ymax'");
  }
  std::istringstream ws{std::string(header.substr(kPrefix.size()))};
  std::string tok;
  double bounds[4];
  for (double& b : bounds) {
    if (!(ws >> tok)) throw ParseError(path + ": window line needs four bounds");
    b = detail::parse_double(tok, path);
  }
  if (ws >> tok) throw ParseError(path + ": trailing content on window line");

  if (!std::getline(in, line)) throw ParseError(path + ": missing 'x,y' header");
  if (detail::strip(line) != "x,y") {
    throw ParseError(path + ": second line must be 'x,y'");
  }

  Window window(bounds[0], bounds[1], bounds[2], bounds[3]);
  std::vector<Point> points;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = detail::strip(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'x,y' row");
    }
    const std::string ctx = path + ":" + std::to_string(lineno);
    Point p{detail::parse_double(detail::strip(row.substr(0, comma)), ctx),
            detail::parse_double(detail::strip(row.substr(comma + 1)), ctx)};
    if (!window.contains(p)) {
      throw ParseError(ctx + ": point outside the declared window");
    }
    points.push_back(p);
  }
  try {
    return PointPattern(window, std::move(points));
  } catch (const std::invalid_argument& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Maps every point (and the window) to c times itself.
inline PointPattern scale_pattern(const PointPattern& pattern, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("scale factor must be positive");
  std::vector<Point> pts;
  pts.reserve(pattern.size());
  for (const Point& p : pattern.points()) pts.push_back(Point{c * p.x, c * p.y});
  return PointPattern(pattern.window().scaled(c), std::move(pts));
}

/// Independent thinning, one uniform draw per point in point-list order.
inline PointPattern thin_pattern(const PointPattern& pattern,
                                 const ThinningSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> kept;
  for (const Point& p : pattern.points()) {
    const double prob = spec.retention(p);
    if (!(prob > 0.0 && prob <= 1.0)) {
      throw std::invalid_argument("retention probability outside (0, 1]");
    }
    if (rng.uniform() < prob) kept.push_back(p);
  }
  return PointPattern(pattern.window(), std::move(kept));
}

}  // namespace ppstat
