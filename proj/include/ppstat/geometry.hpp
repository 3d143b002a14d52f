#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace ppstat {

/// Planar point. Coordinates are required to be finite.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point& a, const Point& b) {
    return a.x == b.x && a.y == b.y;
  }
};

inline bool is_finite(const Point& p) {
  return std::isfinite(p.x) && std::isfinite(p.y);
}

inline double squared_distance(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Euclidean distance between two points.
inline double distance(const Point& a, const Point& b) {
  return std::sqrt(squared_distance(a, b));
}

/// Axis-aligned rectangular observation window with positive area.
class Window {
 public:
  Window(double xmin, double xmax, double ymin, double ymax)
      : xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax) {
    if (!(std::isfinite(xmin) && std::isfinite(xmax) && std::isfinite(ymin) &&
          std::isfinite(ymax))) {
      throw std::invalid_argument("window bounds must be finite");
    }
    if (!(xmin < xmax && ymin < ymax)) {
      throw std::invalid_argument("window requires xmin < xmax and ymin < ymax");
    }
  }

  double xmin() const { return xmin_; }
  double xmax() const { return xmax_; }
  double ymin() const { return ymin_; }
  double ymax() const { return ymax_; }
  double width() const { return xmax_ - xmin_; }
  double height() const { return ymax_ - ymin_; }
  double area() const { return width() * height(); }

  /// Closed containment test.
  bool contains(const Point& p) const {
    return p.x >= xmin_ && p.x <= xmax_ && p.y >= ymin_ && p.y <= ymax_;
  }

  /// Distance from p to the window boundary; negative when p is outside.
  double boundary_distance(const Point& p) const {
    return std::min(std::min(p.x - xmin_, xmax_ - p.x),
                    std::min(p.y - ymin_, ymax_ - p.y));
  }

  Window scaled(double c) const {
    if (!(c > 0.0)) throw std::invalid_argument("scale factor must be positive");
    return Window(c * xmin_, c * xmax_, c * ymin_, c * ymax_);
  }

  friend bool operator==(const Window& a, const Window& b) {
    return a.xmin_ == b.xmin_ && a.xmax_ == b.xmax_ && a.ymin_ == b.ymin_ &&
           a.ymax_ == b.ymax_;
  }

 private:
  double xmin_, xmax_, ymin_, ymax_;
};

/// Shrinks the window by t on every side. Empty when no positive-area
/// rectangle remains (2t reaching either side length).
inline std::optional<Window> erode(const Window& w, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("erosion radius must be >= 0");
  const double xlo = w.xmin() + t;
  const double xhi = w.xmax() - t;
  const double ylo = w.ymin() + t;
  const double yhi = w.ymax() - t;
  if (!(xlo < xhi && ylo < yhi)) return std::nullopt;
  return Window(xlo, xhi, ylo, yhi);
}

/// Cell-centered m x m evaluation lattice, row-major from the smallest y,
/// x varying fastest. No lattice point touches the boundary.
inline std::vector<Point> lattice_points(const Window& w, int m) {
  if (m < 1) throw std::invalid_argument("lattice resolution must be >= 1");
  const double dx = w.width() / m;
  const double dy = w.height() / m;
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(m) * m);
  for (int iy = 0; iy < m; ++iy) {
    const double y = w.ymin() + (iy + 0.5) * dy;
    for (int ix = 0; ix < m; ++ix) {
      pts.push_back(Point{w.xmin() + (ix + 0.5) * dx, y});
    }
  }
  return pts;
}

/// Strictly increasing list of radii, first entry >= 0.
class RadiiGrid {
 public:
  explicit RadiiGrid(std::vector<double> radii) : radii_(std::move(radii)) {
    if (radii_.empty()) throw std::invalid_argument("radii grid must be non-empty");
    if (!(radii_.front() >= 0.0)) {
      throw std::invalid_argument("radii must start at a value >= 0");
    }
    for (std::size_t i = 0; i + 1 < radii_.size(); ++i) {
      if (!(radii_[i] < radii_[i + 1])) {
        throw std::invalid_argument("radii must be strictly increasing");
      }
    }
    for (double t : radii_) {
      if (!std::isfinite(t)) throw std::invalid_argument("radii must be finite");
    }
  }

  const std::vector<double>& values() const { return radii_; }
  std::size_t size() const { return radii_.size(); }
  double operator[](std::size_t i) const { return radii_[i]; }
  double max() const { return radii_.back(); }

 private:
  std::vector<double> radii_;
};

/// Uniform grid t_min, t_min + step, ... up to and including t_max
/// (within half a step).
inline RadiiGrid uniform_radii(double t_min, double t_max, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("radius step must be positive");
  if (!(t_max >= t_min)) throw std::invalid_argument("t_max must be >= t_min");
  std::vector<double> radii;
  const long n = std::lround(std::floor((t_max - t_min) / step + 0.5));
  for (long i = 0; i <= n; ++i) radii.push_back(t_min + i * step);
  return RadiiGrid(std::move(radii));
}

}  // namespace ppstat
