#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ppstat/errors.hpp"
#include "ppstat/geometry.hpp"
#include "ppstat/pattern.hpp"

namespace ppstat {

struct Bounds {
  double inf = 0.0;
  double sup = 0.0;
};

namespace detail {

inline double std_normal_cdf(double z) {
  return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0)));
}

/// Cell-centered raster payload shared by raster-backed models.
struct RasterData {
  Window window;
  int nx = 0;
  int ny = 0;
  std::vector<double> cells;  // row-major, row 0 at the smallest y
  double min_cell = 0.0;
  double max_cell = 0.0;

  RasterData(Window w, int nx_, int ny_, std::vector<double> cells_)
      : window(w), nx(nx_), ny(ny_), cells(std::move(cells_)) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("raster needs nx, ny >= 1");
    if (cells.size() != static_cast<std::size_t>(nx) * ny) {
      throw std::invalid_argument("raster cell count does not match nx * ny");
    }
    min_cell = cells[0];
    max_cell = cells[0];
    for (double v : cells) {
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("raster cells must be finite and >= 0");
      }
      min_cell = std::min(min_cell, v);
      max_cell = std::max(max_cell, v);
    }
  }

  double cell(int ix, int iy) const {
    return cells[static_cast<std::size_t>(iy) * nx + ix];
  }

  /// Bilinear interpolation between cell centers, constant beyond the
  /// outermost centers. Values never leave [min_cell, max_cell].
  double interpolate(Point p) const {
    const double dx = window.width() / nx;
    const double dy = window.height() / ny;
    double fx = (p.x - window.xmin()) / dx - 0.5;
    double fy = (p.y - window.ymin()) / dy - 0.5;
    fx = std::clamp(fx, 0.0, static_cast<double>(nx - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(ny - 1));
    const int ix = std::min(static_cast<int>(fx), std::max(nx - 2, 0));
    const int iy = std::min(static_cast<int>(fy), std::max(ny - 2, 0));
    const double wx = std::clamp(fx - ix, 0.0, 1.0);
    const double wy = std::clamp(fy - iy, 0.0, 1.0);
    const int ix1 = std::min(ix + 1, nx - 1);
    const int iy1 = std::min(iy + 1, ny - 1);
    return (1.0 - wx) * (1.0 - wy) * cell(ix, iy) + wx * (1.0 - wy) * cell(ix1, iy) +
           (1.0 - wx) * wy * cell(ix, iy1) + wx * wy * cell(ix1, iy1);
  }
};

struct IntensityImpl {
  virtual ~IntensityImpl() = default;
  virtual double eval(Point p) const = 0;
  virtual Bounds bounds(const Window& w) const = 0;
  virtual std::shared_ptr<const IntensityImpl> scaled(double c) const = 0;
  virtual const RasterData* raster() const { return nullptr; }
};

}  // namespace detail

/// Evaluable intensity function with computable infimum and supremum over a
/// window. Strictly positive by construction.
class IntensityModel {
 public:
  /// lambda(x, y) = a * exp(-b * y).
  static IntensityModel exponential_gradient(double a, double b);
  static IntensityModel constant(double a);
  /// Cell values over w, row 0 at the smallest y; bilinear in between.
  static IntensityModel raster(Window w, int nx, int ny, std::vector<double> cells);
  /// Edge-corrected Gaussian kernel density of the data, evaluated exactly.
  static IntensityModel kernel(PointPattern data, double bandwidth);

  double evaluate(Point p) const { return impl_->eval(p); }

  /// Infimum and supremum of the intensity over w. Exact for the analytic
  /// families; cell extremes for rasters; probe-lattice extremes for kernel
  /// estimates.
  Bounds bounds(const Window& w) const {
    const Bounds b = impl_->bounds(w);
    if (!(b.inf > 0.0)) throw NumericError("intensity infimum is not positive");
    if (!std::isfinite(b.sup)) throw NumericError("intensity supremum not finite");
    return b;
  }

  /// Intensity of the scaled process: evaluate(x / c) / c^2.
  IntensityModel scaled(double c) const {
    if (!(c > 0.0)) throw std::invalid_argument("scale factor must be positive");
    return IntensityModel(impl_->scaled(c));
  }

  /// Pointwise product with a retention function.
  IntensityModel thinned(const ThinningSpec& spec) const;

  /// Raster payload when this model is raster-backed, else nullptr.
  const detail::RasterData* raster_data() const { return impl_->raster(); }

 private:
  explicit IntensityModel(std::shared_ptr<const detail::IntensityImpl> impl)
      : impl_(std::move(impl)) {}

  std::shared_ptr<const detail::IntensityImpl> impl_;
};

struct BandwidthSpec {
  double h = 0.0;
};

namespace detail {

struct ExponentialGradientImpl final : IntensityImpl {
  double a, b;
  ExponentialGradientImpl(double a_, double b_) : a(a_), b(b_) {
    if (!(a > 0.0)) throw std::invalid_argument("intensity amplitude must be > 0");
    if (!std::isfinite(b)) throw std::invalid_argument("gradient rate must be finite");
  }
  double eval(Point p) const override { return a * std::exp(-b * p.y); }
  Bounds bounds(const Window& w) const override {
    const double v0 = a * std::exp(-b * w.ymin());
    const double v1 = a * std::exp(-b * w.ymax());
    return Bounds{std::min(v0, v1), std::max(v0, v1)};
  }
  std::shared_ptr<const IntensityImpl> scaled(double c) const override {
    return std::make_shared<ExponentialGradientImpl>(a / (c * c), b / c);
  }
};

struct ConstantImpl final : IntensityImpl {
  double a;
  explicit ConstantImpl(double a_) : a(a_) {
    if (!(a > 0.0)) throw std::invalid_argument("constant intensity must be > 0");
  }
  double eval(Point) const override { return a; }
  Bounds bounds(const Window&) const override { return Bounds{a, a}; }
  std::shared_ptr<const IntensityImpl> scaled(double c) const override {
    return std::make_shared<ConstantImpl>(a / (c * c));
  }
};

struct RasterImpl final : IntensityImpl {
  RasterData data;
  RasterImpl(Window w, int nx, int ny, std::vector<double> cells)
      : data(w, nx, ny, std::move(cells)) {
    if (!(data.min_cell > 0.0)) {
      throw NumericError("intensity raster has a non-positive cell");
    }
  }
  double eval(Point p) const override { return data.interpolate(p); }
  Bounds bounds(const Window&) const override {
    return Bounds{data.min_cell, data.max_cell};
  }
  std::shared_ptr<const IntensityImpl> scaled(double c) const override {
    std::vector<double> cells = data.cells;
    for (double& v : cells) v /= c * c;
    return std::make_shared<RasterImpl>(data.window.scaled(c), data.nx, data.ny,
                                        std::move(cells));
  }
  const RasterData* raster() const override { return &data; }
};

struct KernelImpl final : IntensityImpl {
  PointPattern data;
  double h;
  std::vector<double> inv_edge_mass;  // 1 / (kernel mass inside window at x_i)
  int probe_resolution;

  KernelImpl(PointPattern data_, double h_, int probe_resolution_ = 256)
      : data(std::move(data_)), h(h_), probe_resolution(probe_resolution_) {
    if (data.empty()) throw std::invalid_argument("kernel estimate needs data points");
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    const Window& w = data.window();
    inv_edge_mass.reserve(data.size());
    for (const Point& p : data.points()) {
      const double mx = std_normal_cdf((w.xmax() - p.x) / h) -
                        std_normal_cdf((w.xmin() - p.x) / h);
      const double my = std_normal_cdf((w.ymax() - p.y) / h) -
                        std_normal_cdf((w.ymin() - p.y) / h);
      const double mass = mx * my;
      if (!(mass > 0.0)) throw NumericError("kernel edge mass vanished");
      inv_edge_mass.push_back(1.0 / mass);
    }
  }

  double eval(Point p) const override {
    const double inv2h2 = 1.0 / (2.0 * h * h);
    const double norm = 1.0 / (2.0 * M_PI * h * h);
    double sum = 0.0;
    const auto& pts = data.points();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sum += inv_edge_mass[i] * std::exp(-squared_distance(p, pts[i]) * inv2h2);
    }
    return norm * sum;
  }

  Bounds bounds(const Window& w) const override {
    double lo = eval(Point{w.xmin(), w.ymin()});
    double hi = lo;
    for (const Point& p : lattice_points(w, probe_resolution)) {
      const double v = eval(p);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return Bounds{lo, hi};
  }

  std::shared_ptr<const IntensityImpl> scaled(double c) const override {
    return std::make_shared<KernelImpl>(scale_pattern(data, c), c * h,
                                        probe_resolution);
  }
};

struct ThinnedImpl final : IntensityImpl {
  std::shared_ptr<const IntensityImpl> base;
  ThinningSpec spec;
  ThinnedImpl(std::shared_ptr<const IntensityImpl> base_, ThinningSpec spec_)
      : base(std::move(base_)), spec(std::move(spec_)) {
    if (!(spec.retention_inf > 0.0 && spec.retention_sup <= 1.0)) {
      throw std::invalid_argument("retention bounds must satisfy 0 < inf, sup <= 1");
    }
  }
  double eval(Point p) const override { return base->eval(p) * spec.retention(p); }
  Bounds bounds(const Window& w) const override {
    const Bounds b = base->bounds(w);
    return Bounds{b.inf * spec.retention_inf, b.sup * spec.retention_sup};
  }
  std::shared_ptr<const IntensityImpl> scaled(double c) const override {
    ThinningSpec inner = spec;
    auto p = spec.retention;
    inner.retention = [p, c](Point q) { return p(Point{q.x / c, q.y / c}); };
    return std::make_shared<ThinnedImpl>(base->scaled(c), std::move(inner));
  }
};

}  // namespace detail

inline IntensityModel IntensityModel::exponential_gradient(double a, double b) {
  return IntensityModel(std::make_shared<detail::ExponentialGradientImpl>(a, b));
}

inline IntensityModel IntensityModel::constant(double a) {
  return IntensityModel(std::make_shared<detail::ConstantImpl>(a));
}

inline IntensityModel IntensityModel::raster(Window w, int nx, int ny,
                                             std::vector<double> cells) {
  return IntensityModel(
      std::make_shared<detail::RasterImpl>(w, nx, ny, std::move(cells)));
}

inline IntensityModel IntensityModel::kernel(PointPattern data, double bandwidth) {
  return IntensityModel(
      std::make_shared<detail::KernelImpl>(std::move(data), bandwidth));
}

inline IntensityModel IntensityModel::thinned(const ThinningSpec& spec) const {
  return IntensityModel(std::make_shared<detail::ThinnedImpl>(impl_, spec));
}

/// Default bandwidth when none is configured: a tenth of the shorter side.
inline double default_bandwidth(const Window& w) {
  return 0.1 * std::min(w.width(), w.height());
}

/// Kernel intensity estimate rasterized onto `resolution`^2 cells.
inline IntensityModel kernel_estimate(const PointPattern& data, BandwidthSpec bw,
                                      int resolution = 256) {
  IntensityModel exact = IntensityModel::kernel(data, bw.h);
  const Window& w = data.window();
  std::vector<double> cells;
  cells.reserve(static_cast<std::size_t>(resolution) * resolution);
  for (const Point& p : lattice_points(w, resolution)) {
    cells.push_back(exact.evaluate(p));
  }
  return IntensityModel::raster(w, resolution, resolution, std::move(cells));
}

/// Raster file: `# raster xmin xmax ymin ymax nx ny`, then ny comma-separated
/// rows, row 0 at the smallest y.
inline void write_raster(const IntensityModel& model, const std::string& path) {
  const detail::RasterData* r = model.raster_data();
  if (r == nullptr) throw std::invalid_argument("model is not raster-backed");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "# raster " << detail::format_double(r->window.xmin()) << ' '
      << detail::format_double(r->window.xmax()) << ' '
      << detail::format_double(r->window.ymin()) << ' '
      << detail::format_double(r->window.ymax()) << ' ' << r->nx << ' ' << r->ny
      << '\n';
  for (int iy = 0; iy < r->ny; ++iy) {
    for (int ix = 0; ix < r->nx; ++ix) {
      if (ix > 0) out << ',';
      out << detail::format_double(r->cell(ix, iy));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline IntensityModel read_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing raster header");
  std::string_view header = detail::strip(line);
  constexpr std::string_view kPrefix = "# raster ";
  if (header.substr(0, kPrefix.size()) != kPrefix) {
    throw ParseError(path + ": first line must be '# raster xmin xmax ymin ymax nx ny'");
  }
  std::istringstream hs{std::string(header.substr(kPrefix.size()))};
  std::string tok;
  double b[4];
  for (double& v : b) {
    if (!(hs >> tok)) throw ParseError(path + ": raster header needs six fields");
    v = detail::parse_double(tok, path);
  }
  long nx = 0, ny = 0;
  if (!(hs >> nx >> ny) || nx < 1 || ny < 1) {
    throw ParseError(path + ": raster header needs positive nx, ny");
  }
  std::vector<double> cells;
  cells.reserve(static_cast<std::size_t>(nx) * ny);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = detail::strip(line);
    if (row.empty()) continue;
    std::size_t start = 0;
    while (start <= row.size()) {
      std::size_t comma = row.find(',', start);
      if (comma == std::string_view::npos) comma = row.size();
      cells.push_back(detail::parse_double(
          detail::strip(row.substr(start, comma - start)),
          path + ":" + std::to_string(lineno)));
      start = comma + 1;
    }
  }
  if (cells.size() != static_cast<std::size_t>(nx) * ny) {
    throw ParseError(path + ": expected " + std::to_string(nx * ny) + " cells, got " +
                     std::to_string(cells.size()));
  }
  return IntensityModel::raster(Window(b[0], b[1], b[2], b[3]), static_cast<int>(nx),
                                static_cast<int>(ny), std::move(cells));
}

}  // namespace ppstat
