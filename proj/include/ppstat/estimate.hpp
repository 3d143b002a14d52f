#pragma once

#include <cmath>
#include <exception>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "ppstat/errors.hpp"
#include "ppstat/geometry.hpp"
#include "ppstat/intensity.hpp"
#include "ppstat/pattern.hpp"
#include "ppstat/simulate.hpp"

namespace ppstat {

struct EstimatorConfig {
  /// Side length of the anchor lattice L (grid_resolution^2 anchors).
  int grid_resolution = 64;
  RadiiGrid radii;
  /// Uses the intensity-model infimum over the window unless set.
  std::optional<double> lambda_bar_override;
};

struct EstimateRow {
  double t = 0.0;
  std::optional<double> empty_space;        // average grid-anchored product
  std::optional<double> nearest_neighbour;  // average data-anchored product
  std::optional<double> j;                  // nearest_neighbour / empty_space
  std::optional<double> k;                  // minus-sampling second-moment value
  int n_grid_used = 0;
  int n_points_used = 0;
};

struct EstimateTable {
  std::vector<EstimateRow> rows;
};

namespace detail {

/// Shared state of the four estimators over one pattern.
///
/// Summation discipline (fixed so results are reproducible bit for bit and
/// can be checked against a plain double loop): per-anchor products multiply
/// factors in point-list order, anchor contributions add in anchor order,
/// and the second-moment sum adds pair weights in lexicographic (anchor,
/// point) order. Ball membership compares squared distance against t * t.
struct EstimatorContext {
  const PointPattern& pattern;
  const IntensityModel& model;
  double lambda_bar = 0.0;
  std::vector<Point> grid;
  std::vector<double> factor;      // 1 - lambda_bar / lambda(x_i)
  std::vector<double> inv_lambda;  // 1 / lambda(x_i)
  std::vector<double> grid_d2;     // [anchor][point], row-major
  std::vector<double> point_d2;    // [anchor point][point], row-major

  EstimatorContext(const PointPattern& pattern_, const IntensityModel& model_,
                   const EstimatorConfig& cfg)
      : pattern(pattern_), model(model_) {
    const Window& w = pattern.window();
    lambda_bar = cfg.lambda_bar_override ? *cfg.lambda_bar_override
                                         : model.bounds(w).inf;
    if (!(lambda_bar > 0.0)) throw std::invalid_argument("lambda_bar must be positive");
    const auto& pts = pattern.points();
    factor.reserve(pts.size());
    inv_lambda.reserve(pts.size());
    for (const Point& p : pts) {
      const double lam = model.evaluate(p);
      if (lam < lambda_bar) {
        throw std::invalid_argument(
            "intensity below lambda_bar at a data point; invalid lambda_bar");
      }
      factor.push_back(1.0 - lambda_bar / lam);
      inv_lambda.push_back(1.0 / lam);
    }
    grid = lattice_points(w, cfg.grid_resolution);
    grid_d2.resize(grid.size() * pts.size());
    for (std::size_t a = 0; a < grid.size(); ++a) {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        grid_d2[a * pts.size() + i] = squared_distance(grid[a], pts[i]);
      }
    }
    point_d2.resize(pts.size() * pts.size());
    for (std::size_t a = 0; a < pts.size(); ++a) {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        point_d2[a * pts.size() + i] = squared_distance(pts[a], pts[i]);
      }
    }
  }

  EstimateRow row(double t) const {
    EstimateRow row;
    row.t = t;
    const auto erosion = erode(pattern.window(), t);
    if (!erosion) return row;  // everything undefined at this radius
    const Window& er = *erosion;
    const double t2 = t * t;
    const auto& pts = pattern.points();
    const std::size_t n = pts.size();

    // Grid-anchored empty-space type functional.
    {
      double acc = 0.0;
      long count = 0;
      for (std::size_t a = 0; a < grid.size(); ++a) {
        if (!er.contains(grid[a])) continue;
        double prod = 1.0;
        const double* d2 = grid_d2.data() + a * n;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= t2) prod *= factor[i];
        }
        acc += prod;
        ++count;
      }
      row.n_grid_used = static_cast<int>(count);
      if (count > 0) row.empty_space = acc / static_cast<double>(count);
    }

    // Data-anchored nearest-neighbour type functional.
    {
      double acc = 0.0;
      long count = 0;
      for (std::size_t a = 0; a < n; ++a) {
        if (!er.contains(pts[a])) continue;
        double prod = 1.0;
        const double* d2 = point_d2.data() + a * n;
        for (std::size_t i = 0; i < n; ++i) {
          if (i != a && d2[i] <= t2) prod *= factor[i];
        }
        acc += prod;
        ++count;
      }
      row.n_points_used = static_cast<int>(count);
      if (count > 0) row.nearest_neighbour = acc / static_cast<double>(count);
    }

    if (row.empty_space && row.nearest_neighbour && *row.empty_space != 0.0) {
      row.j = *row.nearest_neighbour / *row.empty_space;
    }

    // Minus-sampling second-moment accumulation over ordered pairs.
    {
      double acc = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        if (!er.contains(pts[a])) continue;
        const double* d2 = point_d2.data() + a * n;
        for (std::size_t i = 0; i < n; ++i) {
          if (i != a && d2[i] <= t2) acc += inv_lambda[a] * inv_lambda[i];
        }
      }
      row.k = acc / er.area();
    }
    return row;
  }
};

}  // namespace detail

/// Average over surviving grid anchors of the product of 1 - lambda_bar /
/// lambda(x) over data points in the closed t-ball. Empty optional when no
/// grid point survives the erosion.
inline std::optional<double> empty_space_functional_hat(const PointPattern& pattern,
                                                        const IntensityModel& model,
                                                        const EstimatorConfig& cfg,
                                                        double t) {
  return detail::EstimatorContext(pattern, model, cfg).row(t).empty_space;
}

/// Same average anchored at the data points themselves, the product running
/// over the other points. Empty optional when no data point survives.
inline std::optional<double> nn_functional_hat(const PointPattern& pattern,
                                               const IntensityModel& model,
                                               const EstimatorConfig& cfg, double t) {
  return detail::EstimatorContext(pattern, model, cfg).row(t).nearest_neighbour;
}

/// Minus-sampling second-moment estimator: ordered pairs with the first
/// point in the eroded window, weighted by 1 / (lambda(x) lambda(y)),
/// divided by the eroded area. Empty optional when the erosion is empty.
inline std::optional<double> k_inhom_hat(const PointPattern& pattern,
                                         const IntensityModel& model,
                                         const EstimatorConfig& cfg, double t) {
  return detail::EstimatorContext(pattern, model, cfg).row(t).k;
}

/// Full table over the configured radii: both functionals, their ratio and
/// the second-moment estimate, with explicit undefined flags.
inline EstimateTable j_inhom_hat(const PointPattern& pattern,
                                 const IntensityModel& model,
                                 const EstimatorConfig& cfg) {
  detail::EstimatorContext ctx(pattern, model, cfg);
  EstimateTable table;
  table.rows.reserve(cfg.radii.size());
  for (double t : cfg.radii.values()) table.rows.push_back(ctx.row(t));
  return table;
}

inline void write_table(const EstimateTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "t,denom,num,j,k,n_grid,n_pts\n";
  const auto cell = [](const std::optional<double>& v) {
    return v ? detail::format_double(*v) : std::string("NA");
  };
  for (const EstimateRow& r : table.rows) {
    out << detail::format_double(r.t) << ',' << cell(r.empty_space) << ','
        << cell(r.nearest_neighbour) << ',' << cell(r.j) << ',' << cell(r.k) << ','
        << r.n_grid_used << ',' << r.n_points_used << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline EstimateTable read_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line) || detail::strip(line) != "t,denom,num,j,k,n_grid,n_pts") {
    throw ParseError(path + ": not an estimate table (bad header)");
  }
  EstimateTable table;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = detail::strip(line);
    if (row.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (start <= row.size()) {
      std::size_t comma = row.find(',', start);
      if (comma == std::string_view::npos) comma = row.size();
      fields.push_back(detail::strip(row.substr(start, comma - start)));
      start = comma + 1;
    }
    if (fields.size() != 7) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 7 fields");
    }
    const std::string ctx = path + ":" + std::to_string(lineno);
    const auto opt = [&](std::string_view f) -> std::optional<double> {
      if (f == "NA") return std::nullopt;
      return detail::parse_double(f, ctx);
    };
    EstimateRow r;
    r.t = detail::parse_double(fields[0], ctx);
    r.empty_space = opt(fields[1]);
    r.nearest_neighbour = opt(fields[2]);
    r.j = opt(fields[3]);
    r.k = opt(fields[4]);
    r.n_grid_used = static_cast<int>(detail::parse_double(fields[5], ctx));
    r.n_points_used = static_cast<int>(detail::parse_double(fields[6], ctx));
    table.rows.push_back(r);
  }
  return table;
}

/// Null model for envelope simulation, bound to its observation window.
class NullModel {
 public:
  static NullModel poisson(IntensityModel intensity, Window w) {
    return NullModel(PoissonKind{std::move(intensity)}, w);
  }
  static NullModel lgcp(GaussianFieldSpec spec, Window w) {
    return NullModel(LgcpKind{std::make_shared<LgcpSampler>(std::move(spec), w)}, w);
  }
  static NullModel thinned_hardcore(HardCoreSpec spec, ThinningSpec thin, Window w) {
    return NullModel(HardcoreKind{spec, std::move(thin)}, w);
  }

  const Window& window() const { return window_; }

  PointPattern simulate(std::uint64_t seed) const {
    if (const auto* p = std::get_if<PoissonKind>(&kind_)) {
      return sim_poisson(p->intensity, window_, seed);
    }
    if (const auto* l = std::get_if<LgcpKind>(&kind_)) {
      return l->sampler->sample(seed);
    }
    const auto& h = std::get<HardcoreKind>(kind_);
    return sim_thinned_hardcore(h.spec, h.thin, window_, seed);
  }

 private:
  struct PoissonKind {
    IntensityModel intensity;
  };
  struct LgcpKind {
    std::shared_ptr<const LgcpSampler> sampler;
  };
  struct HardcoreKind {
    HardCoreSpec spec;
    ThinningSpec thin;
  };
  using Kind = std::variant<PoissonKind, LgcpKind, HardcoreKind>;

  NullModel(Kind kind, Window w) : kind_(std::move(kind)), window_(w) {}

  Kind kind_;
  Window window_;
};

struct EnvelopeBand {
  double lo = 0.0;
  double hi = 0.0;
  double mean = 0.0;
  int n_defined = 0;
};

struct EnvelopeRow {
  double t = 0.0;
  EnvelopeBand empty_space, nearest_neighbour, j, k;
};

struct EnvelopeTable {
  std::vector<EnvelopeRow> rows;
};

/// Pointwise min / max / mean of each statistic over patterns simulated
/// from the null model with the given seeds. Undefined cells are excluded
/// per radius; n_defined reports how many replicates contributed. Results
/// do not depend on the number of worker threads.
inline EnvelopeTable envelope(const NullModel& null_model,
                              const IntensityModel& estimation_intensity,
                              const EstimatorConfig& cfg,
                              std::span<const std::uint64_t> seeds,
                              int n_threads = 1) {
  if (seeds.size() < 2) throw std::invalid_argument("envelope needs >= 2 replicates");
  const std::size_t n_sim = seeds.size();
  std::vector<EstimateTable> tables(n_sim);

  const auto worker_count = static_cast<std::size_t>(std::max(1, n_threads));
  const auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      tables[i] =
          j_inhom_hat(null_model.simulate(seeds[i]), estimation_intensity, cfg);
    }
  };
  if (worker_count <= 1) {
    run_range(0, n_sim);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(worker_count);
    const std::size_t chunk = (n_sim + worker_count - 1) / worker_count;
    for (std::size_t tix = 0; tix < worker_count; ++tix) {
      const std::size_t begin = tix * chunk;
      const std::size_t end = std::min(n_sim, begin + chunk);
      threads.emplace_back([&, tix, begin, end] {
        try {
          run_range(begin, end);
        } catch (...) {
          errors[tix] = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (const auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  EnvelopeTable out;
  out.rows.resize(cfg.radii.size());
  for (std::size_t r = 0; r < cfg.radii.size(); ++r) {
    out.rows[r].t = cfg.radii[r];
    const auto fold = [&](auto member) {
      EnvelopeBand band;
      double sum = 0.0;
      for (std::size_t i = 0; i < n_sim; ++i) {
        const std::optional<double>& cell = tables[i].rows[r].*member;
        if (!cell) continue;
        if (band.n_defined == 0) {
          band.lo = band.hi = *cell;
        } else {
          band.lo = std::min(band.lo, *cell);
          band.hi = std::max(band.hi, *cell);
        }
        sum += *cell;
        ++band.n_defined;
      }
      if (band.n_defined > 0) band.mean = sum / band.n_defined;
      return band;
    };
    out.rows[r].empty_space = fold(&EstimateRow::empty_space);
    out.rows[r].nearest_neighbour = fold(&EstimateRow::nearest_neighbour);
    out.rows[r].j = fold(&EstimateRow::j);
    out.rows[r].k = fold(&EstimateRow::k);
  }
  return out;
}

inline EnvelopeTable envelope(const NullModel& null_model,
                              const IntensityModel& estimation_intensity,
                              const EstimatorConfig& cfg, int n_sim,
                              std::uint64_t seed, int n_threads = 1) {
  if (n_sim < 2) throw std::invalid_argument("envelope needs n_sim >= 2");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n_sim));
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    seeds[i] = substream_seed(seed, i);
  }
  return envelope(null_model, estimation_intensity, cfg, seeds, n_threads);
}

inline void write_envelope(const EnvelopeTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "t,denom_lo,denom_mean,denom_hi,num_lo,num_mean,num_hi,"
         "j_lo,j_mean,j_hi,k_lo,k_mean,k_hi,n_denom,n_num,n_j,n_k\n";
  const auto band = [&](const EnvelopeBand& b) {
    if (b.n_defined == 0) return std::string("NA,NA,NA");
    return detail::format_double(b.lo) + ',' + detail::format_double(b.mean) + ',' +
           detail::format_double(b.hi);
  };
  for (const EnvelopeRow& r : table.rows) {
    out << detail::format_double(r.t) << ',' << band(r.empty_space) << ','
        << band(r.nearest_neighbour) << ',' << band(r.j) << ',' << band(r.k) << ','
        << r.empty_space.n_defined << ',' << r.nearest_neighbour.n_defined << ','
        << r.j.n_defined << ',' << r.k.n_defined << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace ppstat
