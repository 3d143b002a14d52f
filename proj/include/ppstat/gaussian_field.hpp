#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "ppstat/errors.hpp"
#include "ppstat/geometry.hpp"
#include "ppstat/rng.hpp"

namespace ppstat {

/// Stationary correlation r(h) with r(0) = 1, non-increasing in h.
struct CorrelationModel {
  std::function<double(double)> r;
};

inline CorrelationModel exponential_correlation(double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("correlation scale must be > 0");
  return CorrelationModel{[scale](double h) { return std::exp(-h / scale); }};
}

/// Mean function, variance and stationary correlation of the driving field,
/// plus the simulation lattice resolution (cells per side).
struct GaussianFieldSpec {
  std::function<double(Point)> mean;
  double variance = 1.0;
  CorrelationModel correlation;
  int grid_resolution = 128;
};

/// One field realization on a cell-centered lattice; bilinear in between.
struct FieldRaster {
  Window window;
  int nx = 0;
  int ny = 0;
  std::vector<double> values;  // row-major, row 0 at the smallest y

  double at(int ix, int iy) const {
    return values[static_cast<std::size_t>(iy) * nx + ix];
  }
};

/// Samples the field by dense Cholesky factorization of the lattice-node
/// covariance. Construction does the O(n^3) work once; each sample is a
/// triangular matrix-vector product, so one sampler serves many seeds.
class GaussianFieldSampler {
 public:
  GaussianFieldSampler(GaussianFieldSpec spec, const Window& w)
      : spec_(std::move(spec)), window_(w) {
    if (!(spec_.variance > 0.0)) {
      throw std::invalid_argument("field variance must be positive");
    }
    if (spec_.grid_resolution < 1) {
      throw std::invalid_argument("field grid resolution must be >= 1");
    }
    if (!spec_.correlation.r) {
      throw std::invalid_argument("field correlation function not set");
    }
    nodes_ = lattice_points(window_, spec_.grid_resolution);
    const auto n = static_cast<Eigen::Index>(nodes_.size());
    means_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      means_[i] = spec_.mean ? spec_.mean(nodes_[i]) : 0.0;
      if (!std::isfinite(means_[i])) {
        throw NumericError("field mean not finite at a lattice node");
      }
    }

    // Covariance sigma^2 r(|p_i - p_j|); a small diagonal jitter keeps the
    // factorization alive on near-singular fine grids, escalating x10 until
    // 1e-6 sigma^2 before giving up.
    factor_.resize(n, n);
    for (double jitter_rel : {1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
      jitter_ = jitter_rel * spec_.variance;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
          const double h = distance(nodes_[i], nodes_[j]);
          const double c = spec_.variance * spec_.correlation.r(h);
          factor_(i, j) = c;
          factor_(j, i) = c;
        }
        factor_(i, i) += jitter_;
      }
      Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(factor_);
      if (llt.info() == Eigen::Success) {
        factor_.triangularView<Eigen::StrictlyUpper>().setZero();
        return;
      }
    }
    throw NumericError("field covariance factorization failed after jitter escalation");
  }

  const Window& window() const { return window_; }
  int grid_resolution() const { return spec_.grid_resolution; }
  double jitter() const { return jitter_; }
  const std::vector<Point>& nodes() const { return nodes_; }

  FieldRaster sample(Rng& rng) const {
    const auto n = static_cast<Eigen::Index>(nodes_.size());
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
    Eigen::VectorXd y = factor_.triangularView<Eigen::Lower>() * z;
    FieldRaster raster{window_, spec_.grid_resolution, spec_.grid_resolution, {}};
    raster.values.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) raster.values[i] = means_[i] + y[i];
    return raster;
  }

  FieldRaster sample(std::uint64_t seed) const {
    Rng rng(seed);
    return sample(rng);
  }

 private:
  GaussianFieldSpec spec_;
  Window window_;
  std::vector<Point> nodes_;
  std::vector<double> means_;
  Eigen::MatrixXd factor_;
  double jitter_ = 0.0;
};

inline FieldRaster sim_gaussian_field(const GaussianFieldSpec& spec, const Window& w,
                                      std::uint64_t seed) {
  return GaussianFieldSampler(spec, w).sample(seed);
}

}  // namespace ppstat
