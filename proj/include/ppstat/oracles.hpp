#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <variant>
#include <vector>

#include "ppstat/errors.hpp"
#include "ppstat/gaussian_field.hpp"
#include "ppstat/geometry.hpp"
#include "ppstat/intensity.hpp"
#include "ppstat/moments.hpp"
#include "ppstat/rng.hpp"
#include "ppstat/simulate.hpp"

#include <Eigen/Dense>

namespace ppstat {

struct OracleEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo evaluation of the log-Gaussian Cox J-function: the ratio
/// E[e^{Y(0)} exp(-mu_bar S_t)] / (E[e^{Y(0)}] E[exp(-mu_bar S_t)]) with
/// S_t the Riemann midpoint sum of e^Y over the ball of radius t, Y the
/// centered field. One estimate per radius from common field draws;
/// standard errors by the delta method.
///
/// `grid_resolution` fixes the integration lattice: cell side
/// 2 * max radius / grid_resolution.
inline std::vector<OracleEstimate> lgcp_j_oracle(double sigma2,
                                                 const CorrelationModel& correlation,
                                                 double mu_bar, const RadiiGrid& radii,
                                                 int grid_resolution, long n_mc,
                                                 std::uint64_t seed) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (!(mu_bar > 0.0)) throw std::invalid_argument("mu_bar must be positive");
  if (grid_resolution < 2) throw std::invalid_argument("grid resolution must be >= 2");
  if (n_mc < 2) throw std::invalid_argument("n_mc must be >= 2");
  if (!correlation.r) throw std::invalid_argument("correlation function not set");

  const double t_max = radii.max();
  const std::size_t n_radii = radii.size();
  if (t_max == 0.0) {
    return std::vector<OracleEstimate>(n_radii, OracleEstimate{1.0, 0.0});
  }

  // Node 0 is the origin; the rest are midpoint-cell centers covering the
  // largest ball, sorted by distance so each radius is a prefix.
  const double delta = 2.0 * t_max / grid_resolution;
  const double cell_area = delta * delta;
  std::vector<Point> nodes{Point{0.0, 0.0}};
  const int half = grid_resolution / 2 + 1;
  std::vector<std::pair<double, Point>> cells;
  for (int iy = -half; iy < half; ++iy) {
    for (int ix = -half; ix < half; ++ix) {
      const Point c{(ix + 0.5) * delta, (iy + 0.5) * delta};
      const double d = std::sqrt(c.x * c.x + c.y * c.y);
      if (d <= t_max) cells.emplace_back(d, c);
    }
  }
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    return a.first != b.first
               ? a.first < b.first
               : (a.second.x != b.second.x ? a.second.x < b.second.x
                                           : a.second.y < b.second.y);
  });
  for (const auto& [d, c] : cells) nodes.push_back(c);
  // prefix_count[k] = cells within radii[k]
  std::vector<std::size_t> prefix_count(n_radii, 0);
  for (std::size_t k = 0; k < n_radii; ++k) {
    std::size_t cnt = 0;
    while (cnt < cells.size() && cells[cnt].first <= radii[k]) ++cnt;
    prefix_count[k] = cnt;
  }

  const auto n = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd cov(n, n);
  for (double jitter_rel : {1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double c = sigma2 * correlation.r(distance(nodes[static_cast<std::size_t>(i)],
                                                         nodes[static_cast<std::size_t>(j)]));
        cov(i, j) = c;
        cov(j, i) = c;
      }
      cov(i, i) += jitter_rel * sigma2;
    }
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(cov);
    if (llt.info() == Eigen::Success) break;
    if (jitter_rel == 1e-6) {
      throw NumericError("oracle covariance factorization failed");
    }
  }

  // Accumulators per radius for the delta method on f(a, b, c) = c / (a b):
  // a = e^{Y(0)}, b = exp(-mu_bar S_t), c = a b.
  double sum_a = 0.0, sum_aa = 0.0;
  std::vector<double> sum_b(n_radii, 0.0), sum_bb(n_radii, 0.0);
  std::vector<double> sum_c(n_radii, 0.0), sum_cc(n_radii, 0.0);
  std::vector<double> sum_ab(n_radii, 0.0), sum_ac(n_radii, 0.0),
      sum_bc(n_radii, 0.0);

  Rng rng(seed);
  Eigen::VectorXd z(n), y(n);
  for (long s = 0; s < n_mc; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
    y = cov.triangularView<Eigen::Lower>() * z;
    const double a = std::exp(y[0]);
    sum_a += a;
    sum_aa += a * a;
    double integral = 0.0;
    std::size_t cell_idx = 0;
    for (std::size_t k = 0; k < n_radii; ++k) {
      while (cell_idx < prefix_count[k]) {
        integral += std::exp(y[static_cast<Eigen::Index>(cell_idx) + 1]) * cell_area;
        ++cell_idx;
      }
      const double b = std::exp(-mu_bar * integral);
      const double c = a * b;
      sum_b[k] += b;
      sum_bb[k] += b * b;
      sum_c[k] += c;
      sum_cc[k] += c * c;
      sum_ab[k] += a * b;
      sum_ac[k] += a * c;
      sum_bc[k] += b * c;
    }
  }

  const double m = static_cast<double>(n_mc);
  std::vector<OracleEstimate> out(n_radii);
  const double mean_a = sum_a / m;
  const double var_a = std::max(0.0, (sum_aa - m * mean_a * mean_a) / (m - 1.0));
  for (std::size_t k = 0; k < n_radii; ++k) {
    const double mean_b = sum_b[k] / m;
    const double mean_c = sum_c[k] / m;
    const double var_b = std::max(0.0, (sum_bb[k] - m * mean_b * mean_b) / (m - 1.0));
    const double var_c = std::max(0.0, (sum_cc[k] - m * mean_c * mean_c) / (m - 1.0));
    const double cov_ab = (sum_ab[k] - m * mean_a * mean_b) / (m - 1.0);
    const double cov_ac = (sum_ac[k] - m * mean_a * mean_c) / (m - 1.0);
    const double cov_bc = (sum_bc[k] - m * mean_b * mean_c) / (m - 1.0);
    const double f = mean_c / (mean_a * mean_b);
    const double ga = -mean_c / (mean_a * mean_a * mean_b);
    const double gb = -mean_c / (mean_a * mean_b * mean_b);
    const double gc = 1.0 / (mean_a * mean_b);
    const double var_f =
        (ga * ga * var_a + gb * gb * var_b + gc * gc * var_c +
         2.0 * ga * gb * cov_ab + 2.0 * ga * gc * cov_ac + 2.0 * gb * gc * cov_bc) /
        m;
    out[k] = OracleEstimate{f, std::sqrt(std::max(0.0, var_f))};
  }
  return out;
}

/// Point-process model with a known Papangelou conditional intensity,
/// together with how to simulate it.
class ConditionalIntensityModel {
 public:
  static ConditionalIntensityModel poisson() {
    return ConditionalIntensityModel(Poisson{});
  }
  static ConditionalIntensityModel hard_core(HardCoreSpec spec) {
    return ConditionalIntensityModel(HardCore{spec});
  }

  /// lambda(a; X) for a location a not in X.
  double conditional_intensity(Point a, const PointPattern& x,
                               const IntensityModel& intensity) const {
    if (std::holds_alternative<Poisson>(kind_)) return intensity.evaluate(a);
    const HardCoreSpec& spec = std::get<HardCore>(kind_).spec;
    const double r2 = spec.hardcore_distance * spec.hardcore_distance;
    for (const Point& p : x.points()) {
      if (squared_distance(p, a) <= r2) return 0.0;
    }
    return spec.beta;
  }

  PointPattern simulate(const IntensityModel& intensity, const Window& w,
                        std::uint64_t seed) const {
    if (std::holds_alternative<Poisson>(kind_)) return sim_poisson(intensity, w, seed);
    return sim_hardcore(std::get<HardCore>(kind_).spec, w, seed);
  }

 private:
  struct Poisson {};
  struct HardCore {
    HardCoreSpec spec;
  };
  using Kind = std::variant<Poisson, HardCore>;

  explicit ConditionalIntensityModel(Kind kind) : kind_(std::move(kind)) {}

  Kind kind_;
};

struct CiWeightedEstimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  double std_error = 0.0;
  double mean_weight = 0.0;       // estimate of E[W_a]
  double mean_weighted_ci = 0.0;  // estimate of E[(lambda(a;X)/lambda(a)) W_a]
  /// True when E[W_a] is indistinguishable from zero at this n_mc.
  bool degenerate = false;
};

/// The W_a-weighted expectation of lambda(a; X) / lambda(a), where
/// W_a(X) is the product of 1 - lambda_bar / lambda(x) over points of X in
/// the closed ball B(a, t). Ratio of Monte Carlo means over n_mc simulated
/// patterns; standard error by the delta method.
inline CiWeightedEstimate ci_weighted_j_oracle(const ConditionalIntensityModel& process,
                                               const IntensityModel& intensity,
                                               const Window& w, Point a, double t,
                                               long n_mc, std::uint64_t seed) {
  if (!(t >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  if (n_mc < 2) throw std::invalid_argument("n_mc must be >= 2");
  const double lambda_bar = intensity.bounds(w).inf;
  const double lambda_a = intensity.evaluate(a);
  const double t2 = t * t;

  double sum_n = 0.0, sum_nn = 0.0, sum_d = 0.0, sum_dd = 0.0, sum_nd = 0.0;
  for (long s = 0; s < n_mc; ++s) {
    const PointPattern x = process.simulate(intensity, w, substream_seed(seed, s));
    double weight = 1.0;
    for (const Point& p : x.points()) {
      if (squared_distance(p, a) <= t2) {
        weight *= 1.0 - lambda_bar / intensity.evaluate(p);
      }
    }
    const double num = (process.conditional_intensity(a, x, intensity) / lambda_a) * weight;
    sum_n += num;
    sum_nn += num * num;
    sum_d += weight;
    sum_dd += weight * weight;
    sum_nd += num * weight;
  }

  const double m = static_cast<double>(n_mc);
  CiWeightedEstimate est;
  est.mean_weighted_ci = sum_n / m;
  est.mean_weight = sum_d / m;
  const double var_n = std::max(0.0, (sum_nn - m * est.mean_weighted_ci * est.mean_weighted_ci) / (m - 1.0));
  const double var_d = std::max(0.0, (sum_dd - m * est.mean_weight * est.mean_weight) / (m - 1.0));
  const double cov_nd = (sum_nd - m * est.mean_weighted_ci * est.mean_weight) / (m - 1.0);
  if (std::abs(est.mean_weight) <= 3.0 * std::sqrt(var_d / m)) {
    est.degenerate = true;
    return est;
  }
  est.value = est.mean_weighted_ci / est.mean_weight;
  const double gn = 1.0 / est.mean_weight;
  const double gd = -est.mean_weighted_ci / (est.mean_weight * est.mean_weight);
  const double var_f =
      (gn * gn * var_n + gd * gd * var_d + 2.0 * gn * gd * cov_nd) / m;
  est.std_error = std::sqrt(std::max(0.0, var_f));
  return est;
}

}  // namespace ppstat
