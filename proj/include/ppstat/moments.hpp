#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "ppstat/geometry.hpp"
#include "ppstat/rng.hpp"

namespace ppstat {

/// A partition of {0, ..., n-1} into disjoint non-empty blocks.
using SetPartition = std::vector<std::vector<int>>;

/// All Bell(n) set partitions in restricted-growth-string order. Blocks are
/// listed by first occurrence, indices ascending within a block.
inline std::vector<SetPartition> enumerate_partitions(int n) {
  if (n < 1 || n > 10) throw std::invalid_argument("partition order must be in 1..10");
  std::vector<SetPartition> out;
  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  const std::function<void(int, int)> recurse = [&](int i, int max_label) {
    if (i == n) {
      SetPartition part(static_cast<std::size_t>(max_label) + 1);
      for (int k = 0; k < n; ++k) part[assign[k]].push_back(k);
      out.push_back(std::move(part));
      return;
    }
    for (int label = 0; label <= max_label + 1; ++label) {
      assign[i] = label;
      recurse(i + 1, std::max(max_label, label));
    }
  };
  assign[0] = 0;
  recurse(1, 0);
  return out;
}

/// Symmetric function of an ordered tuple of points.
using SymmetricFn = std::function<double(std::span<const Point>)>;

namespace detail {

/// Shared storage for the order >= 2 functions of a stack; order 1 is the
/// constant 1 in both normalizations.
struct StackStore {
  std::vector<SymmetricFn> high;  // index 0 holds order 2

  double eval(int order, std::span<const Point> pts) const {
    if (order == 1) return 1.0;
    return high[static_cast<std::size_t>(order) - 2](pts);
  }
};

inline void check_stack_args(int max_order, std::size_t n_high) {
  if (max_order < 1) throw std::invalid_argument("stack max order must be >= 1");
  if (n_high + 1 != static_cast<std::size_t>(max_order)) {
    throw std::invalid_argument("stack needs one function per order 2..max");
  }
}

}  // namespace detail

/// n-point correlation functions xi_n up to a maximum order; xi_1 == 1.
class CorrelationStack {
 public:
  explicit CorrelationStack(int max_order, std::vector<SymmetricFn> xi_high = {})
      : max_order_(max_order),
        store_(std::make_shared<detail::StackStore>(
            detail::StackStore{std::move(xi_high)})) {
    detail::check_stack_args(max_order_, store_->high.size());
  }

  int max_order() const { return max_order_; }

  double xi(int order, std::span<const Point> pts) const {
    if (order < 1 || order > max_order_) {
      throw std::invalid_argument("correlation order out of range");
    }
    if (pts.size() != static_cast<std::size_t>(order)) {
      throw std::invalid_argument("point count must equal the order");
    }
    return store_->eval(order, pts);
  }

  SymmetricFn function(int order) const {
    if (order < 2 || order > max_order_) {
      throw std::invalid_argument("correlation order out of range");
    }
    return store_->high[static_cast<std::size_t>(order) - 2];
  }

 private:
  int max_order_;
  std::shared_ptr<const detail::StackStore> store_;
};

/// Product densities normalized by the intensity product,
/// rho^(n)(x_1..x_n) / (lambda(x_1) ... lambda(x_n)); order 1 is 1.
class NormalizedDensityStack {
 public:
  explicit NormalizedDensityStack(int max_order, std::vector<SymmetricFn> rho_high = {})
      : max_order_(max_order),
        store_(std::make_shared<detail::StackStore>(
            detail::StackStore{std::move(rho_high)})) {
    detail::check_stack_args(max_order_, store_->high.size());
  }

  int max_order() const { return max_order_; }

  double normalized_rho(int order, std::span<const Point> pts) const {
    if (order < 1 || order > max_order_) {
      throw std::invalid_argument("density order out of range");
    }
    if (pts.size() != static_cast<std::size_t>(order)) {
      throw std::invalid_argument("point count must equal the order");
    }
    return store_->eval(order, pts);
  }

  SymmetricFn function(int order) const {
    if (order < 2 || order > max_order_) {
      throw std::invalid_argument("density order out of range");
    }
    return store_->high[static_cast<std::size_t>(order) - 2];
  }

 private:
  int max_order_;
  std::shared_ptr<const detail::StackStore> store_;
};

namespace detail {

inline double partition_product(const SetPartition& partition,
                                std::span<const Point> pts,
                                const std::vector<SymmetricFn>& xi_high) {
  double prod = 1.0;
  std::vector<Point> block_pts;
  for (const auto& block : partition) {
    if (block.size() == 1) continue;  // xi_1 == 1
    block_pts.clear();
    for (int idx : block) block_pts.push_back(pts[static_cast<std::size_t>(idx)]);
    prod *= xi_high[block.size() - 2](block_pts);
  }
  return prod;
}

}  // namespace detail

/// Solves the partition recursion order by order: xi_n is the normalized
/// density minus the sum over all multi-block partitions of products of
/// lower-order correlations.
inline CorrelationStack xi_from_rho(const NormalizedDensityStack& stack) {
  const int n_max = stack.max_order();
  auto xi_store = std::make_shared<std::vector<SymmetricFn>>();
  std::vector<SymmetricFn> xi_high;
  for (int n = 2; n <= n_max; ++n) {
    std::vector<SetPartition> multi;
    for (auto& part : enumerate_partitions(n)) {
      if (part.size() >= 2) multi.push_back(std::move(part));
    }
    SymmetricFn rho_n = stack.function(n);
    SymmetricFn xi_n = [rho_n, multi = std::move(multi),
                        xi_store](std::span<const Point> pts) {
      double value = rho_n(pts);
      for (const auto& partition : multi) {
        value -= detail::partition_product(partition, pts, *xi_store);
      }
      return value;
    };
    xi_store->push_back(xi_n);
    xi_high.push_back(std::move(xi_n));
  }
  return CorrelationStack(n_max, std::move(xi_high));
}

/// Forward direction of the same recursion: the normalized density is the
/// sum over all partitions of products of correlations.
inline NormalizedDensityStack rho_from_xi(const CorrelationStack& stack) {
  const int n_max = stack.max_order();
  auto xi_store = std::make_shared<std::vector<SymmetricFn>>();
  for (int n = 2; n <= n_max; ++n) xi_store->push_back(stack.function(n));
  std::vector<SymmetricFn> rho_high;
  for (int n = 2; n <= n_max; ++n) {
    auto partitions = enumerate_partitions(n);
    rho_high.push_back([partitions = std::move(partitions),
                        xi_store](std::span<const Point> pts) {
      double value = 0.0;
      for (const auto& partition : partitions) {
        value += detail::partition_product(partition, pts, *xi_store);
      }
      return value;
    });
  }
  return NormalizedDensityStack(n_max, std::move(rho_high));
}

struct QuadratureSpec {
  long mc_samples = 100000;
  std::uint64_t seed = 0;
  bool gauss_for_first_order = true;
  int gauss_radial = 48;
  int gauss_angular = 96;
};

struct IntegralEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

namespace detail {

/// Gauss-Legendre nodes and weights on [0, 1] by Newton iteration.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_01(int n) {
  std::vector<double> nodes(static_cast<std::size_t>(n));
  std::vector<double> weights(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 + x);
    weights[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return {nodes, weights};
}

}  // namespace detail

/// J_n(t): the n-fold integral of xi_{n+1}(0, x_1, ..., x_n) over the closed
/// ball of radius t. Product Gauss rule in polar coordinates for n = 1,
/// Monte Carlo with a standard-error report otherwise.
inline IntegralEstimate j_n_integral(const CorrelationStack& stack, int n, double t,
                                     const QuadratureSpec& quad = {}) {
  if (n < 1) throw std::invalid_argument("integral order must be >= 1");
  if (n + 1 > stack.max_order()) {
    throw std::invalid_argument("correlation order n+1 unavailable in the stack");
  }
  if (!(t >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  if (t == 0.0) return IntegralEstimate{0.0, 0.0};

  std::vector<Point> args(static_cast<std::size_t>(n) + 1, Point{0.0, 0.0});
  if (n == 1 && quad.gauss_for_first_order) {
    const auto [nodes, weights] = detail::gauss_legendre_01(quad.gauss_radial);
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double r = t * nodes[i];
      double ring = 0.0;
      for (int j = 0; j < quad.gauss_angular; ++j) {
        const double th = 2.0 * std::numbers::pi * (j + 0.5) / quad.gauss_angular;
        args[1] = Point{r * std::cos(th), r * std::sin(th)};
        ring += stack.xi(2, args);
      }
      sum += weights[i] * r * ring;
    }
    const double value =
        sum * t * (2.0 * std::numbers::pi / quad.gauss_angular);
    return IntegralEstimate{value, 0.0};
  }

  if (quad.mc_samples < 2) throw std::invalid_argument("mc_samples must be >= 2");
  Rng rng(quad.seed);
  const double ball_area = std::numbers::pi * t * t;
  double volume = 1.0;
  for (int k = 0; k < n; ++k) volume *= ball_area;
  double sum = 0.0, sum_sq = 0.0;
  for (long s = 0; s < quad.mc_samples; ++s) {
    for (int k = 1; k <= n; ++k) {
      const double r = t * std::sqrt(rng.uniform());
      const double th = 2.0 * std::numbers::pi * rng.uniform();
      args[static_cast<std::size_t>(k)] = Point{r * std::cos(th), r * std::sin(th)};
    }
    const double v = stack.xi(n + 1, args);
    sum += v;
    sum_sq += v * v;
  }
  const double m = static_cast<double>(quad.mc_samples);
  const double mean = sum / m;
  const double var = std::max(0.0, (sum_sq - m * mean * mean) / (m - 1.0));
  return IntegralEstimate{volume * mean, volume * std::sqrt(var / m)};
}

struct JSeriesResult {
  double value = 1.0;
  /// |lambda_bar^n J_n(t) / n!| for n = 1..truncation order.
  std::vector<double> term_magnitudes;
  /// False when the last term magnitude exceeds the first (no visible decay).
  bool terms_decay = true;
};

/// Truncated alternating series 1 + sum (-lambda_bar)^n J_n(t) / n!.
inline JSeriesResult j_series(const CorrelationStack& stack, double lambda_bar,
                              double t, int truncation_order,
                              const QuadratureSpec& quad = {}) {
  if (!(lambda_bar > 0.0)) throw std::invalid_argument("lambda_bar must be positive");
  if (truncation_order < 1 || truncation_order > stack.max_order() - 1) {
    throw std::invalid_argument("truncation order must be in 1..max_order-1");
  }
  JSeriesResult result;
  double coeff = 1.0;  // (-lambda_bar)^n / n!
  for (int n = 1; n <= truncation_order; ++n) {
    coeff *= -lambda_bar / n;
    QuadratureSpec q = quad;
    q.seed = substream_seed(quad.seed, static_cast<std::uint64_t>(n));
    const IntegralEstimate jn = j_n_integral(stack, n, t, q);
    result.value += coeff * jn.value;
    result.term_magnitudes.push_back(std::abs(coeff * jn.value));
  }
  result.terms_decay = result.term_magnitudes.back() <= result.term_magnitudes.front();
  return result;
}

/// Second-order truncation: 1 - lambda_bar (K_inhom(t) - pi t^2).
inline double j_second_order(double k_inhom_value, double lambda_bar, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("radius must be >= 0");
  return 1.0 - lambda_bar * (k_inhom_value - std::numbers::pi * t * t);
}

}  // namespace ppstat
