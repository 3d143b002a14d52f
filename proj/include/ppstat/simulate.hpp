#pragma once

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "ppstat/errors.hpp"
#include "ppstat/gaussian_field.hpp"
#include "ppstat/geometry.hpp"
#include "ppstat/intensity.hpp"
#include "ppstat/pattern.hpp"
#include "ppstat/rng.hpp"

namespace ppstat {

struct SeedSpec {
  std::uint64_t seed = 0;
};

/// Birth rate and hard-core distance of the Gibbs model, and the number of
/// Metropolis-Hastings proposals of the single chain.
struct HardCoreSpec {
  double beta = 0.0;
  double hardcore_distance = 0.0;
  long sweeps = 100000;
};

/// Inhomogeneous Poisson process by rejection from the intensity supremum.
inline PointPattern sim_poisson(const IntensityModel& model, const Window& w,
                                Rng& rng) {
  const Bounds b = model.bounds(w);
  const long n_candidates = rng.poisson(b.sup * w.area());
  std::vector<Point> pts;
  for (long i = 0; i < n_candidates; ++i) {
    const Point p{rng.uniform(w.xmin(), w.xmax()), rng.uniform(w.ymin(), w.ymax())};
    const double u = rng.uniform();
    if (u * b.sup < model.evaluate(p)) pts.push_back(p);
  }
  return PointPattern(w, std::move(pts));
}

inline PointPattern sim_poisson(const IntensityModel& model, const Window& w,
                                std::uint64_t seed) {
  Rng rng(seed);
  return sim_poisson(model, w, rng);
}

/// Log-Gaussian Cox sampler: draws the driving field once per sample,
/// exponentiates it onto a raster intensity, then runs Poisson rejection
/// with the same stream. The covariance factorization is shared.
class LgcpSampler {
 public:
  LgcpSampler(GaussianFieldSpec spec, const Window& w)
      : field_(std::make_shared<GaussianFieldSampler>(std::move(spec), w)) {}

  /// The realized random intensity exp(Z) for this seed.
  IntensityModel intensity_realization(Rng& rng) const {
    const FieldRaster field = field_->sample(rng);
    std::vector<double> cells;
    cells.reserve(field.values.size());
    for (double z : field.values) {
      const double v = std::exp(z);
      if (!std::isfinite(v)) throw NumericError("exp(field) overflowed");
      cells.push_back(v);
    }
    return IntensityModel::raster(field_->window(), field.nx, field.ny,
                                  std::move(cells));
  }

  PointPattern sample(Rng& rng) const {
    const IntensityModel realized = intensity_realization(rng);
    return sim_poisson(realized, field_->window(), rng);
  }

  PointPattern sample(std::uint64_t seed) const {
    Rng rng(seed);
    return sample(rng);
  }

  const GaussianFieldSampler& field_sampler() const { return *field_; }

 private:
  std::shared_ptr<const GaussianFieldSampler> field_;
};

inline PointPattern sim_lgcp(const GaussianFieldSpec& spec, const Window& w,
                             std::uint64_t seed) {
  return LgcpSampler(spec, w).sample(seed);
}

/// Hard-core Gibbs process by birth-death Metropolis-Hastings, started from
/// the empty configuration. Every accepted state respects the hard core, so
/// the returned pattern always does.
inline PointPattern sim_hardcore(const HardCoreSpec& spec, const Window& w,
                                 Rng& rng) {
  if (!(spec.beta > 0.0)) throw std::invalid_argument("birth rate must be positive");
  if (!(spec.hardcore_distance > 0.0)) {
    throw std::invalid_argument("hard-core distance must be positive");
  }
  if (spec.sweeps < 0) throw std::invalid_argument("sweeps must be >= 0");
  const double area = w.area();
  if (spec.beta * area > 1e6) {
    throw std::invalid_argument("beta * area exceeds the 1e6 guard");
  }
  const double r2 = spec.hardcore_distance * spec.hardcore_distance;
  std::vector<Point> state;
  for (long s = 0; s < spec.sweeps; ++s) {
    if (rng.uniform() < 0.5) {
      const Point cand{rng.uniform(w.xmin(), w.xmax()),
                       rng.uniform(w.ymin(), w.ymax())};
      bool open = true;
      for (const Point& p : state) {
        if (squared_distance(p, cand) <= r2) {
          open = false;
          break;
        }
      }
      if (!open) continue;
      const double accept = spec.beta * area / static_cast<double>(state.size() + 1);
      if (rng.uniform() < accept) state.push_back(cand);
    } else {
      if (state.empty()) continue;
      const auto idx = std::min(static_cast<std::size_t>(rng.uniform() * state.size()),
                                state.size() - 1);
      const double accept = static_cast<double>(state.size()) / (spec.beta * area);
      if (rng.uniform() < accept) {
        state[idx] = state.back();
        state.pop_back();
      }
    }
  }
  return PointPattern(w, std::move(state));
}

inline PointPattern sim_hardcore(const HardCoreSpec& spec, const Window& w,
                                 std::uint64_t seed) {
  Rng rng(seed);
  return sim_hardcore(spec, w, rng);
}

/// Hard-core pattern followed by independent location-dependent thinning.
inline PointPattern sim_thinned_hardcore(const HardCoreSpec& spec,
                                         const ThinningSpec& thin, const Window& w,
                                         std::uint64_t seed) {
  const PointPattern base = sim_hardcore(spec, w, substream_seed(seed, 0));
  return thin_pattern(base, thin, substream_seed(seed, 1));
}

}  // namespace ppstat
