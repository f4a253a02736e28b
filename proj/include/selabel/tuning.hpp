#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "selabel/errors.hpp"
#include "selabel/procedures.hpp"
#include "selabel/random.hpp"

namespace selabel {

enum class TuneKind { storey, quantile };

inline const char* to_string(TuneKind kind) {
  return kind == TuneKind::storey ? "storey" : "quantile";
}

struct TuningConfig {
  std::vector<double> grid;             // lambda values, or k0 ranks for quantile
  std::size_t bootstrap_replicates = 200;
  double gamma = 0.1;                   // pFDR evaluation point; use the target alpha
  std::uint64_t seed = 0;

  void validate() const {
    require(!grid.empty(), "hyperparameter grid must not be empty");
    require(bootstrap_replicates >= 1, "need at least one bootstrap replicate");
    require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  }
};

inline std::vector<double> default_storey_grid() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

// Decile ranks ceil(0.1 m) .. ceil(0.9 m), deduplicated for small m.
inline std::vector<double> default_quantile_grid(std::size_t m) {
  std::vector<double> grid;
  for (int d = 1; d <= 9; ++d) {
    const auto rank = static_cast<std::size_t>(
        std::ceil(0.1 * static_cast<double>(d) * static_cast<double>(m)));
    const double v = static_cast<double>(std::max<std::size_t>(rank, 1));
    if (grid.empty() || grid.back() != v) grid.push_back(v);
  }
  return grid;
}

namespace detail {

inline double pfdr_from_sorted(std::span<const double> sorted, double pi0,
                               double gamma) {
  const double m = static_cast<double>(sorted.size());
  const auto hits = std::upper_bound(sorted.begin(), sorted.end(), gamma) -
                    sorted.begin();
  const double frac = std::max(static_cast<double>(hits) / m, 1.0 / m);
  return pi0 * gamma / (frac * (1.0 - std::pow(1.0 - gamma, m)));
}

// pi0 for one grid value on a sorted sample. Inside the bootstrap a replicate
// can hit p_(k0) == 1, where the clipped quantile estimator tends to 1; use
// that limit instead of erroring out mid-resample.
inline double grid_pi0(std::span<const double> sorted, TuneKind kind, double g) {
  if (kind == TuneKind::storey) return storey_pi0_sorted(sorted, g);
  const auto k0 = static_cast<std::size_t>(g);
  if (sorted[k0 - 1] >= 1.0) return 1.0;
  return quantile_pi0_sorted(sorted, k0);
}

}  // namespace detail

// Positive-FDR estimate pi0 * gamma / (P(p <= gamma) * (1 - (1-gamma)^m)),
// with the empirical tail probability floored at 1/m.
inline double pfdr_estimate(const PValueSet& pvals, double pi0, double gamma) {
  pvals.validate();
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(pi0 > 0.0 && pi0 <= 1.0, "pi0 must lie in (0, 1]");
  std::vector<double> sorted = pvals.p_values;
  std::sort(sorted.begin(), sorted.end());
  return detail::pfdr_from_sorted(sorted, pi0, gamma);
}

// Bootstrap hyperparameter choice: for each grid value, estimate the MSE of
// its pFDR estimate over B resamples around the plug-in minimum on the
// original sample, and return the grid value minimizing it. Ties break toward
// the smaller value. Deterministic given (pvals, kind, cfg).
inline double select_hyperparameter(const PValueSet& pvals, TuneKind kind,
                                    const TuningConfig& cfg) {
  pvals.validate();
  cfg.validate();
  const std::size_t m = pvals.size();

  std::vector<double> grid = cfg.grid;
  std::sort(grid.begin(), grid.end());
  for (double g : grid) {
    if (kind == TuneKind::storey) {
      require(g > 0.0 && g < 1.0, "storey grid values must lie in (0, 1)");
    } else {
      require(g >= 1.0 && g <= static_cast<double>(m) && g == std::floor(g),
              "quantile grid values must be integer ranks in [1, m]");
    }
  }
  if (grid.size() == 1) return grid.front();

  std::vector<double> sorted = pvals.p_values;
  std::sort(sorted.begin(), sorted.end());

  double plug_min = detail::pfdr_from_sorted(
      sorted, detail::grid_pi0(sorted, kind, grid.front()), cfg.gamma);
  for (std::size_t gi = 1; gi < grid.size(); ++gi) {
    plug_min = std::min(plug_min,
                        detail::pfdr_from_sorted(
                            sorted, detail::grid_pi0(sorted, kind, grid[gi]),
                            cfg.gamma));
  }

  std::vector<double> sq_err(grid.size(), 0.0);
  std::vector<double> replicate(m);
  for (std::size_t b = 0; b < cfg.bootstrap_replicates; ++b) {
    RandomStream rs = RandomStream::derive(cfg.seed, {stream_tag::kBootstrap, b});
    for (std::size_t i = 0; i < m; ++i)
      replicate[i] = pvals.p_values[rs.next_below(m)];
    std::sort(replicate.begin(), replicate.end());
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      const double est = detail::pfdr_from_sorted(
          replicate, detail::grid_pi0(replicate, kind, grid[gi]), cfg.gamma);
      const double dev = est - plug_min;
      sq_err[gi] += dev * dev;
    }
  }

  std::size_t best = 0;
  for (std::size_t gi = 1; gi < grid.size(); ++gi)
    if (sq_err[gi] < sq_err[best]) best = gi;
  return grid[best];
}

}  // namespace selabel
