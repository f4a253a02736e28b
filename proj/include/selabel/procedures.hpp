#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selabel/conformal.hpp"
#include "selabel/errors.hpp"

namespace selabel {

enum class ProcedureKind { conformal_labeling, bh, storey_bh, quantile_bh };

inline const char* to_string(ProcedureKind kind) {
  switch (kind) {
    case ProcedureKind::conformal_labeling: return "conformal_labeling";
    case ProcedureKind::bh: return "bh";
    case ProcedureKind::storey_bh: return "storey_bh";
    case ProcedureKind::quantile_bh: return "quantile_bh";
  }
  throw InternalError("unknown ProcedureKind");
}

inline std::optional<ProcedureKind> procedure_kind_from_string(std::string_view name) {
  if (name == "conformal_labeling") return ProcedureKind::conformal_labeling;
  if (name == "bh") return ProcedureKind::bh;
  if (name == "storey_bh") return ProcedureKind::storey_bh;
  if (name == "quantile_bh") return ProcedureKind::quantile_bh;
  return std::nullopt;
}

struct ProcedureConfig {
  double alpha = 0.1;
  ProcedureKind kind = ProcedureKind::conformal_labeling;
  std::optional<double> lambda;     // storey_bh
  std::optional<std::size_t> k0;    // quantile_bh

  void validate(std::size_t m) const {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie strictly inside (0, 1)");
    if (kind == ProcedureKind::storey_bh) {
      require(lambda.has_value(), "storey_bh requires lambda");
      require(*lambda > 0.0 && *lambda < 1.0, "lambda must lie in (0, 1)");
    } else {
      require(!lambda.has_value(), "lambda only applies to storey_bh");
    }
    if (kind == ProcedureKind::quantile_bh) {
      require(k0.has_value(), "quantile_bh requires k0");
      require(*k0 >= 1 && *k0 <= m, "k0 must lie in [1, m]");
    } else {
      require(!k0.has_value(), "k0 only applies to quantile_bh");
    }
  }
};

// Result of a step-up selection. `selected` holds original test indices in
// ascending order; cutoff_index is the step-up rank j* (0 when nothing is
// selected) and realized_threshold the p-value at that rank (0 when empty).
struct SelectionOutcome {
  std::vector<std::size_t> selected;
  std::size_t cutoff_index = 0;
  double realized_threshold = 0.0;
  ProcedureConfig config;
  std::size_t n_used = 0;
  std::size_t n0_used = 0;
  std::optional<double> pi0_estimate;
  bool level_capped = false;  // adaptive level alpha/pi0 hit the 1 - 1e-12 cap
};

namespace detail {

// Step-up rule with per-rank threshold slope * j: find the largest rank whose
// ordered p-value sits below its threshold, then select every p-value at or
// below that order statistic. Sorting is stable with ties broken by original
// index; tie blocks at the cutoff are always fully included because the
// thresholds grow with rank.
inline SelectionOutcome step_up(const PValueSet& pvals, double slope) {
  const std::size_t m = pvals.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pvals.p_values[a] < pvals.p_values[b];
  });

  std::size_t cutoff = 0;
  for (std::size_t j = m; j >= 1; --j) {
    if (pvals.p_values[order[j - 1]] <= slope * static_cast<double>(j)) {
      cutoff = j;
      break;
    }
  }

  SelectionOutcome out;
  out.cutoff_index = cutoff;
  out.realized_threshold = cutoff == 0 ? 0.0 : pvals.p_values[order[cutoff - 1]];
  if (cutoff > 0) {
    for (std::size_t j = 0; j < m; ++j)
      if (pvals.p_values[j] <= out.realized_threshold) out.selected.push_back(j);
  }
  if (out.selected.size() != cutoff)
    throw InternalError("step-up cutoff disagrees with selected count");
  return out;
}

}  // namespace detail

// Step-up selection with per-rank threshold alpha * j * (n+1) / (m * (n0+1)).
// Equivalent to BH at the calibration-adjusted level alpha * (n+1) / (n0+1).
inline SelectionOutcome conformal_labeling_select(const PValueSet& pvals,
                                                  std::size_t n, double alpha) {
  pvals.validate();
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie strictly inside (0, 1)");
  require(n >= pvals.n0_used, "calibration size n smaller than its null count");
  const double m = static_cast<double>(pvals.size());
  const double slope = alpha * (static_cast<double>(n) + 1.0) /
                       (m * (static_cast<double>(pvals.n0_used) + 1.0));
  SelectionOutcome out = detail::step_up(pvals, slope);
  out.config = {alpha, ProcedureKind::conformal_labeling, std::nullopt, std::nullopt};
  out.n_used = n;
  out.n0_used = pvals.n0_used;
  return out;
}

// Plain Benjamini-Hochberg: per-rank threshold alpha * j / m.
inline SelectionOutcome bh_select(const PValueSet& pvals, double alpha) {
  pvals.validate();
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie strictly inside (0, 1)");
  SelectionOutcome out =
      detail::step_up(pvals, alpha / static_cast<double>(pvals.size()));
  out.config = {alpha, ProcedureKind::bh, std::nullopt, std::nullopt};
  out.n0_used = pvals.n0_used;
  return out;
}

namespace detail {

inline double clip_pi0(double raw, std::size_t m) {
  return std::clamp(raw, 1.0 / static_cast<double>(m), 1.0);
}

// Estimators on a pre-sorted view, shared with the bootstrap tuning loop.
inline double storey_pi0_sorted(std::span<const double> sorted, double lambda) {
  const std::size_t m = sorted.size();
  const auto tail = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), lambda);
  const double raw = (1.0 + static_cast<double>(tail)) /
                     (static_cast<double>(m) * (1.0 - lambda));
  return clip_pi0(raw, m);
}

inline double quantile_pi0_sorted(std::span<const double> sorted, std::size_t k0) {
  const std::size_t m = sorted.size();
  const double pk = sorted[k0 - 1];
  if (pk >= 1.0)
    throw ValidationError("degenerate quantile estimator: p_(k0) equals 1");
  const double raw = (static_cast<double>(m) - static_cast<double>(k0) + 1.0) /
                     (static_cast<double>(m) * (1.0 - pk));
  return clip_pi0(raw, m);
}

}  // namespace detail

// Storey null-proportion estimate (1 + #{p_i >= lambda}) / (m (1 - lambda)),
// clipped into [1/m, 1]. Values above 1 would only make adaptive BH more
// conservative than plain BH.
inline double storey_pi0(const PValueSet& pvals, double lambda) {
  pvals.validate();
  require(lambda > 0.0 && lambda < 1.0, "lambda must lie in (0, 1)");
  std::vector<double> sorted = pvals.p_values;
  std::sort(sorted.begin(), sorted.end());
  return detail::storey_pi0_sorted(sorted, lambda);
}

// Quantile null-proportion estimate (m - k0 + 1) / (m (1 - p_(k0))), clipped
// into [1/m, 1]. Degenerate when the k0-th order statistic equals 1.
inline double quantile_pi0(const PValueSet& pvals, std::size_t k0) {
  pvals.validate();
  require(k0 >= 1 && k0 <= pvals.size(), "k0 must lie in [1, m]");
  std::vector<double> sorted = pvals.p_values;
  std::sort(sorted.begin(), sorted.end());
  return detail::quantile_pi0_sorted(sorted, k0);
}

// BH at the raised level alpha / pi0. A level at or above 1 is capped just
// below it (with a flag in the outcome) so batch runs survive degenerate
// estimates.
inline SelectionOutcome adaptive_bh_select(const PValueSet& pvals, double alpha,
                                           double pi0) {
  require(pi0 > 0.0 && pi0 <= 1.0, "pi0 must lie in (0, 1]");
  double level = alpha / pi0;
  bool capped = false;
  if (level >= 1.0) {
    level = 1.0 - 1e-12;
    capped = true;
  }
  SelectionOutcome out = bh_select(pvals, level);
  out.config.alpha = alpha;
  out.pi0_estimate = pi0;
  out.level_capped = capped;
  return out;
}

// Runs the configured procedure. `n` is the calibration size (used by
// conformal_labeling only, but recorded in every outcome).
inline SelectionOutcome run_procedure(const PValueSet& pvals, std::size_t n,
                                      const ProcedureConfig& cfg) {
  cfg.validate(pvals.size());
  SelectionOutcome out;
  switch (cfg.kind) {
    case ProcedureKind::conformal_labeling:
      out = conformal_labeling_select(pvals, n, cfg.alpha);
      break;
    case ProcedureKind::bh:
      out = bh_select(pvals, cfg.alpha);
      break;
    case ProcedureKind::storey_bh:
      out = adaptive_bh_select(pvals, cfg.alpha, storey_pi0(pvals, *cfg.lambda));
      break;
    case ProcedureKind::quantile_bh:
      out = adaptive_bh_select(pvals, cfg.alpha, quantile_pi0(pvals, *cfg.k0));
      break;
  }
  out.config = cfg;
  out.n_used = n;
  out.n0_used = pvals.n0_used;
  return out;
}

}  // namespace selabel
