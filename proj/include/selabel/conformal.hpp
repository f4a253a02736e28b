#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "selabel/errors.hpp"
#include "selabel/random.hpp"

namespace selabel {

// Labeled calibration data: uncertainty score plus whether the model's
// prediction matched the true label. The mislabeled subset (correct == false)
// is what conformal p-values rank against.
struct CalibrationSet {
  std::vector<double> scores;
  std::vector<bool> correct;

  std::size_t size() const { return scores.size(); }

  std::size_t null_count() const {
    return static_cast<std::size_t>(
        std::count(correct.begin(), correct.end(), false));
  }

  std::vector<double> null_scores() const {
    std::vector<double> out;
    out.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (!correct[i]) out.push_back(scores[i]);
    return out;
  }

  void validate() const {
    require(!scores.empty(), "calibration set must not be empty");
    require(scores.size() == correct.size(),
            "calibration scores and correctness flags differ in length");
    for (double s : scores)
      require(std::isfinite(s), "calibration score is not finite");
  }
};

// Conformal p-values for one test batch plus the tie-break uniforms that
// produced them, so a report can be replayed exactly.
struct PValueSet {
  std::vector<double> p_values;
  std::vector<double> tie_uniforms;  // empty for externally loaded p-values
  std::size_t n0_used = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return p_values.size(); }

  // No mislabeled calibration instances: every p-value is pure noise (p = U)
  // and selections carry no evidence. Callers should surface a warning.
  bool degenerate_null_calibration() const { return n0_used == 0; }

  // Conformal p-values land in (0, 1] by construction; externally loaded
  // sets may carry exact zeros, so validation accepts the closed interval.
  void validate() const {
    require(!p_values.empty(), "p-value set must not be empty");
    require(tie_uniforms.empty() || tie_uniforms.size() == p_values.size(),
            "tie uniforms must be absent or match the p-value count");
    for (double p : p_values)
      require(std::isfinite(p) && p >= 0.0 && p <= 1.0,
              "p-value outside [0, 1]: " + std::to_string(p));
    for (double u : tie_uniforms)
      require(u >= 0.0 && u <= 1.0, "tie uniform outside [0, 1]");
  }
};

namespace detail {

// Rank-based p-value: L calibration nulls strictly below the test score,
// E equal to it, tie broken by u in (0, 1].
inline double p_value_from_counts(std::size_t below, std::size_t equal, double u,
                                  std::size_t n0) {
  return (static_cast<double>(below) + (1.0 + static_cast<double>(equal)) * u) /
         (static_cast<double>(n0) + 1.0);
}

}  // namespace detail

// Randomized conformal p-values comparing each test score against the
// mislabeled calibration scores. Comparisons are exact floating-point; ties
// are handled by the formula itself via an independent Uniform(0,1] draw per
// test instance, keyed by (seed, test index) so the draw for one instance
// does not depend on how many other instances are in the batch.
inline PValueSet conformal_p_values(const CalibrationSet& cal,
                                    std::span<const double> test_scores,
                                    std::uint64_t seed) {
  cal.validate();
  require(!test_scores.empty(), "test batch must not be empty");
  for (double s : test_scores)
    require(std::isfinite(s), "test score is not finite");

  std::vector<double> nulls = cal.null_scores();
  std::sort(nulls.begin(), nulls.end());
  const std::size_t n0 = nulls.size();

  PValueSet out;
  out.n0_used = n0;
  out.seed = seed;
  out.p_values.resize(test_scores.size());
  out.tie_uniforms.resize(test_scores.size());

  for (std::size_t j = 0; j < test_scores.size(); ++j) {
    const double s = test_scores[j];
    const auto lo = std::lower_bound(nulls.begin(), nulls.end(), s);
    const auto hi = std::upper_bound(lo, nulls.end(), s);
    const std::size_t below = static_cast<std::size_t>(lo - nulls.begin());
    const std::size_t equal = static_cast<std::size_t>(hi - lo);
    const double u = indexed_uniform(seed, j);
    out.tie_uniforms[j] = u;
    out.p_values[j] = detail::p_value_from_counts(below, equal, u, n0);
  }
  return out;
}

}  // namespace selabel
