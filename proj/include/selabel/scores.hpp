#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selabel/errors.hpp"

namespace selabel {

enum class ScoreKind { msp, energy, doctor_alpha, external };

inline const char* to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::msp: return "msp";
    case ScoreKind::energy: return "energy";
    case ScoreKind::doctor_alpha: return "doctor_alpha";
    case ScoreKind::external: return "external";
  }
  throw InternalError("unknown ScoreKind");
}

inline std::optional<ScoreKind> score_kind_from_string(std::string_view name) {
  if (name == "msp") return ScoreKind::msp;
  if (name == "energy") return ScoreKind::energy;
  if (name == "doctor_alpha") return ScoreKind::doctor_alpha;
  if (name == "external") return ScoreKind::external;
  return std::nullopt;
}

// Scalar uncertainty where larger means the model is less sure.
struct UncertaintyScore {
  double value = 0.0;
  ScoreKind kind = ScoreKind::external;
};

// Per-class probabilities for one instance. Entries must lie in [0,1] and
// sum to 1 within kProbabilitySumTolerance (loose enough for float32 exports).
inline constexpr double kProbabilitySumTolerance = 1e-6;

struct ProbabilityVector {
  std::vector<double> values;

  std::size_t class_count() const { return values.size(); }

  void validate() const {
    require(values.size() >= 2, "probability vector needs at least 2 classes");
    double sum = 0.0;
    for (double p : values) {
      require(std::isfinite(p) && p >= 0.0 && p <= 1.0,
              "probability entry outside [0, 1]: " + std::to_string(p));
      sum += p;
    }
    require(std::abs(sum - 1.0) <= kProbabilitySumTolerance,
            "probabilities sum to " + std::to_string(sum) + ", expected 1");
  }
};

struct LogitVector {
  std::vector<double> values;

  void validate() const {
    require(!values.empty(), "logit vector must not be empty");
    for (double z : values)
      require(std::isfinite(z), "logit entry is not finite");
  }
};

// 1 - max_y p_y. Zero exactly when the vector is one-hot; at most 1 - 1/K.
inline UncertaintyScore msp_score(const ProbabilityVector& p) {
  p.validate();
  const double top = *std::max_element(p.values.begin(), p.values.end());
  return {1.0 - top, ScoreKind::msp};
}

// log sum_y exp(z_y), evaluated with max subtraction so no exp overflows.
inline UncertaintyScore energy_score(const LogitVector& z) {
  z.validate();
  const double top = *std::max_element(z.values.begin(), z.values.end());
  double acc = 0.0;
  for (double v : z.values) acc += std::exp(v - top);
  return {top + std::log(acc), ScoreKind::energy};
}

// 1 - sum_y p_y^2 (Gini orientation: larger = flatter = more uncertain).
// The underlying quadratic-entropy statistic sum p^2 is a confidence measure;
// it is flipped here so all score kinds share the same orientation.
inline UncertaintyScore doctor_alpha_score(const ProbabilityVector& p) {
  p.validate();
  double acc = 0.0;
  for (double v : p.values) acc += v * v;
  return {1.0 - acc, ScoreKind::doctor_alpha};
}

}  // namespace selabel
