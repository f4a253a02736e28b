#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "selabel/conformal.hpp"
#include "selabel/errors.hpp"
#include "selabel/procedures.hpp"

namespace selabel {

enum class LossKind { squared_error, absolute_error, zero_one };

inline const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::squared_error: return "squared_error";
    case LossKind::absolute_error: return "absolute_error";
    case LossKind::zero_one: return "zero_one";
  }
  throw InternalError("unknown LossKind");
}

inline std::optional<LossKind> loss_kind_from_string(std::string_view name) {
  if (name == "squared_error") return LossKind::squared_error;
  if (name == "absolute_error") return LossKind::absolute_error;
  if (name == "zero_one") return LossKind::zero_one;
  return std::nullopt;
}

// Loss plus the tolerance below which a prediction counts as good enough.
// zero_one with epsilon = 0 reduces to the classification setting.
struct LossSpec {
  LossKind kind = LossKind::squared_error;
  double epsilon = 0.0;

  void validate() const {
    require(std::isfinite(epsilon) && epsilon >= 0.0,
            "epsilon must be a nonnegative real");
  }
};

inline double loss(const LossSpec& spec, double y, double y_hat) {
  switch (spec.kind) {
    case LossKind::squared_error: return (y - y_hat) * (y - y_hat);
    case LossKind::absolute_error: return std::abs(y - y_hat);
    case LossKind::zero_one: return y == y_hat ? 0.0 : 1.0;
  }
  throw InternalError("unknown LossKind");
}

// One labeled calibration instance. The uncertainty is supplied externally
// (interval width, negated confidence); nothing here computes one.
struct RegressionCalibrationRecord {
  double truth = 0.0;
  double prediction = 0.0;
  double uncertainty = 0.0;

  void validate() const {
    require(std::isfinite(truth) && std::isfinite(prediction) &&
                std::isfinite(uncertainty),
            "regression calibration record has a non-finite field");
  }
};

// Marks a calibration record as correct when its loss stays within epsilon.
// With (zero_one, epsilon = 0) the resulting set matches the classification
// construction exactly.
inline CalibrationSet build_regression_calibration(
    std::span<const RegressionCalibrationRecord> records, const LossSpec& spec) {
  require(!records.empty(), "regression calibration must not be empty");
  spec.validate();
  CalibrationSet cal;
  cal.scores.reserve(records.size());
  cal.correct.reserve(records.size());
  for (const auto& r : records) {
    r.validate();
    cal.scores.push_back(r.uncertainty);
    cal.correct.push_back(loss(spec, r.truth, r.prediction) <= spec.epsilon);
  }
  return cal;
}

struct RegressionSelection {
  SelectionOutcome outcome;
  LossSpec spec;  // provenance
};

// Loss-tolerance pipeline: threshold calibration losses, build conformal
// p-values from the exceeding subset, then run the step-up selection.
inline RegressionSelection regression_select(
    std::span<const RegressionCalibrationRecord> records,
    std::span<const double> test_uncertainties, const LossSpec& spec,
    double alpha, std::uint64_t seed) {
  const CalibrationSet cal = build_regression_calibration(records, spec);
  const PValueSet pvals = conformal_p_values(cal, test_uncertainties, seed);
  return {conformal_labeling_select(pvals, cal.size(), alpha), spec};
}

}  // namespace selabel
