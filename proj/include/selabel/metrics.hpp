#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "selabel/errors.hpp"
#include "selabel/procedures.hpp"

namespace selabel {

// Per-instance correctness of the AI prediction for the test batch
// (true = prediction matches truth; in regression, loss <= epsilon).
struct GroundTruth {
  std::vector<bool> correct;
};

struct EvaluationReport {
  double fdp = 0.0;
  double power = 0.0;
  double ai_labeled_ratio = 0.0;
  std::size_t selected_count = 0;
  std::size_t false_count = 0;
};

// FDP = |R cap H0| / max(|R|, 1), power = |R cap H1| / max(|H1|, 1),
// ratio = |R| / (n + m). The max(., 1) denominators make the empty cases
// evaluate to 0 instead of dividing by zero.
inline EvaluationReport evaluate(const SelectionOutcome& outcome,
                                 const GroundTruth& truth, std::size_t n,
                                 std::size_t m) {
  require(truth.correct.size() == m, "ground truth length must equal m");

  std::size_t false_count = 0;
  std::size_t true_selected = 0;
  for (std::size_t j : outcome.selected) {
    require(j < m, "selected index out of range: " + std::to_string(j));
    if (truth.correct[j])
      ++true_selected;
    else
      ++false_count;
  }
  const std::size_t h1 = static_cast<std::size_t>(
      std::count(truth.correct.begin(), truth.correct.end(), true));

  EvaluationReport report;
  report.selected_count = outcome.selected.size();
  report.false_count = false_count;
  report.fdp = static_cast<double>(false_count) /
               static_cast<double>(std::max<std::size_t>(report.selected_count, 1));
  report.power = static_cast<double>(true_selected) /
                 static_cast<double>(std::max<std::size_t>(h1, 1));
  report.ai_labeled_ratio =
      static_cast<double>(report.selected_count) / static_cast<double>(n + m);
  return report;
}

}  // namespace selabel
