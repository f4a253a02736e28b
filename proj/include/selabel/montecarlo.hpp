#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "selabel/conformal.hpp"
#include "selabel/errors.hpp"
#include "selabel/metrics.hpp"
#include "selabel/procedures.hpp"
#include "selabel/random.hpp"
#include "selabel/tuning.hpp"

namespace selabel {

inline constexpr std::uint64_t kDefaultSeed = 1729;

struct BetaDistribution {
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const {
    require(std::isfinite(alpha) && alpha > 0.0 && std::isfinite(beta) && beta > 0.0,
            "beta distribution parameters must be positive");
  }

  double sample(RandomStream& rs) const { return rs.next_beta(alpha, beta); }
};

// One procedure to run in the simulation. When `tune` is set (storey/quantile
// only) the hyperparameter is re-chosen per trial by the bootstrap method at
// gamma = the cell's alpha.
struct SimProcedure {
  ProcedureKind kind = ProcedureKind::conformal_labeling;
  std::optional<double> lambda;
  std::optional<std::size_t> k0;
  bool tune = false;

  std::string label() const {
    std::string s = to_string(kind);
    if (tune) return s + "[tuned]";
    if (lambda) return s + "[lambda=" + std::to_string(*lambda) + "]";
    if (k0) return s + "[k0=" + std::to_string(*k0) + "]";
    return s;
  }

  void validate() const {
    switch (kind) {
      case ProcedureKind::conformal_labeling:
      case ProcedureKind::bh:
        require(!tune && !lambda && !k0,
                std::string(to_string(kind)) + " takes no hyperparameters");
        break;
      case ProcedureKind::storey_bh:
        require(tune != lambda.has_value(),
                "storey_bh needs exactly one of lambda or tune=true");
        require(!k0, "storey_bh does not take k0");
        break;
      case ProcedureKind::quantile_bh:
        require(tune != k0.has_value(),
                "quantile_bh needs exactly one of k0 or tune=true");
        require(!lambda, "quantile_bh does not take lambda");
        break;
    }
  }
};

struct SimulationConfig {
  std::size_t calibration_size = 500;  // n
  std::size_t test_size = 500;         // m
  double p_null = 0.3;                 // misprediction probability
  BetaDistribution correct_dist{2.0, 8.0};
  BetaDistribution incorrect_dist{8.0, 2.0};
  std::size_t trials = 1000;
  std::vector<double> alpha_grid{0.05, 0.1, 0.2};
  std::vector<SimProcedure> procedures{{}};
  std::uint64_t seed = kDefaultSeed;
  std::size_t bootstrap_replicates = 200;

  // p_null = 0 and 1 are degenerate but legal; they exercise the all-correct
  // and all-null boundaries.
  void validate() const {
    require(calibration_size >= 1 && test_size >= 1 && trials >= 1,
            "n, m and trials must all be at least 1");
    require(std::isfinite(p_null) && p_null >= 0.0 && p_null <= 1.0,
            "p_null must lie in [0, 1]");
    correct_dist.validate();
    incorrect_dist.validate();
    require(!alpha_grid.empty(), "alpha grid must not be empty");
    for (double a : alpha_grid)
      require(a > 0.0 && a < 1.0, "alpha must lie strictly inside (0, 1)");
    require(!procedures.empty(), "at least one procedure is required");
    for (const auto& p : procedures) p.validate();
    require(bootstrap_replicates >= 1, "need at least one bootstrap replicate");
  }
};

// Closed-form FDR ceiling [1 - (1 - p)^(n+1)] * alpha; never exceeds alpha.
inline double theorem_bound(double p, std::size_t n, double alpha) {
  require(std::isfinite(p) && p >= 0.0 && p <= 1.0, "p must lie in [0, 1]");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie strictly inside (0, 1)");
  return (1.0 - std::pow(1.0 - p, static_cast<double>(n) + 1.0)) * alpha;
}

struct TrialData {
  CalibrationSet calibration;
  std::vector<double> test_scores;
  GroundTruth truth;
};

// Draws one i.i.d. trial: each of the n + m instances is independently
// incorrect with probability p_null, and its score comes from the matching
// Beta distribution. Every instance has its own sub-stream keyed by
// (seed, trial, instance), so the data is identical however trials are
// scheduled across threads.
inline TrialData generate_trial(const SimulationConfig& cfg, std::size_t trial_index) {
  cfg.validate();
  const std::size_t n = cfg.calibration_size;
  const std::size_t m = cfg.test_size;

  TrialData data;
  data.calibration.scores.reserve(n);
  data.calibration.correct.reserve(n);
  data.test_scores.reserve(m);
  data.truth.correct.reserve(m);

  for (std::size_t i = 0; i < n + m; ++i) {
    RandomStream rs = RandomStream::derive(cfg.seed, {stream_tag::kTrial, trial_index, i});
    const bool incorrect = rs.next_unit() <= cfg.p_null;
    const double score =
        incorrect ? cfg.incorrect_dist.sample(rs) : cfg.correct_dist.sample(rs);
    if (i < n) {
      data.calibration.scores.push_back(score);
      data.calibration.correct.push_back(!incorrect);
    } else {
      data.test_scores.push_back(score);
      data.truth.correct.push_back(!incorrect);
    }
  }
  return data;
}

// Per-trial and aggregate statistics for one (procedure, alpha) cell.
// Standard errors are sample SD / sqrt(T); 0 when T == 1.
struct TrialReport {
  std::string procedure;
  double alpha = 0.0;
  std::vector<double> fdp;
  std::vector<double> power;
  std::vector<double> ratio;
  double mean_fdp = 0.0, se_fdp = 0.0;
  double mean_power = 0.0, se_power = 0.0;
  double mean_ratio = 0.0, se_ratio = 0.0;
  double theorem_bound = 0.0;
};

struct SimulationReport {
  SimulationConfig config;
  std::vector<TrialReport> cells;  // procedure-major, alpha-minor
};

namespace detail {

inline void mean_and_se(const std::vector<double>& xs, double& mean, double& se) {
  const double t = static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) acc += x;
  mean = acc / t;
  if (xs.size() < 2) {
    se = 0.0;
    return;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / (t - 1.0)) / std::sqrt(t);
}

}  // namespace detail

// Runs T independent trials and evaluates every configured procedure at every
// alpha. Trials fan out over `threads` workers (0 = hardware concurrency);
// each trial writes only its own slots, and the reduction is sequential, so
// the report is bit-identical for any thread count.
inline SimulationReport run_simulation(const SimulationConfig& cfg,
                                       unsigned threads = 0) {
  cfg.validate();
  const std::size_t n_proc = cfg.procedures.size();
  const std::size_t n_alpha = cfg.alpha_grid.size();
  const std::size_t n_cells = n_proc * n_alpha;

  SimulationReport report;
  report.config = cfg;
  report.cells.resize(n_cells);
  for (std::size_t pi = 0; pi < n_proc; ++pi) {
    for (std::size_t ai = 0; ai < n_alpha; ++ai) {
      TrialReport& cell = report.cells[pi * n_alpha + ai];
      cell.procedure = cfg.procedures[pi].label();
      cell.alpha = cfg.alpha_grid[ai];
      cell.theorem_bound =
          theorem_bound(cfg.p_null, cfg.calibration_size, cfg.alpha_grid[ai]);
      cell.fdp.resize(cfg.trials);
      cell.power.resize(cfg.trials);
      cell.ratio.resize(cfg.trials);
    }
  }

  const auto run_trial = [&](std::size_t t) {
    const TrialData data = generate_trial(cfg, t);
    const PValueSet pvals = conformal_p_values(
        data.calibration, data.test_scores,
        RandomStream::derive(cfg.seed, {stream_tag::kPValues, t}).next_u64());
    for (std::size_t pi = 0; pi < n_proc; ++pi) {
      const SimProcedure& proc = cfg.procedures[pi];
      for (std::size_t ai = 0; ai < n_alpha; ++ai) {
        const double alpha = cfg.alpha_grid[ai];
        ProcedureConfig pc;
        pc.kind = proc.kind;
        pc.alpha = alpha;
        pc.lambda = proc.lambda;
        pc.k0 = proc.k0;
        if (proc.tune) {
          TuningConfig tc;
          tc.bootstrap_replicates = cfg.bootstrap_replicates;
          tc.gamma = alpha;
          tc.seed = RandomStream::derive(cfg.seed, {stream_tag::kTune, t, pi, ai})
                        .next_u64();
          if (proc.kind == ProcedureKind::storey_bh) {
            tc.grid = default_storey_grid();
            pc.lambda = select_hyperparameter(pvals, TuneKind::storey, tc);
          } else {
            tc.grid = default_quantile_grid(pvals.size());
            pc.k0 = static_cast<std::size_t>(
                select_hyperparameter(pvals, TuneKind::quantile, tc));
          }
        }
        const SelectionOutcome outcome =
            run_procedure(pvals, cfg.calibration_size, pc);
        const EvaluationReport ev =
            evaluate(outcome, data.truth, cfg.calibration_size, cfg.test_size);
        TrialReport& cell = report.cells[pi * n_alpha + ai];
        cell.fdp[t] = ev.fdp;
        cell.power[t] = ev.power;
        cell.ratio[t] = ev.ai_labeled_ratio;
      }
    }
  };

  unsigned worker_count = threads == 0 ? std::thread::hardware_concurrency() : threads;
  worker_count = std::max(1u, std::min<unsigned>(worker_count,
                                                 static_cast<unsigned>(cfg.trials)));
  if (worker_count == 1) {
    for (std::size_t t = 0; t < cfg.trials; ++t) run_trial(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(worker_count);
    for (unsigned w = 0; w < worker_count; ++w) {
      workers.emplace_back([&] {
        for (;;) {
          const std::size_t t = next.fetch_add(1);
          if (t >= cfg.trials) return;
          try {
            run_trial(t);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  for (TrialReport& cell : report.cells) {
    detail::mean_and_se(cell.fdp, cell.mean_fdp, cell.se_fdp);
    detail::mean_and_se(cell.power, cell.mean_power, cell.se_power);
    detail::mean_and_se(cell.ratio, cell.mean_ratio, cell.se_ratio);
  }
  return report;
}

}  // namespace selabel
