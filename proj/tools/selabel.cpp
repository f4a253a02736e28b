// selabel: selective-labeling certification from the command line.
//
// Subcommands: score, select, simulate, tune, evaluate, split.
// Exit codes: 0 success, 1 validation/usage error, 2 I/O error,
// 3 internal invariant violation.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "selabel/selabel.hpp"

namespace {

using nlohmann::json;
using namespace selabel;

// ---------------------------------------------------------------------------
// configuration layering: flag > config file section > SELABEL_SEED (seed
// only) > built-in default

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON: " + std::string(e.what()));
  }
  if (!cfg.is_object()) throw ValidationError(path + ": config must be a JSON object");
  return cfg;
}

struct ConfigSection {
  json section = json::object();

  template <typename T>
  void merge(const CLI::App& cmd, const std::string& flag, const char* key, T& value) const {
    if (cmd.count("--" + flag) > 0) return;
    if (!section.contains(key)) return;
    try {
      value = section.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError(std::string("config key '") + key + "' has the wrong type");
    }
  }

  template <typename T>
  void merge_optional(const CLI::App& cmd, const std::string& flag, const char* key,
                      std::optional<T>& value) const {
    if (cmd.count("--" + flag) > 0) return;
    if (!section.contains(key)) return;
    try {
      value = section.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError(std::string("config key '") + key + "' has the wrong type");
    }
  }
};

std::optional<std::uint64_t> seed_from_environment() {
  const char* raw = std::getenv("SELABEL_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  std::uint64_t value = 0;
  const char* last = raw;
  while (*last) ++last;
  auto [ptr, ec] = std::from_chars(raw, last, value);
  if (ec != std::errc() || ptr != last)
    throw ValidationError("SELABEL_SEED is not an unsigned integer: " + std::string(raw));
  return value;
}

std::uint64_t resolve_seed(const CLI::App& cmd, const ConfigSection& cfg,
                           const std::string& flag, const char* key,
                           std::uint64_t flag_value) {
  if (cmd.count(flag) > 0) return flag_value;
  if (cfg.section.contains(key)) return cfg.section.at(key).get<std::uint64_t>();
  if (auto env = seed_from_environment()) return *env;
  return kDefaultSeed;
}

// ---------------------------------------------------------------------------
// shared CSV loaders

struct ColumnFamily {
  std::vector<std::size_t> columns;  // column index per class, rank order
  bool is_probability = false;
};

ColumnFamily detect_score_columns(const CsvTable& table) {
  std::vector<std::pair<std::size_t, std::size_t>> probs, logits;  // (rank, col)
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    for (const auto& [prefix, bucket] :
         {std::pair{std::string("prob_"), &probs}, std::pair{std::string("logit_"), &logits}}) {
      if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0)
        continue;
      std::size_t rank = 0;
      const char* first = name.data() + prefix.size();
      const char* last = name.data() + name.size();
      auto [ptr, ec] = std::from_chars(first, last, rank);
      if (ec == std::errc() && ptr == last) bucket->emplace_back(rank, c);
    }
  }
  if (!probs.empty() && !logits.empty())
    throw ValidationError(table.path + ": mixed prob_*/logit_* columns; provide one family");
  if (probs.empty() && logits.empty())
    throw ValidationError(table.path + ": no prob_0..prob_{K-1} or logit_0..logit_{K-1} columns");

  auto& family = probs.empty() ? logits : probs;
  std::sort(family.begin(), family.end());
  for (std::size_t k = 0; k < family.size(); ++k) {
    if (family[k].first != k)
      throw ValidationError(table.path + ": class columns must be numbered 0..K-1 without gaps (missing index " +
                            std::to_string(k) + ")");
  }
  ColumnFamily out;
  out.is_probability = logits.empty();
  for (const auto& [rank, col] : family) out.columns.push_back(col);
  return out;
}

struct LabeledScores {
  CalibrationSet calibration;
};

LabeledScores load_calibration(const CsvTable& table) {
  const std::size_t score_col = table.require_column("score");
  const auto correct_col = table.find_column("correct");
  std::optional<std::size_t> label_col = table.find_column("label");
  std::optional<std::size_t> predicted_col = table.find_column("predicted");
  if (!correct_col && !(label_col && predicted_col))
    throw ValidationError(table.path +
                          ": need a 'correct' column or both 'label' and 'predicted'");

  LabeledScores out;
  out.calibration.scores.reserve(table.rows.size());
  out.calibration.correct.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out.calibration.scores.push_back(parse_double(table, r, score_col));
    if (correct_col) {
      out.calibration.correct.push_back(parse_bool(table, r, *correct_col));
    } else {
      out.calibration.correct.push_back(table.rows[r][*label_col] ==
                                        table.rows[r][*predicted_col]);
    }
  }
  return out;
}

std::vector<RegressionCalibrationRecord> load_regression_calibration(const CsvTable& table) {
  const std::size_t score_col = table.require_column("score");
  const std::size_t y_col = table.require_column("y");
  const std::size_t yhat_col = table.require_column("y_hat");
  std::vector<RegressionCalibrationRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    RegressionCalibrationRecord rec;
    rec.truth = parse_double(table, r, y_col);
    rec.prediction = parse_double(table, r, yhat_col);
    rec.uncertainty = parse_double(table, r, score_col);
    records.push_back(rec);
  }
  return records;
}

struct TestBatch {
  std::vector<std::string> ids;
  std::vector<double> scores;
};

TestBatch load_test_batch(const CsvTable& table) {
  const std::size_t id_col = table.require_column("id");
  const std::size_t score_col = table.require_column("score");
  TestBatch batch;
  batch.ids.reserve(table.rows.size());
  batch.scores.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    batch.ids.push_back(table.rows[r][id_col]);
    batch.scores.push_back(parse_double(table, r, score_col));
  }
  return batch;
}

// truth keyed by id; classification needs 'correct' (or label/predicted),
// regression needs y/y_hat plus a loss spec.
std::map<std::string, bool> load_truth(const CsvTable& table,
                                       const std::optional<LossSpec>& loss_spec) {
  const std::size_t id_col = table.require_column("id");
  std::map<std::string, bool> truth;
  if (loss_spec) {
    const std::size_t y_col = table.require_column("y");
    const std::size_t yhat_col = table.require_column("y_hat");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const double l = loss(*loss_spec, parse_double(table, r, y_col),
                            parse_double(table, r, yhat_col));
      truth[table.rows[r][id_col]] = l <= loss_spec->epsilon;
    }
    return truth;
  }
  const auto correct_col = table.find_column("correct");
  const auto label_col = table.find_column("label");
  const auto predicted_col = table.find_column("predicted");
  if (!correct_col && !(label_col && predicted_col))
    throw ValidationError(table.path +
                          ": need a 'correct' column or both 'label' and 'predicted'");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const bool ok = correct_col ? parse_bool(table, r, *correct_col)
                                : table.rows[r][*label_col] == table.rows[r][*predicted_col];
    truth[table.rows[r][id_col]] = ok;
  }
  return truth;
}

GroundTruth join_truth(const std::map<std::string, bool>& by_id,
                       const std::vector<std::string>& test_ids,
                       const std::string& truth_path) {
  GroundTruth truth;
  truth.correct.reserve(test_ids.size());
  std::vector<std::string> missing;
  for (const auto& id : test_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      if (missing.size() < 10) missing.push_back(id);
      continue;
    }
    truth.correct.push_back(it->second);
  }
  if (truth.correct.size() != test_ids.size()) {
    std::string msg = truth_path + ": missing ids:";
    for (const auto& id : missing) msg += " " + id;
    const std::size_t total = test_ids.size() - truth.correct.size();
    if (total > missing.size())
      msg += " (and " + std::to_string(total - missing.size()) + " more)";
    throw ValidationError(msg);
  }
  return truth;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  std::string input, output;
  std::string kind = "msp";
  bool negate = false;
};

void run_score(const ScoreArgs& args) {
  const auto kind = score_kind_from_string(args.kind);
  if (!kind || *kind == ScoreKind::external)
    throw ValidationError("unknown score kind '" + args.kind +
                          "' (expected msp, energy or doctor_alpha)");

  const CsvTable table = read_csv(args.input);
  const std::size_t id_col = table.require_column("id");
  const ColumnFamily family = detect_score_columns(table);

  if ((*kind == ScoreKind::energy) == family.is_probability)
    throw ValidationError(args.input + ": score kind " + args.kind + " requires " +
                          (*kind == ScoreKind::energy ? "logit_*" : "prob_*") + " columns");

  CsvWriter writer(args.output);
  writer.write_row({"id", "score"});
  std::vector<double> values(family.columns.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t k = 0; k < family.columns.size(); ++k)
      values[k] = parse_double(table, r, family.columns[k]);
    UncertaintyScore score;
    try {
      if (*kind == ScoreKind::msp)
        score = msp_score({values});
      else if (*kind == ScoreKind::doctor_alpha)
        score = doctor_alpha_score({values});
      else
        score = energy_score({values});
    } catch (const ValidationError& e) {
      throw ValidationError(args.input + ":" + std::to_string(r + 2) + ": " + e.what());
    }
    const double value = args.negate ? -score.value : score.value;
    writer.write_row({table.rows[r][id_col], format_double(value)});
  }
  writer.close();
  std::cout << "scored " << table.rows.size() << " instances (" << args.kind
            << (args.negate ? ", negated" : "") << ") -> " << args.output << "\n";
}

// ---------------------------------------------------------------------------
// select

struct SelectArgs {
  std::string calibration, test, report_path, selected_path, truth_path;
  double alpha = 0.1;
  std::string procedure = "conformal_labeling";
  std::uint64_t seed = kDefaultSeed;
  std::optional<double> lambda;
  std::optional<std::size_t> k0;
  std::size_t replicates = 200;
  std::optional<double> epsilon;
  std::string loss_kind = "squared_error";
  bool negate = false;
  bool timing = false;
};

std::string default_selected_path(const std::string& report_path) {
  const auto dot = report_path.rfind('.');
  const std::string stem =
      dot == std::string::npos ? report_path : report_path.substr(0, dot);
  return stem + ".selected_ids.csv";
}

void run_select(const SelectArgs& args) {
  const auto started = std::chrono::steady_clock::now();

  const auto kind = procedure_kind_from_string(args.procedure);
  if (!kind) throw ValidationError("unknown procedure '" + args.procedure + "'");

  std::optional<LossSpec> loss_spec;
  if (args.epsilon) {
    const auto lk = loss_kind_from_string(args.loss_kind);
    if (!lk) throw ValidationError("unknown loss kind '" + args.loss_kind + "'");
    loss_spec = LossSpec{*lk, *args.epsilon};
    loss_spec->validate();
  }

  const CsvTable cal_table = read_csv(args.calibration);
  CalibrationSet cal = loss_spec
      ? build_regression_calibration(load_regression_calibration(cal_table), *loss_spec)
      : load_calibration(cal_table).calibration;

  const CsvTable test_table = read_csv(args.test);
  TestBatch batch = load_test_batch(test_table);

  if (args.negate) {
    for (double& s : cal.scores) s = -s;
    for (double& s : batch.scores) s = -s;
  }

  const PValueSet pvals = conformal_p_values(cal, batch.scores, args.seed);

  ProcedureConfig pc;
  pc.kind = *kind;
  pc.alpha = args.alpha;
  pc.lambda = args.lambda;
  pc.k0 = args.k0;
  bool tuned = false;
  if (*kind == ProcedureKind::storey_bh && !pc.lambda) {
    TuningConfig tc;
    tc.grid = default_storey_grid();
    tc.bootstrap_replicates = args.replicates;
    tc.gamma = args.alpha;
    tc.seed = RandomStream::derive(args.seed, {stream_tag::kTune}).next_u64();
    pc.lambda = select_hyperparameter(pvals, TuneKind::storey, tc);
    tuned = true;
  } else if (*kind == ProcedureKind::quantile_bh && !pc.k0) {
    TuningConfig tc;
    tc.grid = default_quantile_grid(pvals.size());
    tc.bootstrap_replicates = args.replicates;
    tc.gamma = args.alpha;
    tc.seed = RandomStream::derive(args.seed, {stream_tag::kTune}).next_u64();
    pc.k0 = static_cast<std::size_t>(select_hyperparameter(pvals, TuneKind::quantile, tc));
    tuned = true;
  }

  const SelectionOutcome outcome = run_procedure(pvals, cal.size(), pc);

  SelectionReport report;
  report.procedure = args.procedure;
  report.alpha = args.alpha;
  report.seed = args.seed;
  report.inputs["calibration"] = {args.calibration, file_digest(args.calibration)};
  report.inputs["test"] = {args.test, file_digest(args.test)};
  report.n = cal.size();
  report.n0 = pvals.n0_used;
  report.m = batch.scores.size();
  report.outcome = outcome;

  if (pvals.degenerate_null_calibration())
    report.warnings.push_back(
        "calibration has no mislabeled instances (n0 = 0): p-values are pure "
        "tie-break noise and selections carry no evidence");
  if (outcome.level_capped)
    report.warnings.push_back("adaptive level alpha/pi0 reached 1 and was capped");
  if (tuned)
    report.warnings.push_back(std::string("hyperparameter bootstrap-tuned: ") +
                              (pc.lambda ? "lambda=" + format_double(*pc.lambda)
                                         : "k0=" + std::to_string(*pc.k0)));

  std::set<std::size_t> selected(outcome.selected.begin(), outcome.selected.end());
  for (std::size_t j = 0; j < batch.ids.size(); ++j) {
    InstanceRecord rec;
    rec.id = batch.ids[j];
    rec.score = batch.scores[j];
    rec.p_value = pvals.p_values[j];
    rec.tie_uniform = pvals.tie_uniforms[j];
    rec.selected = selected.count(j) > 0;
    report.instances.push_back(rec);
  }

  if (!args.truth_path.empty()) {
    const CsvTable truth_table = read_csv(args.truth_path);
    report.inputs["truth"] = {args.truth_path, file_digest(args.truth_path)};
    const GroundTruth truth =
        join_truth(load_truth(truth_table, loss_spec), batch.ids, args.truth_path);
    report.evaluation = evaluate(outcome, truth, cal.size(), batch.scores.size());
  }

  if (args.timing) {
    const auto elapsed = std::chrono::steady_clock::now() - started;
    report.wall_clock_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed)
            .count();
  }

  write_text_file(args.report_path, to_json(report).dump(2) + "\n");

  const std::string selected_path = args.selected_path.empty()
                                        ? default_selected_path(args.report_path)
                                        : args.selected_path;
  CsvWriter writer(selected_path);
  writer.write_row({"id"});
  for (std::size_t j : outcome.selected) writer.write_row({batch.ids[j]});
  writer.close();

  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "selected " << outcome.selected.size() << " of " << report.m
            << " test instances at alpha=" << format_double(args.alpha) << " ("
            << args.procedure << ") -> " << args.report_path << "\n";
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string scenario;
  std::string out_prefix = "simulation";
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::vector<double> alpha_override;
  unsigned threads = 0;
};

void run_simulate(const SimulateArgs& args) {
  std::ifstream in(args.scenario);
  if (!in) throw IoError("cannot open scenario " + args.scenario);
  json scenario;
  try {
    in >> scenario;
  } catch (const json::parse_error& e) {
    throw ValidationError(args.scenario + ": invalid JSON: " + std::string(e.what()));
  }

  SimulationConfig cfg = simulation_config_from_json(scenario);
  if (args.trials) cfg.trials = *args.trials;
  if (args.seed) cfg.seed = *args.seed;
  if (!args.alpha_override.empty()) cfg.alpha_grid = args.alpha_override;

  const SimulationReport report = run_simulation(cfg, args.threads);

  write_text_file(args.out_prefix + ".json", to_json(report).dump(2) + "\n");
  write_text_file(args.out_prefix + ".csv", simulation_to_csv(report));

  for (const auto& cell : report.cells) {
    std::cout << cell.procedure << " alpha=" << format_double(cell.alpha)
              << " fdr=" << format_double(cell.mean_fdp) << "(se "
              << format_double(cell.se_fdp) << ", bound "
              << format_double(cell.theorem_bound) << ")"
              << " power=" << format_double(cell.mean_power)
              << " ratio=" << format_double(cell.mean_ratio) << "\n";
  }
  std::cout << "wrote " << args.out_prefix << ".json and " << args.out_prefix
            << ".csv\n";
}

// ---------------------------------------------------------------------------
// tune

struct TuneArgs {
  std::string pvalues;
  std::string kind;
  std::vector<double> grid;
  std::size_t replicates = 200;
  double gamma = 0.1;
  std::uint64_t seed = kDefaultSeed;
  std::string output;
};

void run_tune(const TuneArgs& args) {
  TuneKind kind;
  if (args.kind == "storey")
    kind = TuneKind::storey;
  else if (args.kind == "quantile")
    kind = TuneKind::quantile;
  else
    throw ValidationError("unknown tune kind '" + args.kind +
                          "' (expected storey or quantile)");

  const CsvTable table = read_csv(args.pvalues);
  const std::size_t p_col = table.require_column("p_value");
  PValueSet pvals;
  pvals.p_values.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    pvals.p_values.push_back(parse_double(table, r, p_col));

  TuningConfig tc;
  tc.grid = args.grid.empty() ? (kind == TuneKind::storey
                                     ? default_storey_grid()
                                     : default_quantile_grid(pvals.size()))
                              : args.grid;
  tc.bootstrap_replicates = args.replicates;
  tc.gamma = args.gamma;
  tc.seed = args.seed;

  const double chosen = select_hyperparameter(pvals, kind, tc);

  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "tune";
  j["kind"] = args.kind;
  j["grid"] = tc.grid;
  j["gamma"] = tc.gamma;
  j["bootstrap_replicates"] = tc.bootstrap_replicates;
  j["seed"] = tc.seed;
  j["input"] = {{"path", args.pvalues}, {"digest", file_digest(args.pvalues)}};
  j["chosen"] = chosen;

  if (args.output.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_text_file(args.output, j.dump(2) + "\n");
    std::cout << "chosen " << (kind == TuneKind::storey ? "lambda" : "k0") << " = "
              << format_double(chosen) << " -> " << args.output << "\n";
  }
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string report_path, truth_path, output;
  std::optional<double> epsilon;
  std::string loss_kind = "squared_error";
};

void run_evaluate(const EvaluateArgs& args) {
  std::ifstream in(args.report_path);
  if (!in) throw IoError("cannot open report " + args.report_path);
  json report;
  try {
    in >> report;
  } catch (const json::parse_error& e) {
    throw ValidationError(args.report_path + ": invalid JSON: " + std::string(e.what()));
  }

  std::optional<LossSpec> loss_spec;
  if (args.epsilon) {
    const auto lk = loss_kind_from_string(args.loss_kind);
    if (!lk) throw ValidationError("unknown loss kind '" + args.loss_kind + "'");
    loss_spec = LossSpec{*lk, *args.epsilon};
    loss_spec->validate();
  }

  std::vector<std::string> ids;
  SelectionOutcome outcome;
  try {
    const auto& instances = report.at("instances");
    for (std::size_t j = 0; j < instances.size(); ++j) {
      ids.push_back(instances[j].at("id").get<std::string>());
      if (instances[j].at("selected").get<bool>()) outcome.selected.push_back(j);
    }
  } catch (const json::exception& e) {
    throw ValidationError(args.report_path + ": not a selection report: " +
                          std::string(e.what()));
  }
  const std::size_t n = report.value("n", std::size_t{0});
  const std::size_t m = ids.size();

  const CsvTable truth_table = read_csv(args.truth_path);
  const GroundTruth truth =
      join_truth(load_truth(truth_table, loss_spec), ids, args.truth_path);

  const EvaluationReport ev = evaluate(outcome, truth, n, m);
  ordered_json j = to_json(ev);
  if (args.output.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_text_file(args.output, j.dump(2) + "\n");
    std::cout << "fdp=" << format_double(ev.fdp) << " power=" << format_double(ev.power)
              << " ratio=" << format_double(ev.ai_labeled_ratio) << " -> " << args.output
              << "\n";
  }
}

// ---------------------------------------------------------------------------
// split

struct SplitArgs {
  std::string input, calibration_out, test_out;
  double fraction = 0.1;
  std::uint64_t seed = kDefaultSeed;
};

void run_split(const SplitArgs& args) {
  require(args.fraction >= 0.0 && args.fraction <= 1.0,
          "--split-fraction must lie in [0, 1]");
  const CsvTable table = read_csv(args.input);
  const std::size_t rows = table.rows.size();
  require(rows > 0, args.input + ": no data rows to split");

  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RandomStream rs = RandomStream::derive(args.seed, {stream_tag::kSplit});
  for (std::size_t i = rows - 1; i > 0; --i) {
    const std::size_t j = rs.next_below(i + 1);
    std::swap(order[i], order[j]);
  }
  const auto k = static_cast<std::size_t>(
      std::llround(args.fraction * static_cast<double>(rows)));
  std::set<std::size_t> calibration_rows(order.begin(), order.begin() + k);

  CsvWriter cal_writer(args.calibration_out);
  CsvWriter test_writer(args.test_out);
  cal_writer.write_row(table.header);
  test_writer.write_row(table.header);
  for (std::size_t r = 0; r < rows; ++r) {
    if (calibration_rows.count(r))
      cal_writer.write_row(table.rows[r]);
    else
      test_writer.write_row(table.rows[r]);
  }
  cal_writer.close();
  test_writer.close();
  std::cout << "split " << rows << " rows: " << k << " calibration, " << rows - k
            << " test\n";
}

// ---------------------------------------------------------------------------

int dispatch(int argc, char** argv) {
  CLI::App app{"certify AI-predicted labels with FDR control"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file with per-command defaults");

  auto score_args = std::make_shared<ScoreArgs>();
  auto select_args = std::make_shared<SelectArgs>();
  auto simulate_args = std::make_shared<SimulateArgs>();
  auto tune_args = std::make_shared<TuneArgs>();
  auto evaluate_args = std::make_shared<EvaluateArgs>();
  auto split_args = std::make_shared<SplitArgs>();

  CLI::App* score = app.add_subcommand("score", "turn prob/logit rows into uncertainty scores");
  score->add_option("-i,--input", score_args->input, "CSV with id + prob_* or logit_* columns")
      ->required();
  score->add_option("-o,--output", score_args->output, "output CSV (id,score)")->required();
  score->add_option("-k,--score", score_args->kind, "msp | energy | doctor_alpha");
  score->add_flag("--negate-score", score_args->negate, "flip the score sign");

  CLI::App* select = app.add_subcommand("select", "run conformal selection on scored data");
  select->add_option("-c,--calibration", select_args->calibration,
                     "calibration CSV: score + correct (or label,predicted); "
                     "regression mode: score,y,y_hat")
      ->required();
  select->add_option("-t,--test", select_args->test, "test CSV: id,score")->required();
  select->add_option("-a,--alpha", select_args->alpha, "target FDR level in (0,1)");
  select->add_option("-p,--procedure", select_args->procedure,
                     "conformal_labeling | bh | storey_bh | quantile_bh");
  select->add_option("-s,--seed", select_args->seed, "tie-break RNG seed");
  select->add_option("--lambda", select_args->lambda, "storey_bh lambda (tuned if omitted)");
  select->add_option("--k0", select_args->k0, "quantile_bh rank (tuned if omitted)");
  select->add_option("--replicates", select_args->replicates,
                     "bootstrap replicates for hyperparameter tuning");
  select->add_option("--epsilon", select_args->epsilon,
                     "loss tolerance; enables regression mode");
  select->add_option("--loss", select_args->loss_kind,
                     "squared_error | absolute_error | zero_one");
  select->add_flag("--negate-score", select_args->negate,
                   "flip all score signs before selection");
  select->add_option("-o,--report", select_args->report_path, "output report JSON")
      ->required();
  select->add_option("--selected-ids", select_args->selected_path,
                     "output CSV of selected ids (default: <report>.selected_ids.csv)");
  select->add_option("--truth", select_args->truth_path,
                     "optional ground-truth CSV; embeds an evaluation block");
  select->add_flag("--timing", select_args->timing,
                   "record wall-clock time (breaks byte-replay of the report)");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo validation runs");
  simulate->add_option("scenario", simulate_args->scenario, "simulation config JSON")
      ->required();
  simulate->add_option("-o,--out-prefix", simulate_args->out_prefix,
                       "output prefix for .json/.csv");
  simulate->add_option("--trials", simulate_args->trials, "override trial count");
  simulate->add_option("-s,--seed", simulate_args->seed, "override master seed");
  simulate->add_option("-a,--alpha", simulate_args->alpha_override,
                       "override the alpha grid");
  simulate->add_option("--threads", simulate_args->threads,
                       "worker threads (0 = hardware)");

  CLI::App* tune = app.add_subcommand("tune", "bootstrap hyperparameter selection");
  tune->add_option("-i,--pvalues", tune_args->pvalues, "CSV with a p_value column")
      ->required();
  tune->add_option("-k,--kind", tune_args->kind, "storey | quantile")->required();
  tune->add_option("--grid", tune_args->grid, "candidate grid (default: deciles)");
  tune->add_option("-B,--replicates", tune_args->replicates, "bootstrap replicates");
  tune->add_option("--gamma", tune_args->gamma,
                   "pFDR evaluation point (use your target alpha)");
  tune->add_option("-s,--seed", tune_args->seed, "bootstrap RNG seed");
  tune->add_option("-o,--output", tune_args->output, "write result JSON here");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a report against ground truth");
  evaluate->add_option("-r,--report", evaluate_args->report_path, "selection report JSON")
      ->required();
  evaluate->add_option("-t,--truth", evaluate_args->truth_path,
                       "truth CSV: id + correct (or label,predicted; or y,y_hat)")
      ->required();
  evaluate->add_option("--epsilon", evaluate_args->epsilon,
                       "loss tolerance; enables regression truth");
  evaluate->add_option("--loss", evaluate_args->loss_kind,
                       "squared_error | absolute_error | zero_one");
  evaluate->add_option("-o,--output", evaluate_args->output, "write evaluation JSON here");

  CLI::App* split = app.add_subcommand("split", "partition one labeled CSV reproducibly");
  split->add_option("-i,--input", split_args->input, "labeled CSV")->required();
  split->add_option("--split-fraction", split_args->fraction,
                    "fraction routed to the calibration file")
      ->required();
  split->add_option("--split-seed", split_args->seed, "shuffle seed");
  split->add_option("--calibration-out", split_args->calibration_out, "calibration CSV path")
      ->required();
  split->add_option("--test-out", split_args->test_out, "test CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage problems map onto the validation exit code
  }

  const json config = load_config_file(config_path);
  const auto section = [&](const char* name) {
    ConfigSection s;
    if (config.contains(name)) {
      if (!config.at(name).is_object())
        throw ValidationError(std::string("config section '") + name +
                              "' must be an object");
      s.section = config.at(name);
    }
    return s;
  };

  if (score->parsed()) {
    const ConfigSection cfg = section("score");
    cfg.merge(*score, "score", "score", score_args->kind);
    cfg.merge(*score, "negate-score", "negate_score", score_args->negate);
    run_score(*score_args);
  } else if (select->parsed()) {
    const ConfigSection cfg = section("select");
    cfg.merge(*select, "alpha", "alpha", select_args->alpha);
    cfg.merge(*select, "procedure", "procedure", select_args->procedure);
    cfg.merge(*select, "replicates", "replicates", select_args->replicates);
    cfg.merge(*select, "loss", "loss", select_args->loss_kind);
    cfg.merge_optional(*select, "lambda", "lambda", select_args->lambda);
    cfg.merge_optional(*select, "k0", "k0", select_args->k0);
    cfg.merge_optional(*select, "epsilon", "epsilon", select_args->epsilon);
    select_args->seed = resolve_seed(*select, cfg, "--seed", "seed", select_args->seed);
    run_select(*select_args);
  } else if (simulate->parsed()) {
    const ConfigSection cfg = section("simulate");
    cfg.merge(*simulate, "out-prefix", "out_prefix", simulate_args->out_prefix);
    cfg.merge(*simulate, "threads", "threads", simulate_args->threads);
    cfg.merge_optional(*simulate, "trials", "trials", simulate_args->trials);
    cfg.merge_optional(*simulate, "seed", "seed", simulate_args->seed);
    run_simulate(*simulate_args);
  } else if (tune->parsed()) {
    const ConfigSection cfg = section("tune");
    cfg.merge(*tune, "gamma", "gamma", tune_args->gamma);
    cfg.merge(*tune, "replicates", "replicates", tune_args->replicates);
    tune_args->seed = resolve_seed(*tune, cfg, "--seed", "seed", tune_args->seed);
    run_tune(*tune_args);
  } else if (evaluate->parsed()) {
    const ConfigSection cfg = section("evaluate");
    cfg.merge(*evaluate, "loss", "loss", evaluate_args->loss_kind);
    cfg.merge_optional(*evaluate, "epsilon", "epsilon", evaluate_args->epsilon);
    run_evaluate(*evaluate_args);
  } else if (split->parsed()) {
    const ConfigSection cfg = section("split");
    cfg.merge(*split, "split-fraction", "split_fraction", split_args->fraction);
    split_args->seed =
        resolve_seed(*split, cfg, "--split-seed", "split_seed", split_args->seed);
    run_split(*split_args);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const selabel::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const selabel::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
