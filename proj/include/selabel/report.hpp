#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "selabel/csv.hpp"
#include "selabel/errors.hpp"
#include "selabel/metrics.hpp"
#include "selabel/montecarlo.hpp"
#include "selabel/procedures.hpp"

namespace selabel {

inline constexpr int kSchemaVersion = 1;

using ordered_json = nlohmann::ordered_json;

// FNV-1a over raw bytes; cheap content fingerprint for replay audits.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a64(buf.str()));
}

struct InstanceRecord {
  std::string id;
  double score = 0.0;
  double p_value = 0.0;
  double tie_uniform = 0.0;
  bool selected = false;
};

// Full record of one selection run: everything needed to replay it
// byte-for-byte from the embedded seed and input digests. wall_clock_ms stays
// null unless timing was requested, so default reports are deterministic.
struct SelectionReport {
  int schema_version = kSchemaVersion;
  std::string procedure;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::map<std::string, std::pair<std::string, std::string>> inputs;  // name -> (path, digest)
  std::size_t n = 0;
  std::size_t n0 = 0;
  std::size_t m = 0;
  std::vector<std::string> warnings;
  SelectionOutcome outcome;
  std::vector<InstanceRecord> instances;
  std::optional<EvaluationReport> evaluation;
  std::optional<double> wall_clock_ms;
};

inline ordered_json to_json(const EvaluationReport& ev) {
  ordered_json j;
  j["fdp"] = ev.fdp;
  j["power"] = ev.power;
  j["ai_labeled_ratio"] = ev.ai_labeled_ratio;
  j["selected_count"] = ev.selected_count;
  j["false_count"] = ev.false_count;
  return j;
}

inline ordered_json to_json(const SelectionReport& report) {
  ordered_json j;
  j["schema_version"] = report.schema_version;
  j["command"] = "select";
  j["procedure"] = report.procedure;
  j["alpha"] = report.alpha;
  j["seed"] = report.seed;

  ordered_json inputs = ordered_json::object();
  for (const auto& [name, info] : report.inputs) {
    inputs[name] = {{"path", info.first}, {"digest", info.second}};
  }
  j["inputs"] = inputs;

  j["n"] = report.n;
  j["n0"] = report.n0;
  j["m"] = report.m;
  j["warnings"] = report.warnings;

  ordered_json sel;
  sel["selected_count"] = report.outcome.selected.size();
  sel["cutoff_index"] = report.outcome.cutoff_index;
  sel["realized_threshold"] = report.outcome.realized_threshold;
  if (report.outcome.pi0_estimate)
    sel["pi0_estimate"] = *report.outcome.pi0_estimate;
  else
    sel["pi0_estimate"] = nullptr;
  if (report.outcome.config.lambda) sel["lambda"] = *report.outcome.config.lambda;
  if (report.outcome.config.k0) sel["k0"] = *report.outcome.config.k0;
  sel["selected_indices"] = report.outcome.selected;
  j["selection"] = sel;

  ordered_json instances = ordered_json::array();
  for (const auto& rec : report.instances) {
    ordered_json r;
    r["id"] = rec.id;
    r["score"] = rec.score;
    r["p_value"] = rec.p_value;
    r["tie_uniform"] = rec.tie_uniform;
    r["selected"] = rec.selected;
    instances.push_back(std::move(r));
  }
  j["instances"] = instances;

  if (report.evaluation)
    j["evaluation"] = to_json(*report.evaluation);
  else
    j["evaluation"] = nullptr;

  if (report.wall_clock_ms)
    j["wall_clock_ms"] = *report.wall_clock_ms;
  else
    j["wall_clock_ms"] = nullptr;
  return j;
}

inline ordered_json to_json(const SimulationConfig& cfg) {
  ordered_json j;
  j["n"] = cfg.calibration_size;
  j["m"] = cfg.test_size;
  j["p_null"] = cfg.p_null;
  j["correct_dist"] = {{"alpha", cfg.correct_dist.alpha}, {"beta", cfg.correct_dist.beta}};
  j["incorrect_dist"] = {{"alpha", cfg.incorrect_dist.alpha}, {"beta", cfg.incorrect_dist.beta}};
  j["trials"] = cfg.trials;
  j["alpha_grid"] = cfg.alpha_grid;
  ordered_json procs = ordered_json::array();
  for (const auto& p : cfg.procedures) {
    ordered_json pj;
    pj["kind"] = to_string(p.kind);
    if (p.lambda) pj["lambda"] = *p.lambda;
    if (p.k0) pj["k0"] = *p.k0;
    if (p.tune) pj["tune"] = true;
    procs.push_back(std::move(pj));
  }
  j["procedures"] = procs;
  j["seed"] = cfg.seed;
  j["bootstrap_replicates"] = cfg.bootstrap_replicates;
  return j;
}

inline ordered_json to_json(const SimulationReport& report) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "simulate";
  j["config"] = to_json(report.config);
  ordered_json cells = ordered_json::array();
  for (const auto& cell : report.cells) {
    ordered_json c;
    c["procedure"] = cell.procedure;
    c["alpha"] = cell.alpha;
    c["theorem_bound"] = cell.theorem_bound;
    c["fdr"] = {{"mean", cell.mean_fdp}, {"std_error", cell.se_fdp}};
    c["power"] = {{"mean", cell.mean_power}, {"std_error", cell.se_power}};
    c["ai_labeled_ratio"] = {{"mean", cell.mean_ratio}, {"std_error", cell.se_ratio}};
    c["per_trial"] = {{"fdp", cell.fdp}, {"power", cell.power}, {"ratio", cell.ratio}};
    cells.push_back(std::move(c));
  }
  j["cells"] = cells;
  return j;
}

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* key : allowed)
      if (item.key() == key) ok = true;
    if (!ok) throw ValidationError("unknown key '" + item.key() + "' in " + where);
  }
}

inline BetaDistribution beta_from_json(const nlohmann::json& j, const std::string& where) {
  check_keys(j, {"alpha", "beta"}, where);
  BetaDistribution d;
  d.alpha = j.at("alpha").get<double>();
  d.beta = j.at("beta").get<double>();
  return d;
}

}  // namespace detail

// Parses a simulation scenario. Absent keys keep the built-in defaults;
// unknown keys are rejected so typos do not silently fall back.
inline SimulationConfig simulation_config_from_json(const nlohmann::json& j) {
  detail::check_keys(j,
                     {"n", "m", "p_null", "correct_dist", "incorrect_dist", "trials",
                      "alpha_grid", "procedures", "seed", "bootstrap_replicates"},
                     "simulation config");
  SimulationConfig cfg;
  if (j.contains("n")) cfg.calibration_size = j.at("n").get<std::size_t>();
  if (j.contains("m")) cfg.test_size = j.at("m").get<std::size_t>();
  if (j.contains("p_null")) cfg.p_null = j.at("p_null").get<double>();
  if (j.contains("correct_dist"))
    cfg.correct_dist = detail::beta_from_json(j.at("correct_dist"), "correct_dist");
  if (j.contains("incorrect_dist"))
    cfg.incorrect_dist = detail::beta_from_json(j.at("incorrect_dist"), "incorrect_dist");
  if (j.contains("trials")) cfg.trials = j.at("trials").get<std::size_t>();
  if (j.contains("alpha_grid"))
    cfg.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("bootstrap_replicates"))
    cfg.bootstrap_replicates = j.at("bootstrap_replicates").get<std::size_t>();
  if (j.contains("procedures")) {
    cfg.procedures.clear();
    for (const auto& pj : j.at("procedures")) {
      detail::check_keys(pj, {"kind", "lambda", "k0", "tune"}, "procedure entry");
      SimProcedure proc;
      const std::string kind = pj.at("kind").get<std::string>();
      auto parsed = procedure_kind_from_string(kind);
      if (!parsed) throw ValidationError("unknown procedure kind '" + kind + "'");
      proc.kind = *parsed;
      if (pj.contains("lambda")) proc.lambda = pj.at("lambda").get<double>();
      if (pj.contains("k0")) proc.k0 = pj.at("k0").get<std::size_t>();
      if (pj.contains("tune")) proc.tune = pj.at("tune").get<bool>();
      cfg.procedures.push_back(proc);
    }
  }
  return cfg;
}

// Flat plot-ready table: one row per procedure x alpha x statistic.
// std_error is empty for the closed-form bound.
inline std::string simulation_to_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "procedure,alpha,statistic,value,std_error\n";
  for (const auto& cell : report.cells) {
    const std::string prefix =
        csv_escape(cell.procedure) + "," + format_double(cell.alpha) + ",";
    out << prefix << "fdr," << format_double(cell.mean_fdp) << ","
        << format_double(cell.se_fdp) << "\n";
    out << prefix << "power," << format_double(cell.mean_power) << ","
        << format_double(cell.se_power) << "\n";
    out << prefix << "ai_labeled_ratio," << format_double(cell.mean_ratio) << ","
        << format_double(cell.se_ratio) << "\n";
    out << prefix << "theorem_bound," << format_double(cell.theorem_bound) << ",\n";
  }
  return out.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  out.close();
  if (!out) throw IoError("error writing " + path);
}

}  // namespace selabel
