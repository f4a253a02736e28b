// End-to-end tests driving the selabel binary (path in $SELABEL_BIN).

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

struct Sandbox {
  fs::path dir;

  Sandbox() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("selabel_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~Sandbox() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }

  fs::path path(const std::string& name) const { return dir / name; }

  RunResult run(const std::string& args, const std::string& env = "") const {
    const char* bin = std::getenv("SELABEL_BIN");
    REQUIRE(bin != nullptr);
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = "cd " + dir.string() + " && " + env + " \"" +
                            std::string(bin) + "\" " + args + " > " + out.string() +
                            " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out);
    result.err = slurp(err);
    return result;
  }
};

// calibration with 4 mislabeled rows at scores {0.2, 0.4, 0.6, 0.8}; with
// alpha = 0.2 the per-rank thresholds are 0.1 j, so three test scores below
// 0.2 are always selected and one above 0.8 never is, whatever the tie
// uniforms draw.
const char* kCalibrationCsv =
    "score,correct\n"
    "0.2,0\n0.4,0\n0.6,0\n0.8,0\n"
    "0.05,1\n0.06,1\n0.07,1\n0.08,1\n0.09,1\n";

const char* kTestCsv =
    "id,score\n"
    "a,0.05\n"
    "b,0.1\n"
    "c,0.15\n"
    "d,0.95\n";

}  // namespace

TEST_CASE("score command computes the documented examples", "[cli]") {
  Sandbox box;
  spit(box.path("probs.csv"),
       "id,prob_0,prob_1,prob_2\n"
       "x,0.7,0.2,0.1\n"
       "y,1,0,0\n");
  auto r = box.run("score -i probs.csv -o msp.csv -k msp");
  REQUIRE(r.exit_code == 0);
  REQUIRE(slurp(box.path("msp.csv")) == "id,score\nx,0.30000000000000004\ny,0\n");

  r = box.run("score -i probs.csv -o doctor.csv -k doctor_alpha");
  REQUIRE(r.exit_code == 0);
  REQUIRE(slurp(box.path("doctor.csv")).find("y,0\n") != std::string::npos);

  spit(box.path("logits.csv"), "id,logit_0,logit_1\nz,0,0\n");
  r = box.run("score -i logits.csv -o energy.csv -k energy");
  REQUIRE(r.exit_code == 0);
  REQUIRE(slurp(box.path("energy.csv")) == "id,score\nz,0.6931471805599453\n");

  r = box.run("score -i logits.csv -o neg.csv -k energy --negate-score");
  REQUIRE(r.exit_code == 0);
  REQUIRE(slurp(box.path("neg.csv")) == "id,score\nz,-0.6931471805599453\n");
}

TEST_CASE("score command rejects bad schemas with context", "[cli]") {
  Sandbox box;
  spit(box.path("mixed.csv"), "id,prob_0,logit_0\nx,0.5,1.0\n");
  auto r = box.run("score -i mixed.csv -o out.csv");
  REQUIRE(r.exit_code == 1);
  REQUIRE(r.err.find("mixed") != std::string::npos);

  spit(box.path("gap.csv"), "id,prob_0,prob_2\nx,0.5,0.5\n");
  r = box.run("score -i gap.csv -o out.csv");
  REQUIRE(r.exit_code == 1);

  spit(box.path("bad.csv"), "id,prob_0,prob_1\nok,0.5,0.5\noops,0.5,zzz\n");
  r = box.run("score -i bad.csv -o out.csv");
  REQUIRE(r.exit_code == 1);
  REQUIRE(r.err.find(":3:") != std::string::npos);
  REQUIRE(r.err.find("prob_1") != std::string::npos);

  r = box.run("score -i bad.csv -o out.csv -k energy");
  REQUIRE(r.exit_code == 1);
  REQUIRE(r.err.find("logit") != std::string::npos);

  r = box.run("score -i missing.csv -o out.csv");
  REQUIRE(r.exit_code == 2);
}

TEST_CASE("select runs the pipeline end to end", "[cli]") {
  Sandbox box;
  spit(box.path("cal.csv"), kCalibrationCsv);
  spit(box.path("test.csv"), kTestCsv);

  auto r = box.run("select -c cal.csv -t test.csv -a 0.2 -s 7 -o report.json");
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("selected 3 of 4") != std::string::npos);

  const json report = json::parse(slurp(box.path("report.json")));
  REQUIRE(report.at("schema_version") == 1);
  REQUIRE(report.at("n") == 9);
  REQUIRE(report.at("n0") == 4);
  REQUIRE(report.at("m") == 4);
  REQUIRE(report.at("seed") == 7);
  REQUIRE(report.at("selection").at("selected_count") == 3);
  REQUIRE(report.at("wall_clock_ms").is_null());
  REQUIRE(report.at("instances").size() == 4);

  REQUIRE(slurp(box.path("report.selected_ids.csv")) == "id\na\nb\nc\n");
}

TEST_CASE("select reports are byte-identical across reruns", "[cli]") {
  Sandbox box;
  spit(box.path("cal.csv"), kCalibrationCsv);
  spit(box.path("test.csv"), kTestCsv);

  REQUIRE(box.run("select -c cal.csv -t test.csv -a 0.2 -s 11 -o r1.json").exit_code == 0);
  REQUIRE(box.run("select -c cal.csv -t test.csv -a 0.2 -s 11 -o r2.json").exit_code == 0);
  REQUIRE(slurp(box.path("r1.json")) == slurp(box.path("r2.json")));

  // a different seed changes the tie uniforms
  REQUIRE(box.run("select -c cal.csv -t test.csv -a 0.2 -s 12 -o r3.json").exit_code == 0);
  REQUIRE(slurp(box.path("r1.json")) != slurp(box.path("r3.json")));
}

TEST_CASE("select surfaces the degenerate-calibration warning", "[cli]") {
  Sandbox box;
  spit(box.path("cal.csv"), "score,correct\n0.1,1\n0.2,1\n");
  spit(box.path("test.csv"), "id,score\na,0.5\n");
  auto r = box.run("select -c cal.csv -t test.csv -a 0.1 -o report.json");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(slurp(box.path("report.json")));
  REQUIRE(report.at("warnings").size() == 1);
  REQUIRE(std::string(report.at("warnings")[0]).find("n0 = 0") != std::string::npos);
}

TEST_CASE("select validates arguments and files", "[cli]") {
  Sandbox box;
  spit(box.path("cal.csv"), kCalibrationCsv);
  spit(box.path("test.csv"), kTestCsv);
  REQUIRE(box.run("select -c cal.csv -t test.csv -a 1.5 -o r.json").exit_code == 1);
  REQUIRE(box.run("select -c nope.csv -t test.csv -a 0.1 -o r.json").exit_code == 2);
  spit(box.path("nolabel.csv"), "score\n0.5\n");
  REQUIRE(box.run("select -c nolabel.csv -t test.csv -a 0.1 -o r.json").exit_code == 1);
}

TEST_CASE("select works with label/predicted columns and truth evaluation", "[cli]") {
  Sandbox box;
  spit(box.path("cal.csv"),
       "score,label,predicted\n"
       "0.2,cat,dog\n0.4,cat,dog\n0.6,cat,dog\n0.8,cat,dog\n"
       "0.05,cat,cat\n0.06,dog,dog\n0.07,cat,cat\n0.08,dog,dog\n0.09,cat,cat\n");
  spit(box.path("test.csv"), kTestCsv);
  spit(box.path("truth.csv"), "id,correct\na,1\nb,1\nc,0\nd,1\n");

  auto r = box.run(
      "select -c cal.csv -t test.csv -a 0.2 -s 5 -o report.json --truth truth.csv");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(slurp(box.path("report.json")));
  const auto& ev = report.at("evaluation");
  REQUIRE_THAT(ev.at("fdp").get<double>(),
               Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
  REQUIRE_THAT(ev.at("power").get<double>(),
               Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));
  REQUIRE_THAT(ev.at("ai_labeled_ratio").get<double>(),
               Catch::Matchers::WithinAbs(3.0 / 13.0, 1e-12));
}

TEST_CASE("evaluate joins a report with a truth file", "[cli]") {
  Sandbox box;
  spit(box.path("cal.csv"), kCalibrationCsv);
  spit(box.path("test.csv"), kTestCsv);
  REQUIRE(box.run("select -c cal.csv -t test.csv -a 0.2 -s 5 -o report.json").exit_code ==
          0);

  spit(box.path("truth.csv"), "id,correct\na,1\nb,1\nc,0\nd,1\n");
  auto r = box.run("evaluate -r report.json -t truth.csv");
  REQUIRE(r.exit_code == 0);
  const json ev = json::parse(r.out);
  REQUIRE_THAT(ev.at("fdp").get<double>(), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));

  spit(box.path("short.csv"), "id,correct\na,1\nd,1\n");
  r = box.run("evaluate -r report.json -t short.csv");
  REQUIRE(r.exit_code == 1);
  REQUIRE(r.err.find("missing ids") != std::string::npos);
  REQUIRE(r.err.find("b") != std::string::npos);
}

TEST_CASE("regression mode thresholds losses", "[cli]") {
  Sandbox box;
  // losses |y - y_hat|: {0.02, 0.08, 0.30} -> eps 0.05 keeps one good row
  spit(box.path("cal.csv"),
       "score,y,y_hat\n"
       "0.1,1.0,1.02\n"
       "0.5,1.0,1.08\n"
       "0.9,1.0,1.30\n");
  spit(box.path("test.csv"), "id,score\na,0.05\n");
  auto r = box.run(
      "select -c cal.csv -t test.csv -a 0.3 -s 3 -o rep.json --loss absolute_error "
      "--epsilon 0.05");
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(slurp(box.path("rep.json")));
  REQUIRE(report.at("n0") == 2);
}

TEST_CASE("split partitions reproducibly", "[cli]") {
  Sandbox box;
  std::string rows = "id,score,correct\n";
  for (int i = 0; i < 10; ++i)
    rows += "r" + std::to_string(i) + ",0." + std::to_string(i) + ",1\n";
  spit(box.path("all.csv"), rows);

  auto r = box.run(
      "split -i all.csv --split-fraction 0.3 --split-seed 9 "
      "--calibration-out cal.csv --test-out test.csv");
  REQUIRE(r.exit_code == 0);
  const std::string cal_a = slurp(box.path("cal.csv"));
  const std::string test_a = slurp(box.path("test.csv"));
  REQUIRE(std::count(cal_a.begin(), cal_a.end(), '\n') == 4);   // header + 3
  REQUIRE(std::count(test_a.begin(), test_a.end(), '\n') == 8); // header + 7

  r = box.run(
      "split -i all.csv --split-fraction 0.3 --split-seed 9 "
      "--calibration-out cal2.csv --test-out test2.csv");
  REQUIRE(r.exit_code == 0);
  REQUIRE(slurp(box.path("cal2.csv")) == cal_a);
  REQUIRE(slurp(box.path("test2.csv")) == test_a);
}

TEST_CASE("tune picks grid values with the documented tie-break", "[cli]") {
  Sandbox box;
  spit(box.path("p.csv"), "p_value\n0.2\n0.9\n");
  auto r = box.run("tune -i p.csv -k storey --grid 0.5 -o tune.json");
  REQUIRE(r.exit_code == 0);
  REQUIRE(json::parse(slurp(box.path("tune.json"))).at("chosen") == 0.5);

  spit(box.path("tie.csv"), "p_value\n0.9\n0.95\n");
  r = box.run("tune -i tie.csv -k storey --grid 0.6 --grid 0.3 -s 4");
  REQUIRE(r.exit_code == 0);
  REQUIRE(json::parse(r.out).at("chosen") == 0.3);
}

TEST_CASE("simulate writes replayable reports", "[cli]") {
  Sandbox box;
  spit(box.path("tiny.json"), R"({
    "n": 40, "m": 30, "p_null": 0.3, "trials": 20,
    "alpha_grid": [0.1],
    "procedures": [{ "kind": "conformal_labeling" }],
    "seed": 5
  })");

  auto r = box.run("simulate tiny.json -o sim1");
  REQUIRE(r.exit_code == 0);
  const json rep = json::parse(slurp(box.path("sim1.json")));
  REQUIRE(rep.at("cells").size() == 1);
  REQUIRE(rep.at("cells")[0].at("per_trial").at("fdp").size() == 20);

  const std::string csv = slurp(box.path("sim1.csv"));
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 1 + 4);

  r = box.run("simulate tiny.json -o sim2 --threads 3");
  REQUIRE(r.exit_code == 0);
  REQUIRE(slurp(box.path("sim1.json")) == slurp(box.path("sim2.json")));

  r = box.run("simulate tiny.json -o single --trials 1");
  REQUIRE(r.exit_code == 0);
  const json single = json::parse(slurp(box.path("single.json")));
  const auto& cell = single.at("cells")[0];
  REQUIRE(cell.at("fdr").at("mean") == cell.at("per_trial").at("fdp")[0]);
  REQUIRE(cell.at("fdr").at("std_error") == 0.0);
}

TEST_CASE("config precedence: flag beats config beats default", "[cli]") {
  Sandbox box;
  spit(box.path("cal.csv"), kCalibrationCsv);
  spit(box.path("test.csv"), kTestCsv);
  spit(box.path("cfg.json"), R"({ "select": { "alpha": 0.15, "seed": 99 } })");

  REQUIRE(box.run("select -c cal.csv -t test.csv -o d.json -s 1").exit_code == 0);
  REQUIRE(json::parse(slurp(box.path("d.json"))).at("alpha") == 0.1);  // default

  REQUIRE(box.run("--config cfg.json select -c cal.csv -t test.csv -o c.json")
              .exit_code == 0);
  const json with_config = json::parse(slurp(box.path("c.json")));
  REQUIRE(with_config.at("alpha") == 0.15);
  REQUIRE(with_config.at("seed") == 99);

  REQUIRE(box.run("--config cfg.json select -c cal.csv -t test.csv -o f.json -a 0.25 -s 2")
              .exit_code == 0);
  const json with_flag = json::parse(slurp(box.path("f.json")));
  REQUIRE(with_flag.at("alpha") == 0.25);
  REQUIRE(with_flag.at("seed") == 2);
}

TEST_CASE("SELABEL_SEED supplies the default seed", "[cli]") {
  Sandbox box;
  spit(box.path("cal.csv"), kCalibrationCsv);
  spit(box.path("test.csv"), kTestCsv);

  REQUIRE(box.run("select -c cal.csv -t test.csv -o env.json", "SELABEL_SEED=777")
              .exit_code == 0);
  REQUIRE(json::parse(slurp(box.path("env.json"))).at("seed") == 777);

  REQUIRE(box.run("select -c cal.csv -t test.csv -o flag.json -s 888",
                  "SELABEL_SEED=777")
              .exit_code == 0);
  REQUIRE(json::parse(slurp(box.path("flag.json"))).at("seed") == 888);

  auto r = box.run("select -c cal.csv -t test.csv -o bad.json", "SELABEL_SEED=oops");
  REQUIRE(r.exit_code == 1);
}

TEST_CASE("timing flag populates wall_clock_ms", "[cli]") {
  Sandbox box;
  spit(box.path("cal.csv"), kCalibrationCsv);
  spit(box.path("test.csv"), kTestCsv);
  REQUIRE(box.run("select -c cal.csv -t test.csv -o t.json --timing").exit_code == 0);
  REQUIRE(json::parse(slurp(box.path("t.json"))).at("wall_clock_ms").is_number());
}

TEST_CASE("usage errors exit with code 1", "[cli]") {
  Sandbox box;
  REQUIRE(box.run("select").exit_code == 1);          // missing required options
  REQUIRE(box.run("no_such_command").exit_code == 1);
  REQUIRE(box.run("--help").exit_code == 0);
}
