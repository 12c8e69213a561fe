#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pbounds/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace pbounds;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "pbounds_test";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write_temp(const std::string& name, const std::string& text) {
  const fs::path p = temp_dir() / name;
  write_text_file(p.string(), text);
  return p.string();
}

int run_cli(const std::string& args, const std::string& out_file) {
  const std::string cmd =
      std::string(PBOUNDS_CLI) + " " + args + " > " + out_file + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("panel csv round trip") {
  const std::string path = write_temp("ok.csv",
                                      "id,t,y,x1\n"
                                      "7,1,0,0.5\n"
                                      "7,2,1,1.5\n"
                                      "3,1,1,-1\n"
                                      "3,2,0,2\n");
  const PanelDataset p = load_panel_csv(path);
  CHECK(p.n == 2);
  CHECK(p.T == 2);
  CHECK(p.K == 1);
  // unit order follows first appearance: id 7 first
  CHECK(p.y(0, 1) == 1);
  CHECK(p.x(0, 0) == doctest::Approx(0.5));
  CHECK(p.x(2, 0) == doctest::Approx(-1.0));

  const std::string copy = (temp_dir() / "copy.csv").string();
  save_panel_csv(p, copy);
  const PanelDataset q = load_panel_csv(copy);
  CHECK(q.y == p.y);
  CHECK(q.x == p.x);
}

TEST_CASE("panel csv error reporting") {
  SUBCASE("unbalanced panels name the offending ids") {
    const std::string path = write_temp("unbalanced.csv",
                                        "id,t,y,x1\n"
                                        "1,1,0,0\n1,2,1,0\n1,3,0,1\n"
                                        "7,1,0,0\n7,2,1,1\n");
    try {
      load_panel_csv(path);
      FAIL("expected unbalanced-panel error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("7") != std::string::npos);
      CHECK(std::string(e.what()).find("unbalanced") != std::string::npos);
    }
  }
  SUBCASE("non-binary outcomes cite the row") {
    const std::string path = write_temp("bady.csv",
                                        "id,t,y,x1\n"
                                        "1,1,0,0\n1,2,2,0\n");
    try {
      load_panel_csv(path);
      FAIL("expected parse error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
  }
  SUBCASE("duplicate observations are rejected") {
    const std::string path = write_temp("dup.csv",
                                        "id,t,y,x1\n"
                                        "1,1,0,0\n1,1,1,0\n");
    CHECK_THROWS_WITH_AS(load_panel_csv(path),
                         doctest::Contains("duplicate (id,t) = (1,1)"),
                         std::invalid_argument);
  }
  SUBCASE("unknown columns are rejected") {
    const std::string path = write_temp("badcol.csv", "id,t,y,w\n1,1,0,0\n");
    CHECK_THROWS_AS(load_panel_csv(path), std::invalid_argument);
  }
  SUBCASE("y0 column loads and must be constant within units") {
    const std::string ok = write_temp("y0.csv",
                                      "id,t,y,x1,y0\n"
                                      "1,1,0,0,1\n1,2,1,0,1\n");
    const PanelDataset p = load_panel_csv(ok);
    CHECK(p.has_y0());
    CHECK(p.y0[0] == 1);
    const std::string bad = write_temp("y0bad.csv",
                                       "id,t,y,x1,y0\n"
                                       "1,1,0,0,1\n1,2,1,0,0\n");
    CHECK_THROWS_AS(load_panel_csv(bad), std::invalid_argument);
  }
}

TEST_CASE("bound function records round trip bitwise") {
  BoundFunction bf;
  bf.classes.members = {{0, 3}, {1, 2}};
  bf.classes.class_of = {0, 1, 1, 0};
  bf.ell = (Vector(2) << -0.123456789012345, 0.1).finished();
  bf.u = (Vector(2) << 0.3, 0.998877665544332).finished();
  bf.beta_anchor = {Vector::Constant(1, 1.0986122886681098)};
  bf.objective_kind = BoundObjective::Uniform;
  bf.refined = true;
  bf.b_min = -1.0;
  bf.b_max = 1.0;
  bf.z = ConditioningValue::static_cov((Matrix(2, 1) << 0.25, 1.75).finished());

  const BoundFunction back = bound_function_from_record(bound_function_record(bf));
  CHECK(back.ell == bf.ell);
  CHECK(back.u == bf.u);
  CHECK(back.classes.class_of == bf.classes.class_of);
  CHECK(back.beta_anchor[0] == bf.beta_anchor[0]);
  CHECK(back.z.x == bf.z.x);
  CHECK(back.refined == bf.refined);

  const std::string path = (temp_dir() / "bf.json").string();
  save_bound_functions({bf, back}, path);
  const std::vector<BoundFunction> loaded = load_bound_functions(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].u == bf.u);
}

TEST_CASE("sweep csv matches the golden fixture") {
  std::vector<SweepRow> rows(2);
  rows[0].param = -1.0;
  rows[0].summary = {.reps = 100,
                     .failures = 2,
                     .mean_L = -0.34653,
                     .mean_U = -0.04653,
                     .q_low = -0.40001,
                     .q_high = 0.0123,
                     .coverage = 0.97,
                     .ci_lower = -0.36,
                     .ci_upper = -0.03,
                     .m_true = -0.19673,
                     .m_true_se = 0.0004123};
  rows[1].param = 1.0;
  rows[1].summary = {.reps = 100,
                     .failures = 0,
                     .mean_L = 0.04653,
                     .mean_U = 0.34653,
                     .q_low = -0.0123,
                     .q_high = 0.40001,
                     .coverage = 1.0,
                     .ci_lower = 0.03,
                     .ci_upper = 0.36,
                     .m_true = 0.19673,
                     .m_true_se = 0.0004123};
  const std::string got = sweep_csv_text(rows);
  const std::string golden =
      read_text_file(std::string(PBOUNDS_TEST_DATA) + "/sweep_golden.csv");
  CHECK(got == golden);
}

TEST_CASE("cli: true effect of the zero-slope design prints zero") {
  const std::string out = (temp_dir() / "te.json").string();
  const int rc = run_cli(
      "true-effect --dgp static-discrete --beta0 0 --T 3 --draws 200000", out);
  CHECK(rc == 0);
  const nlohmann::json j = nlohmann::json::parse(read_text_file(out));
  CHECK(std::abs(j["result"]["value"].get<double>()) <= 1e-12);
  CHECK(j["schema_version"] == 1);
}

TEST_CASE("cli: simulate twice with one seed is byte-identical") {
  // identical invocations, so the embedded config echo matches too
  const std::string csv = (temp_dir() / "sim.csv").string();
  const std::string json = (temp_dir() / "sim.json").string();
  const std::string cmd =
      "simulate --dgp static-discrete --beta0 1 --T 2 --n 60 --reps 3 --seed 5 "
      "--grid-n 25 --csv " + csv + " --out " + json;
  const std::string log = (temp_dir() / "sim.log").string();
  CHECK(run_cli(cmd, log) == 0);
  const std::string csv_first = read_text_file(csv);
  const std::string json_first = read_text_file(json);
  CHECK(run_cli(cmd, log) == 0);
  CHECK(read_text_file(csv) == csv_first);
  CHECK(read_text_file(json) == json_first);
}

TEST_CASE("cli: degenerate variance warns but succeeds") {
  const std::string out = (temp_dir() / "degen.json").string();
  const int rc = run_cli(
      "infer --method theorem1 --dgp static-discrete --beta0 0 --T 2 --n 40 "
      "--grid-n 20",
      out);
  CHECK(rc == 0);
  const std::string text = read_text_file(out);
  CHECK(text.find("degenerate") != std::string::npos);
}

TEST_CASE("cli: bounds dump round trips through validate-bounds") {
  const std::string dump = (temp_dir() / "dump.json").string();
  const std::string out1 = (temp_dir() / "b.json").string();
  const std::string out2 = (temp_dir() / "v.json").string();
  CHECK(run_cli("bounds --dgp static-discrete --beta0 1 --T 2 --n 50 --seed 9 "
                "--grid-n 30 --method known --dump " + dump,
                out1) == 0);
  CHECK(run_cli("validate-bounds --dgp static-discrete --beta0 1 --T 2 --n 50 "
                "--seed 9 --grid-n 30 --bounds " + dump,
                out2) == 0);
  const nlohmann::json v = nlohmann::json::parse(read_text_file(out2));
  CHECK(v["result"]["max_violation"].get<double>() <= 1e-9);
  // re-reading the dump reproduces identical vectors
  const std::vector<BoundFunction> a = load_bound_functions(dump);
  const std::vector<BoundFunction> b = load_bound_functions(dump);
  REQUIRE(!a.empty());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].ell == b[i].ell);
    CHECK(a[i].u == b[i].u);
  }
}

TEST_CASE("cli: the effective config echo reproduces the run") {
  const std::string out1 = (temp_dir() / "echo1.json").string();
  const int rc = run_cli(
      "true-effect --dgp static-discrete --beta0 0.5 --T 3 --draws 50000", out1);
  REQUIRE(rc == 0);
  const nlohmann::json j1 = nlohmann::json::parse(read_text_file(out1));
  const std::string cfg =
      write_temp("echo.ini", j1["effective_config"].get<std::string>());
  const std::string out2 = (temp_dir() / "echo2.json").string();
  // the sectioned config selects the subcommand and carries every option
  REQUIRE(run_cli("--config " + cfg, out2) == 0);
  const nlohmann::json j2 = nlohmann::json::parse(read_text_file(out2));
  CHECK(j1["result"] == j2["result"]);
  CHECK(j1["effective_config"] == j2["effective_config"]);
}

TEST_CASE("cli: exit codes distinguish validation from numerical failures") {
  const std::string bad_csv = write_temp("cli_bad.csv", "id,t,y,x1\n1,1,2,0\n");
  const std::string out = (temp_dir() / "err.txt").string();
  CHECK(run_cli("bounds --panel " + bad_csv +
                " --effect discrete-shift --beta 1 --family static",
                out) == 2);
  CHECK(run_cli("bounds", out) == 2);  // neither panel nor dgp
  CHECK(run_cli("nonsense-subcommand", out) == 2);
}

TEST_CASE("cli: idset on population probabilities") {
  const std::string out = (temp_dir() / "idset.json").string();
  const int rc = run_cli(
      "idset --population --dgp static-discrete --beta0 0 --T 2 --grid-n 40", out);
  CHECK(rc == 0);
  const nlohmann::json j = nlohmann::json::parse(read_text_file(out));
  CHECK(std::abs(j["result"]["lower"].get<double>()) <= 1e-6);
  CHECK(std::abs(j["result"]["upper"].get<double>()) <= 1e-6);
  CHECK(j["result"]["cells"] == 4);
}
