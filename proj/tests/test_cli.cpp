// Runs the command-line binary as a child process.

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "tidal_cli_tests";

struct Outcome {
  int code;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli(const std::string& args) {
  const fs::path err = kRoot / "stderr.txt";
  const std::string cmd = std::string(TIDAL_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

fs::path fresh(const std::string& name) {
  const fs::path dir = kRoot / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("synth, extract and detect end to end") {
  const auto d = fresh("e2e");
  const std::string c = (d / "cohort").string();
  REQUIRE(cli("synth --out " + c).code == 0);
  REQUIRE(cli("extract --signals " + c + "/signals --subjects " + c + "/subjects.csv --out " +
              (d / "f.csv").string())
              .code == 0);
  REQUIRE(cli("detect --features " + (d / "f.csv").string() + " --subjects " + c +
              "/subjects.csv --k 3 --knn-scaling zscore --out " + (d / "r.json").string())
              .code == 0);
  CHECK(slurp(d / "r.json").find("\"sensitivity\"") != std::string::npos);
}

TEST_CASE("empty signals directory exits with 2") {
  const auto d = fresh("empty");
  fs::create_directories(d / "signals");
  std::ofstream(d / "subjects.csv") << "subject_id,age_y,height_cm,weight_kg,bmi,fev1_l,fvc_l,fev1_fvc,fev1_pct_pred\n"
                                       "A,60,170,72.25,,2,3,,70\n";
  const auto r = cli("extract --signals " + (d / "signals").string() + " --subjects " +
                     (d / "subjects.csv").string() + " --out " + (d / "f.csv").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("io-error") != std::string::npos);
}

TEST_CASE("one corrupt signal among five warns and exits 0") {
  const auto d = fresh("corrupt");
  const std::string c = (d / "cohort").string();
  REQUIRE(cli("synth --n 5 --seed 2 --out " + c).code == 0);
  std::ofstream(d / "cohort" / "signals" / "S002.csv") << "time_s,force_n\n0,x\n";
  const auto r = cli("extract --signals " + c + "/signals --subjects " + c + "/subjects.csv --out " +
                     (d / "f.csv").string());
  CHECK(r.code == 0);
  CHECK(r.err.find("warning: subject S002") != std::string::npos);
  const auto rows = slurp(d / "f.csv");
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 5);
}

TEST_CASE("every subject failing exits with 3") {
  const auto d = fresh("allfail");
  const std::string c = (d / "cohort").string();
  REQUIRE(cli("synth --n 4 --duration-s 10 --out " + c).code == 0);
  const auto r = cli("extract --signals " + c + "/signals --subjects " + c + "/subjects.csv --out " +
                     (d / "f.csv").string());
  CHECK(r.code == 3);
}

TEST_CASE("bad parameters exit with 2, analysis failures with 3") {
  const auto d = fresh("params");
  const std::string c = (d / "cohort").string();
  REQUIRE(cli("synth --n 6 --out " + c).code == 0);
  const std::string io = " --features " + c + "/truth.csv --subjects " + c + "/subjects.csv --out " +
                         (d / "r.json").string();
  CHECK(cli("detect" + io + " --k 9").code == 2);
  CHECK(cli("detect" + io + " --knn-scaling minmax").code == 2);
  CHECK(cli("fit" + io + " --target fvc_l --rmse-denominator n-1").code == 2);
  CHECK(cli("detect --features x.csv").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("stage" + io).code == 3);

  const auto single = (d / "single").string();
  REQUIRE(cli("synth --n 6 --obstructed-fraction 1 --out " + single).code == 0);
  CHECK(cli("detect --features " + single + "/truth.csv --subjects " + single + "/subjects.csv --out " +
            (d / "s.json").string())
            .code == 3);
}

TEST_CASE("replay reproduces byte-identical output") {
  const auto d = fresh("replay");
  const std::string c = (d / "cohort").string();
  REQUIRE(cli("synth --seed 5 --noise-sd 6 --out " + c).code == 0);
  const std::string io = " --features " + c + "/truth.csv --subjects " + c + "/subjects.csv";
  REQUIRE(cli("stage" + io + " --out " + (d / "s.json").string()).code == 0);
  const auto first = slurp(d / "s.json");
  REQUIRE(cli("replay " + (d / "s.json.manifest.json").string()).code == 0);
  CHECK(slurp(d / "s.json") == first);
  CHECK(cli("replay " + (d / "missing.json").string()).code == 2);
}

TEST_CASE("synth through the CLI is deterministic") {
  const auto d = fresh("synth");
  REQUIRE(cli("synth --n 5 --seed 8 --out " + (d / "a").string()).code == 0);
  REQUIRE(cli("synth --n 5 --seed 8 --out " + (d / "b").string()).code == 0);
  for (const char* f : {"subjects.csv", "truth.csv", "signals/S004.csv"}) {
    CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
  }
}
