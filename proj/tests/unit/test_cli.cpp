#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(HIERFDR_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hierfdr_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// n=200 rows, 30 genes, 5 factors; gene g1 carries a strong effect.
fs::path planted_csv(const fs::path& dir, double censor_prob = 0.0) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution cens(censor_prob);
  const fs::path path = dir / "data.csv";
  std::ofstream out(path);
  out << "time,status";
  for (int k = 1; k <= 5; ++k) out << ",e" << k;
  for (int g = 1; g <= 30; ++g) out << ",g" << g;
  out << "\n";
  out.precision(17);
  for (int i = 0; i < 200; ++i) {
    double z[5];
    double x[30];
    for (double& v : z) v = normal(rng);
    for (double& v : x) v = normal(rng);
    const double logt = 1.5 * x[0] + 0.5 * normal(rng);
    out << std::exp(logt) << "," << (cens(rng) ? 0 : 1);
    for (double v : z) out << "," << v;
    for (double v : x) out << "," << v;
    out << "\n";
  }
  return path;
}

const char* kColumns = "--time time --status status --z e1,e2,e3,e4,e5 --x '*'";

}  // namespace

TEST_CASE("analyze a planted signal") {
  const fs::path dir = scratch("analyze");
  const fs::path data = planted_csv(dir);
  const fs::path out = dir / "out";
  REQUIRE(run("analyze --data " + data.string() + " " + kColumns + " --lambda fixed:2 --seed 1 --threads 1 --out " +
              out.string()) == 0);
  const auto rej = nlohmann::json::parse(slurp(out / "rejections.json"));
  CHECK(rej["main_effect_labels"][0] == "g1");
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["command"] == "analyze");
  REQUIRE(manifest["inputs"].size() == 1);
  CHECK(manifest["inputs"][0]["sha256"].get<std::string>().size() == 64);
  const std::string coef = slurp(out / "coefficients.csv");
  CHECK(std::count(coef.begin(), coef.end(), '\n') == 1 + 30 + 31 * 5);

  // Nothing passes at alpha = 0 except through the fallback threshold.
  const fs::path zero = dir / "zero";
  REQUIRE(run("analyze --data " + data.string() + " " + kColumns + " --alpha 0 --seed 1 --out " + zero.string()) == 0);
  const auto rz = nlohmann::json::parse(slurp(zero / "rejections.json"));
  CHECK(rz["fallback_used"] == true);
}

TEST_CASE("malformed input leaves no outputs") {
  const fs::path dir = scratch("bad");
  const fs::path data = planted_csv(dir);
  {
    std::ofstream schema(dir / "schema.json");
    schema << "{\"time\": \"time\", \"status\": ";
  }
  const fs::path out = dir / "out";
  CHECK(run("analyze --data " + data.string() + " --schema " + (dir / "schema.json").string() + " --seed 1 --out " +
            out.string()) == 2);
  CHECK((!fs::exists(out) || fs::is_empty(out)));
  CHECK(run("analyze --data " + data.string() + " --time nope --status status --x '*' --out " + out.string()) != 0);
  CHECK((!fs::exists(out) || fs::is_empty(out)));
  CHECK(run("analyze --data " + data.string() + " " + kColumns) == 2);
  CHECK(run("frobnicate") == 2);
}

TEST_CASE("simulate sweeps and presets") {
  const fs::path dir = scratch("simulate");
  const fs::path out = dir / "sweep";
  REQUIRE(run("simulate --n 100 --d 15 --s-alpha 2 --replicates 5 --seed 4 --threads 1 --methods proposed,bh "
              "--sweep n=100,140 --out " +
              out.string()) == 0);
  const auto agg = nlohmann::json::parse(slurp(out / "aggregate.json"));
  REQUIRE(agg["studies"].size() == 2);
  for (const auto& study : agg["studies"]) CHECK(study["methods"].size() == 2);
  CHECK(fs::exists(out / "timing.json"));
  CHECK(fs::exists(out / "replicates_n_100.csv"));
  CHECK(fs::exists(out / "replicates_n_140.csv"));

  const fs::path large = dir / "large";
  REQUIRE(run("simulate --paper-scale --replicates 1 --methods bh --seed 4 --out " + large.string()) == 0);
  const auto cfg = nlohmann::json::parse(slurp(large / "manifest.json"))["config"]["simulation"];
  CHECK(cfg["n"] == 500);
  CHECK(cfg["d"] == 200);
  CHECK(cfg["q"] == 5);
  CHECK(cfg["s_alpha"] == 10);

  CHECK(run("simulate --config " + (dir / "missing.json").string() + " --out " + (dir / "x").string()) == 2);
  CHECK(run("simulate --sweep colour=1,2 --replicates 1 --out " + (dir / "y").string()) == 2);
}

TEST_CASE("inspect diagnostics") {
  const fs::path dir = scratch("inspect");
  const fs::path data = planted_csv(dir);
  const fs::path out = dir / "out";
  REQUIRE(run("inspect --what weights --data " + data.string() + " " + kColumns + " --out " + out.string()) == 0);
  std::istringstream weights(slurp(out / "weights.csv"));
  std::string line;
  std::getline(weights, line);
  int rows = 0;
  while (std::getline(weights, line)) {
    const double nw = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(nw == doctest::Approx(1.0));
    ++rows;
  }
  CHECK(rows == 200);

  REQUIRE(run("inspect --what ustats --lambda fixed:2 --data " + data.string() + " " + kColumns + " --out " +
              out.string()) == 0);
  const std::string u = slurp(out / "ustats.csv");
  CHECK(std::count(u.begin(), u.end(), '\n') == 1 + 30 + 31 * 5);

  REQUIRE(run("inspect --what gram-diag --data " + data.string() + " " + kColumns + " --out " + out.string()) == 0);
  std::istringstream gram(slurp(out / "gram-diag.csv"));
  std::getline(gram, line);
  while (std::getline(gram, line)) CHECK(std::stod(line.substr(line.rfind(',') + 1)) >= 0.0);

  CHECK(run("inspect --what everything --data " + data.string() + " " + kColumns + " --out " + out.string()) != 0);
}
