#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lctvnumra.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lctvnumra;

namespace {

struct Run {
  int code;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Sandbox {
  fs::path dir;
  Sandbox() : dir(fs::temp_directory_path() / ("vnumra_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  Run run(const std::string& args) const {
    const auto out = dir / "stdout.txt";
    const std::string cmd = std::string(VNUMRA_CLI) + " " + args + " > " + out.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
  }
};

std::string demo(const std::string& name) { return std::string(LCTV_SOURCE_DIR) + "/demo/" + name; }

}  // namespace

TEST_CASE("validate-mask reports residuals") {
  Sandbox box;
  const auto r = box.run("validate-mask --mask " + demo("haar.json"));
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j.at("pass").get<bool>());
  REQUIRE(j.at("checks").size() == 3);
  for (const auto& c : j.at("checks")) CHECK(c.at("residual").get<double>() < 1e-12);

  const auto lb = box.run("validate-mask --mask " + demo("haar.json") + " --checks lower-bound");
  CHECK(lb.code == 0);
  CHECK(box.run("validate-mask --mask " + demo("haar.json") + " --checks bogus").code == 2);
  CHECK(box.run("validate-mask --mask " + demo("haar.json") + " --checks filterbank").code == 2);
}

TEST_CASE("build-wavelets writes a certified bank") {
  Sandbox box;
  const auto r = box.run("build-wavelets --mask " + demo("indicator_n2_m2.json") + " --out " + box.path("bank.json"));
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("wavelets").get<int>() == 3);
  const auto bank = io::load_bank(box.path("bank.json"));
  CHECK(check_filterbank(bank, make_grid(0, 1, 1024)).pass);
  const auto v = box.run("validate-mask --bank " + box.path("bank.json") + " --checks filterbank");
  CHECK(v.code == 0);
}

TEST_CASE("build caches a system that later commands reuse") {
  Sandbox box;
  const std::string sys = box.path("sys");
  const auto b = box.run("build --mask " + demo("indicator_n2_m2.json") + " --abcd 1,2,0,1 --grid 0,0.0078125,4096 " +
                         "--fine-level 2 --out " + sys);
  REQUIRE(b.code == 0);
  CHECK(json::parse(b.out).at("gram_deviation").get<double>() < 1e-3);
  for (const char* f : {"system.json", "phi_hat.vnmr", "phi.vnmr", "psi_1.vnmr", "psi_2.vnmr", "psi_3.vnmr",
                        "summary.json"})
    CHECK(fs::exists(fs::path(sys) / f));
  CHECK_FALSE(fs::exists(fs::path(sys) / "psi_4.vnmr"));
  const auto phi = io::decode_vnmr_matrix(slurp(fs::path(sys) / "phi.vnmr"));
  CHECK(phi.M() == 2);
  CHECK(phi.grid.count == 4096);

  const auto g = box.run("gram --system " + sys + " --band psi-2");
  REQUIRE(g.code == 0);
  CHECK(json::parse(g.out).at("deviation").get<double>() < 1e-3);

  REQUIRE(box.run("plot-data --system " + sys + " --band gram --out " + box.path("gram.csv")).code == 0);
  std::ifstream in(box.path("gram.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "i,j,re,im");
  std::map<std::pair<int, int>, cd> entries;
  while (std::getline(in, line)) {
    int i = 0, j = 0;
    double re = 0, im = 0;
    REQUIRE(std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &i, &j, &re, &im) == 4);
    entries[{i, j}] = cd(re, im);
  }
  CHECK(!entries.empty());
  for (const auto& [ij, v] : entries) CHECK(std::abs(v - std::conj(entries.at({ij.second, ij.first}))) < 1e-12);

  REQUIRE(box.run("plot-data --system " + sys + " --band psi-3 --out " + box.path("psi.csv")).code == 0);
  CHECK(slurp(box.path("psi.csv")).rfind("t,abs_00,abs_01,abs_10,abs_11\n", 0) == 0);
  CHECK(box.run("plot-data --system " + sys + " --band psi-4 --out " + box.path("x.csv")).code == 2);
}

TEST_CASE("transform and reconstruct round trip the demo signal") {
  Sandbox box;
  const std::string sys = box.path("sys");
  REQUIRE(box.run("build --mask " + demo("haar.json") + " --out " + sys).code == 0);
  const auto t = box.run("transform --system " + sys + " --signal " + demo("signal.csv") + " --levels 4 --out " +
                         box.path("pyr.json"));
  REQUIRE(t.code == 0);
  CHECK(json::parse(t.out).at("relative_error").get<double>() < 1e-12);
  CHECK(std::abs(json::parse(t.out).at("parseval_ratio").get<double>() - 1.0) < 1e-12);
  const auto r = box.run("reconstruct --system " + sys + " --pyramid " + box.path("pyr.json") + " --signal " +
                         demo("signal.csv") + " --out " + box.path("back.csv"));
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("relative_error").get<double>() < 1e-12);
  const auto back = io::load_signal(box.path("back.csv"));
  const auto ref = io::load_signal(demo("signal.csv"));
  CHECK((back.values - ref.values).norm() < 1e-12 * ref.values.norm());

  CHECK(box.run("transform --system " + sys + " --signal " + demo("signal.csv") + " --levels 7 --out " +
                box.path("p7.json"))
            .code == 1);
  CHECK(box.run("reconstruct --system " + box.path("absent") + " --pyramid " + box.path("pyr.json") + " --out " +
                box.path("x.csv"))
            .code == 2);
}

TEST_CASE("flags can come from a config file") {
  Sandbox box;
  {
    std::ofstream cfg(box.path("run.toml"));
    cfg << "[validate-mask]\nmask = \"" << demo("haar.json") << "\"\nchecks = \"normalization,frequency\"\n";
  }
  const auto r = box.run("--config " + box.path("run.toml") + " validate-mask");
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("checks").size() == 2);
  const auto over = box.run("--config " + box.path("run.toml") + " validate-mask --checks normalization");
  CHECK(json::parse(over.out).at("checks").size() == 1);
}

TEST_CASE("bad input maps to usage exit codes") {
  Sandbox box;
  {
    std::ofstream bad(box.path("bad.json"));
    bad << "{\"M\": 1,";
  }
  CHECK(box.run("validate-mask --mask " + box.path("bad.json")).code == 2);
  CHECK(box.run("validate-mask --mask " + box.path("none.json")).code == 2);
  CHECK(box.run("build --mask " + demo("haar.json") + " --iterations 0 --out " + box.path("s")).code == 2);
  CHECK(box.run("no-such-command").code == 2);
  CHECK(box.run("build --mask " + demo("haar.json") + " --grid 0,1 --out " + box.path("s")).code == 2);
}
