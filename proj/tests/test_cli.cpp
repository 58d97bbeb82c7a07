#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include <unistd.h>

#include "doctest.h"

#include "angio/cli.hpp"

namespace fs = std::filesystem;
using angio::cli_main;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("angio_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_cfg(const TempDir& d, const std::string& name, const std::string& text) {
    const fs::path p = d.path / name;
    std::ofstream(p) << text;
    return p;
}

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream o, e;
    const int code = cli_main(args, o, e);
    return {code, o.str(), e.str()};
}

const char* kQuietLine =
    "dim = 1\nN = 1\nT = 0.5\ndt = 0.01\noutput_dt = 0.1\nalpha1 = 0\nbeta1 = 0\ngamma = 0\n";

}  // namespace

TEST_CASE("simulate writes its files and is reproducible") {
    TempDir d;
    const fs::path cfg = write_cfg(d, "a.cfg", kQuietLine);
    const fs::path a = d.path / "a", b = d.path / "b";
    const Run r1 = run({"simulate", "--config", cfg.string(), "--out", a.string(), "--seed", "7"});
    REQUIRE(r1.code == 0);
    const Run r2 = run({"simulate", "--config", cfg.string(), "--out", b.string(), "--seed", "7"});
    REQUIRE(r2.code == 0);
    for (const char* f : {"run_000_counts.csv", "run_000_tips.csv", "run_000_events.csv", "counts_summary.csv"}) {
        CHECK(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const std::string counts = slurp(a / "run_000_counts.csv");
    CHECK(counts.rfind("step,t,alive,mass\n0,0,1,1\n", 0) == 0);
    const json m = json::parse(slurp(a / "manifest.json"));
    CHECK(m["command"] == "simulate");
    CHECK(m["exit_code"] == 0);
    CHECK(m["master_seed"] == 7);
    CHECK(m["config_hash"].get<std::string>().size() == 16);
    const auto files = m["files"].get<std::vector<std::string>>();
    CHECK(std::find(files.begin(), files.end(), "run_000_tips.csv") != files.end());
}

TEST_CASE("meanfield with no sources keeps the mass constant") {
    TempDir d;
    const fs::path cfg = write_cfg(d, "m.cfg", std::string(kQuietLine) + "self_convergence = false\n");
    const fs::path o = d.path / "o";
    const Run r = run({"meanfield", "--config", cfg.string(), "--out", o.string()});
    REQUIRE(r.code == 0);
    std::istringstream mass(slurp(o / "mass.csv"));
    std::string line;
    std::getline(mass, line);
    CHECK(line == "step,t,mass");
    int rows = 0;
    while (std::getline(mass, line)) {
        const double m = std::stod(line.substr(line.rfind(',') + 1));
        CHECK(m == doctest::Approx(1.0).epsilon(1e-6));
        ++rows;
    }
    CHECK(rows > 1);
    CHECK(fs::exists(o / "marginals.csv"));
    CHECK(fs::exists(o / "mass_check.csv"));
}

TEST_CASE("meanfield rejects three dimensions") {
    TempDir d;
    const fs::path cfg = write_cfg(d, "m3.cfg", "dim = 3\n");
    const Run r = run({"meanfield", "--config", cfg.string(), "--out", (d.path / "o").string()});
    CHECK(r.code == angio::exit_usage);
    CHECK(r.err.find("mean-field grid supports d ≤ 2") != std::string::npos);
    const json m = json::parse(slurp(d.path / "o" / "manifest.json"));
    CHECK(m["exit_code"] == 1);
}

TEST_CASE("converge with one population size reports no slope") {
    TempDir d;
    const fs::path cfg = write_cfg(d, "c.cfg",
                                   std::string(kQuietLine) + "n_list = 5\nconvergence_seeds = 2\nself_convergence = false\n");
    const fs::path o = d.path / "o";
    const Run r = run({"converge", "--config", cfg.string(), "--out", o.string()});
    REQUIRE(r.code == 0);
    const std::string slope = slurp(o / "convergence_slope.csv");
    CHECK(slope.find("empirical,N/A") != std::string::npos);
    CHECK(slope.find("non-paper diagnostic") != std::string::npos);
}

TEST_CASE("converge against a reference of another dimension is rejected") {
    TempDir d;
    const fs::path cfg = write_cfg(d, "c.cfg", std::string(kQuietLine) + "n_list = 5\nreference_dim = 2\n");
    const Run r = run({"converge", "--config", cfg.string(), "--out", (d.path / "o").string()});
    CHECK(r.code == angio::exit_usage);
}

TEST_CASE("verify runs a selected check") {
    TempDir d;
    const fs::path cfg = write_cfg(d, "v.cfg", "wald_trials = 2000\nwald_seeds = 2\n");
    const fs::path o = d.path / "o";
    const Run r = run({"verify", "--config", cfg.string(), "--out", o.string(), "--only", "wald"});
    CHECK(r.code == 0);
    CHECK(fs::exists(o / "verify_wald.csv"));
    const json s = json::parse(slurp(o / "verify_summary.json"));
    REQUIRE(s.size() == 1);
    CHECK(s[0]["check"] == "wald");
    CHECK(s[0]["pass"] == true);
}

TEST_CASE("usage errors exit with code 1") {
    TempDir d;
    CHECK(run({"verify", "--only", "nonsense", "--out", (d.path / "a").string()}).code == angio::exit_usage);
    CHECK(run({"simulate", "--bogus"}).code == angio::exit_usage);
    CHECK(run({}).code == angio::exit_usage);
    CHECK(run({"simulate", "--config", (d.path / "missing.cfg").string(), "--out", (d.path / "b").string()}).code ==
          angio::exit_usage);
    const fs::path bad = write_cfg(d, "bad.cfg", "gamma = -0.5\n");
    const Run r = run({"simulate", "--config", bad.string(), "--out", (d.path / "c").string()});
    CHECK(r.code == angio::exit_usage);
    CHECK(r.err.find("gamma >= 0") != std::string::npos);
}
