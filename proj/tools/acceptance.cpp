#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <unistd.h>

#include "angio/config.hpp"
#include "angio/errors.hpp"
#include "angio/verify.hpp"

#ifndef ANGIO_CLI_PATH
#define ANGIO_CLI_PATH "angio"
#endif

namespace fs = std::filesystem;
using namespace angio;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int invoke(const std::string& args) {
    const std::string cmd = fmt::format("'{}' {} > /dev/null 2>&1", ANGIO_CLI_PATH, args);
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Compares every CSV of two output directories byte for byte.
Outcome same_csvs(const fs::path& a, const fs::path& b) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a))
        if (e.path().extension() == ".csv") names.push_back(e.path().filename().string());
    std::size_t other = 0;
    for (const auto& e : fs::directory_iterator(b))
        if (e.path().extension() == ".csv") ++other;
    if (names.empty() || names.size() != other) return {false, fmt::format("{} vs {} CSV files", names.size(), other)};
    for (const std::string& n : names)
        if (slurp(a / n) != slurp(b / n)) return {false, n + " differs"};
    return {true, fmt::format("{} CSV files identical", names.size())};
}

Outcome determinism(const RunConfig& cfg) {
    const fs::path root = fs::temp_directory_path() / fmt::format("angio_acceptance_{}", ::getpid());
    fs::remove_all(root);
    fs::create_directories(root);
    struct Case {
        std::string name;
        std::size_t seeds;
        unsigned workers;
    };
    // Parallel across ensemble members, then inside a single run.
    const std::vector<Case> cases{{"ensemble", 3, 3}, {"single", 1, 4}};
    bool pass = true;
    std::string detail;
    for (const Case& c : cases) {
        const fs::path conf = root / (c.name + ".cfg");
        std::ofstream(conf) << fmt::format("seeds = {}\nseed = {}\n", c.seeds, cfg.seed);
        const fs::path a = root / (c.name + "_w1");
        const fs::path b = root / fmt::format("{}_w{}", c.name, c.workers);
        const int ra = invoke(fmt::format("simulate --config '{}' --out '{}' --workers 1", conf.string(), a.string()));
        const int rb = invoke(
            fmt::format("simulate --config '{}' --out '{}' --workers {}", conf.string(), b.string(), c.workers));
        const Outcome o = ra == 0 && rb == 0 ? same_csvs(a, b) : Outcome{false, fmt::format("exit codes {} and {}", ra, rb)};
        pass = pass && o.pass;
        detail += fmt::format("{}{} (workers 1 vs {}): {}", detail.empty() ? "" : "; ", c.name, c.workers, o.detail);
    }
    fs::remove_all(root);
    return {pass, detail};
}

}  // namespace

int main() {
    const RunConfig cfg = RunConfig::defaults(2);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"OU velocity moments", [&] { auto r = check_ou_moments(cfg); return Outcome{r.pass, r.summary}; }},
        {"maximum principle", [&] { auto r = check_max_principle(cfg); return Outcome{r.pass, r.summary}; }},
        {"tip-count domination", [&] { auto r = check_domination(cfg); return Outcome{r.pass, r.summary}; }},
        {"Wald identity", [&] { auto r = check_wald(cfg); return Outcome{r.pass, r.summary}; }},
        {"non-extinction", [&] { auto r = check_extinction(cfg); return Outcome{r.pass, r.summary}; }},
        {"mass identity", [&] { auto r = check_mass_identity(cfg); return Outcome{r.pass, r.summary}; }},
        {"martingale QV scaling", [&] { auto r = check_qv_scaling(cfg); return Outcome{r.pass, r.summary}; }},
        {"convergence to the mean-field limit", [&] { auto r = check_convergence(cfg); return Outcome{r.pass, r.summary}; }},
        {"OU semigroup gradient formula", [&] { auto r = check_semigroup(cfg); return Outcome{r.pass, r.summary}; }},
        {"thinning laws", [&] { auto r = check_thinning(cfg); return Outcome{r.pass, r.summary}; }},
        {"determinism across worker counts", [&] { return determinism(cfg); }},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failures;
        std::cout << fmt::format("{} criterion {}: {}: {} [{:.1f} s]", o.pass ? "PASS" : "FAIL", i + 1,
                                 criteria[i].first, o.detail, secs)
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
