#include "angio/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <fmt/core.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "angio/analysis.hpp"
#include "angio/config.hpp"
#include "angio/errors.hpp"
#include "angio/parallel.hpp"
#include "angio/stats.hpp"
#include "angio/verify.hpp"

#ifndef ANGIO_VERSION
#define ANGIO_VERSION "unknown"
#endif

namespace angio {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

/// A failure that should exit with `code` after the manifest is written.
struct CommandError : std::runtime_error {
    int code;
    CommandError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Collects output files; everything is written at the end by one writer.
struct Output {
    std::vector<std::pair<std::string, std::string>> files;
    std::vector<CheckResult> checks;
    json extra = json::object();
    std::vector<std::string> warnings;

    void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError(fmt::format("cannot write '{}'", p.string()));
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw ConfigError(fmt::format("cannot write '{}'", p.string()));
}

json summary_json(const std::vector<CheckResult>& checks) {
    json arr = json::array();
    for (const CheckResult& c : checks)
        arr.push_back({{"check", c.check}, {"statistic", c.statistic}, {"tolerance", c.tolerance}, {"pass", c.pass}});
    return arr;
}

std::string pad(std::size_t i) { return fmt::format("{:03}", i); }

// ---------------------------------------------------------------- simulate

void cmd_simulate(const RunConfig& cfg, Output& out) {
    SimulationSetup s = cfg.setup;
    s.record_fields = false;
    s.workers = cfg.seeds > 1 ? 1 : cfg.workers;
    const unsigned outer = cfg.seeds > 1 ? cfg.workers : 1;
    std::vector<TrajectoryRecord> runs(cfg.seeds);
    std::vector<std::string> failures(cfg.seeds);
    parallel_for(cfg.seeds, outer, [&](std::size_t i) {
        const std::uint64_t seed = ensemble_seed(cfg.seed, s.n_tips, i);
        try {
            runs[i] = run(s, seed);
        } catch (const NumericalError& e) {
            failures[i] = fmt::format("run {} (seed {}): {}", i, seed, e.what());
        }
    });
    for (const std::string& f : failures)
        if (!f.empty()) throw CommandError(exit_numerical, f);

    const int d = s.params.dim;
    json run_list = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const TrajectoryRecord& r = runs[i];
        Table counts{{"step", "t", "alive", "mass"}, {}};
        for (std::size_t k = 0; k < r.times.size(); ++k)
            counts.rows.push_back({std::to_string(k), num(r.times[k]), std::to_string(r.counts[k]),
                                   num(static_cast<double>(r.counts[k]) / static_cast<double>(r.n0))});
        Table tips{{"t", "id", "alive"}, {}};
        for (int a = 0; a < d; ++a) tips.header.push_back(fmt::format("x{}", a));
        for (int a = 0; a < d; ++a) tips.header.push_back(fmt::format("v{}", a));
        for (const Snapshot& snap : r.snapshots)
            for (const TipRow& row : snap.rows) {
                std::vector<std::string> cells{num(snap.t), std::to_string(row.id), row.alive ? "1" : "0"};
                for (int a = 0; a < d; ++a) cells.push_back(num(row.x[static_cast<std::size_t>(a)]));
                for (int a = 0; a < d; ++a) cells.push_back(num(row.v[static_cast<std::size_t>(a)]));
                tips.rows.push_back(std::move(cells));
            }
        Table events{{"t", "kind", "parent", "child"}, {}};
        for (int a = 0; a < d; ++a) events.header.push_back(fmt::format("x{}", a));
        for (const Event& e : r.events) {
            const char* kind = e.kind == EventKind::tip_branch      ? "tip_branch"
                               : e.kind == EventKind::vessel_branch ? "vessel_branch"
                                                                    : "anastomosis";
            std::vector<std::string> cells{num(e.t), kind, std::to_string(e.parent), std::to_string(e.child)};
            for (int a = 0; a < d; ++a) cells.push_back(num(e.x[static_cast<std::size_t>(a)]));
            events.rows.push_back(std::move(cells));
        }
        const std::string stem = "run_" + pad(i);
        out.add(stem + "_counts.csv", csv_text(counts));
        out.add(stem + "_tips.csv", csv_text(tips));
        out.add(stem + "_events.csv", csv_text(events));
        run_list.push_back({{"index", i},
                            {"seed", r.seed},
                            {"files", {stem + "_counts.csv", stem + "_tips.csv", stem + "_events.csv"}},
                            {"final_alive", r.counts.back()},
                            {"sup_mass", r.sup_mass()},
                            {"min_mass", r.min_mass()},
                            {"bound_violations", r.diag.bound_violations},
                            {"warnings", r.diag.warnings}});
        for (const std::string& w : r.diag.warnings) out.warnings.push_back(fmt::format("run {}: {}", i, w));
    }

    Table summary{{"t", "mean_mass", "se_mass", "min_mass", "max_mass"}, {}};
    const std::size_t steps = runs.front().times.size();
    for (std::size_t k = 0; k < steps; ++k) {
        RunningStats st;
        double lo = 1e300, hi = -1e300;
        for (const TrajectoryRecord& r : runs) {
            const double m = static_cast<double>(r.counts[k]) / static_cast<double>(r.n0);
            st.add(m);
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
        summary.rows.push_back({num(runs.front().times[k]), num(st.mean()), num(runs.size() > 1 ? st.se() : 0.0),
                                num(lo), num(hi)});
    }
    out.add("counts_summary.csv", csv_text(summary));
    out.extra["runs"] = run_list;
}

// ---------------------------------------------------------------- meanfield

void cmd_meanfield(const RunConfig& cfg, Output& out) {
    const MeanFieldConfig mc = cfg.meanfield_config();
    mc.validate();
    const MeanFieldResult r = solve_system(mc);
    const int d = r.x.dim;

    Table mass{{"step", "t", "mass"}, {}};
    for (std::size_t k = 0; k < r.times.size(); ++k)
        mass.rows.push_back({std::to_string(k), num(r.times[k]), num(r.mass[k])});
    Table check{{"t", "dmdt", "rhs", "residual", "estimate"}, {}};
    for (const MassCheckRow& row : r.mass_check)
        check.rows.push_back({num(row.t), num(row.dmdt), num(row.rhs), num(row.residual), num(row.estimate)});
    Table marg{{"t"}, {}};
    for (int a = 0; a < d; ++a) marg.header.push_back(fmt::format("x{}", a));
    for (const char* h : {"pi1", "tilde", "c"}) marg.header.emplace_back(h);
    for (const MeanFieldSnapshot& s : r.snapshots)
        for (std::size_t i = 0; i < r.x.size(); ++i) {
            std::vector<std::string> cells{num(s.t)};
            const Vec x = r.x.node(i);
            for (int a = 0; a < d; ++a) cells.push_back(num(x[static_cast<std::size_t>(a)]));
            cells.push_back(num(s.pi1[i]));
            cells.push_back(num(s.tilde[i]));
            cells.push_back(num(s.c[i]));
            marg.rows.push_back(std::move(cells));
        }
    out.add("mass.csv", csv_text(mass));
    out.add("mass_check.csv", csv_text(check));
    out.add("marginals.csv", csv_text(marg));

    double worst = 0.0;
    for (const MassCheckRow& row : r.mass_check) worst = std::max(worst, row.residual / row.estimate);
    out.extra["meanfield"] = {{"label", r.label},
                              {"dt", r.dt},
                              {"x_cells", r.x.size()},
                              {"v_cells", r.v.size()},
                              {"v_max", r.v.v_max},
                              {"final_mass", r.final_mass()},
                              {"min_rho", r.min_rho},
                              {"max_v_leak_rate", r.max_v_leak_rate},
                              {"v_leak", r.v_leak},
                              {"x_leak", r.x_leak},
                              {"history_monotone", r.history_monotone},
                              {"field_bounds_ok", r.field_bounds.ok},
                              {"max_mass_residual_ratio", worst}};
    for (const std::string& w : r.warnings) out.warnings.push_back(w);

    if (cfg.self_convergence) {
        const SelfConvergence sc = self_convergence(mc);
        Table t{{"quantity", "value"},
                {{"coarse_mass", num(sc.coarse)},
                 {"fine_mass", num(sc.fine)},
                 {"relative_change", num(sc.relative_change)},
                 {"tolerance", num(mc.convergence_tolerance)},
                 {"pass", sc.pass ? "true" : "false"}}};
        out.add("self_convergence.csv", csv_text(t));
        out.checks.push_back(CheckResult{"self_convergence", sc.relative_change, mc.convergence_tolerance, sc.pass,
                                         "", {}, {}});
        if (!sc.pass)
            throw CommandError(exit_verification,
                               fmt::format("self-convergence change {:.4g} exceeds {}", sc.relative_change,
                                           mc.convergence_tolerance));
    }
}

// ---------------------------------------------------------------- converge

void cmd_converge(const RunConfig& cfg, Output& out) {
    const int ref_dim = cfg.reference_dim == 0 ? cfg.setup.params.dim : cfg.reference_dim;
    MeanFieldConfig mc = cfg.meanfield_config();
    if (ref_dim != cfg.setup.params.dim) {
        MeanFieldConfig other = MeanFieldConfig::desk(std::min(ref_dim, 2));
        other.setup = SimulationSetup::desk(ref_dim);
        other.setup.params = cfg.setup.params;
        other.setup.params.dim = ref_dim;
        other.setup.T = cfg.setup.T;
        other.setup.output_dt = cfg.setup.output_dt;
        other.workers = cfg.workers;
        mc = other;
    }
    mc.validate();
    const MeanFieldResult ref = solve_system(mc);
    const SimulationSetup& s = cfg.setup;
    const TestFunctionDictionary dict(s.params.dim, s.domain, s.dict_vmax, s.dict_size);
    const ConvergenceTable t =
        convergence_study(s, ref, cfg.n_list, cfg.convergence_seeds, cfg.seed, dict, cfg.workers, true);

    Table rows{{"n", "mean", "se", "resampled_mean", "resampled_se"}, {}};
    Table per_seed{{"n", "seed_index", "sup_metric", "resampled_sup_metric"}, {}};
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        rows.rows.push_back({std::to_string(t.rows[i].n), num(t.rows[i].mean), num(t.rows[i].se),
                             num(t.resampled[i].mean), num(t.resampled[i].se)});
        for (std::size_t k = 0; k < t.rows[i].values.size(); ++k)
            per_seed.rows.push_back({std::to_string(t.rows[i].n), std::to_string(k), num(t.rows[i].values[k]),
                                     num(t.resampled[i].values[k])});
    }
    auto slope_row = [](const char* series, const std::optional<double>& v) -> std::vector<std::string> {
        const bool in = v && *v >= ConvergenceTable::kSlopeLow && *v <= ConvergenceTable::kSlopeHigh;
        return {series, v ? num(*v) : "N/A", num(ConvergenceTable::kSlopeLow), num(ConvergenceTable::kSlopeHigh),
                v ? (in ? "true" : "false") : "N/A", "non-paper diagnostic"};
    };
    Table slope{{"series", "slope", "expected_low", "expected_high", "in_range", "label"},
                {slope_row("empirical", t.slope), slope_row("resampled", t.resampled_slope)}};
    out.add("convergence.csv", csv_text(rows));
    out.add("convergence_seeds.csv", csv_text(per_seed));
    out.add("convergence_slope.csv", csv_text(slope));
    out.extra["convergence"] = {{"decreasing", t.decreasing}, {"reference", ref.label}};
    std::size_t breaks = 0;
    for (std::size_t i = 1; i < t.rows.size(); ++i)
        if (!(t.rows[i].mean < t.rows[i - 1].mean + t.rows[i].se + t.rows[i - 1].se)) ++breaks;
    out.checks.push_back(CheckResult{"convergence", static_cast<double>(breaks), 0.0, t.decreasing, "", {}, {}});
}

// ---------------------------------------------------------------- verify

void cmd_verify(const RunConfig& cfg, const std::vector<std::string>& only, Output& out, std::ostream& log) {
    std::vector<std::string> names = only.empty() ? check_names() : only;
    for (const std::string& n : names)
        if (std::find(check_names().begin(), check_names().end(), n) == check_names().end())
            throw ConfigError(fmt::format("unknown check '{}'", n));
    bool all = true;
    for (const std::string& n : names) {
        CheckResult r = run_check(n, cfg);
        log << fmt::format("{} {}: {}\n", r.pass ? "PASS" : "FAIL", r.check, r.summary);
        out.add("verify_" + r.check + ".csv", csv_text(r.table));
        json values = json::object();
        for (const auto& [k, v] : r.values) values[k] = v;
        out.extra["details"][r.check] = {{"summary", r.summary}, {"values", values}};
        all = all && r.pass;
        out.checks.push_back(std::move(r));
    }
    out.add("verify_summary.json", summary_json(out.checks).dump(2) + "\n");
    if (!all) throw CommandError(exit_verification, "verification failed");
}

struct Flags {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    unsigned workers = 1;
    std::vector<std::string> only;
};

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stochastic tip-cell angiogenesis simulator, mean-field solver and verification suite"};
    app.require_subcommand(1);
    Flags f;
    std::map<std::string, CLI::Option*> seed_opt, out_opt, workers_opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "flat key = value configuration file");
        seed_opt[sub->get_name()] = sub->add_option("--seed", f.seed, "master seed (overrides the config)");
        out_opt[sub->get_name()] = sub->add_option("--out", f.out, "output directory (overrides the config)");
        workers_opt[sub->get_name()] =
            sub->add_option("--workers", f.workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    };
    CLI::App* sim = app.add_subcommand("simulate", "stochastic ensemble: per-run CSVs and an N_t summary");
    CLI::App* mf = app.add_subcommand("meanfield", "mean-field grid solve: M_t, mass check and marginals");
    CLI::App* conv = app.add_subcommand("converge", "dictionary metric between ensembles and the mean-field limit");
    CLI::App* ver = app.add_subcommand("verify", "theorem-check suite with a JSON pass/fail summary");
    for (CLI::App* sub : {sim, mf, conv, ver}) add_common(sub);
    ver->add_option("--only", f.only, "run only these checks (repeatable or comma-separated)")->delimiter(',');

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return exit_usage;
    }
    CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();

    RunConfig cfg;
    try {
        cfg = f.config.empty() ? RunConfig::defaults() : parse_config(f.config);
        if (seed_opt[name]->count()) cfg.seed = f.seed;
        if (out_opt[name]->count()) cfg.out = f.out;
        if (workers_opt[name]->count()) cfg.workers = f.workers;
        cfg.validate();
        std::error_code ec;
        fs::create_directories(cfg.out, ec);
        if (ec || !fs::is_directory(cfg.out))
            throw ConfigError(fmt::format("output directory '{}' is not writable", cfg.out));
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }

    const std::string started = utc_now();
    Output o;
    int code = exit_ok;
    std::string error;
    try {
        if (name == "simulate") cmd_simulate(cfg, o);
        else if (name == "meanfield") cmd_meanfield(cfg, o);
        else if (name == "converge") cmd_converge(cfg, o);
        else cmd_verify(cfg, f.only, o, out);
    } catch (const CommandError& e) {
        code = e.code;
        error = e.what();
    } catch (const ConfigError& e) {
        code = exit_usage;
        error = e.what();
    } catch (const std::invalid_argument& e) {
        code = exit_usage;
        error = e.what();
    } catch (const NumericalError& e) {
        code = exit_numerical;
        error = e.what();
    } catch (const std::exception& e) {
        code = exit_numerical;
        error = e.what();
    }

    json manifest;
    manifest["command"] = name;
    manifest["code_version"] = ANGIO_VERSION;
    manifest["config_hash"] = fmt::format("{:016x}", cfg.hash());
    manifest["master_seed"] = cfg.seed;
    manifest["started_utc"] = started;
    manifest["finished_utc"] = utc_now();
    json echo = json::object();
    for (const auto& [k, v] : cfg.echo()) echo[k] = v;
    manifest["config"] = echo;
    json files = json::array();
    for (const auto& [fname, content] : o.files) files.push_back(fname);
    manifest["files"] = files;
    manifest["checks"] = summary_json(o.checks);
    for (auto it = o.extra.begin(); it != o.extra.end(); ++it) manifest[it.key()] = it.value();
    manifest["warnings"] = o.warnings;
    manifest["exit_code"] = code;
    if (!error.empty()) manifest["error"] = error;

    try {
        const fs::path dir(cfg.out);
        for (const auto& [fname, content] : o.files) write_file(dir / fname, content);
        write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    for (const std::string& w : o.warnings) err << "warning: " << w << "\n";
    if (!error.empty()) err << "error: " << error << "\n";
    return code;
}

}  // namespace angio
