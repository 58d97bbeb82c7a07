#include "angio/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include <fmt/core.h>

#include "angio/analysis.hpp"
#include "angio/parallel.hpp"
#include "angio/stats.hpp"

namespace angio {

std::string csv_text(const Table& t) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return out;
}

std::string num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return fmt::format("{}", x);
}

namespace {

std::string yes(bool b) { return b ? "true" : "false"; }

std::uint64_t check_seed(const RunConfig& cfg, std::string_view name) { return mix64(cfg.seed ^ fnv1a64(name)); }

SimulationSetup lean(SimulationSetup s) {
    s.record_fields = false;
    s.record_snapshots = false;
    s.check_bounds = false;
    s.workers = 1;
    return s;
}

/// Setup with motion only: no field coupling, no events.
SimulationSetup quiet(const SimulationSetup& base, std::size_t n) {
    SimulationSetup s = base;
    s.n_tips = n;
    s.max_tips = std::max<std::size_t>(s.max_tips, 20 * n);
    s.params.sigma = 0.0;
    s.params.d2 = 0.0;
    s.params.alpha1 = s.params.beta1 = s.params.gamma = 0.0;
    s.params.g0 = 1.0;
    s.record_fields = false;
    return s;
}

Vec centre(const Box& b) {
    Vec c;
    for (int a = 0; a < b.dim; ++a) {
        const auto k = static_cast<std::size_t>(a);
        c[k] = 0.5 * (b.lo[k] + b.hi[k]);
    }
    return c;
}

}  // namespace

SimulationSetup line_setup(const RunConfig& cfg) {
    if (cfg.setup.params.dim == 1) return cfg.setup;
    SimulationSetup s = SimulationSetup::desk(1);
    const SimulationSetup& c = cfg.setup;
    s.params = c.params;
    s.params.dim = 1;
    s.n_tips = c.n_tips;
    s.dt = c.dt;
    s.T = c.T;
    s.output_dt = c.output_dt;
    s.tumor_width = c.tumor_width;
    s.c0_length = c.c0_length;
    s.offspring_spread = c.offspring_spread;
    s.k1_radius = c.k1_radius;
    s.k1_mass = c.k1_mass;
    s.k2_radius = c.k2_radius;
    s.k2_mass = c.k2_mass;
    s.diffusion = c.diffusion;
    s.dict_size = c.dict_size;
    s.dict_vmax = c.dict_vmax;
    return s;
}

MeanFieldConfig line_meanfield(const RunConfig& cfg) {
    if (cfg.setup.params.dim == 1) return cfg.meanfield_config();
    MeanFieldConfig m = MeanFieldConfig::desk(1);
    m.setup = line_setup(cfg);
    m.safety = cfg.meanfield.safety;
    m.leak_tolerance = cfg.meanfield.leak_tolerance;
    m.convergence_tolerance = cfg.meanfield.convergence_tolerance;
    m.workers = cfg.workers;
    return m;
}

CheckResult check_ou_moments(const RunConfig& cfg) {
    SimulationSetup s = quiet(cfg.setup, cfg.verify.ou_tips);
    s.params.k1 = 1.0;
    s.params.sigma = 1.0;
    s.k1_mass = 0.0;
    s.T = cfg.verify.ou_T;
    TipSystem sys(s, check_seed(cfg, "ou_moments"));
    const auto steps = static_cast<std::size_t>(std::llround(s.T / s.dt));
    for (std::size_t n = 0; n < steps; ++n) sys.em_step(s.dt);

    const double target = s.params.sigma * s.params.sigma / (2.0 * s.params.k1);
    CheckResult r{"ou_moments", 0.0, 3.0, true, "", {}, {{"component", "variance", "target", "se", "z"}, {}}};
    for (int a = 0; a < s.params.dim; ++a) {
        RunningStats st;
        for (const Tip& t : sys.tips()) st.add(t.v[static_cast<std::size_t>(a)]);
        const double se = target * std::sqrt(2.0 / static_cast<double>(st.count() - 1));
        const double z = std::abs(st.variance() - target) / se;
        r.statistic = std::max(r.statistic, z);
        r.table.rows.push_back({std::to_string(a), num(st.variance()), num(target), num(se), num(z)});
        r.values.emplace_back(fmt::format("variance_{}", a), st.variance());
    }
    r.pass = r.statistic <= r.tolerance;
    r.summary = fmt::format("max |var - {}| / se = {:.3f} over {} tips at T = {}", target, r.statistic,
                            sys.tips().size(), s.T);
    return r;
}

CheckResult check_max_principle(const RunConfig& cfg) {
    SimulationSetup s = cfg.setup;
    s.record_fields = false;
    s.record_snapshots = false;
    s.check_bounds = true;
    s.workers = cfg.workers;
    const TrajectoryRecord rec = run(s, check_seed(cfg, "max_principle"));
    const RunDiagnostics& d = rec.diag;
    CheckResult r{"max_principle", static_cast<double>(d.bound_violations), 0.0, d.bound_violations == 0, "", {},
                  {{"quantity", "value"}, {}}};
    r.table.rows = {{"violations", std::to_string(d.bound_violations)},
                    {"max_c", num(d.max_c)},
                    {"max_bound_ratio", num(d.max_bound_ratio)},
                    {"strict_c_max_holds", yes(d.strict_bound_holds)},
                    {"steps", std::to_string(rec.times.size() - 1)}};
    r.values = {{"max_c", d.max_c}, {"max_bound_ratio", d.max_bound_ratio}};
    r.summary = fmt::format("{} violations of 0 <= C <= C_max + k2 |delta_A| t; max C / bound = {:.4f}",
                            d.bound_violations, d.max_bound_ratio);
    if (d.first_violation)
        r.summary += fmt::format("; first at t = {} node {}", d.first_violation_t, d.first_violation->node);
    return r;
}

CheckResult check_domination(const RunConfig& cfg) {
    const SimulationSetup s = lean(cfg.setup);
    const std::size_t n = cfg.verify.domination_seeds;
    const std::uint64_t master = check_seed(cfg, "domination");
    std::vector<double> sup(n);
    parallel_for(n, cfg.workers, [&](std::size_t i) { sup[i] = run(s, ensemble_seed(master, s.n_tips, i)).sup_mass(); });
    const DominatingParams dp = DominatingParams::from(s.params, s.offspring_law(), s.T);
    const RateEstimate lambda = estimate_rate(dp, cfg.verify.lambda_draws, mix64(master + 1), cfg.workers);
    const DominationReport d = domination_check(sup, lambda, s.T);
    CheckResult r{"domination", d.mean_sup, d.bound + 3.0 * d.se_sup, d.pass, "", {}, {{"seed", "sup_mass"}, {}}};
    for (std::size_t i = 0; i < n; ++i) r.table.rows.push_back({std::to_string(i), num(sup[i])});
    r.values = {{"mean_sup", d.mean_sup}, {"se_sup", d.se_sup}, {"lambda", lambda.mean},
                {"lambda_se", lambda.se}, {"bound", d.bound}, {"C", dp.C}};
    r.summary = fmt::format("mean sup N_t/N = {:.4f} (se {:.4f}) vs e^(lambda T) = {:.4f}, lambda = {:.4f} (se {:.4f})",
                            d.mean_sup, d.se_sup, d.bound, lambda.mean, lambda.se);
    return r;
}

CheckResult check_wald(const RunConfig& cfg) {
    const DominatingParams dp = DominatingParams::from(cfg.setup.params, cfg.setup.offspring_law(), cfg.setup.T);
    const std::uint64_t master = check_seed(cfg, "wald");
    CheckResult r{"wald", 0.0, 3.0, true, "", {},
                  {{"seed", "mean_sum_z", "mean_z", "mean_n", "discrepancy", "se", "z", "pass"}, {}}};
    for (std::size_t k = 0; k < cfg.verify.wald_seeds; ++k) {
        const WaldReport w = wald_check(dp, cfg.verify.wald_trials, ensemble_seed(master, cfg.verify.wald_trials, k), cfg.workers);
        const double z = w.se > 0.0 ? std::abs(w.discrepancy) / w.se : 0.0;
        r.statistic = std::max(r.statistic, z);
        r.pass = r.pass && w.pass;
        r.table.rows.push_back({std::to_string(k), num(w.mean_sum_z), num(w.mean_z), num(w.mean_n),
                                num(w.discrepancy), num(w.se), num(z), yes(w.pass)});
    }
    r.summary = fmt::format("max |E[sum Z] - E[Z] E[N]| / se = {:.3f} over {} master seeds of {} trials",
                            r.statistic, cfg.verify.wald_seeds, cfg.verify.wald_trials);
    return r;
}

CheckResult check_extinction(const RunConfig& cfg) {
    const MeanFieldConfig mc = line_meanfield(cfg);
    const MeanFieldResult mf = solve_system(mc);
    const double gamma = mc.setup.params.gamma;
    const double m0 = mf.mass.front();
    std::size_t violations = 0;
    double min_margin = 1e300;
    for (const MeanFieldSnapshot& s : mf.snapshots) {
        const double b = extinction_bound(m0, gamma, s.t);
        if (s.mass < b) ++violations;
        min_margin = std::min(min_margin, s.mass / b);
    }

    const SimulationSetup base = lean(line_setup(cfg));
    const std::uint64_t master = check_seed(cfg, "extinction");
    std::vector<ExtinctionRow> rows;
    for (std::size_t n : cfg.verify.extinction_n) {
        SimulationSetup s = base;
        s.n_tips = n;
        s.max_tips = std::max(s.max_tips, n);
        std::vector<TrajectoryRecord> runs(cfg.verify.extinction_seeds);
        parallel_for(runs.size(), cfg.workers, [&](std::size_t i) { runs[i] = run(s, ensemble_seed(master, n, i)); });
        rows.push_back(extinction_check(runs, s.params.gamma, s.T));
    }
    const bool monotone = extinction_fractions_nondecreasing(rows);
    CheckResult r{"extinction", static_cast<double>(violations), 0.0, violations == 0 && monotone, "", {},
                  {{"n", "runs", "above", "fraction", "se", "bound"}, {}}};
    for (const ExtinctionRow& row : rows)
        r.table.rows.push_back({std::to_string(row.n), std::to_string(row.runs), std::to_string(row.above),
                                num(row.fraction), num(row.se), num(row.bound)});
    r.values = {{"meanfield_violations", static_cast<double>(violations)},
                {"meanfield_min_ratio", min_margin},
                {"fractions_nondecreasing", monotone ? 1.0 : 0.0}};
    r.summary = fmt::format("mean-field: {} violations of M_t >= M_0 e^(-gamma t), min ratio {:.4f}; "
                            "stochastic fractions nondecreasing: {}",
                            violations, min_margin, yes(monotone));
    return r;
}

CheckResult check_mass_identity(const RunConfig& cfg) {
    const MeanFieldResult mf = solve_system(line_meanfield(cfg));
    CheckResult r{"mass_identity", 0.0, 10.0, true, "", {}, {{"t", "dmdt", "rhs", "residual", "estimate"}, {}}};
    for (const MassCheckRow& row : mf.mass_check) {
        r.statistic = std::max(r.statistic, row.residual / row.estimate);
        r.table.rows.push_back({num(row.t), num(row.dmdt), num(row.rhs), num(row.residual), num(row.estimate)});
    }
    r.pass = !mf.mass_check.empty() && r.statistic <= r.tolerance;
    r.values = {{"steps", static_cast<double>(mf.mass_check.size())}, {"final_mass", mf.final_mass()}};
    r.summary = fmt::format("max residual / truncation estimate = {:.3f} over {} steps ({})", r.statistic,
                            mf.mass_check.size(), mf.label);
    return r;
}

CheckResult check_qv_scaling(const RunConfig& cfg) {
    SimulationSetup s = lean(cfg.setup);
    s.track_qv = true;
    s.qv_functions.clear();
    const TestFunctionDictionary dict(s.params.dim, s.domain, s.dict_vmax, s.dict_size);
    for (std::size_t k = 0; k < dict.size() && s.qv_functions.size() < 3; ++k) {
        const auto& m = dict.entry(k).m;
        if (std::any_of(m.begin(), m.end(), [](int x) { return x != 0; })) s.qv_functions.push_back(k);
    }
    const std::uint64_t master = check_seed(cfg, "qv_scaling");
    auto ensemble = [&](std::size_t n) {
        SimulationSetup su = s;
        su.n_tips = n;
        su.max_tips = std::max(su.max_tips, n);
        std::vector<TrajectoryRecord> runs(cfg.verify.qv_seeds);
        parallel_for(runs.size(), cfg.workers, [&](std::size_t i) { runs[i] = run(su, ensemble_seed(master, n, i)); });
        return runs;
    };
    const auto small = ensemble(cfg.verify.qv_n);
    const auto large = ensemble(2 * cfg.verify.qv_n);
    const auto rows = qv_scaling(small, large, 0.35, 0.65);
    CheckResult r{"qv_scaling", 0.0, 0.15, true, "", {},
                  {{"part", "function", "mean_small", "se_small", "mean_large", "se_large", "ratio", "pass"}, {}}};
    for (const QvScalingRow& row : rows) {
        r.statistic = std::max(r.statistic, std::abs(row.ratio - 0.5));
        r.pass = r.pass && row.pass;
        r.table.rows.push_back({row.part, std::to_string(row.function), num(row.mean_small), num(row.se_small),
                                num(row.mean_large), num(row.se_large), num(row.ratio), yes(row.pass)});
    }
    r.summary = fmt::format("QV ratios N = {} -> {} within [0.35, 0.65]: {} (max |ratio - 0.5| = {:.3f})",
                            cfg.verify.qv_n, 2 * cfg.verify.qv_n, yes(r.pass), r.statistic);
    return r;
}

CheckResult check_convergence(const RunConfig& cfg) {
    const MeanFieldConfig mc = line_meanfield(cfg);
    const MeanFieldResult ref = solve_system(mc);
    const SimulationSetup& s = mc.setup;
    const TestFunctionDictionary dict(1, s.domain, s.dict_vmax, s.dict_size);
    const ConvergenceTable t = convergence_study(s, ref, cfg.n_list, cfg.convergence_seeds,
                                                 check_seed(cfg, "convergence"), dict, cfg.workers, true);
    std::size_t breaks = 0;
    for (std::size_t i = 1; i < t.rows.size(); ++i)
        if (!(t.rows[i].mean < t.rows[i - 1].mean + t.rows[i].se + t.rows[i - 1].se)) ++breaks;
    CheckResult r{"convergence", static_cast<double>(breaks), 0.0, t.decreasing, "", {},
                  {{"n", "mean", "se", "resampled_mean", "resampled_se"}, {}}};
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        r.table.rows.push_back({std::to_string(t.rows[i].n), num(t.rows[i].mean), num(t.rows[i].se),
                                num(t.resampled[i].mean), num(t.resampled[i].se)});
    if (t.slope) r.values.emplace_back("slope", *t.slope);
    if (t.resampled_slope) r.values.emplace_back("resampled_slope", *t.resampled_slope);
    r.summary = fmt::format("sup_t metric strictly decreasing in N: {}; slope {} (non-paper diagnostic, expected "
                            "range [{}, {}])",
                            yes(t.decreasing), t.slope ? fmt::format("{:.3f}", *t.slope) : "N/A", ConvergenceTable::kSlopeLow,
                            ConvergenceTable::kSlopeHigh);
    return r;
}

CheckResult check_semigroup(const RunConfig& cfg) {
    const PhaseFunction bump = [](const Vec& x, const Vec& v) {
        const double r2 = 0.25 * (x[0] * x[0] + v[0] * v[0]);
        return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
    };
    const std::uint64_t master = check_seed(cfg, "semigroup");
    const Vec x{{0.3, 0.0, 0.0}}, v{{0.4, 0.0, 0.0}};
    CheckResult r{"semigroup", -1e300, 0.0, true, "", {},
                  {{"t", "A", "A_se", "G", "G_se", "fd", "fd_truncation", "diff_se", "excess", "pass"}, {}}};
    for (std::size_t i = 0; i < cfg.verify.semigroup_times.size(); ++i) {
        const double t = cfg.verify.semigroup_times[i];
        const SemigroupReport s = ou_semigroup_check(bump, 1, x, v, t, cfg.verify.semigroup_samples, mix64(master + i));
        r.statistic = std::max(r.statistic, s.max_excess);
        r.pass = r.pass && s.pass;
        r.table.rows.push_back({num(t), num(s.A), num(s.A_se), num(s.G[0]), num(s.G_se[0]), num(s.fd[0]),
                                num(s.fd_truncation[0]), num(s.diff_se[0]), num(s.max_excess), yes(s.pass)});
    }
    const PhaseFunction smooth = [](const Vec& y, const Vec& w) { return std::cos(y[0]) * std::cos(0.5 * w[0]); };
    const std::size_t n_bounds = std::max<std::size_t>(1000, cfg.verify.semigroup_samples / 50);
    const SemigroupBoundReport b =
        ou_semigroup_bounds(smooth, 1.0, cfg.verify.semigroup_times, {0.0, 1.0, 2.0, 4.0}, n_bounds, mix64(master + 999));
    r.pass = r.pass && b.finite && b.stable;
    r.values = {{"sup_value_ratio", b.sup_value_ratio},
                {"sup_grad_ratio", b.sup_grad_ratio},
                {"sup_grad_ratio_doubled", b.sup_grad_ratio_doubled}};
    r.summary = fmt::format("max (|G - FD| - 3 se - truncation) = {:.3g}; gradient bound sup ratio {:.3f} "
                            "(doubled samples {:.3f}), finite: {}, stable: {}",
                            r.statistic, b.sup_grad_ratio, b.sup_grad_ratio_doubled, yes(b.finite), yes(b.stable));
    return r;
}

CheckResult check_thinning(const RunConfig& cfg) {
    const std::size_t n = cfg.verify.thinning_trials;
    const std::uint64_t master = check_seed(cfg, "thinning");
    const Vec mid = centre(cfg.setup.domain);
    CheckResult r{"thinning", 0.0, 1.0, true, "", {}, {{"law", "statistic", "critical", "dof", "pass"}, {}}};
    auto report = [&](const std::string& law, double stat, double crit, int dof, bool pass) {
        r.statistic = std::max(r.statistic, stat / crit);
        r.pass = r.pass && pass;
        r.table.rows.push_back({law, num(stat), num(crit), std::to_string(dof), yes(pass)});
    };

    {  // tip branching at constant rate alpha(1) g0 = 1/2
        SimulationSetup s = quiet(cfg.setup, n);
        s.params.alpha1 = 1.0;
        s.params.C_R = 1.0;
        TipSystem sys(s, mix64(master + 1));
        sys.set_field(ScalarField(sys.field().geometry, 1.0));
        const double dt = 0.002, T = 2.0;
        const auto steps = static_cast<std::size_t>(std::llround(T / dt));
        for (std::size_t k = 1; k <= steps; ++k) {
            sys.set_time(static_cast<double>(k) * dt);
            sys.sample_tip_branching(dt);
        }
        std::vector<std::size_t> counts(n, 0);
        for (const Event& e : sys.events())
            if (e.parent < n) ++counts[e.parent];
        const GofResult g = chi_square_poisson(counts, 0.5 * T);
        report("branching_poisson", g.statistic, g.critical, g.dof, g.pass);
    }
    {  // killing at a constant hazard next to a fixed vessel
        SimulationSetup s = quiet(cfg.setup, n);
        s.params.gamma = 1.0;
        TipSystem sys(s, mix64(master + 2));
        sys.set_tips(std::vector<std::pair<Vec, Vec>>(n, {mid, Vec{}}));
        Vec a = mid, b = mid;
        a[0] -= 0.1;
        b[0] += 0.1;
        sys.add_network_segment(Segment{a, b, 1.0, n + 1, 0.0, 0.2 * static_cast<double>(n)});
        const double lambda = s.params.gamma * saturation_h(sys.network_density_at(mid));
        const double dt = 0.002;
        std::size_t k = 1;
        for (; sys.alive_count() > 0 && k < 1000000; ++k) {
            sys.set_time(static_cast<double>(k) * dt);
            sys.sample_anastomosis(dt);
        }
        // Death is stamped at the end of its step: geometric in the step index.
        const double p = -std::expm1(-lambda * dt);
        std::vector<std::size_t> observed(k, 0);
        std::vector<double> probs(k, 0.0);
        for (const Tip& t : sys.tips()) ++observed[static_cast<std::size_t>(std::llround(*t.death_time / dt)) - 1];
        for (std::size_t j = 0; j < k; ++j) probs[j] = p * std::pow(1.0 - p, static_cast<double>(j));
        const GofResult g = chi_square_gof(observed, probs);
        report("killing_exponential", g.statistic, g.critical, g.dof, g.pass);
        r.values.emplace_back("killing_rate", lambda);
    }
    {  // vessel-branch locations along a straight constant-speed vessel
        SimulationSetup s = quiet(cfg.setup, 1);
        s.params.k1 = 0.0;
        s.params.beta1 = 1.0;
        s.params.C_R = 1.0;
        TipSystem sys(s, mix64(master + 3));
        Vec x0 = mid, v0;
        x0[0] = cfg.setup.domain.lo[0] + 0.125 * (cfg.setup.domain.hi[0] - cfg.setup.domain.lo[0]);
        const double length = 0.5 * (cfg.setup.domain.hi[0] - cfg.setup.domain.lo[0]);
        v0[0] = 1.0;
        sys.set_tips({{x0, v0}});
        const std::size_t steps = static_cast<std::size_t>(std::llround(length / 0.01));
        for (std::size_t k = 0; k < steps; ++k) sys.em_step(0.01);
        sys.set_field(ScalarField(sys.field().geometry, 1.0));
        std::vector<double> u;
        while (u.size() < n)
            for (std::size_t c : sys.sample_vessel_branching(0.05)) u.push_back((sys.tips()[c].x[0] - x0[0]) / length);
        u.resize(n);
        const KsResult ks = ks_uniform(u);
        report("vessel_branch_uniform", ks.statistic, ks.critical, 0, ks.pass);
    }
    r.summary = fmt::format("max statistic / critical value at the 1% level = {:.3f}", r.statistic);
    return r;
}

const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names = {"ou_moments", "max_principle", "domination", "wald",
                                                   "extinction", "mass_identity", "qv_scaling", "convergence",
                                                   "semigroup", "thinning"};
    return names;
}

CheckResult run_check(const std::string& name, const RunConfig& cfg) {
    static const std::vector<std::pair<std::string, std::function<CheckResult(const RunConfig&)>>> table = {
        {"ou_moments", check_ou_moments},   {"max_principle", check_max_principle},
        {"domination", check_domination},   {"wald", check_wald},
        {"extinction", check_extinction},   {"mass_identity", check_mass_identity},
        {"qv_scaling", check_qv_scaling},   {"convergence", check_convergence},
        {"semigroup", check_semigroup},     {"thinning", check_thinning},
    };
    for (const auto& [n, fn] : table)
        if (n == name) return fn(cfg);
    throw std::invalid_argument(fmt::format("unknown check '{}'", name));
}

}  // namespace angio
