#include <cmath>
#include <map>
#include <stdexcept>

#include "doctest.h"

#include "angio/analysis.hpp"
#include "angio/errors.hpp"
#include "angio/stats.hpp"

using namespace angio;

namespace {

TestFunctionDictionary dict1() { return TestFunctionDictionary(1, Box{1, Vec{}, Vec{{4.0, 0.0, 0.0}}}, 2.5); }

EmpiricalMeasure random_measure(RngStream& rng, std::size_t n) {
    EmpiricalMeasure m;
    m.dim = 1;
    m.weight = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) m.atoms.push_back(Atom{Vec{{4.0 * rng.uniform(), 0.0, 0.0}}, Vec{{rng.normal(), 0.0, 0.0}}});
    return m;
}

Atom atom(double x, double v) { return Atom{Vec{{x, 0.0, 0.0}}, Vec{{v, 0.0, 0.0}}}; }

/// sup over sign patterns of |sum_i s_i m_i (1 + |v_i|)| on the distinct atoms.
double tv_brute_force(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    std::vector<Atom> distinct;
    std::vector<double> mass;
    auto add = [&](const Atom& at, double w) {
        for (std::size_t i = 0; i < distinct.size(); ++i)
            if (distinct[i].x == at.x && distinct[i].v == at.v) {
                mass[i] += w;
                return;
            }
        distinct.push_back(at);
        mass.push_back(w);
    };
    for (const Atom& at : a.atoms) add(at, a.weight);
    for (const Atom& at : b.atoms) add(at, -b.weight);
    double best = 0.0;
    const std::size_t k = distinct.size();
    for (std::size_t pattern = 0; pattern < (std::size_t{1} << k); ++pattern) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            s += ((pattern >> i) & 1U ? 1.0 : -1.0) * mass[i] * (1.0 + std::abs(distinct[i].v[0]));
        best = std::max(best, std::abs(s));
    }
    return best;
}

DominatingParams yule(double z, double T) {
    DominatingParams dp;
    dp.alpha_sup = z;
    dp.g0 = 1.0;
    dp.beta_sup = 0.0;
    dp.sigma = 0.0;
    dp.T = T;
    return dp;
}

DominatingParams desk_dominating(int dim) {
    const SimulationSetup s = SimulationSetup::desk(dim);
    return DominatingParams::from(s.params, s.offspring_law(), s.T);
}

}  // namespace

TEST_CASE("weak_metric: identity, symmetry, triangle inequality and range") {
    const TestFunctionDictionary d = dict1();
    RngStream rng(11, StreamDomain::test, 0);
    const EmpiricalMeasure a = random_measure(rng, 30);
    CHECK(weak_metric(MeasureView{&a}, MeasureView{&a}, d) == 0.0);
    for (int trial = 0; trial < 50; ++trial) {
        const EmpiricalMeasure x = random_measure(rng, 5 + trial % 7);
        const EmpiricalMeasure y = random_measure(rng, 3 + trial % 5);
        const EmpiricalMeasure z = random_measure(rng, 8);
        const double xy = weak_metric(MeasureView{&x}, MeasureView{&y}, d);
        const double yx = weak_metric(MeasureView{&y}, MeasureView{&x}, d);
        const double xz = weak_metric(MeasureView{&x}, MeasureView{&z}, d);
        const double zy = weak_metric(MeasureView{&z}, MeasureView{&y}, d);
        CHECK(xy == yx);
        CHECK(xy <= xz + zy + 1e-15);
        CHECK(xy >= 0.0);
        CHECK(xy <= 1.0 - std::ldexp(1.0, -static_cast<int>(d.size())) + 1e-15);
    }
}

TEST_CASE("weak_metric: two separated point masses") {
    const TestFunctionDictionary d = dict1();
    // Entry 0 is constant; the first x-dependent entry separates x = 0 and x = 4.
    std::size_t k = 0;
    while (d.entry(k).n[0] == 0) ++k;
    const EmpiricalMeasure a{1, 1.0, {atom(0.0, 0.0)}};
    const EmpiricalMeasure b{1, 1.0, {atom(4.0, 0.0)}};
    const double c = std::abs(d.value(k, a.atoms[0].x, a.atoms[0].v) - d.value(k, b.atoms[0].x, b.atoms[0].v));
    CHECK(c >= 1.0);
    CHECK(weak_metric(MeasureView{&a}, MeasureView{&b}, d) >= std::ldexp(1.0, -static_cast<int>(k + 1)) * std::min(c, 1.0));
}

TEST_CASE("weak_metric: density pairings match the grid quadrature of the atoms") {
    MeanFieldConfig c = MeanFieldConfig::desk(1);
    c.x_spacing = 0.05;
    c.nv = 32;
    MeanFieldSolver s(c);
    const PhaseSpaceDensity& rho = s.density();
    const TestFunctionDictionary d = dict1();
    // The same density as atoms at the cell centres with mass rho * cell volume.
    std::vector<double> direct(d.size(), 0.0);
    for (std::size_t i = 0; i < rho.x.size(); ++i)
        for (std::size_t j = 0; j < rho.v.size(); ++j)
            for (std::size_t k = 0; k < d.size(); ++k)
                direct[k] += d.value(k, rho.x.node(i), rho.v.node(j)) * rho.values[i * rho.v.size() + j] * rho.cell_volume();
    const auto p = pairings(rho, d);
    for (std::size_t k = 0; k < d.size(); ++k) CHECK(p[k] == doctest::Approx(direct[k]).epsilon(1e-12));
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weighted_tv: examples") {
    const EmpiricalMeasure a{1, 0.3, {atom(1.0, -2.0)}};
    const EmpiricalMeasure b{1, 0.8, {atom(1.0, -2.0)}};
    CHECK(weighted_tv(MeasureView{&a}, MeasureView{&a}) == 0.0);
    CHECK(weighted_tv(MeasureView{&a}, MeasureView{&b}) == doctest::Approx(0.5 * 3.0).epsilon(1e-14));
    const EmpiricalMeasure c{1, 1.0, {atom(0.5, 1.5)}};
    const EmpiricalMeasure e{1, 1.0, {atom(2.0, -0.25)}};
    CHECK(weighted_tv(MeasureView{&c}, MeasureView{&e}) == doctest::Approx(2.5 + 1.25).epsilon(1e-14));
}

TEST_CASE("weighted_tv: equals the brute-force supremum over sign patterns") {
    RngStream rng(5, StreamDomain::test, 1);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<Atom> pool;
        for (int i = 0; i < 8; ++i) pool.push_back(atom(std::floor(4.0 * rng.uniform() * 4.0) / 4.0, rng.normal()));
        EmpiricalMeasure a{1, 1.0 / 6.0, {}}, b{1, 1.0 / 5.0, {}};
        for (int i = 0; i < 6; ++i) a.atoms.push_back(pool[static_cast<std::size_t>(rng.uniform() * 8.0)]);
        for (int i = 0; i < 5; ++i) b.atoms.push_back(pool[static_cast<std::size_t>(rng.uniform() * 8.0)]);
        CHECK(weighted_tv(MeasureView{&a}, MeasureView{&b}) == doctest::Approx(tv_brute_force(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("weighted_tv: mixed atomic and density inputs are rejected") {
    MeanFieldConfig c = MeanFieldConfig::desk(1);
    c.x_spacing = 0.05;
    c.nv = 16;
    MeanFieldSolver s(c);
    const EmpiricalMeasure a{1, 1.0, {atom(1.0, 0.0)}};
    try {
        weighted_tv(MeasureView{&a}, MeasureView{&s.density()});
        FAIL("mixed inputs accepted");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("use weak_metric") != std::string::npos);
    }
    CHECK(weighted_tv(MeasureView{&s.density()}, MeasureView{&s.density()}) == 0.0);
}

TEST_CASE("dominating rate: Z is bounded below by alpha g0 and deterministic without noise") {
    DominatingParams dp = desk_dominating(2);
    RngStream rng(3, StreamDomain::test, 2);
    const double floor = dp.alpha_sup * dp.g0 + dp.C * dp.beta_sup * dp.g0 * dp.T * (dp.T + 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double z = sample_dominating_rate(dp, rng);
        CHECK(std::isfinite(z));
        CHECK(z >= floor);
    }
    dp.sigma = 0.0;
    CHECK(sample_dominating_rate(dp, rng) == floor);
}

TEST_CASE("dominating rate: sup of the stochastic integral has the Brownian-sup mean for k1 = 0") {
    // E sup_{s<=1} |W_s| = sqrt(pi / 2).
    DominatingParams dp;
    dp.alpha_sup = 0.0;
    dp.beta_sup = 1.0;
    dp.g0 = 1.0;
    dp.C = 0.0;
    dp.sigma = 1.0;
    dp.k1 = 0.0;
    dp.T = 1.0;
    const RateEstimate z = estimate_rate(dp, 20000, 9);
    // Z = T sigma sup|W| with T = 1; discrete monitoring lowers the mean by about 0.5826 sqrt(h).
    const double exact = std::sqrt(M_PI / 2.0) - 0.5826 * std::sqrt(1.0 / 1000.0);
    CHECK(std::abs(z.mean - exact) <= 3.0 * z.se);
}

TEST_CASE("dominating process: T = 0 and the Yule expectation") {
    RngStream rng(1, StreamDomain::test, 3);
    DominatingParams dp = desk_dominating(2);
    dp.T = 0.0;
    CHECK(dominating_process(dp, rng).n_total == 1);

    for (double zT : {0.5, 1.0, 2.0}) {
        const DominatingParams y = yule(zT / 2.0, 2.0);
        RunningStats n;
        for (std::size_t i = 0; i < 10000; ++i) {
            RngStream r(77, StreamDomain::dominating, i);
            n.add(static_cast<double>(dominating_process(y, r).n_total));
        }
        CHECK(std::abs(n.mean() - std::exp(zT)) <= 3.0 * n.se());
    }
}

TEST_CASE("dominating process: full law stays below e^{lambda T}") {
    const DominatingParams dp = desk_dominating(2);
    const RateEstimate lambda = estimate_rate(dp, 20000, 21);
    RunningStats n;
    for (std::size_t i = 0; i < 3000; ++i) {
        RngStream r(22, StreamDomain::dominating, i);
        n.add(static_cast<double>(dominating_process(dp, r).n_total));
    }
    const double bound = std::exp(lambda.mean * dp.T);
    const double se = std::hypot(n.se(), dp.T * bound * lambda.se);
    CHECK(n.mean() <= bound + 3.0 * se);
}

TEST_CASE("dominating process: runaway parameters hit the cap") {
    DominatingParams dp = yule(5.0, 3.0);
    dp.cap = 100;
    RngStream rng(2, StreamDomain::test, 4);
    CHECK_THROWS_AS(dominating_process(dp, rng), NumericalError);
}

TEST_CASE("wald_check: deterministic Z, disabled branching and the full law") {
    const WaldReport det = wald_check(yule(0.8, 2.0), 2000, 4);
    CHECK(det.mean_z == 0.8);
    CHECK(std::abs(det.discrepancy) <= 1e-12 * det.mean_sum_z);
    CHECK(det.pass);

    DominatingParams off = desk_dominating(2);
    off.branching = false;
    const WaldReport one = wald_check(off, 2000, 5);
    CHECK(one.mean_n == 1.0);
    CHECK(std::abs(one.mean_sum_z - one.mean_z) <= 3.0 * one.se);
    CHECK(one.pass);

    const WaldReport full = wald_check(desk_dominating(2), 2000, 6);
    CHECK(full.pass);
    CHECK(full.exact_rate_bound == doctest::Approx(std::exp(full.mean_z * 2.0)).epsilon(1e-12));
}

TEST_CASE("domination_check compares the mean supremum with e^{lambda T}") {
    const RateEstimate lambda{0.5, 0.0, 1000};
    CHECK(domination_check({1.0, 2.0, 2.5}, lambda, 2.0).pass);
    CHECK_FALSE(domination_check({3.0, 3.0, 3.0}, lambda, 2.0).pass);
}

TEST_CASE("dominating process dominates the simulator's tip count in mean") {
    const SimulationSetup base = SimulationSetup::desk(1);
    RunningStats sup;
    for (std::uint64_t s = 0; s < 12; ++s) {
        SimulationSetup su = base;
        su.record_fields = false;
        su.record_snapshots = false;
        sup.add(run(su, 500 + s).sup_mass());
    }
    const DominatingParams dp = DominatingParams::from(base.params, base.offspring_law(), base.T);
    RunningStats nbar;
    for (std::size_t i = 0; i < 3000; ++i) {
        RngStream r(31, StreamDomain::dominating, i);
        nbar.add(static_cast<double>(dominating_process(dp, r).n_total));
    }
    CHECK(sup.mean() <= nbar.mean() + 3.0 * std::hypot(sup.se(), nbar.se()));
}

TEST_CASE("extinction_bound: formula and monotonicity") {
    CHECK(extinction_bound(1.0, 0.0, 7.0) == 1.0);
    CHECK(extinction_bound(1.0, 0.5, 2.0) == doctest::Approx(0.367879).epsilon(1e-6));
    CHECK(extinction_bound(2.0, 0.5, 2.0) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-14));
    double prev = 2.0;
    for (double T = 0.0; T < 5.0; T += 0.25) {
        const double b = extinction_bound(1.0, 0.3, T);
        CHECK(b <= prev);
        CHECK(extinction_bound(1.0, 0.6, T) <= b);
        prev = b;
    }
    CHECK_THROWS_AS(extinction_bound(0.0, 0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(extinction_bound(-1.0, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("extinction_check: gamma = 0 keeps every run above the halved bound") {
    SimulationSetup su = SimulationSetup::desk(1);
    su.params.gamma = 0.0;
    su.n_tips = 50;
    su.record_fields = false;
    std::vector<TrajectoryRecord> runs;
    for (std::uint64_t s = 0; s < 8; ++s) runs.push_back(run(su, 900 + s));
    const ExtinctionRow row = extinction_check(runs, 0.0, su.T);
    CHECK(row.runs == 8);
    CHECK(row.n == 50);
    CHECK(row.above == 8);
    CHECK(row.fraction == 1.0);
    CHECK(row.se == 0.0);
}

TEST_CASE("extinction_fractions_nondecreasing allows one binomial SE") {
    std::vector<ExtinctionRow> rows(3);
    rows[0].fraction = 0.8;
    rows[0].se = 0.05;
    rows[1].fraction = 0.78;
    rows[1].se = 0.04;
    rows[2].fraction = 0.95;
    rows[2].se = 0.02;
    CHECK(extinction_fractions_nondecreasing(rows));
    rows[1].fraction = 0.7;
    CHECK_FALSE(extinction_fractions_nondecreasing(rows));
}

TEST_CASE("martingale QV: sigma = 0 and no events") {
    const TestFunctionDictionary d = dict1();
    std::vector<std::size_t> v_dependent;
    for (std::size_t k = 0; k < d.size(); ++k)
        if (d.entry(k).m[0] != 0) v_dependent.push_back(k);
    REQUIRE(v_dependent.size() >= 2);

    SimulationSetup su = SimulationSetup::desk(1);
    su.track_qv = true;
    su.qv_functions = v_dependent;
    su.params.sigma = 0.0;
    su.record_fields = false;
    const TrajectoryRecord r = run(su, 12);
    REQUIRE(martingale_qv(r).size() == v_dependent.size());
    for (const QvTotals& q : martingale_qv(r)) CHECK(q.brownian == 0.0);

    SimulationSetup quiet = SimulationSetup::desk(1);
    quiet.track_qv = true;
    quiet.qv_functions = v_dependent;
    quiet.params.alpha1 = quiet.params.beta1 = quiet.params.gamma = 0.0;
    quiet.record_fields = false;
    const TrajectoryRecord q = run(quiet, 13);
    CHECK(q.events.empty());
    for (const QvTotals& t : martingale_qv(q)) {
        CHECK(t.birth == 0.0);
        CHECK(t.death == 0.0);
        CHECK(t.brownian > 0.0);
    }
}

TEST_CASE("qv_scaling: ratio per part and function") {
    auto rec = [](double b, double bi, double de) {
        TrajectoryRecord r;
        r.qv = {QvTotals{2, b, bi, de}};
        return r;
    };
    const std::vector<TrajectoryRecord> small{rec(2.0, 4.0, 1.0), rec(2.0, 4.0, 1.0)};
    const std::vector<TrajectoryRecord> large{rec(1.0, 2.0, 0.9), rec(1.0, 2.0, 0.9)};
    const auto rows = qv_scaling(small, large);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].part == "brownian");
    CHECK(rows[0].function == 2);
    CHECK(rows[0].ratio == 0.5);
    CHECK(rows[0].pass);
    CHECK(rows[1].pass);
    CHECK(rows[2].ratio == doctest::Approx(0.9));
    CHECK_FALSE(rows[2].pass);
    CHECK_THROWS_AS(qv_scaling({}, large), std::invalid_argument);
}

TEST_CASE("OU semigroup: constant and odd test functions") {
    const PhaseFunction one = [](const Vec&, const Vec&) { return 1.0; };
    const SemigroupReport r = ou_semigroup_check(one, 2, Vec{}, Vec{}, 0.5, 100000, 41);
    CHECK(r.A == 1.0);
    CHECK(r.A_se == 0.0);
    for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(r.G[k]) <= 3.0 * r.G_se[k]);

    const PhaseFunction odd = [](const Vec& x, const Vec&) { return std::sin(x[0]); };
    const SemigroupReport o = ou_semigroup_check(odd, 1, Vec{}, Vec{}, 1.0, 100000, 42);
    CHECK(std::abs(o.A) <= 3.0 * o.A_se);
}

TEST_CASE("OU semigroup: gradient formula against finite differences") {
    const PhaseFunction bump = [](const Vec& x, const Vec& v) {
        const double r2 = 0.25 * (x[0] * x[0] + v[0] * v[0]);
        return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
    };
    const SemigroupReport r = ou_semigroup_check(bump, 1, Vec{{0.3, 0.0, 0.0}}, Vec{{0.4, 0.0, 0.0}}, 0.5, 1000000, 43);
    CHECK(r.pass);
    CHECK(r.max_excess <= 0.0);
    CHECK(std::abs(r.G[0]) > 5.0 * r.G_se[0]);

    // Gaussian phi: the semigroup is Gaussian smoothing with the exact covariance of (I, B).
    const double t = 0.5;
    const PhaseFunction gauss = [](const Vec& x, const Vec&) { return std::exp(-0.5 * x[0] * x[0]); };
    const double s2 = t * t * t / 3.0;
    const double v0 = 0.4;
    const double mean = v0 * t;
    const double dA = -mean / (1.0 + s2) * std::exp(-0.5 * mean * mean / (1.0 + s2)) / std::sqrt(1.0 + s2) * t;
    const SemigroupReport g = ou_semigroup_check(gauss, 1, Vec{}, Vec{{v0, 0.0, 0.0}}, t, 1000000, 44);
    CHECK(std::abs(g.G[0] - dA) <= 3.0 * g.G_se[0]);
    CHECK(g.pass);
}

TEST_CASE("OU semigroup bounds: finite and stable under doubling the samples") {
    const PhaseFunction phi = [](const Vec& x, const Vec& v) { return std::cos(x[0]) * std::cos(0.5 * v[0]); };
    const SemigroupBoundReport r = ou_semigroup_bounds(phi, 1.0, {0.25, 0.5, 1.0}, {0.0, 1.0, 2.0}, 20000, 45);
    CHECK(r.rows.size() == 9);
    CHECK(r.finite);
    CHECK(r.stable);
    CHECK(r.sup_value_ratio <= 3.0);
    CHECK(r.sup_grad_ratio < 10.0);
}

TEST_CASE("resample_density draws round(N M) atoms inside the grid") {
    MeanFieldConfig c = MeanFieldConfig::desk(1);
    c.x_spacing = 0.05;
    c.nv = 32;
    MeanFieldSolver s(c);
    RngStream rng(8, StreamDomain::test, 5);
    const EmpiricalMeasure q = resample_density(s.density(), 200, rng);
    CHECK(q.atoms.size() == 200);
    CHECK(q.weight == 0.005);
    for (const Atom& a : q.atoms) {
        CHECK(a.x[0] >= 0.6 - 1e-12);
        CHECK(a.x[0] <= 1.0 + 1e-12);
        CHECK(std::abs(a.v[0]) <= s.density().v.v_max);
    }
}

TEST_CASE("strictly_decreasing allows a one-SE overlap") {
    std::vector<ConvergenceRow> rows{{50, {}, 0.2, 0.01}, {100, {}, 0.205, 0.01}, {200, {}, 0.1, 0.01}};
    CHECK(strictly_decreasing(rows));
    rows[1].mean = 0.25;
    CHECK_FALSE(strictly_decreasing(rows));
}

TEST_CASE("convergence_study: single N has no slope; mismatched geometry is rejected") {
    MeanFieldConfig c = MeanFieldConfig::desk(1);
    c.x_spacing = 0.05;
    c.nv = 64;
    c.setup.T = 0.3;
    const MeanFieldResult ref = solve_system(c);
    SimulationSetup su = c.setup;
    const TestFunctionDictionary d(1, su.domain, su.dict_vmax, su.dict_size);
    const ConvergenceTable t = convergence_study(su, ref, {50}, 3, 7, d);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].values.size() == 3);
    CHECK_FALSE(t.slope.has_value());
    CHECK_FALSE(t.slope_in_range.has_value());
    CHECK(t.rows[0].mean > 0.0);
    CHECK(t.rows[0].mean <= 1.0);

    SimulationSetup two = SimulationSetup::desk(2);
    const TestFunctionDictionary d2(2, two.domain, two.dict_vmax, two.dict_size);
    try {
        convergence_study(two, ref, {50}, 1, 7, d2);
        FAIL("mismatch accepted");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("geometry mismatch") != std::string::npos);
    }
    SimulationSetup wide = su;
    wide.domain.hi[0] = 5.0;
    CHECK_THROWS_AS(convergence_study(wide, ref, {50}, 1, 7, d), std::invalid_argument);
    SimulationSetup other_times = su;
    other_times.output_dt = 0.07;
    CHECK_THROWS_AS(convergence_study(other_times, ref, {50}, 1, 7, d), std::invalid_argument);
}

TEST_CASE("convergence_study: the metric decreases along an N sweep") {
    MeanFieldConfig c = MeanFieldConfig::desk(1);
    c.setup.T = 1.0;
    const MeanFieldResult ref = solve_system(c);
    const TestFunctionDictionary d(1, c.setup.domain, c.setup.dict_vmax, c.setup.dict_size);
    const ConvergenceTable t = convergence_study(c.setup, ref, {50, 200}, 10, 3, d);
    REQUIRE(t.rows.size() == 2);
    REQUIRE(t.resampled.size() == 2);
    CHECK(t.decreasing);
    CHECK(t.slope.has_value());
    CHECK(t.resampled_slope.has_value());
    CHECK(*t.resampled_slope < 0.0);
}
