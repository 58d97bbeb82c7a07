#include <cmath>

#include "doctest.h"

#include "angio/errors.hpp"
#include "angio/meanfield.hpp"

using namespace angio;

namespace {

/// Small d=1 configuration with every source and the chemotaxis switched off.
MeanFieldConfig inert(double sigma = 0.0, double k1 = 0.0) {
    MeanFieldConfig c = MeanFieldConfig::desk(1);
    ModelParams& p = c.setup.params;
    p.alpha1 = p.beta1 = p.gamma = 0.0;
    p.d2 = 0.0;
    p.sigma = sigma;
    p.k1 = k1;
    c.x_spacing = 0.02;
    c.nv = 64;
    c.v_max = 2.0;
    return c;
}

double v_moment(const PhaseSpaceDensity& rho, int power) {
    double s = 0.0, m = 0.0;
    for (std::size_t i = 0; i < rho.x.size(); ++i)
        for (std::size_t j = 0; j < rho.v.size(); ++j) {
            const double r = rho.values[i * rho.v.size() + j];
            s += r * std::pow(rho.v.node(j)[0], power);
            m += r;
        }
    return s / m;
}

double x_mean(const PhaseSpaceDensity& rho) {
    double s = 0.0, m = 0.0;
    for (std::size_t i = 0; i < rho.x.size(); ++i)
        for (std::size_t j = 0; j < rho.v.size(); ++j) {
            const double r = rho.values[i * rho.v.size() + j];
            s += r * rho.x.node(i)[0];
            m += r;
        }
    return s / m;
}

const MeanFieldResult& desk_run() {
    static const MeanFieldResult r = solve_system(MeanFieldConfig::desk(1));
    return r;
}

}  // namespace

TEST_CASE("marginals: constant density, Fubini and a point-supported density") {
    MeanFieldSolver s(inert());
    PhaseSpaceDensity rho = s.density();
    std::fill(rho.values.begin(), rho.values.end(), 0.7);
    const Marginals m = marginals(rho);
    for (double p : m.pi1) CHECK(p == doctest::Approx(0.7 * 4.0).epsilon(1e-12));

    PhaseSpaceDensity init = s.density();
    const Marginals mi = marginals(init);
    double total = 0.0;
    for (double p : mi.pi1) total += p;
    total *= init.x.cell_volume();
    CHECK(total == doctest::Approx(init.mass()).epsilon(1e-12));
    CHECK(init.mass() == doctest::Approx(1.0).epsilon(1e-12));

    std::fill(rho.values.begin(), rho.values.end(), 0.0);
    const std::size_t ix = 17, jv = 9;
    rho.values[ix * rho.v.size() + jv] = 3.0;
    const Marginals mp = marginals(rho);
    CHECK(mp.tilde[ix] / mp.pi1[ix] == doctest::Approx(std::abs(rho.v.node(jv)[0])).epsilon(1e-14));
    for (std::size_t i = 0; i < rho.x.size(); ++i)
        CHECK(mp.tilde[i] <= rho.v.v_max * mp.pi1[i] + 1e-15);
}

TEST_CASE("offspring density on the v-grid integrates to g0") {
    MeanFieldConfig c = MeanFieldConfig::desk(1);
    c.setup.params.g0 = 2.5;
    MeanFieldSolver s(c);
    double sum = 0.0;
    for (double g : s.offspring_density()) sum += g;
    CHECK(sum * s.density().v.cell_volume() == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("grid convolution: interior mass of the kernel and a discrete delta") {
    const GridGeometry g = GridGeometry::covering(Box{1, Vec{}, Vec{{4.0, 0.0, 0.0}}}, 0.01);
    const Kernel k = Kernel::with_mass(1, 0.25, 1.0);
    GridConvolution conv(g, k);
    std::vector<double> ones(g.size(), 1.0), out(g.size());
    conv.apply(ones, out);
    CHECK(out[200] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(out[0] < 0.6);

    std::vector<double> delta(g.size(), 0.0);
    delta[100] = 1.0 / g.cell_volume();
    conv.apply(delta, out);
    for (int o : {-20, -3, 0, 7, 24}) {
        Vec d;
        d[0] = o * g.spacing;
        CHECK(out[static_cast<std::size_t>(100 + o)] == doctest::Approx(k(d)).epsilon(1e-12));
    }
    CHECK(out[130] == 0.0);
}

TEST_CASE("source: all rates zero leaves the density unchanged") {
    MeanFieldSolver s(inert());
    const auto before = s.density().values;
    s.apply_source(0.1);
    CHECK(s.density().values == before);
}

TEST_CASE("transport: a box profile moves by v t and mass is conserved") {
    MeanFieldConfig c = inert();
    MeanFieldSolver s(c);
    s.freeze_field(true);
    PhaseSpaceDensity rho = s.density();
    std::fill(rho.values.begin(), rho.values.end(), 0.0);
    const std::size_t jv = 48;  // v = 1.0625
    const double v = rho.v.node(jv)[0];
    for (std::size_t i = 50; i < 70; ++i) rho.values[i * rho.v.size() + jv] = 1.0;
    s.set_density(rho);
    const double m0 = s.density().mass();
    const double x0 = x_mean(s.density());
    double t = 0.0;
    for (int n = 0; n < 50; ++n) {
        s.kinetic_step();
        t += s.dt();
    }
    CHECK(std::abs(s.density().mass() - m0) <= 1e-12 * m0);
    CHECK(x_mean(s.density()) - x0 == doctest::Approx(v * t).epsilon(1e-10));
    CHECK(s.density().min() >= -1e-12);
}

TEST_CASE("velocity diffusion: variance grows by sigma^2 t") {
    MeanFieldConfig c = inert(0.5, 0.0);
    c.nv = 128;
    c.v_max = 3.0;
    MeanFieldSolver s(c);
    s.freeze_field(true);
    PhaseSpaceDensity rho = s.density();
    std::fill(rho.values.begin(), rho.values.end(), 0.0);
    for (std::size_t i = 0; i < rho.x.size(); ++i) rho.values[i * rho.v.size() + 64] = 1.0;
    s.set_density(rho);
    const double var0 = v_moment(s.density(), 2) - std::pow(v_moment(s.density(), 1), 2);
    double t = 0.0;
    while (t < 1.0 - 1e-12) {
        s.diffuse_v(s.dt());
        t += s.dt();
    }
    const double var = v_moment(s.density(), 2) - std::pow(v_moment(s.density(), 1), 2);
    CHECK(var - var0 == doctest::Approx(0.25 * t).epsilon(0.02));
}

TEST_CASE("drift plus diffusion relaxes to the stationary variance sigma^2 / (2 k1)") {
    MeanFieldConfig c = inert(1.0, 1.0);
    c.setup.domain.hi[0] = 0.5;
    c.setup.init_region = Box{1, Vec{}, Vec{{0.5, 0.0, 0.0}}};
    c.setup.tumor = Box{1, Vec{{0.4, 0.0, 0.0}}, Vec{{0.5, 0.0, 0.0}}};
    c.x_spacing = 0.1;
    c.nv = 512;
    c.v_max = 0.0;
    MeanFieldSolver s(c);
    s.freeze_field(true);
    double t = 0.0;
    while (t < 6.0) {
        s.drift_v(s.dt());
        s.diffuse_v(s.dt());
        t += s.dt();
    }
    const double mean = v_moment(s.density(), 1);
    const double var = v_moment(s.density(), 2) - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("solve_system: no birth or death keeps M_t constant") {
    MeanFieldConfig c = inert(0.5, 1.0);
    c.setup.params.d2 = 1.0;
    c.setup.T = 0.5;
    const MeanFieldResult r = solve_system(c);
    for (double m : r.mass) CHECK(std::abs(m - 1.0) <= 1e-10);
}

TEST_CASE("mass identity with gamma = 0 holds to the splitting tolerance") {
    MeanFieldConfig c = MeanFieldConfig::desk(1);
    c.setup.params.gamma = 0.0;
    c.setup.T = 0.5;
    c.x_spacing = 0.02;
    c.nv = 128;
    const MeanFieldResult r = solve_system(c);
    REQUIRE(!r.mass_check.empty());
    for (const MassCheckRow& row : r.mass_check) CHECK(row.residual <= 10.0 * row.estimate);
    for (std::size_t n = 1; n < r.mass.size(); ++n) CHECK(r.mass[n] >= r.mass[n - 1]);
}

TEST_CASE("pure death with saturated history follows dM/dt = -gamma M") {
    MeanFieldConfig c = inert(0.5, 1.0);
    c.setup.params.gamma = 0.8;
    c.setup.k2_mass = 1e6;
    c.setup.T = 1.0;
    const MeanFieldResult r = solve_system(c);
    CHECK(r.final_mass() == doctest::Approx(std::exp(-0.8)).epsilon(0.02));
    for (std::size_t n = 2; n < r.mass.size(); ++n) CHECK(r.mass[n] < r.mass[n - 1]);
}

TEST_CASE("desk d=1 run: bounds, leakage, mass identity and non-extinction") {
    const MeanFieldResult& r = desk_run();
    const MeanFieldConfig c = MeanFieldConfig::desk(1);
    const double gamma = c.setup.params.gamma;
    CHECK(r.min_rho >= -1e-12);
    CHECK(r.history_monotone);
    CHECK(r.field_bounds.ok);
    CHECK(r.max_v_leak_rate < 1e-6);
    for (const MassCheckRow& row : r.mass_check) CHECK(row.residual <= 10.0 * row.estimate);
    const double m0 = r.mass.front();
    for (const MeanFieldSnapshot& s : r.snapshots) CHECK(s.mass >= std::exp(std::log(m0) - gamma * s.t));
    CHECK(r.snapshots.size() == 21);
    CHECK(r.snapshots.back().t == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.label.find("implementation-only") != std::string::npos);
}

TEST_CASE("self-convergence of M_T under grid refinement") {
    const SelfConvergence sc = self_convergence(MeanFieldConfig::desk(1));
    CHECK(sc.fine == doctest::Approx(desk_run().final_mass()).epsilon(1e-12));
    CHECK(sc.pass);
    CHECK(sc.relative_change < 0.01);
}

TEST_CASE("configuration errors") {
    MeanFieldConfig c = MeanFieldConfig::desk(2);
    c.setup = SimulationSetup::desk(3);
    try {
        MeanFieldSolver s(c);
        FAIL("d=3 accepted");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()) == "mean-field grid supports d ≤ 2");
    }
    MeanFieldConfig cfl = inert();
    cfl.dt = 0.5;
    CHECK_THROWS_AS(MeanFieldSolver{cfl}, NumericalError);
    MeanFieldConfig k0 = inert();
    k0.v_max = 0.0;
    CHECK_THROWS_AS(MeanFieldSolver{k0}, ConfigError);
}

TEST_CASE("d=2 coarse grid runs and conserves mass without sources") {
    MeanFieldConfig c = MeanFieldConfig::desk(2);
    c.setup.params.alpha1 = c.setup.params.beta1 = c.setup.params.gamma = 0.0;
    c.setup.T = 0.3;
    const MeanFieldResult r = solve_system(c);
    CHECK(r.x.size() == 32 * 32);
    CHECK(r.v.size() == 16 * 16);
    for (double m : r.mass) CHECK(std::abs(m - 1.0) <= 1e-10);
    CHECK(r.min_rho >= -1e-12);
}
