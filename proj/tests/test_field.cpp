#include <cmath>
#include <numbers>

#include "doctest.h"

#include "angio/errors.hpp"
#include "angio/field.hpp"

using namespace angio;

namespace {

Vec v2(double a, double b) {
    Vec v;
    v[0] = a;
    v[1] = b;
    return v;
}

GridGeometry square(double side, double h) {
    Box b{2, Vec{}, v2(side, side)};
    return GridGeometry::covering(b, h);
}

ModelParams quiet_params() {
    ModelParams p;
    p.k2 = 0.0;
    p.d1 = 0.0;
    return p;
}

}  // namespace

TEST_CASE("grid geometry indexing round-trips") {
    const GridGeometry g = square(2.0, 0.25);
    CHECK(g.shape[0] == 8);
    CHECK(g.shape[1] == 8);
    CHECK(g.shape[2] == 1);
    for (std::size_t k = 0; k < g.size(); ++k) REQUIRE(g.index(g.multi_index(k)) == k);
    CHECK(g.node(0) == v2(0.125, 0.125));
    CHECK(g.cell_volume() == doctest::Approx(0.0625));
}

TEST_CASE("accumulate_eta: empty, static tip and linearity") {
    const GridGeometry g = square(2.0, 0.05);
    const Kernel k1 = Kernel::with_mass(2, 0.25, 1.0);
    AbsorptionField eta(g);

    EmpiricalMeasure none{2, 1.0, {}};
    accumulate_eta(eta, none, k1, 0.1);
    for (double v : eta.values) REQUIRE(v == 0.0);

    const Atom tip{v2(1.01, 0.93), v2(0.3, -0.4)};
    EmpiricalMeasure one{2, 1.0, {tip}};
    const int steps = 50;
    const double dt = 0.02;
    for (int s = 0; s < steps; ++s) accumulate_eta(eta, one, k1, dt);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double expected = steps * dt * k1(g.node(k) - tip.x) * 0.5;
        REQUIRE(eta.values[k] == doctest::Approx(expected).epsilon(1e-12));
    }

    const Atom other{v2(0.6, 1.2), v2(-0.1, 0.0)};
    AbsorptionField ea(g), eb(g), eab(g);
    accumulate_eta(ea, EmpiricalMeasure{2, 0.5, {tip}}, k1, dt);
    accumulate_eta(eb, EmpiricalMeasure{2, 0.5, {other}}, k1, dt);
    accumulate_eta(eab, EmpiricalMeasure{2, 0.5, {tip, other}}, k1, dt);
    for (std::size_t k = 0; k < g.size(); ++k)
        REQUIRE(eab.values[k] == doctest::Approx(ea.values[k] + eb.values[k]).epsilon(1e-14));
}

TEST_CASE("accumulate_eta rejects a dimension mismatch") {
    const GridGeometry g = square(1.0, 0.1);
    AbsorptionField eta(g);
    const Kernel k3(3, 0.2, 1.0);
    EmpiricalMeasure q{2, 1.0, {}};
    CHECK_THROWS(accumulate_eta(eta, q, k3, 0.1));
}

TEST_CASE("field_step: pure reaction is the exact exponential factor") {
    const GridGeometry g = square(1.0, 0.1);
    ScalarField c(g);
    AbsorptionField eta(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        c.values[k] = 0.2 + 0.01 * static_cast<double>(k);
        eta.values[k] = 0.05 * static_cast<double>(k % 7);
    }
    const ScalarField c0 = c;
    const std::vector<double> tumor(g.size(), 0.0);
    const ModelParams p = quiet_params();
    const double dt = 0.01;
    const int steps = 100;
    for (int s = 0; s < steps; ++s) field_step(c, eta, tumor, p, dt);
    for (std::size_t k = 0; k < g.size(); ++k)
        REQUIRE(c.values[k] == doctest::Approx(c0.values[k] * std::exp(-eta.values[k] * steps * dt)).epsilon(1e-13));
}

TEST_CASE("field_step: constant field is preserved by Neumann diffusion") {
    for (auto scheme : {DiffusionScheme::implicit, DiffusionScheme::explicit_euler}) {
        const GridGeometry g = square(1.0, 0.05);
        ScalarField c(g, 0.37);
        AbsorptionField eta(g);
        const std::vector<double> tumor(g.size(), 0.0);
        ModelParams p = quiet_params();
        p.d1 = 0.1;
        for (int s = 0; s < 50; ++s) field_step(c, eta, tumor, p, 0.005, {scheme, 0.0});
        for (double v : c.values) REQUIRE(v == doctest::Approx(0.37).epsilon(1e-14));
    }
}

TEST_CASE("field_step: Gaussian bump second moment grows by 2 d1 t per axis") {
    for (auto scheme : {DiffusionScheme::implicit, DiffusionScheme::explicit_euler}) {
        const GridGeometry g = square(4.0, 0.02);
        const double s0 = 0.2, d1 = 0.1, dt = 0.0005, T = 0.1;
        ScalarField c(g);
        c.values = sample_nodes(g, [&](const Vec& x) {
            const double r2 = (x[0] - 2.0) * (x[0] - 2.0) + (x[1] - 2.0) * (x[1] - 2.0);
            return std::exp(-r2 / (2 * s0 * s0));
        });
        AbsorptionField eta(g);
        const std::vector<double> tumor(g.size(), 0.0);
        ModelParams p = quiet_params();
        p.d1 = d1;
        auto moment = [&](int axis) {
            double m = 0.0, s = 0.0;
            for (std::size_t k = 0; k < g.size(); ++k) {
                const double x = g.node(k)[static_cast<std::size_t>(axis)] - 2.0;
                m += c.values[k];
                s += c.values[k] * x * x;
            }
            return s / m;
        };
        const double before0 = moment(0), before1 = moment(1);
        const int steps = static_cast<int>(std::lround(T / dt));
        for (int s = 0; s < steps; ++s) field_step(c, eta, tumor, p, dt, {scheme, 0.0});
        const double growth = 2.0 * d1 * T;
        CHECK(moment(0) - before0 == doctest::Approx(growth).epsilon(0.01));
        CHECK(moment(1) - before1 == doctest::Approx(growth).epsilon(0.01));
    }
}

TEST_CASE("field_step: explicit scheme rejects an unstable step") {
    const GridGeometry g = square(1.0, 0.1);
    ScalarField c(g, 1.0);
    AbsorptionField eta(g);
    const std::vector<double> tumor(g.size(), 0.0);
    ModelParams p = quiet_params();
    p.d1 = 1.0;
    CHECK_THROWS_AS(field_step(c, eta, tumor, p, 0.01, {DiffusionScheme::explicit_euler, 0.0}),
                    NumericalError);
    CHECK_NOTHROW(field_step(c, eta, tumor, p, 0.01, {DiffusionScheme::implicit, 0.0}));
}

TEST_CASE("field_step: mass balance with eta = 0") {
    const GridGeometry g = square(2.0, 0.05);
    ScalarField c(g);
    c.values = sample_nodes(g, [](const Vec& x) { return std::exp(-x[0]) * (1 + x[1]); });
    AbsorptionField eta(g);
    const TumorIndicator ind(Box{2, v2(1.2, 0.8), v2(1.6, 1.2)}, 0.2);
    const std::vector<double> tumor = sample_nodes(g, [&](const Vec& x) { return ind(x); });
    double tumor_mass = 0.0;
    for (double v : tumor) tumor_mass += v;
    tumor_mass *= g.cell_volume();
    ModelParams p;
    p.k2 = 0.7;
    p.d1 = 0.2;
    const double dt = 0.01;
    for (int s = 0; s < 20; ++s) {
        const double before = c.integral();
        field_step(c, eta, tumor, p, dt);
        const double expected = before + p.k2 * tumor_mass * dt;
        REQUIRE(std::abs(c.integral() - expected) <= 1e-12 * expected);
    }
}

TEST_CASE("field_step: pure decay keeps the max nonincreasing and C nonnegative") {
    const GridGeometry g = square(2.0, 0.05);
    ScalarField c(g);
    c.values = sample_nodes(g, [](const Vec& x) { return std::exp(-10 * ((x[0] - 1) * (x[0] - 1) + x[1] * x[1])); });
    AbsorptionField eta(g);
    eta.values = sample_nodes(g, [](const Vec& x) { return 0.3 * x[0]; });
    const std::vector<double> tumor(g.size(), 0.0);
    ModelParams p;
    p.k2 = 0.0;
    p.d1 = 0.3;
    double prev = 1.0;
    for (int s = 0; s < 100; ++s) {
        field_step(c, eta, tumor, p, 0.01);
        const auto rep = field_bounds_check(c, p, 1.0, 0.01 * (s + 1));
        REQUIRE(rep.ok);
        REQUIRE(rep.min >= 0.0);
        REQUIRE(rep.max <= prev);
        prev = rep.max;
    }
}

TEST_CASE("grad_interp: affine exactness, constants and first-order convergence") {
    const GridGeometry g = square(2.0, 0.1);
    ScalarField aff(g);
    aff.values = sample_nodes(g, [](const Vec& x) { return 0.3 * x[0] - 1.7 * x[1] + 2.0; });
    ScalarField flat(g, 4.2);
    RngStream rng(21, StreamDomain::test, 0);
    for (int i = 0; i < 200; ++i) {
        const Vec x = v2(0.05 + 1.9 * rng.uniform(), 0.05 + 1.9 * rng.uniform());
        const Vec ga = grad_interp(aff, x);
        REQUIRE(ga[0] == doctest::Approx(0.3).epsilon(1e-11));
        REQUIRE(ga[1] == doctest::Approx(-1.7).epsilon(1e-11));
        const Vec gf = grad_interp(flat, x);
        REQUIRE(std::abs(gf[0]) < 1e-12);
        REQUIRE(std::abs(gf[1]) < 1e-12);
    }

    auto max_err = [&](double h, auto field, auto exact) {
        const GridGeometry gh = square(2.0, h);
        ScalarField q(gh);
        q.values = sample_nodes(gh, field);
        const GradientField grad(q);
        RngStream r(22, StreamDomain::test, 0);
        double err = 0.0;
        for (int i = 0; i < 2000; ++i) {
            const Vec x = v2(0.2 + 1.6 * r.uniform(), 0.2 + 1.6 * r.uniform());
            err = std::max(err, norm(grad.at(x) - exact(x)));
        }
        return err;
    };
    auto sq = [](const Vec& x) { return dot(x, x); };
    auto sq_grad = [](const Vec& x) { return x * 2.0; };
    for (double h : {0.1, 0.05, 0.025}) CHECK(max_err(h, sq, sq_grad) <= 2.0 * h);

    auto wave = [](const Vec& x) { return std::sin(2 * x[0]) * std::cos(3 * x[1]); };
    auto wave_grad = [](const Vec& x) {
        return v2(2 * std::cos(2 * x[0]) * std::cos(3 * x[1]), -3 * std::sin(2 * x[0]) * std::sin(3 * x[1]));
    };
    const double e1 = max_err(0.1, wave, wave_grad);
    const double e2 = max_err(0.05, wave, wave_grad);
    const double e3 = max_err(0.025, wave, wave_grad);
    CHECK(e1 <= 10.0 * 0.1);
    CHECK(e2 <= 0.5 * e1);
    CHECK(e3 <= 0.5 * e2);
}

TEST_CASE("grad_interp: second-order one-sided ends are exact for quadratics at boundary nodes") {
    const GridGeometry g = square(1.0, 0.1);
    ScalarField q(g);
    q.values = sample_nodes(g, [](const Vec& x) { return x[0] * x[0] + 3 * x[1]; });
    const Vec at_node = g.node(0);
    const Vec grad = grad_interp(q, at_node);
    CHECK(grad[0] == doctest::Approx(2 * at_node[0]).epsilon(1e-10));
    CHECK(grad[1] == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("grad_interp clamps out-of-box queries and counts them") {
    const GridGeometry g = square(1.0, 0.1);
    ScalarField aff(g);
    aff.values = sample_nodes(g, [](const Vec& x) { return x[0] + 2 * x[1]; });
    ProbeStats stats;
    const Vec inside = grad_interp(aff, v2(0.5, 0.5), &stats);
    CHECK(stats.clamped == 0);
    const Vec outside = grad_interp(aff, v2(-3.0, 0.5), &stats);
    CHECK(stats.clamped == 1);
    CHECK(outside[0] == doctest::Approx(inside[0]));
    CHECK(value_interp(aff, v2(-3.0, 0.5), &stats) == doctest::Approx(0.05 + 1.0));
    CHECK(stats.clamped == 2);
}

TEST_CASE("field_bounds_check: initial field passes, violations name the node") {
    const GridGeometry g = square(1.0, 0.1);
    ModelParams p;
    p.C_max = 1.0;
    ScalarField c(g);
    c.values = sample_nodes(g, [](const Vec& x) { return std::exp(-dot(x, x)); });
    auto rep = field_bounds_check(c, p, 1.0, 0.0);
    CHECK(rep.ok);
    CHECK(rep.strict_holds);
    CHECK(rep.grad_sup > 0.0);
    CHECK(rep.hessian_sup > 0.0);

    c.values[17] = 1.5;
    rep = field_bounds_check(c, p, 1.0, 0.0);
    CHECK_FALSE(rep.ok);
    REQUIRE(rep.violation.has_value());
    CHECK(rep.violation->node == 17);
    CHECK(rep.violation->kind == "upper");
    // Allowed once the source has had time to act.
    rep = field_bounds_check(c, p, 1.0, 0.6);
    CHECK(rep.ok);
    CHECK_FALSE(rep.strict_holds);

    c.values[17] = -1e-3;
    rep = field_bounds_check(c, p, 1.0, 1.0);
    CHECK_FALSE(rep.ok);
    CHECK(rep.violation->kind == "negative");
}
