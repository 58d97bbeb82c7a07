#include "angio/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "angio/errors.hpp"
#include "angio/parallel.hpp"

namespace angio {

// ---------------------------------------------------------------- grids

std::size_t VelocityGrid::size() const {
    std::size_t s = 1;
    for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(n);
    return s;
}

double VelocityGrid::cell_volume() const { return std::pow(spacing(), dim); }

Vec VelocityGrid::node(std::size_t flat) const {
    Vec v;
    for (int a = 0; a < dim; ++a) {
        v[static_cast<std::size_t>(a)] = coord(static_cast<int>(flat % static_cast<std::size_t>(n)));
        flat /= static_cast<std::size_t>(n);
    }
    return v;
}

PhaseSpaceDensity::PhaseSpaceDensity(const GridGeometry& xg, const VelocityGrid& vg)
    : x(xg), v(vg), values(xg.size() * vg.size(), 0.0) {}

double PhaseSpaceDensity::mass() const {
    double s = 0.0;
    for (double r : values) s += r;
    return s * cell_volume();
}

double PhaseSpaceDensity::min() const {
    return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

Marginals marginals(const PhaseSpaceDensity& rho) {
    const std::size_t nx = rho.x.size();
    const std::size_t nv = rho.v.size();
    const double dv = rho.v.cell_volume();
    std::vector<double> speed(nv);
    for (std::size_t j = 0; j < nv; ++j) speed[j] = norm(rho.v.node(j));
    Marginals m;
    m.pi1.assign(nx, 0.0);
    m.tilde.assign(nx, 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
        const double* r = rho.values.data() + i * nv;
        double a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < nv; ++j) {
            a += r[j];
            b += speed[j] * r[j];
        }
        m.pi1[i] = a * dv;
        m.tilde[i] = b * dv;
    }
    return m;
}

GridConvolution::GridConvolution(const GridGeometry& g, const Kernel& k) : g_(g) {
    const double h = g.spacing;
    const int r = static_cast<int>(std::ceil(k.support_radius() / h));
    const double vol = g.cell_volume();
    const int r1 = g.dim >= 2 ? r : 0;
    const int r2 = g.dim >= 3 ? r : 0;
    for (int o2 = -r2; o2 <= r2; ++o2)
        for (int o1 = -r1; o1 <= r1; ++o1)
            for (int o0 = -r; o0 <= r; ++o0) {
                const Vec d{{o0 * h, o1 * h, o2 * h}};
                const double w = k(d);
                if (w <= 0.0) continue;
                offsets_.push_back({o0, o1, o2});
                weights_.push_back(w * vol);
            }
}

void GridConvolution::apply(std::span<const double> f, std::span<double> out) const {
    const std::size_t n = g_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto idx = g_.multi_index(i);
        double s = 0.0;
        for (std::size_t k = 0; k < offsets_.size(); ++k) {
            std::array<int, kMaxDim> j = idx;
            bool inside = true;
            for (int a = 0; a < g_.dim; ++a) {
                const auto u = static_cast<std::size_t>(a);
                j[u] += offsets_[k][u];
                if (j[u] < 0 || j[u] >= g_.shape[u]) inside = false;
            }
            if (inside) s += weights_[k] * f[g_.index(j)];
        }
        out[i] = s;
    }
}

// ---------------------------------------------------------------- config

MeanFieldConfig MeanFieldConfig::desk(int dim) {
    MeanFieldConfig c;
    c.setup = SimulationSetup::desk(dim);
    return c;
}

void MeanFieldConfig::validate() const {
    if (setup.params.dim > 2) throw ConfigError("mean-field grid supports d ≤ 2");
    setup.validate();
    if (!(x_spacing >= 0.0)) throw ConfigError("constraint violated: x_spacing >= 0");
    if (nv < 0 || (nv > 0 && nv < 2)) throw ConfigError("constraint violated: nv >= 2");
    if (!(v_max >= 0.0)) throw ConfigError("constraint violated: v_max >= 0");
    if (!(dt >= 0.0)) throw ConfigError("constraint violated: dt >= 0");
    if (!(convergence_tolerance > 0.0)) throw ConfigError("constraint violated: convergence_tolerance > 0");
    if (!(safety > 0.0 && safety <= 1.0)) throw ConfigError("constraint violated: 0 < safety <= 1");
    if (setup.params.k1 == 0.0 && v_max == 0.0) throw ConfigError("constraint violated: v_max > 0 when k1 = 0");
    if (v_max > 0.0 && setup.offspring_law().support_radius() > v_max)
        throw ConfigError("constraint violated: velocity box contains the offspring support");
}

double MeanFieldConfig::resolved_x_spacing() const {
    if (x_spacing > 0.0) return x_spacing;
    return setup.params.dim == 1 ? 0.01 : 0.125;
}

int MeanFieldConfig::resolved_nv() const {
    if (nv > 0) return nv;
    return setup.params.dim == 1 ? 256 : 16;
}

double MeanFieldConfig::resolved_v_max() const {
    if (v_max > 0.0) return v_max;
    const ModelParams& p = setup.params;
    const double sd = p.sigma / std::sqrt(2.0 * p.k1);
    const double centre = std::max(setup.offspring_law().support_radius(), chemo_force_bound(p) / p.k1);
    return std::max(3.0 * sd, centre + 6.0 * sd + 0.1);
}

double StepLimits::max_dt() const { return std::min({transport, drift, diffusion}); }

// ---------------------------------------------------------------- solver

namespace {

GridGeometry x_grid(const MeanFieldConfig& cfg) {
    return GridGeometry::covering(cfg.setup.domain, cfg.resolved_x_spacing());
}

}  // namespace

MeanFieldSolver::MeanFieldSolver(const MeanFieldConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      p_(cfg.setup.params),
      k1_(Kernel::with_mass(p_.dim, cfg.setup.k1_radius, cfg.setup.k1_mass)),
      k2_(Kernel::with_mass(p_.dim, cfg.setup.k2_radius, cfg.setup.k2_mass)),
      rho_(x_grid(cfg), VelocityGrid{p_.dim, cfg.resolved_nv(), cfg.resolved_v_max()}),
      c_(rho_.x),
      conv1_(rho_.x, k1_),
      conv2_(rho_.x, k2_) {
    const SimulationSetup& s = cfg_.setup;
    const GridGeometry& xg = rho_.x;
    const VelocityGrid& vg = rho_.v;
    c_.values = sample_nodes(xg, [&](const Vec& x) { return s.initial_concentration(x); });
    const TumorIndicator ind = s.tumor_indicator();
    tumor_ = sample_nodes(xg, [&](const Vec& x) { return ind(x); });
    tumor_sup_ = ind.sup_norm();
    hist_.tilde_accum.assign(xg.size(), 0.0);
    hist_.k2_accum.assign(xg.size(), 0.0);
    hist_.eta_limit = AbsorptionField(xg);

    // Offspring law on the v-grid, rescaled to integrate to g0.
    const OffspringVelocityLaw law = s.offspring_law();
    g_.assign(vg.size(), 0.0);
    double gsum = 0.0;
    for (std::size_t j = 0; j < vg.size(); ++j) {
        g_[j] = law.density(vg.node(j));
        gsum += g_[j];
    }
    if (gsum <= 0.0) {
        // Degenerate law: all mass in the cell holding the mean.
        std::size_t flat = 0, stride = 1;
        for (int a = 0; a < vg.dim; ++a) {
            const double m = law.mean()[static_cast<std::size_t>(a)];
            const int i = std::clamp(static_cast<int>(std::floor((m + vg.v_max) / vg.spacing())), 0, vg.n - 1);
            flat += static_cast<std::size_t>(i) * stride;
            stride *= static_cast<std::size_t>(vg.n);
        }
        g_[flat] = 1.0;
        gsum = 1.0;
    }
    for (double& g : g_) g *= p_.g0 / (gsum * vg.cell_volume());

    // p0: uniform over the initial region (cell overlap fractions) times G / g0.
    std::vector<double> xw(xg.size(), 0.0);
    double xsum = 0.0;
    for (std::size_t i = 0; i < xg.size(); ++i) {
        const auto idx = xg.multi_index(i);
        double frac = 1.0;
        for (int a = 0; a < xg.dim; ++a) {
            const auto u = static_cast<std::size_t>(a);
            const double lo = xg.origin[u] + idx[u] * xg.spacing;
            const double hi = lo + xg.spacing;
            const double len = std::min(hi, s.init_region.hi[u]) - std::max(lo, s.init_region.lo[u]);
            frac *= std::max(0.0, len) / xg.spacing;
        }
        xw[i] = frac;
        xsum += frac;
    }
    if (xsum <= 0.0) throw ConfigError("constraint violated: initial region covers at least one grid cell");
    const double xnorm = 1.0 / (xsum * xg.cell_volume());
    const double vnorm = 1.0 / p_.g0;
    for (std::size_t i = 0; i < xg.size(); ++i)
        for (std::size_t j = 0; j < vg.size(); ++j) rho_.values[i * vg.size() + j] = xw[i] * xnorm * g_[j] * vnorm;

    const double hv = vg.spacing();
    const double amax = chemo_force_bound(p_) + p_.k1 * vg.v_max;
    limits_.transport = xg.spacing / vg.v_max;
    limits_.drift = amax > 0.0 ? hv / (2.0 * amax) : std::numeric_limits<double>::infinity();
    limits_.diffusion =
        p_.sigma > 0.0 ? hv * hv / (vg.dim * p_.sigma * p_.sigma) : std::numeric_limits<double>::infinity();

    const double limit = limits_.max_dt();
    if (cfg_.dt > 0.0) {
        if (cfg_.dt > limit * (1.0 + 1e-12))
            throw NumericalError(fmt::format("CFL violation: dt = {:.6g} exceeds the stability limit {:.6g}", cfg_.dt, limit));
        dt_ = cfg_.dt;
    } else {
        dt_ = cfg_.safety * limit;
    }
    // Whole number of steps per output interval.
    const double out = std::min(s.output_dt, s.T);
    const double per = std::ceil(out / dt_ - 1e-9);
    dt_ = out / per;
}

void MeanFieldSolver::set_density(const PhaseSpaceDensity& rho) {
    if (!(rho.x == rho_.x) || rho.v.n != rho_.v.n || rho.v.v_max != rho_.v.v_max)
        throw std::invalid_argument("set_density: grid mismatch");
    rho_ = rho;
}

void MeanFieldSolver::set_field(const ScalarField& c) {
    if (!(c.geometry == rho_.x)) throw std::invalid_argument("set_field: geometry mismatch");
    c_ = c;
}

void MeanFieldSolver::check_density(const char* stage) const {
    for (double r : rho_.values) {
        if (!std::isfinite(r)) throw NumericalError(fmt::format("non-finite density after {} at t = {:.6g}", stage, time_));
        if (r < -1e-12)
            throw NumericalError(
                fmt::format("density {:.3g} below -1e-12 after {} at t = {:.6g}; reduce dt", r, stage, time_));
    }
}

void MeanFieldSolver::transport_x(double tau) {
    const GridGeometry& xg = rho_.x;
    const std::size_t nv = rho_.v.size();
    const double lam = tau / xg.spacing;
    const double wall = tau / xg.spacing * rho_.cell_volume();
    std::vector<Vec> vel(nv);
    for (std::size_t j = 0; j < nv; ++j) vel[j] = rho_.v.node(j);
    for (int a = 0; a < xg.dim; ++a) {
        const auto u = static_cast<std::size_t>(a);
        const std::size_t stride = xg.stride(a);
        std::vector<double> out = rho_.values;
        for (std::size_t i = 0; i < xg.size(); ++i) {
            const int ia = xg.multi_index(i)[u];
            const bool has_right = ia + 1 < xg.shape[u];
            const double* r = rho_.values.data() + i * nv;
            if (ia == 0)
                for (std::size_t j = 0; j < nv; ++j)
                    if (vel[j][u] < 0.0) x_leak_ -= wall * vel[j][u] * r[j];
            if (!has_right) {
                for (std::size_t j = 0; j < nv; ++j)
                    if (vel[j][u] > 0.0) x_leak_ += wall * vel[j][u] * r[j];
                continue;
            }
            const double* rn = rho_.values.data() + (i + stride) * nv;
            double* o = out.data() + i * nv;
            double* on = out.data() + (i + stride) * nv;
            for (std::size_t j = 0; j < nv; ++j) {
                const double c = vel[j][u];
                const double flux = lam * (c > 0.0 ? c * r[j] : c * rn[j]);
                o[j] -= flux;
                on[j] += flux;
            }
        }
        rho_.values.swap(out);
    }
}

namespace {

/// Calls fn(first, stride) for every line of the v-grid along `axis`.
template <class Fn>
void for_each_v_line(const VelocityGrid& vg, int axis, Fn&& fn) {
    const auto n = static_cast<std::size_t>(vg.n);
    std::size_t stride = 1;
    for (int a = 0; a < axis; ++a) stride *= n;
    const std::size_t block = stride * n;
    const std::size_t total = vg.size();
    for (std::size_t outer = 0; outer < total; outer += block)
        for (std::size_t inner = 0; inner < stride; ++inner) fn(outer + inner, stride);
}

}  // namespace

void MeanFieldSolver::drift_v(double tau) {
    const GridGeometry& xg = rho_.x;
    const VelocityGrid& vg = rho_.v;
    const std::size_t nv = vg.size();
    const int n = vg.n;
    const double hv = vg.spacing();
    const double lam = tau / hv;
    const double wall = tau / hv * rho_.cell_volume();
    const GradientField grad(c_);
    std::vector<double> leak(xg.size(), 0.0);
    parallel_for(xg.size(), cfg_.workers, [&](std::size_t i) {
        const Vec force = p_.d2 == 0.0 ? Vec{} : chemo_force(grad.at(xg.node(i)), p_);
        double* r = rho_.values.data() + i * nv;
        for (int a = 0; a < vg.dim; ++a) {
            const double f = force[static_cast<std::size_t>(a)];
            const double a_lo = f + p_.k1 * vg.v_max;
            const double a_hi = f - p_.k1 * vg.v_max;
            for_each_v_line(vg, a, [&](std::size_t first, std::size_t stride) {
                double* line = r + first;
                if (a_lo < 0.0) leak[i] -= wall * a_lo * line[0];
                if (a_hi > 0.0) leak[i] += wall * a_hi * line[(n - 1) * stride];
                // Sweep faces left to right; the flux into cell k+1 uses the
                // old value of cell k, kept in `prev`.
                double prev = line[0];
                for (int k = 0; k + 1 < n; ++k) {
                    double& cur = line[k * stride];
                    double& next = line[(k + 1) * stride];
                    const double old_next = next;
                    const double af = f - p_.k1 * (-vg.v_max + (k + 1) * hv);
                    const double flux = lam * (af > 0.0 ? af * prev : af * old_next);
                    cur -= flux;
                    next += flux;
                    prev = old_next;
                }
            });
        }
    });
    for (double l : leak) v_leak_ += l;
}

void MeanFieldSolver::diffuse_v(double tau) {
    if (p_.sigma == 0.0) return;
    const GridGeometry& xg = rho_.x;
    const VelocityGrid& vg = rho_.v;
    const std::size_t nv = vg.size();
    const int n = vg.n;
    const double hv = vg.spacing();
    const double D = 0.5 * p_.sigma * p_.sigma;
    const double mu = D * tau / (hv * hv);
    if (2.0 * vg.dim * mu > 1.0 + 1e-12)
        throw NumericalError(fmt::format("velocity diffusion unstable: sigma^2 dt / h_v^2 = {:.4g} exceeds {:.4g}",
                                         2.0 * mu, 1.0 / vg.dim));
    const double wall = 2.0 * D * tau / (hv * hv) * rho_.cell_volume();
    std::vector<double> leak(xg.size(), 0.0);
    parallel_for(xg.size(), cfg_.workers, [&](std::size_t i) {
        double* r = rho_.values.data() + i * nv;
        // All axes use the values at the start of the substep.
        thread_local std::vector<double> old;
        old.assign(r, r + nv);
        for (int a = 0; a < vg.dim; ++a) {
            for_each_v_line(vg, a, [&](std::size_t first, std::size_t stride) {
                const double* o = old.data() + first;
                double* line = r + first;
                leak[i] += wall * (o[0] + o[(n - 1) * stride]);
                for (int k = 0; k + 1 < n; ++k) {
                    const double flux = mu * (o[k * stride] - o[(k + 1) * stride]);
                    line[k * stride] -= flux;
                    line[(k + 1) * stride] += flux;
                }
            });
        }
    });
    for (double l : leak) v_leak_ += l;
}

void MeanFieldSolver::apply_source(double tau) {
    if (p_.alpha1 == 0.0 && p_.beta1 == 0.0 && p_.gamma == 0.0) return;
    const Marginals m = marginals(rho_);
    const std::size_t nv = rho_.v.size();
    parallel_for(rho_.x.size(), cfg_.workers, [&](std::size_t i) {
        const double c = std::max(0.0, c_.values[i]);
        const double birth = alpha_rate(c, p_) * m.pi1[i] + beta_rate(c, p_) * hist_.tilde_accum[i];
        const double hz = p_.gamma * saturation_h(hist_.k2_accum[i]);
        double* r = rho_.values.data() + i * nv;
        for (std::size_t j = 0; j < nv; ++j) r[j] += tau * (g_[j] * birth - hz * r[j]);
    });
}

void MeanFieldSolver::kinetic_half(double tau) {
    transport_x(tau);
    drift_v(tau);
    diffuse_v(tau);
}

void MeanFieldSolver::advance_history(const Marginals& m, double tau) {
    const std::size_t n = rho_.x.size();
    std::vector<double> k1t(n), k2t(n);
    conv1_.apply(m.tilde, k1t);
    conv2_.apply(m.tilde, k2t);
    for (std::size_t i = 0; i < n; ++i) {
        hist_.tilde_accum[i] += tau * m.tilde[i];
        hist_.k2_accum[i] += tau * k2t[i];
        hist_.eta_limit.values[i] += tau * k1t[i];
    }
}

void MeanFieldSolver::kinetic_step() {
    const double dt = dt_;
    const Marginals m0 = marginals(rho_);
    kinetic_half(0.5 * dt);
    apply_source(dt);
    diffuse_v(0.5 * dt);
    drift_v(0.5 * dt);
    transport_x(0.5 * dt);
    check_density("kinetic step");
    advance_history(m0, dt);
    if (!frozen_) field_step(c_, hist_.eta_limit, tumor_, p_, dt, cfg_.setup.diffusion);
    time_ += dt;
}

double mass_rhs(const Marginals& m, std::span<const double> c, const HistoryIntegrals& hist,
                const ModelParams& p, const GridGeometry& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.pi1.size(); ++i) {
        const double ci = std::max(0.0, c[i]);
        s += p.g0 * alpha_rate(ci, p) * m.pi1[i] + p.g0 * beta_rate(ci, p) * hist.tilde_accum[i] -
             p.gamma * saturation_h(hist.k2_accum[i]) * m.pi1[i];
    }
    return s * g.cell_volume();
}

// ---------------------------------------------------------------- driver

namespace {

MeanFieldSnapshot snapshot(const MeanFieldSolver& s) {
    const Marginals m = marginals(s.density());
    return MeanFieldSnapshot{s.time(), s.density().mass(), s.density().values, s.field().values, m.pi1, m.tilde};
}

}  // namespace

MeanFieldResult solve_system(const MeanFieldConfig& cfg) {
    MeanFieldSolver solver(cfg);
    const ModelParams& p = cfg.setup.params;
    MeanFieldResult res;
    res.x = solver.density().x;
    res.v = solver.density().v;
    res.dt = solver.dt();
    res.label = p.dim == 1 ? "d=1 implementation-only verification configuration" : "d=2 coarse grid";
    const double tumor_sup = cfg.setup.tumor_indicator().sup_norm();

    const std::size_t per_output =
        static_cast<std::size_t>(std::llround(std::min(cfg.setup.output_dt, cfg.setup.T) / solver.dt()));
    const std::size_t steps = static_cast<std::size_t>(std::llround(cfg.setup.T / solver.dt()));
    res.times.push_back(0.0);
    res.mass.push_back(solver.density().mass());
    res.snapshots.push_back(snapshot(solver));
    res.min_rho = solver.density().min();
    res.field_bounds = field_bounds_check(solver.field(), p, tumor_sup, 0.0);

    Marginals m_prev = marginals(solver.density());
    std::vector<double> c_prev = solver.field().values;
    HistoryIntegrals h_prev = solver.history();
    double r_prev = mass_rhs(m_prev, c_prev, h_prev, p, res.x);
    double leak_prev = solver.v_leak();
    for (std::size_t n = 1; n <= steps; ++n) {
        try {
            solver.kinetic_step();
        } catch (const NumericalError& e) {
            throw NumericalError(fmt::format("step {}: {}", n, e.what()));
        }
        const double mass_prev = res.mass.back();
        const double m_now = solver.density().mass();
        res.times.push_back(solver.time());
        res.mass.push_back(m_now);
        const Marginals m_next = marginals(solver.density());
        const auto& c_next = solver.field().values;
        const HistoryIntegrals& h_next = solver.history();
        const double r_now = mass_rhs(m_next, c_next, h_next, p, res.x);
        // Splitting error bound: sum of the separate changes of the right side
        // caused by the density, field and history updates.
        const double r_rho = mass_rhs(m_next, c_prev, h_prev, p, res.x);
        const double r_c = mass_rhs(m_next, c_next, h_prev, p, res.x);
        MassCheckRow row;
        row.t = solver.time();
        row.dmdt = (m_now - mass_prev) / solver.dt();
        row.rhs = 0.5 * (r_prev + r_now);
        row.residual = std::abs(row.dmdt - row.rhs);
        row.estimate = 0.5 * (std::abs(r_rho - r_prev) + std::abs(r_c - r_rho) + std::abs(r_now - r_c));
        row.estimate = std::max(row.estimate, 1e-12 * std::max({1.0, std::abs(r_now), std::abs(row.dmdt)}));
        res.mass_check.push_back(row);
        for (std::size_t i = 0; i < h_next.k2_accum.size(); ++i)
            if (h_next.k2_accum[i] < h_prev.k2_accum[i] || h_next.tilde_accum[i] < h_prev.tilde_accum[i] ||
                h_next.eta_limit.values[i] < h_prev.eta_limit.values[i])
                res.history_monotone = false;
        r_prev = r_now;
        m_prev = m_next;
        c_prev = c_next;
        h_prev = h_next;

        const double leak_step = solver.v_leak() - leak_prev;
        leak_prev = solver.v_leak();
        if (m_now > 0.0) res.max_v_leak_rate = std::max(res.max_v_leak_rate, leak_step / (solver.dt() * m_now));
        res.min_rho = std::min(res.min_rho, solver.density().min());

        const FieldBoundsReport fb = field_bounds_check(solver.field(), p, tumor_sup, solver.time());
        if (res.field_bounds.ok) res.field_bounds = fb;
        if (n % per_output == 0 || n == steps) res.snapshots.push_back(snapshot(solver));
    }
    res.v_leak = solver.v_leak();
    res.x_leak = solver.x_leak();
    if (res.max_v_leak_rate > cfg.leak_tolerance)
        res.warnings.push_back(fmt::format("velocity-boundary leakage rate {:.3g} exceeds {:.3g} per unit time",
                                           res.max_v_leak_rate, cfg.leak_tolerance));
    if (res.x_leak > 1e-6 * std::max(1.0, res.final_mass()))
        res.warnings.push_back(fmt::format("mass {:.3g} reached the spatial boundary and was reflected", res.x_leak));
    return res;
}

SelfConvergence self_convergence(const MeanFieldConfig& cfg) {
    MeanFieldConfig coarse = cfg;
    coarse.x_spacing = 2.0 * cfg.resolved_x_spacing();
    coarse.nv = std::max(2, cfg.resolved_nv() / 2);
    coarse.v_max = cfg.resolved_v_max();
    if (cfg.dt > 0.0) coarse.dt = 2.0 * cfg.dt;
    MeanFieldConfig fine = cfg;
    fine.v_max = cfg.resolved_v_max();
    SelfConvergence r;
    r.coarse = solve_system(coarse).final_mass();
    r.fine = solve_system(fine).final_mass();
    r.relative_change = std::abs(r.coarse - r.fine) / std::max(std::abs(r.fine), 1e-300);
    r.pass = r.relative_change <= cfg.convergence_tolerance;
    return r;
}

}  // namespace angio
