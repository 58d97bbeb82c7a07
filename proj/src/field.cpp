#include "angio/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "angio/errors.hpp"

namespace angio {

GridGeometry GridGeometry::covering(const Box& box, double spacing) {
    if (!(spacing > 0.0)) throw ConfigError("grid spacing must be > 0");
    GridGeometry g;
    g.dim = box.dim;
    g.spacing = spacing;
    g.origin = box.lo;
    for (int a = 0; a < box.dim; ++a) {
        const double cells = box.extent(a) / spacing;
        const int n = static_cast<int>(std::lround(cells));
        if (n < 2) throw ConfigError("grid needs at least 2 cells per axis");
        g.shape[static_cast<std::size_t>(a)] = n;
    }
    return g;
}

std::size_t GridGeometry::size() const {
    return static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1]) *
           static_cast<std::size_t>(shape[2]);
}

std::size_t GridGeometry::stride(int axis) const {
    std::size_t s = 1;
    for (int a = 0; a < axis; ++a) s *= static_cast<std::size_t>(shape[static_cast<std::size_t>(a)]);
    return s;
}

std::size_t GridGeometry::index(const std::array<int, kMaxDim>& idx) const {
    return static_cast<std::size_t>(idx[0]) +
           static_cast<std::size_t>(shape[0]) *
               (static_cast<std::size_t>(idx[1]) +
                static_cast<std::size_t>(shape[1]) * static_cast<std::size_t>(idx[2]));
}

std::array<int, kMaxDim> GridGeometry::multi_index(std::size_t flat) const {
    std::array<int, kMaxDim> idx{0, 0, 0};
    for (std::size_t a = 0; a < kMaxDim; ++a) {
        const auto n = static_cast<std::size_t>(shape[a]);
        idx[a] = static_cast<int>(flat % n);
        flat /= n;
    }
    return idx;
}

Vec GridGeometry::node(std::size_t flat) const {
    const auto idx = multi_index(flat);
    Vec x;
    for (int a = 0; a < dim; ++a) x[static_cast<std::size_t>(a)] = node_coord(a, idx[static_cast<std::size_t>(a)]);
    return x;
}

double GridGeometry::cell_volume() const { return std::pow(spacing, dim); }

Box GridGeometry::box() const {
    Box b;
    b.dim = dim;
    b.lo = origin;
    for (int a = 0; a < dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        b.hi[i] = origin[i] + shape[i] * spacing;
    }
    return b;
}

std::vector<double> sample_nodes(const GridGeometry& g, const std::function<double(const Vec&)>& fn) {
    std::vector<double> out(g.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = fn(g.node(k));
    return out;
}

void deposit_point(const GridGeometry& g, std::span<double> values, const Vec& x,
                   const Kernel& kernel, double w) {
    if (w == 0.0) return;
    const double R = kernel.support_radius();
    const double h = g.spacing;
    std::array<int, kMaxDim> lo{0, 0, 0};
    std::array<int, kMaxDim> hi{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        const double s_lo = (x[i] - R - g.origin[i]) / h - 0.5;
        const double s_hi = (x[i] + R - g.origin[i]) / h - 0.5;
        lo[i] = std::max(0, static_cast<int>(std::ceil(s_lo)));
        hi[i] = std::min(g.shape[i] - 1, static_cast<int>(std::floor(s_hi)));
        if (lo[i] > hi[i]) return;
    }
    std::array<int, kMaxDim> idx{};
    for (idx[2] = lo[2]; idx[2] <= hi[2]; ++idx[2]) {
        for (idx[1] = lo[1]; idx[1] <= hi[1]; ++idx[1]) {
            for (idx[0] = lo[0]; idx[0] <= hi[0]; ++idx[0]) {
                Vec d;
                for (int a = 0; a < g.dim; ++a) {
                    const auto i = static_cast<std::size_t>(a);
                    d[i] = g.node_coord(a, idx[i]) - x[i];
                }
                const double r2 = dot(d, d);
                if (r2 < R * R) values[g.index(idx)] += w * kernel.radial_sq(r2);
            }
        }
    }
}

void deposit_kernel(const GridGeometry& g, std::span<double> values, const EmpiricalMeasure& q,
                    const Kernel& kernel, double dt) {
    if (values.size() != g.size()) throw std::invalid_argument("deposit_kernel: size mismatch");
    for (const Atom& atom : q.atoms) deposit_point(g, values, atom.x, kernel, dt * q.weight * norm(atom.v));
}

void accumulate_eta(AbsorptionField& eta, const EmpiricalMeasure& q, const Kernel& k1, double dt) {
    if (q.dim != eta.geometry.dim || k1.dim() != eta.geometry.dim)
        throw std::invalid_argument("accumulate_eta: dimension mismatch between measure and grid");
    deposit_kernel(eta.geometry, eta.values, q, k1, dt);
}

namespace {

void implicit_axis(const GridGeometry& g, std::vector<double>& c, int axis, double r,
                   std::vector<double>& cp, std::vector<double>& dp) {
    const int n = g.shape[static_cast<std::size_t>(axis)];
    if (n < 2) return;
    const std::size_t st = g.stride(axis);
    cp.resize(static_cast<std::size_t>(n));
    dp.resize(static_cast<std::size_t>(n));
    const std::size_t total = g.size();
    for (std::size_t base = 0; base < total; ++base) {
        if ((base / st) % static_cast<std::size_t>(n) != 0) continue;
        // Thomas algorithm for the Neumann backward-Euler line system.
        auto at = [&](int i) -> double& { return c[base + static_cast<std::size_t>(i) * st]; };
        double b0 = 1.0 + r;
        cp[0] = -r / b0;
        dp[0] = at(0) / b0;
        for (int i = 1; i < n; ++i) {
            const double b = (i == n - 1) ? 1.0 + r : 1.0 + 2.0 * r;
            const double m = b + r * cp[static_cast<std::size_t>(i - 1)];
            cp[static_cast<std::size_t>(i)] = (i == n - 1) ? 0.0 : -r / m;
            dp[static_cast<std::size_t>(i)] = (at(i) + r * dp[static_cast<std::size_t>(i - 1)]) / m;
        }
        at(n - 1) = dp[static_cast<std::size_t>(n - 1)];
        for (int i = n - 2; i >= 0; --i)
            at(i) = dp[static_cast<std::size_t>(i)] - cp[static_cast<std::size_t>(i)] * at(i + 1);
    }
}

void explicit_diffusion(const GridGeometry& g, std::vector<double>& c, double r) {
    std::vector<double> next(c);
    const std::size_t total = g.size();
    for (std::size_t k = 0; k < total; ++k) {
        const auto idx = g.multi_index(k);
        double acc = 0.0;
        for (int a = 0; a < g.dim; ++a) {
            const auto i = static_cast<std::size_t>(a);
            const std::size_t st = g.stride(a);
            if (idx[i] > 0) acc += c[k - st] - c[k];
            if (idx[i] < g.shape[i] - 1) acc += c[k + st] - c[k];
        }
        next[k] = c[k] + r * acc;
    }
    c.swap(next);
}

}  // namespace

void field_step(ScalarField& c, const AbsorptionField& eta, std::span<const double> tumor,
                const ModelParams& p, double dt, const DiffusionOptions& opts) {
    if (!(dt > 0.0)) throw NumericalError("field_step: dt must be > 0");
    if (!(c.geometry == eta.geometry) || tumor.size() != c.values.size())
        throw std::invalid_argument("field_step: geometry mismatch");
    const double r = p.d1 * dt / (c.geometry.spacing * c.geometry.spacing);
    if (opts.scheme == DiffusionScheme::explicit_euler) {
        const double limit =
            opts.stability_limit > 0.0 ? opts.stability_limit : 0.5 / c.geometry.dim;
        if (r > limit)
            throw NumericalError(fmt::format(
                "explicit diffusion unstable: d1*dt/h^2 = {:.6g} exceeds {:.6g}", r, limit));
    }

    auto& v = c.values;
    for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] *= std::exp(-eta.values[k] * dt);
        v[k] += p.k2 * tumor[k] * dt;
    }
    if (r > 0.0) {
        if (opts.scheme == DiffusionScheme::implicit) {
            std::vector<double> cp, dp;
            for (int a = 0; a < c.geometry.dim; ++a) implicit_axis(c.geometry, v, a, r, cp, dp);
        } else {
            explicit_diffusion(c.geometry, v, r);
        }
    }
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!std::isfinite(v[k]))
            throw NumericalError(fmt::format("non-finite TAF value at node {}", k));
    }
}

namespace {

struct Stencil {
    std::size_t base = 0;
    std::array<std::size_t, kMaxDim> step{0, 0, 0};
    std::array<double, kMaxDim> frac{0, 0, 0};
    int dim = 0;
};

Stencil make_stencil(const GridGeometry& g, const Vec& x, ProbeStats* stats) {
    Stencil s;
    s.dim = g.dim;
    bool clamped = false;
    std::array<int, kMaxDim> i0{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        const int n = g.shape[i];
        double u = (x[i] - g.origin[i]) / g.spacing - 0.5;
        if (!(u >= 0.0)) {
            clamped = true;
            u = 0.0;
        } else if (u > n - 1) {
            clamped = true;
            u = n - 1;
        }
        if (n == 1) {
            i0[i] = 0;
            s.frac[i] = 0.0;
            continue;
        }
        const int j = std::min(static_cast<int>(std::floor(u)), n - 2);
        i0[i] = j;
        s.frac[i] = u - j;
        s.step[i] = g.stride(a);
    }
    if (clamped && stats) ++stats->clamped;
    s.base = g.index(i0);
    return s;
}

double apply_stencil(const Stencil& s, const double* values) {
    const int corners = 1 << s.dim;
    double acc = 0.0;
    for (int m = 0; m < corners; ++m) {
        double w = 1.0;
        std::size_t k = s.base;
        for (int a = 0; a < s.dim; ++a) {
            const auto i = static_cast<std::size_t>(a);
            if (m & (1 << a)) {
                w *= s.frac[i];
                k += s.step[i];
            } else {
                w *= 1.0 - s.frac[i];
            }
        }
        if (w != 0.0) acc += w * values[k];
    }
    return acc;
}

std::vector<double> node_derivative(const GridGeometry& g, const std::vector<double>& f, int axis) {
    std::vector<double> out(f.size(), 0.0);
    const int n = g.shape[static_cast<std::size_t>(axis)];
    if (n < 2) return out;
    const std::size_t st = g.stride(axis);
    const double h = g.spacing;
    for (std::size_t k = 0; k < f.size(); ++k) {
        const int i = g.multi_index(k)[static_cast<std::size_t>(axis)];
        if (n == 2) {
            out[k] = (i == 0 ? f[k + st] - f[k] : f[k] - f[k - st]) / h;
        } else if (i == 0) {
            out[k] = (-3.0 * f[k] + 4.0 * f[k + st] - f[k + 2 * st]) / (2.0 * h);
        } else if (i == n - 1) {
            out[k] = (3.0 * f[k] - 4.0 * f[k - st] + f[k - 2 * st]) / (2.0 * h);
        } else {
            out[k] = (f[k + st] - f[k - st]) / (2.0 * h);
        }
    }
    return out;
}

}  // namespace

double value_interp(const GridGeometry& g, std::span<const double> values, const Vec& x,
                    ProbeStats* stats) {
    return apply_stencil(make_stencil(g, x, stats), values.data());
}

double value_interp(const ScalarField& c, const Vec& x, ProbeStats* stats) {
    return value_interp(c.geometry, c.values, x, stats);
}

GradientField::GradientField(const ScalarField& c) : geometry_(c.geometry) {
    for (int a = 0; a < geometry_.dim; ++a)
        components_[static_cast<std::size_t>(a)] = node_derivative(geometry_, c.values, a);
}

Vec GradientField::at(const Vec& x, ProbeStats* stats) const {
    const Stencil s = make_stencil(geometry_, x, stats);
    Vec g;
    for (int a = 0; a < geometry_.dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        g[i] = apply_stencil(s, components_[i].data());
    }
    return g;
}

Vec grad_interp(const ScalarField& c, const Vec& x, ProbeStats* stats) {
    return GradientField(c).at(x, stats);
}

FieldBoundsReport field_bounds_check(const ScalarField& c, const ModelParams& p, double tumor_sup,
                                     double elapsed) {
    const GridGeometry& g = c.geometry;
    FieldBoundsReport rep;
    rep.bound = p.C_max + p.k2 * tumor_sup * std::max(elapsed, 0.0);
    const double slack = 1e-12 * std::max(1.0, rep.bound);
    rep.min = std::numeric_limits<double>::infinity();
    rep.max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.values.size(); ++k) {
        const double v = c.values[k];
        rep.min = std::min(rep.min, v);
        rep.max = std::max(rep.max, v);
        if (!rep.violation && (!(v >= 0.0) || v > rep.bound + slack)) {
            rep.violation = NodeViolation{k, g.node(k), v, v > rep.bound + slack ? "upper" : "negative"};
        }
    }
    rep.ok = !rep.violation.has_value();
    rep.strict_holds = rep.max <= p.C_max + slack;

    const double h = g.spacing;
    for (int a = 0; a < g.dim; ++a) {
        const auto ia = static_cast<std::size_t>(a);
        const std::size_t sa = g.stride(a);
        for (std::size_t k = 0; k < c.values.size(); ++k) {
            const auto idx = g.multi_index(k);
            if (idx[ia] < 1 || idx[ia] > g.shape[ia] - 2) continue;
            const double d = (c.values[k + sa] - c.values[k - sa]) / (2.0 * h);
            rep.grad_sup = std::max(rep.grad_sup, std::abs(d));
            const double d2 = (c.values[k + sa] - 2.0 * c.values[k] + c.values[k - sa]) / (h * h);
            rep.hessian_sup = std::max(rep.hessian_sup, std::abs(d2));
            for (int b = a + 1; b < g.dim; ++b) {
                const auto ib = static_cast<std::size_t>(b);
                if (idx[ib] < 1 || idx[ib] > g.shape[ib] - 2) continue;
                const std::size_t sb = g.stride(b);
                const double m = (c.values[k + sa + sb] - c.values[k + sa - sb] -
                                  c.values[k - sa + sb] + c.values[k - sa - sb]) /
                                 (4.0 * h * h);
                rep.hessian_sup = std::max(rep.hessian_sup, std::abs(m));
            }
        }
    }
    return rep;
}

}  // namespace angio
