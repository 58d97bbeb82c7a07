#include "angio/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include <fmt/core.h>

#include "angio/errors.hpp"
#include "angio/parallel.hpp"
#include "angio/stats.hpp"

namespace angio {

// ---------------------------------------------------------------- metrics

std::vector<double> pairings(const EmpiricalMeasure& mu, const TestFunctionDictionary& dict) {
    std::vector<double> out(dict.size(), 0.0);
    for (const Atom& a : mu.atoms)
        for (std::size_t k = 0; k < dict.size(); ++k) out[k] += dict.value(k, a.x, a.v);
    for (double& o : out) o *= mu.weight;
    return out;
}

std::vector<double> pairings(const PhaseSpaceDensity& rho, const TestFunctionDictionary& dict) {
    const std::size_t nx = rho.x.size(), nv = rho.v.size();
    std::vector<Vec> xs(nx), vs(nv);
    for (std::size_t i = 0; i < nx; ++i) xs[i] = rho.x.node(i);
    for (std::size_t j = 0; j < nv; ++j) vs[j] = rho.v.node(j);
    std::vector<double> out(dict.size(), 0.0);
    std::vector<double> vp(nv);
    for (std::size_t k = 0; k < dict.size(); ++k) {
        for (std::size_t j = 0; j < nv; ++j) vp[j] = dict.v_part(k, vs[j]);
        double s = 0.0;
        for (std::size_t i = 0; i < nx; ++i) {
            const double* r = rho.values.data() + i * nv;
            double inner = 0.0;
            for (std::size_t j = 0; j < nv; ++j) inner += vp[j] * r[j];
            s += dict.x_part(k, xs[i]) * inner;
        }
        out[k] = s * rho.cell_volume();
    }
    return out;
}

std::vector<double> pairings(const MeasureView& mu, const TestFunctionDictionary& dict) {
    return std::visit([&](const auto* m) { return pairings(*m, dict); }, mu);
}

double weak_metric(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("weak_metric: pairing vectors differ in length");
    double s = 0.0, w = 0.5;
    for (std::size_t k = 0; k < a.size(); ++k, w *= 0.5) s += w * std::min(std::abs(a[k] - b[k]), 1.0);
    return s;
}

double weak_metric(const MeasureView& mu1, const MeasureView& mu2, const TestFunctionDictionary& dict) {
    return weak_metric(pairings(mu1, dict), pairings(mu2, dict));
}

namespace {

using AtomKey = std::tuple<double, double, double, double, double, double>;

AtomKey key_of(const Atom& a) { return {a.x[0], a.x[1], a.x[2], a.v[0], a.v[1], a.v[2]}; }

double weighted_tv_atoms(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    std::map<AtomKey, std::pair<double, double>> w;  // key -> (signed weight, speed)
    for (const Atom& at : a.atoms) {
        auto& e = w[key_of(at)];
        e.first += a.weight;
        e.second = norm(at.v);
    }
    for (const Atom& at : b.atoms) {
        auto& e = w[key_of(at)];
        e.first -= b.weight;
        e.second = norm(at.v);
    }
    double s = 0.0;
    for (const auto& [k, e] : w) s += std::abs(e.first) * (1.0 + e.second);
    return s;
}

double weighted_tv_density(const PhaseSpaceDensity& a, const PhaseSpaceDensity& b) {
    if (!(a.x == b.x) || a.v.n != b.v.n || a.v.v_max != b.v.v_max || a.v.dim != b.v.dim)
        throw std::invalid_argument("weighted_tv: density grids differ");
    const std::size_t nv = a.v.size();
    std::vector<double> speed(nv);
    for (std::size_t j = 0; j < nv; ++j) speed[j] = norm(a.v.node(j));
    double s = 0.0;
    for (std::size_t n = 0; n < a.values.size(); ++n) s += std::abs(a.values[n] - b.values[n]) * (1.0 + speed[n % nv]);
    return s * a.cell_volume();
}

}  // namespace

double weighted_tv(const MeasureView& mu1, const MeasureView& mu2) {
    if (mu1.index() != mu2.index())
        throw std::invalid_argument("weighted_tv: mixed atomic/density inputs; use weak_metric");
    if (mu1.index() == 0) return weighted_tv_atoms(*std::get<0>(mu1), *std::get<0>(mu2));
    return weighted_tv_density(*std::get<1>(mu1), *std::get<1>(mu2));
}

// ---------------------------------------------------------------- domination

DominatingParams DominatingParams::from(const ModelParams& p, const OffspringVelocityLaw& law, double T) {
    DominatingParams d;
    d.alpha_sup = p.alpha1;
    d.beta_sup = p.beta1;
    d.g0 = p.g0;
    d.C = std::max(chemo_force_bound(p), law.support_radius());
    d.sigma = p.sigma;
    d.k1 = p.k1;
    d.T = T;
    return d;
}

double sample_dominating_rate(const DominatingParams& dp, RngStream& rng) {
    const double T = dp.T;
    double z = dp.alpha_sup * dp.g0 + dp.C * dp.beta_sup * dp.g0 * T * (T + 1.0);
    const double noise_coeff = dp.beta_sup * dp.g0 * T * dp.sigma;
    if (noise_coeff == 0.0 || T <= 0.0) return z;
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dp.substeps_per_unit * T)));
    const double h = T / static_cast<double>(m);
    // Increment i has sd e^{k1 r_i} sqrt((e^{2 k1 h} - 1) / (2 k1)), r_i = i h.
    double sd = dp.k1 == 0.0 ? std::sqrt(h) : std::sqrt(std::expm1(2.0 * dp.k1 * h) / (2.0 * dp.k1));
    const double growth = std::exp(dp.k1 * h);
    double integral = 0.0, sup = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        integral += sd * rng.normal();
        sup = std::max(sup, std::abs(integral));
        sd *= growth;
    }
    return z + noise_coeff * sup;
}

DominatingRun dominating_process(const DominatingParams& dp, RngStream& rng) {
    DominatingRun run;
    std::vector<double> births{0.0};
    run.first_z = sample_dominating_rate(dp, rng);
    std::vector<double> rates{run.first_z};
    run.sum_z = run.first_z;
    for (std::size_t i = 0; i < births.size(); ++i) {
        const double z = rates[i];
        if (z <= 0.0 || !dp.branching) continue;
        double t = births[i] + rng.exponential(z);
        while (t < dp.T) {
            if (births.size() >= dp.cap)
                throw NumericalError(fmt::format("dominating process exceeded the cap of {} particles", dp.cap));
            births.push_back(t);
            const double zc = sample_dominating_rate(dp, rng);
            rates.push_back(zc);
            run.sum_z += zc;
            t += rng.exponential(z);
        }
    }
    run.n_total = births.size();
    return run;
}

RateEstimate estimate_rate(const DominatingParams& dp, std::size_t draws, std::uint64_t seed, unsigned workers) {
    constexpr std::size_t kChunk = 1000;
    const std::size_t chunks = (draws + kChunk - 1) / kChunk;
    std::vector<RunningStats> parts(chunks);
    parallel_for(chunks, workers, [&](std::size_t c) {
        RngStream rng(seed, StreamDomain::dominating_rate, c);
        const std::size_t end = std::min(draws, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) parts[c].add(sample_dominating_rate(dp, rng));
    });
    RunningStats all;
    for (const auto& p : parts) all.merge(p);
    return RateEstimate{all.mean(), all.se(), all.count()};
}

WaldReport wald_check(const DominatingParams& dp, std::size_t n_trials, std::uint64_t seed, unsigned workers) {
    if (n_trials < 2) throw std::invalid_argument("wald_check needs at least 2 trials");
    std::vector<double> s(n_trials), n(n_trials);
    parallel_for(n_trials, workers, [&](std::size_t i) {
        RngStream rng(seed, StreamDomain::dominating, i);
        const DominatingRun r = dominating_process(dp, rng);
        s[i] = r.sum_z;
        n[i] = static_cast<double>(r.n_total);
    });
    RunningStats ss, ns;
    for (std::size_t i = 0; i < n_trials; ++i) {
        ss.add(s[i]);
        ns.add(n[i]);
    }
    // E[Z] from an independent batch keeps its error uncorrelated with the runs.
    const RateEstimate z = estimate_rate(dp, n_trials, mix64(seed ^ 0x5A5A5A5AULL), workers);
    WaldReport r;
    r.trials = n_trials;
    r.mean_sum_z = ss.mean();
    r.mean_n = ns.mean();
    r.mean_z = z.mean;
    r.discrepancy = r.mean_sum_z - r.mean_z * r.mean_n;
    const double cov = sample_covariance(s, n) / static_cast<double>(n_trials);
    const double var = ss.se() * ss.se() + r.mean_z * r.mean_z * ns.se() * ns.se() +
                       r.mean_n * r.mean_n * z.se * z.se - 2.0 * r.mean_z * cov;
    r.se = std::sqrt(std::max(var, 0.0));
    r.exact_rate_bound = std::exp(r.mean_z * dp.T);
    r.pass = std::abs(r.discrepancy) <= 3.0 * r.se || (r.se == 0.0 && std::abs(r.discrepancy) <= 1e-9 * std::max(1.0, r.mean_sum_z));
    return r;
}

DominationReport domination_check(const std::vector<double>& sup_masses, const RateEstimate& lambda, double T) {
    RunningStats st;
    for (double m : sup_masses) st.add(m);
    DominationReport r;
    r.runs = sup_masses.size();
    r.mean_sup = st.mean();
    r.se_sup = st.se();
    r.lambda = lambda;
    r.bound = std::exp(lambda.mean * T);
    r.pass = r.mean_sup <= r.bound + 3.0 * r.se_sup;
    return r;
}

// ---------------------------------------------------------------- extinction

double extinction_bound(double M0, double gamma, double T) {
    if (!(M0 > 0.0)) throw std::invalid_argument("extinction_bound: M0 must be > 0");
    return std::exp(std::log(M0) - gamma * T);
}

ExtinctionRow extinction_check(const std::vector<TrajectoryRecord>& runs, double gamma, double T) {
    ExtinctionRow row;
    row.runs = runs.size();
    row.bound = extinction_bound(1.0, gamma, T);
    for (const TrajectoryRecord& r : runs) {
        if (row.n == 0) row.n = r.n0;
        const double m0 = static_cast<double>(r.counts.front()) / static_cast<double>(r.n0);
        const double bound = extinction_bound(m0, gamma, T);
        if (r.min_mass() >= 0.5 * bound) ++row.above;
        row.bound = bound;
    }
    if (row.runs > 0) {
        const double n = static_cast<double>(row.runs);
        row.fraction = static_cast<double>(row.above) / n;
        row.se = std::sqrt(row.fraction * (1.0 - row.fraction) / n);
    }
    return row;
}

bool extinction_fractions_nondecreasing(const std::vector<ExtinctionRow>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double tol = std::max(rows[i].se, rows[i - 1].se);
        if (rows[i].fraction < rows[i - 1].fraction - tol) return false;
    }
    return true;
}

// ---------------------------------------------------------------- martingales

const std::vector<QvTotals>& martingale_qv(const TrajectoryRecord& run) { return run.qv; }

std::vector<QvScalingRow> qv_scaling(const std::vector<TrajectoryRecord>& small,
                                     const std::vector<TrajectoryRecord>& large, double lo, double hi) {
    if (small.empty() || large.empty()) throw std::invalid_argument("qv_scaling: empty ensemble");
    const std::size_t nf = small.front().qv.size();
    std::vector<QvScalingRow> rows;
    for (std::size_t f = 0; f < nf; ++f) {
        for (int part = 0; part < 3; ++part) {
            auto pick = [&](const QvTotals& q) { return part == 0 ? q.brownian : (part == 1 ? q.birth : q.death); };
            RunningStats a, b;
            for (const auto& r : small) a.add(pick(r.qv.at(f)));
            for (const auto& r : large) b.add(pick(r.qv.at(f)));
            QvScalingRow row;
            row.part = part == 0 ? "brownian" : (part == 1 ? "birth" : "death");
            row.function = small.front().qv[f].function;
            row.mean_small = a.mean();
            row.se_small = a.se();
            row.mean_large = b.mean();
            row.se_large = b.se();
            row.ratio = a.mean() > 0.0 ? b.mean() / a.mean() : 0.0;
            row.pass = a.mean() > 0.0 && row.ratio >= lo && row.ratio <= hi;
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------- OU semigroup

namespace {

/// Exact joint draw of (B_t, int_0^t B ds) per component.
void draw_brownian_pair(RngStream& rng, int dim, double t, Vec& b, Vec& integral) {
    const double sb = std::sqrt(t);
    const double si = std::sqrt(t * t * t / 12.0);
    for (int a = 0; a < dim; ++a) {
        const auto k = static_cast<std::size_t>(a);
        b[k] = sb * rng.normal();
        integral[k] = 0.5 * t * b[k] + si * rng.normal();
    }
}

}  // namespace

SemigroupReport ou_semigroup_check(const PhaseFunction& phi, int dim, const Vec& x, const Vec& v, double t,
                                   std::size_t n_samples, std::uint64_t seed, double h) {
    if (!(t > 0.0)) throw std::invalid_argument("ou_semigroup_check: t must be > 0");
    if (n_samples < 2) throw std::invalid_argument("ou_semigroup_check: need at least 2 samples");
    constexpr std::size_t kChunk = 10000;
    const std::size_t chunks = (n_samples + kChunk - 1) / kChunk;
    struct Acc {
        RunningStats a;
        std::array<RunningStats, kMaxDim> g, fd, fd2, diff;
    };
    std::vector<Acc> parts(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        RngStream rng(seed, StreamDomain::semigroup, c);
        Acc& acc = parts[c];
        const std::size_t end = std::min(n_samples, (c + 1) * kChunk);
        for (std::size_t s = c * kChunk; s < end; ++s) {
            Vec b, in;
            draw_brownian_pair(rng, dim, t, b, in);
            const Vec xt = x + v * t + in;
            const Vec vt = v + b;
            const double f = phi(xt, vt);
            acc.a.add(f);
            for (int a = 0; a < dim; ++a) {
                const auto k = static_cast<std::size_t>(a);
                const double w = 6.0 / t * (in[k] / t - b[k] / 3.0);
                Vec e;
                e[k] = 1.0;
                // Shifting v by eps moves x_t by eps t and v_t by eps.
                const double fp = phi(xt + e * (h * t), vt + e * h);
                const double fm = phi(xt - e * (h * t), vt - e * h);
                const double fp2 = phi(xt + e * (2.0 * h * t), vt + e * (2.0 * h));
                const double fm2 = phi(xt - e * (2.0 * h * t), vt - e * (2.0 * h));
                const double d1 = (fp - fm) / (2.0 * h);
                acc.g[k].add(w * f);
                acc.fd[k].add(d1);
                acc.fd2[k].add((fp2 - fm2) / (4.0 * h));
                acc.diff[k].add(w * f - d1);
            }
        }
    }
    Acc all;
    for (const Acc& p : parts) {
        all.a.merge(p.a);
        for (std::size_t k = 0; k < kMaxDim; ++k) {
            all.g[k].merge(p.g[k]);
            all.fd[k].merge(p.fd[k]);
            all.fd2[k].merge(p.fd2[k]);
            all.diff[k].merge(p.diff[k]);
        }
    }
    SemigroupReport r;
    r.t = t;
    r.samples = n_samples;
    r.A = all.a.mean();
    r.A_se = all.a.se();
    r.max_excess = -1e300;
    for (int a = 0; a < dim; ++a) {
        const auto k = static_cast<std::size_t>(a);
        r.G[k] = all.g[k].mean();
        r.G_se[k] = all.g[k].se();
        r.fd[k] = all.fd[k].mean();
        r.fd_truncation[k] = std::abs(all.fd2[k].mean() - all.fd[k].mean()) / 3.0;
        r.diff_se[k] = all.diff[k].se();
        const double excess = std::abs(r.G[k] - r.fd[k]) - (3.0 * r.diff_se[k] + r.fd_truncation[k]);
        r.max_excess = std::max(r.max_excess, excess);
    }
    r.pass = r.max_excess <= 0.0;
    return r;
}

SemigroupBoundReport ou_semigroup_bounds(const PhaseFunction& phi, double phi_sup, const std::vector<double>& ts,
                                         const std::vector<double>& vs, std::size_t n_samples,
                                         std::uint64_t seed) {
    auto sweep = [&](std::size_t n, std::uint64_t s, std::vector<SemigroupBoundRow>* rows) {
        double sup_val = 0.0, sup_grad = 0.0;
        std::uint64_t idx = 0;
        for (double t : ts)
            for (double v0 : vs) {
                RngStream rng(s, StreamDomain::semigroup, 1000000 + idx++);
                RunningStats val, grad;
                for (std::size_t i = 0; i < n; ++i) {
                    Vec b, in;
                    draw_brownian_pair(rng, 1, t, b, in);
                    Vec xt = in;
                    xt[0] += v0 * t;
                    Vec vt = b;
                    vt[0] += v0;
                    const double f = (1.0 + std::abs(vt[0])) * phi(xt, vt);
                    val.add(f);
                    grad.add(6.0 / t * (in[0] / t - b[0] / 3.0) * f);
                }
                SemigroupBoundRow row;
                row.t = t;
                row.v = v0;
                row.value_ratio = std::abs(val.mean()) / (phi_sup * (1.0 + std::abs(v0)));
                row.grad_ratio = std::abs(grad.mean()) / (phi_sup * ((1.0 + std::abs(v0)) / std::sqrt(t) + 1.0));
                sup_val = std::max(sup_val, row.value_ratio);
                sup_grad = std::max(sup_grad, row.grad_ratio);
                if (rows) rows->push_back(row);
            }
        return std::pair{sup_val, sup_grad};
    };
    SemigroupBoundReport r;
    const auto [sv, sg] = sweep(n_samples, seed, &r.rows);
    const auto [sv2, sg2] = sweep(2 * n_samples, mix64(seed + 1), nullptr);
    static_cast<void>(sv2);
    r.sup_value_ratio = sv;
    r.sup_grad_ratio = sg;
    r.sup_grad_ratio_doubled = sg2;
    r.finite = std::isfinite(sv) && std::isfinite(sg) && std::isfinite(sg2);
    r.stable = r.finite && std::abs(sg - sg2) <= 0.25 * std::max(sg, sg2);
    return r;
}

// ---------------------------------------------------------------- convergence

EmpiricalMeasure resample_density(const PhaseSpaceDensity& rho, std::size_t n, RngStream& rng) {
    EmpiricalMeasure q;
    q.dim = rho.x.dim;
    q.weight = 1.0 / static_cast<double>(n);
    const double mass = rho.mass();
    const auto count = static_cast<std::size_t>(std::llround(mass * static_cast<double>(n)));
    std::vector<double> cdf(rho.values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) {
        acc += std::max(0.0, rho.values[i]);
        cdf[i] = acc;
    }
    if (acc <= 0.0) return q;
    const std::size_t nv = rho.v.size();
    const double hx = rho.x.spacing, hv = rho.v.spacing();
    for (std::size_t a = 0; a < count; ++a) {
        const double u = rng.uniform() * acc;
        const auto cell = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        const std::size_t c = std::min(cell, cdf.size() - 1);
        Vec x = rho.x.node(c / nv), v = rho.v.node(c % nv);
        for (int d = 0; d < q.dim; ++d) {
            const auto k = static_cast<std::size_t>(d);
            x[k] += (rng.uniform() - 0.5) * hx;
            v[k] += (rng.uniform() - 0.5) * hv;
        }
        q.atoms.push_back(Atom{x, v});
    }
    return q;
}

namespace {

const MeanFieldSnapshot& reference_at(const MeanFieldResult& ref, double t) {
    for (const auto& s : ref.snapshots)
        if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return s;
    throw std::invalid_argument(fmt::format("reference has no snapshot at t = {:.6g}; output times differ", t));
}

PhaseSpaceDensity density_of(const MeanFieldResult& ref, const MeanFieldSnapshot& s) {
    PhaseSpaceDensity rho;
    rho.x = ref.x;
    rho.v = ref.v;
    rho.values = s.rho;
    return rho;
}

void check_geometry(const SimulationSetup& setup, const MeanFieldResult& ref) {
    if (setup.params.dim != ref.x.dim)
        throw std::invalid_argument(
            fmt::format("geometry mismatch: simulation d = {} but reference d = {}", setup.params.dim, ref.x.dim));
    const Box b = ref.x.box();
    for (int a = 0; a < ref.x.dim; ++a) {
        const auto k = static_cast<std::size_t>(a);
        if (std::abs(b.lo[k] - setup.domain.lo[k]) > 0.5 * ref.x.spacing ||
            std::abs(b.hi[k] - setup.domain.hi[k]) > 0.5 * ref.x.spacing)
            throw std::invalid_argument("geometry mismatch: simulation domain differs from the reference grid");
    }
}

ConvergenceRow summarise(std::size_t n, std::vector<double> values) {
    RunningStats st;
    for (double v : values) st.add(v);
    return ConvergenceRow{n, std::move(values), st.mean(), st.se()};
}

std::optional<double> loglog_slope(const std::vector<ConvergenceRow>& rows) {
    if (rows.size() < 2) return std::nullopt;
    std::vector<double> lx, ly;
    for (const auto& r : rows) {
        if (!(r.mean > 0.0)) return std::nullopt;
        lx.push_back(std::log(static_cast<double>(r.n)));
        ly.push_back(std::log(r.mean));
    }
    return ols_slope(lx, ly);
}

}  // namespace

double sup_metric(const TrajectoryRecord& run, const MeanFieldResult& ref, const TestFunctionDictionary& dict) {
    if (run.dim != ref.x.dim) throw std::invalid_argument("geometry mismatch: run and reference dimensions differ");
    double sup = 0.0;
    for (const Snapshot& s : run.snapshots) {
        const MeanFieldSnapshot& r = reference_at(ref, s.t);
        const EmpiricalMeasure q = empirical_from(s, run.dim, run.n0);
        const PhaseSpaceDensity rho = density_of(ref, r);
        sup = std::max(sup, weak_metric(MeasureView{&q}, MeasureView{&rho}, dict));
    }
    return sup;
}

bool strictly_decreasing(const std::vector<ConvergenceRow>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double overlap = rows[i].se + rows[i - 1].se;
        if (!(rows[i].mean < rows[i - 1].mean + overlap)) return false;
    }
    return true;
}

ConvergenceTable convergence_study(const SimulationSetup& setup, const MeanFieldResult& ref,
                                   const std::vector<std::size_t>& ns, std::size_t seeds, std::uint64_t master_seed,
                                   const TestFunctionDictionary& dict, unsigned workers, bool with_resampling) {
    check_geometry(setup, ref);
    if (dict.dim() != setup.params.dim) throw std::invalid_argument("geometry mismatch: dictionary dimension");
    ConvergenceTable table;
    // Reference pairings per output time are shared by every run.
    std::vector<std::pair<double, std::vector<double>>> ref_pairs;
    for (const auto& s : ref.snapshots) {
        const PhaseSpaceDensity rho = density_of(ref, s);
        ref_pairs.emplace_back(s.t, pairings(rho, dict));
    }
    auto ref_pairing = [&](double t) -> const std::vector<double>& {
        for (const auto& [rt, p] : ref_pairs)
            if (std::abs(rt - t) <= 1e-9 * std::max(1.0, std::abs(t))) return p;
        throw std::invalid_argument(fmt::format("reference has no snapshot at t = {:.6g}; output times differ", t));
    };

    for (std::size_t n : ns) {
        std::vector<double> values(seeds, 0.0);
        parallel_for(seeds, workers, [&](std::size_t s) {
            SimulationSetup su = setup;
            su.n_tips = n;
            su.record_fields = false;
            su.check_bounds = false;
            su.workers = 1;
            const TrajectoryRecord rec = run(su, ensemble_seed(master_seed, n, s));
            double sup = 0.0;
            for (const Snapshot& snap : rec.snapshots) {
                const EmpiricalMeasure q = empirical_from(snap, rec.dim, rec.n0);
                sup = std::max(sup, weak_metric(pairings(q, dict), ref_pairing(snap.t)));
            }
            values[s] = sup;
        });
        table.rows.push_back(summarise(n, std::move(values)));

        if (with_resampling) {
            std::vector<double> rv(seeds, 0.0);
            parallel_for(seeds, workers, [&](std::size_t s) {
                RngStream rng(ensemble_seed(master_seed, n, s), StreamDomain::resample, 0);
                double sup = 0.0;
                for (std::size_t k = 0; k < ref.snapshots.size(); ++k) {
                    const PhaseSpaceDensity rho = density_of(ref, ref.snapshots[k]);
                    const EmpiricalMeasure q = resample_density(rho, n, rng);
                    sup = std::max(sup, weak_metric(pairings(q, dict), ref_pairs[k].second));
                }
                rv[s] = sup;
            });
            table.resampled.push_back(summarise(n, std::move(rv)));
        }
    }
    table.slope = loglog_slope(table.rows);
    if (with_resampling) table.resampled_slope = loglog_slope(table.resampled);
    table.decreasing = strictly_decreasing(table.rows);
    if (table.slope)
        table.slope_in_range = *table.slope >= ConvergenceTable::kSlopeLow && *table.slope <= ConvergenceTable::kSlopeHigh;
    return table;
}

}  // namespace angio
