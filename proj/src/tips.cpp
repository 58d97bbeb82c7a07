#include "angio/tips.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "angio/errors.hpp"
#include "angio/parallel.hpp"

namespace angio {

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::tip_branch: return "tip_branch";
        case EventKind::vessel_branch: return "vessel_branch";
        case EventKind::anastomosis: return "anastomosis";
    }
    return "unknown";
}

// ---------------------------------------------------------------- network

VesselNetwork::VesselNetwork(int dim, double cell_size, double quad_spacing)
    : dim_(dim), cell_(cell_size), quad_spacing_(quad_spacing) {
    if (!(cell_size > 0.0) || !(quad_spacing > 0.0))
        throw ConfigError("network hash cell and quadrature spacing must be > 0");
}

std::array<std::int64_t, kMaxDim> VesselNetwork::cell_of(const Vec& x) const {
    std::array<std::int64_t, kMaxDim> c{0, 0, 0};
    for (int a = 0; a < dim_; ++a)
        c[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(std::floor(x[static_cast<std::size_t>(a)] / cell_));
    return c;
}

std::int64_t VesselNetwork::cell_key(const std::array<std::int64_t, kMaxDim>& c) const {
    constexpr std::int64_t off = 1 << 20;
    constexpr std::int64_t mask = (1 << 21) - 1;
    return ((c[0] + off) & mask) | (((c[1] + off) & mask) << 21) | (((c[2] + off) & mask) << 42);
}

void VesselNetwork::add(const Segment& s) {
    if (!(s.speed_weight >= 0.0)) throw std::invalid_argument("segment speed weight must be >= 0");
    const std::size_t idx = segments_.size();
    segments_.push_back(s);
    if (owner_segments_.size() <= s.owner) {
        owner_segments_.resize(s.owner + 1);
        owner_cumulative_.resize(s.owner + 1);
    }
    const double mass = s.mass();
    auto& cum = owner_cumulative_[s.owner];
    owner_segments_[s.owner].push_back(idx);
    cum.push_back((cum.empty() ? 0.0 : cum.back()) + mass);
    total_mass_ += mass;
    if (mass == 0.0) return;

    const Vec d = s.end - s.start;
    const double len = norm(d);
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / quad_spacing_)));
    const double w = mass / static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) {
        const Vec p = s.start + d * ((static_cast<double>(j) + 0.5) / static_cast<double>(m));
        buckets_[cell_key(cell_of(p))].push_back(Point{p, w, s.owner, s.t1});
    }
    n_points_ += m;
}

double VesselNetwork::owner_mass(std::uint64_t owner) const {
    if (owner >= owner_cumulative_.size() || owner_cumulative_[owner].empty()) return 0.0;
    return owner_cumulative_[owner].back();
}

Vec VesselNetwork::locate(std::uint64_t owner, double u) const {
    if (owner >= owner_cumulative_.size() || owner_cumulative_[owner].empty())
        throw std::out_of_range("locate: tip has no vessel");
    const auto& cum = owner_cumulative_[owner];
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    const auto j = static_cast<std::size_t>(it - cum.begin());
    const double prev = j == 0 ? 0.0 : cum[j - 1];
    const double span = cum[j] - prev;
    const double frac = span > 0.0 ? std::clamp((u - prev) / span, 0.0, 1.0) : 0.5;
    const Segment& s = segments_[owner_segments_[owner][j]];
    return s.start + (s.end - s.start) * frac;
}

double VesselNetwork::density(const Vec& x, const Kernel& k2, double n_scale,
                              const DensityExclusion* exclude) const {
    const double R = k2.support_radius();
    if (R > cell_ * (1.0 + 1e-12))
        throw std::invalid_argument("network density: kernel support exceeds hash cell size");
    if (buckets_.empty()) return 0.0;
    const double R2 = R * R;
    const auto base = cell_of(x);
    double sum = 0.0;
    std::array<std::int64_t, kMaxDim> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
        lo[static_cast<std::size_t>(a)] = -1;
        hi[static_cast<std::size_t>(a)] = 1;
    }
    std::array<std::int64_t, kMaxDim> c{};
    for (std::int64_t o2 = lo[2]; o2 <= hi[2]; ++o2)
        for (std::int64_t o1 = lo[1]; o1 <= hi[1]; ++o1)
            for (std::int64_t o0 = lo[0]; o0 <= hi[0]; ++o0) {
                c = {base[0] + o0, base[1] + o1, base[2] + o2};
                const auto it = buckets_.find(cell_key(c));
                if (it == buckets_.end()) continue;
                for (const Point& pt : it->second) {
                    const Vec d = x - pt.p;
                    const double r2 = dot(d, d);
                    if (r2 >= R2) continue;
                    if (exclude && pt.owner == exclude->owner && pt.t1 > exclude->since) continue;
                    sum += pt.w * k2.radial_sq(r2);
                }
            }
    return sum / n_scale;
}

double network_density(const VesselNetwork& net, const Vec& x, const Kernel& k2, double n_scale) {
    return net.density(x, k2, n_scale);
}

// ---------------------------------------------------------------- setup

SimulationSetup SimulationSetup::desk(int dim) {
    SimulationSetup s;
    s.params.dim = dim;
    s.domain.dim = s.tumor.dim = s.init_region.dim = dim;
    for (int a = 0; a < dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        s.domain.lo[i] = 0.0;
        s.domain.hi[i] = 4.0;
        s.tumor.lo[i] = a == 0 ? 3.0 : 1.5;
        s.tumor.hi[i] = a == 0 ? 3.5 : 2.5;
        s.init_region.lo[i] = a == 0 ? 0.6 : 1.5;
        s.init_region.hi[i] = a == 0 ? 1.0 : 2.5;
    }
    s.field_spacing = dim == 1 ? 0.02 : (dim == 2 ? 0.05 : 0.1);
    s.density_mode = dim == 1 ? DensityMode::grid : DensityMode::exact;
    return s;
}

namespace {

void need(bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("constraint violated: ") + what);
}

bool box_ok(const Box& b, int dim) {
    if (b.dim != dim) return false;
    for (int a = 0; a < dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        if (!(b.hi[i] >= b.lo[i]) || !std::isfinite(b.lo[i]) || !std::isfinite(b.hi[i])) return false;
    }
    return true;
}

}  // namespace

void SimulationSetup::validate() const {
    params.validate();
    const int d = params.dim;
    need(dt > 0.0 && std::isfinite(dt), "dt > 0");
    need(T > 0.0 && std::isfinite(T), "T > 0");
    need(n_tips >= 1, "N >= 1");
    need(output_dt > 0.0, "output_dt > 0");
    need(field_spacing > 0.0, "field_spacing > 0");
    need(box_ok(domain, d) && domain.volume() > 0.0, "domain is a nonempty box of dimension dim");
    need(box_ok(tumor, d), "tumor box has dimension dim");
    need(box_ok(init_region, d), "initial region has dimension dim");
    for (int a = 0; a < d; ++a) {
        const auto i = static_cast<std::size_t>(a);
        need(init_region.lo[i] >= domain.lo[i] && init_region.hi[i] <= domain.hi[i],
             "initial region inside the domain");
    }
    need(tumor_width > 0.0, "tumor_width > 0");
    need(c0_length > 0.0, "c0_length > 0");
    need(k1_radius > 0.0 && k2_radius > 0.0, "kernel radii > 0");
    need(k1_mass >= 0.0 && k2_mass >= 0.0, "kernel masses >= 0");
    need(offspring_spread >= 0.0, "offspring_spread >= 0");
    need(exclude_own_recent >= 0.0, "exclude_own_recent_segments >= 0");
    need(max_tips >= n_tips, "max_tips >= N");
    need(dict_size >= 1, "dict_size >= 1");
    need(dict_vmax > 0.0, "dict_vmax > 0");
}

OffspringVelocityLaw SimulationSetup::offspring_law() const {
    return OffspringVelocityLaw(params.dim, offspring_direction, params.v0, offspring_spread, params.g0);
}

TumorIndicator SimulationSetup::tumor_indicator() const { return TumorIndicator(tumor, tumor_width); }

double SimulationSetup::initial_concentration(const Vec& x) const {
    const double d = tumor.distance(x);
    return params.C_max * std::exp(-d * d / (2.0 * c0_length * c0_length));
}

EmpiricalMeasure empirical_from(const Snapshot& s, int dim, std::size_t n0) {
    EmpiricalMeasure q;
    q.dim = dim;
    q.weight = 1.0 / static_cast<double>(n0);
    for (const TipRow& r : s.rows)
        if (r.alive) q.atoms.push_back(Atom{r.x, r.v});
    return q;
}

double TrajectoryRecord::sup_mass() const {
    std::size_t m = 0;
    for (auto c : counts) m = std::max(m, c);
    return static_cast<double>(m) / static_cast<double>(n0);
}

double TrajectoryRecord::min_mass() const {
    std::size_t m = counts.empty() ? 0 : counts.front();
    for (auto c : counts) m = std::min(m, c);
    return static_cast<double>(m) / static_cast<double>(n0);
}

// ---------------------------------------------------------------- system

TipSystem::TipSystem(const SimulationSetup& setup, std::uint64_t seed)
    : setup_((setup.validate(), setup)),
      seed_(seed),
      k1_(Kernel::with_mass(setup.params.dim, setup.k1_radius, setup.k1_mass)),
      k2_(Kernel::with_mass(setup.params.dim, setup.k2_radius, setup.k2_mass)),
      law_(setup.offspring_law()),
      geometry_(GridGeometry::covering(setup.domain, setup.field_spacing)),
      c_(geometry_),
      eta_(geometry_),
      network_(setup.params.dim, setup.k2_radius, setup.k2_radius / 16.0) {
    const ModelParams& p = setup_.params;
    c_.values = sample_nodes(geometry_, [&](const Vec& x) { return setup_.initial_concentration(x); });
    const TumorIndicator ind = setup_.tumor_indicator();
    tumor_ = sample_nodes(geometry_, [&](const Vec& x) { return ind(x); });
    tumor_sup_ = ind.sup_norm();

    store_network_ = p.beta1 > 0.0 || (p.gamma > 0.0 && setup_.density_mode == DensityMode::exact);
    if (setup_.density_mode == DensityMode::grid) network_grid_.assign(geometry_.size(), 0.0);

    std::vector<std::pair<Vec, Vec>> init;
    init.reserve(setup_.n_tips);
    for (std::size_t i = 0; i < setup_.n_tips; ++i) {
        RngStream ic(seed, StreamDomain::initial_condition, i);
        Vec x;
        for (int a = 0; a < p.dim; ++a) {
            const auto k = static_cast<std::size_t>(a);
            x[k] = setup_.init_region.lo[k] + ic.uniform() * setup_.init_region.extent(a);
        }
        init.emplace_back(x, law_.sample(ic));
    }
    set_tips(init);

    if (setup_.track_qv) {
        dict_.emplace(p.dim, setup_.domain, setup_.dict_vmax, setup_.dict_size);
        std::vector<std::size_t> fns = setup_.qv_functions;
        if (fns.empty()) fns.push_back(dict_->first_mixed());
        g_moments_ = offspring_square_moments(*dict_, law_);
        for (std::size_t k : fns) {
            if (k >= dict_->size()) throw ConfigError("qv function index beyond the dictionary");
            qv_.push_back(QvTotals{k, 0.0, 0.0, 0.0});
            std::vector<double> sq(geometry_.size());
            for (std::size_t n = 0; n < sq.size(); ++n) {
                const double xp = dict_->x_part(k, geometry_.node(n));
                sq[n] = xp * xp;
            }
            xpart_sq_.push_back(std::move(sq));
        }
        vessel_bins_.assign(geometry_.size(), 0.0);
    }

    if (p.gamma * setup_.dt > 0.1)
        diag_.warnings.push_back(fmt::format("gamma*dt = {:.3g} exceeds 0.1; reduce dt", p.gamma * setup_.dt));
    if (p.alpha1 * p.g0 * setup_.dt > 0.1)
        diag_.warnings.push_back(
            fmt::format("alpha1*g0*dt = {:.3g} exceeds 0.1; reduce dt", p.alpha1 * p.g0 * setup_.dt));
}

void TipSystem::set_tips(const std::vector<std::pair<Vec, Vec>>& states) {
    tips_.clear();
    streams_.clear();
    for (std::size_t i = 0; i < states.size(); ++i) {
        Tip t;
        t.id = i;
        t.x = states[i].first;
        t.v = states[i].second;
        t.birth_time = time_;
        t.birth_speed = norm(t.v);
        tips_.push_back(t);
        streams_.emplace_back(seed_, StreamDomain::tip, i);
    }
    alive_ = tips_.size();
    n0_ = tips_.size();
}

void TipSystem::set_field(const ScalarField& c) {
    if (!(c.geometry == geometry_)) throw std::invalid_argument("set_field: geometry mismatch");
    c_ = c;
}

void TipSystem::deposit_segment(const Segment& s) {
    if (network_grid_.empty() || s.mass() == 0.0) return;
    const Vec d = s.end - s.start;
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(norm(d) / (setup_.k2_radius / 8.0))));
    for (std::size_t j = 0; j < m; ++j) {
        const Vec pt = s.start + d * ((static_cast<double>(j) + 0.5) / static_cast<double>(m));
        deposit_point(geometry_, network_grid_, pt, k2_, s.mass() / static_cast<double>(m));
    }
}

void TipSystem::add_network_segment(const Segment& s) {
    network_.add(s);
    deposit_segment(s);
}

EmpiricalMeasure TipSystem::snapshot_empirical() const {
    EmpiricalMeasure q;
    q.dim = setup_.params.dim;
    q.weight = 1.0 / static_cast<double>(n0_);
    q.atoms.reserve(alive_);
    for (const Tip& t : tips_)
        if (t.alive()) q.atoms.push_back(Atom{t.x, t.v});
    return q;
}

double TipSystem::network_density_at(const Vec& x, const Tip* self) const {
    const double n = static_cast<double>(n0_);
    if (setup_.density_mode == DensityMode::grid) return value_interp(geometry_, network_grid_, x) / n;
    if (self && setup_.exclude_own_recent > 0.0) {
        const DensityExclusion ex{self->id, time_ - setup_.exclude_own_recent};
        return network_.density(x, k2_, n, &ex);
    }
    return network_.density(x, k2_, n);
}

double TipSystem::concentration_at(const Vec& x) const {
    return std::max(0.0, value_interp(c_, x));
}

void TipSystem::bin_vessel(const Segment& s) {
    if (vessel_bins_.empty()) return;
    const Vec mid = (s.start + s.end) * 0.5;
    std::array<int, kMaxDim> idx{0, 0, 0};
    for (int a = 0; a < geometry_.dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        const int j = static_cast<int>(std::floor((mid[i] - geometry_.origin[i]) / geometry_.spacing));
        idx[i] = std::clamp(j, 0, geometry_.shape[i] - 1);
    }
    vessel_bins_[geometry_.index(idx)] += s.mass();
}

void TipSystem::em_step(double dt) {
    const ModelParams& p = setup_.params;
    const GradientField grad(c_);
    std::vector<std::size_t> live;
    live.reserve(alive_);
    for (std::size_t i = 0; i < tips_.size(); ++i)
        if (tips_[i].alive()) live.push_back(i);

    std::vector<Segment> segs(live.size());
    std::vector<std::uint64_t> clamps(live.size(), 0);
    const double sq = std::sqrt(dt);
    parallel_for(live.size(), setup_.workers, [&](std::size_t j) {
        Tip& t = tips_[live[j]];
        RngStream& rng = streams_[live[j]];
        ProbeStats stats;
        const Vec force = p.d2 == 0.0 ? Vec{} : chemo_force(grad.at(t.x, &stats), p);
        Vec xi;
        for (int a = 0; a < p.dim; ++a) xi[static_cast<std::size_t>(a)] = rng.normal();
        const Vec v_new = t.v + (force - t.v * p.k1) * dt + xi * (p.sigma * sq);
        const Vec x_new = t.x + t.v * dt;
        if (!all_finite(v_new) || !all_finite(x_new))
            throw NumericalError(fmt::format("non-finite state of tip {} at t = {:.6g}; reduce dt", t.id, time_));
        segs[j] = Segment{t.x, x_new, norm(v_new), t.id, time_, time_ + dt};
        t.x = x_new;
        t.v = v_new;
        clamps[j] = stats.clamped;
    });

    const Box& dom = setup_.domain;
    const double margin = std::max(setup_.k1_radius, setup_.k2_radius);
    for (std::size_t j = 0; j < live.size(); ++j) {
        diag_.clamped_probes += clamps[j];
        const Segment& s = segs[j];
        if (store_network_) network_.add(s);
        if (p.gamma > 0.0) deposit_segment(s);
        bin_vessel(s);
        double dist = 1e300;
        for (int a = 0; a < p.dim; ++a) {
            const auto i = static_cast<std::size_t>(a);
            dist = std::min({dist, s.end[i] - dom.lo[i], dom.hi[i] - s.end[i]});
        }
        diag_.min_boundary_distance = std::min(diag_.min_boundary_distance, dist);
        if (dist < margin) ++diag_.near_boundary;
    }
}

void TipSystem::accumulate_absorption(double dt) {
    if (setup_.k1_mass == 0.0) return;
    accumulate_eta(eta_, snapshot_empirical(), k1_, dt);
}

void TipSystem::advance_field(double dt) {
    field_step(c_, eta_, tumor_, setup_.params, dt, setup_.diffusion);
}

void TipSystem::record_bounds() {
    const FieldBoundsReport rep = field_bounds_check(c_, setup_.params, tumor_sup_, time_);
    if (!rep.ok) {
        if (diag_.bound_violations == 0) {
            diag_.first_violation = rep.violation;
            diag_.first_violation_t = time_;
        }
        ++diag_.bound_violations;
    }
    diag_.strict_bound_holds = diag_.strict_bound_holds && rep.strict_holds;
    diag_.max_c = std::max(diag_.max_c, rep.max);
    diag_.max_bound_ratio = std::max(diag_.max_bound_ratio, rep.max / rep.bound);
    diag_.grad_sup = std::max(diag_.grad_sup, rep.grad_sup);
    diag_.hessian_sup = std::max(diag_.hessian_sup, rep.hessian_sup);
}

std::size_t TipSystem::spawn(const Vec& x, std::uint64_t parent_id) {
    const std::uint64_t id = tips_.size();
    if (tips_.size() >= setup_.max_tips)
        throw NumericalError(fmt::format("tip count exceeded the cap of {} at t = {:.6g}", setup_.max_tips, time_));
    RngStream rng(seed_, StreamDomain::tip, id);
    Tip t;
    t.id = id;
    t.parent = static_cast<std::int64_t>(parent_id);
    t.x = x;
    t.v = law_.sample(rng);
    t.birth_time = time_;
    t.birth_speed = norm(t.v);
    tips_.push_back(t);
    streams_.push_back(rng);
    ++alive_;
    return tips_.size() - 1;
}

std::vector<std::size_t> TipSystem::sample_tip_branching(double dt) {
    const ModelParams& p = setup_.params;
    std::vector<std::size_t> born;
    if (p.alpha1 == 0.0) return born;
    const std::size_t count = tips_.size();
    for (std::size_t i = 0; i < count; ++i) {
        if (!tips_[i].alive()) continue;
        const double rate = alpha_rate(concentration_at(tips_[i].x), p) * p.g0;
        if (rate == 0.0) continue;
        const double prob = -std::expm1(-rate * dt);
        if (streams_[i].uniform() < prob) {
            const Vec x = tips_[i].x;
            const std::size_t c = spawn(x, tips_[i].id);
            events_.push_back(Event{time_, EventKind::tip_branch, x, tips_[i].id, static_cast<std::int64_t>(c)});
            born.push_back(c);
        }
    }
    return born;
}

std::vector<std::size_t> TipSystem::sample_vessel_branching(double dt) {
    const ModelParams& p = setup_.params;
    std::vector<std::size_t> born;
    if (p.beta1 == 0.0 || network_.empty()) return born;
    const std::size_t count = tips_.size();
    for (std::size_t i = 0; i < count; ++i) {
        const double L = network_.owner_mass(i);
        if (L <= 0.0) continue;
        RngStream& rng = streams_[i];
        const double prob = -std::expm1(-p.beta1 * p.g0 * L * dt);
        if (!(rng.uniform() < prob)) continue;
        const Vec y = network_.locate(i, rng.uniform() * L);
        const double accept = beta_rate(concentration_at(y), p) / p.beta1;
        if (!(rng.uniform() < accept)) continue;
        const std::size_t c = spawn(y, i);
        events_.push_back(Event{time_, EventKind::vessel_branch, y, i, static_cast<std::int64_t>(c)});
        born.push_back(c);
    }
    return born;
}

std::vector<std::uint64_t> TipSystem::sample_anastomosis(double dt) {
    const ModelParams& p = setup_.params;
    std::vector<std::uint64_t> killed;
    if (p.gamma == 0.0) return killed;
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < tips_.size(); ++i)
        if (tips_[i].alive() && !born_this_step(i)) live.push_back(i);
    std::vector<double> hazard(live.size());
    parallel_for(live.size(), setup_.workers, [&](std::size_t j) {
        const Tip& t = tips_[live[j]];
        hazard[j] = p.gamma * saturation_h(network_density_at(t.x, &t));
    });
    last_hazard_.clear();
    for (std::size_t j = 0; j < live.size(); ++j) {
        Tip& t = tips_[live[j]];
        diag_.max_hazard = std::max(diag_.max_hazard, hazard[j]);
        last_hazard_.emplace_back(live[j], hazard[j]);
        if (streams_[live[j]].uniform() < -std::expm1(-hazard[j] * dt)) {
            t.death_time = time_;
            --alive_;
            events_.push_back(Event{time_, EventKind::anastomosis, t.x, t.id, -1});
            killed.push_back(t.id);
        }
    }
    return killed;
}

void TipSystem::accumulate_qv(double dt) {
    const ModelParams& p = setup_.params;
    const double inv_n2 = 1.0 / (static_cast<double>(n0_) * static_cast<double>(n0_));
    // Tips alive before this step's events: those still alive and those just killed.
    std::vector<std::pair<std::size_t, double>> rows;
    if (p.gamma > 0.0) {
        rows = last_hazard_;
    } else {
        for (std::size_t i = 0; i < tips_.size(); ++i)
            if (tips_[i].alive() && !born_this_step(i)) rows.emplace_back(i, 0.0);
    }
    double vessel_beta = 0.0;
    std::vector<double> beta_node;
    if (p.beta1 > 0.0) {
        beta_node.resize(vessel_bins_.size());
        for (std::size_t n = 0; n < vessel_bins_.size(); ++n)
            beta_node[n] = vessel_bins_[n] == 0.0 ? 0.0 : beta_rate(std::max(0.0, c_.values[n]), p);
    }
    for (std::size_t f = 0; f < qv_.size(); ++f) {
        QvTotals& q = qv_[f];
        const std::size_t k = q.function;
        double br = 0.0, bi = 0.0, de = 0.0;
        for (const auto& [i, hz] : rows) {
            const Tip& t = tips_[i];
            if (p.sigma > 0.0) {
                const Vec g = dict_->grad_v(k, t.x, t.v);
                br += p.sigma * p.sigma * dot(g, g);
            }
            if (p.alpha1 > 0.0) {
                const double xp = dict_->x_part(k, t.x);
                bi += alpha_rate(concentration_at(t.x), p) * xp * xp * g_moments_[k];
            }
            if (hz > 0.0) {
                const double phi = dict_->value(k, t.x, t.v);
                de += hz * phi * phi;
            }
        }
        if (p.beta1 > 0.0) {
            vessel_beta = 0.0;
            for (std::size_t n = 0; n < vessel_bins_.size(); ++n)
                vessel_beta += vessel_bins_[n] * beta_node[n] * xpart_sq_[f][n];
            bi += vessel_beta * g_moments_[k];
        }
        q.brownian += br * inv_n2 * dt;
        q.birth += bi * inv_n2 * dt;
        q.death += de * inv_n2 * dt;
    }
}

void TipSystem::step() {
    const double dt = setup_.dt;
    em_step(dt);
    accumulate_absorption(dt);
    advance_field(dt);
    time_ = base_time_ + static_cast<double>(++steps_) * dt;
    if (setup_.check_bounds) record_bounds();
    births_from_ = tips_.size();
    sample_tip_branching(dt);
    sample_vessel_branching(dt);
    sample_anastomosis(dt);
    if (setup_.track_qv) accumulate_qv(dt);
    births_from_ = static_cast<std::size_t>(-1);
}

// ---------------------------------------------------------------- run

namespace {

Snapshot take_snapshot(const TipSystem& sys) {
    Snapshot s;
    s.t = sys.time();
    s.rows.reserve(sys.tips().size());
    for (const Tip& t : sys.tips()) s.rows.push_back(TipRow{t.id, t.alive(), t.x, t.v});
    return s;
}

}  // namespace

TrajectoryRecord run(const SimulationSetup& setup, std::uint64_t seed) {
    TipSystem sys(setup, seed);
    TrajectoryRecord rec;
    rec.seed = seed;
    rec.dim = setup.params.dim;
    rec.n0 = sys.n0();
    rec.dt = setup.dt;
    rec.geometry = sys.field().geometry;

    const auto steps = static_cast<std::size_t>(std::llround(setup.T / setup.dt));
    const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(setup.output_dt / setup.dt)));
    rec.times.reserve(steps + 1);
    rec.counts.reserve(steps + 1);
    auto output = [&] {
        if (setup.record_snapshots) rec.snapshots.push_back(take_snapshot(sys));
        if (setup.record_fields) rec.fields.push_back(FieldSnapshot{sys.time(), sys.field().values, sys.eta().values});
    };
    rec.times.push_back(0.0);
    rec.counts.push_back(sys.alive_count());
    output();
    for (std::size_t n = 1; n <= steps; ++n) {
        try {
            sys.step();
        } catch (const NumericalError& e) {
            throw NumericalError(fmt::format("step {} (t = {:.6g}): {}", n, static_cast<double>(n) * setup.dt, e.what()));
        }
        rec.times.push_back(sys.time());
        rec.counts.push_back(sys.alive_count());
        if (n % stride == 0 || n == steps) output();
    }
    rec.events = sys.events();
    rec.qv = sys.qv();
    rec.diag = sys.diagnostics();
    if (rec.diag.near_boundary > 0)
        rec.diag.warnings.push_back(fmt::format(
            "tips came within one kernel radius of the domain boundary {} times (closest {:.3g})",
            rec.diag.near_boundary, rec.diag.min_boundary_distance));
    if (rec.diag.clamped_probes > 0)
        rec.diag.warnings.push_back(fmt::format("{} gradient probes fell outside the grid and were clamped",
                                                rec.diag.clamped_probes));
    rec.final_tip_total = sys.tips().size();
    rec.network_points = sys.network().quadrature_points();
    return rec;
}

}  // namespace angio
