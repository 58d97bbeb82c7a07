#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "angio/dictionary.hpp"
#include "angio/field.hpp"
#include "angio/measure.hpp"
#include "angio/model.hpp"
#include "angio/rng.hpp"

namespace angio {

enum class EventKind { tip_branch, vessel_branch, anastomosis };
const char* to_string(EventKind kind);

struct Tip {
    std::uint64_t id = 0;
    std::int64_t parent = -1;
    Vec x;
    Vec v;
    double birth_time = 0.0;
    double birth_speed = 0.0;
    std::optional<double> death_time;

    bool alive() const { return !death_time.has_value(); }
};

/// Piece of a tip trajectory laid during one time step.
struct Segment {
    Vec start;
    Vec end;
    double speed_weight = 0.0;  ///< |V| over the step
    std::uint64_t owner = 0;
    double t0 = 0.0;
    double t1 = 0.0;

    /// Contribution to int |V| ds.
    double mass() const { return speed_weight * (t1 - t0); }
};

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::tip_branch;
    Vec x;
    std::uint64_t parent = 0;
    std::int64_t child = -1;  ///< -1 for anastomosis
};

/// Skip points laid by `owner` after time `since`.
struct DensityExclusion {
    std::uint64_t owner = 0;
    double since = 0.0;
};

/// Speed-weighted segment list realising the network measure. Each segment is
/// split into midpoint quadrature nodes that are bucketed in a spatial hash
/// with cells no smaller than the kernel support.
class VesselNetwork {
public:
    VesselNetwork(int dim, double cell_size, double quad_spacing);

    void add(const Segment& s);

    const std::vector<Segment>& segments() const { return segments_; }
    bool empty() const { return segments_.empty(); }
    int dim() const { return dim_; }
    double cell_size() const { return cell_; }
    std::size_t quadrature_points() const { return n_points_; }

    /// Sum of segment masses (int |V| ds over all tips).
    double total_mass() const { return total_mass_; }
    /// int |V| ds over the vessel of one tip.
    double owner_mass(std::uint64_t owner) const;
    /// Point at speed-weighted position u in [0, owner_mass(owner)].
    Vec locate(std::uint64_t owner, double u) const;

    /// (1/N) sum over segments of int K(x - gamma(s)) |V| ds by midpoint
    /// quadrature, visiting only the 3^dim hash cells around x.
    double density(const Vec& x, const Kernel& k2, double n_scale,
                   const DensityExclusion* exclude = nullptr) const;

private:
    struct Point {
        Vec p;
        double w;
        std::uint64_t owner;
        double t1;
    };
    std::int64_t cell_key(const std::array<std::int64_t, kMaxDim>& c) const;
    std::array<std::int64_t, kMaxDim> cell_of(const Vec& x) const;

    int dim_;
    double cell_;
    double quad_spacing_;
    std::vector<Segment> segments_;
    std::unordered_map<std::int64_t, std::vector<Point>> buckets_;
    std::vector<std::vector<std::size_t>> owner_segments_;
    std::vector<std::vector<double>> owner_cumulative_;
    double total_mass_ = 0.0;
    std::size_t n_points_ = 0;
};

double network_density(const VesselNetwork& net, const Vec& x, const Kernel& k2, double n_scale);

enum class DensityMode { exact, grid };

/// Everything a stochastic run needs besides the seed.
struct SimulationSetup {
    ModelParams params;
    Box domain;
    Box tumor;
    double tumor_width = 0.2;
    double field_spacing = 0.05;
    DiffusionOptions diffusion;
    double c0_length = 1.5;  ///< initial field C_max exp(-dist(x, A)^2 / (2 l^2))
    Box init_region;
    Vec offspring_direction = unit(0);
    double offspring_spread = 0.3;
    double k1_radius = 0.25;
    double k1_mass = 1.0;
    double k2_radius = 0.25;
    double k2_mass = 1.0;

    std::size_t n_tips = 100;
    double dt = 0.01;
    double T = 2.0;
    double output_dt = 0.1;

    double exclude_own_recent = 0.0;  ///< window length, 0 disables
    DensityMode density_mode = DensityMode::exact;
    std::size_t max_tips = 1000000;

    bool track_qv = false;
    std::vector<std::size_t> qv_functions;  ///< 0-based dictionary indices
    std::size_t dict_size = 16;
    double dict_vmax = 2.5;

    bool record_snapshots = true;
    bool record_fields = true;
    bool check_bounds = true;
    unsigned workers = 1;

    /// Desk-scale defaults on [0, 4]^dim.
    static SimulationSetup desk(int dim);
    void validate() const;
    OffspringVelocityLaw offspring_law() const;
    TumorIndicator tumor_indicator() const;
    /// Initial TAF profile.
    double initial_concentration(const Vec& x) const;
};

struct TipRow {
    std::uint64_t id = 0;
    bool alive = true;
    Vec x;
    Vec v;
};

struct Snapshot {
    double t = 0.0;
    std::vector<TipRow> rows;
};

EmpiricalMeasure empirical_from(const Snapshot& s, int dim, std::size_t n0);

struct FieldSnapshot {
    double t = 0.0;
    std::vector<double> c;
    std::vector<double> eta;
};

/// Terminal predictable quadratic variations for one dictionary function.
struct QvTotals {
    std::size_t function = 0;
    double brownian = 0.0;
    double birth = 0.0;
    double death = 0.0;
};

struct RunDiagnostics {
    std::uint64_t clamped_probes = 0;
    std::uint64_t near_boundary = 0;  ///< (tip, step) pairs within a kernel radius of the boundary
    double min_boundary_distance = 1e300;
    std::size_t bound_violations = 0;
    std::optional<NodeViolation> first_violation;
    double first_violation_t = 0.0;
    bool strict_bound_holds = true;
    double max_c = 0.0;
    double max_bound_ratio = 0.0;  ///< max over steps of max C / provable bound
    double grad_sup = 0.0;
    double hessian_sup = 0.0;
    double max_hazard = 0.0;  ///< largest gamma h(.) seen
    std::vector<std::string> warnings;
};

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    int dim = 2;
    std::size_t n0 = 0;
    double dt = 0.0;
    std::vector<double> times;          ///< every step, starting at 0
    std::vector<std::size_t> counts;    ///< alive tips after each step
    std::vector<Snapshot> snapshots;    ///< at output times
    GridGeometry geometry;
    std::vector<FieldSnapshot> fields;  ///< at output times
    std::vector<Event> events;
    std::vector<QvTotals> qv;
    RunDiagnostics diag;
    std::size_t final_tip_total = 0;
    std::size_t network_points = 0;

    double sup_mass() const;
    double min_mass() const;
};

/// Mutable state of one N-tip run.
class TipSystem {
public:
    TipSystem(const SimulationSetup& setup, std::uint64_t seed);

    double time() const { return time_; }
    void set_time(double t) {
        time_ = t;
        base_time_ = t;
        steps_ = 0;
    }
    const SimulationSetup& setup() const { return setup_; }
    const std::vector<Tip>& tips() const { return tips_; }
    const VesselNetwork& network() const { return network_; }
    const ScalarField& field() const { return c_; }
    const AbsorptionField& eta() const { return eta_; }
    const std::vector<Event>& events() const { return events_; }
    const RunDiagnostics& diagnostics() const { return diag_; }
    const std::vector<QvTotals>& qv() const { return qv_; }
    std::size_t alive_count() const { return alive_; }
    std::size_t n0() const { return n0_; }
    bool stores_network() const { return store_network_; }

    /// Replaces all tips (ids are reassigned 0..n-1). Test and setup hook.
    void set_tips(const std::vector<std::pair<Vec, Vec>>& states);
    void set_field(const ScalarField& c);
    void add_network_segment(const Segment& s);

    EmpiricalMeasure snapshot_empirical() const;
    double network_density_at(const Vec& x, const Tip* self = nullptr) const;
    double concentration_at(const Vec& x) const;

    /// Euler-Maruyama move of every alive tip; appends one segment each.
    void em_step(double dt);
    /// eta += dt (1/N) sum K1(x - X_i)|V_i| over alive tips.
    void accumulate_absorption(double dt);
    void advance_field(double dt);
    /// Returns indices of newly created tips.
    std::vector<std::size_t> sample_tip_branching(double dt);
    std::vector<std::size_t> sample_vessel_branching(double dt);
    /// Returns ids of killed tips.
    std::vector<std::uint64_t> sample_anastomosis(double dt);

    /// One full step in the order: move, absorption, field, clock, tip
    /// branching, vessel branching, anastomosis.
    void step();

private:
    std::size_t spawn(const Vec& x, std::uint64_t parent_id);
    void record_bounds();
    void accumulate_qv(double dt);
    void bin_vessel(const Segment& s);
    void deposit_segment(const Segment& s);
    bool born_this_step(std::size_t i) const { return i >= births_from_; }

    SimulationSetup setup_;
    std::uint64_t seed_;
    double time_ = 0.0;
    double base_time_ = 0.0;
    std::size_t steps_ = 0;
    std::size_t births_from_ = static_cast<std::size_t>(-1);
    std::vector<Tip> tips_;
    std::vector<RngStream> streams_;
    std::size_t alive_ = 0;
    std::size_t n0_ = 0;
    Kernel k1_;
    Kernel k2_;
    OffspringVelocityLaw law_;
    GridGeometry geometry_;
    ScalarField c_;
    AbsorptionField eta_;
    std::vector<double> tumor_;
    double tumor_sup_ = 1.0;
    VesselNetwork network_;
    bool store_network_ = true;
    std::vector<double> network_grid_;
    std::vector<Event> events_;
    RunDiagnostics diag_;
    std::vector<std::pair<std::size_t, double>> last_hazard_;

    std::optional<TestFunctionDictionary> dict_;
    std::vector<QvTotals> qv_;
    std::vector<double> g_moments_;
    std::vector<std::vector<double>> xpart_sq_;
    std::vector<double> vessel_bins_;
};

/// Full run from the setup's initial condition.
TrajectoryRecord run(const SimulationSetup& setup, std::uint64_t seed);

}  // namespace angio
