#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "angio/field.hpp"
#include "angio/model.hpp"
#include "angio/tips.hpp"

namespace angio {

/// Cell-centred velocity grid on [-v_max, v_max]^dim with n cells per axis.
struct VelocityGrid {
    int dim = 1;
    int n = 1;
    double v_max = 1.0;

    double spacing() const { return 2.0 * v_max / n; }
    double coord(int i) const { return -v_max + (i + 0.5) * spacing(); }
    std::size_t size() const;
    double cell_volume() const;
    Vec node(std::size_t flat) const;
};

/// Density rho(x, v) on the tensor grid; flat index = ix * v.size() + iv.
struct PhaseSpaceDensity {
    GridGeometry x;
    VelocityGrid v;
    std::vector<double> values;

    PhaseSpaceDensity() = default;
    PhaseSpaceDensity(const GridGeometry& xg, const VelocityGrid& vg);

    double cell_volume() const { return x.cell_volume() * v.cell_volume(); }
    double mass() const;
    double min() const;
};

struct Marginals {
    std::vector<double> pi1;    ///< int rho dv
    std::vector<double> tilde;  ///< int |v| rho dv
};

Marginals marginals(const PhaseSpaceDensity& rho);

/// Time integrals of the speed marginal, maintained by the left rectangle rule.
struct HistoryIntegrals {
    std::vector<double> tilde_accum;  ///< int_0^t tilde_r dr
    std::vector<double> k2_accum;     ///< int_0^t (K2 * tilde_r) dr
    AbsorptionField eta_limit;        ///< int_0^t (K1 * tilde_r) dr
};

/// Discrete convolution on the x-grid: out_i = sum_j K(x_i - x_j) f_j h^d,
/// truncated at the grid boundary.
class GridConvolution {
public:
    GridConvolution(const GridGeometry& g, const Kernel& k);
    void apply(std::span<const double> f, std::span<double> out) const;

private:
    GridGeometry g_;
    std::vector<std::array<int, kMaxDim>> offsets_;
    std::vector<double> weights_;
};

struct MeanFieldConfig {
    SimulationSetup setup;   ///< model, domain, kernels, T, output_dt, field diffusion
    double x_spacing = 0.0;  ///< 0: 0.01 for d = 1, 0.125 for d = 2
    int nv = 0;              ///< velocity cells per axis; 0: 256 for d = 1, 16 for d = 2
    double v_max = 0.0;      ///< 0: automatic
    double dt = 0.0;         ///< 0: automatic from the stability limits
    double safety = 0.9;     ///< fraction of the stability limit used by the automatic dt
    double leak_tolerance = 1e-6;
    double convergence_tolerance = 0.01;  ///< bound on the self-convergence change of M_T
    unsigned workers = 1;

    static MeanFieldConfig desk(int dim);
    void validate() const;
    double resolved_x_spacing() const;
    int resolved_nv() const;
    /// max(offspring support, F_max / k1) + 6 sigma / sqrt(2 k1) + 0.1, and at
    /// least 3 sigma / sqrt(2 k1).
    double resolved_v_max() const;
};

/// Stability limits of one kinetic step.
struct StepLimits {
    double transport = 0.0;  ///< h_x / v_max
    double drift = 0.0;      ///< h_v / (2 max|F - k1 v|)
    double diffusion = 0.0;  ///< h_v^2 / (dim sigma^2)
    double max_dt() const;
};

/// Per-step check of dM/dt against the weak form with phi = 1.
struct MassCheckRow {
    double t = 0.0;
    double dmdt = 0.0;      ///< (M_{n+1} - M_n) / dt
    double rhs = 0.0;       ///< trapezoid average of the right side at both ends
    double residual = 0.0;
    double estimate = 0.0;  ///< splitting truncation estimate: half the summed per-operator changes of R
};

struct MeanFieldSnapshot {
    double t = 0.0;
    double mass = 0.0;
    std::vector<double> rho;
    std::vector<double> c;
    std::vector<double> pi1;
    std::vector<double> tilde;
};

struct MeanFieldResult {
    GridGeometry x;
    VelocityGrid v;
    double dt = 0.0;
    std::vector<double> times;  ///< every step
    std::vector<double> mass;   ///< every step
    std::vector<MassCheckRow> mass_check;
    std::vector<MeanFieldSnapshot> snapshots;
    double v_leak = 0.0;          ///< flux blocked at the velocity boundary, summed over the run
    double x_leak = 0.0;          ///< flux blocked at the spatial boundary
    double max_v_leak_rate = 0.0; ///< max over steps of v_leak_step / (dt M)
    double min_rho = 0.0;
    bool history_monotone = true;
    FieldBoundsReport field_bounds;
    std::vector<std::string> warnings;
    std::string label;

    double final_mass() const { return mass.empty() ? 0.0 : mass.back(); }
};

/// Right side of the mass identity: g0 int alpha(C) pi1 + g0 int beta(C)
/// tilde_accum - gamma int h(k2_accum) pi1, by independent x-quadrature.
double mass_rhs(const Marginals& m, std::span<const double> c, const HistoryIntegrals& hist,
                const ModelParams& p, const GridGeometry& g);

/// Deterministic limit system on the phase-space grid.
class MeanFieldSolver {
public:
    explicit MeanFieldSolver(const MeanFieldConfig& cfg);

    const PhaseSpaceDensity& density() const { return rho_; }
    const ScalarField& field() const { return c_; }
    const HistoryIntegrals& history() const { return hist_; }
    double time() const { return time_; }
    double dt() const { return dt_; }
    StepLimits limits() const { return limits_; }
    const std::vector<double>& offspring_density() const { return g_; }

    void set_density(const PhaseSpaceDensity& rho);
    void set_field(const ScalarField& c);
    /// Turns the field update on or off (off keeps C frozen).
    void freeze_field(bool frozen) { frozen_ = frozen; }

    /// x-transport v . grad_x rho over tau with zero-flux walls.
    void transport_x(double tau);
    /// div_v([F(C) - k1 v] rho) over tau with zero-flux walls.
    void drift_v(double tau);
    /// (sigma^2 / 2) Lap_v rho over tau, explicit.
    void diffuse_v(double tau);
    /// rho += tau * Lambda.
    void apply_source(double tau);
    /// Full step: half kinetic, source, half kinetic, history, field.
    void kinetic_step();

    double v_leak() const { return v_leak_; }
    double x_leak() const { return x_leak_; }

private:
    void kinetic_half(double tau);
    void advance_history(const Marginals& m, double tau);
    void check_density(const char* stage) const;

    MeanFieldConfig cfg_;
    ModelParams p_;
    Kernel k1_;
    Kernel k2_;
    PhaseSpaceDensity rho_;
    ScalarField c_;
    std::vector<double> tumor_;
    double tumor_sup_ = 1.0;
    HistoryIntegrals hist_;
    GridConvolution conv1_;
    GridConvolution conv2_;
    std::vector<double> g_;  ///< offspring density on the v-grid, discrete integral g0
    StepLimits limits_;
    double dt_ = 0.0;
    double time_ = 0.0;
    double v_leak_ = 0.0;
    double x_leak_ = 0.0;
    bool frozen_ = false;
};

/// Runs the solver from the configured initial condition to T.
MeanFieldResult solve_system(const MeanFieldConfig& cfg);

/// Relative change of M_T between the configured grid and one with doubled
/// x spacing, v spacing and dt.
struct SelfConvergence {
    double coarse = 0.0;
    double fine = 0.0;
    double relative_change = 0.0;
    bool pass = false;
};
SelfConvergence self_convergence(const MeanFieldConfig& cfg);

}  // namespace angio
