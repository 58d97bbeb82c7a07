#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "angio/dictionary.hpp"
#include "angio/meanfield.hpp"
#include "angio/measure.hpp"
#include "angio/rng.hpp"
#include "angio/tips.hpp"

namespace angio {

// ---------------------------------------------------------------- metrics

/// A measure given either by atoms or by a phase-space grid density.
using MeasureView = std::variant<const EmpiricalMeasure*, const PhaseSpaceDensity*>;

/// mu(phi_k) for every dictionary entry.
std::vector<double> pairings(const EmpiricalMeasure& mu, const TestFunctionDictionary& dict);
std::vector<double> pairings(const PhaseSpaceDensity& rho, const TestFunctionDictionary& dict);
std::vector<double> pairings(const MeasureView& mu, const TestFunctionDictionary& dict);

/// sum_k 2^-(k+1) min(|a_k - b_k|, 1) over the dictionary (entry k = 0 has
/// weight 1/2).
double weak_metric(const std::vector<double>& a, const std::vector<double>& b);
double weak_metric(const MeasureView& mu1, const MeasureView& mu2, const TestFunctionDictionary& dict);

/// sup over |phi| <= 1 of |<mu1 - mu2, (1 + |v|) phi>|. Atomic inputs sum
/// |w1 - w2| (1 + |v|) over distinct atoms; density inputs on a common grid use
/// cell quadrature. Mixed inputs throw std::invalid_argument.
double weighted_tv(const MeasureView& mu1, const MeasureView& mu2);

// ---------------------------------------------------------------- domination

/// Ingredients of the dominating branching rate Z.
struct DominatingParams {
    double alpha_sup = 0.0;  ///< ||alpha||_inf = alpha1
    double beta_sup = 0.0;   ///< ||beta||_inf = beta1
    double g0 = 1.0;
    double C = 1.0;          ///< speed constant max(d2 / gamma1, offspring speed cap)
    double sigma = 0.0;
    double k1 = 0.0;
    double T = 1.0;
    std::size_t substeps_per_unit = 1000;
    std::size_t cap = 1000000;
    bool branching = true;  ///< false keeps every run at one particle

    static DominatingParams from(const ModelParams& p, const OffspringVelocityLaw& law, double T);
};

/// One draw of Z = ||alpha|| g0 + C ||beta|| g0 T (T + 1) + ||beta|| g0 T sigma
/// sup_{s <= T} |int_0^s e^{k1 r} dW_r|. The stochastic integral is sampled on
/// the substep grid with exact Gaussian increments.
double sample_dominating_rate(const DominatingParams& dp, RngStream& rng);

struct DominatingRun {
    std::size_t n_total = 1;  ///< N-bar_T
    double sum_z = 0.0;       ///< sum of Z over all particles
    double first_z = 0.0;
};

/// Spaceless branching process from one particle: every particle draws its
/// own Z and branches at rate Z until T. Throws NumericalError beyond dp.cap.
DominatingRun dominating_process(const DominatingParams& dp, RngStream& rng);

struct RateEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t draws = 0;
};

/// Monte Carlo mean of Z.
RateEstimate estimate_rate(const DominatingParams& dp, std::size_t draws, std::uint64_t seed, unsigned workers = 1);

struct WaldReport {
    std::size_t trials = 0;
    double mean_sum_z = 0.0;
    double mean_z = 0.0;  ///< from an independent batch of draws
    double mean_n = 0.0;
    double discrepancy = 0.0;  ///< E[sum Z] - E[Z] E[N-bar]
    double se = 0.0;           ///< delta-method standard error of the discrepancy
    double exact_rate_bound = 0.0;  ///< e^{E[Z] T}
    bool pass = false;
};

WaldReport wald_check(const DominatingParams& dp, std::size_t n_trials, std::uint64_t seed, unsigned workers = 1);

struct DominationReport {
    std::size_t runs = 0;
    double mean_sup = 0.0;  ///< mean over runs of sup_t N_t / N
    double se_sup = 0.0;
    RateEstimate lambda;
    double bound = 0.0;     ///< e^{lambda T}
    bool pass = false;
};

/// Mean of sup_t N_t / N over an ensemble against e^{lambda T} + 3 SE.
DominationReport domination_check(const std::vector<double>& sup_masses, const RateEstimate& lambda, double T);

// ---------------------------------------------------------------- extinction

/// exp(log M0 - gamma T). Throws std::invalid_argument for M0 <= 0.
double extinction_bound(double M0, double gamma, double T);

struct ExtinctionRow {
    std::size_t n = 0;
    std::size_t runs = 0;
    std::size_t above = 0;  ///< runs with min_t M_t >= bound / 2
    double fraction = 0.0;
    double se = 0.0;        ///< binomial standard error
    double bound = 0.0;
};

ExtinctionRow extinction_check(const std::vector<TrajectoryRecord>& runs, double gamma, double T);

/// Fractions nondecreasing along the rows up to one binomial SE.
bool extinction_fractions_nondecreasing(const std::vector<ExtinctionRow>& rows);

// ---------------------------------------------------------------- martingales

/// Terminal predictable quadratic variations recorded along a run.
const std::vector<QvTotals>& martingale_qv(const TrajectoryRecord& run);

struct QvScalingRow {
    std::string part;  ///< brownian, birth or death
    std::size_t function = 0;
    double mean_small = 0.0;
    double se_small = 0.0;
    double mean_large = 0.0;
    double se_large = 0.0;
    double ratio = 0.0;
    bool pass = false;
};

/// Ratio of ensemble-mean QVs between the larger and smaller N, one row per
/// part and function; pass when the ratio is in [lo, hi].
std::vector<QvScalingRow> qv_scaling(const std::vector<TrajectoryRecord>& small,
                                     const std::vector<TrajectoryRecord>& large, double lo = 0.35,
                                     double hi = 0.65);

// ---------------------------------------------------------------- OU semigroup

/// phi(x, v) for the semigroup check.
using PhaseFunction = std::function<double(const Vec& x, const Vec& v)>;

struct SemigroupReport {
    double t = 0.0;
    std::size_t samples = 0;
    double A = 0.0;  ///< E phi(x + v t + int B, v + B_t)
    double A_se = 0.0;
    Vec G;           ///< gradient formula estimate
    Vec G_se;
    Vec fd;          ///< central differences of A in v (common random numbers)
    Vec fd_truncation;  ///< Richardson estimate |FD(2h) - FD(h)| / 3
    Vec diff_se;        ///< SE of the paired difference G - FD
    double max_excess = 0.0;  ///< max_k |G_k - FD_k| - (3 diff_se_k + truncation_k)
    bool pass = false;
};

/// Monte Carlo check of the gradient formula for the k1 = 0, sigma = 1
/// semigroup at (x, v). `h` is the finite-difference step.
SemigroupReport ou_semigroup_check(const PhaseFunction& phi, int dim, const Vec& x, const Vec& v, double t,
                                   std::size_t n_samples, std::uint64_t seed, double h = 0.05);

struct SemigroupBoundRow {
    double t = 0.0;
    double v = 0.0;
    double value_ratio = 0.0;  ///< |e^{tL}(1+|v|)phi| / (||phi|| (1 + |v|))
    double grad_ratio = 0.0;   ///< |grad_v e^{tL}(1+|v|)phi| / (||phi|| ((1+|v|)/sqrt t + 1))
};

struct SemigroupBoundReport {
    std::vector<SemigroupBoundRow> rows;
    double sup_value_ratio = 0.0;
    double sup_grad_ratio = 0.0;
    double sup_grad_ratio_doubled = 0.0;  ///< same sweep with twice the samples
    bool finite = false;
    bool stable = false;
};

/// Sweep of the two semigroup bounds over t and |v| along e1 (d = 1 case of
/// the formula applied per component).
SemigroupBoundReport ou_semigroup_bounds(const PhaseFunction& phi, double phi_sup, const std::vector<double>& ts,
                                         const std::vector<double>& vs, std::size_t n_samples,
                                         std::uint64_t seed);

// ---------------------------------------------------------------- convergence

struct ConvergenceRow {
    std::size_t n = 0;
    std::vector<double> values;  ///< sup_t metric per seed
    double mean = 0.0;
    double se = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    std::vector<ConvergenceRow> resampled;  ///< empirical measures drawn from p_t itself
    std::optional<double> slope;            ///< log-log slope of the mean metric; non-paper diagnostic
    std::optional<double> resampled_slope;
    bool decreasing = false;                ///< strictly decreasing up to 1 SE overlap
    /// slope within [kSlopeLow, kSlopeHigh]; an implementation expectation, not a claim of the model
    std::optional<bool> slope_in_range;
    static constexpr double kSlopeLow = -0.8;
    static constexpr double kSlopeHigh = -0.2;
};

/// Atoms drawn from the grid density (cell by mass, then uniform in the cell),
/// round(N M) of them with weight 1 / N.
EmpiricalMeasure resample_density(const PhaseSpaceDensity& rho, std::size_t n, RngStream& rng);

/// sup over output times of weak_metric(Q_N(t), p_t) for one stochastic run.
double sup_metric(const TrajectoryRecord& run, const MeanFieldResult& ref, const TestFunctionDictionary& dict);

/// Mean metric is strictly decreasing along the rows, allowing an overlap of
/// one SE between neighbours.
bool strictly_decreasing(const std::vector<ConvergenceRow>& rows);

ConvergenceTable convergence_study(const SimulationSetup& setup, const MeanFieldResult& ref,
                                   const std::vector<std::size_t>& ns, std::size_t seeds, std::uint64_t master_seed,
                                   const TestFunctionDictionary& dict, unsigned workers = 1,
                                   bool with_resampling = true);

}  // namespace angio
