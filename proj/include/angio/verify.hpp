#pragma once

#include <string>
#include <utility>
#include <vector>

#include "angio/config.hpp"

namespace angio {

/// Rows of strings under a header; written as CSV.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// CSV text: `,` separator, `.` decimal, LF endings, header row.
std::string csv_text(const Table& t);

/// Shortest round-trip decimal form.
std::string num(double x);

struct CheckResult {
    std::string check;
    double statistic = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string summary;
    std::vector<std::pair<std::string, double>> values;  ///< headline numbers for the JSON summary
    Table table;
};

/// Names accepted by run_check and `verify --only`, in suite order.
const std::vector<std::string>& check_names();

/// Throws std::invalid_argument for an unknown name.
CheckResult run_check(const std::string& name, const RunConfig& cfg);

/// Velocity variance of independent tips with d2 = 0, k1 = 1, sigma = 1
/// against 1/2, per component, in units of its standard error.
CheckResult check_ou_moments(const RunConfig& cfg);
/// Field bound violations over one full run of the configured setup.
CheckResult check_max_principle(const RunConfig& cfg);
/// Mean of sup_t N_t / N over seeds against e^{lambda T} + 3 SE.
CheckResult check_domination(const RunConfig& cfg);
/// Wald discrepancy over several master seeds.
CheckResult check_wald(const RunConfig& cfg);
/// Mean-field bound violations and the stochastic fraction sweep.
CheckResult check_extinction(const RunConfig& cfg);
/// Mass identity residuals of the mean-field run over the truncation estimate.
CheckResult check_mass_identity(const RunConfig& cfg);
/// QV ratios between N and 2N.
CheckResult check_qv_scaling(const RunConfig& cfg);
/// Dictionary metric along the N sweep.
CheckResult check_convergence(const RunConfig& cfg);
/// Gradient formula against finite differences, plus the bound sweep.
CheckResult check_semigroup(const RunConfig& cfg);
/// Branching counts, death times and vessel-branch locations.
CheckResult check_thinning(const RunConfig& cfg);

/// The configured setup when dim = 1, otherwise the d = 1 desk setup with the
/// configured model constants.
SimulationSetup line_setup(const RunConfig& cfg);
MeanFieldConfig line_meanfield(const RunConfig& cfg);

}  // namespace angio
