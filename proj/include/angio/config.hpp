#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "angio/meanfield.hpp"
#include "angio/tips.hpp"

namespace angio {

/// Sizes of the verification checks.
struct VerifyOptions {
    std::size_t ou_tips = 10000;
    double ou_T = 5.0;
    std::size_t domination_seeds = 50;
    std::size_t lambda_draws = 100000;
    std::size_t wald_trials = 10000;
    std::size_t wald_seeds = 10;
    std::vector<std::size_t> extinction_n{50, 100, 200};
    std::size_t extinction_seeds = 40;
    std::size_t qv_n = 100;  ///< compared against 2 qv_n
    std::size_t qv_seeds = 30;
    std::vector<double> semigroup_times{0.25, 0.5, 1.0};
    std::size_t semigroup_samples = 1000000;
    std::size_t thinning_trials = 10000;
};

/// Everything one invocation needs. Defaults depend on `dim` only.
struct RunConfig {
    SimulationSetup setup;
    MeanFieldConfig meanfield;  ///< grid numerics; its setup is taken from `setup`
    std::uint64_t seed = 1;
    std::size_t seeds = 1;
    std::vector<std::size_t> n_list{50, 100, 200, 400};
    std::size_t convergence_seeds = 20;
    int reference_dim = 0;  ///< mean-field reference dimension for converge; 0: dim
    bool self_convergence = true;
    std::string out = "out";
    unsigned workers = 1;
    VerifyOptions verify;

    static RunConfig defaults(int dim = 2);
    /// Throws ConfigError naming the violated constraint.
    void validate() const;
    /// Mean-field configuration with the model and geometry of `setup`.
    MeanFieldConfig meanfield_config() const;
    /// Resolved key = value pairs in key order.
    std::vector<std::pair<std::string, std::string>> echo() const;
    /// FNV-1a 64 over the sorted echo, excluding `out` and `workers`.
    std::uint64_t hash() const;
};

struct ConfigKey {
    std::string name;
    std::string doc;
};

/// Every accepted key with its documentation, in echo order.
std::vector<ConfigKey> config_keys();

/// Flat `key = value` text; `#` starts a comment. Throws ConfigError with the
/// line number on malformed lines, unknown or duplicate keys and bad values.
RunConfig parse_config_text(std::string_view text);
RunConfig parse_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace angio
