#include "angio/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/core.h>

#include "angio/errors.hpp"

namespace angio {

namespace {

struct ValueError {
    std::string what;
};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    while (true) {
        const auto c = s.find(',');
        out.push_back(trim(s.substr(0, c)));
        if (c == std::string_view::npos) break;
        s.remove_prefix(c + 1);
    }
    return out;
}

double parse_real(std::string_view s) {
    double x = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || !std::isfinite(x))
        throw ValueError{fmt::format("expected a finite number, got '{}'", s)};
    return x;
}

std::uint64_t parse_uint(std::string_view s) {
    std::uint64_t x = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        throw ValueError{fmt::format("expected a non-negative integer, got '{}'", s)};
    return x;
}

int parse_int(std::string_view s) {
    int x = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        throw ValueError{fmt::format("expected an integer, got '{}'", s)};
    return x;
}

bool parse_bool(std::string_view s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ValueError{fmt::format("expected true or false, got '{}'", s)};
}

std::string show(double x) { return fmt::format("{}", x); }

template <class T>
std::string show_list(const std::vector<T>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + fmt::format("{}", xs[i]);
    return s;
}

struct Key {
    std::string name;
    std::string doc;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class Ref>
Key real(const char* name, const char* doc, Ref ref) {
    return {name, doc, [ref](RunConfig& c, std::string_view v) { ref(c) = parse_real(v); },
            [ref](const RunConfig& c) { return show(ref(c)); }};
}

template <class Ref>
Key count(const char* name, const char* doc, Ref ref) {
    return {name, doc,
            [ref](RunConfig& c, std::string_view v) {
                using T = std::remove_reference_t<decltype(ref(c))>;
                ref(c) = static_cast<T>(parse_uint(v));
            },
            [ref](const RunConfig& c) { return fmt::format("{}", ref(c)); }};
}

template <class Ref>
Key flag(const char* name, const char* doc, Ref ref) {
    return {name, doc, [ref](RunConfig& c, std::string_view v) { ref(c) = parse_bool(v); },
            [ref](const RunConfig& c) { return std::string(ref(c) ? "true" : "false"); }};
}

/// Per-axis box corner: `dim` comma-separated numbers.
template <class Ref>
Key corner(const char* name, const char* doc, Ref ref) {
    return {name, doc,
            [ref](RunConfig& c, std::string_view v) {
                const auto parts = split_list(v);
                const int d = c.setup.params.dim;
                if (static_cast<int>(parts.size()) != d)
                    throw ValueError{fmt::format("expected {} comma-separated numbers, got '{}'", d, v)};
                for (int a = 0; a < d; ++a) ref(c)[static_cast<std::size_t>(a)] = parse_real(parts[static_cast<std::size_t>(a)]);
            },
            [ref](const RunConfig& c) {
                std::vector<double> xs;
                for (int a = 0; a < c.setup.params.dim; ++a) xs.push_back(ref(c)[static_cast<std::size_t>(a)]);
                return show_list(xs);
            }};
}

template <class Ref>
Key counts(const char* name, const char* doc, Ref ref) {
    return {name, doc,
            [ref](RunConfig& c, std::string_view v) {
                std::vector<std::size_t> xs;
                for (auto p : split_list(v)) xs.push_back(static_cast<std::size_t>(parse_uint(p)));
                ref(c) = xs;
            },
            [ref](const RunConfig& c) { return show_list(ref(c)); }};
}

template <class Ref>
Key reals(const char* name, const char* doc, Ref ref) {
    return {name, doc,
            [ref](RunConfig& c, std::string_view v) {
                std::vector<double> xs;
                for (auto p : split_list(v)) xs.push_back(parse_real(p));
                ref(c) = xs;
            },
            [ref](const RunConfig& c) { return show_list(ref(c)); }};
}

#define REF(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Key>& key_table() {
    static const std::vector<Key> keys = {
        {"dim", "spatial dimension: 1, 2 (default) or 3; sets the dimension-dependent defaults",
         [](RunConfig& c, std::string_view v) { c.setup.params.dim = parse_int(v); },
         [](const RunConfig& c) { return fmt::format("{}", c.setup.params.dim); }},
        real("k1", "friction rate", REF(setup.params.k1)),
        real("k2", "TAF source strength", REF(setup.params.k2)),
        real("sigma", "velocity noise amplitude", REF(setup.params.sigma)),
        real("d1", "TAF diffusivity", REF(setup.params.d1)),
        real("d2", "chemotaxis strength", REF(setup.params.d2)),
        real("gamma1", "chemotaxis saturation scale", REF(setup.params.gamma1)),
        real("q", "chemotaxis saturation exponent", REF(setup.params.q)),
        real("alpha1", "maximal tip-branching rate", REF(setup.params.alpha1)),
        real("beta1", "maximal vessel-branching rate", REF(setup.params.beta1)),
        real("C_R", "reference concentration of the branching rates", REF(setup.params.C_R)),
        real("gamma", "anastomosis rate constant", REF(setup.params.gamma)),
        real("C_max", "peak of the initial TAF field", REF(setup.params.C_max)),
        real("v0", "mean offspring speed", REF(setup.params.v0)),
        real("g0", "total mass of the offspring velocity density", REF(setup.params.g0)),

        corner("domain_lo", "lower domain corner, one number per axis", REF(setup.domain.lo)),
        corner("domain_hi", "upper domain corner", REF(setup.domain.hi)),
        corner("tumor_lo", "lower corner of the tumor box A", REF(setup.tumor.lo)),
        corner("tumor_hi", "upper corner of the tumor box A", REF(setup.tumor.hi)),
        real("tumor_width", "smoothing width of the tumor indicator", REF(setup.tumor_width)),
        corner("init_lo", "lower corner of the initial tip region", REF(setup.init_region.lo)),
        corner("init_hi", "upper corner of the initial tip region", REF(setup.init_region.hi)),
        real("c0_length", "decay length of the initial TAF profile", REF(setup.c0_length)),
        real("offspring_spread", "offspring velocity spread relative to v0", REF(setup.offspring_spread)),
        real("k1_radius", "support radius of the absorption kernel K1", REF(setup.k1_radius)),
        real("k1_mass", "integral of K1", REF(setup.k1_mass)),
        real("k2_radius", "support radius of the network kernel K2", REF(setup.k2_radius)),
        real("k2_mass", "integral of K2", REF(setup.k2_mass)),
        real("field_spacing", "TAF grid spacing", REF(setup.field_spacing)),
        {"explicit_diffusion", "explicit Euler diffusion instead of the implicit scheme",
         [](RunConfig& c, std::string_view v) {
             c.setup.diffusion.scheme = parse_bool(v) ? DiffusionScheme::explicit_euler : DiffusionScheme::implicit;
         },
         [](const RunConfig& c) {
             return std::string(c.setup.diffusion.scheme == DiffusionScheme::explicit_euler ? "true" : "false");
         }},

        count("N", "initial number of tips", REF(setup.n_tips)),
        real("dt", "time step", REF(setup.dt)),
        real("T", "final time", REF(setup.T)),
        real("output_dt", "output stride in time", REF(setup.output_dt)),
        real("exclude_own_recent_segments", "window of a tip's own recent path left out of its network density; 0 disables",
             REF(setup.exclude_own_recent)),
        {"density_mode", "network density evaluation: exact or grid",
         [](RunConfig& c, std::string_view v) {
             if (v == "exact") c.setup.density_mode = DensityMode::exact;
             else if (v == "grid") c.setup.density_mode = DensityMode::grid;
             else throw ValueError{fmt::format("expected exact or grid, got '{}'", v)};
         },
         [](const RunConfig& c) { return std::string(c.setup.density_mode == DensityMode::grid ? "grid" : "exact"); }},
        count("max_tips", "tip cap; exceeding it is a numerical failure", REF(setup.max_tips)),
        count("dict_size", "number of dictionary test functions", REF(setup.dict_size)),
        real("dict_vmax", "velocity scale of the dictionary", REF(setup.dict_vmax)),

        real("mf_x_spacing", "mean-field x spacing; 0 selects the default", REF(meanfield.x_spacing)),
        {"mf_nv", "mean-field velocity cells per axis; 0 selects the default",
         [](RunConfig& c, std::string_view v) { c.meanfield.nv = parse_int(v); },
         [](const RunConfig& c) { return fmt::format("{}", c.meanfield.nv); }},
        real("mf_v_max", "mean-field velocity box half-width; 0 selects it automatically", REF(meanfield.v_max)),
        real("mf_dt", "mean-field time step; 0 selects it from the stability limits", REF(meanfield.dt)),
        real("mf_safety", "fraction of the stability limit used for the automatic step", REF(meanfield.safety)),
        real("mf_leak_tolerance", "tolerated velocity-boundary leakage rate", REF(meanfield.leak_tolerance)),
        real("mf_convergence_tolerance", "tolerated self-convergence change of M_T", REF(meanfield.convergence_tolerance)),
        flag("self_convergence", "meanfield also runs the coarsened grid and reports the change of M_T",
             REF(self_convergence)),

        count("seed", "master seed", REF(seed)),
        count("seeds", "ensemble size of simulate", REF(seeds)),
        counts("n_list", "N sweep of converge", REF(n_list)),
        count("convergence_seeds", "seeds per N in converge", REF(convergence_seeds)),
        {"reference_dim", "dimension of the mean-field reference in converge; 0 uses dim",
         [](RunConfig& c, std::string_view v) { c.reference_dim = parse_int(v); },
         [](const RunConfig& c) { return fmt::format("{}", c.reference_dim); }},
        {"out", "output directory",
         [](RunConfig& c, std::string_view v) { c.out = std::string(v); },
         [](const RunConfig& c) { return c.out; }},
        count("workers", "worker threads", REF(workers)),

        count("ou_tips", "verify ou_moments: number of tips", REF(verify.ou_tips)),
        real("ou_T", "verify ou_moments: final time", REF(verify.ou_T)),
        count("domination_seeds", "verify domination: seeds", REF(verify.domination_seeds)),
        count("lambda_draws", "verify domination: draws of Z for lambda", REF(verify.lambda_draws)),
        count("wald_trials", "verify wald: dominating-process trials per master seed", REF(verify.wald_trials)),
        count("wald_seeds", "verify wald: master seeds", REF(verify.wald_seeds)),
        counts("extinction_n", "verify extinction: N sweep", REF(verify.extinction_n)),
        count("extinction_seeds", "verify extinction: seeds per N", REF(verify.extinction_seeds)),
        count("qv_n", "verify qv_scaling: smaller N (compared with twice this N)", REF(verify.qv_n)),
        count("qv_seeds", "verify qv_scaling: seeds per N", REF(verify.qv_seeds)),
        reals("semigroup_times", "verify semigroup: times", REF(verify.semigroup_times)),
        count("semigroup_samples", "verify semigroup: samples per time", REF(verify.semigroup_samples)),
        count("thinning_trials", "verify thinning: trials per law", REF(verify.thinning_trials)),
    };
    return keys;
}

#undef REF

void need(bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("constraint violated: ") + what);
}

}  // namespace

RunConfig RunConfig::defaults(int dim) {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("constraint violated: 1 <= dim <= 3");
    RunConfig c;
    c.setup = SimulationSetup::desk(dim);
    c.meanfield = MeanFieldConfig::desk(std::min(dim, 2));
    c.meanfield.setup = c.setup;
    return c;
}

void RunConfig::validate() const {
    setup.validate();
    need(seeds >= 1, "seeds >= 1");
    need(workers >= 1, "workers >= 1");
    need(!n_list.empty(), "n_list is not empty");
    for (std::size_t n : n_list) need(n >= 1, "n_list entries >= 1");
    need(convergence_seeds >= 1, "convergence_seeds >= 1");
    need(reference_dim >= 0 && reference_dim <= kMaxDim, "0 <= reference_dim <= 3");
    need(!out.empty(), "out is not empty");
    need(meanfield.x_spacing >= 0.0, "mf_x_spacing >= 0");
    need(meanfield.nv >= 0, "mf_nv >= 0");
    need(meanfield.v_max >= 0.0, "mf_v_max >= 0");
    need(meanfield.dt >= 0.0, "mf_dt >= 0");
    need(meanfield.safety > 0.0 && meanfield.safety <= 1.0, "0 < mf_safety <= 1");
    need(meanfield.leak_tolerance > 0.0, "mf_leak_tolerance > 0");
    need(meanfield.convergence_tolerance > 0.0, "mf_convergence_tolerance > 0");
    need(verify.ou_tips >= 2, "ou_tips >= 2");
    need(verify.ou_T > 0.0, "ou_T > 0");
    need(verify.domination_seeds >= 2, "domination_seeds >= 2");
    need(verify.lambda_draws >= 2, "lambda_draws >= 2");
    need(verify.wald_trials >= 2, "wald_trials >= 2");
    need(verify.wald_seeds >= 1, "wald_seeds >= 1");
    need(!verify.extinction_n.empty(), "extinction_n is not empty");
    for (std::size_t n : verify.extinction_n) need(n >= 1, "extinction_n entries >= 1");
    need(verify.extinction_seeds >= 1, "extinction_seeds >= 1");
    need(verify.qv_n >= 1, "qv_n >= 1");
    need(verify.qv_seeds >= 2, "qv_seeds >= 2");
    need(!verify.semigroup_times.empty(), "semigroup_times is not empty");
    for (double t : verify.semigroup_times) need(t > 0.0, "semigroup_times entries > 0");
    need(verify.semigroup_samples >= 100, "semigroup_samples >= 100");
    need(verify.thinning_trials >= 100, "thinning_trials >= 100");
}

MeanFieldConfig RunConfig::meanfield_config() const {
    MeanFieldConfig m = meanfield;
    m.setup = setup;
    m.workers = workers;
    return m;
}

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const Key& k : key_table()) out.emplace_back(k.name, k.get(*this));
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t RunConfig::hash() const {
    auto e = echo();
    std::sort(e.begin(), e.end());
    std::uint64_t h = fnv1a64("");
    for (const auto& [k, v] : e) {
        if (k == "out" || k == "workers") continue;
        h = fnv1a64(k, h);
        h = fnv1a64("=", h);
        h = fnv1a64(v, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

std::vector<ConfigKey> config_keys() {
    std::vector<ConfigKey> out;
    for (const Key& k : key_table()) out.push_back({k.name, k.doc});
    return out;
}

RunConfig parse_config_text(std::string_view text) {
    std::map<std::string, std::pair<std::string, int>, std::less<>> entries;
    std::vector<std::string_view> lines;
    for (std::size_t pos = 0;;) {
        const auto nl = text.find('\n', pos);
        lines.push_back(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int line_no = static_cast<int>(i) + 1;
        std::string_view line = lines[i];
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(fmt::format("line {}: expected 'key = value', got '{}'", line_no, line));
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ConfigError(fmt::format("line {}: missing key before '='", line_no));
        if (value.empty()) throw ConfigError(fmt::format("line {}: missing value for key '{}'", line_no, key));
        const auto& table = key_table();
        if (std::none_of(table.begin(), table.end(), [&](const Key& k) { return k.name == key; }))
            throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
        if (auto it = entries.find(key); it != entries.end())
            throw ConfigError(
                fmt::format("line {}: duplicate key '{}' (first set on line {})", line_no, key, it->second.second));
        entries.emplace(key, std::pair{value, line_no});
    }

    int dim = 2;
    if (auto it = entries.find("dim"); it != entries.end()) {
        try {
            dim = parse_int(it->second.first);
        } catch (const ValueError& e) {
            throw ConfigError(fmt::format("line {}: key 'dim': {}", it->second.second, e.what));
        }
    }
    RunConfig cfg = RunConfig::defaults(dim);
    for (const Key& k : key_table()) {
        const auto it = entries.find(k.name);
        if (it == entries.end()) continue;
        try {
            k.set(cfg, it->second.first);
        } catch (const ValueError& e) {
            throw ConfigError(fmt::format("line {}: key '{}': {}", it->second.second, k.name, e.what));
        }
    }
    cfg.meanfield.setup = cfg.setup;
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace angio
