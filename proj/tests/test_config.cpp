#include <string>

#include "doctest.h"

#include "angio/config.hpp"
#include "angio/errors.hpp"
#include "angio/verify.hpp"

using namespace angio;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::string echo_value(const RunConfig& c, const std::string& key) {
    for (const auto& [k, v] : c.echo())
        if (k == key) return v;
    return "<missing>";
}

}  // namespace

TEST_CASE("empty file gives the defaults") {
    const RunConfig c = parse_config_text("");
    const RunConfig d = RunConfig::defaults();
    CHECK(c.echo() == d.echo());
    CHECK(c.hash() == d.hash());
    CHECK(c.setup.params.dim == 2);
    CHECK(c.setup.n_tips == 100);
    CHECK(c.setup.T == 2.0);
    CHECK(parse_config_text("# only a comment\n\n   \n").hash() == d.hash());
}

TEST_CASE("every key is echoed and documented") {
    const auto keys = config_keys();
    const auto echo = RunConfig::defaults().echo();
    REQUIRE(keys.size() == echo.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        CHECK(keys[i].name == echo[i].first);
        CHECK(!keys[i].doc.empty());
    }
}

TEST_CASE("overrides are applied and echoed") {
    const RunConfig c = parse_config_text("gamma = 0.5\nalpha1=0.75  # inline comment\nN = 40\n");
    CHECK(c.setup.params.alpha1 == 0.75);
    CHECK(c.setup.n_tips == 40);
    CHECK(echo_value(c, "gamma") == "0.5");
    CHECK(echo_value(c, "alpha1") == "0.75");
    const RunConfig g = parse_config_text("gamma = 0.9\n");
    CHECK(g.setup.params.gamma == 0.9);
    CHECK(echo_value(g, "gamma") == "0.9");
    CHECK(g.hash() != RunConfig::defaults().hash());
}

TEST_CASE("dimension-dependent defaults and per-axis corners") {
    const RunConfig c = parse_config_text("dim = 1\n");
    CHECK(c.setup.params.dim == 1);
    CHECK(c.setup.field_spacing == 0.02);
    CHECK(echo_value(c, "domain_hi") == "4");
    const RunConfig d = parse_config_text("domain_hi = 5, 4.5\ndim = 2\n");
    CHECK(d.setup.domain.hi[0] == 5.0);
    CHECK(d.setup.domain.hi[1] == 4.5);
    CHECK(echo_value(d, "domain_hi") == "5, 4.5");
    CHECK(error_of("domain_hi = 5\n").find("line 1: key 'domain_hi': expected 2 comma-separated numbers") == 0);
}

TEST_CASE("hash is stable under key reordering") {
    const RunConfig a = parse_config_text("gamma = 0.4\nsigma = 0.3\nn_list = 10, 20\n");
    const RunConfig b = parse_config_text("n_list = 10,20\n\nsigma=0.3\ngamma = 0.4\n");
    CHECK(a.hash() == b.hash());
    RunConfig c = a;
    c.workers = 7;
    c.out = "elsewhere";
    CHECK(c.hash() == a.hash());
    c.seed = 2;
    CHECK(c.hash() != a.hash());
}

TEST_CASE("constraint violations name the invariant") {
    CHECK(error_of("dt = -0.1\n") == "constraint violated: dt > 0");
    CHECK(error_of("T = 0\n") == "constraint violated: T > 0");
    CHECK(error_of("N = 0\n") == "constraint violated: N >= 1");
    CHECK(error_of("gamma = -1\n").find("constraint violated: gamma >= 0") != std::string::npos);
    CHECK(error_of("dim = 4\n") == "constraint violated: 1 <= dim <= 3");
    CHECK(error_of("seeds = 0\n") == "constraint violated: seeds >= 1");
}

TEST_CASE("parse errors carry the line number") {
    CHECK(error_of("gamma = 0.5\nnot a pair\n") == "line 2: expected 'key = value', got 'not a pair'");
    CHECK(error_of("\n\nbogus = 1\n") == "line 3: unknown key 'bogus'");
    CHECK(error_of("gamma = 0.5\ngamma = 0.6\n") == "line 2: duplicate key 'gamma' (first set on line 1)");
    CHECK(error_of("sigma = abc\n") == "line 1: key 'sigma': expected a finite number, got 'abc'");
    CHECK(error_of("N = 1.5\n") == "line 1: key 'N': expected a non-negative integer, got '1.5'");
    CHECK(error_of("= 3\n") == "line 1: missing key before '='");
    CHECK(error_of("k1 =\n") == "line 1: missing value for key 'k1'");
    CHECK(error_of("density_mode = fast\n") == "line 1: key 'density_mode': expected exact or grid, got 'fast'");
    CHECK(error_of("self_convergence = maybe\n") == "line 1: key 'self_convergence': expected true or false, got 'maybe'");
}

TEST_CASE("missing config file is a config error") {
    CHECK_THROWS_AS(parse_config("/nonexistent/angio.cfg"), ConfigError);
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("a negative rate injected past parsing is rejected at construction") {
    RunConfig c = parse_config_text("");
    c.setup.params.gamma = -0.5;
    CHECK_THROWS_AS(TipSystem(c.setup, 1), ConfigError);
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("csv text and number formatting") {
    const Table t{{"a", "b"}, {{"1", num(0.1)}, {num(1e-20), num(2.0)}}};
    CHECK(csv_text(t) == "a,b\n1,0.1\n1e-20,2\n");
    CHECK(num(1.0 / 3.0) == "0.3333333333333333");
}

TEST_CASE("line setup keeps the model constants in d = 1") {
    RunConfig c = parse_config_text("gamma = 0.25\nT = 1.5\n");
    const SimulationSetup s = line_setup(c);
    CHECK(s.params.dim == 1);
    CHECK(s.params.gamma == 0.25);
    CHECK(s.T == 1.5);
    CHECK(s.domain.dim == 1);
    CHECK(line_meanfield(c).setup.params.gamma == 0.25);
}
