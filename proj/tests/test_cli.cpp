#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lorentz/cli.hpp"
#include "lorentz/errors.hpp"

using namespace lorentz;

namespace {

const char* kReference =
    "# reference table\n"
    "scatterer = 0.0,0.0,0.4\n"
    "scatterer = 0.5,0.5,0.25\n"
    "force.kind = zero\n";

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("lorentz_lab_tests_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_tool(const std::string& args, const std::filesystem::path& log) {
    const std::string cmd = std::string(LORENTZ_LAB_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("minimal config gets defaults") {
        const ExperimentConfig c = parse_config_text("scatterer = 0.5,0.5,0.25\nforce.kind=zero\n");
        CHECK(c.table.size() == 1);
        CHECK(c.force.kind() == ForceKind::Zero);
        CHECK(c.twist.is_identity());
        CHECK(c.seed == 42);
        CHECK(c.thin == 1);
        CHECK(c.run.n == 100000);
        CHECK(c.run.eps_list.size() == 5);
        CHECK(c.integrator.rel_tol == IntegratorConfig{}.rel_tol);
    }

    TEST_CASE("full config") {
        const ExperimentConfig c = parse_config_text(
            "scatterer = 0.0,0.0,0.4   # disk A\n"
            "scatterer = 0.5,0.5,0.25\n"
            "force.kind = isokinetic\n"
            "force.field = odd_harmonic\n"
            "force.epsilon = 0.05\n"
            "force.e1 = 0.6\n"
            "force.modulation = 0.2\n"
            "twist.kind = slip\n"
            "twist.delta = 0.01\n"
            "twist.parity = odd\n"
            "integrator.rel_tol = 1e-9\n"
            "integrator.analytic_zero_force = false\n"
            "run.n = 50000\n"
            "run.eps_list = 0.01, 0.02,0.03,0.04\n"
            "run.kernel = linearized\n"
            "seed = 7\n"
            "threads = 2\n"
            "output.thin = 10\n");
        CHECK(c.force.kind() == ForceKind::Isokinetic);
        CHECK(c.force.epsilon() == 0.05);
        CHECK(c.twist.kind() == TwistKind::SlipOnly);
        CHECK(c.twist.delta() == 0.01);
        CHECK(c.integrator.rel_tol == 1e-9);
        CHECK_FALSE(c.integrator.analytic_zero_force);
        CHECK(c.run.n == 50000);
        CHECK(c.run.eps_list == std::vector<double>{0.01, 0.02, 0.03, 0.04});
        CHECK(c.run.kernel == HKernel::Linearized);
        CHECK(c.seed == 7);
        CHECK(c.threads == 2);
        CHECK(c.thin == 10);
        const ExperimentConfig p = parse_config_text(
            "scatterer = 0.5,0.5,0.25\nforce.kind = conservative\nforce.potential = constant:0.5\nforce.epsilon=0.04\n");
        CHECK(p.force.speed(0.1, 0.1, 0.0) == doctest::Approx(std::sqrt(0.96)));
    }

    TEST_CASE("validation and parse errors") {
        CHECK_THROWS_AS(parse_config_text("scatterer = 0.0,0.0,0.6\nforce.kind = zero\n"), ValidationError);
        try {
            parse_config_text("scatterer = 0.0,0.0,0.4\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("force.kind") != std::string::npos);
        }
        try {
            parse_config_text("scatterer = 0.0,0.0,0.4\n\nforce.kind = zero\nforce.colour = red\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 4);
            CHECK(std::string(e.what()).find("force.colour") != std::string::npos);
        }
        try {
            parse_config_text("scatterer = 0.0,0.0,0.4\nforce.kind = zero\nrun.n = lots\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
        CHECK_THROWS_AS(parse_config_text("scatterer = 0.0,0.0\nforce.kind = zero\n"), ParseError);
        CHECK_THROWS_AS(parse_config_text("scatterer 0.0,0.0,0.4\n"), ParseError);
        CHECK_THROWS_AS(parse_config_text("scatterer = 0,0,0.4\nforce.kind = gravity\n"), ParseError);
        CHECK_THROWS_AS(parse_config_text("scatterer = 0,0,0.4\nforce.kind = zero\nseed = 1\nseed = 2\n"), ParseError);
        CHECK_THROWS_AS(parse_config("/nonexistent/lorentz.cfg"), ParseError);
    }

    TEST_CASE("format_double is shortest round trip") {
        CHECK(format_double(0.1) == "0.1");
        CHECK(format_double(1e-20) == "1e-20");
        CHECK(format_double(2.0) == "2");
        const double v = 0.1 + 0.2;
        CHECK(std::stod(format_double(v)) == v);
    }

    TEST_CASE("horizon and current subcommands") {
        ExperimentConfig c = parse_config_text(std::string(kReference) + "run.n = 40000\n");
        c.threads = 1;
        const auto dir = scratch("sub");
        const Summary h = run_subcommand("horizon", c, dir / "h");
        CHECK(h.get("finite") == "true");
        CHECK(std::stod(h.get("tau_max_empirical")) > 0.5);
        CHECK(read_file(dir / "h" / "summary.txt").find("finite=true\n") != std::string::npos);

        const Summary j = run_subcommand("current", c, dir / "c");
        CHECK(std::abs(std::stod(j.get("Jx"))) < 3.0 * std::stod(j.get("stderr_x")));
        CHECK(std::abs(std::stod(j.get("Jy"))) < 3.0 * std::stod(j.get("stderr_y")));

        CHECK_THROWS_AS(run_subcommand("bogus", c, dir / "x"), ValidationError);
    }

    TEST_CASE("simulate output is reproducible byte for byte") {
        ExperimentConfig c = parse_config_text("scatterer = 0.0,0.0,0.4\nscatterer = 0.5,0.5,0.25\n"
                                               "force.kind = constant_thermostatted\nforce.epsilon = 0.05\n"
                                               "run.n = 2000\nrun.burn_in = 10\noutput.thin = 7\n");
        c.threads = 1;
        const auto dir = scratch("sim");
        run_subcommand("simulate", c, dir / "a");
        run_subcommand("simulate", c, dir / "b");
        const std::string a = read_file(dir / "a" / "orbit.csv");
        CHECK(a == read_file(dir / "b" / "orbit.csv"));
        CHECK(read_file(dir / "a" / "summary.txt") == read_file(dir / "b" / "summary.txt"));
        CHECK(a.rfind("k,r,s,tau,dx,dy,H,logJ\n", 0) == 0);
        std::size_t rows = 0;
        for (char ch : a) rows += ch == '\n';
        CHECK(rows == 1 + (2000 + 6) / 7);

        c.seed = 43;
        run_subcommand("simulate", c, dir / "c");
        CHECK(a != read_file(dir / "c" / "orbit.csv"));
    }

    TEST_CASE("reversibility subcommand") {
        ExperimentConfig c = parse_config_text(
            "scatterer = 0.0,0.0,0.4\nscatterer = 0.5,0.5,0.25\n"
            "force.kind = isokinetic\nforce.epsilon = 0.05\n"
            "twist.kind = slip\ntwist.delta = 0.02\ntwist.parity = odd\nrun.samples = 300\n");
        const auto dir = scratch("rev");
        CHECK(run_subcommand("reversibility", c, dir / "odd").get("map_reversible") == "true");
        c.twist = TwistModel::slip(0.02, TwistModel::Parity::Even);
        const Summary even = run_subcommand("reversibility", c, dir / "even");
        CHECK(even.get("map_reversible") == "false");
        CHECK(even.get("twist_reversible") == "false");
    }

    TEST_CASE("command-line tool") {
        const auto dir = scratch("tool");
        {
            std::ofstream(dir / "ref.cfg") << kReference << "run.n = 30000\n";
            std::ofstream(dir / "bad.cfg") << "scatterer = 0.0,0.0,0.6\nforce.kind = zero\n";
            std::ofstream(dir / "graze.cfg") << kReference << "run.n = 30000\nintegrator.max_time = 0.01\n";
        }
        const auto cfg = (dir / "ref.cfg").string();
        CHECK(run_tool("current --config " + cfg + " --out " + (dir / "out").string() + " --threads 1",
                       dir / "log1") == 0);
        CHECK(read_file(dir / "out" / "summary.txt").find("Jx=") != std::string::npos);

        CHECK(run_tool("teleport --config " + cfg + " --out " + (dir / "x").string(), dir / "log2") == 2);
        CHECK(read_file(dir / "log2").find("usage:") != std::string::npos);

        CHECK(run_tool("current --config " + (dir / "bad.cfg").string() + " --out " + (dir / "y").string(),
                       dir / "log3") == 2);
        CHECK(run_tool("current --config " + (dir / "graze.cfg").string() + " --out " + (dir / "z").string(),
                       dir / "log4") == 3);
        CHECK(run_tool("current --out " + (dir / "w").string(), dir / "log5") == 2);

        // The seed flag overrides the config and changes the output.
        CHECK(run_tool("simulate --config " + cfg + " --out " + (dir / "s1").string() + " --seed 5", dir / "l6") == 0);
        CHECK(run_tool("simulate --config " + cfg + " --out " + (dir / "s2").string() + " --seed 5", dir / "l7") == 0);
        CHECK(read_file(dir / "s1" / "orbit.csv") == read_file(dir / "s2" / "orbit.csv"));
        CHECK(read_file(dir / "s1" / "summary.txt").find("seed=5\n") != std::string::npos);
    }
}
