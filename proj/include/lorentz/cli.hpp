#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lorentz/flight.hpp"
#include "lorentz/forces.hpp"
#include "lorentz/geometry.hpp"
#include "lorentz/pmap.hpp"

namespace lorentz {

/// Experiment parameters shared by the subcommands (keys `run.*`).
struct RunParams {
    std::size_t n = 100000;        ///< collisions per orbit
    std::size_t burn_in = 1000;
    std::vector<double> eps_list{0.02, 0.04, 0.06, 0.08, 0.1};
    std::size_t max_lag = 200;     ///< K cap for series
    std::size_t max_window = 200;  ///< W cap for Green-Kubo
    std::size_t m = 10000;         ///< CLT ensemble size
    std::size_t orbit_length = 1000;  ///< CLT orbit length
    std::size_t n_mc = 200000;     ///< chain points for response series
    std::size_t chain_length = 5000;
    std::size_t n_offsets = 200;   ///< horizon rays per direction
    std::size_t samples = 1000;    ///< reversibility samples
    double tol = 1e-6;             ///< reversibility tolerance
    HKernel kernel = HKernel::Exact;
    std::size_t n_orbits = 1;      ///< Lyapunov ensemble size
    double h0 = 0.0;               ///< unforced entropy; 0 means measure it
};

struct ExperimentConfig {
    std::vector<Scatterer> scatterers;
    GeometryTable table;
    ForceModel force;
    TwistModel twist;
    IntegratorConfig integrator;
    RunParams run;
    std::uint64_t seed = 42;
    unsigned threads = 0;  ///< 0: machine parallelism
    std::size_t thin = 1;  ///< write every thin-th collision to orbit.csv

    CollisionMap map() const { return CollisionMap(table, force, twist, integrator); }
};

/// Parses the line-based `key = value` format (`#` starts a comment, the
/// `scatterer = cx,cy,r` key repeats) and validates the result. Throws
/// ParseError (with line number) or ValidationError.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(std::string_view text);

/// Shortest round-trip decimal form of v.
std::string format_double(double v);

/// Ordered `key=value` lines.
class Summary {
public:
    void add(std::string key, double v);
    void add(std::string key, std::size_t v);
    void add(std::string key, int v) { add(std::move(key), static_cast<std::size_t>(v)); }
    void add(std::string key, bool v);
    void add(std::string key, std::string v);
    void add(std::string key, const char* v) { add(std::move(key), std::string(v)); }

    const std::vector<std::pair<std::string, std::string>>& lines() const { return lines_; }
    /// Value for key; empty when absent.
    std::string get(std::string_view key) const;
    void write(std::ostream& os) const;

private:
    std::vector<std::pair<std::string, std::string>> lines_;
};

inline const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names{"horizon",  "simulate",   "current",       "response", "diffusion",
                                                "lyapunov", "dimension", "reversibility", "clt"};
    return names;
}

/// Runs one subcommand and writes summary.txt plus its CSV files into out_dir.
/// Returns the summary. Library errors propagate to the caller.
Summary run_subcommand(const std::string& name, const ExperimentConfig& cfg,
                       const std::filesystem::path& out_dir);

/// Exit code for an exception escaping run_subcommand: 2 for validation
/// failures, 3 for runtime failures.
int exit_code_for(const std::exception& e);

}  // namespace lorentz
