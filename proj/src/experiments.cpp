#include <cmath>
#include <fstream>

#include "lorentz/cli.hpp"
#include "lorentz/errors.hpp"
#include "lorentz/parallel.hpp"
#include "lorentz/stats.hpp"

namespace lorentz {

namespace {

class Csv {
public:
    Csv(const std::filesystem::path& path, std::initializer_list<const char*> header) : os_(path) {
        if (!os_) throw RuntimeFailure("cannot write " + path.string());
        bool first = true;
        for (const char* h : header) {
            os_ << (first ? "" : ",") << h;
            first = false;
        }
        os_ << '\n';
    }
    Csv& operator<<(double v) { return cell(format_double(v)); }
    Csv& operator<<(std::size_t v) { return cell(std::to_string(v)); }
    void end_row() {
        os_ << '\n';
        first_ = true;
    }

private:
    Csv& cell(const std::string& s) {
        os_ << (first_ ? "" : ",") << s;
        first_ = false;
        return *this;
    }
    std::ofstream os_;
    bool first_ = true;
};

struct Context {
    const ExperimentConfig& cfg;
    const std::filesystem::path& out;
    unsigned threads;
    Summary summary;
};

void add_vec(Summary& s, const std::string& prefix, Vec2 v, const std::string& suffix = "") {
    s.add(prefix + "x" + suffix, v.x);
    s.add(prefix + "y" + suffix, v.y);
}

void add_mat(Summary& s, const std::string& prefix, const Mat2& m) {
    s.add(prefix + "_xx", m[0][0]);
    s.add(prefix + "_xy", m[0][1]);
    s.add(prefix + "_yy", m[1][1]);
}

OrbitSummary orbit_from_seed(const CollisionMap& map, const ExperimentConfig& cfg, bool points) {
    RngStream rng(cfg.seed, 0);
    OrbitOptions o;
    o.n = cfg.run.n;
    o.burn_in = cfg.run.burn_in;
    o.keep_points = points;
    return run_orbit(map, sample_mu0(map.table(), rng), o);
}

ChainOptions chain_options(const Context& c) {
    ChainOptions o;
    o.n_mc = c.cfg.run.n_mc;
    o.chain_length = c.cfg.run.chain_length;
    o.max_lag = c.cfg.run.max_lag;
    o.seed = c.cfg.seed;
    o.threads = c.threads;
    return o;
}

LyapunovOptions lyapunov_options(const Context& c) {
    LyapunovOptions o;
    o.n = c.cfg.run.n;
    o.n_orbits = c.cfg.run.n_orbits;
    o.burn_in = c.cfg.run.burn_in;
    o.seed = c.cfg.seed;
    o.threads = c.threads;
    return o;
}

void require_forced(const CollisionMap& map, const char* what) {
    if (map.epsilon() <= 0.0) throw ValidationError(std::string(what) + " needs a forced system (epsilon > 0)");
}

void run_horizon(Context& c) {
    const HorizonReport rep =
        check_finite_horizon(c.cfg.table, static_cast<int>(c.cfg.run.n_offsets), c.cfg.seed);
    c.summary.add("finite", rep.finite);
    c.summary.add("tau_max_empirical", rep.tau_max_empirical);
    c.summary.add("rays_cast", rep.rays_cast);
    c.summary.add("mean_free_time", mean_free_time(c.cfg.table));
    c.summary.add("min_gap", c.cfg.table.min_gap());
    if (!rep.finite) {
        add_vec(c.summary, "violating_direction_", rep.violating_direction);
        add_vec(c.summary, "violating_origin_", rep.violating_origin);
    }
}

void run_simulate(Context& c) {
    const CollisionMap map = c.cfg.map();
    const OrbitSummary orbit = orbit_from_seed(map, c.cfg, true);
    Csv csv(c.out / "orbit.csv", {"k", "r", "s", "tau", "dx", "dy", "H", "logJ"});
    for (std::size_t k = 0; k < orbit.n; k += c.cfg.thin) {
        csv << k << orbit.points[k].r << orbit.points[k].s << orbit.tau[k] << orbit.delta[k].x << orbit.delta[k].y
            << orbit.H[k] << orbit.log_jac[k];
        csv.end_row();
    }
    c.summary.add("n", orbit.n);
    add_vec(c.summary, "q_n_", orbit.q_n);
    c.summary.add("total_time", orbit.total_time);
    c.summary.add("mean_tau", orbit.total_time / static_cast<double>(orbit.n));
    c.summary.add("mean_log_jac", orbit.sum_log_jac / static_cast<double>(orbit.n));
    c.summary.add("mean_H", orbit.sum_H / static_cast<double>(orbit.n));
    c.summary.add("tangential_hits", orbit.tangential_hits);
    c.summary.add("discarded_tangential", orbit.discarded_tangential);
    c.summary.add("final_r", orbit.final_point.r);
    c.summary.add("final_s", orbit.final_point.s);
}

void run_current(Context& c) {
    const CollisionMap map = c.cfg.map();
    const OrbitSummary orbit = orbit_from_seed(map, c.cfg, false);
    const CurrentEstimate J = estimate_current_map(orbit);
    const CurrentEstimate Jf = estimate_current_flow(orbit);
    const SlipCurrent slip = slip_corrected_flow_current(orbit, map.twist());
    const double tau_bar = orbit.total_time / static_cast<double>(orbit.n);
    c.summary.add("n", orbit.n);
    c.summary.add("Jx", J.J.x);
    c.summary.add("Jy", J.J.y);
    c.summary.add("stderr_x", J.stderr_.x);
    c.summary.add("stderr_y", J.stderr_.y);
    c.summary.add("flow_Jx", Jf.J.x);
    c.summary.add("flow_Jy", Jf.J.y);
    c.summary.add("flow_stderr_x", Jf.stderr_.x);
    c.summary.add("flow_stderr_y", Jf.stderr_.y);
    c.summary.add("mean_tau", tau_bar);
    c.summary.add("flow_map_identity_residual",
                  std::max(std::abs(Jf.J.x * tau_bar - J.J.x), std::abs(Jf.J.y * tau_bar - J.J.y)));
    add_vec(c.summary, "slip_part_", slip.slip_part);
    c.summary.add("slip_mismatch", slip.max_mismatch);
    c.summary.add("batches", J.n_batches);
    c.summary.add("discarded_tangential", orbit.discarded_tangential);
}

void run_response(Context& c) {
    const CollisionMap map = c.cfg.map();
    require_forced(map, "response");
    const ResponseEstimate r = kawasaki_sigma(map, chain_options(c), c.cfg.run.kernel);
    {
        Csv csv(c.out / "response.csv", {"k", "term_x", "term_y", "stderr_x", "stderr_y"});
        for (std::size_t k = 0; k < r.terms.size(); ++k) {
            csv << k << r.terms[k].x << r.terms[k].y << r.term_stderr[k].x << r.term_stderr[k].y;
            csv.end_row();
        }
    }
    c.summary.add("epsilon", map.epsilon());
    c.summary.add("sigma_x", r.sigma.x);
    c.summary.add("sigma_y", r.sigma.y);
    c.summary.add("sigma_stderr_x", r.stderr_.x);
    c.summary.add("sigma_stderr_y", r.stderr_.y);
    c.summary.add("K", r.K);
    c.summary.add("n_mc", r.n_mc);
    c.summary.add("n_chains", r.n_chains);
    c.summary.add("tail_bound", r.tail_bound);
    c.summary.add("truncation_warning", r.truncation_warning);

    if (c.cfg.run.eps_list.empty()) return;
    const ExperimentConfig& cfg = c.cfg;
    const SweepResult sweep = linear_response_sweep(
        [&](double e) { return CollisionMap(cfg.table, cfg.force.with_epsilon(e), cfg.twist, cfg.integrator); },
        cfg.run.eps_list, cfg.run.n, cfg.seed, c.threads);
    Csv csv(c.out / "sweep.csv", {"eps", "Jx", "Jy", "stderr_x", "stderr_y"});
    for (const SweepPoint& p : sweep.points) {
        csv << p.epsilon << p.map_current.J.x << p.map_current.J.y << p.map_current.stderr_.x
            << p.map_current.stderr_.y;
        csv.end_row();
    }
    c.summary.add("slope_x", sweep.slope.x);
    c.summary.add("slope_y", sweep.slope.y);
    c.summary.add("slope_stderr_x", sweep.slope_stderr.x);
    c.summary.add("slope_stderr_y", sweep.slope_stderr.y);
    c.summary.add("fit_r2", sweep.fit_r2);
    if (r.sigma.x != 0.0) c.summary.add("slope_over_sigma_x", sweep.slope.x / r.sigma.x);
}

void run_diffusion(Context& c) {
    const CollisionMap map = c.cfg.map();
    const OrbitSummary orbit = orbit_from_seed(map, c.cfg, false);
    DiffusionOptions o;
    o.max_window = c.cfg.run.max_window;
    const DiffusionEstimate d = green_kubo_D(orbit.delta, o);
    c.summary.add("n", orbit.n);
    add_mat(c.summary, "D", d.D);
    add_mat(c.summary, "stderr", d.stderr_);
    c.summary.add("W", d.window);
    c.summary.add("batches", d.n_batches);
}

void write_spectrum(const Context& c, const SpectrumEstimate& s) {
    Csv csv(c.out / "spectrum.csv", {"n", "lambda_u_running", "lambda_s_running"});
    for (const auto& row : s.running) {
        csv << row.n << row.lambda_u << row.lambda_s;
        csv.end_row();
    }
}

void add_spectrum(Summary& sum, const SpectrumEstimate& s) {
    sum.add("n", s.n);
    sum.add("lambda_u", s.lambda_u);
    sum.add("lambda_s", s.lambda_s);
    sum.add("stderr_u", s.stderr_u);
    sum.add("stderr_s", s.stderr_s);
    sum.add("combined_stderr", s.combined_stderr());
    sum.add("sum", s.lambda_u + s.lambda_s);
    sum.add("stderr_sum", s.stderr_sum);
    sum.add("xi", s.xi);
    sum.add("xi_jacobian", s.xi_jacobian);
    sum.add("xi_jacobian_stderr", s.xi_jacobian_stderr);
    sum.add("refreshed_stencils", s.refreshed_stencils);
    sum.add("skipped_stencils", s.skipped_stencils);
}

void run_lyapunov(Context& c) {
    const SpectrumEstimate s = lyapunov_spectrum(c.cfg.map(), lyapunov_options(c));
    write_spectrum(c, s);
    add_spectrum(c.summary, s);
    c.summary.add("h_pesin", s.h_pesin);
}

void run_dimension(Context& c) {
    const CollisionMap map = c.cfg.map();
    require_forced(map, "dimension");
    const LyapunovOptions lo = lyapunov_options(c);
    double h0 = c.cfg.run.h0;
    if (h0 <= 0.0) h0 = lyapunov_spectrum(map.unforced(), lo).lambda_u;
    const VarianceSum v = sigma2_H(map, chain_options(c), c.cfg.run.kernel);
    const SpectrumEstimate s = dimension(lyapunov_spectrum(map, lo), h0, v.value, map.epsilon());
    write_spectrum(c, s);
    add_spectrum(c.summary, s);
    c.summary.add("epsilon", map.epsilon());
    c.summary.add("h0", s.h0);
    c.summary.add("sigma2_H", s.sigma2_H);
    c.summary.add("sigma2_H_stderr", v.stderr_);
    c.summary.add("sigma2_H_K", v.K);
    c.summary.add("hd", s.hd);
    c.summary.add("hd_predicted", s.hd_predicted);
    c.summary.add("deficit", 2.0 - s.hd);
    c.summary.add("deficit_predicted", 2.0 - s.hd_predicted);
}

void run_reversibility(Context& c) {
    const CollisionMap map = c.cfg.map();
    const ReversibilityReport flow = flow_reversibility(map.force(), static_cast<int>(c.cfg.run.samples), 1e-10);
    const ReversibilityReport twist =
        twist_reversibility(map.twist(), map.table(), static_cast<int>(c.cfg.run.samples), 1e-12);
    const std::size_t n = c.cfg.run.samples;
    std::vector<double> residual(n, -1.0);
    parallel_for(n, c.threads, [&](std::size_t i) {
        RngStream rng(c.cfg.seed, i);
        try {
            residual[i] = map.reversibility_residual(sample_mu0(map.table(), rng));
        } catch (const RuntimeFailure&) {
            residual[i] = -1.0;
        } catch (const RangeError&) {
            residual[i] = -1.0;
        }
    });
    std::size_t valid = 0, passed = 0;
    double worst = 0.0;
    for (double r : residual) {
        if (r < 0.0) continue;
        ++valid;
        if (r <= c.cfg.run.tol) ++passed;
        worst = std::max(worst, r);
    }
    c.summary.add("flow_reversible", flow.reversible);
    c.summary.add("flow_worst_violation", flow.worst_violation);
    c.summary.add("twist_reversible", twist.reversible);
    c.summary.add("twist_worst_violation", twist.worst_violation);
    c.summary.add("samples", n);
    c.summary.add("valid_samples", valid);
    c.summary.add("passed_samples", passed);
    c.summary.add("pass_fraction", valid ? static_cast<double>(passed) / static_cast<double>(valid) : 0.0);
    c.summary.add("worst_residual", worst);
    c.summary.add("map_reversible", valid > 0 && passed * 100 >= valid * 99);
}

void run_clt(Context& c) {
    const CollisionMap map = c.cfg.map();
    const OrbitSummary orbit = orbit_from_seed(map, c.cfg, false);
    DiffusionOptions dopts;
    dopts.max_window = c.cfg.run.max_window;
    const DiffusionEstimate d = green_kubo_D(orbit.delta, dopts);
    const CurrentEstimate J = estimate_current_map(orbit);

    CltOptions o;
    o.m = c.cfg.run.m;
    o.n = c.cfg.run.orbit_length;
    o.burn_in = map.epsilon() > 0.0 ? c.cfg.run.burn_in : 0;
    o.J_ref = map.epsilon() > 0.0 ? J.J : Vec2{};
    o.seed = c.cfg.seed + 1;
    o.threads = c.threads;
    const CltResult clt = clt_test(map, o);
    c.summary.add("m", o.m);
    c.summary.add("orbit_length", o.n);
    add_vec(c.summary, "skewness_", clt.skewness);
    add_vec(c.summary, "excess_kurtosis_", clt.excess_kurtosis);
    add_mat(c.summary, "cov", clt.covariance);
    add_mat(c.summary, "D", d.D);
    c.summary.add("W", d.window);
    c.summary.add("relative_deviation", relative_max_deviation(clt.covariance, d.D));
}

}  // namespace

Summary run_subcommand(const std::string& name, const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    Context c{cfg, out_dir, resolve_threads(cfg.threads), {}};
    c.summary.add("subcommand", name);
    c.summary.add("seed", static_cast<std::size_t>(cfg.seed));
    if (name == "horizon") run_horizon(c);
    else if (name == "simulate") run_simulate(c);
    else if (name == "current") run_current(c);
    else if (name == "response") run_response(c);
    else if (name == "diffusion") run_diffusion(c);
    else if (name == "lyapunov") run_lyapunov(c);
    else if (name == "dimension") run_dimension(c);
    else if (name == "reversibility") run_reversibility(c);
    else if (name == "clt") run_clt(c);
    else throw ValidationError("unknown subcommand '" + name + "'");

    std::ofstream os(out_dir / "summary.txt");
    if (!os) throw RuntimeFailure("cannot write " + (out_dir / "summary.txt").string());
    c.summary.write(os);
    return c.summary;
}

}  // namespace lorentz
