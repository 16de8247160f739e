#include <cmath>

#include "lorentz/errors.hpp"
#include "lorentz/parallel.hpp"
#include "lorentz/stats.hpp"
#include "stats_internal.hpp"

namespace lorentz {

using detail::guarded_step;

double SpectrumEstimate::combined_stderr() const { return std::hypot(stderr_u, stderr_s); }

namespace {

constexpr std::size_t kAlignSteps = 50;

struct OrbitSeries {
    std::vector<double> log_u, log_s, log_jac;
    std::vector<SpectrumEstimate::Running> running;
    std::size_t refreshed = 0, skipped = 0;
};

// Gram-Schmidt QR of A = [a1 a2]: Q = [q1, q1⊥], R11 = |a1|, R22 = q1 × a2.
void qr_step(const Mat2& A, Mat2& Q, double& r11, double& r22) {
    const Vec2 a1{A[0][0], A[1][0]}, a2{A[0][1], A[1][1]};
    r11 = norm(a1);
    const Vec2 q1 = (1.0 / r11) * a1;
    r22 = cross(q1, a2);
    Q = {{{q1.x, -q1.y}, {q1.y, q1.x}}};
}

Mat2 mul(const Mat2& a, const Mat2& b) {
    Mat2 c{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return c;
}

OrbitSeries run_tangent_orbit(const CollisionMap& map, std::size_t n, const LyapunovOptions& opts,
                              std::size_t index) {
    OrbitSeries out;
    RngStream rng(opts.seed, index);
    PhasePoint x = sample_mu0(map.table(), rng);
    std::size_t nudges = 0;
    for (std::size_t i = 0; i < opts.burn_in; ++i) x = guarded_step(map, x, nudges).post;

    out.log_u.reserve(n);
    out.log_s.reserve(n);
    out.log_jac.reserve(n);
    Mat2 Q{{{1.0, 0.0}, {0.0, 1.0}}};
    double sum_u = 0.0, sum_s = 0.0;
    for (std::size_t i = 0; i < kAlignSteps + n; ++i) {
        const CollisionRecord rec = guarded_step(map, x, nudges);
        Mat2 M{};
        bool have = false;
        const double h0 = adapted_stencil_step(rec);
        for (double h : {h0, 0.1 * h0, 0.01 * h0}) {
            try {
                M = map.tangent_matrix(rec, h);
                have = true;
                break;
            } catch (const StencilSingularityError&) {
                if (i >= kAlignSteps) ++out.refreshed;
            }
        }
        double r11 = 1.0, r22 = 1.0;
        if (have) {
            qr_step(mul(M, Q), Q, r11, r22);
        } else if (i >= kAlignSteps) {
            ++out.skipped;
        }
        x = rec.post;
        if (i < kAlignSteps) continue;
        const double lu = std::log(r11), ls = std::log(std::abs(r22));
        out.log_u.push_back(lu);
        out.log_s.push_back(ls);
        out.log_jac.push_back(rec.log_jac_TP);
        sum_u += lu;
        sum_s += ls;
        const std::size_t k = out.log_u.size();
        if (opts.record_every > 0 && k % opts.record_every == 0) {
            out.running.push_back({k, sum_u / static_cast<double>(k), sum_s / static_cast<double>(k)});
        }
    }
    if (nudges > static_cast<std::size_t>(kGrazingBudget * static_cast<double>(n))) {
        throw AbortError("tangential collisions exceeded the budget in the tangent orbit");
    }
    return out;
}

}  // namespace

SpectrumEstimate lyapunov_spectrum(const CollisionMap& map, const LyapunovOptions& opts) {
    const std::size_t n_orbits = std::max<std::size_t>(1, opts.n_orbits);
    const std::size_t per_orbit = opts.n / n_orbits;
    if (per_orbit < 1) throw RangeError("Lyapunov run needs at least one collision per orbit");
    std::vector<OrbitSeries> parts(n_orbits);
    parallel_for(n_orbits, opts.threads,
                 [&](std::size_t o) { parts[o] = run_tangent_orbit(map, per_orbit, opts, o); });

    std::vector<double> lu, ls, sum, lj;
    for (const OrbitSeries& p : parts) {
        lu.insert(lu.end(), p.log_u.begin(), p.log_u.end());
        ls.insert(ls.end(), p.log_s.begin(), p.log_s.end());
        lj.insert(lj.end(), p.log_jac.begin(), p.log_jac.end());
    }
    sum.resize(lu.size());
    for (std::size_t i = 0; i < lu.size(); ++i) sum[i] = lu[i] + ls[i];

    SpectrumEstimate out;
    out.n = lu.size();
    const std::size_t B = batch_count(out.n);
    const BatchMeans bu = batch_means(lu, B), bs = batch_means(ls, B), bsum = batch_means(sum, B),
                     bj = batch_means(lj, B);
    out.lambda_u = bu.mean;
    out.lambda_s = bs.mean;
    out.stderr_u = bu.stderr_;
    out.stderr_s = bs.stderr_;
    out.stderr_sum = bsum.stderr_;
    out.xi = -(out.lambda_u + out.lambda_s);
    out.xi_jacobian = -bj.mean;
    out.xi_jacobian_stderr = bj.stderr_;
    out.h_pesin = out.lambda_u;
    out.hd = 1.0 - out.lambda_u / out.lambda_s;
    for (const OrbitSeries& p : parts) {
        out.refreshed_stencils += p.refreshed;
        out.skipped_stencils += p.skipped;
    }
    out.running = parts.front().running;
    return out;
}

SpectrumEstimate dimension(SpectrumEstimate spec, double h0, double sigma2_H, double epsilon) {
    if (!(spec.lambda_s < 0.0 && spec.lambda_u > 0.0)) {
        throw RangeError("dimension needs lambda_s < 0 < lambda_u");
    }
    spec.h_pesin = spec.lambda_u;
    spec.hd = spec.h_pesin * (1.0 / spec.lambda_u - 1.0 / spec.lambda_s);
    spec.h0 = h0;
    spec.sigma2_H = sigma2_H;
    spec.hd_predicted = 2.0 - epsilon * epsilon * sigma2_H / (2.0 * h0);
    return spec;
}

}  // namespace lorentz
