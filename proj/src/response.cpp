#include <algorithm>
#include <cmath>
#include <sstream>

#include "lorentz/errors.hpp"
#include "lorentz/parallel.hpp"
#include "lorentz/stats.hpp"
#include "stats_internal.hpp"

namespace lorentz {

using detail::guarded_step;
using detail::Moments;

namespace {

// Lag products accumulated along unforced chains started at μ₀ samples. For
// chain c and lag k: dh[c][k] = mean_j Δ_P(y_{j+k})·H(y_j) and
// hh[c][k] = mean_j H(y_{j+k})·H(y_j), with y_{j+1} = T₀ y_j and Δ_P, H from
// one forced step at y_j.
struct ChainProducts {
    std::size_t n_chains = 0;
    std::size_t chain_length = 0;
    std::size_t max_lag = 0;
    std::vector<std::vector<Vec2>> dh;
    std::vector<std::vector<double>> hh;
};

ChainProducts chain_products(const CollisionMap& map, const ChainOptions& opts, HKernel kernel) {
    if (opts.n_mc < 60) throw InsufficientDataError("chain estimators need at least 60 samples");
    ChainProducts out;
    out.n_chains = std::max<std::size_t>(30, opts.n_mc / std::max<std::size_t>(1, opts.chain_length));
    out.chain_length = opts.n_mc / out.n_chains;
    out.max_lag = std::min(opts.max_lag, out.chain_length - 1);
    out.dh.assign(out.n_chains, std::vector<Vec2>(out.max_lag + 1));
    out.hh.assign(out.n_chains, std::vector<double>(out.max_lag + 1, 0.0));
    if (map.epsilon() == 0.0) return out;

    const CollisionMap unforced = map.unforced();
    const std::size_t N = out.chain_length, total = N + out.max_lag;
    parallel_for(out.n_chains, opts.threads, [&](std::size_t c) {
        RngStream rng(opts.seed, c);
        PhasePoint y = sample_mu0(map.table(), rng);
        std::vector<Vec2> delta(total);
        std::vector<double> H(total);
        std::size_t nudges = 0;
        for (std::size_t j = 0; j < total; ++j) {
            PhasePoint yf = y;
            const CollisionRecord forced = guarded_step(map, yf, nudges);
            delta[j] = forced.delta;
            H[j] = map.kernel_from(forced, kernel);
            y = guarded_step(unforced, y, nudges).post;
        }
        const double inv = 1.0 / static_cast<double>(N);
        for (std::size_t k = 0; k <= out.max_lag; ++k) {
            Vec2 a;
            double b = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                a += H[j] * delta[j + k];
                b += H[j] * H[j + k];
            }
            out.dh[c][k] = inv * a;
            out.hh[c][k] = inv * b;
        }
    });
    return out;
}

// First lag k >= 1 such that lags k, k+1, k+2 are all insignificant.
template <class Significant>
std::size_t decay_cutoff(std::size_t max_lag, Significant&& significant, bool& capped) {
    for (std::size_t k = 1; k <= max_lag; ++k) {
        bool quiet = true;
        for (std::size_t j = k; j <= std::min(max_lag, k + 2); ++j) quiet = quiet && !significant(j);
        if (quiet) {
            capped = false;
            return k;
        }
    }
    capped = true;
    return max_lag;
}

}  // namespace

ResponseEstimate kawasaki_sigma(const CollisionMap& map, const ChainOptions& opts, HKernel kernel) {
    const ChainProducts cp = chain_products(map, opts, kernel);
    ResponseEstimate out;
    out.n_chains = cp.n_chains;
    out.n_mc = cp.n_chains * cp.chain_length;
    out.terms.resize(cp.max_lag + 1);
    out.term_stderr.resize(cp.max_lag + 1);
    for (std::size_t k = 0; k <= cp.max_lag; ++k) {
        Moments mx, my;
        for (std::size_t c = 0; c < cp.n_chains; ++c) {
            mx.add(cp.dh[c][k].x);
            my.add(cp.dh[c][k].y);
        }
        out.terms[k] = {mx.mean(), my.mean()};
        out.term_stderr[k] = {mx.stderr_of_mean(), my.stderr_of_mean()};
    }
    if (map.epsilon() == 0.0) return out;

    bool capped = false;
    std::size_t K = decay_cutoff(
        cp.max_lag,
        [&](std::size_t k) {
            return std::abs(out.terms[k].x) >= 2.0 * out.term_stderr[k].x ||
                   std::abs(out.terms[k].y) >= 2.0 * out.term_stderr[k].y;
        },
        capped);
    auto sum_to = [&](std::size_t K_) {
        Vec2 s = 0.5 * out.terms[0];
        for (std::size_t k = 1; k <= K_; ++k) s += out.terms[k];
        return s;
    };
    auto tail = [&](std::size_t K_) { return std::max(std::abs(out.terms[K_].x), std::abs(out.terms[K_].y)); };
    // Extend K while the last retained term is not small against |σ|.
    while (K < cp.max_lag && tail(K) >= 0.05 * norm(sum_to(K))) ++K;
    out.K = K;
    out.sigma = sum_to(K);
    out.tail_bound = tail(K);
    out.truncation_warning = capped || out.tail_bound > 0.05 * norm(out.sigma);

    Moments sx, sy;
    for (std::size_t c = 0; c < cp.n_chains; ++c) {
        Vec2 s = 0.5 * cp.dh[c][0];
        for (std::size_t k = 1; k <= K; ++k) s += cp.dh[c][k];
        sx.add(s.x);
        sy.add(s.y);
    }
    out.stderr_ = {sx.stderr_of_mean(), sy.stderr_of_mean()};
    return out;
}

VarianceSum sigma2_H(const CollisionMap& map, const ChainOptions& opts, HKernel kernel) {
    const ChainProducts cp = chain_products(map, opts, kernel);
    VarianceSum out;
    out.terms.resize(cp.max_lag + 1);
    std::vector<double> se(cp.max_lag + 1);
    for (std::size_t k = 0; k <= cp.max_lag; ++k) {
        Moments m;
        for (std::size_t c = 0; c < cp.n_chains; ++c) m.add(cp.hh[c][k]);
        out.terms[k] = m.mean();
        se[k] = m.stderr_of_mean();
    }
    out.lag0 = out.terms[0];
    if (map.epsilon() == 0.0) return out;

    bool capped = false;
    const std::size_t K = decay_cutoff(
        cp.max_lag, [&](std::size_t k) { return std::abs(out.terms[k]) >= 2.0 * se[k]; }, capped);
    auto sum_to = [&](std::size_t K_) {
        double s = out.terms[0];
        for (std::size_t k = 1; k <= std::min(K_, cp.max_lag); ++k) s += 2.0 * out.terms[k];
        return s;
    };
    out.K = K;
    out.value = sum_to(K);
    out.value_2K = sum_to(2 * K);
    out.truncation_warning = capped;
    Moments m;
    for (std::size_t c = 0; c < cp.n_chains; ++c) {
        double s = cp.hh[c][0];
        for (std::size_t k = 1; k <= K; ++k) s += 2.0 * cp.hh[c][k];
        m.add(s);
    }
    out.stderr_ = m.stderr_of_mean();
    return out;
}

void fit_through_origin(SweepResult& sweep) {
    double wxx = 0, wxj = 0, wyy = 0, wyj = 0;
    for (const SweepPoint& p : sweep.points) {
        const double e = p.epsilon;
        const double wx = 1.0 / (p.map_current.stderr_.x * p.map_current.stderr_.x);
        const double wy = 1.0 / (p.map_current.stderr_.y * p.map_current.stderr_.y);
        wxx += wx * e * e;
        wxj += wx * e * p.map_current.J.x;
        wyy += wy * e * e;
        wyj += wy * e * p.map_current.J.y;
    }
    sweep.slope = {wxj / wxx, wyj / wyy};
    sweep.slope_stderr = {1.0 / std::sqrt(wxx), 1.0 / std::sqrt(wyy)};
    double res = 0.0, tot = 0.0;
    for (const SweepPoint& p : sweep.points) {
        const double wx = 1.0 / (p.map_current.stderr_.x * p.map_current.stderr_.x);
        const double r = p.map_current.J.x - sweep.slope.x * p.epsilon;
        res += wx * r * r;
        tot += wx * p.map_current.J.x * p.map_current.J.x;
    }
    sweep.fit_r2 = tot > 0.0 ? 1.0 - res / tot : 0.0;
}

SweepResult linear_response_sweep(const std::function<CollisionMap(double)>& map_at,
                                  std::span<const double> eps_list, std::size_t n, std::uint64_t seed,
                                  unsigned threads) {
    if (eps_list.size() < 4) throw ValidationError("a response sweep needs at least 4 values of epsilon");
    for (double e : eps_list) {
        if (!(e > 0.0 && e <= 0.1)) {
            std::ostringstream os;
            os << "sweep epsilon " << e << " outside (0, 0.1]";
            throw RangeError(os.str());
        }
    }
    SweepResult out;
    out.points.resize(eps_list.size());
    parallel_for(eps_list.size(), threads, [&](std::size_t i) {
        const CollisionMap map = map_at(eps_list[i]);
        RngStream rng(seed, i);
        OrbitOptions o;
        o.n = n;
        o.keep_kernels = false;
        const OrbitSummary orbit = run_orbit(map, sample_mu0(map.table(), rng), o);
        SweepPoint& p = out.points[i];
        p.epsilon = eps_list[i];
        p.map_current = estimate_current_map(orbit);
        p.flow_current = estimate_current_flow(orbit);
        p.mean_tau = orbit.total_time / static_cast<double>(orbit.n);
    });
    fit_through_origin(out);
    return out;
}

}  // namespace lorentz
