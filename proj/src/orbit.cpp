#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>

#include "lorentz/errors.hpp"
#include "lorentz/parallel.hpp"
#include "lorentz/stats.hpp"
#include "stats_internal.hpp"

namespace lorentz {

using detail::guarded_step;
using detail::Moments;

unsigned resolve_threads(unsigned requested) {
    if (const char* env = std::getenv("LORENTZ_LAB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

PhasePoint sample_mu0(const GeometryTable& table, RngStream& rng) {
    const double r = rng.uniform() * table.length();
    const double s = rng.uniform(-1.0, 1.0);
    return {std::min(r, std::nextafter(table.length(), 0.0)), s};
}

double mean_free_time(const GeometryTable& table) {
    double area = 1.0;
    for (const Scatterer& sc : table.scatterers()) area -= kPi * sc.radius * sc.radius;
    return kPi * area / table.length();
}

std::size_t batch_count(std::size_t n) {
    if (n < 30000) {
        throw InsufficientDataError("batch means need at least 3e4 samples, got " + std::to_string(n));
    }
    return std::clamp<std::size_t>(n / 1000, 30, 100);
}

BatchMeans batch_means(std::span<const double> x, std::size_t n_batches) {
    BatchMeans out;
    const std::size_t n = x.size();
    if (n_batches < 2 || n < n_batches) throw InsufficientDataError("too few samples for batch means");
    out.n_batches = n_batches;
    out.batch_len = n / n_batches;
    double total = 0.0;
    for (double v : x) total += v;
    out.mean = total / static_cast<double>(n);
    Moments m;
    for (std::size_t b = 0; b < n_batches; ++b) {
        double acc = 0.0;
        for (std::size_t i = b * out.batch_len; i < (b + 1) * out.batch_len; ++i) acc += x[i];
        m.add(acc / static_cast<double>(out.batch_len));
    }
    out.stderr_ = m.stderr_of_mean();
    return out;
}

OrbitSummary run_orbit(const CollisionMap& map, PhasePoint x0, const OrbitOptions& opts) {
    if (opts.n < 1) throw RangeError("orbit length must be at least 1");
    OrbitSummary out;
    PhasePoint x = x0;
    std::size_t nudges = 0;
    const auto budget = static_cast<std::size_t>(kGrazingBudget * static_cast<double>(opts.n));
    auto check_budget = [&] {
        if (nudges > budget) {
            std::ostringstream os;
            os << "tangential collisions exceeded the budget: " << nudges << " nudges for n = " << opts.n;
            throw AbortError(os.str());
        }
    };
    for (std::size_t i = 0; i < opts.burn_in; ++i) {
        x = guarded_step(map, x, nudges).post;
        check_budget();
    }
    if (opts.keep_series) {
        out.delta.reserve(opts.n);
        out.tau.reserve(opts.n);
    }
    if (opts.keep_kernels) {
        out.H.reserve(opts.n);
        out.log_jac.reserve(opts.n);
    }
    if (opts.keep_points) out.points.reserve(opts.n);
    for (std::size_t i = 0; i < opts.n; ++i) {
        const CollisionRecord rec = guarded_step(map, x, nudges);
        check_budget();
        out.q_n += rec.delta;
        out.total_time += rec.tau;
        out.sum_delta_F += rec.delta_F;
        out.sum_slip += rec.slip;
        out.sum_log_jac += rec.log_jac_TP;
        out.sum_H += rec.H;
        if (rec.tangential) ++out.tangential_hits;
        if (opts.keep_series) {
            out.delta.push_back(rec.delta);
            out.tau.push_back(rec.tau);
        }
        if (opts.keep_kernels) {
            out.H.push_back(rec.H);
            out.log_jac.push_back(rec.log_jac_TP);
        }
        if (opts.keep_points) out.points.push_back(rec.pre);
        x = rec.post;
    }
    out.n = opts.n;
    out.discarded_tangential = nudges;
    out.final_point = x;
    return out;
}

namespace {

void require_series(const OrbitSummary& orbit) {
    if (orbit.delta.size() != orbit.n || orbit.tau.size() != orbit.n) {
        throw ValidationError("current estimates need the stored displacement series");
    }
}

}  // namespace

CurrentEstimate estimate_current_map(const OrbitSummary& orbit) {
    require_series(orbit);
    const std::size_t B = batch_count(orbit.n);
    CurrentEstimate out;
    out.n_batches = B;
    out.batch_len = orbit.n / B;
    const double n = static_cast<double>(orbit.n);
    out.J = {orbit.q_n.x / n, orbit.q_n.y / n};
    Moments mx, my;
    for (std::size_t b = 0; b < B; ++b) {
        Vec2 acc;
        for (std::size_t i = b * out.batch_len; i < (b + 1) * out.batch_len; ++i) acc += orbit.delta[i];
        mx.add(acc.x / static_cast<double>(out.batch_len));
        my.add(acc.y / static_cast<double>(out.batch_len));
    }
    out.stderr_ = {mx.stderr_of_mean(), my.stderr_of_mean()};
    return out;
}

CurrentEstimate estimate_current_flow(const OrbitSummary& orbit) {
    require_series(orbit);
    const std::size_t B = batch_count(orbit.n);
    CurrentEstimate out;
    out.n_batches = B;
    out.batch_len = orbit.n / B;
    out.J = {orbit.q_n.x / orbit.total_time, orbit.q_n.y / orbit.total_time};
    Moments mx, my;
    for (std::size_t b = 0; b < B; ++b) {
        Vec2 acc;
        double t = 0.0;
        for (std::size_t i = b * out.batch_len; i < (b + 1) * out.batch_len; ++i) {
            acc += orbit.delta[i];
            t += orbit.tau[i];
        }
        mx.add(acc.x / t);
        my.add(acc.y / t);
    }
    out.stderr_ = {mx.stderr_of_mean(), my.stderr_of_mean()};
    return out;
}

SlipCurrent slip_corrected_flow_current(const OrbitSummary& orbit, const TwistModel& twist) {
    SlipCurrent out;
    const CurrentEstimate flow = estimate_current_flow(orbit);
    const double T = orbit.total_time;
    out.flight_part = {orbit.sum_delta_F.x / T, orbit.sum_delta_F.y / T};
    out.slip_part = twist.is_identity() ? Vec2{} : Vec2{orbit.sum_slip.x / T, orbit.sum_slip.y / T};
    out.current = flow;
    out.current.J = out.flight_part + out.slip_part;
    out.max_mismatch = std::max(std::abs(out.current.J.x - flow.J.x), std::abs(out.current.J.y - flow.J.y));
    return out;
}

double observe(const CollisionRecord& rec, Observable f) {
    switch (f) {
        case Observable::DeltaX: return rec.delta.x;
        case Observable::DeltaY: return rec.delta.y;
        case Observable::Tau: return rec.tau;
        case Observable::H: return rec.H;
        case Observable::S: return rec.pre.s;
        case Observable::LogJac: return rec.log_jac_TP;
    }
    return 0.0;
}

Mu0Average mu0_average(const CollisionMap& map, Observable f, std::size_t n, std::uint64_t seed,
                       unsigned threads) {
    constexpr std::size_t kBlock = 10000;
    const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
    std::vector<Moments> parts(n_blocks);
    std::vector<std::size_t> redraws(n_blocks, 0);
    parallel_for(n_blocks, threads, [&](std::size_t b) {
        RngStream rng(seed, b);
        const std::size_t count = std::min(kBlock, n - b * kBlock);
        for (std::size_t i = 0; i < count; ++i) {
            for (int attempt = 0;; ++attempt) {
                const PhasePoint x = sample_mu0(map.table(), rng);
                try {
                    parts[b].add(observe(map.step(x), f));
                    break;
                } catch (const GrazingError&) {
                    if (attempt >= detail::kMaxNudges) throw;
                    ++redraws[b];
                }
            }
        }
    });
    Moments all;
    Mu0Average out;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        all.merge(parts[b]);
        out.resampled += redraws[b];
    }
    out.mean = all.mean();
    out.stderr_ = all.stderr_of_mean();
    out.n = all.n;
    return out;
}

EquidistributionCurve equidistribution_test(const CollisionMap& map, Observable f, std::size_t n_push,
                                            std::size_t n_samples, double target, std::uint64_t seed,
                                            unsigned threads) {
    constexpr std::size_t kBlock = 1000;
    const std::size_t n_blocks = (n_samples + kBlock - 1) / kBlock;
    std::vector<std::vector<Moments>> parts(n_blocks, std::vector<Moments>(n_push + 1));
    parallel_for(n_blocks, threads, [&](std::size_t b) {
        RngStream rng(seed, b);
        const std::size_t count = std::min(kBlock, n_samples - b * kBlock);
        std::size_t nudges = 0;
        for (std::size_t i = 0; i < count; ++i) {
            PhasePoint x = sample_mu0(map.table(), rng);
            for (std::size_t k = 0; k <= n_push; ++k) {
                const CollisionRecord rec = guarded_step(map, x, nudges);
                parts[b][k].add(observe(rec, f));
                x = rec.post;
            }
        }
    });
    EquidistributionCurve out;
    out.target = target;
    out.mean.resize(n_push + 1);
    out.stderr_.resize(n_push + 1);
    for (std::size_t k = 0; k <= n_push; ++k) {
        Moments m;
        for (std::size_t b = 0; b < n_blocks; ++b) m.merge(parts[b][k]);
        out.mean[k] = m.mean();
        out.stderr_[k] = m.stderr_of_mean();
    }
    // Log-linear fit of |mean - target| over the resolved part of the curve.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (std::size_t k = 0; k <= n_push; ++k) {
        const double gap = std::abs(out.mean[k] - target);
        if (gap <= 2.0 * out.stderr_[k] || gap == 0.0) break;
        const double xk = static_cast<double>(k), yk = std::log(gap);
        sx += xk;
        sy += yk;
        sxx += xk * xk;
        sxy += xk * yk;
        ++used;
    }
    if (used >= 2) {
        const double slope = (used * sxy - sx * sy) / (used * sxx - sx * sx);
        out.rate = -slope;
        out.amplitude = std::exp((sy - slope * sx) / used);
    } else {
        out.rate = std::numeric_limits<double>::quiet_NaN();
        out.amplitude = used == 1 ? std::abs(out.mean[0] - target) : 0.0;
    }
    return out;
}

}  // namespace lorentz
