#include <algorithm>
#include <cmath>
#include <sstream>

#include "lorentz/errors.hpp"
#include "lorentz/parallel.hpp"
#include "lorentz/stats.hpp"
#include "stats_internal.hpp"

namespace lorentz {

namespace {

// C_ab(k) = (1/len) Σ_t (Δ_a(t+k) - m_a)(Δ_b(t) - m_b) over t in [begin, end - k).
Mat2 autocovariance(std::span<const Vec2> d, Vec2 mean, std::size_t begin, std::size_t end, std::size_t k) {
    double xx = 0, xy = 0, yx = 0, yy = 0;
    for (std::size_t t = begin; t + k < end; ++t) {
        const Vec2 a = d[t + k] - mean, b = d[t] - mean;
        xx += a.x * b.x;
        xy += a.x * b.y;
        yx += a.y * b.x;
        yy += a.y * b.y;
    }
    const double inv = 1.0 / static_cast<double>(end - begin);
    return {{{xx * inv, xy * inv}, {yx * inv, yy * inv}}};
}

Mat2 green_kubo_sum(std::span<const Vec2> d, Vec2 mean, std::size_t begin, std::size_t end, std::size_t W) {
    Mat2 D = autocovariance(d, mean, begin, end, 0);
    for (std::size_t k = 1; k <= W; ++k) {
        const Mat2 c = autocovariance(d, mean, begin, end, k);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) D[a][b] += c[a][b] + c[b][a];
    }
    const double off = 0.5 * (D[0][1] + D[1][0]);
    D[0][1] = D[1][0] = off;
    return D;
}

}  // namespace

DiffusionEstimate green_kubo_D(std::span<const Vec2> delta, const DiffusionOptions& opts) {
    const std::size_t n = delta.size();
    if (n < 300) throw InsufficientDataError("Green-Kubo estimate needs a longer series");
    Vec2 mean;
    for (const Vec2& v : delta) mean += v;
    mean = (1.0 / static_cast<double>(n)) * mean;

    DiffusionEstimate out;
    const std::size_t max_lag = std::min(opts.max_window + 2, n / 100);
    out.autocov.reserve(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) out.autocov.push_back(autocovariance(delta, mean, 0, n, k));

    const Mat2& c0 = out.autocov[0];
    const double sn = std::sqrt(static_cast<double>(n));
    auto quiet = [&](std::size_t k) {
        const Mat2& c = out.autocov[k];
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                if (std::abs(c[a][b]) >= 2.0 * std::sqrt(c0[a][a] * c0[b][b]) / sn) return false;
        return true;
    };
    std::size_t W = 0;
    for (std::size_t k = 1; k + 2 <= max_lag && k <= opts.max_window; ++k) {
        if (quiet(k) && quiet(k + 1) && quiet(k + 2)) {
            W = k;
            break;
        }
    }
    if (W == 0) {
        std::ostringstream os;
        os << "autocovariances do not decay within " << std::min(opts.max_window, max_lag)
           << " lags (series length " << n << ")";
        throw WindowError(os.str());
    }
    if (n < 100 * W) throw InsufficientDataError("Green-Kubo window needs a series of length >= 100*W");
    out.window = W;
    out.D = green_kubo_sum(delta, mean, 0, n, W);

    const std::size_t B = opts.n_batches ? opts.n_batches : batch_count(n);
    const std::size_t len = n / B;
    out.n_batches = B;
    detail::Moments m[2][2];
    for (std::size_t b = 0; b < B; ++b) {
        const Mat2 Db = green_kubo_sum(delta, mean, b * len, (b + 1) * len, W);
        for (int a = 0; a < 2; ++a)
            for (int c = 0; c < 2; ++c) m[a][c].add(Db[a][c]);
    }
    for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c) out.stderr_[a][c] = m[a][c].stderr_of_mean();
    return out;
}

CltResult clt_test(const CollisionMap& map, const CltOptions& opts) {
    if (opts.m < 2 || opts.n < 1) throw RangeError("CLT test needs m >= 2 orbits of n >= 1 collisions");
    CltResult out;
    out.normalized.resize(opts.m);
    const double sn = std::sqrt(static_cast<double>(opts.n));
    parallel_for(opts.m, opts.threads, [&](std::size_t i) {
        RngStream rng(opts.seed, i);
        OrbitOptions o;
        o.n = opts.n;
        o.burn_in = opts.burn_in;
        o.keep_series = false;
        o.keep_kernels = false;
        const OrbitSummary orbit = run_orbit(map, sample_mu0(map.table(), rng), o);
        const double nd = static_cast<double>(opts.n);
        out.normalized[i] = {(orbit.q_n.x - nd * opts.J_ref.x) / sn, (orbit.q_n.y - nd * opts.J_ref.y) / sn};
    });
    const double m = static_cast<double>(opts.m);
    Vec2 mean;
    for (const Vec2& v : out.normalized) mean += v;
    mean = (1.0 / m) * mean;
    double m2[2] = {0, 0}, m3[2] = {0, 0}, m4[2] = {0, 0}, cxy = 0;
    for (const Vec2& v : out.normalized) {
        const double d[2] = {v.x - mean.x, v.y - mean.y};
        for (int a = 0; a < 2; ++a) {
            m2[a] += d[a] * d[a];
            m3[a] += d[a] * d[a] * d[a];
            m4[a] += d[a] * d[a] * d[a] * d[a];
        }
        cxy += d[0] * d[1];
    }
    double skew[2], kurt[2];
    for (int a = 0; a < 2; ++a) {
        const double v = m2[a] / m;
        skew[a] = (m3[a] / m) / std::pow(v, 1.5);
        kurt[a] = (m4[a] / m) / (v * v) - 3.0;
    }
    out.skewness = {skew[0], skew[1]};
    out.excess_kurtosis = {kurt[0], kurt[1]};
    out.covariance = {{{m2[0] / (m - 1.0), cxy / (m - 1.0)}, {cxy / (m - 1.0), m2[1] / (m - 1.0)}}};
    return out;
}

double relative_max_deviation(const Mat2& a, const Mat2& reference) {
    double dev = 0.0, scale = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            dev = std::max(dev, std::abs(a[i][j] - reference[i][j]));
            scale = std::max(scale, std::abs(reference[i][j]));
        }
    return scale > 0.0 ? dev / scale : dev;
}

}  // namespace lorentz
