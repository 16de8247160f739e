#include <doctest.h>

#include <cmath>

#include "lorentz/errors.hpp"
#include "lorentz/stats.hpp"

using namespace lorentz;

namespace {

GeometryTable reference_table() { return GeometryTable::build({{{0.0, 0.0}, 0.4}, {{0.5, 0.5}, 0.25}}); }

CollisionMap unforced() { return CollisionMap(reference_table(), ForceModel::zero(), TwistModel::identity()); }

CollisionMap thermostatted(double eps) {
    return CollisionMap(reference_table(), ForceModel::constant_thermostatted(1.0, 0.0, eps), TwistModel::identity());
}

IsokineticField odd_field() {
    IsokineticField f;
    f.e1 = 1.0;
    f.e2 = 0.0;
    f.modulation = 0.3;
    return f;
}

OrbitSummary orbit(const CollisionMap& map, std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    OrbitOptions o;
    o.n = n;
    return run_orbit(map, sample_mu0(map.table(), rng), o);
}

// AR(1) pair with independent components x_t = a x_{t-1} + e_t.
std::vector<Vec2> ar1_series(std::size_t n, double a, std::uint64_t seed) {
    RngStream rng(seed);
    std::normal_distribution<double> g;
    std::vector<Vec2> out(n);
    Vec2 x;
    for (std::size_t t = 0; t < n; ++t) {
        x = {a * x.x + g(rng.engine()), a * x.y + g(rng.engine())};
        out[t] = x;
    }
    return out;
}

}  // namespace

TEST_SUITE("stats") {
    TEST_CASE("invariant-measure sampler") {
        const GeometryTable t = reference_table();
        RngStream a(11, 3), b(11, 3), c(11, 4);
        double sum = 0.0, sum2 = 0.0;
        const int n = 100000;
        bool same = true, differ = false;
        for (int i = 0; i < n; ++i) {
            const PhasePoint x = sample_mu0(t, a), y = sample_mu0(t, b), z = sample_mu0(t, c);
            same = same && x.r == y.r && x.s == y.s;
            differ = differ || x.r != z.r;
            CHECK(x.r >= 0.0);
            CHECK(x.r < t.length());
            sum += x.s;
            sum2 += x.s * x.s;
        }
        CHECK(same);
        CHECK(differ);
        const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
        CHECK(std::abs(mean) < 3.0 * se);
    }

    TEST_CASE("batch means") {
        CHECK_THROWS_AS(batch_count(29999), InsufficientDataError);
        CHECK(batch_count(30000) == 30);
        CHECK(batch_count(50000) == 50);
        CHECK(batch_count(5000000) == 100);

        RngStream rng(12);
        std::vector<double> x(100000);
        for (double& v : x) v = rng.uniform();
        const BatchMeans bm = batch_means(x, batch_count(x.size()));
        CHECK(bm.n_batches == 100);
        CHECK(bm.batch_len == 1000);
        const double expected = std::sqrt(1.0 / 12.0 / x.size());
        CHECK(bm.stderr_ > 0.6 * expected);
        CHECK(bm.stderr_ < 1.4 * expected);
        CHECK(std::abs(bm.mean - 0.5) < 4.0 * expected);
    }

    TEST_CASE("mean free time") {
        const GeometryTable t = reference_table();
        const double theory = kPi * (1.0 - kPi * (0.16 + 0.0625)) / t.length();
        CHECK(mean_free_time(t) == doctest::Approx(theory).epsilon(1e-14));
        const OrbitSummary o = orbit(unforced(), 200000, 1);
        const double tau = o.total_time / static_cast<double>(o.n);
        std::vector<double> taus(o.tau.begin(), o.tau.end());
        const BatchMeans bm = batch_means(taus, batch_count(taus.size()));
        CHECK(std::abs(tau - theory) < 4.0 * bm.stderr_);
    }

    TEST_CASE("unforced current vanishes and estimators are consistent") {
        const OrbitSummary o = orbit(unforced(), 200000, 2);
        const CurrentEstimate J = estimate_current_map(o);
        CHECK(std::abs(J.J.x) < 3.0 * J.stderr_.x);
        CHECK(std::abs(J.J.y) < 3.0 * J.stderr_.y);
        const CurrentEstimate Jf = estimate_current_flow(o);
        const double tau = o.total_time / static_cast<double>(o.n);
        CHECK(std::abs(Jf.J.x * tau - J.J.x) < 1e-12);
        CHECK(std::abs(Jf.J.y * tau - J.J.y) < 1e-12);
        const SlipCurrent slip = slip_corrected_flow_current(o, TwistModel::identity());
        CHECK(slip.slip_part.x == 0.0);
        CHECK(slip.slip_part.y == 0.0);
        CHECK(o.discarded_tangential <= 200);
    }

    TEST_CASE("zero-current oracles") {
        const GeometryTable t = reference_table();
        const CollisionMap cons(t, ForceModel::conservative({Potential::Shape::Cosine2d, 1.0}, 0.05),
                                TwistModel::identity());
        const CollisionMap slip(t, ForceModel::zero(), TwistModel::slip(0.05, TwistModel::Parity::Odd));
        for (const CollisionMap* m : {&cons, &slip}) {
            const CurrentEstimate J = estimate_current_map(orbit(*m, 100000, 3));
            CHECK(std::abs(J.J.x) < 3.0 * J.stderr_.x);
            CHECK(std::abs(J.J.y) < 3.0 * J.stderr_.y);
        }
        // The slip displacement is part of Δ_P and of the slip-corrected flow current.
        const OrbitSummary o = orbit(slip, 30000, 4);
        const SlipCurrent sc = slip_corrected_flow_current(o, slip.twist());
        CHECK(sc.max_mismatch < 1e-12);
    }

    TEST_CASE("thermostatted current follows the field") {
        const OrbitSummary o = orbit(thermostatted(0.08), 500000, 5);
        const CurrentEstimate J = estimate_current_map(o);
        CHECK(J.J.x > 3.0 * J.stderr_.x);
        CHECK(std::abs(J.J.y) < 3.0 * J.stderr_.y);
        CHECK(o.sum_log_jac < 0.0);
    }

    TEST_CASE("response series vanish without forcing") {
        ChainOptions co;
        co.n_mc = 3000;
        co.chain_length = 100;
        co.max_lag = 10;
        const ResponseEstimate r = kawasaki_sigma(unforced(), co);
        CHECK(r.sigma.x == 0.0);
        CHECK(r.sigma.y == 0.0);
        const VarianceSum v = sigma2_H(unforced(), co);
        CHECK(v.value == 0.0);
    }

    TEST_CASE("response estimators: linearized kernel and thread independence") {
        const CollisionMap map(reference_table(), ForceModel::isokinetic(odd_field(), 0.05), TwistModel::identity());
        ChainOptions co;
        co.n_mc = 60000;
        co.chain_length = 2000;
        co.max_lag = 60;
        co.threads = 1;
        const ResponseEstimate exact = kawasaki_sigma(map, co, HKernel::Exact);
        const ResponseEstimate lin = kawasaki_sigma(map, co, HKernel::Linearized);
        const double comb = std::hypot(exact.stderr_.x, lin.stderr_.x);
        CHECK(std::abs(exact.sigma.x - lin.sigma.x) < comb);
        CHECK(exact.sigma.x > 0.0);
        co.threads = 3;
        const ResponseEstimate again = kawasaki_sigma(map, co, HKernel::Exact);
        CHECK(again.sigma.x == exact.sigma.x);
        CHECK(again.K == exact.K);
    }

    TEST_CASE("variance of H: lag-zero dominance and stability") {
        ChainOptions co;
        co.n_mc = 100000;
        co.chain_length = 2000;
        co.max_lag = 60;
        const VarianceSum v = sigma2_H(thermostatted(0.05), co);
        CHECK(v.lag0 > 0.0);
        CHECK(v.value > 0.5 * v.lag0);
        CHECK(std::abs(v.terms[1]) < v.lag0);
        CHECK(std::abs(v.value_2K - v.value) < 0.02 * v.value + 2.0 * v.stderr_);
    }

    TEST_CASE("fit through the origin") {
        SweepResult s;
        for (double e : {0.02, 0.04, 0.06, 0.08}) {
            SweepPoint p;
            p.epsilon = e;
            p.map_current.J = {0.5 * e, -0.1 * e};
            p.map_current.stderr_ = {1e-3, 1e-3};
            s.points.push_back(p);
        }
        fit_through_origin(s);
        CHECK(s.slope.x == doctest::Approx(0.5));
        CHECK(s.slope.y == doctest::Approx(-0.1));
        CHECK(s.fit_r2 == doctest::Approx(1.0));

        const std::vector<double> few{0.02, 0.04, 0.06};
        const std::vector<double> wide{0.02, 0.04, 0.06, 0.2};
        auto maker = [](double e) { return thermostatted(e); };
        CHECK_THROWS_AS(linear_response_sweep(maker, few, 1000, 1, 1), ValidationError);
        CHECK_THROWS_AS(linear_response_sweep(maker, wide, 1000, 1, 1), RangeError);
    }

    TEST_CASE("Green-Kubo sum of an AR(1) process") {
        const double a = 0.5;
        const auto d = ar1_series(400000, a, 13);
        const DiffusionEstimate est = green_kubo_D(d);
        // Σ_k C(k) over Z for AR(1) with unit innovations: 1/(1-a)².
        const double exact = 1.0 / ((1 - a) * (1 - a));
        CHECK(std::abs(est.D[0][0] - exact) < 4.0 * est.stderr_[0][0] + 0.02 * exact);
        CHECK(std::abs(est.D[1][1] - exact) < 4.0 * est.stderr_[1][1] + 0.02 * exact);
        CHECK(std::abs(est.D[0][1]) < 4.0 * est.stderr_[0][1]);
        CHECK(est.window >= 5);

        DiffusionOptions tight;
        tight.max_window = 10;
        CHECK_THROWS_AS(green_kubo_D(ar1_series(100000, 0.995, 14), tight), WindowError);
        CHECK_THROWS_AS(green_kubo_D(ar1_series(200, 0.1, 15)), InsufficientDataError);
    }

    TEST_CASE("unforced diffusion is isotropic") {
        const OrbitSummary o = orbit(unforced(), 300000, 6);
        const DiffusionEstimate d = green_kubo_D(o.delta);
        const double comb = std::hypot(d.stderr_[0][0], d.stderr_[1][1]);
        CHECK(std::abs(d.D[0][0] - d.D[1][1]) < 3.0 * comb);
        CHECK(std::abs(d.D[0][1]) < 3.0 * d.stderr_[0][1]);
        CHECK(d.D[0][0] > 0.0);
    }

    TEST_CASE("CLT ensemble") {
        CltOptions co;
        co.m = 2000;
        co.n = 200;
        co.threads = 2;
        const CltResult c = clt_test(unforced(), co);
        CHECK(c.normalized.size() == 2000);
        CHECK(std::abs(c.skewness.x) < 0.25);
        CHECK(std::abs(c.excess_kurtosis.x) < 0.5);
        CHECK(c.covariance[0][0] > 0.0);
        CHECK(c.covariance[0][1] == c.covariance[1][0]);

        const Mat2 ref{{{1.0, 0.0}, {0.0, 2.0}}};
        const Mat2 other{{{1.1, 0.1}, {0.1, 2.0}}};
        CHECK(relative_max_deviation(other, ref) == doctest::Approx(0.05));
    }

    TEST_CASE("unforced Lyapunov spectrum is symmetric") {
        LyapunovOptions lo;
        lo.n = 60000;
        lo.n_orbits = 2;
        lo.threads = 2;
        const SpectrumEstimate s = lyapunov_spectrum(unforced(), lo);
        CHECK(s.lambda_u > 0.5);
        CHECK(s.lambda_s < -0.5);
        CHECK(std::abs(s.lambda_u + s.lambda_s) < s.combined_stderr());
        CHECK(std::abs(s.xi_jacobian) == 0.0);
        CHECK(s.running.size() == 30);
        CHECK(s.skipped_stencils < 10);
    }

    TEST_CASE("dimension formula") {
        SpectrumEstimate s;
        s.lambda_u = 1.2;
        s.lambda_s = -1.2;
        const SpectrumEstimate d = dimension(s, 1.2, 0.0, 0.0);
        CHECK(d.hd == 2.0);
        CHECK(d.hd_predicted == 2.0);
        s.lambda_s = -1.1;
        const SpectrumEstimate e = dimension(s, 1.2, 0.03, 0.05);
        CHECK(e.hd == doctest::Approx(1.0 + 1.2 / 1.1));
        CHECK(e.hd_predicted == doctest::Approx(2.0 - 0.0025 * 0.03 / 2.4));
        s.lambda_s = 0.1;
        CHECK_THROWS_AS(dimension(s, 1.2, 0.03, 0.05), RangeError);
    }

    TEST_CASE("invariant-measure averages and equidistribution") {
        const Mu0Average s = mu0_average(unforced(), Observable::S, 50000, 3, 2);
        CHECK(std::abs(s.mean) < 3.0 * s.stderr_);
        CHECK(s.n == 50000);

        const EquidistributionCurve c = equidistribution_test(unforced(), Observable::S, 10, 20000, 0.0, 4, 2);
        for (std::size_t k = 0; k < c.mean.size(); ++k) CHECK(std::abs(c.mean[k]) < 4.0 * c.stderr_[k]);

        // Forced τ relaxes toward its orbit average.
        const CollisionMap map = thermostatted(0.08);
        const OrbitSummary o = orbit(map, 100000, 7);
        const double tau_bar = o.total_time / static_cast<double>(o.n);
        const EquidistributionCurve f = equidistribution_test(map, Observable::Tau, 30, 20000, tau_bar, 5, 2);
        for (std::size_t k = 20; k < f.mean.size(); ++k) CHECK(std::abs(f.mean[k] - tau_bar) < 4.0 * f.stderr_[k]);
    }
}
