#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lorentz/pmap.hpp"
#include "lorentz/rng.hpp"

namespace lorentz {

/// Uniform sample of dμ₀ = Cst·dr·ds on [0, L) x [-1, 1].
PhasePoint sample_mu0(const GeometryTable& table, RngStream& rng);

// ---------------------------------------------------------------------------
// Batch means

struct BatchMeans {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n_batches = 0;
    std::size_t batch_len = 0;
};

/// Number of batches used for a series of length n: n/1000 clamped to
/// [30, 100]. Throws InsufficientDataError when n < 3·10⁴.
std::size_t batch_count(std::size_t n);

/// Non-overlapping batch means of x with the given number of batches; the
/// reported mean is the plain mean of all n values.
BatchMeans batch_means(std::span<const double> x, std::size_t n_batches);

// ---------------------------------------------------------------------------
// Orbits

struct OrbitOptions {
    std::size_t n = 0;
    std::size_t burn_in = 1000;
    bool keep_series = true;   ///< store Δ_P and τ per collision
    bool keep_kernels = true;  ///< store H and log 𝒥_P per collision
    bool keep_points = false;  ///< store the pre-collision (r, s)
};

struct OrbitSummary {
    std::size_t n = 0;
    Vec2 q_n;  ///< Σ Δ_P
    double total_time = 0.0;
    Vec2 sum_delta_F;
    Vec2 sum_slip;
    double sum_log_jac = 0.0;
    double sum_H = 0.0;
    std::vector<Vec2> delta;
    std::vector<double> tau;
    std::vector<double> H;
    std::vector<double> log_jac;
    std::vector<PhasePoint> points;
    std::size_t discarded_tangential = 0;
    std::size_t tangential_hits = 0;
    PhasePoint final_point;
};

inline constexpr double kGrazingNudge = 1e-7;
inline constexpr double kGrazingBudget = 1e-3;

/// Iterates T_P n times after burn_in collisions. A grazing collision nudges s
/// by 1e-7 toward 0 and retries; AbortError when the nudges exceed 0.1% of n.
OrbitSummary run_orbit(const CollisionMap& map, PhasePoint x0, const OrbitOptions& opts);

// ---------------------------------------------------------------------------
// Currents

struct CurrentEstimate {
    Vec2 J;
    Vec2 stderr_;
    std::size_t n_batches = 0;
    std::size_t batch_len = 0;
};

/// J = q_n/n per collision, batch-means standard errors.
CurrentEstimate estimate_current_map(const OrbitSummary& orbit);
/// Ĵ = q_n/total_time per unit time; standard errors from batch ratios.
CurrentEstimate estimate_current_flow(const OrbitSummary& orbit);

struct SlipCurrent {
    CurrentEstimate current;  ///< (ΣΔ_F + Σslip)/total_time
    Vec2 flight_part;         ///< ΣΔ_F / total_time
    Vec2 slip_part;           ///< Σslip / total_time
    double max_mismatch = 0.0;  ///< against estimate_current_flow
};

SlipCurrent slip_corrected_flow_current(const OrbitSummary& orbit, const TwistModel& twist);

// ---------------------------------------------------------------------------
// Linear response

struct ChainOptions {
    std::size_t n_mc = 200000;        ///< total chain points
    std::size_t chain_length = 5000;  ///< points per chain
    std::size_t max_lag = 200;
    std::uint64_t seed = 42;
    unsigned threads = 1;
};

struct ResponseEstimate {
    Vec2 sigma;
    Vec2 stderr_;
    std::size_t K = 0;
    std::size_t n_mc = 0;
    std::size_t n_chains = 0;
    std::vector<Vec2> terms;  ///< μ₀[(Δ_P ∘ T₀^k)·H], k = 0..max_lag
    std::vector<Vec2> term_stderr;
    double tail_bound = 0.0;
    bool truncation_warning = false;
};

/// σ = ½μ₀(Δ_P·H) + Σ_{k≥1} μ₀[(Δ_P ∘ T₀^k)·H] from unforced chains started
/// at μ₀ samples; K is the first lag whose terms and the next two are all
/// within 2 standard errors of zero (cap max_lag).
ResponseEstimate kawasaki_sigma(const CollisionMap& map, const ChainOptions& opts,
                                HKernel kernel = HKernel::Exact);

struct VarianceSum {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t K = 0;
    double value_2K = 0.0;  ///< the same sum truncated at 2K (convergence check)
    double lag0 = 0.0;      ///< μ₀(H²)
    std::vector<double> terms;
    bool truncation_warning = false;
};

/// σ²_H = Σ_{k∈Z} μ₀[H ∘ T₀^k · H], symmetric summation.
VarianceSum sigma2_H(const CollisionMap& map, const ChainOptions& opts, HKernel kernel = HKernel::Exact);

struct SweepPoint {
    double epsilon = 0.0;
    CurrentEstimate map_current;
    CurrentEstimate flow_current;
    double mean_tau = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    Vec2 slope;
    Vec2 slope_stderr;
    double fit_r2 = 0.0;  ///< weighted, uncentered, x component
};

/// Weighted least squares through the origin of J(ε) with weights 1/stderr².
void fit_through_origin(SweepResult& sweep);

/// Runs one orbit of n collisions per ε on map_at(ε) and fits J(ε) through
/// the origin. Needs at least 4 values in (0, 0.1].
SweepResult linear_response_sweep(const std::function<CollisionMap(double)>& map_at,
                                  std::span<const double> eps_list, std::size_t n, std::uint64_t seed,
                                  unsigned threads);

// ---------------------------------------------------------------------------
// Diffusion and CLT

struct DiffusionOptions {
    std::size_t max_window = 200;
    std::size_t n_batches = 0;  ///< 0 selects batch_count(n)
};

struct DiffusionEstimate {
    Mat2 D{};
    Mat2 stderr_{};
    std::size_t window = 0;
    std::vector<Mat2> autocov;  ///< C(k), k = 0..max lag examined
    std::size_t n_batches = 0;
};

/// D = C(0) + Σ_{k=1}^W (C(k) + C(k)ᵀ), symmetrized; W is the first lag at which
/// this and the next two autocovariances are within 2·stderr of zero, with the
/// lag-k stderr taken as sqrt(C_aa(0)C_bb(0)/n). Throws WindowError when no
/// such W ≤ max_window exists, InsufficientDataError when n < 100·W.
DiffusionEstimate green_kubo_D(std::span<const Vec2> delta, const DiffusionOptions& opts = {});

struct CltOptions {
    std::size_t m = 10000;
    std::size_t n = 1000;
    std::size_t burn_in = 0;
    Vec2 J_ref;
    std::uint64_t seed = 42;
    unsigned threads = 1;
};

struct CltResult {
    Vec2 skewness;
    Vec2 excess_kurtosis;
    Mat2 covariance{};
    std::vector<Vec2> normalized;  ///< (q_n - nJ)/√n per orbit
};

CltResult clt_test(const CollisionMap& map, const CltOptions& opts);

/// max_ab |cov_ab - D_ab| / max_ab |D_ab|.
double relative_max_deviation(const Mat2& a, const Mat2& reference);

// ---------------------------------------------------------------------------
// Lyapunov spectrum and dimension

struct LyapunovOptions {
    std::size_t n = 100000;  ///< total collisions over all orbits
    std::size_t n_orbits = 1;
    std::size_t burn_in = 1000;
    std::size_t record_every = 1000;  ///< running-average samples for spectrum.csv
    std::uint64_t seed = 42;
    unsigned threads = 1;
};

struct SpectrumEstimate {
    double lambda_u = 0.0;
    double lambda_s = 0.0;
    double stderr_u = 0.0;
    double stderr_s = 0.0;
    double stderr_sum = 0.0;   ///< batch-means stderr of λᵘ + λˢ
    double xi = 0.0;           ///< -(λᵘ + λˢ)
    double xi_jacobian = 0.0;  ///< -mean(log 𝒥_P)
    double xi_jacobian_stderr = 0.0;
    double h_pesin = 0.0;
    double hd = 0.0;
    double hd_predicted = 0.0;
    double sigma2_H = 0.0;
    double h0 = 0.0;
    std::size_t n = 0;
    std::size_t refreshed_stencils = 0;
    std::size_t skipped_stencils = 0;
    struct Running {
        std::size_t n;
        double lambda_u;
        double lambda_s;
    };
    std::vector<Running> running;  ///< from the first orbit

    /// sqrt(stderr_u² + stderr_s²)
    double combined_stderr() const;
};

SpectrumEstimate lyapunov_spectrum(const CollisionMap& map, const LyapunovOptions& opts);

/// Fills hd = 1 - λᵘ/λˢ (with h = λᵘ) and the prediction 2 - ε²σ²_H/(2h₀).
SpectrumEstimate dimension(SpectrumEstimate spec, double h0, double sigma2_H, double epsilon);

// ---------------------------------------------------------------------------
// μ₀ averages and equidistribution

enum class Observable { DeltaX, DeltaY, Tau, H, S, LogJac };

double observe(const CollisionRecord& rec, Observable f);

struct Mu0Average {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
    std::size_t resampled = 0;  ///< grazing draws replaced by fresh samples
};

/// Plain Monte Carlo average of f(step(x)) over independent x ~ μ₀.
Mu0Average mu0_average(const CollisionMap& map, Observable f, std::size_t n, std::uint64_t seed,
                       unsigned threads);

struct EquidistributionCurve {
    std::vector<double> mean;  ///< ensemble average of f at T_P^k x, k = 0..n_push
    std::vector<double> stderr_;
    double target = 0.0;
    double rate = 0.0;  ///< fitted exponential approach rate (NaN if not resolvable)
    double amplitude = 0.0;
};

EquidistributionCurve equidistribution_test(const CollisionMap& map, Observable f, std::size_t n_push,
                                            std::size_t n_samples, double target, std::uint64_t seed,
                                            unsigned threads);

/// Mean free time π|Q|/|∂Q| of the unforced table.
double mean_free_time(const GeometryTable& table);

}  // namespace lorentz
