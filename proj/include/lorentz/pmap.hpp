#pragma once

#include <array>

#include "lorentz/flight.hpp"
#include "lorentz/forces.hpp"
#include "lorentz/geometry.hpp"

namespace lorentz {

/// One application of T_P = G ∘ T_F.
struct CollisionRecord {
    PhasePoint pre;           ///< (r, s)
    PhasePoint post_elastic;  ///< (r₁, s₁) = T_F(r, s)
    PhasePoint post;          ///< (r̄₁, s̄₁) = T_P(r, s)
    double tau = 0.0;
    Vec2 delta;    ///< Δ_P: base-point displacement in R², slip included
    Vec2 delta_F;  ///< flight-only displacement
    Vec2 slip;     ///< chord from r₁ to r̄₁ on the hit scatterer
    Vec2 image_offset;  ///< lattice offset of the scatterer image that was hit
    double integral_phtheta = 0.0;  ///< ∫ p h_θ dt over the flight
    double log_jac_TF = 0.0;
    double jac_G = 1.0;
    double ghat = 0.0;
    double log_jac_TP = 0.0;
    double H = 0.0;
    /// (1 - 𝒥_P) - εH, the second-order remainder ε²R_P.
    double remainder = 0.0;
    bool tangential = false;
};

/// Variants of the response kernel H.
enum class HKernel {
    Exact,           ///< (1 - exp(∫p h_θ dt) - ĝ)/ε
    Linearized,      ///< -(∫p h_θ dt + ĝ)/ε
    ThermostatForm,  ///< e⁰·Δ_F, constant Gaussian-thermostatted field only
};

using Mat2 = std::array<std::array<double, 2>, 2>;

inline double det(const Mat2& m) { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

struct JacobianTF {
    double analytic = 1.0;  ///< exp(∫ p h_θ dt)
    double numeric = 1.0;   ///< det of the central-difference matrix
    Mat2 matrix{};
};

inline constexpr double kStencilStep = 1e-6;

/// Stencil step 1e-6·min(1, cos φ₀, cos φ₁) (floor 1e-10): near-grazing
/// departures or arrivals make DT large and strongly curved, so the step
/// shrinks with the incidence and departure cosines.
double adapted_stencil_step(const CollisionRecord& center);

/// The forced collision map of a (table, force, twist) system.
class CollisionMap {
public:
    CollisionMap(GeometryTable table, ForceModel force, TwistModel twist, IntegratorConfig cfg = {});

    const GeometryTable& table() const { return table_; }
    const ForceModel& force() const { return force_; }
    const TwistModel& twist() const { return twist_; }
    const IntegratorConfig& config() const { return cfg_; }

    /// Perturbation size of the pair, max of the force and twist strengths.
    double epsilon() const;

    /// The same table with zero force and identity twist.
    CollisionMap unforced() const;

    /// Full record of one collision. Throws GrazingError, MaxTimeError, ...
    CollisionRecord step(PhasePoint x) const;

    PhasePoint apply(PhasePoint x) const { return step(x).post; }
    /// T_F only (flight plus elastic reflection, no twist).
    PhasePoint apply_flight(PhasePoint x) const;

    /// Central-difference DT_F against the closed-form determinant.
    /// Throws StencilSingularityError when the stencil straddles a singularity.
    JacobianTF jacobian_TF(PhasePoint x, double h = kStencilStep) const;

    /// Central-difference DT_P (same stencil rules as jacobian_TF).
    Mat2 derivative_TP(PhasePoint x, double h = kStencilStep) const;

    /// One step of T_P together with the central-difference DT_P at x.
    CollisionRecord step_with_derivative(PhasePoint x, Mat2& m, double h = kStencilStep) const;

    /// Central-difference DT_P around center.pre, reusing an existing record.
    Mat2 tangent_matrix(const CollisionRecord& center, double h) const;

    /// 𝒥_P = 𝒥_G(r₁, s₁)·exp(∫ p h_θ dt).
    double jacobian_TP(PhasePoint x) const { return std::exp(step(x).log_jac_TP); }

    double H_value(PhasePoint x, HKernel kernel = HKernel::Exact) const;

    /// Kernel value from an existing record; no extra flight.
    double kernel_from(const CollisionRecord& rec, HKernel kernel) const;

    /// Distance between T_F(G(r̄₁, -s̄₁)) and (r, -s), with r compared on the
    /// circle of its scatterer. Zero for time-reversible pairs.
    double reversibility_residual(PhasePoint x) const;

private:
    CollisionRecord step_impl(PhasePoint x, bool with_twist) const;
    // Central differences of T_F (with_twist = false) or T_P around x.
    Mat2 stencil(PhasePoint x, bool with_twist, const CollisionRecord& center, double h) const;

    GeometryTable table_;
    ForceModel force_;
    TwistModel twist_;
    IntegratorConfig cfg_;
};

}  // namespace lorentz
