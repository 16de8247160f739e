#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "lorentz/geometry.hpp"
#include "lorentz/vec2.hpp"

namespace lorentz {

/// Lower speed bound admitted on the invariant level set.
inline constexpr double kMinSpeed = 0.1;
/// Constant c in the smallness bound |F|_{C1} <= c·ε used by the validators.
inline constexpr double kSmallnessConstant = 2.0;

enum class ForceKind { Zero, Conservative, Isokinetic, ThermostattedField, ConstantThermostatted };

std::string to_string(ForceKind k);

/// Unscaled potential shape u(x,y); the model uses U = ε·u.
struct Potential {
    enum class Shape { Constant, Cosine2d };
    Shape shape = Shape::Cosine2d;
    /// Constant: u ≡ amplitude.
    /// Cosine2d: u = amplitude·cos(2πx)cos(2πy)/(4π²), normalized so that the
    /// force -∇u and its first derivatives are bounded by amplitude.
    double amplitude = 1.0;

    double value(double x, double y) const;
    Vec2 gradient(double x, double y) const;
};

/// Unscaled scalar field f(x,y,θ) of an isokinetic force F = ε·f·(-sinθ, cosθ).
struct IsokineticField {
    enum class Shape { Magnetic, OddHarmonic };
    Shape shape = Shape::OddHarmonic;
    /// OddHarmonic: f = (1 + m·cos2πx·cos2πy)(-e1·sinθ + e2·cosθ), odd under θ -> θ+π.
    /// Magnetic: f ≡ 1 (uniform field normal to the table).
    double e1 = 1.0;
    double e2 = 0.0;
    double modulation = 0.0;

    double value(double x, double y, double theta) const;
    double dtheta(double x, double y, double theta) const;
};

/// Signed trajectory curvature h and its θ-derivative at fixed position.
struct CurvatureData {
    double h = 0.0;
    double dh_dtheta = 0.0;
};

/// Everything the flight integrator needs at a phase point.
struct FlowRates {
    double speed = 1.0;
    double h = 0.0;
    double h_theta = 0.0;
};

/// Flight force F(q, p) together with its conserved quantity, expressed through
/// the speed function p(x,y,θ) and trajectory curvature h(x,y,θ).
class ForceModel {
public:
    struct Zero {};
    struct Conservative {
        Potential potential;
    };
    struct Isokinetic {
        IsokineticField field;
    };
    /// Gaussian-thermostatted field E = ε·(e1 + m·sin2πy, e2 + m·sin2πx).
    struct ThermostattedField {
        double e1 = 1.0;
        double e2 = 0.0;
        double modulation = 0.0;
    };
    struct ConstantThermostatted {
        double e1 = 1.0;
        double e2 = 0.0;
    };
    using Params = std::variant<Zero, Conservative, Isokinetic, ThermostattedField, ConstantThermostatted>;

    ForceModel() = default;

    static ForceModel zero();
    static ForceModel conservative(Potential potential, double epsilon);
    static ForceModel isokinetic(IsokineticField field, double epsilon);
    static ForceModel thermostatted_field(double e1, double e2, double modulation, double epsilon);
    static ForceModel constant_thermostatted(double e1, double e2, double epsilon);

    ForceKind kind() const;
    double epsilon() const { return epsilon_; }
    /// The same force family at another strength.
    ForceModel with_epsilon(double eps) const { return ForceModel(params_, eps); }
    const Params& params() const { return params_; }
    bool is_zero() const { return kind() == ForceKind::Zero || epsilon_ == 0.0; }

    /// Speed on the invariant level set. Throws EnergyError for a potential too
    /// large for the E = 1/2 level.
    double speed(double x, double y, double theta) const;
    Vec2 force(double x, double y, double theta) const;
    CurvatureData curvature(double x, double y, double theta) const;

    /// Speed, h and h_θ in one pass, without error checks.
    FlowRates rates(double x, double y, double theta) const;
    /// Same, with cos θ and sin θ supplied by the caller.
    FlowRates rates(double x, double y, double theta, double cos_theta, double sin_theta) const;

    /// Conserved quantity: kinetic energy plus potential for Conservative, the
    /// speed itself for the isokinetic/thermostatted families.
    double conserved(double x, double y, double theta) const;

private:
    ForceModel(Params p, double eps) : params_(std::move(p)), epsilon_(eps) {}

    Params params_{Zero{}};
    double epsilon_ = 0.0;
};

/// Sampled check of the invariant-space and smallness assumptions.
struct ForceValidation {
    bool ok = true;
    double min_speed = 0.0;
    double max_speed = 0.0;
    double max_force = 0.0;
    double max_derivative = 0.0;
    std::string message;
};

ForceValidation validate_force(const ForceModel& model, const GeometryTable& table,
                               int n_samples = 2000, std::uint64_t seed = 7);

struct ReversibilityReport {
    bool reversible = false;
    double worst_violation = 0.0;
};

/// Checks p(x,y,θ+π) = p(x,y,θ) and h(x,y,θ+π) = -h(x,y,θ) at sampled points.
ReversibilityReport flow_reversibility(const ForceModel& model, int n_samples, double tol,
                                       std::uint64_t seed = 11);

// ---------------------------------------------------------------------------

enum class TwistKind { Identity, SlipOnly, General };

std::string to_string(TwistKind k);

/// Values and first partials of the twist displacement (g¹, g²) at (r, s);
/// subscript r is ∂/∂r and s is ∂/∂s.
struct TwistPartials {
    double g1 = 0.0, g2 = 0.0;
    double g1_r = 0.0, g1_s = 0.0;
    double g2_r = 0.0, g2_s = 0.0;
};

struct TwistJacobian {
    double jac = 1.0;   ///< det DG
    double ghat = 0.0;  ///< det DG - 1, expanded without cancellation
};

/// Collision twist G(r,s) = (r,s) + (g¹, g²), applied right after the elastic
/// reflection. All variants fix s = ±1.
class TwistModel {
public:
    enum class Parity { Odd, Even };

    TwistModel() = default;

    static TwistModel identity();
    /// r-independent slip g¹ = δ·s(1-s²) (odd) or δ·(1-s²) (even), g² = 0.
    static TwistModel slip(double delta, Parity parity);
    /// g¹ = δ·s(1-s²)·cos(2πu), g² = δ₂·(1-s²)²·sin(2πu), u = local arclength / L_i.
    static TwistModel general(double delta, double delta2, double epsilon);

    TwistKind kind() const { return kind_; }
    Parity parity() const { return parity_; }
    double delta() const { return delta_; }
    double delta2() const { return delta2_; }
    double epsilon() const { return epsilon_; }
    bool is_identity() const { return kind_ == TwistKind::Identity || (delta_ == 0.0 && delta2_ == 0.0); }

    TwistPartials evaluate(const GeometryTable& table, double r, double s) const;

    /// (r̄, s̄); the r-shift wraps within the collision point's own scatterer.
    /// Throws RangeError if s̄ leaves [-1, 1].
    PhasePoint apply(const GeometryTable& table, PhasePoint x) const;

    TwistJacobian jacobian(const GeometryTable& table, PhasePoint x) const;

private:
    TwistKind kind_ = TwistKind::Identity;
    Parity parity_ = Parity::Odd;
    double delta_ = 0.0;
    double delta2_ = 0.0;
    double epsilon_ = 0.0;
};

struct TwistValidation {
    bool ok = true;
    double max_c1 = 0.0;
    double max_tangential = 0.0;  ///< max |g(r, ±1)|
    std::string message;
};

TwistValidation validate_twist(const TwistModel& model, const GeometryTable& table,
                               int n_samples = 2000, std::uint64_t seed = 13);

/// Pointwise graph condition G(r̄, -s̄) = (r, -s) at sampled (r, s).
ReversibilityReport twist_reversibility(const TwistModel& model, const GeometryTable& table,
                                        int n_samples, double tol, std::uint64_t seed = 17);

}  // namespace lorentz
