#include "lorentz/forces.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lorentz/errors.hpp"
#include "lorentz/rng.hpp"

namespace lorentz {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kFourPiSq = 4.0 * kPi * kPi;

}  // namespace

std::string to_string(ForceKind k) {
    switch (k) {
        case ForceKind::Zero: return "zero";
        case ForceKind::Conservative: return "conservative";
        case ForceKind::Isokinetic: return "isokinetic";
        case ForceKind::ThermostattedField: return "thermostatted_field";
        case ForceKind::ConstantThermostatted: return "constant_thermostatted";
    }
    return "?";
}

std::string to_string(TwistKind k) {
    switch (k) {
        case TwistKind::Identity: return "identity";
        case TwistKind::SlipOnly: return "slip";
        case TwistKind::General: return "general";
    }
    return "?";
}

double Potential::value(double x, double y) const {
    switch (shape) {
        case Shape::Constant: return amplitude;
        case Shape::Cosine2d:
            return amplitude * std::cos(kTwoPi * x) * std::cos(kTwoPi * y) / kFourPiSq;
    }
    return 0.0;
}

Vec2 Potential::gradient(double x, double y) const {
    switch (shape) {
        case Shape::Constant: return {};
        case Shape::Cosine2d: {
            const double k = amplitude / kTwoPi;
            return {-k * std::sin(kTwoPi * x) * std::cos(kTwoPi * y),
                    -k * std::cos(kTwoPi * x) * std::sin(kTwoPi * y)};
        }
    }
    return {};
}

double IsokineticField::value(double x, double y, double theta) const {
    switch (shape) {
        case Shape::Magnetic: return 1.0;
        case Shape::OddHarmonic: {
            const double envelope = 1.0 + modulation * std::cos(kTwoPi * x) * std::cos(kTwoPi * y);
            return envelope * (-e1 * std::sin(theta) + e2 * std::cos(theta));
        }
    }
    return 0.0;
}

double IsokineticField::dtheta(double x, double y, double theta) const {
    switch (shape) {
        case Shape::Magnetic: return 0.0;
        case Shape::OddHarmonic: {
            const double envelope = 1.0 + modulation * std::cos(kTwoPi * x) * std::cos(kTwoPi * y);
            return -envelope * (e1 * std::cos(theta) + e2 * std::sin(theta));
        }
    }
    return 0.0;
}

ForceModel ForceModel::zero() { return ForceModel(Zero{}, 0.0); }

ForceModel ForceModel::conservative(Potential potential, double epsilon) {
    return ForceModel(Conservative{potential}, epsilon);
}

ForceModel ForceModel::isokinetic(IsokineticField field, double epsilon) {
    return ForceModel(Isokinetic{field}, epsilon);
}

ForceModel ForceModel::thermostatted_field(double e1, double e2, double modulation, double epsilon) {
    return ForceModel(ThermostattedField{e1, e2, modulation}, epsilon);
}

ForceModel ForceModel::constant_thermostatted(double e1, double e2, double epsilon) {
    return ForceModel(ConstantThermostatted{e1, e2}, epsilon);
}

ForceKind ForceModel::kind() const {
    return static_cast<ForceKind>(params_.index());
}

namespace {

Vec2 field_at(const ForceModel::ThermostattedField& f, double x, double y) {
    return {f.e1 + f.modulation * std::sin(kTwoPi * y), f.e2 + f.modulation * std::sin(kTwoPi * x)};
}

}  // namespace

double ForceModel::speed(double x, double y, double theta) const {
    if (const auto* c = std::get_if<Conservative>(&params_)) {
        const double rad = 1.0 - 2.0 * epsilon_ * c->potential.value(x, y);
        if (rad < kMinSpeed * kMinSpeed) {
            std::ostringstream os;
            os << "potential " << epsilon_ * c->potential.value(x, y) << " at (" << x << "," << y
               << ") leaves speed^2 = " << rad << " below " << kMinSpeed * kMinSpeed
               << " on the E = 1/2 level";
            throw EnergyError(os.str());
        }
        return std::sqrt(rad);
    }
    (void)theta;
    return 1.0;
}

Vec2 ForceModel::force(double x, double y, double theta) const {
    const double eps = epsilon_;
    return std::visit(
        overloaded{
            [](const Zero&) { return Vec2{}; },
            [&](const Conservative& c) { return -eps * c.potential.gradient(x, y); },
            [&](const Isokinetic& k) {
                const double f = eps * k.field.value(x, y, theta);
                return Vec2{-f * std::sin(theta), f * std::cos(theta)};
            },
            [&](const ThermostattedField& t) {
                const Vec2 e = eps * field_at(t, x, y);
                const Vec2 v = unit_from_angle(theta);
                return e - dot(e, v) * v;
            },
            [&](const ConstantThermostatted& t) {
                const Vec2 e{eps * t.e1, eps * t.e2};
                const Vec2 v = unit_from_angle(theta);
                return e - dot(e, v) * v;
            },
        },
        params_);
}

FlowRates ForceModel::rates(double x, double y, double theta) const {
    return rates(x, y, theta, std::cos(theta), std::sin(theta));
}

FlowRates ForceModel::rates(double x, double y, double theta, double cs, double sn) const {
    const double eps = epsilon_;
    return std::visit(
        overloaded{
            [](const Zero&) { return FlowRates{}; },
            [&](const Conservative& c) {
                const double p2 = 1.0 - 2.0 * eps * c.potential.value(x, y);
                const Vec2 g = c.potential.gradient(x, y);
                // F = -ε∇u, so -F1 sinθ + F2 cosθ = ε(u_x sinθ - u_y cosθ).
                return FlowRates{std::sqrt(p2), eps * (g.x * sn - g.y * cs) / p2,
                                 eps * (g.x * cs + g.y * sn) / p2};
            },
            [&](const Isokinetic& k) {
                return FlowRates{1.0, eps * k.field.value(x, y, theta),
                                 eps * k.field.dtheta(x, y, theta)};
            },
            [&](const ThermostattedField& t) {
                const Vec2 e = field_at(t, x, y);
                return FlowRates{1.0, eps * (-e.x * sn + e.y * cs), -eps * (e.x * cs + e.y * sn)};
            },
            [&](const ConstantThermostatted& t) {
                return FlowRates{1.0, eps * (-t.e1 * sn + t.e2 * cs), -eps * (t.e1 * cs + t.e2 * sn)};
            },
        },
        params_);
}

CurvatureData ForceModel::curvature(double x, double y, double theta) const {
    const FlowRates fr = rates(x, y, theta);
    return {fr.h, fr.h_theta};
}

double ForceModel::conserved(double x, double y, double theta) const {
    if (const auto* c = std::get_if<Conservative>(&params_)) {
        const double p = rates(x, y, theta).speed;
        return 0.5 * p * p + epsilon_ * c->potential.value(x, y);
    }
    return 1.0;
}

ForceValidation validate_force(const ForceModel& model, const GeometryTable& table, int n_samples,
                               std::uint64_t seed) {
    ForceValidation out;
    out.min_speed = std::numeric_limits<double>::infinity();
    RngStream rng(seed, 0x666f726365ull);
    constexpr double h = 1e-6;
    int taken = 0;
    while (taken < n_samples) {
        const double x = rng.uniform(), y = rng.uniform(), th = rng.uniform(0.0, kTwoPi);
        bool inside = false;
        for (const auto& sc : table.scatterers()) {
            Vec2 d = Vec2{x, y} - sc.center;
            d.x -= std::round(d.x);
            d.y -= std::round(d.y);
            if (norm(d) < sc.radius) inside = true;
        }
        if (inside) continue;
        ++taken;
        double p = 0.0;
        try {
            p = model.speed(x, y, th);
        } catch (const EnergyError& e) {
            out.ok = false;
            out.message = e.what();
            return out;
        }
        out.min_speed = std::min(out.min_speed, p);
        out.max_speed = std::max(out.max_speed, p);
        const Vec2 f = model.force(x, y, th);
        out.max_force = std::max(out.max_force, norm(f));
        const Vec2 dx = (model.force(x + h, y, th) - model.force(x - h, y, th)) * (0.5 / h);
        const Vec2 dy = (model.force(x, y + h, th) - model.force(x, y - h, th)) * (0.5 / h);
        const Vec2 dt = (model.force(x, y, th + h) - model.force(x, y, th - h)) * (0.5 / h);
        out.max_derivative = std::max({out.max_derivative, norm(dx), norm(dy), norm(dt)});
    }
    const double bound = kSmallnessConstant * model.epsilon() * (1.0 + 1e-6);
    if (out.min_speed < kMinSpeed) {
        out.ok = false;
        out.message = "speed drops below the admitted minimum";
    } else if (out.max_force > bound || out.max_derivative > bound) {
        out.ok = false;
        std::ostringstream os;
        os << "force C1 norm (sampled) " << std::max(out.max_force, out.max_derivative)
           << " exceeds c*eps = " << bound;
        out.message = os.str();
    }
    return out;
}

ReversibilityReport flow_reversibility(const ForceModel& model, int n_samples, double tol,
                                       std::uint64_t seed) {
    RngStream rng(seed, 0x666c6f77ull);
    ReversibilityReport rep;
    for (int k = 0; k < n_samples; ++k) {
        const double x = rng.uniform(), y = rng.uniform(), th = rng.uniform(0.0, kTwoPi);
        const FlowRates a = model.rates(x, y, th);
        const FlowRates b = model.rates(x, y, th + kPi);
        rep.worst_violation =
            std::max({rep.worst_violation, std::abs(b.speed - a.speed), std::abs(b.h + a.h)});
    }
    rep.reversible = rep.worst_violation <= tol;
    return rep;
}

// ---------------------------------------------------------------------------

TwistModel TwistModel::identity() { return TwistModel{}; }

TwistModel TwistModel::slip(double delta, Parity parity) {
    TwistModel t;
    t.kind_ = TwistKind::SlipOnly;
    t.parity_ = parity;
    t.delta_ = delta;
    t.epsilon_ = std::abs(delta);
    return t;
}

TwistModel TwistModel::general(double delta, double delta2, double epsilon) {
    TwistModel t;
    t.kind_ = TwistKind::General;
    t.delta_ = delta;
    t.delta2_ = delta2;
    t.epsilon_ = epsilon;
    return t;
}

TwistPartials TwistModel::evaluate(const GeometryTable& table, double r, double s) const {
    TwistPartials p;
    const double w = 1.0 - s * s;
    switch (kind_) {
        case TwistKind::Identity: break;
        case TwistKind::SlipOnly:
            if (parity_ == Parity::Odd) {
                p.g1 = delta_ * s * w;
                p.g1_s = delta_ * (1.0 - 3.0 * s * s);
            } else {
                p.g1 = delta_ * w;
                p.g1_s = -2.0 * delta_ * s;
            }
            break;
        case TwistKind::General: {
            const std::size_t i = table.scatterer_at(r);
            const double len = table.arc_length(i);
            const double phase = kTwoPi * (r - table.arc_offset(i)) / len;
            const double c = std::cos(phase), sn = std::sin(phase);
            const double k = kTwoPi / len;
            p.g1 = delta_ * s * w * c;
            p.g1_r = -delta_ * s * w * k * sn;
            p.g1_s = delta_ * (1.0 - 3.0 * s * s) * c;
            p.g2 = delta2_ * w * w * sn;
            p.g2_r = delta2_ * w * w * k * c;
            p.g2_s = -4.0 * delta2_ * s * w * sn;
            break;
        }
    }
    return p;
}

PhasePoint TwistModel::apply(const GeometryTable& table, PhasePoint x) const {
    if (kind_ == TwistKind::Identity) return x;
    const TwistPartials p = evaluate(table, x.r, x.s);
    const double s_bar = x.s + p.g2;
    if (s_bar < -1.0 || s_bar > 1.0) {
        std::ostringstream os;
        os << "twist maps s = " << x.s << " to " << s_bar << " outside [-1, 1]";
        throw RangeError(os.str());
    }
    return {table.shift_along(x.r, p.g1), s_bar};
}

TwistJacobian TwistModel::jacobian(const GeometryTable& table, PhasePoint x) const {
    if (kind_ == TwistKind::Identity) return {};
    const TwistPartials p = evaluate(table, x.r, x.s);
    const double ghat = p.g1_r + p.g2_s + p.g1_r * p.g2_s - p.g1_s * p.g2_r;
    return {1.0 + ghat, ghat};
}

TwistValidation validate_twist(const TwistModel& model, const GeometryTable& table, int n_samples,
                               std::uint64_t seed) {
    TwistValidation out;
    if (model.kind() == TwistKind::Identity) return out;
    RngStream rng(seed, 0x7477697374ull);
    double max_g1_ratio = 0.0;
    for (int k = 0; k < n_samples; ++k) {
        const double r = rng.uniform(0.0, table.length());
        const double s = rng.uniform(-1.0, 1.0);
        const TwistPartials p = model.evaluate(table, r, s);
        out.max_c1 = std::max({out.max_c1, std::abs(p.g1), std::abs(p.g2), std::abs(p.g1_r),
                               std::abs(p.g1_s), std::abs(p.g2_r), std::abs(p.g2_s)});
        const double sb = s + p.g2;
        if (sb < -1.0 || sb > 1.0) {
            out.ok = false;
            out.message = "twist pushes s outside [-1, 1]";
        }
        max_g1_ratio = std::max(max_g1_ratio, std::abs(p.g1) / table.arc_length(table.scatterer_at(r)));
        for (double edge : {-1.0, 1.0}) {
            const TwistPartials e = model.evaluate(table, r, edge);
            out.max_tangential = std::max({out.max_tangential, std::abs(e.g1), std::abs(e.g2)});
        }
    }
    if (out.max_tangential > 1e-14) {
        out.ok = false;
        out.message = "twist moves tangential collisions";
    }
    if (max_g1_ratio >= 0.25) {
        out.ok = false;
        out.message = "slip exceeds a quarter of a scatterer's circumference";
    }
    if (out.max_c1 > kSmallnessConstant * model.epsilon() * (1.0 + 1e-9)) {
        out.ok = false;
        std::ostringstream os;
        os << "twist C1 norm (sampled) " << out.max_c1 << " exceeds c*eps = "
           << kSmallnessConstant * model.epsilon();
        out.message = os.str();
    }
    return out;
}

ReversibilityReport twist_reversibility(const TwistModel& model, const GeometryTable& table,
                                        int n_samples, double tol, std::uint64_t seed) {
    RngStream rng(seed, 0x7265763277ull);
    ReversibilityReport rep;
    for (int k = 0; k < n_samples; ++k) {
        const PhasePoint x{rng.uniform(0.0, table.length()), rng.uniform(-1.0, 1.0)};
        const PhasePoint gx = model.apply(table, x);
        const PhasePoint back = model.apply(table, {gx.r, -gx.s});
        const double dr = table.arc_difference(x.r, back.r);
        const double ds = back.s + x.s;
        rep.worst_violation = std::max(rep.worst_violation, std::hypot(dr, ds));
    }
    rep.reversible = rep.worst_violation <= tol;
    return rep;
}

}  // namespace lorentz
