#include <doctest.h>

#include <cmath>

#include "lorentz/errors.hpp"
#include "lorentz/forces.hpp"
#include "lorentz/geometry.hpp"
#include "lorentz/rng.hpp"

using namespace lorentz;

namespace {

GeometryTable reference_table() { return GeometryTable::build({{{0.0, 0.0}, 0.4}, {{0.5, 0.5}, 0.25}}); }

std::vector<ForceModel> all_variants() {
    IsokineticField odd;
    odd.shape = IsokineticField::Shape::OddHarmonic;
    odd.e1 = 0.7;
    odd.e2 = -0.4;
    odd.modulation = 0.3;
    IsokineticField magnetic;
    magnetic.shape = IsokineticField::Shape::Magnetic;
    return {
        ForceModel::zero(),
        ForceModel::conservative({Potential::Shape::Cosine2d, 1.0}, 0.05),
        ForceModel::conservative({Potential::Shape::Constant, 1.0}, 0.02),
        ForceModel::isokinetic(odd, 0.05),
        ForceModel::isokinetic(magnetic, 0.05),
        ForceModel::thermostatted_field(1.0, 0.5, 0.3, 0.05),
        ForceModel::constant_thermostatted(1.0, 0.0, 0.05),
    };
}

// Closed-form partials of the general twist
// g1 = d·s(1-s²)cos(2πu), g2 = d2·(1-s²)²sin(2πu), u = local arclength / L_i.
TwistPartials general_partials(const GeometryTable& t, double d, double d2, double r, double s) {
    const std::size_t i = t.scatterer_at(r);
    const double Li = t.arc_length(i);
    const double a = 2.0 * kPi * (r - t.arc_offset(i)) / Li;
    const double w = 1.0 - s * s;
    TwistPartials p;
    p.g1 = d * s * w * std::cos(a);
    p.g2 = d2 * w * w * std::sin(a);
    p.g1_r = -d * s * w * std::sin(a) * 2.0 * kPi / Li;
    p.g1_s = d * (1.0 - 3.0 * s * s) * std::cos(a);
    p.g2_r = d2 * w * w * std::cos(a) * 2.0 * kPi / Li;
    p.g2_s = -4.0 * d2 * s * w * std::sin(a);
    return p;
}

}  // namespace

TEST_SUITE("forces") {
    TEST_CASE("speed on the invariant level sets") {
        CHECK(ForceModel::zero().speed(0.3, 0.7, 1.0) == 1.0);
        const ForceModel c = ForceModel::conservative({Potential::Shape::Constant, 1.0}, 0.02);
        CHECK(c.speed(0.3, 0.7, 1.0) == doctest::Approx(std::sqrt(0.96)).epsilon(1e-14));
        const ForceModel big = ForceModel::conservative({Potential::Shape::Constant, 1.0}, 0.6);
        CHECK_THROWS_AS(big.speed(0.3, 0.7, 1.0), EnergyError);
        CHECK(ForceModel::constant_thermostatted(1, 0, 0.05).speed(0.1, 0.2, 0.3) == 1.0);
    }

    TEST_CASE("force vectors") {
        const Vec2 z = ForceModel::zero().force(0.3, 0.7, 1.0);
        CHECK(z.x == 0.0);
        CHECK(z.y == 0.0);

        IsokineticField mag;
        mag.shape = IsokineticField::Shape::Magnetic;
        const Vec2 f = ForceModel::isokinetic(mag, 0.05).force(0.3, 0.3, 0.0);
        CHECK(f.x == doctest::Approx(0.0));
        CHECK(f.y == doctest::Approx(0.05));

        const Vec2 e = ForceModel::constant_thermostatted(1.0, 0.0, 0.05).force(0.3, 0.3, kPi / 2);
        CHECK(e.x == doctest::Approx(0.05));
        CHECK(e.y == doctest::Approx(0.0).epsilon(1e-15));
    }

    TEST_CASE("curvature examples") {
        IsokineticField mag;
        mag.shape = IsokineticField::Shape::Magnetic;
        CHECK(ForceModel::isokinetic(mag, 0.05).curvature(0.3, 0.3, 0.0).h == doctest::Approx(0.05));
        const CurvatureData z = ForceModel::zero().curvature(0.1, 0.2, 0.3);
        CHECK(z.h == 0.0);
        CHECK(z.dh_dtheta == 0.0);
        const CurvatureData th = ForceModel::constant_thermostatted(1.0, 0.0, 0.05).curvature(0.1, 0.2, kPi / 2);
        CHECK(th.h == doctest::Approx(-0.05));
        CHECK(th.dh_dtheta == doctest::Approx(0.0).epsilon(1e-15));
    }

    TEST_CASE("curvature matches force and speed, and its theta derivative") {
        RngStream rng(21);
        for (const ForceModel& m : all_variants()) {
            double worst_h = 0.0, worst_d = 0.0;
            for (int i = 0; i < 10000; ++i) {
                const double x = rng.uniform(), y = rng.uniform(), th = rng.uniform(0.0, 2.0 * kPi);
                const Vec2 F = m.force(x, y, th);
                const double p = m.speed(x, y, th);
                const double h = (-F.x * std::sin(th) + F.y * std::cos(th)) / (p * p);
                const CurvatureData c = m.curvature(x, y, th);
                worst_h = std::max(worst_h, std::abs(c.h - h));
                const double fd = (m.curvature(x, y, th + 1e-5).h - m.curvature(x, y, th - 1e-5).h) / 2e-5;
                worst_d = std::max(worst_d, std::abs(c.dh_dtheta - fd));
                const FlowRates r = m.rates(x, y, th);
                CHECK(r.h == doctest::Approx(c.h).epsilon(1e-12));
                CHECK(r.h_theta == doctest::Approx(c.dh_dtheta).epsilon(1e-12));
            }
            CHECK(worst_h < 1e-10);
            CHECK(worst_d < 1e-6);
        }
    }

    TEST_CASE("flow reversibility predicate") {
        CHECK(flow_reversibility(ForceModel::conservative({Potential::Shape::Cosine2d, 1.0}, 0.05), 1000, 1e-10)
                  .reversible);
        IsokineticField odd;
        odd.modulation = 0.5;
        CHECK(flow_reversibility(ForceModel::isokinetic(odd, 0.05), 1000, 1e-10).reversible);
        IsokineticField mag;
        mag.shape = IsokineticField::Shape::Magnetic;
        const ReversibilityReport r = flow_reversibility(ForceModel::isokinetic(mag, 0.05), 1000, 1e-10);
        CHECK_FALSE(r.reversible);
        CHECK(r.worst_violation == doctest::Approx(0.1));
        CHECK(flow_reversibility(ForceModel::constant_thermostatted(1, 0, 0.05), 1000, 1e-10).reversible);
    }

    TEST_CASE("force validation") {
        const GeometryTable t = reference_table();
        for (const ForceModel& m : all_variants()) CHECK(validate_force(m, t).ok);
        CHECK_FALSE(validate_force(ForceModel::conservative({Potential::Shape::Constant, 1.0}, 0.6), t).ok);
        CHECK(to_string(ForceKind::ConstantThermostatted) == "constant_thermostatted");
    }

    TEST_CASE("twist application") {
        const GeometryTable t = reference_table();
        const TwistModel id = TwistModel::identity();
        const PhasePoint x = id.apply(t, {1.3, 0.2});
        CHECK(x.r == 1.3);
        CHECK(x.s == 0.2);

        const TwistModel slip = TwistModel::slip(0.01, TwistModel::Parity::Odd);
        const PhasePoint a = slip.apply(t, {1.0, 1.0});
        CHECK(a.r == doctest::Approx(1.0));
        CHECK(a.s == 1.0);
        const PhasePoint b = slip.apply(t, {1.0, 0.5});
        CHECK(b.r == doctest::Approx(1.00375).epsilon(1e-14));
        CHECK(b.s == 0.5);

        // The r-shift wraps within the owning scatterer.
        const double end0 = t.arc_length(0);
        const PhasePoint w = slip.apply(t, {end0 - 1e-4, 0.5});
        CHECK(w.r == doctest::Approx(0.00375 - 1e-4).epsilon(1e-10));
    }

    TEST_CASE("twist Jacobians") {
        const GeometryTable t = reference_table();
        const TwistJacobian idj = TwistModel::identity().jacobian(t, {0.5, 0.3});
        CHECK(idj.jac == 1.0);
        CHECK(idj.ghat == 0.0);

        RngStream rng(4);
        const TwistModel slip = TwistModel::slip(0.03, TwistModel::Parity::Odd);
        for (int i = 0; i < 100; ++i) {
            const TwistJacobian j = slip.jacobian(t, {rng.uniform() * t.length(), rng.uniform(-1.0, 1.0)});
            CHECK(j.jac == doctest::Approx(1.0).epsilon(1e-15));
        }

        const TwistModel g0 = TwistModel::general(0.02, 0.0, 0.02);
        CHECK(g0.jacobian(t, {0.0, 0.5}).jac == doctest::Approx(1.0).epsilon(1e-14));

        const double d = 0.02, d2 = 0.015;
        const TwistModel g = TwistModel::general(d, d2, 0.02);
        double worst_sym = 0.0, worst_fd = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double r = rng.uniform() * t.length(), s = rng.uniform(-0.95, 0.95);
            const TwistPartials ref = general_partials(t, d, d2, r, s);
            const TwistPartials got = g.evaluate(t, r, s);
            worst_sym = std::max({worst_sym, std::abs(got.g1 - ref.g1), std::abs(got.g2 - ref.g2),
                                  std::abs(got.g1_r - ref.g1_r), std::abs(got.g1_s - ref.g1_s),
                                  std::abs(got.g2_r - ref.g2_r), std::abs(got.g2_s - ref.g2_s)});
            const double sym = (1 + ref.g1_r) * (1 + ref.g2_s) - ref.g1_s * ref.g2_r;
            const TwistJacobian j = g.jacobian(t, {r, s});
            CHECK(j.jac == doctest::Approx(sym).epsilon(1e-13));
            CHECK(j.ghat == doctest::Approx(sym - 1.0).epsilon(1e-9));

            // Central differences of apply, away from the scatterer seams.
            const std::size_t k = t.scatterer_at(r);
            const double u = r - t.arc_offset(k);
            if (u < 1e-4 || u > t.arc_length(k) - 1e-4) continue;
            const double h = 1e-6;
            const PhasePoint rp = g.apply(t, {r + h, s}), rm = g.apply(t, {r - h, s});
            const PhasePoint sp = g.apply(t, {r, s + h}), sm = g.apply(t, {r, s - h});
            const double a = (rp.r - rm.r) / (2 * h), b = (sp.r - sm.r) / (2 * h);
            const double c = (rp.s - rm.s) / (2 * h), e = (sp.s - sm.s) / (2 * h);
            worst_fd = std::max(worst_fd, std::abs(a * e - b * c - j.jac));
        }
        CHECK(worst_sym < 1e-14);
        CHECK(worst_fd < 1e-6);
    }

    TEST_CASE("twist reversibility: odd passes, even fails by 2d(1-s^2)") {
        const GeometryTable t = reference_table();
        CHECK(twist_reversibility(TwistModel::identity(), t, 1000, 1e-12).reversible);
        CHECK(twist_reversibility(TwistModel::slip(0.02, TwistModel::Parity::Odd), t, 1000, 1e-12).reversible);

        const double d = 0.02;
        const TwistModel even = TwistModel::slip(d, TwistModel::Parity::Even);
        const ReversibilityReport rep = twist_reversibility(even, t, 1000, 1e-12);
        CHECK_FALSE(rep.reversible);
        CHECK(rep.worst_violation <= 2.0 * d + 1e-12);
        CHECK(rep.worst_violation > 1.9 * d);

        // Pointwise: G(r̄, -s̄) - (r, -s) has r-component 2d(1-s²).
        for (double s : {-0.7, -0.2, 0.0, 0.4, 0.9}) {
            const double r = 1.0;
            const PhasePoint y = even.apply(t, {r, s});
            const PhasePoint back = even.apply(t, {y.r, -y.s});
            CHECK(back.r - r == doctest::Approx(2.0 * d * (1.0 - s * s)).epsilon(1e-12));
            CHECK(back.s == doctest::Approx(-s));
        }
    }

    TEST_CASE("twist validation") {
        const GeometryTable t = reference_table();
        CHECK(validate_twist(TwistModel::identity(), t).ok);
        CHECK(validate_twist(TwistModel::slip(0.02, TwistModel::Parity::Odd), t).ok);
        CHECK(validate_twist(TwistModel::general(0.02, 0.01, 0.02), t).ok);
        // Declared strength far below the actual size violates the smallness bound.
        CHECK_FALSE(validate_twist(TwistModel::general(0.2, 0.1, 0.001), t).ok);
    }
}
