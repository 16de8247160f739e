#include "lorentz/pmap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lorentz/errors.hpp"

namespace lorentz {

namespace {

std::string at_point(PhasePoint x) {
    std::ostringstream os;
    os.precision(17);
    os << " (from r=" << x.r << ", s=" << x.s << ")";
    return os.str();
}

// Signed difference b - a of global arclengths taken modulo L.
double wrapped_difference(double a, double b, double length) {
    double d = std::fmod(b - a, length);
    if (d > 0.5 * length) d -= length;
    if (d <= -0.5 * length) d += length;
    return d;
}

}  // namespace

CollisionMap::CollisionMap(GeometryTable table, ForceModel force, TwistModel twist, IntegratorConfig cfg)
    : table_(std::move(table)), force_(std::move(force)), twist_(twist), cfg_(cfg) {}

double CollisionMap::epsilon() const {
    return std::max(std::abs(force_.epsilon()), twist_.is_identity() ? 0.0 : twist_.epsilon());
}

CollisionMap CollisionMap::unforced() const {
    return CollisionMap(table_, ForceModel::zero(), TwistModel::identity(), cfg_);
}

CollisionRecord CollisionMap::step(PhasePoint x) const { return step_impl(x, true); }

PhasePoint CollisionMap::apply_flight(PhasePoint x) const { return step_impl(x, false).post_elastic; }

CollisionRecord CollisionMap::step_impl(PhasePoint x, bool with_twist) const {
    if (!(x.r >= 0.0 && x.r < table_.length()) || !(x.s >= -1.0 && x.s <= 1.0)) {
        throw RangeError("collision point outside M" + at_point(x));
    }
    CollisionRecord rec;
    rec.pre = x;
    const FlowState start = from_collision_coords(table_, x);
    FlightResult fl;
    FlowState out;
    try {
        fl = integrate_flight(start, force_, table_, cfg_);
        out = elastic_reflect(fl.end_state, fl.hit, cfg_.grazing_tol);
    } catch (const GrazingError& e) {
        throw GrazingError(e.what() + at_point(x));
    } catch (const MaxTimeError& e) {
        throw MaxTimeError(e.what() + at_point(x));
    } catch (const TunnelError& e) {
        throw TunnelError(e.what() + at_point(x));
    }
    rec.post_elastic = to_collision_coords(out, fl.hit);
    rec.tangential = fl.tangential;
    rec.tau = fl.tau;
    rec.delta_F = fl.displacement;
    rec.image_offset = fl.image_offset;
    rec.integral_phtheta = fl.integral_phtheta;
    rec.log_jac_TF = fl.integral_phtheta;

    if (with_twist && !twist_.is_identity()) {
        rec.post = twist_.apply(table_, rec.post_elastic);
        rec.slip = table_.boundary_point(rec.post.r).position - fl.hit.position;
        const TwistJacobian jg = twist_.jacobian(table_, rec.post_elastic);
        rec.jac_G = jg.jac;
        rec.ghat = jg.ghat;
    } else {
        rec.post = rec.post_elastic;
    }
    rec.delta = rec.delta_F + rec.slip;
    rec.log_jac_TP = rec.log_jac_TF + std::log1p(rec.ghat);

    const double eps = epsilon();
    const double em1 = std::expm1(rec.integral_phtheta);
    rec.H = eps > 0.0 ? (-em1 - rec.ghat) / eps : 0.0;
    rec.remainder = -rec.ghat * em1;
    return rec;
}

double CollisionMap::kernel_from(const CollisionRecord& rec, HKernel kernel) const {
    const double eps = epsilon();
    if (eps == 0.0) return 0.0;
    switch (kernel) {
        case HKernel::Exact: return rec.H;
        case HKernel::Linearized: return -(rec.integral_phtheta + rec.ghat) / eps;
        case HKernel::ThermostatForm: {
            const auto* c = std::get_if<ForceModel::ConstantThermostatted>(&force_.params());
            if (c == nullptr) {
                throw ValidationError("thermostat-form kernel needs a constant thermostatted field");
            }
            return c->e1 * rec.delta_F.x + c->e2 * rec.delta_F.y - rec.ghat / eps;
        }
    }
    return rec.H;
}

double CollisionMap::H_value(PhasePoint x, HKernel kernel) const { return kernel_from(step(x), kernel); }

Mat2 CollisionMap::stencil(PhasePoint x, bool with_twist, const CollisionRecord& center, double h) const {
    if (std::abs(x.s) + h > 1.0) throw StencilSingularityError("stencil leaves the collision space");
    const std::size_t owner = table_.scatterer_at(center.post_elastic.r);

    auto eval = [&](PhasePoint p) {
        CollisionRecord r;
        try {
            r = step_impl(p, with_twist);
        } catch (const RuntimeFailure& e) {
            throw StencilSingularityError(std::string("stencil point failed: ") + e.what());
        }
        if (table_.scatterer_at(r.post_elastic.r) != owner || !(r.image_offset == center.image_offset) ||
            std::abs(r.tau - center.tau) > 0.1 * center.tau) {
            throw StencilSingularityError("stencil straddles a singularity" + at_point(x));
        }
        return with_twist ? r.post : r.post_elastic;
    };

    const PhasePoint rp = eval({table_.shift_along(x.r, h), x.s});
    const PhasePoint rm = eval({table_.shift_along(x.r, -h), x.s});
    const PhasePoint sp = eval({x.r, x.s + h});
    const PhasePoint sm = eval({x.r, x.s - h});
    Mat2 m{};
    m[0][0] = table_.arc_difference(rm.r, rp.r) / (2.0 * h);
    m[1][0] = (rp.s - rm.s) / (2.0 * h);
    m[0][1] = table_.arc_difference(sm.r, sp.r) / (2.0 * h);
    m[1][1] = (sp.s - sm.s) / (2.0 * h);
    return m;
}

JacobianTF CollisionMap::jacobian_TF(PhasePoint x, double h) const {
    const CollisionRecord center = step_impl(x, false);
    JacobianTF out;
    out.analytic = std::exp(center.integral_phtheta);
    out.matrix = stencil(x, false, center, h);
    out.numeric = det(out.matrix);
    return out;
}

Mat2 CollisionMap::derivative_TP(PhasePoint x, double h) const {
    Mat2 m;
    step_with_derivative(x, m, h);
    return m;
}

CollisionRecord CollisionMap::step_with_derivative(PhasePoint x, Mat2& m, double h) const {
    CollisionRecord center = step_impl(x, true);
    m = stencil(x, true, center, h);
    return center;
}

Mat2 CollisionMap::tangent_matrix(const CollisionRecord& center, double h) const {
    return stencil(center.pre, true, center, h);
}

double adapted_stencil_step(const CollisionRecord& center) {
    const double c0 = std::sqrt(std::max(0.0, 1.0 - center.pre.s * center.pre.s));
    const double c1 = std::sqrt(std::max(0.0, 1.0 - center.post_elastic.s * center.post_elastic.s));
    return std::max(kStencilStep * std::min({1.0, c0, c1}), 1e-10);
}

double CollisionMap::reversibility_residual(PhasePoint x) const {
    const CollisionRecord rec = step(x);
    const PhasePoint back = twist_.apply(table_, {rec.post.r, -rec.post.s});
    const PhasePoint w = apply_flight(back);
    const double dr = table_.scatterer_at(x.r) == table_.scatterer_at(w.r)
                          ? table_.arc_difference(x.r, w.r)
                          : wrapped_difference(x.r, w.r, table_.length());
    return std::hypot(dr, w.s + x.s);
}

}  // namespace lorentz
