#include "lorentz/flight.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lorentz/errors.hpp"

namespace lorentz {

std::array<long, 2> FlowState::cell() const {
    return {static_cast<long>(std::floor(position.x)), static_cast<long>(std::floor(position.y))};
}

double curvature_bound(const ForceModel& force) {
    const double eps = std::abs(force.epsilon());
    switch (force.kind()) {
        case ForceKind::Zero: return 0.0;
        case ForceKind::Conservative: {
            const auto& pot = std::get<ForceModel::Conservative>(force.params()).potential;
            if (pot.shape == Potential::Shape::Constant) return 0.0;
            const double a = std::abs(pot.amplitude);
            const double pmin2 = std::max(1.0 - 2.0 * eps * a / (4.0 * kPi * kPi), kMinSpeed * kMinSpeed);
            return eps * a / kTwoPi / pmin2;
        }
        case ForceKind::Isokinetic: {
            const auto& f = std::get<ForceModel::Isokinetic>(force.params()).field;
            if (f.shape == IsokineticField::Shape::Magnetic) return eps;
            return eps * (1.0 + std::abs(f.modulation)) * std::hypot(f.e1, f.e2);
        }
        case ForceKind::ThermostattedField: {
            const auto& t = std::get<ForceModel::ThermostattedField>(force.params());
            return eps * (std::hypot(t.e1, t.e2) + std::sqrt(2.0) * std::abs(t.modulation));
        }
        case ForceKind::ConstantThermostatted: {
            const auto& t = std::get<ForceModel::ConstantThermostatted>(force.params());
            return eps * std::hypot(t.e1, t.e2);
        }
    }
    return 0.0;
}

double speed_bound(const ForceModel& force) {
    if (force.kind() != ForceKind::Conservative) return 1.0;
    const auto& pot = std::get<ForceModel::Conservative>(force.params()).potential;
    double umax = std::abs(pot.amplitude);
    if (pot.shape == Potential::Shape::Cosine2d) umax /= 4.0 * kPi * kPi;
    return std::sqrt(1.0 + 2.0 * std::abs(force.epsilon()) * umax);
}

namespace {

using State = std::array<double, 4>;  // x, y, θ, ∫ p h_θ dt

struct Image {
    std::size_t scatterer;
    Vec2 center;  // in R²
    Vec2 offset;  // lattice offset
    double radius;
};

// Scatterer images in the 3x3 block of cells around a point.
struct ImageSet {
    std::array<Image, 9 * 8> small{};
    std::vector<Image> large;
    std::size_t count = 0;

    void gather(const GeometryTable& table, Vec2 q) {
        const double cx = std::floor(q.x), cy = std::floor(q.y);
        count = 0;
        large.clear();
        const bool use_small = table.size() <= 8;
        for (std::size_t i = 0; i < table.size(); ++i) {
            const Scatterer& sc = table.scatterer(i);
            for (int ox = -1; ox <= 1; ++ox) {
                for (int oy = -1; oy <= 1; ++oy) {
                    const Vec2 off{cx + ox, cy + oy};
                    Image im{i, sc.center + off, off, sc.radius};
                    if (use_small) small[count] = im;
                    else large.push_back(im);
                    ++count;
                }
            }
        }
    }
    const Image& operator[](std::size_t k) const { return large.empty() ? small[k] : large[k]; }
};

inline double signed_distance(const Image& im, Vec2 q) { return norm(q - im.center) - im.radius; }

class Stepper {
public:
    Stepper(const ForceModel& f) : force_(f) {}

    State rhs(const State& y) const {
        const double c = std::cos(y[2]), s = std::sin(y[2]);
        const FlowRates fr = force_.rates(y[0], y[1], y[2], c, s);
        return {fr.speed * c, fr.speed * s, fr.speed * fr.h, fr.speed * fr.h_theta};
    }

    // One Dormand–Prince 5(4) step from y (with k1 = f(y)). Returns the 5th
    // order solution; err receives the embedded error estimate and k7 the
    // derivative at the new point (FSAL).
    State step(const State& y, const State& k1, double h, State* err, State* k7_out) const {
        constexpr double a21 = 1.0 / 5.0;
        constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
        constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
        constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                         a54 = -212.0 / 729.0;
        constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                         a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
        constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                         b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
        constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                         e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
        State t{}, k2{}, k3{}, k4{}, k5{}, k6{}, out{};
        for (int i = 0; i < 4; ++i) t[i] = y[i] + h * a21 * k1[i];
        k2 = rhs(t);
        for (int i = 0; i < 4; ++i) t[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        k3 = rhs(t);
        for (int i = 0; i < 4; ++i) t[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        k4 = rhs(t);
        for (int i = 0; i < 4; ++i)
            t[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        k5 = rhs(t);
        for (int i = 0; i < 4; ++i)
            t[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        k6 = rhs(t);
        for (int i = 0; i < 4; ++i)
            out[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        if (err || k7_out) {
            const State k7 = rhs(out);
            if (err) {
                for (int i = 0; i < 4; ++i)
                    (*err)[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                                     e7 * k7[i]);
            }
            if (k7_out) *k7_out = k7;
        }
        return out;
    }

private:
    const ForceModel& force_;
};

FlightResult finish(const FlowState& start, const State& y_end, double tau, const Image& im,
                    const GeometryTable& table, const IntegratorConfig& cfg) {
    FlightResult res;
    res.tau = tau;
    res.end_state.position = {y_end[0], y_end[1]};
    res.end_state.theta = wrap_angle(y_end[2]);
    res.displacement = res.end_state.position - start.position;
    res.integral_phtheta = y_end[3];
    res.image_offset = im.offset;

    const Vec2 local = res.end_state.position - im.offset;
    const Vec2 d = local - table.scatterer(im.scatterer).center;
    double u = -std::atan2(d.y, d.x) * im.radius;
    const double len = table.arc_length(im.scatterer);
    if (u < 0.0) u += len;
    if (u >= len) u -= len;
    res.hit = table.boundary_point_local(im.scatterer, u);

    const Vec2 v = unit_from_angle(res.end_state.theta);
    res.incidence_s = dot(v, clockwise_tangent(res.hit.normal));
    res.tangential = std::abs(res.incidence_s) > 1.0 - cfg.tangential_tol;
    return res;
}

FlightResult straight_flight(const FlowState& start, const GeometryTable& table,
                             const IntegratorConfig& cfg) {
    const Vec2 v = unit_from_angle(start.theta);
    const Vec2 q0 = start.position;
    constexpr double chunk = 1.0;
    for (double t0 = 0.0; t0 < cfg.max_time; t0 += chunk) {
        const double t1 = std::min(t0 + chunk, cfg.max_time);
        const Vec2 a = q0 + t0 * v, b = q0 + t1 * v;
        const int x0 = static_cast<int>(std::floor(std::min(a.x, b.x))) - 1;
        const int x1 = static_cast<int>(std::floor(std::max(a.x, b.x))) + 1;
        const int y0 = static_cast<int>(std::floor(std::min(a.y, b.y))) - 1;
        const int y1 = static_cast<int>(std::floor(std::max(a.y, b.y))) + 1;
        double best = std::numeric_limits<double>::infinity();
        Image best_im{};
        for (std::size_t i = 0; i < table.size(); ++i) {
            const Scatterer& sc = table.scatterer(i);
            const double r2 = sc.radius * sc.radius;
            for (int cx = x0; cx <= x1; ++cx) {
                for (int cy = y0; cy <= y1; ++cy) {
                    const Vec2 off{double(cx), double(cy)};
                    const Vec2 w = q0 - (sc.center + off);
                    const double bq = dot(w, v);
                    const double cq = dot(w, w) - r2;
                    // Departing from (or sitting on) this circle, moving outward: skip.
                    if (cq <= 1e-12 && bq >= 0.0) continue;
                    const double disc = bq * bq - cq;
                    if (disc <= 0.0) continue;
                    const double sq = std::sqrt(disc);
                    // Numerically stable smaller root.
                    const double t_in = (bq < 0.0) ? cq / (-bq + sq) : -bq - sq;
                    if (t_in <= 0.0 || t_in < t0 - 1e-12 || t_in > t1) continue;
                    if (t_in < best) {
                        best = t_in;
                        best_im = Image{i, sc.center + off, off, sc.radius};
                    }
                }
            }
        }
        if (std::isfinite(best)) {
            const Vec2 q = q0 + best * v;
            const State y{q.x, q.y, start.theta, 0.0};
            FlightResult res = finish(start, y, best, best_im, table, cfg);
            res.steps = 1;
            res.min_signed_distance = 0.0;
            return res;
        }
    }
    std::ostringstream os;
    os << "no collision within " << cfg.max_time << " from (" << q0.x << "," << q0.y
       << ") theta=" << start.theta;
    throw MaxTimeError(os.str());
}

}  // namespace

FlightResult integrate_flight(const FlowState& start, const ForceModel& force,
                              const GeometryTable& table, const IntegratorConfig& cfg) {
    if (cfg.analytic_zero_force && force.is_zero()) return straight_flight(start, table, cfg);

    const Stepper stepper(force);
    const double pmax = speed_bound(force);
    const double kappa = curvature_bound(force);
    const double near_cap = table.min_gap() / (2.0 * pmax);

    State y{start.position.x, start.position.y, start.theta, 0.0};
    State k1 = stepper.rhs(y);
    double t = 0.0;
    double h = near_cap;
    std::size_t steps = 0;
    double min_dist = std::numeric_limits<double>::infinity();

    ImageSet images;
    images.gather(table, start.position);
    // The image the flight departs from cannot be hit again: the path is less
    // curved than any scatterer.
    std::size_t departing = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < images.count; ++k) {
        if (std::abs(signed_distance(images[k], start.position)) < 1e-9) departing = k;
    }
    Vec2 gathered_cell{std::floor(start.position.x), std::floor(start.position.y)};

    auto err_norm = [&](const State& y0, const State& y1, const State& e) {
        double acc = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
            const double r = e[i] / sc;
            acc += r * r;
        }
        return std::sqrt(acc / 4.0);
    };

    while (true) {
        if (t >= cfg.max_time) {
            std::ostringstream os;
            os << "no collision within " << cfg.max_time << " from (" << start.position.x << ","
               << start.position.y << ") theta=" << start.theta;
            throw MaxTimeError(os.str());
        }
        const Vec2 q{y[0], y[1]};
        const Vec2 cell{std::floor(q.x), std::floor(q.y)};
        if (!(cell == gathered_cell)) {
            const Image dep = departing < images.count ? images[departing] : Image{};
            const bool had_dep = departing < images.count;
            images.gather(table, q);
            gathered_cell = cell;
            departing = std::numeric_limits<std::size_t>::max();
            if (had_dep) {
                for (std::size_t k = 0; k < images.count; ++k)
                    if (images[k].scatterer == dep.scatterer && images[k].offset == dep.offset) departing = k;
            }
        }
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < images.count; ++k) {
            if (k == departing) continue;
            dmin = std::min(dmin, signed_distance(images[k], q));
        }
        if (steps > 0) min_dist = std::min(min_dist, dmin);
        if (dmin < -cfg.event_tol) {
            std::ostringstream os;
            os << "flight state inside a scatterer (distance " << dmin << ") at t=" << t;
            throw TunnelError(os.str());
        }
        // Far from every scatterer the step may not reach any of them; near
        // them it is capped at half the minimal gap.
        const double cap = std::max(0.9 * dmin / pmax, near_cap);
        h = std::min({h, cap, cfg.max_time - t + near_cap});

        State e{}, k7{};
        const State y1 = stepper.step(y, k1, h, &e, &k7);
        const double en = err_norm(y, y1, e);
        if (!(en <= 1.0)) {
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
            if (h < 1e-14) throw StiffnessError("step size underflow in flight integration");
            continue;
        }
        ++steps;

        // Event search only when the step can reach a scatterer.
        const double path = pmax * h;
        if (path >= 0.9 * dmin) {
            const Vec2 q1{y1[0], y1[1]};
            const double margin = 0.25 * kappa * path * path + 1e-12;
            double best_t = std::numeric_limits<double>::infinity();
            std::size_t best_k = 0;

            auto dist_at = [&](const Image& im, double s, State* ys) {
                const State yy = (s == h) ? y1 : stepper.step(y, k1, s, nullptr, nullptr);
                if (ys) *ys = yy;
                return signed_distance(im, {yy[0], yy[1]});
            };

            for (std::size_t k = 0; k < images.count; ++k) {
                if (k == departing) continue;
                const Image& im = images[k];
                const Vec2 seg = q1 - q;
                const double seg2 = dot(seg, seg);
                double frac = seg2 > 0.0 ? dot(im.center - q, seg) / seg2 : 0.0;
                frac = std::clamp(frac, 0.0, 1.0);
                const double closest = norm(q + frac * seg - im.center) - im.radius;
                if (closest > margin) continue;

                double hi = -1.0;  // time with d <= 0 bracketing the first crossing
                if (signed_distance(im, q1) <= 0.0) {
                    hi = h;
                } else {
                    // Possible clip through the disk inside the step: minimize d.
                    double lo_s = 0.0, hi_s = h;
                    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
                    double a = hi_s - gr * (hi_s - lo_s), b = lo_s + gr * (hi_s - lo_s);
                    double fa = dist_at(im, a, nullptr), fb = dist_at(im, b, nullptr);
                    for (int it = 0; it < 60 && hi_s - lo_s > 1e-13 * h; ++it) {
                        if (fa <= 0.0) { hi = a; break; }
                        if (fb <= 0.0) { hi = b; break; }
                        if (fa < fb) {
                            hi_s = b; b = a; fb = fa;
                            a = hi_s - gr * (hi_s - lo_s);
                            fa = dist_at(im, a, nullptr);
                        } else {
                            lo_s = a; a = b; fa = fb;
                            b = lo_s + gr * (hi_s - lo_s);
                            fb = dist_at(im, b, nullptr);
                        }
                    }
                }
                if (hi < 0.0 || hi >= best_t) continue;

                // Newton from the outside end; d is convex along near-straight
                // paths so iterates approach the first root monotonically.
                double lo = 0.0, up = hi;
                double s = 0.0;
                State ys = y;
                double d = signed_distance(im, q);
                for (int it = 0; it < 60; ++it) {
                    const Vec2 qq{ys[0], ys[1]};
                    const Vec2 rad = qq - im.center;
                    const double rn = norm(rad);
                    const FlowRates fr = force.rates(ys[0], ys[1], ys[2]);
                    const double dd = fr.speed * dot(rad, unit_from_angle(ys[2])) / rn;
                    double s_new = (dd < 0.0) ? s - d / dd : 0.5 * (lo + up);
                    if (!(s_new > lo && s_new < up)) s_new = 0.5 * (lo + up);
                    const double d_new = dist_at(im, s_new, &ys);
                    if (d_new > 0.0) lo = s_new; else up = s_new;
                    const double ds = std::abs(s_new - s);
                    s = s_new;
                    d = d_new;
                    if (std::abs(d) <= 1e-15 || ds <= 1e-16 * (1.0 + t + s) || up - lo <= 1e-16 * (1.0 + t)) break;
                }
                if (std::abs(d) > cfg.event_tol) {
                    std::ostringstream os;
                    os << "event refinement stalled at distance " << d;
                    throw TunnelError(os.str());
                }
                if (s < best_t) {
                    best_t = s;
                    best_k = k;
                }
            }
            if (std::isfinite(best_t)) {
                const State ys = stepper.step(y, k1, best_t, nullptr, nullptr);
                FlightResult res = finish(start, ys, t + best_t, images[best_k], table, cfg);
                res.steps = steps;
                res.min_signed_distance = std::min(min_dist, 0.0);
                return res;
            }
        }

        t += h;
        y = y1;
        k1 = k7;
        h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(en, 1e-30), -0.2)));
    }
}

FlowState elastic_reflect(const FlowState& incidence, const BoundaryPoint& hit, double grazing_tol) {
    const Vec2 v = unit_from_angle(incidence.theta);
    const double nv = dot(hit.normal, v);
    if (std::abs(nv) < grazing_tol) {
        std::ostringstream os;
        os << "tangential collision: |n.v| = " << std::abs(nv) << " at r = " << hit.r;
        throw GrazingError(os.str());
    }
    if (nv > 0.0) throw RangeError("reflection requested for an outgoing velocity");
    const Vec2 out = v - 2.0 * nv * hit.normal;
    FlowState s = incidence;
    s.theta = wrap_angle(std::atan2(out.y, out.x));
    return s;
}

PhasePoint to_collision_coords(const FlowState& outgoing, const BoundaryPoint& hit) {
    const Vec2 v = unit_from_angle(outgoing.theta);
    const double s = std::clamp(dot(v, clockwise_tangent(hit.normal)), -1.0, 1.0);
    return {hit.r, s};
}

FlowState from_collision_coords(const GeometryTable& table, PhasePoint x) {
    const BoundaryPoint bp = table.boundary_point(x.r);
    const double s = std::clamp(x.s, -1.0, 1.0);
    const double c = std::sqrt(std::max(0.0, 1.0 - s * s));
    const Vec2 v = c * bp.normal + s * clockwise_tangent(bp.normal);
    return {bp.position, wrap_angle(std::atan2(v.y, v.x))};
}

}  // namespace lorentz
