#include "lorentz/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lorentz/errors.hpp"
#include "lorentz/rng.hpp"

namespace lorentz {

namespace {

double reduce_unit(double v) {
    double w = v - std::floor(v);
    return w >= 1.0 ? 0.0 : w;
}

}  // namespace

GeometryTable GeometryTable::build(std::vector<Scatterer> specs) {
    if (specs.empty()) throw EmptyTableError();

    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto& s = specs[i];
        if (!(s.radius > 0.0 && s.radius < 0.5)) {
            std::ostringstream os;
            os << "scatterer " << i << ": radius " << s.radius
               << " outside (0, 0.5); a disk this large overlaps its own periodic image";
            throw RangeError(os.str());
        }
        if (!std::isfinite(s.center.x) || !std::isfinite(s.center.y)) {
            throw RangeError("scatterer " + std::to_string(i) + ": non-finite center");
        }
        s.center = {reduce_unit(s.center.x), reduce_unit(s.center.y)};
    }

    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        for (std::size_t j = i; j < specs.size(); ++j) {
            for (int ox = -1; ox <= 1; ++ox) {
                for (int oy = -1; oy <= 1; ++oy) {
                    if (i == j && ox == 0 && oy == 0) continue;
                    const Vec2 d = specs[i].center - (specs[j].center + Vec2{double(ox), double(oy)});
                    const double g = norm(d) - specs[i].radius - specs[j].radius;
                    if (g <= 0.0) {
                        std::ostringstream os;
                        os << "scatterers " << i << " and " << j << " overlap at lattice offset ("
                           << ox << "," << oy << "): center distance " << norm(d)
                           << " <= radius sum " << specs[i].radius + specs[j].radius;
                        throw OverlapError(i, j, ox, oy, os.str());
                    }
                    gap = std::min(gap, g);
                }
            }
        }
    }

    GeometryTable t;
    t.scatterers_ = std::move(specs);
    t.min_gap_ = gap;
    double acc = 0.0;
    for (const auto& s : t.scatterers_) {
        t.offsets_.push_back(acc);
        const double len = kTwoPi * s.radius;
        t.lengths_.push_back(len);
        acc += len;
    }
    t.total_length_ = acc;
    return t;
}

std::size_t GeometryTable::scatterer_at(double r) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), r);
    return static_cast<std::size_t>(std::distance(offsets_.begin(), it)) - 1;
}

BoundaryPoint GeometryTable::boundary_point(double r) const {
    if (!(r >= 0.0 && r < total_length_)) {
        std::ostringstream os;
        os << "arclength " << r << " outside [0, " << total_length_ << ")";
        throw RangeError(os.str());
    }
    const std::size_t i = scatterer_at(r);
    return boundary_point_local(i, r - offsets_[i]);
}

BoundaryPoint GeometryTable::boundary_point_local(std::size_t i, double u) const {
    const Scatterer& sc = scatterers_[i];
    // Clockwise from the east: polar angle decreases with arclength.
    const double alpha = -u / sc.radius;
    const Vec2 n{std::cos(alpha), std::sin(alpha)};
    BoundaryPoint bp;
    bp.scatterer = i;
    bp.r = offsets_[i] + u;
    bp.position = sc.center + sc.radius * n;
    bp.normal = n;
    bp.curvature = 1.0 / sc.radius;
    return bp;
}

double GeometryTable::locate_r(std::size_t i, Vec2 position) const {
    if (i >= scatterers_.size()) throw RangeError("scatterer index out of range");
    const Scatterer& sc = scatterers_[i];
    const Vec2 d = position - sc.center;
    const double dist = norm(d);
    if (std::abs(dist - sc.radius) > 1e-8) {
        std::ostringstream os;
        os << "point at distance " << dist << " from center of scatterer " << i
           << " (radius " << sc.radius << ")";
        throw NotOnBoundaryError(os.str());
    }
    double u = -std::atan2(d.y, d.x) * sc.radius;
    if (u < 0.0) u += lengths_[i];
    if (u >= lengths_[i]) u -= lengths_[i];
    return offsets_[i] + u;
}

double GeometryTable::shift_along(double r, double du) const {
    const std::size_t i = scatterer_at(r);
    const double len = lengths_[i];
    double u = std::fmod(r - offsets_[i] + du, len);
    if (u < 0.0) u += len;
    if (u >= len) u = 0.0;
    return offsets_[i] + u;
}

double GeometryTable::arc_difference(double a, double b) const {
    const double len = lengths_[scatterer_at(a)];
    double d = std::fmod(b - a, len);
    if (d > 0.5 * len) d -= len;
    if (d <= -0.5 * len) d += len;
    return d;
}

double GeometryTable::min_gap() const { return min_gap_; }

std::vector<std::pair<double, double>> chords_along(const GeometryTable& table, Vec2 origin,
                                                    Vec2 dir, double t_max) {
    std::vector<std::pair<double, double>> chords;
    const Vec2 end = origin + t_max * dir;
    const int x0 = static_cast<int>(std::floor(std::min(origin.x, end.x))) - 1;
    const int x1 = static_cast<int>(std::floor(std::max(origin.x, end.x))) + 1;
    const int y0 = static_cast<int>(std::floor(std::min(origin.y, end.y))) - 1;
    const int y1 = static_cast<int>(std::floor(std::max(origin.y, end.y))) + 1;
    for (const auto& sc : table.scatterers()) {
        const double r2 = sc.radius * sc.radius;
        for (int cx = x0; cx <= x1; ++cx) {
            for (int cy = y0; cy <= y1; ++cy) {
                const Vec2 c = sc.center + Vec2{double(cx), double(cy)};
                const Vec2 w = origin - c;
                const double b = dot(w, dir);
                const double disc = b * b - (dot(w, w) - r2);
                if (disc <= 0.0) continue;
                const double sq = std::sqrt(disc);
                const double t_in = -b - sq;
                const double t_out = -b + sq;
                if (t_out < 0.0 || t_in > t_max) continue;
                chords.emplace_back(std::max(t_in, 0.0), std::min(t_out, t_max));
            }
        }
    }
    std::sort(chords.begin(), chords.end());
    return chords;
}

namespace {

struct LineScan {
    double first_hit;      // distance from origin to the first chord (0 if inside)
    double longest_gap;    // longest gap between consecutive chords
};

LineScan scan_line(const GeometryTable& table, Vec2 origin, Vec2 dir, double t_max) {
    const auto chords = chords_along(table, origin, dir, t_max);
    LineScan out{std::numeric_limits<double>::infinity(), 0.0};
    if (chords.empty()) return out;
    out.first_hit = chords.front().first;
    double reach = chords.front().second;
    for (std::size_t k = 1; k < chords.size(); ++k) {
        if (chords[k].first > reach) out.longest_gap = std::max(out.longest_gap, chords[k].first - reach);
        reach = std::max(reach, chords[k].second);
    }
    return out;
}

}  // namespace

HorizonReport check_finite_horizon(const GeometryTable& table, int n_offsets, std::uint64_t seed) {
    HorizonReport rep;
    rep.finite = true;
    // Lines are scanned over three search lengths so that full gaps between
    // chords are observed, not only the leading partial one.
    const double scan = 3.0 * kHorizonSearchLength;

    auto cast = [&](Vec2 origin, Vec2 dir) {
        ++rep.rays_cast;
        const LineScan ls = scan_line(table, origin, dir, scan);
        rep.tau_max_empirical = std::max(rep.tau_max_empirical, ls.longest_gap);
        if (ls.first_hit > kHorizonSearchLength && rep.finite) {
            rep.finite = false;
            rep.violating_direction = dir;
            rep.violating_origin = origin;
        }
    };

    const int dirs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
    for (const auto& d : dirs) {
        const double len = std::hypot(double(d[0]), double(d[1]));
        const Vec2 dir{d[0] / len, d[1] / len};
        const Vec2 perp{-dir.y, dir.x};
        // Lattice lines along (a,b) repeat with transversal period 1/|(a,b)|.
        const double period = 1.0 / len;
        for (int k = 0; k < n_offsets; ++k) {
            const double off = (k + 0.5) / n_offsets * period;
            cast(off * perp, dir);
        }
    }

    RngStream rng(seed, 0x686f72697a6f6eull);
    for (int k = 0; k < n_offsets; ++k) {
        const double ang = rng.uniform(0.0, kTwoPi);
        const Vec2 origin{rng.uniform(), rng.uniform()};
        cast(origin, unit_from_angle(ang));
    }
    return rep;
}

}  // namespace lorentz
