#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lorentz/vec2.hpp"

namespace lorentz {

/// A disk scatterer; the center is stored reduced into the unit cell.
struct Scatterer {
    Vec2 center;
    double radius = 0.0;
};

/// Coordinates (r, s) on the collision space M = [0, L) x [-1, 1]:
/// r is boundary arclength, s = sin φ of the outgoing angle.
struct PhasePoint {
    double r = 0.0;
    double s = 0.0;
};

/// A point of ∂Q with its global arclength coordinate.
struct BoundaryPoint {
    std::size_t scatterer = 0;
    double r = 0.0;
    Vec2 position;       ///< on the scatterer circle, unit-cell frame
    Vec2 normal;         ///< unit normal pointing into Q (away from the disk center)
    double curvature = 0.0;
};

/// Periodic billiard table Q = T² minus a union of disjoint disks.
///
/// Boundary arclength r runs clockwise around each disk starting from its
/// easternmost point, with the disks concatenated in insertion order into a
/// single coordinate r ∈ [0, L). Immutable after construction.
class GeometryTable {
public:
    /// Validates radii and pairwise disjointness over lattice offsets {-1,0,1}².
    /// Throws EmptyTableError, RangeError (radius outside (0, 0.5)) or OverlapError.
    static GeometryTable build(std::vector<Scatterer> specs);

    std::span<const Scatterer> scatterers() const { return scatterers_; }
    std::size_t size() const { return scatterers_.size(); }
    const Scatterer& scatterer(std::size_t i) const { return scatterers_[i]; }

    double length() const { return total_length_; }
    double arc_offset(std::size_t i) const { return offsets_[i]; }
    double arc_length(std::size_t i) const { return lengths_[i]; }

    /// Index of the scatterer owning global arclength r ∈ [0, L).
    std::size_t scatterer_at(double r) const;

    /// Throws RangeError unless 0 <= r < L.
    BoundaryPoint boundary_point(double r) const;

    /// Same as boundary_point but for a known scatterer and local arclength
    /// u ∈ [0, L_i); no range checks.
    BoundaryPoint boundary_point_local(std::size_t i, double u) const;

    /// Inverse of boundary_point. Throws NotOnBoundaryError when the point is
    /// farther than 1e-8 from the circle.
    double locate_r(std::size_t scatterer_index, Vec2 position) const;

    /// Shifts r by du along its own scatterer, wrapping within that arc.
    double shift_along(double r, double du) const;

    /// Signed arclength difference b - a on a shared scatterer, in (-L_i/2, L_i/2].
    double arc_difference(double a, double b) const;

    /// Minimum over pairs and lattice offsets of (center distance - radius sum).
    double min_gap() const;

private:
    std::vector<Scatterer> scatterers_;
    std::vector<double> offsets_;
    std::vector<double> lengths_;
    double total_length_ = 0.0;
    double min_gap_ = 0.0;
};

/// Result of the corridor sampler.
struct HorizonReport {
    bool finite = false;
    /// Longest free path between two scatterers seen on any cast line.
    double tau_max_empirical = 0.0;
    /// Set when finite is false: a ray that travels the full search length
    /// without hitting anything.
    Vec2 violating_direction;
    Vec2 violating_origin;
    std::size_t rays_cast = 0;
};

inline constexpr double kHorizonSearchLength = 4.0;

/// Casts rays along (1,0), (0,1), (1,1), (1,-1) at n_offsets evenly spaced
/// transversal offsets each, plus n_offsets random rays. Finite iff every ray
/// hits within kHorizonSearchLength. This is a sampler, not a proof.
HorizonReport check_finite_horizon(const GeometryTable& table, int n_offsets,
                                   std::uint64_t seed = 42);

/// Parameters t of the chord intervals [t_in, t_out] where the line
/// origin + t·dir (|dir| = 1, 0 <= t <= t_max) runs inside some scatterer image,
/// sorted and merged.
std::vector<std::pair<double, double>> chords_along(const GeometryTable& table, Vec2 origin,
                                                    Vec2 dir, double t_max);

}  // namespace lorentz
