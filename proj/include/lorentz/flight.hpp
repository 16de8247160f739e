#pragma once

#include <array>
#include <cstddef>

#include "lorentz/forces.hpp"
#include "lorentz/geometry.hpp"

namespace lorentz {

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double event_tol = 1e-11;
    double max_time = 10.0;
    double grazing_tol = 1e-9;
    /// A hit is flagged tangential when |sin of incidence| > 1 - tangential_tol.
    double tangential_tol = 1e-9;
    /// Zero-force flights are straight lines; use exact ray-circle intersection.
    bool analytic_zero_force = true;
};

/// Point of the flow phase space: position in the universal cover R² and the
/// direction angle θ of the velocity.
struct FlowState {
    Vec2 position;
    double theta = 0.0;

    /// Lattice cell holding the position.
    std::array<long, 2> cell() const;
};

struct FlightResult {
    double tau = 0.0;
    FlowState end_state;      ///< at the collision instant, before reflection
    BoundaryPoint hit;        ///< hit point in the unit-cell frame
    Vec2 image_offset;        ///< lattice offset of the scatterer image that was hit
    Vec2 displacement;        ///< end position minus start position in R²
    double integral_phtheta = 0.0;  ///< ∫ p·h_θ dt over the flight
    double incidence_s = 0.0;
    bool tangential = false;
    std::size_t steps = 0;
    /// Smallest signed distance to any scatterer seen at accepted step ends.
    double min_signed_distance = 0.0;
};

/// Advances the flow until the first collision.
///
/// Throws MaxTimeError (no collision within cfg.max_time), TunnelError (an
/// accepted step ends inside a scatterer without a located crossing) or
/// StiffnessError (step size underflow).
FlightResult integrate_flight(const FlowState& start, const ForceModel& force,
                              const GeometryTable& table, const IntegratorConfig& cfg);

/// Specular reflection v -> v - 2(n·v)n at the hit point. Throws GrazingError
/// when |n·v| < grazing_tol.
FlowState elastic_reflect(const FlowState& incidence, const BoundaryPoint& hit,
                          double grazing_tol = 1e-9);

/// (r, s) of an outgoing state, s = sin φ with φ measured from the inward
/// normal toward the clockwise tangent.
PhasePoint to_collision_coords(const FlowState& outgoing, const BoundaryPoint& hit);

/// Outgoing flow state at (r, s), positioned in the unit-cell frame.
FlowState from_collision_coords(const GeometryTable& table, PhasePoint x);

/// Clockwise unit tangent at a boundary point with inward normal n.
constexpr Vec2 clockwise_tangent(Vec2 n) { return {n.y, -n.x}; }

/// Upper bound on |h| used to widen the chord test against curved paths.
double curvature_bound(const ForceModel& force);

/// Upper bound on the speed on the invariant level set.
double speed_bound(const ForceModel& force);

}  // namespace lorentz
