#pragma once

#include "fingersim/errors.hpp"

namespace fingersim::geometry {

// Planar tendon routing around one revolute joint.
//
// The cable leaves an anchor point on the proximal link, wraps a circular
// pulley ("generatrix" post) mounted on the distal link, and continues down
// the finger.  Working in the joint plane with the joint axis at the origin:
//
//   * the anchor sits at distance `anchor_offset_len` from the axis, along a
//     ray rotated by `anchor_angle` from the proximal link axis;
//   * the pulley center sits at distance `pulley_offset_len` from the axis,
//     along a ray rotated by `pulley_angle` from the distal link axis.
//
// As the joint flexes, the angle between the two rays changes, the cable's
// tangent line to the pulley circle moves, and with it the perpendicular
// distance from the joint axis to the cable: the moment arm that converts
// cable tension into joint torque.
struct TendonRouting {
    double pulley_offset_len = 0.0;  // joint axis -> pulley center [m], > 0
    double anchor_offset_len = 0.0;  // joint axis -> cable anchor  [m], > 0
    double anchor_angle = 0.0;       // anchor ray offset from proximal link axis [rad]
    double pulley_angle = 0.0;       // pulley ray offset from distal link axis [rad]
    double pulley_radius = 0.0;      // pulley circle radius [m], > 0 and < both offsets

    // Throws ValidationError if any length is non-positive, non-finite, or the
    // pulley circle could swallow the joint axis or the anchor ray.
    void validate() const;
};

struct JointLimits {
    double lo = 0.0;  // [rad]
    double hi = 0.0;  // [rad], must be > lo

    void validate() const;
    bool contains(double q) const { return q >= lo && q <= hi; }
};

// Everything the moment-arm construction produces for one joint angle.
struct MomentArmResult {
    double chord_len = 0.0;            // anchor -> pulley center distance [m]
    double anchor_vertex_angle = 0.0;  // at the anchor: between rays to joint axis and pulley center [rad]
    double wrap_angle = 0.0;           // at the anchor: between pulley-center ray and tangent cable [rad]
    double cable_angle = 0.0;          // cable line direction relative to the anchor ray frame [rad]
    double moment_arm = 0.0;           // perpendicular distance, joint axis -> cable line [m]
};

// Chord length below which the construction is reported as degenerate rather
// than evaluated (anchor essentially coincides with the pulley center).
inline constexpr double kDegenerateChordLen = 1e-12;

// Angle between the anchor ray and the pulley ray at joint angle q.
double separation_angle(const TendonRouting& r, double q);

// Distance from the anchor to the pulley center at joint angle q.
double chord_length(const TendonRouting& r, double q);

// Moment arm via an explicit 2-D construction: place anchor and pulley center
// in the joint plane, build the tangent line from the anchor to the pulley
// circle on the side facing away from the joint axis, and measure the
// perpendicular distance from the axis to that line.  This is the default
// production path.
//
// Throws NumericError if the chord is degenerate or shorter than the pulley
// radius (the tangent line does not exist: the anchor is inside the circle).
MomentArmResult moment_arm(const TendonRouting& r, double q);

// Same quantities computed by the closed-form triangle chain (law of cosines
// for the chord, arcsines for the interior and wrap angles, sine rule for the
// arm).  Kept as an independently-derived cross-check; the CLI can emit the
// difference between the two routes.  Throws NumericError when an arcsine
// argument leaves [-1, 1], naming the offending quantity.
MomentArmResult moment_arm_sine_rule(const TendonRouting& r, double q);

// Joint torque produced by pulling the cable with `tension` newtons at joint
// angle q.  Tension must be finite and >= 0 (cables cannot push).
double external_torque(const TendonRouting& r, double q, double tension);

}  // namespace fingersim::geometry
