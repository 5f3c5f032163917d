#include "fingersim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace fingersim::geometry {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw ValidationError(fmt::format("tendon routing: {} must be finite, got {}", name, v));
    }
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

Vec2 rotate(Vec2 v, double angle) {
    double c = std::cos(angle);
    double s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

void check_chord(const TendonRouting& r, double chord) {
    if (chord < kDegenerateChordLen) {
        throw NumericError(fmt::format(
            "tendon geometry degenerate: anchor-to-pulley chord {} m is below {} m",
            chord, kDegenerateChordLen));
    }
    if (chord < r.pulley_radius) {
        throw NumericError(fmt::format(
            "tangent line undefined: anchor-to-pulley chord {} m is shorter than the "
            "pulley radius {} m (anchor inside the pulley circle)",
            chord, r.pulley_radius));
    }
}

}  // namespace

void TendonRouting::validate() const {
    require_finite(pulley_offset_len, "pulley_offset_len");
    require_finite(anchor_offset_len, "anchor_offset_len");
    require_finite(anchor_angle, "anchor_angle");
    require_finite(pulley_angle, "pulley_angle");
    require_finite(pulley_radius, "pulley_radius");
    if (pulley_offset_len <= 0.0) {
        throw ValidationError(fmt::format(
            "tendon routing: pulley_offset_len must be > 0, got {}", pulley_offset_len));
    }
    if (anchor_offset_len <= 0.0) {
        throw ValidationError(fmt::format(
            "tendon routing: anchor_offset_len must be > 0, got {}", anchor_offset_len));
    }
    if (pulley_radius <= 0.0) {
        throw ValidationError(fmt::format(
            "tendon routing: pulley_radius must be > 0, got {}", pulley_radius));
    }
    if (pulley_radius >= pulley_offset_len || pulley_radius >= anchor_offset_len) {
        throw ValidationError(fmt::format(
            "tendon routing: pulley_radius {} must be smaller than both offset lengths "
            "({}, {}) so the pulley circle cannot reach the joint axis or the anchor ray",
            pulley_radius, pulley_offset_len, anchor_offset_len));
    }
}

void JointLimits::validate() const {
    require_finite(lo, "joint limit lo");
    require_finite(hi, "joint limit hi");
    if (hi <= lo) {
        throw ValidationError(fmt::format("joint limits: hi ({}) must be > lo ({})", hi, lo));
    }
}

double separation_angle(const TendonRouting& r, double q) {
    return q - r.anchor_angle + r.pulley_angle;
}

double chord_length(const TendonRouting& r, double q) {
    double sep = separation_angle(r, q);
    double lp = r.pulley_offset_len;
    double la = r.anchor_offset_len;
    double sq = lp * lp + la * la - 2.0 * lp * la * std::cos(sep);
    return std::sqrt(std::max(sq, 0.0));
}

MomentArmResult moment_arm(const TendonRouting& r, double q) {
    if (!std::isfinite(q)) {
        throw ValidationError(fmt::format("joint angle must be finite, got {}", q));
    }
    double sep = separation_angle(r, q);

    // Joint axis at the origin, anchor ray along +x.
    Vec2 axis{0.0, 0.0};
    Vec2 anchor{r.anchor_offset_len, 0.0};
    Vec2 pulley{r.pulley_offset_len * std::cos(sep), r.pulley_offset_len * std::sin(sep)};

    Vec2 d = pulley - anchor;  // anchor -> pulley center
    double chord = norm(d);
    check_chord(r, chord);

    Vec2 to_axis = axis - anchor;
    double anchor_vertex = std::atan2(std::abs(cross(to_axis, d)), dot(to_axis, d));
    double wrap = std::asin(std::min(r.pulley_radius / chord, 1.0));

    // The cable leaves the anchor tangent to the pulley circle on the side
    // facing away from the joint axis: rotate the chord direction by the wrap
    // angle, away from the axis.
    double side = cross(to_axis, d) >= 0.0 ? 1.0 : -1.0;
    Vec2 chord_dir{d.x / chord, d.y / chord};
    Vec2 cable_dir = rotate(chord_dir, side * wrap);

    MomentArmResult out;
    out.chord_len = chord;
    out.anchor_vertex_angle = anchor_vertex;
    out.wrap_angle = wrap;
    out.cable_angle = anchor_vertex + wrap - r.anchor_angle;
    // Perpendicular distance from the joint axis to the line through the
    // anchor with direction cable_dir.
    out.moment_arm = std::abs(cross(cable_dir, to_axis));
    return out;
}

MomentArmResult moment_arm_sine_rule(const TendonRouting& r, double q) {
    if (!std::isfinite(q)) {
        throw ValidationError(fmt::format("joint angle must be finite, got {}", q));
    }
    double sep = separation_angle(r, q);
    double lp = r.pulley_offset_len;
    double la = r.anchor_offset_len;

    double chord = chord_length(r, q);
    check_chord(r, chord);

    // Interior angle at the anchor between the joint-axis ray and the chord,
    // via the sine rule in the joint/pulley/anchor triangle.  The sine rule
    // alone cannot distinguish acute from obtuse, so the cosine sign from the
    // law of cosines resolves the ambiguity.
    double sin_arg = lp * std::sin(sep) / chord;
    if (std::abs(sin_arg) > 1.0 + 1e-12) {
        throw NumericError(fmt::format(
            "anchor interior angle undefined: sine-rule argument {} is outside [-1, 1]",
            sin_arg));
    }
    double anchor_vertex = std::asin(std::clamp(std::abs(sin_arg), 0.0, 1.0));
    double cos_sign = chord * chord + la * la - lp * lp;
    if (cos_sign < 0.0) {
        anchor_vertex = std::numbers::pi - anchor_vertex;
    }

    double wrap_arg = r.pulley_radius / chord;
    if (wrap_arg > 1.0 + 1e-12) {
        throw NumericError(fmt::format(
            "wrap angle undefined: tangent arcsine argument {} exceeds 1 "
            "(pulley radius {} m, chord {} m)",
            wrap_arg, r.pulley_radius, chord));
    }
    double wrap = std::asin(std::min(wrap_arg, 1.0));

    MomentArmResult out;
    out.chord_len = chord;
    out.anchor_vertex_angle = anchor_vertex;
    out.wrap_angle = wrap;
    out.cable_angle = anchor_vertex + wrap - r.anchor_angle;
    // The moment arm is the leg of the right triangle formed by the anchor,
    // the joint axis, and the perpendicular foot on the cable line; the sine
    // factor at the foot is unity, leaving anchor offset times the sine of the
    // full angle between the joint-axis ray and the cable.
    out.moment_arm = la * std::abs(std::sin(anchor_vertex + wrap));
    return out;
}

double external_torque(const TendonRouting& r, double q, double tension) {
    if (!std::isfinite(tension) || tension < 0.0) {
        throw ValidationError(fmt::format(
            "cable tension must be finite and >= 0 (cables cannot push), got {}", tension));
    }
    return tension * moment_arm(r, q).moment_arm;
}

}  // namespace fingersim::geometry
