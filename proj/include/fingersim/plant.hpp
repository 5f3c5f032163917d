#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fingersim/errors.hpp"
#include "fingersim/geometry.hpp"
#include "fingersim/muscle.hpp"

namespace fingersim::plant {

// Physical parameters of one simulated finger joint: a rigid link on a
// revolute joint, pulled by one tendon, loaded by a weight hanging at a known
// lever from the axis, with temperature-dependent viscous friction, smoothed
// Coulomb friction, a light return spring, and hard stops.
struct PlantParams {
    double link_inertia = 2e-4;        // link-only inertia about the joint [kg m^2], > 0
    double viscous_friction = 5e-3;    // at 20 deg C [Nm s/rad], >= 0
    double coulomb_friction = 2e-3;    // [Nm], >= 0
    double coulomb_smoothing_vel = 1e-3;  // tanh velocity scale [rad/s], > 0
    double temp_viscous_coeff = -0.005;   // relative viscous change per deg C away from 20
    double weight_mass = 0.0;          // hanging calibration weight [kg], >= 0
    double weight_arm = 0.08;          // axis -> weight lever [m], > 0
    double gravity = 9.81;             // [m/s^2]
    double return_spring_stiffness = 0.01;  // extension spring toward q = 0 [Nm/rad], >= 0
    double fingertip_lever = 0.045;    // axis -> fingertip contact point [m], > 0
    double tension_limit = 150.0;      // cable tension the hardware can carry [N], > 0
    double gear_ratio = 100.0;         // motor turns per capstan turn, > 0
    double capstan_radius = 0.006;     // cable take-up radius [m], > 0
    double stop_lo = -0.2;             // hard stop [rad]
    double stop_hi = 1.8;              // hard stop [rad], > stop_lo

    void validate() const;
};

// A graspable object modeled as a one-sided spring-damper at the fingertip:
// it pushes back only while the fingertip penetrates past the engage angle.
// stiffness == 0 is an explicit placeholder meaning "no object".
struct ContactObject {
    std::string label;
    double stiffness = 0.0;     // [N/m], >= 0 (0 disables contact)
    double damping = 0.0;       // [N s/m], >= 0
    double engage_angle = 0.0;  // joint angle where the fingertip touches [rad]

    void validate() const;
};

struct PlantState {
    double joint_pos = 0.0;    // [rad]
    double joint_vel = 0.0;    // [rad/s]
    double motor_pos = 0.0;    // motor shaft angle [rad], slaved to cable take-up
    double motor_vel = 0.0;    // [rad/s]
    double temperature = 20.0; // ambient/actuator temperature [deg C]
};

// Penetration depth over which the damping term ramps in, so the contact
// force is continuous at engagement.
inline constexpr double kContactDampingRamp = 1e-4;  // [m]

// Resisting torque magnitude from the object at the fingertip, >= 0.
// Shared by the integrator and by ground_truth_torque so labels and dynamics
// can never disagree.
double contact_torque(const PlantParams& pp, const ContactObject& obj, double joint_pos,
                      double joint_vel);

// The externally applied joint torque an ideal sensor would report: the
// gravity load of the hanging weight plus any object contact.  This is the
// regression target the estimator learns.
double ground_truth_torque(const PlantParams& pp, const PlantState& s,
                           const std::optional<ContactObject>& obj = std::nullopt);

// One semi-implicit Euler step of length dt: acceleration from the current
// state, velocity update, then position update with the new velocity.  The
// cable tension comes from the muscle force law; the motor shaft is slaved to
// the cable take-up (trapezoidal moment-arm integration).  Hard stops clamp
// the position and zero the velocity into the stop.
//
// The optional disturbance torque is added to the joint balance but never to
// ground_truth_torque: it models unmodeled interaction.
//
// Throws NumericError if the state stops being finite.
PlantState plant_step(const PlantParams& pp, const geometry::TendonRouting& routing,
                      const muscle::MuscleParams& mp, const muscle::MuscleState& ms,
                      const std::optional<ContactObject>& obj, const PlantState& s,
                      double dt, double disturbance_torque = 0.0);

// Total mechanical energy of the bare pendulum (link + hanging weight),
// used by the integrator-quality checks: kinetic plus gravitational
// potential, with the potential zero at q = 0.
double pendulum_energy(const PlantParams& pp, const PlantState& s);

}  // namespace fingersim::plant
