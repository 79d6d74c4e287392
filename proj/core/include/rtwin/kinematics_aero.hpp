#pragma once

#include "rtwin/types.hpp"

namespace rtwin {

/// Rigid body and wing geometry of the flapping-wing vehicle (SI units).
struct DroneGeometry {
    double mean_chord = 0.01;
    double span = 0.05;
    double root_offset = 0.0225;
    double body_mass = 0.003;
    double body_radius = 0.01;
    double inertia_yy = 1.2e-5;
    double air_density = 1.225;
    double gravity = 9.81;

    /// Throws std::invalid_argument when a field is non-positive. Zero air
    /// density is accepted so aerodynamics can be switched off.
    void validate() const;

    /// Semi-elliptical chord law with mean chord `mean_chord` over the span.
    double chord(double r) const;

    /// Radius of the second moment of wing area, sqrt((1/S) int r^2 c(r) dr).
    double second_moment_radius() const;
};

/// Empirical constants of the leading-edge-vortex force model.
struct AeroCoefficients {
    double a_lift = 2.4;
    double b_drag = 0.05;
    double c_drag = 1.5;

    void validate() const;
};

/// Harmonic flapping/pitching law for both wings.
struct WingKinematics {
    double flap_frequency = 20.0;
    double pitch_amplitude = kPi / 4.0;
    double flap_amplitude = deg2rad(69.0);
    double flap_offset = 0.0;
    double stroke_plane = 0.0;

    static WingKinematics from_action(const Action& a, double frequency, double pitch_amplitude);
};

struct WingAngles {
    double phi = 0.0;
    double alpha = 0.0;
    double phi_dot = 0.0;
    double alpha_dot = 0.0;
};

/// Body-frame aerodynamic loads of both wings.
struct WingLoads {
    double fx = 0.0;
    double fz = 0.0;
    double ty = 0.0;
};

struct LiftDrag {
    double lift = 0.0;
    double drag = 0.0;
};

enum class Axis { X, Y, Z };

/// Coordinate transform into a frame rotated by `angle` about `axis`
/// (right-handed). rotation(a, -t) == rotation(a, t).transpose().
Mat3 rotation(Axis axis, double angle);

WingAngles wing_angles(double t, const WingKinematics& kin);

/// Velocity of the blade element at spanwise station r, expressed in the
/// wing frame. Combines the flapping and body pitch rotation with the body
/// translation, both carried through the stroke/flap/pitch rotation chain.
Vec3 relative_velocity(double r, const WingAngles& angles, double stroke_plane, const State& body);
Vec3 relative_velocity(double r, double t, const State& body, const WingKinematics& kin);

/// Angle between the chord axis (wing z) and the element velocity, in [0, pi].
/// A zero velocity returns 0.
double effective_aoa(const Vec3& u_w);

LiftDrag lift_drag_coeffs(double aoa, const AeroCoefficients& coeffs);

struct LoadOptions {
    int span_stations = 20;
    // Longitudinal (body x) shift of the center of pressure used for the
    // pitch lever arm.
    double cop_offset_x = 0.0;
};

WingLoads loads_at(const WingAngles& angles, double stroke_plane, const State& body,
                   const DroneGeometry& geom, const AeroCoefficients& coeffs,
                   const LoadOptions& opts = {});

WingLoads instantaneous_loads(double t, const State& body, const WingKinematics& kin,
                              const DroneGeometry& geom, const AeroCoefficients& coeffs,
                              const LoadOptions& opts = {});

}  // namespace rtwin
