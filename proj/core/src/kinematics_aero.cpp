#include "rtwin/kinematics_aero.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rtwin {

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("geometry field must be positive: ") + name);
    }
}

struct WingFrames {
    Mat3 to_flap;  // body -> flap (stroke plane then flapping rotation)
    Mat3 to_wing;  // flap -> wing (pitching rotation)
};

WingFrames make_frames(const WingAngles& angles, double stroke_plane) {
    return {rotation(Axis::Z, angles.phi) * rotation(Axis::Y, stroke_plane),
            rotation(Axis::Y, angles.alpha)};
}

Vec3 element_velocity(double r, const WingFrames& f, double phi_dot, const State& body) {
    const Vec3 body_rate(0.0, body[idx::kThetadot], 0.0);
    const Vec3 omega_flap = f.to_flap * body_rate + Vec3(0.0, 0.0, phi_dot);
    const Vec3 station(0.0, r, 0.0);
    const Vec3 body_velocity(body[idx::kXdot], 0.0, body[idx::kZdot]);
    return (f.to_wing * omega_flap).cross(station) + f.to_wing * (f.to_flap * body_velocity);
}

}  // namespace

void DroneGeometry::validate() const {
    require_positive(mean_chord, "mean_chord");
    require_positive(span, "span");
    require_positive(root_offset, "root_offset");
    require_positive(body_mass, "body_mass");
    require_positive(body_radius, "body_radius");
    require_positive(inertia_yy, "inertia_yy");
    require_positive(gravity, "gravity");
    if (!(air_density >= 0.0) || !std::isfinite(air_density)) {
        throw std::invalid_argument("geometry field must be non-negative: air_density");
    }
}

double DroneGeometry::chord(double r) const {
    const double xi = (r - root_offset) / span;
    const double u = 2.0 * xi - 1.0;
    const double s = 1.0 - u * u;
    if (s <= 0.0) {
        return 0.0;
    }
    return 4.0 * mean_chord / kPi * std::sqrt(s);
}

double DroneGeometry::second_moment_radius() const {
    // Closed form for the semi-elliptical planform: mid-span radius squared
    // plus a quarter of the half-span squared.
    const double mid = root_offset + 0.5 * span;
    return std::sqrt(mid * mid + span * span / 16.0);
}

void AeroCoefficients::validate() const {
    if (!(a_lift > 0.0)) throw std::invalid_argument("a_lift must be positive");
    if (!(b_drag >= 0.0)) throw std::invalid_argument("b_drag must be non-negative");
    if (!(c_drag >= 0.0)) throw std::invalid_argument("c_drag must be non-negative");
}

WingKinematics WingKinematics::from_action(const Action& a, double frequency,
                                           double pitch_amplitude) {
    WingKinematics kin;
    kin.flap_frequency = frequency;
    kin.pitch_amplitude = pitch_amplitude;
    kin.flap_amplitude = a[idx::kAmplitude];
    kin.stroke_plane = a[idx::kStrokePlane];
    kin.flap_offset = a[idx::kOffset];
    return kin;
}

Mat3 rotation(Axis axis, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Mat3 m;
    switch (axis) {
        case Axis::X:
            m << 1, 0, 0,
                 0, c, s,
                 0, -s, c;
            break;
        case Axis::Y:
            m << c, 0, -s,
                 0, 1, 0,
                 s, 0, c;
            break;
        case Axis::Z:
            m << c, s, 0,
                 -s, c, 0,
                 0, 0, 1;
            break;
    }
    return m;
}

WingAngles wing_angles(double t, const WingKinematics& kin) {
    const double omega = 2.0 * kPi * kin.flap_frequency;
    const double c = std::cos(omega * t);
    const double s = std::sin(omega * t);
    WingAngles out;
    out.phi = kin.flap_amplitude * c + kin.flap_offset;
    out.alpha = kin.pitch_amplitude * s;
    out.phi_dot = -kin.flap_amplitude * omega * s;
    out.alpha_dot = kin.pitch_amplitude * omega * c;
    return out;
}

Vec3 relative_velocity(double r, const WingAngles& angles, double stroke_plane,
                       const State& body) {
    return element_velocity(r, make_frames(angles, stroke_plane), angles.phi_dot, body);
}

Vec3 relative_velocity(double r, double t, const State& body, const WingKinematics& kin) {
    return relative_velocity(r, wing_angles(t, kin), kin.stroke_plane, body);
}

double effective_aoa(const Vec3& u_w) {
    const double n = u_w.norm();
    if (n == 0.0) {
        return 0.0;
    }
    return std::acos(std::clamp(u_w.z() / n, -1.0, 1.0));
}

LiftDrag lift_drag_coeffs(double aoa, const AeroCoefficients& coeffs) {
    return {coeffs.a_lift * std::sin(2.0 * aoa),
            coeffs.b_drag + coeffs.c_drag * (1.0 - std::cos(2.0 * aoa))};
}

WingLoads loads_at(const WingAngles& angles, double stroke_plane, const State& body,
                   const DroneGeometry& geom, const AeroCoefficients& coeffs,
                   const LoadOptions& opts) {
    WingLoads out;
    if (geom.air_density == 0.0) {
        return out;
    }

    const int n = opts.span_stations;
    const double dr = geom.span / n;
    const WingFrames frames = make_frames(angles, stroke_plane);

    // Force on one wing in its own frame, summed over blade elements.
    Vec3 force_w = Vec3::Zero();
    for (int i = 0; i < n; ++i) {
        const double r = geom.root_offset + (i + 0.5) * dr;
        const Vec3 u = element_velocity(r, frames, angles.phi_dot, body);
        const double speed2 = u.squaredNorm();
        if (speed2 == 0.0) {
            continue;
        }
        const double speed = std::sqrt(speed2);
        const LiftDrag cf = lift_drag_coeffs(effective_aoa(u), coeffs);
        const double q = 0.5 * geom.air_density * speed2 * geom.chord(r) * dr;

        // Drag opposes the element velocity; lift is normal to it in the
        // chord-normal plane, oriented against the normal velocity component.
        const Vec3 drag_dir = -u / speed;
        const double in_plane = std::hypot(u.x(), u.z());
        Vec3 lift_dir = Vec3::Zero();
        if (in_plane > 0.0) {
            const double side = u.x() >= 0.0 ? 1.0 : -1.0;
            lift_dir = Vec3(-side * u.z(), 0.0, std::abs(u.x())) / in_plane;
        }
        force_w += q * (cf.drag * drag_dir + cf.lift * lift_dir);
    }

    const Mat3 wing_to_body = (frames.to_wing * frames.to_flap).transpose();
    const Vec3 force_b = wing_to_body * force_w;
    Vec3 cop_b = wing_to_body * Vec3(0.0, geom.second_moment_radius(), 0.0);
    cop_b.x() += opts.cop_offset_x;
    const Vec3 torque_b = cop_b.cross(force_b);

    // Mirror wing doubles the longitudinal components.
    out.fx = 2.0 * force_b.x();
    out.fz = 2.0 * force_b.z();
    out.ty = 2.0 * torque_b.y();
    return out;
}

WingLoads instantaneous_loads(double t, const State& body, const WingKinematics& kin,
                              const DroneGeometry& geom, const AeroCoefficients& coeffs,
                              const LoadOptions& opts) {
    return loads_at(wing_angles(t, kin), kin.stroke_plane, body, geom, coeffs, opts);
}

}  // namespace rtwin
