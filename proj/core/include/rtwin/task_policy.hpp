#pragma once

#include "rtwin/types.hpp"

#include <array>

namespace rtwin {

struct RewardConfig {
    double eta = 0.1;
    Vec3 sigma = Vec3::Constant(0.25);

    void validate() const;
};

/// Componentwise box on the three control angles.
struct ActionBounds {
    Action lo = Action(deg2rad(50.0), deg2rad(-30.0), deg2rad(-0.5));
    Action hi = Action(deg2rad(88.0), deg2rad(30.0), deg2rad(0.5));

    Action mid() const { return 0.5 * (lo + hi); }
    Action range() const { return hi - lo; }
    Action clamp(const Action& a) const { return a.cwiseMax(lo).cwiseMin(hi); }
    bool contains(const Action& a) const {
        return (a.array() >= lo.array()).all() && (a.array() <= hi.array()).all();
    }
    void validate() const;
};

/// Clipped, scaled proportional-derivative policy parameters.
/// Vector layout: 18 gains in row-major order followed by 3 biases.
struct PolicyWeights {
    static constexpr int kGainCount = 18;
    static constexpr int kParamCount = 21;
    using Gain = Eigen::Matrix<double, 3, 6, Eigen::RowMajor>;
    using Vector = Eigen::Matrix<double, kParamCount, 1>;

    Gain gain = Gain::Zero();
    Vec3 bias = Vec3::Zero();
    ActionBounds bounds;
    // Channels whose bias is held fixed during training.
    std::array<bool, 3> freeze_bias{false, false, false};

    Vector to_vector() const;
    void set_vector(const Vector& v);
    /// 1 for trainable entries, 0 for frozen biases.
    Vector trainable_mask() const;
};

struct PolicyJacobians {
    Eigen::Matrix<double, 3, PolicyWeights::kParamCount> d_weights;
    Eigen::Matrix<double, 3, 6> d_error;
};

State cycle_error(const State& averaged, const State& target);

/// Componentwise Gaussian gate exp(-e^2 / sigma^2) on the position error.
Vec3 velocity_gate(const Vec3& position_error, const Vec3& sigma);

/// r = -|e_pos|^2 - eta |e_vel o h(e_pos)|^2 (always <= 0).
double reward(const State& error, const RewardConfig& cfg);

/// Gradient of reward() with respect to the error vector.
State reward_gradient(const State& error, const RewardConfig& cfg);

Action pd_policy(const State& error, const PolicyWeights& w);

PolicyJacobians policy_jacobians(const State& error, const PolicyWeights& w);

/// Reward assigned to every cycle an aborted episode did not execute.
double failure_reward(const State& target);

}  // namespace rtwin
