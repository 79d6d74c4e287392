#include "rtwin/task_policy.hpp"

#include <cmath>
#include <stdexcept>

namespace rtwin {

void RewardConfig::validate() const {
    if (!(eta >= 0.0)) throw std::invalid_argument("reward eta must be non-negative");
    if (!(sigma.array() > 0.0).all()) throw std::invalid_argument("reward sigma must be positive");
}

void ActionBounds::validate() const {
    if (!(lo.array() < hi.array()).all()) {
        throw std::invalid_argument("action bounds require lo < hi componentwise");
    }
}

PolicyWeights::Vector PolicyWeights::to_vector() const {
    Vector v;
    v.head<kGainCount>() = Eigen::Map<const Eigen::Matrix<double, kGainCount, 1>>(gain.data());
    v.tail<3>() = bias;
    return v;
}

void PolicyWeights::set_vector(const Vector& v) {
    Eigen::Map<Eigen::Matrix<double, kGainCount, 1>>(gain.data()) = v.head<kGainCount>();
    for (int i = 0; i < 3; ++i) {
        if (!freeze_bias[static_cast<std::size_t>(i)]) {
            bias[i] = v[kGainCount + i];
        }
    }
}

PolicyWeights::Vector PolicyWeights::trainable_mask() const {
    Vector m = Vector::Ones();
    for (int i = 0; i < 3; ++i) {
        if (freeze_bias[static_cast<std::size_t>(i)]) m[kGainCount + i] = 0.0;
    }
    return m;
}

State cycle_error(const State& averaged, const State& target) { return averaged - target; }

Vec3 velocity_gate(const Vec3& position_error, const Vec3& sigma) {
    return (-(position_error.array().square() / sigma.array().square())).exp().matrix();
}

double reward(const State& error, const RewardConfig& cfg) {
    const Vec3 e_vel = error.head<3>();
    const Vec3 e_pos = error.tail<3>();
    const Vec3 gate = velocity_gate(e_pos, cfg.sigma);
    return -e_pos.squaredNorm() - cfg.eta * e_vel.cwiseProduct(gate).squaredNorm();
}

State reward_gradient(const State& error, const RewardConfig& cfg) {
    const Vec3 e_vel = error.head<3>();
    const Vec3 e_pos = error.tail<3>();
    const Vec3 gate = velocity_gate(e_pos, cfg.sigma);
    const Vec3 gate2 = gate.array().square();
    State g;
    g.head<3>() = -2.0 * cfg.eta * e_vel.cwiseProduct(gate2);
    // d/de_pos of eta * v^2 * h^2 with h = exp(-e^2/s^2) is -4 eta v^2 h^2 e / s^2.
    g.tail<3>() = (-2.0 * e_pos.array() + 4.0 * cfg.eta * e_vel.array().square() * gate2.array() *
                                              e_pos.array() / cfg.sigma.array().square())
                      .matrix();
    return g;
}

Action pd_policy(const State& error, const PolicyWeights& w) {
    const Vec3 z = w.gain * error + w.bias;
    const Vec3 squashed = 0.5 * (z.array().tanh() + 1.0);
    return w.bounds.lo + squashed.cwiseProduct(w.bounds.range());
}

PolicyJacobians policy_jacobians(const State& error, const PolicyWeights& w) {
    const Vec3 z = w.gain * error + w.bias;
    const Vec3 th = z.array().tanh();
    const Vec3 da_dz = 0.5 * (1.0 - th.array().square()) * w.bounds.range().array();

    PolicyJacobians j;
    j.d_weights.setZero();
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 6; ++c) {
            j.d_weights(i, i * 6 + c) = da_dz[i] * error[c];
        }
        j.d_weights(i, PolicyWeights::kGainCount + i) = da_dz[i];
    }
    j.d_error = da_dz.asDiagonal() * w.gain;
    return j;
}

double failure_reward(const State& target) { return -10.0 * target.squaredNorm(); }

}  // namespace rtwin
