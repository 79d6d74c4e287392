#pragma once

#include "rtwin/adam.hpp"
#include "rtwin/rng.hpp"
#include "rtwin/task_policy.hpp"

#include <cstdint>
#include <vector>

namespace rtwin {

struct Transition {
    State error = State::Zero();
    Action action = Action::Zero();
    State next_error = State::Zero();
    double reward = 0.0;
    bool done = false;
    // Insertion sequence number assigned by the buffer.
    std::uint64_t tag = 0;
};

/// Fixed-capacity FIFO of transitions.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity);

    void push(Transition t);
    int size() const { return static_cast<int>(items_.size()); }
    int capacity() const { return capacity_; }
    /// i = 0 is the oldest stored transition.
    const Transition& at(int i) const;
    std::vector<Transition> sample(int batch, Rng& rng) const;

private:
    int capacity_;
    std::vector<Transition> items_;
    std::size_t head_ = 0;
    std::uint64_t next_tag_ = 0;
};

/// Dense network 9 -> H -> H -> 1 with ReLU hidden units. All parameters
/// live in one flat vector: W1, b1, W2, b2, W3, b3 (column-major blocks).
class CriticNet {
public:
    static constexpr int kInput = 9;

    explicit CriticNet(int hidden = 256);

    struct Cache {
        MatX x;
        MatX z1;
        MatX h1;
        MatX z2;
        MatX h2;
        Eigen::RowVectorXd q;
    };

    /// Fan-in uniform hidden layers, output layer uniform in +-3e-3.
    void initialize(Rng& rng);

    /// x is kInput x batch; returns one value per column.
    Eigen::RowVectorXd forward(const MatX& x, Cache* cache = nullptr) const;
    double forward(const Eigen::Matrix<double, kInput, 1>& x) const;

    /// Parameter gradient of sum_j dq[j] * q_j; optionally the input gradient.
    VecX backward(const Cache& cache, const Eigen::RowVectorXd& dq, MatX* dx = nullptr) const;

    VecX& params() { return params_; }
    const VecX& params() const { return params_; }
    int hidden() const { return hidden_; }
    Eigen::Index param_count() const { return params_.size(); }

private:
    struct Views;
    Views views() const;

    int hidden_;
    VecX params_;
};

struct DdpgConfig {
    int hidden = 256;
    double gamma = 0.99;
    // Soft target update rate.
    double zeta = 0.01;
    double critic_lr = 1e-3;
    double actor_lr = 1e-4;
    int batch = 64;
    int n_q = 30;
    int n_a = 30;
    int buffer_capacity = 2000;
    // Exploration std as a fraction of the action range, start and end.
    double noise_start = 0.1;
    double noise_end = 0.01;
    // Characteristic scales dividing the error before it enters the critic.
    State error_scale = State::Ones();

    void validate() const;
};

/// Per-channel exploration std for an episode, decaying linearly from
/// noise_start to noise_end over `total` episodes.
Action exploration_std(int episode, int total, const DdpgConfig& cfg, const ActionBounds& bounds);

/// Adds zero-mean Gaussian noise of the given std and clips to the box.
Action explore(const Action& a, const Action& std_dev, const ActionBounds& bounds, Rng& rng);

struct DdpgStats {
    double critic_loss = 0.0;
    double q_mean = 0.0;
    int critic_updates = 0;
    int actor_updates = 0;
};

/// Model-free actor-critic agent training the PD policy.
class DdpgAgent {
public:
    DdpgAgent(DdpgConfig cfg, PolicyWeights policy, std::uint64_t seed);

    const DdpgConfig& config() const { return cfg_; }
    PolicyWeights& policy() { return policy_; }
    const PolicyWeights& policy() const { return policy_; }
    CriticNet& critic() { return critic_; }
    const CriticNet& critic() const { return critic_; }
    const CriticNet& target_critic() const { return target_; }
    ReplayBuffer& buffer() { return buffer_; }
    const ReplayBuffer& buffer() const { return buffer_; }

    Eigen::Matrix<double, CriticNet::kInput, 1> critic_input(const State& e, const Action& a) const;
    double q_value(const State& e, const Action& a) const;

    /// One MSBE descent step; returns the loss before the step.
    double critic_update(const std::vector<Transition>& batch);
    /// Mean critic value over the batch of the last critic update.
    double last_q_mean() const { return last_q_mean_; }
    /// Mean over the batch of (dq/da)(dpi/dw), the ascent direction.
    PolicyWeights::Vector actor_gradient(const std::vector<Transition>& batch) const;
    void actor_update(const std::vector<Transition>& batch);
    /// target <- zeta * critic + (1 - zeta) * target.
    void soft_update();

    /// n_q critic and n_a actor updates on fresh mini-batches, each followed
    /// by a soft target update. Skipped while the buffer holds fewer
    /// transitions than one batch.
    DdpgStats train();

private:
    DdpgConfig cfg_;
    PolicyWeights policy_;
    CriticNet critic_;
    CriticNet target_;
    ReplayBuffer buffer_;
    Adam critic_opt_;
    Adam actor_opt_;
    Rng batch_rng_;
    double last_q_mean_ = 0.0;
};

}  // namespace rtwin
