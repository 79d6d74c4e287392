#pragma once

#include "rtwin/episode.hpp"
#include "rtwin/task_policy.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace rtwin {

enum class ClosureVariant { M1, M2, M3, M4, M5 };

ClosureVariant parse_variant(std::string_view name);
std::string_view to_string(ClosureVariant v);

inline constexpr int kClosureBlocks = 9;
inline constexpr int kClosureFeatures = 27;

using ClosureFeatures = Eigen::Matrix<double, kClosureFeatures, 1>;
using ClosureMatrix = Eigen::Matrix<double, 3, kClosureFeatures>;
using FeatureJacobian = Eigen::Matrix<double, kClosureFeatures, 3>;

/// Largest magnitude of each channel of the default action box.
Vec3 default_action_scale();

/// Polynomial force closure. The nine 3x3 blocks are stored side by side,
/// W = [W0 | W1 | ... | W8], so that g1 = W * features(s, a).
///
/// Actions enter the monomials divided by `action_scale`; a scale of ones
/// evaluates them on raw radians.
struct ClosureWeights {
    ClosureMatrix w = ClosureMatrix::Zero();
    ClosureVariant variant = ClosureVariant::M3;
    Vec3 action_scale = default_action_scale();

    static bool block_active(ClosureVariant v, int block);
    bool active(int block) const { return block_active(variant, block); }
    Eigen::Ref<Mat3> block(int b) { return w.middleCols<3>(3 * b); }
    Mat3 block(int b) const { return w.middleCols<3>(3 * b); }

    int free_count() const;
    /// Active blocks in order, each flattened row-major.
    VecX to_vector() const;
    void set_vector(const VecX& v);
    /// Same layout as to_vector() applied to an arbitrary 3x27 matrix.
    VecX pack(const ClosureMatrix& m) const;
    ClosureMatrix mask() const;
    void apply_mask();

    bool operator==(const ClosureWeights&) const = default;
};

struct FeatureSet {
    ClosureFeatures phi;
    FeatureJacobian d_velocity;
    FeatureJacobian d_action;
};

ClosureFeatures closure_features(const State& s, const Action& a, const Vec3& action_scale);
FeatureSet closure_feature_set(const State& s, const Action& a, const Vec3& action_scale);

/// g1 of the averaged dynamics: three accelerations for the velocity rows.
Vec3 closure_force(const State& s, const Action& a, const ClosureWeights& w);

/// Full averaged right-hand side, g1 in the velocity rows plus the rigid
/// body terms shared with the real environment.
State virtual_derivative(const State& s, const Action& a, const ClosureWeights& w, double gravity);

struct SurrogateJacobians {
    Mat6 d_state;
    Mat63 d_action;
    // Columns follow ClosureWeights::to_vector().
    MatX d_weights;
};

SurrogateJacobians surrogate_jacobians(const State& s, const Action& a, const ClosureWeights& w,
                                       double gravity);

/// Integrand of a time-integrated cost along a virtual trajectory.
class RunningCost {
public:
    virtual ~RunningCost() = default;
    virtual double value(double t, const State& s) const = 0;
    virtual State gradient(double t, const State& s) const = 0;
};

/// |s - s_ref(t)|^2 with s_ref linearly interpolated between cycle samples.
class TrackingCost final : public RunningCost {
public:
    TrackingCost(std::span<const State> reference, double cycle_period);
    double value(double t, const State& s) const override;
    State gradient(double t, const State& s) const override;
    State reference_at(double t) const;

private:
    std::span<const State> ref_;
    double period_;
};

/// Negative reward of the tracking error, so minimising it maximises reward.
class ControlCost final : public RunningCost {
public:
    ControlCost(const State& target, const RewardConfig& cfg) : target_(target), cfg_(cfg) {}
    double value(double t, const State& s) const override;
    State gradient(double t, const State& s) const override;

private:
    State target_;
    RewardConfig cfg_;
};

struct SurrogateConfig {
    double gravity = 9.81;
    double cycle_period = 0.05;
    int cycles = 30;
    int substeps_per_cycle = 5;
    double blow_up_bound = kDefaultBlowUpBound;
    State target = State::Zero();
    RewardConfig reward;

    double step() const { return cycle_period / substeps_per_cycle; }
    void validate() const;
};

struct VirtualRollout {
    // Cycle-level record; states[k] is the averaged state at t = k * period.
    EpisodeRecord record;
    // States at every integrator node, nodes[k * substeps] == record.states[k].
    std::vector<State> nodes;
    // Time integral of the running cost, when one was supplied.
    double cost = 0.0;
    bool closed_loop = false;
};

struct AdjointSolution {
    // Costate at every integrator node; costate.back() is the terminal zero.
    std::vector<State> costate;
    // Integral of the costate against df/dW for every closure entry (unmasked).
    ClosureMatrix d_closure = ClosureMatrix::Zero();
    // Per-cycle integral of (df/da)^T lambda.
    std::vector<Action> d_action;
    // Policy gradient, only for closed-loop rollouts.
    PolicyWeights::Vector d_policy = PolicyWeights::Vector::Zero();
    bool finite = true;
};

/// The averaged, time-invariant flight model with a learnable closure.
class SurrogateEnvironment {
public:
    explicit SurrogateEnvironment(SurrogateConfig cfg);

    const SurrogateConfig& config() const { return cfg_; }

    /// Open-loop replay of an action schedule from s0.
    VirtualRollout rollout(std::span<const Action> schedule, const ClosureWeights& w,
                           const RunningCost* cost = nullptr, const State& s0 = State::Zero()) const;

    /// Closed-loop run of the PD policy, acting on the error at each cycle
    /// boundary.
    VirtualRollout rollout(const PolicyWeights& policy, const ClosureWeights& w,
                           const RunningCost* cost = nullptr, const State& s0 = State::Zero()) const;

    /// Backward costate sweep for the given trajectory. With `policy` set, the
    /// feedback of the state on later actions is included through jump
    /// conditions at the cycle boundaries.
    AdjointSolution solve_adjoint(const VirtualRollout& traj, const ClosureWeights& w,
                                  const RunningCost& cost, const PolicyWeights* policy = nullptr) const;

    /// Number of derivative evaluations performed so far by this instance.
    long long evaluations() const { return evaluations_; }

private:
    template <typename ActionFn>
    VirtualRollout integrate(ActionFn&& choose, const ClosureWeights& w, const RunningCost* cost,
                             const State& s0) const;

    SurrogateConfig cfg_;
    mutable long long evaluations_ = 0;
};

}  // namespace rtwin
