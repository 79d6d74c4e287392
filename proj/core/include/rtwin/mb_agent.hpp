#pragma once

#include "rtwin/adam.hpp"
#include "rtwin/episode.hpp"
#include "rtwin/surrogate_env.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace rtwin {

enum class BufferStrategy { MaxVariance, MinError };

BufferStrategy parse_buffer_strategy(std::string_view name);
std::string_view to_string(BufferStrategy s);

/// xi = (1/N_A) sum_i Tr((S_mean - S_i)(S_mean - S_i)^T), with N_A the total
/// number of rows over all trajectory matrices.
double buffer_variance(std::span<const MatX> trajectories);

/// Stacks the cycle states of a record into an (N_c+1) x 6 matrix.
MatX trajectory_matrix(const EpisodeRecord& rec);

/// Holds the real episodes used to identify the closure.
class AssimilationBuffer {
public:
    AssimilationBuffer(int capacity, BufferStrategy strategy);

    /// Offers a real episode; returns true when it was stored. Incomplete
    /// episodes are never stored.
    bool offer(const EpisodeRecord& rec);

    const std::vector<EpisodeRecord>& episodes() const { return episodes_; }
    int size() const { return static_cast<int>(episodes_.size()); }
    int capacity() const { return capacity_; }
    bool full() const { return size() >= capacity_; }
    BufferStrategy strategy() const { return strategy_; }
    double variance() const;
    /// Largest tracking cost (negative cumulative reward) among stored episodes.
    double worst_error() const;

private:
    double variance_with(int replaced, const MatX& candidate) const;

    int capacity_;
    BufferStrategy strategy_;
    std::vector<EpisodeRecord> episodes_;
    std::vector<MatX> matrices_;
};

struct AssimConfig {
    double alpha_p = 1e-4;
    int n_g = 50;
    int n_mb = 30;
    double lr_assim = 5e-3;
    double lr_policy = 2e-2;

    void validate() const;
};

/// Trapezoidal time integral of |virtual - real|^2 on a shared uniform grid,
/// averaged over episodes, plus alpha_p * |w|_2 * T0.
double assimilation_cost(std::span<const std::vector<State>> virtual_trajs,
                         std::span<const std::vector<State>> real_trajs, double dt, const ClosureWeights& w,
                         double alpha_p);

struct AssimilationGradient {
    double cost = 0.0;
    // Over the free closure entries, in ClosureWeights::to_vector() order.
    VecX gradient;
    bool ok = false;
    std::vector<VirtualRollout> replays;
};

/// Replays every buffered action schedule in the surrogate and returns the
/// continuous assimilation cost with its adjoint gradient.
AssimilationGradient assimilation_gradient(const SurrogateEnvironment& env, std::span<const EpisodeRecord> buffer,
                                           const ClosureWeights& w, double alpha_p);

struct AssimilationReport {
    std::vector<double> costs;
    int rejected = 0;
};

/// `steps` optimizer iterations on the closure. A failed replay or a
/// non-finite gradient restores the last good weights and halves the step
/// size for the rest of the call.
AssimilationReport assimilate(const SurrogateEnvironment& env, std::span<const EpisodeRecord> buffer,
                              ClosureWeights& w, const AssimConfig& cfg, Adam& opt, int steps);

struct PolicyGradient {
    double cost = 0.0;
    PolicyWeights::Vector gradient = PolicyWeights::Vector::Zero();
    bool ok = false;
    VirtualRollout rollout;
};

/// Closed-loop virtual episode with the continuous control cost and its
/// gradient with respect to the policy weights.
PolicyGradient policy_gradient(const SurrogateEnvironment& env, const PolicyWeights& pi, const ClosureWeights& w);

struct PolicyReport {
    std::vector<double> costs;
    int skipped = 0;
};

PolicyReport mb_policy_update(const SurrogateEnvironment& env, PolicyWeights& pi, const ClosureWeights& w,
                              const AssimConfig& cfg, Adam& opt, int steps);

/// Discrete control cost of a virtual closed-loop episode, -sum(r), with the
/// failure penalty for cycles lost to a blow-up.
double virtual_episode_cost(const SurrogateEnvironment& env, const PolicyWeights& pi, const ClosureWeights& w);

}  // namespace rtwin
