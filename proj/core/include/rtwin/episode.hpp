#pragma once

#include "rtwin/types.hpp"

#include <cstdint>
#include <vector>

namespace rtwin {

/// One control attempt on the cycle grid t_k = k * cycle_period.
///
/// states[0] is the initial state and states[k] (k >= 1) the state averaged
/// over cycle k. actions[k] is held during cycle k+1 and was chosen from the
/// error of states[k]; rewards[k] scores the resulting states[k+1].
struct EpisodeRecord {
    std::vector<State> states;
    std::vector<Action> actions;
    std::vector<double> rewards;
    State target = State::Zero();
    double cycle_period = 0.05;
    int planned_cycles = 0;
    bool failed = false;
    int failed_cycle = -1;
    std::uint64_t seed = 0;

    // Integrator-resolution samples, only filled on request.
    std::vector<double> dense_time;
    std::vector<State> dense_states;

    int executed_cycles() const { return static_cast<int>(actions.size()); }
    bool complete() const { return !failed && executed_cycles() == planned_cycles; }

    bool operator==(const EpisodeRecord&) const = default;
};

/// Sum of per-cycle rewards; cycles an aborted episode did not run are
/// charged failure_reward(target) each.
double cumulative_reward(const EpisodeRecord& rec);

/// Piecewise-constant time integral of the reward, cycle_period * sum.
double integrated_reward(const EpisodeRecord& rec);

}  // namespace rtwin
