#include "rtwin/episode.hpp"

#include "rtwin/task_policy.hpp"

#include <numeric>

namespace rtwin {

double cumulative_reward(const EpisodeRecord& rec) {
    double total = std::accumulate(rec.rewards.begin(), rec.rewards.end(), 0.0);
    const int missing = rec.planned_cycles - static_cast<int>(rec.rewards.size());
    if (missing > 0) {
        total += missing * failure_reward(rec.target);
    }
    return total;
}

double integrated_reward(const EpisodeRecord& rec) { return rec.cycle_period * cumulative_reward(rec); }

}  // namespace rtwin
