#pragma once

#include "rtwin/rng.hpp"
#include "rtwin/task_policy.hpp"

#include <vector>

namespace rtwin {

struct GpConfig {
    // Correlation length in cycles; the correlation at this lag is 1/e.
    double length_scale = 8.0;
    // Standard deviation as a fraction of each channel's range.
    double sigma_fraction = 0.25;

    void validate() const;
};

/// Smooth random action schedules from a stationary Gaussian process with
/// kernel exp(-(dk / length_scale)^2), one independent process per channel.
class GpActionSampler {
public:
    GpActionSampler(int cycles, GpConfig cfg, ActionBounds bounds);

    /// cycles x 3 draw with zero mean and unit variance per channel.
    MatX draw_standard(Rng& rng) const;

    /// Per-channel mean drawn uniformly in the box, scaled GP fluctuation,
    /// clipped to the box.
    std::vector<Action> sample(Rng& rng) const;

    int cycles() const { return cycles_; }

private:
    int cycles_;
    GpConfig cfg_;
    ActionBounds bounds_;
    MatX factor_;
};

}  // namespace rtwin
