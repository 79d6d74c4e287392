#pragma once

#include <deque>
#include <optional>
#include <string_view>

namespace rtwin {

enum class PolicyKind { ModelBased = 0, ModelFree = 1 };

std::string_view to_string(PolicyKind p);

enum class CostComparison { Ratio, Difference };

struct RefereeConfig {
    double rvet_lo = 0.0;
    double rvet_hi = 40.0;
    int c_m = 2;
    int c_pi = 5;
    int c_w = 5;
    double t_j = 1.0;
    double t_ji = 0.8;
    double t_w = 0.05;
    int window = 5;
    // |delta of the virtual moving average| below this is out of bounds.
    double eps_div = 1e-12;
    // A moving-average change smaller than this fraction of the average is
    // treated as no trend; two flat averages agree.
    double trend_deadband = 0.02;
    CostComparison comparison = CostComparison::Ratio;
    // Observe and report without ever switching or cloning.
    bool log_only = false;

    void validate() const;
};

struct RvetValue {
    double value = 0.0;
    bool in_bounds = false;
};

/// Trust ratio of successive moving-average cost changes. A vanishing
/// virtual change yields an out-of-bounds marker.
RvetValue rvet(double delta_real, double delta_virtual, const RefereeConfig& cfg);

struct RefereeInputs {
    double live_cost_virtual = 0.0;
    double idle_cost_virtual = 0.0;
    double live_cost_real = 0.0;
    // False when the real episode was not produced by the live policy; the
    // trust check then skips this episode.
    bool has_real_cost = true;
    // |dw| / (|w| + eps) of the idle policy over the last update cycle.
    double dw_idle = 0.0;
};

struct RefereeDirectives {
    std::optional<RvetValue> rvet;
    bool rvet_fail = false;
    bool switch_signal = false;
    bool clone_signal = false;
    // Copy the weights of clone_source, the live policy after this step's
    // switch decision, into the other one.
    bool clone = false;
    PolicyKind clone_source = PolicyKind::ModelFree;
    bool model_failed = false;
    PolicyKind live = PolicyKind::ModelFree;
    int rvet_counter = 0;
    int switch_counter = 0;
    int clone_counter = 0;
};

/// Per-episode policy referee: trust check, live/idle switching and weight
/// cloning, each gated by a consecutive-episode counter.
class Referee {
public:
    explicit Referee(RefereeConfig cfg, PolicyKind initial = PolicyKind::ModelFree);

    RefereeDirectives step(const RefereeInputs& in);

    PolicyKind live() const { return live_; }
    PolicyKind idle() const {
        return live_ == PolicyKind::ModelFree ? PolicyKind::ModelBased : PolicyKind::ModelFree;
    }
    bool model_failed() const { return model_failed_; }
    const RefereeConfig& config() const { return cfg_; }

private:
    bool underperforms(double live, double idle) const;
    bool dominates(double live, double idle) const;

    RefereeConfig cfg_;
    PolicyKind live_;
    bool model_failed_ = false;
    int rvet_counter_ = 0;
    int switch_counter_ = 0;
    int clone_counter_ = 0;
    std::deque<double> real_window_;
    std::deque<double> virtual_window_;
    std::optional<double> prev_real_avg_;
    std::optional<double> prev_virtual_avg_;
};

}  // namespace rtwin
