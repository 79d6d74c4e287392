#include "rtwin/referee.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rtwin {

std::string_view to_string(PolicyKind p) { return p == PolicyKind::ModelFree ? "model_free" : "model_based"; }

void RefereeConfig::validate() const {
    if (!(rvet_lo < rvet_hi)) throw std::invalid_argument("RVET bounds require lo < hi");
    if (!(trend_deadband >= 0.0)) throw std::invalid_argument("trend deadband must be >= 0");
    if (c_m < 1 || c_pi < 1 || c_w < 1) throw std::invalid_argument("referee counters must be positive");
    if (window < 1) throw std::invalid_argument("moving-average window must be >= 1");
}

RvetValue rvet(double delta_real, double delta_virtual, const RefereeConfig& cfg) {
    if (!(std::abs(delta_virtual) >= cfg.eps_div)) return {0.0, false};
    const double r = delta_real / delta_virtual;
    return {r, std::isfinite(r) && r >= cfg.rvet_lo && r <= cfg.rvet_hi};
}

Referee::Referee(RefereeConfig cfg, PolicyKind initial) : cfg_(cfg), live_(initial) { cfg_.validate(); }

bool Referee::underperforms(double live, double idle) const {
    if (cfg_.comparison == CostComparison::Ratio) return live > cfg_.t_j * idle;
    return live - idle > cfg_.t_j;
}

bool Referee::dominates(double live, double idle) const {
    if (cfg_.comparison == CostComparison::Ratio) return live < cfg_.t_ji * idle;
    return idle - live > cfg_.t_ji;
}

RefereeDirectives Referee::step(const RefereeInputs& in) {
    RefereeDirectives d;

    auto push = [this](std::deque<double>& w, double v) {
        w.push_back(v);
        if (static_cast<int>(w.size()) > cfg_.window) w.pop_front();
        return std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    };
    // Left branch: trust between the two environments.
    if (in.has_real_cost) {
        const double real_avg = push(real_window_, in.live_cost_real);
        const double virtual_avg = push(virtual_window_, in.live_cost_virtual);
        if (prev_real_avg_ && prev_virtual_avg_) {
            double dr = real_avg - *prev_real_avg_;
            double dv = virtual_avg - *prev_virtual_avg_;
            if (std::abs(dr) <= cfg_.trend_deadband * std::abs(real_avg)) dr = 0.0;
            if (std::abs(dv) <= cfg_.trend_deadband * std::abs(virtual_avg)) dv = 0.0;
            d.rvet = (dr == 0.0 && dv == 0.0) ? RvetValue{0.0, true} : rvet(dr, dv, cfg_);
            if (d.rvet->in_bounds) {
                rvet_counter_ = 0;
                model_failed_ = false;
            } else {
                ++rvet_counter_;
            }
        }
        prev_real_avg_ = real_avg;
        prev_virtual_avg_ = virtual_avg;
        if (rvet_counter_ >= cfg_.c_m) {
            d.rvet_fail = true;
            rvet_counter_ = 0;
        }
    }

    // Centre branch: live policy consistently worse than idle.
    if (underperforms(in.live_cost_virtual, in.idle_cost_virtual)) {
        ++switch_counter_;
    } else {
        switch_counter_ = 0;
    }
    if (switch_counter_ >= cfg_.c_pi) {
        d.switch_signal = true;
        switch_counter_ = 0;
    }

    // Right branch: idle policy stalled or clearly beaten.
    if (in.dw_idle < cfg_.t_w || dominates(in.live_cost_virtual, in.idle_cost_virtual)) {
        ++clone_counter_;
    } else {
        clone_counter_ = 0;
    }
    if (clone_counter_ >= cfg_.c_w) {
        d.clone_signal = true;
        clone_counter_ = 0;
    }

    if (d.rvet_fail) model_failed_ = true;
    if (!cfg_.log_only) {
        if (d.rvet_fail) {
            live_ = PolicyKind::ModelFree;
        } else if (d.switch_signal) {
            const PolicyKind flipped = idle();
            // A distrusted model never goes live.
            if (!(model_failed_ && flipped == PolicyKind::ModelBased)) live_ = flipped;
        }
        d.clone = d.clone_signal || d.rvet_fail;
    }
    // Weights flow from whichever policy is live after this step, so a
    // trust failure copies the model-free policy over the model-based one.
    d.clone_source = live_;

    d.model_failed = model_failed_;
    d.live = live_;
    d.rvet_counter = rvet_counter_;
    d.switch_counter = switch_counter_;
    d.clone_counter = clone_counter_;
    return d;
}

}  // namespace rtwin
