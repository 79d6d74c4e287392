#include "rtwin/real_env.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rtwin {

Bias parse_bias(std::string_view name) {
    if (name == "none") return Bias::None;
    if (name == "mass_33pct") return Bias::Mass33;
    if (name == "cop_3mm") return Bias::Cop3mm;
    throw std::invalid_argument("unknown bias: " + std::string(name));
}

std::string_view to_string(Bias b) {
    switch (b) {
        case Bias::None: return "none";
        case Bias::Mass33: return "mass_33pct";
        case Bias::Cop3mm: return "cop_3mm";
    }
    return "none";
}

int RealEnvConfig::cycles() const {
    return static_cast<int>(std::lround(flap_frequency * episode_time));
}

void RealEnvConfig::validate() const {
    geometry.validate();
    aero.validate();
    if (!(flap_frequency > 0.0)) throw std::invalid_argument("flap_frequency must be positive");
    if (!(pitch_amplitude > 0.0 && pitch_amplitude < kPi / 2.0)) {
        throw std::invalid_argument("pitch_amplitude must lie in (0, pi/2)");
    }
    if (!(episode_time > 0.0)) throw std::invalid_argument("episode_time must be positive");
    if (substeps_per_cycle < 1) throw std::invalid_argument("substeps_per_cycle must be >= 1");
    if (span_stations < 1) throw std::invalid_argument("span_stations must be >= 1");
    if (!(mass_factor > 0.0)) throw std::invalid_argument("mass_factor must be positive");
}

void RealEnvConfig::apply_bias(Bias b) {
    switch (b) {
        case Bias::None: break;
        case Bias::Mass33: mass_factor = 1.33; break;
        case Bias::Cop3mm: cop_offset_x = 0.003; break;
    }
}

State rigid_body_terms(const State& s, double gravity) {
    const double th = s[idx::kTheta];
    const double q = s[idx::kThetadot];
    State g;
    g[idx::kXdot] = gravity * std::sin(th) - q * s[idx::kZdot];
    g[idx::kZdot] = -gravity * std::cos(th) + q * s[idx::kXdot];
    g[idx::kThetadot] = 0.0;
    g.tail<3>() = s.head<3>();
    return g;
}

Mat6 rigid_body_jacobian(const State& s, double gravity) {
    const double th = s[idx::kTheta];
    const double q = s[idx::kThetadot];
    Mat6 j = Mat6::Zero();
    j(idx::kXdot, idx::kZdot) = -q;
    j(idx::kXdot, idx::kThetadot) = -s[idx::kZdot];
    j(idx::kXdot, idx::kTheta) = gravity * std::cos(th);
    j(idx::kZdot, idx::kXdot) = q;
    j(idx::kZdot, idx::kThetadot) = s[idx::kXdot];
    j(idx::kZdot, idx::kTheta) = gravity * std::sin(th);
    j.block<3, 3>(3, 0).setIdentity();
    return j;
}

RealEnvironment::RealEnvironment(RealEnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

WingKinematics RealEnvironment::kinematics(const Action& a) const {
    return WingKinematics::from_action(a, cfg_.flap_frequency, cfg_.pitch_amplitude);
}

State RealEnvironment::derivative(double t, const State& s, const WingKinematics& kin) const {
    const LoadOptions opts{cfg_.span_stations, cfg_.cop_offset_x};
    const WingLoads loads = instantaneous_loads(t, s, kin, cfg_.geometry, cfg_.aero, opts);
    const double mass = cfg_.geometry.body_mass * cfg_.mass_factor;

    State ds = rigid_body_terms(s, cfg_.geometry.gravity);
    ds[idx::kXdot] += loads.fx / mass;
    ds[idx::kZdot] += loads.fz / mass;
    ds[idx::kThetadot] += loads.ty / cfg_.geometry.inertia_yy;
    return ds;
}

namespace {

bool out_of_bounds(const State& s, double bound) {
    for (int i = 0; i < 6; ++i) {
        if (!std::isfinite(s[i]) || std::abs(s[i]) > bound) return true;
    }
    return false;
}

}  // namespace

CycleResult RealEnvironment::step_cycle(const State& s0, const Action& a, int cycle_index,
                                        std::vector<State>* dense) const {
    const WingKinematics kin = kinematics(a);
    const int n = cfg_.substeps_per_cycle;
    const double h = cfg_.cycle_period() / n;

    CycleResult out;
    State s = s0;
    State sum = 0.5 * s0;
    // Kinematics are periodic, so every cycle uses local time in [0, period].
    for (int i = 0; i < n; ++i) {
        const double t = i * h;
        const State k1 = derivative(t, s, kin);
        const State k2 = derivative(t + 0.5 * h, s + 0.5 * h * k1, kin);
        const State k3 = derivative(t + 0.5 * h, s + 0.5 * h * k2, kin);
        const State k4 = derivative(t + h, s + h * k3, kin);
        s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (out_of_bounds(s, cfg_.blow_up_bound)) {
            out.failed = true;
            out.failed_cycle = cycle_index;
            out.end_state = s;
            return out;
        }
        if (dense != nullptr) dense->push_back(s);
        sum += (i + 1 == n) ? 0.5 * s : s;
    }
    out.end_state = s;
    out.average = sum / n;
    return out;
}

EpisodeRecord RealEnvironment::run_episode(const Policy& policy, const State& target,
                                           const RewardConfig& reward_cfg, bool keep_dense) const {
    EpisodeRecord rec;
    rec.target = target;
    rec.cycle_period = cfg_.cycle_period();
    rec.planned_cycles = cfg_.cycles();

    State s = State::Zero();
    rec.states.push_back(s);
    if (keep_dense) {
        rec.dense_time.push_back(0.0);
        rec.dense_states.push_back(s);
    }
    const double h = cfg_.cycle_period() / cfg_.substeps_per_cycle;

    for (int k = 0; k < rec.planned_cycles; ++k) {
        const Action a = policy(cycle_error(rec.states.back(), target));
        std::vector<State> dense;
        const CycleResult step = step_cycle(s, a, k, keep_dense ? &dense : nullptr);
        if (step.failed) {
            rec.failed = true;
            rec.failed_cycle = k;
            break;
        }
        if (keep_dense) {
            for (std::size_t i = 0; i < dense.size(); ++i) {
                rec.dense_time.push_back(k * cfg_.cycle_period() + static_cast<double>(i + 1) * h);
                rec.dense_states.push_back(dense[i]);
            }
        }
        s = step.end_state;
        rec.actions.push_back(a);
        rec.states.push_back(step.average);
        rec.rewards.push_back(reward(cycle_error(step.average, target), reward_cfg));
    }
    return rec;
}

EpisodeRecord RealEnvironment::replay(std::span<const Action> actions, const State& target,
                                      const RewardConfig& reward_cfg, bool keep_dense) const {
    if (static_cast<int>(actions.size()) != cfg_.cycles()) {
        throw std::invalid_argument("replay schedule length must equal the cycle count");
    }
    std::size_t k = 0;
    auto scripted = [&](const State&) { return actions[k++]; };
    return run_episode(scripted, target, reward_cfg, keep_dense);
}

}  // namespace rtwin
