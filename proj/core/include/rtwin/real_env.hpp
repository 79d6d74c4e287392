#pragma once

#include "rtwin/episode.hpp"
#include "rtwin/kinematics_aero.hpp"
#include "rtwin/task_policy.hpp"

#include <functional>
#include <span>
#include <string_view>

namespace rtwin {

enum class Bias { None, Mass33, Cop3mm };

Bias parse_bias(std::string_view name);
std::string_view to_string(Bias b);

struct RealEnvConfig {
    DroneGeometry geometry;
    AeroCoefficients aero;
    double flap_frequency = 20.0;
    double pitch_amplitude = kPi / 4.0;
    double episode_time = 1.5;
    int substeps_per_cycle = 50;
    int span_stations = 20;
    double blow_up_bound = kDefaultBlowUpBound;
    // Multiplies body_mass (1.33 for the mass-bias scenario).
    double mass_factor = 1.0;
    // Longitudinal center-of-pressure shift in metres.
    double cop_offset_x = 0.0;

    double cycle_period() const { return 1.0 / flap_frequency; }
    int cycles() const;
    void validate() const;
    void apply_bias(Bias b);
};

/// Gravity, rotating-frame velocity coupling and kinematic rows shared by
/// the instantaneous and the averaged dynamics.
State rigid_body_terms(const State& s, double gravity);

/// Jacobian of rigid_body_terms with respect to the state.
Mat6 rigid_body_jacobian(const State& s, double gravity);

struct CycleResult {
    State end_state = State::Zero();
    State average = State::Zero();
    bool failed = false;
    int failed_cycle = -1;
};

using Policy = std::function<Action(const State& error)>;

/// Nonlinear time-varying flight dynamics driven by instantaneous
/// blade-element wing loads and integrated with fixed-step RK4.
class RealEnvironment {
public:
    explicit RealEnvironment(RealEnvConfig cfg);

    const RealEnvConfig& config() const { return cfg_; }

    State derivative(double t, const State& s, const WingKinematics& kin) const;

    /// Integrates one flapping period under a constant action. The average is
    /// the trapezoidal time mean over the integrator nodes.
    CycleResult step_cycle(const State& s, const Action& a, int cycle_index,
                           std::vector<State>* dense = nullptr) const;

    /// Runs one episode from rest, querying the policy with the
    /// cycle-averaged error at each cycle boundary.
    EpisodeRecord run_episode(const Policy& policy, const State& target, const RewardConfig& reward_cfg,
                              bool keep_dense = false) const;

    /// Runs an open-loop action schedule from rest.
    EpisodeRecord replay(std::span<const Action> actions, const State& target,
                         const RewardConfig& reward_cfg, bool keep_dense = false) const;

private:
    WingKinematics kinematics(const Action& a) const;

    RealEnvConfig cfg_;
};

}  // namespace rtwin
