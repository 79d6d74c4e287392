#pragma once

#include "rtwin/gp.hpp"
#include "rtwin/mb_agent.hpp"
#include "rtwin/mf_agent.hpp"
#include "rtwin/real_env.hpp"
#include "rtwin/referee.hpp"
#include "rtwin/surrogate_env.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rtwin {

enum class Scenario { C1Offline, C2Online, C3Biased };
enum class AgentMode { RtFull, MfOnly, MbOnly };

Scenario parse_scenario(std::string_view name);
std::string_view to_string(Scenario s);
AgentMode parse_agent_mode(std::string_view name);
std::string_view to_string(AgentMode m);

struct OfflineFitConfig {
    // Start the descent from an equation-error least-squares fit instead of zero.
    bool regression_init = true;
    double ridge = 1e-6;
    int iterations = 3000;
    double lr_start = 0.05;
    double lr_end = 1e-3;
    double alpha_p = 1e-4;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::C1Offline;
    Bias bias = Bias::None;
    BufferStrategy buffer = BufferStrategy::MaxVariance;
    AgentMode mode = AgentMode::RtFull;

    int episodes = 60;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    // Size of the assimilation buffer and number of demonstration episodes.
    int n_e = 5;
    int threads = 1;

    RealEnvConfig real;
    RewardConfig reward;
    State target = (State() << 0, 0, 0, 0, 1, 0).finished();
    ActionBounds bounds;
    ClosureVariant variant = ClosureVariant::M3;
    int virtual_substeps = 5;
    AssimConfig assim;
    DdpgConfig ddpg;
    RefereeConfig referee;
    GpConfig gp;
    OfflineFitConfig offline;
    double policy_init_std = 0.1;
    double closure_init_std = 1e-3;
    std::array<bool, 3> freeze_bias{false, false, false};
    // Trajectory database used for the offline model and demonstrations.
    int database_size = 40;
    int database_train = 10;
    std::uint64_t database_seed = 2024;

    int cycles() const { return real.cycles(); }
    SurrogateConfig surrogate() const;
    void validate() const;
};

struct TrajectoryDatabase {
    std::vector<EpisodeRecord> records;
    int resampled = 0;
};

/// Real-environment episodes under Gaussian-process action schedules.
/// Episodes that blow up are discarded and redrawn.
TrajectoryDatabase generate_database(int count, std::uint64_t seed, const ExperimentConfig& cfg);

/// Equation-error least squares: central differences of the cycle states,
/// minus the rigid body terms, regressed on the active closure features.
ClosureWeights regress_closure(std::span<const EpisodeRecord> train, ClosureVariant variant, double gravity,
                               double ridge);

/// Full-batch fit of a closure variant on a set of real episodes, starting
/// from the regression estimate (or zero), with an exponentially decaying
/// step size. Returns the best iterate seen.
ClosureWeights fit_closure_offline(const SurrogateEnvironment& env, std::span<const EpisodeRecord> train,
                                   ClosureVariant variant, const OfflineFitConfig& cfg,
                                   std::vector<double>* history = nullptr);

struct ValidationScore {
    // Mean integrated squared state error over the episodes.
    double error = 0.0;
    // Pearson correlation of virtual against real cycle states, per channel.
    std::array<double, 6> pearson{};
};

ValidationScore score_closure(const SurrogateEnvironment& env, std::span<const EpisodeRecord> episodes,
                              const ClosureWeights& w);

struct VariantResult {
    ClosureVariant variant = ClosureVariant::M3;
    int free_parameters = 0;
    double train_cost = 0.0;
    ValidationScore test;
    ClosureWeights weights;
};

/// Fits each variant on the first `n_train` records and scores it on the rest.
std::vector<VariantResult> model_selection_study(const TrajectoryDatabase& db, int n_train,
                                                 std::span<const ClosureVariant> variants,
                                                 const ExperimentConfig& cfg);

struct EpisodeMetrics {
    int episode = 0;
    bool warmup = false;
    double reward = 0.0;
    bool failed = false;
    double assim_cost = std::numeric_limits<double>::quiet_NaN();
    bool buffer_updated = false;
    double mb_cost = std::numeric_limits<double>::quiet_NaN();
    double live_cost_virtual = std::numeric_limits<double>::quiet_NaN();
    double idle_cost_virtual = std::numeric_limits<double>::quiet_NaN();
    double rvet = std::numeric_limits<double>::quiet_NaN();
    bool rvet_in_bounds = false;
    // 1 when the model-free policy acted in the real environment.
    int p = 1;
    bool switch_signal = false;
    bool clone = false;
    bool rvet_fail = false;
    bool model_failed = false;
    double dw_idle = 0.0;
    double q_mean = 0.0;
    // Excluded from determinism comparisons.
    double wall_clock = 0.0;

    bool same_outcome(const EpisodeMetrics& o) const;
};

struct RunMetrics {
    std::uint64_t seed = 0;
    std::vector<EpisodeMetrics> rows;
    PolicyWeights final_mf;
    PolicyWeights final_mb;
    ClosureWeights final_closure;
    PolicyKind final_live = PolicyKind::ModelFree;
    // Noise-free real episode of the final live policy.
    EpisodeRecord final_episode;
    long long surrogate_evaluations = 0;
    std::vector<std::string> step_log;
    std::string error;

    double final_reward() const { return rows.empty() ? 0.0 : rows.back().reward; }
    bool same_outcome(const RunMetrics& o) const;
};

struct TrainingInputs {
    // Starting closure for the offline-calibrated scenarios.
    std::optional<ClosureWeights> closure;
    // Demonstration schedules replayed during warm-up (offline scenario).
    std::vector<std::vector<Action>> demonstrations;
};

/// Builds the inputs a scenario needs: the calibrated model and the
/// demonstration schedules from an unbiased trajectory database.
TrainingInputs prepare_inputs(const ExperimentConfig& cfg);

RunMetrics run_seed(const ExperimentConfig& cfg, const TrainingInputs& inputs, std::uint64_t seed);

/// One RunMetrics per seed, in seed order; seeds may run on worker threads.
std::vector<RunMetrics> run_training(const ExperimentConfig& cfg, const TrainingInputs& inputs);

struct SeriesSummary {
    std::vector<double> mean;
    std::vector<double> half_width;
};

/// Mean and 95 % normal confidence half-width (1.96 s / sqrt(n)) per index.
SeriesSummary summarize(const std::vector<std::vector<double>>& per_seed);

/// Fraction of seeds with the model_failed flag set, averaged over
/// episodes [first, last).
double model_failure_fraction(const std::vector<RunMetrics>& runs, int first, int last);

/// Writes one CSV per tracked quantity plus summary.json into `dir`.
void emit_report(const std::vector<RunMetrics>& runs, const std::filesystem::path& dir);

/// Per-seed metrics CSV and a run manifest with the config hash.
void write_run(const std::vector<RunMetrics>& runs, const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace rtwin
