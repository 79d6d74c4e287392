#include "rtwin/harness.hpp"
#include "rtwin/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace rtwin;

namespace {

ExperimentConfig tiny_config(AgentMode mode) {
    ExperimentConfig cfg;
    cfg.scenario = Scenario::C2Online;
    cfg.mode = mode;
    cfg.episodes = 8;
    cfg.n_e = 3;
    cfg.seeds = {11};
    cfg.ddpg.hidden = 16;
    cfg.ddpg.batch = 16;
    cfg.ddpg.n_q = 5;
    cfg.ddpg.n_a = 5;
    cfg.assim.n_g = 2;
    cfg.assim.n_mb = 2;
    return cfg;
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("rtwin_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

const RunMetrics& tiny_rt_run() {
    static const RunMetrics run = [] {
        const ExperimentConfig cfg = tiny_config(AgentMode::RtFull);
        return run_seed(cfg, prepare_inputs(cfg), 11);
    }();
    return run;
}

}  // namespace

TEST(Names, ScenarioAndModeRoundTrip) {
    for (Scenario s : {Scenario::C1Offline, Scenario::C2Online, Scenario::C3Biased}) {
        EXPECT_EQ(parse_scenario(to_string(s)), s);
    }
    for (AgentMode m : {AgentMode::RtFull, AgentMode::MfOnly, AgentMode::MbOnly}) {
        EXPECT_EQ(parse_agent_mode(to_string(m)), m);
    }
    EXPECT_EQ(parse_scenario("C2"), Scenario::C2Online);
    EXPECT_THROW(parse_scenario("C4"), std::invalid_argument);
    EXPECT_THROW(parse_agent_mode("hybrid"), std::invalid_argument);
}

TEST(Config, BiasedScenarioNeedsABias) {
    ExperimentConfig cfg;
    cfg.scenario = Scenario::C3Biased;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg.bias = Bias::Mass33;
    EXPECT_NO_THROW(cfg.validate());
    const ExperimentConfig parsed = config_from_json(Json{{"scenario", "C3_biased"}});
    EXPECT_EQ(parsed.bias, Bias::Mass33);
}

TEST(Config, JsonRoundTripIsExact) {
    ExperimentConfig cfg;
    cfg.episodes = 17;
    cfg.seeds = {3, 9};
    cfg.reward.eta = 0.37;
    cfg.assim.lr_assim = 1.0 / 3.0;
    cfg.referee.c_pi = 4;
    cfg.bounds.hi[1] = deg2rad(25.0);
    cfg.buffer = BufferStrategy::MinError;
    const Json j = to_json(cfg);
    const ExperimentConfig back = config_from_json(j);
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(back.assim.lr_assim, 1.0 / 3.0);
    EXPECT_EQ(back.seeds, cfg.seeds);
    EXPECT_EQ(config_hash(back), config_hash(cfg));
}

TEST(Config, UsesTableNames) {
    const Json j = to_json(ExperimentConfig{});
    for (const char* key : {"T0", "dt", "Nc", "Nep", "Ns", "NR1", "na", "nq", "np", "Ne", "nG", "nmb", "CM", "Cpi",
                            "Cw", "TJ", "TJi", "Tw", "RVETl", "RVETu"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j.at("Nc"), 30);
    EXPECT_EQ(j.at("np"), 36);
}

TEST(Config, InconsistentCycleCountThrows) {
    Json j = to_json(ExperimentConfig{});
    j["Nc"] = 31;
    EXPECT_THROW(config_from_json(j), std::invalid_argument);
}

TEST(Config, HashChangesWithContent) {
    ExperimentConfig a, b;
    b.episodes = 61;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Serialization, PolicyAndClosureRoundTripBitExact) {
    Rng rng(1);
    std::normal_distribution<double> n;
    PolicyWeights p;
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 6; ++c) p.gain(i, c) = n(rng);
        p.bias[i] = n(rng) * 1e-7;
    }
    p.freeze_bias = {true, false, true};
    const PolicyWeights pb = policy_from_json(Json::parse(to_json(p).dump()));
    EXPECT_EQ(pb.gain, p.gain);
    EXPECT_EQ(pb.bias, p.bias);
    EXPECT_EQ(pb.freeze_bias, p.freeze_bias);
    EXPECT_EQ(pb.bounds.lo, p.bounds.lo);

    ClosureWeights w;
    w.variant = ClosureVariant::M4;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 18; ++j) w.w(i, j) = n(rng) * std::pow(10.0, j % 7 - 3);
    }
    EXPECT_TRUE(closure_from_json(Json::parse(to_json(w).dump())) == w);
}

TEST(Serialization, CriticRoundTripBitExact) {
    CriticNet net(8);
    Rng rng(2);
    net.initialize(rng);
    const CriticNet back = critic_from_json(Json::parse(to_json(net).dump()));
    EXPECT_EQ(back.hidden(), 8);
    EXPECT_EQ(back.params(), net.params());
}

TEST(Serialization, EpisodeAndDatabaseRoundTrip) {
    ExperimentConfig cfg;
    cfg.real.episode_time = 0.2;
    const TrajectoryDatabase db = generate_database(3, 5, cfg);
    ASSERT_EQ(db.records.size(), 3u);
    const TrajectoryDatabase back = database_from_json(Json::parse(to_json(db).dump()));
    ASSERT_EQ(back.records.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(back.records[i] == db.records[i]);
    EXPECT_EQ(back.resampled, db.resampled);
}

TEST(Serialization, EpisodeCsvHasOneRowPerCycleBoundary) {
    ExperimentConfig cfg;
    cfg.real.episode_time = 0.2;
    const TrajectoryDatabase db = generate_database(1, 6, cfg);
    std::ostringstream os;
    write_episode_csv(os, db.records[0]);
    std::istringstream is(os.str());
    std::string line;
    int lines = 0;
    while (std::getline(is, line)) ++lines;
    // Header plus the initial state and one state per cycle.
    EXPECT_EQ(lines, 1 + 5);
}

TEST(Database, IsDeterministicAndComplete) {
    ExperimentConfig cfg;
    cfg.real.episode_time = 0.3;
    const TrajectoryDatabase a = generate_database(4, 7, cfg);
    const TrajectoryDatabase b = generate_database(4, 7, cfg);
    ASSERT_EQ(a.records.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_TRUE(a.records[i] == b.records[i]);
        EXPECT_TRUE(a.records[i].complete());
    }
}

TEST(Summary, MeanAndConfidenceHalfWidth) {
    const SeriesSummary s = summarize({{1.0, 10.0}, {3.0, 10.0}, {5.0, 10.0}});
    ASSERT_EQ(s.mean.size(), 2u);
    EXPECT_DOUBLE_EQ(s.mean[0], 3.0);
    // Sample std 2, n = 3.
    EXPECT_NEAR(s.half_width[0], 1.96 * 2.0 / std::sqrt(3.0), 1e-12);
    EXPECT_EQ(s.half_width[1], 0.0);
}

TEST(Summary, SingleSeedHasZeroWidthAndRaggedSeriesTruncate) {
    const SeriesSummary one = summarize({{4.0, 5.0}});
    EXPECT_EQ(one.half_width, (std::vector<double>{0.0, 0.0}));
    const SeriesSummary ragged = summarize({{1.0, 2.0, 3.0}, {1.0}});
    EXPECT_EQ(ragged.mean.size(), 1u);
    EXPECT_TRUE(summarize({}).mean.empty());
}

TEST(Summary, ModelFailureFraction) {
    std::vector<RunMetrics> runs(2);
    for (int e = 0; e < 4; ++e) {
        EpisodeMetrics m;
        m.episode = e;
        m.model_failed = e < 2;
        runs[0].rows.push_back(m);
        m.model_failed = e == 0;
        runs[1].rows.push_back(m);
    }
    EXPECT_DOUBLE_EQ(model_failure_fraction(runs, 0, 2), (1.0 + 0.5) / 2.0);
    EXPECT_DOUBLE_EQ(model_failure_fraction(runs, 2, 4), 0.0);
    EXPECT_DOUBLE_EQ(model_failure_fraction(runs, 0, 4), 1.5 / 4.0);
}

TEST(Training, RunIsBitIdenticalAcrossReruns) {
    const ExperimentConfig cfg = tiny_config(AgentMode::RtFull);
    const RunMetrics again = run_seed(cfg, prepare_inputs(cfg), 11);
    ASSERT_TRUE(tiny_rt_run().error.empty()) << tiny_rt_run().error;
    EXPECT_TRUE(tiny_rt_run().same_outcome(again));
    EXPECT_EQ(tiny_rt_run().rows.size(), 8u);
}

TEST(Training, DifferentSeedsDiffer) {
    const ExperimentConfig cfg = tiny_config(AgentMode::RtFull);
    const RunMetrics other = run_seed(cfg, prepare_inputs(cfg), 12);
    EXPECT_FALSE(tiny_rt_run().same_outcome(other));
}

TEST(Training, WarmupRowsComeFirst) {
    const RunMetrics& r = tiny_rt_run();
    for (const EpisodeMetrics& m : r.rows) {
        EXPECT_EQ(m.warmup, m.episode < 3);
        if (m.warmup) {
            EXPECT_FALSE(m.switch_signal);
            EXPECT_FALSE(m.clone);
        }
    }
}

TEST(Training, CalibratedModelIsConsultedDuringWarmup) {
    ExperimentConfig cfg = tiny_config(AgentMode::RtFull);
    cfg.scenario = Scenario::C1Offline;
    cfg.database_size = 3;
    cfg.database_train = 2;
    cfg.offline.iterations = 5;
    const RunMetrics r = run_seed(cfg, prepare_inputs(cfg), 11);
    ASSERT_TRUE(r.error.empty()) << r.error;
    for (const EpisodeMetrics& m : r.rows) {
        // Virtual costs from the start, trust values only once policies act.
        EXPECT_FALSE(std::isnan(m.live_cost_virtual)) << m.episode;
        if (m.warmup) EXPECT_TRUE(std::isnan(m.rvet)) << m.episode;
    }
    // Trust needs two real episodes from the policies.
    EXPECT_TRUE(std::isnan(r.rows[3].rvet));
    EXPECT_FALSE(std::isnan(r.rows[4].rvet));
}

TEST(Training, StepLogFollowsTheLoopOrder) {
    const RunMetrics& r = tiny_rt_run();
    ASSERT_EQ(r.step_log.size(), 8u * 7u);
    for (int e = 0; e < 8; ++e) {
        for (int s = 1; s <= 7; ++s) {
            EXPECT_EQ(r.step_log[static_cast<std::size_t>(e * 7 + s - 1)],
                      "episode " + std::to_string(e) + " step " + std::to_string(s));
        }
    }
}

TEST(Training, ModelFreeOnlyNeverTouchesTheSurrogate) {
    const ExperimentConfig cfg = tiny_config(AgentMode::MfOnly);
    const RunMetrics r = run_seed(cfg, prepare_inputs(cfg), 11);
    ASSERT_TRUE(r.error.empty()) << r.error;
    EXPECT_EQ(r.surrogate_evaluations, 0);
    for (const EpisodeMetrics& m : r.rows) {
        EXPECT_EQ(m.p, 1);
        EXPECT_TRUE(std::isnan(m.assim_cost));
    }
    EXPECT_EQ(r.step_log.size(), 8u * 3u);
}

TEST(Training, ModelBasedOnlyKeepsModelBasedLive) {
    const ExperimentConfig cfg = tiny_config(AgentMode::MbOnly);
    const RunMetrics r = run_seed(cfg, prepare_inputs(cfg), 11);
    ASSERT_TRUE(r.error.empty()) << r.error;
    EXPECT_GT(r.surrogate_evaluations, 0);
    for (const EpisodeMetrics& m : r.rows) {
        EXPECT_EQ(m.p, 0);
        EXPECT_FALSE(m.clone);
    }
    EXPECT_EQ(r.final_live, PolicyKind::ModelBased);
}

TEST(Training, ThreadedRunMatchesSerialRun) {
    ExperimentConfig cfg = tiny_config(AgentMode::RtFull);
    cfg.seeds = {11, 12};
    const TrainingInputs in = prepare_inputs(cfg);
    const auto serial = run_training(cfg, in);
    cfg.threads = 2;
    const auto threaded = run_training(cfg, in);
    ASSERT_EQ(serial.size(), 2u);
    EXPECT_EQ(serial[0].seed, 11u);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_TRUE(serial[i].same_outcome(threaded[i]));
    EXPECT_TRUE(serial[0].same_outcome(tiny_rt_run()));
}

TEST(Training, SeedErrorIsCaptured) {
    ExperimentConfig cfg = tiny_config(AgentMode::RtFull);
    cfg.referee.rvet_lo = 100.0;
    const RunMetrics r = run_seed(cfg, TrainingInputs{}, 1);
    EXPECT_FALSE(r.error.empty());
}

TEST(Output, MetricsCsvRow) {
    EpisodeMetrics m;
    m.episode = 3;
    m.reward = -1.5;
    m.clone = true;
    const std::string row = metrics_csv_row(9, m);
    EXPECT_EQ(row.substr(0, 13), "9,3,0,-1.5,0,");
    // NaN fields stay empty.
    EXPECT_NE(row.find(",,"), std::string::npos);
    std::size_t commas = 0;
    for (char c : row) commas += c == ',' ? 1 : 0;
    std::size_t header_commas = 0;
    for (char c : metrics_csv_header()) header_commas += c == ',' ? 1 : 0;
    EXPECT_EQ(commas, header_commas);
}

TEST(Output, WriteAndReadRunRoundTrip) {
    const ExperimentConfig cfg = tiny_config(AgentMode::RtFull);
    const std::vector<RunMetrics> runs{tiny_rt_run()};
    const auto dir = temp_dir("run");
    write_run(runs, cfg, dir);
    EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "final_episode_seed11.csv"));
    const Json manifest = read_json_file(dir / "manifest.json");
    EXPECT_EQ(manifest.at("schema_version"), 1);
    EXPECT_EQ(manifest.at("config_hash"), config_hash(cfg));

    const auto back = read_run(dir);
    ASSERT_EQ(back.size(), 1u);
    const RunMetrics& a = runs[0];
    const RunMetrics& b = back[0];
    ASSERT_EQ(b.rows.size(), a.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_TRUE(a.rows[i].same_outcome(b.rows[i])) << i;
    EXPECT_TRUE(b.final_episode == a.final_episode);
    EXPECT_TRUE(b.final_closure == a.final_closure);
    EXPECT_EQ(b.final_mf.gain, a.final_mf.gain);
    EXPECT_EQ(b.final_live, a.final_live);
    std::filesystem::remove_all(dir);
}

TEST(Output, ReportWritesOneCsvPerQuantity) {
    ExperimentConfig cfg = tiny_config(AgentMode::RtFull);
    const auto dir = temp_dir("report");
    emit_report({tiny_rt_run(), tiny_rt_run()}, dir);
    for (const char* name : {"reward", "live_policy", "model_failure", "clone", "assim_cost", "q_value",
                             "live_cost_virtual", "idle_cost_virtual"}) {
        const auto path = dir / (std::string(name) + ".csv");
        ASSERT_TRUE(std::filesystem::exists(path)) << name;
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        EXPECT_EQ(header, "episode,mean,ci_low,ci_high,n");
        int rows = 0;
        std::string line;
        while (std::getline(in, line)) rows += line.empty() ? 0 : 1;
        EXPECT_EQ(rows, cfg.episodes);
    }
    const Json summary = read_json_file(dir / "summary.json");
    EXPECT_DOUBLE_EQ(summary.at("reward").at("final_mean").get<double>(), tiny_rt_run().final_reward());
    EXPECT_DOUBLE_EQ(summary.at("reward").at("final_half_width").get<double>(), 0.0);
    std::filesystem::remove_all(dir);
}
