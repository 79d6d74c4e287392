#include "rtwin/harness.hpp"
#include "rtwin/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace rtwin;

struct CommonOptions {
    std::string config_path;
    std::string scenario;
    std::string mode;
    std::string buffer;
    std::string bias;
    std::vector<std::uint64_t> seeds;
    int episodes = 0;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--scenario", o.scenario, "C1_offline | C2_online | C3_biased");
    cmd->add_option("--mode", o.mode, "rt_full | mf_only | mb_only");
    cmd->add_option("--buffer", o.buffer, "max_variance | min_error");
    cmd->add_option("--bias", o.bias, "none | mass_33pct | cop_3mm");
    cmd->add_option("--seeds", o.seeds, "Seed list")->delimiter(',');
    cmd->add_option("--episodes", o.episodes, "Episodes per seed");
    cmd->add_option("--threads", o.threads, "Worker threads for seeds");
}

ExperimentConfig build_config(const CommonOptions& o) {
    ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : config_from_json(read_json_file(o.config_path));
    if (!o.scenario.empty()) {
        cfg.scenario = parse_scenario(o.scenario);
        // The biased scenario defaults to the mass bias unless one is given.
        if (cfg.scenario == Scenario::C3Biased && o.bias.empty() && cfg.bias == Bias::None) cfg.bias = Bias::Mass33;
    }
    if (!o.mode.empty()) cfg.mode = parse_agent_mode(o.mode);
    if (!o.buffer.empty()) cfg.buffer = parse_buffer_strategy(o.buffer);
    if (!o.bias.empty()) cfg.bias = parse_bias(o.bias);
    if (!o.seeds.empty()) cfg.seeds = o.seeds;
    if (o.episodes > 0) cfg.episodes = o.episodes;
    if (o.threads > 0) cfg.threads = o.threads;
    cfg.validate();
    return cfg;
}

void print_summary(const std::vector<RunMetrics>& runs) {
    for (const RunMetrics& r : runs) {
        if (!r.error.empty()) {
            std::printf("seed %llu: error: %s\n", static_cast<unsigned long long>(r.seed), r.error.c_str());
            continue;
        }
        int failures = 0;
        for (const EpisodeMetrics& m : r.rows) failures += m.model_failed ? 1 : 0;
        std::printf("seed %llu: last episode reward %.3f, final %s policy reward %.3f, model-failure episodes %d\n",
                    static_cast<unsigned long long>(r.seed), r.final_reward(),
                    std::string(to_string(r.final_live)).c_str(), cumulative_reward(r.final_episode), failures);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reinforcement twinning for a flapping-wing drone"};
    app.require_subcommand(1);

    CommonOptions db_opts;
    int db_count = 40;
    std::uint64_t db_seed = 0;
    std::string db_out = "database.json";
    auto* gen = app.add_subcommand("generate-db", "Sample Gaussian-process trajectories in the real environment");
    add_common(gen, db_opts);
    gen->add_option("-n,--count", db_count, "Number of trajectories")->check(CLI::PositiveNumber);
    gen->add_option("--db-seed", db_seed, "Database seed (default from config)");
    gen->add_option("-o,--out", db_out, "Output JSON file");

    CommonOptions sel_opts;
    std::string sel_db;
    int sel_train = 0;
    std::vector<std::string> sel_variants{"M1", "M2", "M3", "M4", "M5"};
    std::string sel_out = "model_selection.json";
    auto* sel = app.add_subcommand("select-model", "Fit closure variants offline and score them on held-out data");
    add_common(sel, sel_opts);
    sel->add_option("--db", sel_db, "Database JSON (generated from the config when omitted)");
    sel->add_option("--train", sel_train, "Training trajectories (default from config)");
    sel->add_option("--variants", sel_variants, "Closure variants")->delimiter(',');
    sel->add_option("-o,--out", sel_out, "Output JSON file");

    CommonOptions train_opts;
    std::string train_out = "run";
    auto* train = app.add_subcommand("train", "Run the training loop for every seed");
    add_common(train, train_opts);
    train->add_option("-o,--out", train_out, "Output directory");

    std::string report_run;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Aggregate a run directory into per-quantity CSVs");
    report->add_option("run", report_run, "Run directory written by train")->required()->check(CLI::ExistingDirectory);
    report->add_option("-o,--out", report_out, "Report directory (default <run>/report)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const ExperimentConfig cfg = build_config(db_opts);
            const TrajectoryDatabase db =
                generate_database(db_count, gen->count("--db-seed") > 0 ? db_seed : cfg.database_seed, cfg);
            write_json_file(db_out, to_json(db));
            std::printf("%zu trajectories (%d resampled) -> %s\n", db.records.size(), db.resampled, db_out.c_str());
        } else if (*sel) {
            const ExperimentConfig cfg = build_config(sel_opts);
            const TrajectoryDatabase db = sel_db.empty()
                                              ? generate_database(cfg.database_size, cfg.database_seed, cfg)
                                              : database_from_json(read_json_file(sel_db));
            std::vector<ClosureVariant> variants;
            for (const auto& v : sel_variants) variants.push_back(parse_variant(v));
            const int n_train = sel_train > 0 ? sel_train : cfg.database_train;
            const auto results = model_selection_study(db, n_train, variants, cfg);
            Json out = Json::array();
            std::printf("variant  params  train_cost  test_error  pearson(xdot zdot thetadot x z theta)\n");
            for (const VariantResult& r : results) {
                std::printf("%-7s  %6d  %10.4g  %10.4g ", std::string(to_string(r.variant)).c_str(), r.free_parameters,
                            r.train_cost, r.test.error);
                for (double p : r.test.pearson) std::printf(" %.4f", p);
                std::printf("\n");
                out.push_back({{"variant", std::string(to_string(r.variant))},
                               {"free_parameters", r.free_parameters},
                               {"train_cost", r.train_cost},
                               {"test_error", r.test.error},
                               {"pearson", r.test.pearson},
                               {"weights", to_json(r.weights)}});
            }
            write_json_file(sel_out, out);
        } else if (*train) {
            const ExperimentConfig cfg = build_config(train_opts);
            const TrainingInputs inputs = prepare_inputs(cfg);
            const auto runs = run_training(cfg, inputs);
            write_run(runs, cfg, train_out);
            emit_report(runs, std::filesystem::path(train_out) / "report");
            print_summary(runs);
            std::printf("run written to %s (config %s)\n", train_out.c_str(), config_hash(cfg).c_str());
        } else if (*report) {
            const auto runs = read_run(report_run);
            const std::filesystem::path out =
                report_out.empty() ? std::filesystem::path(report_run) / "report" : std::filesystem::path(report_out);
            emit_report(runs, out);
            print_summary(runs);
            std::printf("report written to %s\n", out.string().c_str());
        }
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}
