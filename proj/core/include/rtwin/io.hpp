#pragma once

#include "rtwin/harness.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>

namespace rtwin {

using Json = nlohmann::json;

Json to_json(const PolicyWeights& w);
PolicyWeights policy_from_json(const Json& j);

/// Round-trips bit-exactly: doubles are written in shortest exact form.
Json to_json(const ClosureWeights& w);
ClosureWeights closure_from_json(const Json& j);

Json to_json(const CriticNet& net);
CriticNet critic_from_json(const Json& j);

Json to_json(const EpisodeRecord& rec);
EpisodeRecord episode_from_json(const Json& j);

/// Columns t_k, six states, three actions, reward; one row per cycle.
void write_episode_csv(std::ostream& os, const EpisodeRecord& rec);

Json to_json(const TrajectoryDatabase& db);
TrajectoryDatabase database_from_json(const Json& j);

/// Config keys mirror the hyperparameter table names (T0, dt, Nc, Nep, ...).
Json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults.
ExperimentConfig config_from_json(const Json& j);

Json to_json(const RunMetrics& m);

/// Column order of the per-episode metrics CSV.
std::string metrics_csv_header();
std::string metrics_csv_row(std::uint64_t seed, const EpisodeMetrics& m);

/// Rebuilds per-seed metrics from a run directory written by write_run:
/// rows from metrics.csv, final weights and episode from manifest.json.
std::vector<RunMetrics> read_run(const std::filesystem::path& dir);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

/// FNV-1a over the compact config dump.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace rtwin
