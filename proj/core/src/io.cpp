#include "rtwin/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rtwin {

namespace {

template <class Derived>
Json vec_json(const Eigen::MatrixBase<Derived>& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

template <int N>
Eigen::Matrix<double, N, 1> fixed_vec(const Json& j) {
    if (!j.is_array() || static_cast<int>(j.size()) != N) throw std::invalid_argument("vector length mismatch");
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

Json deg_json(const Action& a) { return vec_json(Action(a * (180.0 / kPi))); }
Action deg_vec(const Json& j) { return fixed_vec<3>(j) * (kPi / 180.0); }

template <class T>
void read_if(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Json to_json(const PolicyWeights& w) {
    Json j;
    j["gain"] = vec_json(Eigen::Map<const Eigen::Matrix<double, 18, 1>>(w.gain.data()));
    j["bias"] = vec_json(w.bias);
    j["bounds_lo"] = vec_json(w.bounds.lo);
    j["bounds_hi"] = vec_json(w.bounds.hi);
    j["freeze_bias"] = w.freeze_bias;
    return j;
}

PolicyWeights policy_from_json(const Json& j) {
    PolicyWeights w;
    const auto g = fixed_vec<18>(j.at("gain"));
    Eigen::Map<Eigen::Matrix<double, 18, 1>>(w.gain.data()) = g;
    w.bias = fixed_vec<3>(j.at("bias"));
    w.bounds.lo = fixed_vec<3>(j.at("bounds_lo"));
    w.bounds.hi = fixed_vec<3>(j.at("bounds_hi"));
    w.freeze_bias = j.at("freeze_bias").get<std::array<bool, 3>>();
    return w;
}

Json to_json(const ClosureWeights& w) {
    Json j;
    j["variant"] = std::string(to_string(w.variant));
    Json rows = Json::array();
    for (int i = 0; i < 3; ++i) rows.push_back(vec_json(w.w.row(i).transpose()));
    j["w"] = rows;
    j["action_scale"] = vec_json(w.action_scale);
    return j;
}

ClosureWeights closure_from_json(const Json& j) {
    ClosureWeights w;
    w.variant = parse_variant(j.at("variant").get<std::string>());
    const Json& rows = j.at("w");
    if (!rows.is_array() || rows.size() != 3) throw std::invalid_argument("closure needs three rows");
    for (int i = 0; i < 3; ++i) {
        const auto r = fixed_vec<kClosureFeatures>(rows[static_cast<std::size_t>(i)]);
        w.w.row(i) = r.transpose();
    }
    w.action_scale = fixed_vec<3>(j.at("action_scale"));
    return w;
}

Json to_json(const CriticNet& net) {
    Json j;
    j["hidden"] = net.hidden();
    j["params"] = vec_json(net.params());
    return j;
}

CriticNet critic_from_json(const Json& j) {
    CriticNet net(j.at("hidden").get<int>());
    const Json& p = j.at("params");
    if (!p.is_array() || static_cast<Eigen::Index>(p.size()) != net.param_count()) {
        throw std::invalid_argument("critic parameter count mismatch");
    }
    for (Eigen::Index i = 0; i < net.param_count(); ++i) net.params()[i] = p[static_cast<std::size_t>(i)].get<double>();
    return net;
}

Json to_json(const EpisodeRecord& rec) {
    Json j;
    Json states = Json::array();
    for (const State& s : rec.states) states.push_back(vec_json(s));
    Json actions = Json::array();
    for (const Action& a : rec.actions) actions.push_back(vec_json(a));
    j["states"] = states;
    j["actions"] = actions;
    j["rewards"] = rec.rewards;
    j["target"] = vec_json(rec.target);
    j["cycle_period"] = rec.cycle_period;
    j["planned_cycles"] = rec.planned_cycles;
    j["failed"] = rec.failed;
    j["failed_cycle"] = rec.failed_cycle;
    j["seed"] = rec.seed;
    return j;
}

EpisodeRecord episode_from_json(const Json& j) {
    EpisodeRecord rec;
    for (const Json& s : j.at("states")) rec.states.push_back(fixed_vec<6>(s));
    for (const Json& a : j.at("actions")) rec.actions.push_back(fixed_vec<3>(a));
    rec.rewards = j.at("rewards").get<std::vector<double>>();
    rec.target = fixed_vec<6>(j.at("target"));
    rec.cycle_period = j.at("cycle_period").get<double>();
    rec.planned_cycles = j.at("planned_cycles").get<int>();
    rec.failed = j.at("failed").get<bool>();
    rec.failed_cycle = j.at("failed_cycle").get<int>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    return rec;
}

void write_episode_csv(std::ostream& os, const EpisodeRecord& rec) {
    os << "t,xdot,zdot,thetadot,x,z,theta,A_phi,beta,A_off,reward\n";
    os << std::setprecision(17);
    for (std::size_t k = 0; k < rec.states.size(); ++k) {
        os << static_cast<double>(k) * rec.cycle_period;
        for (int c = 0; c < 6; ++c) os << ',' << rec.states[k][c];
        for (int c = 0; c < 3; ++c) {
            os << ',';
            if (k < rec.actions.size()) os << rec.actions[k][c];
        }
        os << ',';
        if (k < rec.rewards.size()) os << rec.rewards[k];
        os << '\n';
    }
}

Json to_json(const TrajectoryDatabase& db) {
    Json j;
    j["resampled"] = db.resampled;
    Json recs = Json::array();
    for (const EpisodeRecord& r : db.records) recs.push_back(to_json(r));
    j["records"] = recs;
    return j;
}

TrajectoryDatabase database_from_json(const Json& j) {
    TrajectoryDatabase db;
    db.resampled = j.value("resampled", 0);
    for (const Json& r : j.at("records")) db.records.push_back(episode_from_json(r));
    return db;
}

Json to_json(const ExperimentConfig& c) {
    Json j;
    j["T0"] = c.real.episode_time;
    j["dt"] = c.real.cycle_period();
    j["Nc"] = c.cycles();
    j["Nep"] = c.episodes;
    j["Ns"] = c.seeds.size();
    j["seeds"] = c.seeds;
    j["NR1"] = c.ddpg.buffer_capacity;
    j["na"] = c.ddpg.n_a;
    j["nq"] = c.ddpg.n_q;
    j["np"] = ClosureWeights{.variant = c.variant}.free_count();
    j["Ne"] = c.n_e;
    j["nG"] = c.assim.n_g;
    j["nmb"] = c.assim.n_mb;
    j["CM"] = c.referee.c_m;
    j["Cpi"] = c.referee.c_pi;
    j["Cw"] = c.referee.c_w;
    j["TJ"] = c.referee.t_j;
    j["TJi"] = c.referee.t_ji;
    j["Tw"] = c.referee.t_w;
    j["RVETl"] = c.referee.rvet_lo;
    j["RVETu"] = c.referee.rvet_hi;

    j["scenario"] = std::string(to_string(c.scenario));
    j["mode"] = std::string(to_string(c.mode));
    j["buffer"] = std::string(to_string(c.buffer));
    j["bias"] = std::string(to_string(c.bias));
    j["variant"] = std::string(to_string(c.variant));
    j["threads"] = c.threads;
    j["target"] = vec_json(c.target);
    j["action_bounds_deg"] = {{"lo", deg_json(c.bounds.lo)}, {"hi", deg_json(c.bounds.hi)}};
    j["freeze_bias"] = c.freeze_bias;
    j["policy_init_std"] = c.policy_init_std;
    j["closure_init_std"] = c.closure_init_std;
    j["virtual_substeps"] = c.virtual_substeps;

    const DroneGeometry& g = c.real.geometry;
    j["vehicle"] = {{"mean_chord", g.mean_chord},   {"span", g.span},           {"root_offset", g.root_offset},
                    {"body_mass", g.body_mass},     {"body_radius", g.body_radius}, {"inertia_yy", g.inertia_yy},
                    {"air_density", g.air_density}, {"gravity", g.gravity}};
    j["aero"] = {{"a_lift", c.real.aero.a_lift}, {"b_drag", c.real.aero.b_drag}, {"c_drag", c.real.aero.c_drag}};
    j["simulation"] = {{"pitch_amplitude", c.real.pitch_amplitude},
                       {"substeps_per_cycle", c.real.substeps_per_cycle},
                       {"span_stations", c.real.span_stations},
                       {"blow_up_bound", c.real.blow_up_bound}};
    j["reward"] = {{"eta", c.reward.eta}, {"sigma", vec_json(c.reward.sigma)}};
    j["assimilation"] = {{"alpha_p", c.assim.alpha_p}, {"lr_assim", c.assim.lr_assim}, {"lr_policy", c.assim.lr_policy}};
    j["ddpg"] = {{"hidden", c.ddpg.hidden},         {"gamma", c.ddpg.gamma},
                 {"zeta", c.ddpg.zeta},             {"critic_lr", c.ddpg.critic_lr},
                 {"actor_lr", c.ddpg.actor_lr},     {"batch", c.ddpg.batch},
                 {"noise_start", c.ddpg.noise_start}, {"noise_end", c.ddpg.noise_end},
                 {"error_scale", vec_json(c.ddpg.error_scale)}};
    j["referee"] = {{"window", c.referee.window},
                    {"eps_div", c.referee.eps_div},
                    {"trend_deadband", c.referee.trend_deadband},
                    {"comparison", c.referee.comparison == CostComparison::Ratio ? "ratio" : "difference"}};
    j["gp"] = {{"length_scale", c.gp.length_scale}, {"sigma_fraction", c.gp.sigma_fraction}};
    j["offline"] = {{"regression_init", c.offline.regression_init},
                    {"ridge", c.offline.ridge},
                    {"iterations", c.offline.iterations},
                    {"lr_start", c.offline.lr_start},
                    {"lr_end", c.offline.lr_end},
                    {"alpha_p", c.offline.alpha_p}};
    j["database"] = {{"size", c.database_size}, {"train", c.database_train}, {"seed", c.database_seed}};
    return j;
}

ExperimentConfig config_from_json(const Json& j) {
    ExperimentConfig c;
    read_if(j, "T0", c.real.episode_time);
    if (j.contains("dt")) c.real.flap_frequency = 1.0 / j.at("dt").get<double>();
    read_if(j, "Nep", c.episodes);
    if (j.contains("seeds")) {
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } else if (j.contains("Ns")) {
        const auto n = j.at("Ns").get<std::uint64_t>();
        c.seeds.clear();
        for (std::uint64_t s = 1; s <= n; ++s) c.seeds.push_back(s);
    }
    if (j.contains("seeds") && j.contains("Ns") && j.at("Ns").get<std::size_t>() != c.seeds.size()) {
        throw std::invalid_argument("Ns disagrees with the seed list");
    }
    read_if(j, "NR1", c.ddpg.buffer_capacity);
    read_if(j, "na", c.ddpg.n_a);
    read_if(j, "nq", c.ddpg.n_q);
    read_if(j, "Ne", c.n_e);
    read_if(j, "nG", c.assim.n_g);
    read_if(j, "nmb", c.assim.n_mb);
    read_if(j, "CM", c.referee.c_m);
    read_if(j, "Cpi", c.referee.c_pi);
    read_if(j, "Cw", c.referee.c_w);
    read_if(j, "TJ", c.referee.t_j);
    read_if(j, "TJi", c.referee.t_ji);
    read_if(j, "Tw", c.referee.t_w);
    read_if(j, "RVETl", c.referee.rvet_lo);
    read_if(j, "RVETu", c.referee.rvet_hi);

    if (j.contains("scenario")) c.scenario = parse_scenario(j.at("scenario").get<std::string>());
    if (j.contains("mode")) c.mode = parse_agent_mode(j.at("mode").get<std::string>());
    if (j.contains("buffer")) c.buffer = parse_buffer_strategy(j.at("buffer").get<std::string>());
    if (j.contains("bias")) {
        c.bias = parse_bias(j.at("bias").get<std::string>());
    } else if (c.scenario == Scenario::C3Biased) {
        c.bias = Bias::Mass33;
    }
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    read_if(j, "threads", c.threads);
    if (j.contains("target")) c.target = fixed_vec<6>(j.at("target"));
    if (j.contains("action_bounds_deg")) {
        const Json& b = j.at("action_bounds_deg");
        if (b.contains("lo")) c.bounds.lo = deg_vec(b.at("lo"));
        if (b.contains("hi")) c.bounds.hi = deg_vec(b.at("hi"));
    }
    read_if(j, "freeze_bias", c.freeze_bias);
    read_if(j, "policy_init_std", c.policy_init_std);
    read_if(j, "closure_init_std", c.closure_init_std);
    read_if(j, "virtual_substeps", c.virtual_substeps);

    if (j.contains("vehicle")) {
        const Json& v = j.at("vehicle");
        DroneGeometry& g = c.real.geometry;
        read_if(v, "mean_chord", g.mean_chord);
        read_if(v, "span", g.span);
        read_if(v, "root_offset", g.root_offset);
        read_if(v, "body_mass", g.body_mass);
        read_if(v, "body_radius", g.body_radius);
        read_if(v, "inertia_yy", g.inertia_yy);
        read_if(v, "air_density", g.air_density);
        read_if(v, "gravity", g.gravity);
    }
    if (j.contains("aero")) {
        const Json& a = j.at("aero");
        read_if(a, "a_lift", c.real.aero.a_lift);
        read_if(a, "b_drag", c.real.aero.b_drag);
        read_if(a, "c_drag", c.real.aero.c_drag);
    }
    if (j.contains("simulation")) {
        const Json& s = j.at("simulation");
        read_if(s, "pitch_amplitude", c.real.pitch_amplitude);
        read_if(s, "substeps_per_cycle", c.real.substeps_per_cycle);
        read_if(s, "span_stations", c.real.span_stations);
        read_if(s, "blow_up_bound", c.real.blow_up_bound);
    }
    if (j.contains("reward")) {
        const Json& r = j.at("reward");
        read_if(r, "eta", c.reward.eta);
        if (r.contains("sigma")) c.reward.sigma = fixed_vec<3>(r.at("sigma"));
    }
    if (j.contains("assimilation")) {
        const Json& a = j.at("assimilation");
        read_if(a, "alpha_p", c.assim.alpha_p);
        read_if(a, "lr_assim", c.assim.lr_assim);
        read_if(a, "lr_policy", c.assim.lr_policy);
    }
    if (j.contains("ddpg")) {
        const Json& d = j.at("ddpg");
        read_if(d, "hidden", c.ddpg.hidden);
        read_if(d, "gamma", c.ddpg.gamma);
        read_if(d, "zeta", c.ddpg.zeta);
        read_if(d, "critic_lr", c.ddpg.critic_lr);
        read_if(d, "actor_lr", c.ddpg.actor_lr);
        read_if(d, "batch", c.ddpg.batch);
        read_if(d, "noise_start", c.ddpg.noise_start);
        read_if(d, "noise_end", c.ddpg.noise_end);
        if (d.contains("error_scale")) c.ddpg.error_scale = fixed_vec<6>(d.at("error_scale"));
    }
    if (j.contains("referee")) {
        const Json& r = j.at("referee");
        read_if(r, "window", c.referee.window);
        read_if(r, "eps_div", c.referee.eps_div);
        read_if(r, "trend_deadband", c.referee.trend_deadband);
        if (r.contains("comparison")) {
            const auto s = r.at("comparison").get<std::string>();
            if (s == "ratio") {
                c.referee.comparison = CostComparison::Ratio;
            } else if (s == "difference") {
                c.referee.comparison = CostComparison::Difference;
            } else {
                throw std::invalid_argument("unknown cost comparison: " + s);
            }
        }
    }
    if (j.contains("gp")) {
        read_if(j.at("gp"), "length_scale", c.gp.length_scale);
        read_if(j.at("gp"), "sigma_fraction", c.gp.sigma_fraction);
    }
    if (j.contains("offline")) {
        const Json& o = j.at("offline");
        read_if(o, "regression_init", c.offline.regression_init);
        read_if(o, "ridge", c.offline.ridge);
        read_if(o, "iterations", c.offline.iterations);
        read_if(o, "lr_start", c.offline.lr_start);
        read_if(o, "lr_end", c.offline.lr_end);
        read_if(o, "alpha_p", c.offline.alpha_p);
    }
    if (j.contains("database")) {
        const Json& d = j.at("database");
        read_if(d, "size", c.database_size);
        read_if(d, "train", c.database_train);
        read_if(d, "seed", c.database_seed);
    }

    if (j.contains("Nc") && j.at("Nc").get<int>() != c.cycles()) {
        throw std::invalid_argument("Nc must equal T0 / dt");
    }
    c.validate();
    return c;
}

Json to_json(const RunMetrics& m) {
    Json j;
    j["seed"] = m.seed;
    j["error"] = m.error;
    j["final_live"] = std::string(to_string(m.final_live));
    j["final_reward"] = m.final_reward();
    j["final_episode_reward"] = cumulative_reward(m.final_episode);
    j["final_mf"] = to_json(m.final_mf);
    j["final_mb"] = to_json(m.final_mb);
    j["final_closure"] = to_json(m.final_closure);
    j["final_episode"] = to_json(m.final_episode);
    j["surrogate_evaluations"] = m.surrogate_evaluations;
    return j;
}

std::string metrics_csv_header() {
    return "seed,episode,warmup,reward,failed,assim_cost,buffer_updated,mb_cost,live_cost_virtual,"
           "idle_cost_virtual,rvet,rvet_in_bounds,p,switch,clone,rvet_fail,model_failed,dw_idle,q_mean,wall_clock";
}

std::string metrics_csv_row(std::uint64_t seed, const EpisodeMetrics& m) {
    std::ostringstream os;
    os << std::setprecision(17);
    auto num = [&](double v) {
        os << ',';
        if (std::isfinite(v)) os << v;
    };
    os << seed << ',' << m.episode << ',' << m.warmup;
    num(m.reward);
    os << ',' << m.failed;
    num(m.assim_cost);
    os << ',' << m.buffer_updated;
    num(m.mb_cost);
    num(m.live_cost_virtual);
    num(m.idle_cost_virtual);
    num(m.rvet);
    os << ',' << m.rvet_in_bounds << ',' << m.p << ',' << m.switch_signal << ',' << m.clone << ',' << m.rvet_fail
       << ',' << m.model_failed;
    num(m.dw_idle);
    num(m.q_mean);
    num(m.wall_clock);
    return os.str();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_num(const std::string& s) {
    return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
}

}  // namespace

std::vector<RunMetrics> read_run(const std::filesystem::path& dir) {
    const Json manifest = read_json_file(dir / "manifest.json");
    std::vector<RunMetrics> runs;
    for (const Json& r : manifest.at("runs")) {
        RunMetrics m;
        m.seed = r.at("seed").get<std::uint64_t>();
        m.error = r.at("error").get<std::string>();
        m.final_live = r.at("final_live").get<std::string>() == "model_free" ? PolicyKind::ModelFree
                                                                              : PolicyKind::ModelBased;
        m.final_mf = policy_from_json(r.at("final_mf"));
        m.final_mb = policy_from_json(r.at("final_mb"));
        m.final_closure = closure_from_json(r.at("final_closure"));
        m.final_episode = episode_from_json(r.at("final_episode"));
        m.surrogate_evaluations = r.at("surrogate_evaluations").get<long long>();
        runs.push_back(std::move(m));
    }
    std::ifstream in(dir / "metrics.csv");
    if (!in) throw std::runtime_error("cannot open " + (dir / "metrics.csv").string());
    std::string line;
    std::getline(in, line);
    if (line != metrics_csv_header()) throw std::runtime_error("unexpected metrics.csv header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv(line);
        if (c.size() != 20) throw std::runtime_error("malformed metrics.csv row");
        const auto seed = std::stoull(c[0]);
        auto it = std::find_if(runs.begin(), runs.end(), [&](const RunMetrics& r) { return r.seed == seed; });
        if (it == runs.end()) throw std::runtime_error("metrics row for unknown seed");
        EpisodeMetrics m;
        m.episode = std::stoi(c[1]);
        m.warmup = c[2] == "1";
        m.reward = parse_num(c[3]);
        m.failed = c[4] == "1";
        m.assim_cost = parse_num(c[5]);
        m.buffer_updated = c[6] == "1";
        m.mb_cost = parse_num(c[7]);
        m.live_cost_virtual = parse_num(c[8]);
        m.idle_cost_virtual = parse_num(c[9]);
        m.rvet = parse_num(c[10]);
        m.rvet_in_bounds = c[11] == "1";
        m.p = std::stoi(c[12]);
        m.switch_signal = c[13] == "1";
        m.clone = c[14] == "1";
        m.rvet_fail = c[15] == "1";
        m.model_failed = c[16] == "1";
        m.dw_idle = parse_num(c[17]);
        m.q_mean = parse_num(c[18]);
        m.wall_clock = parse_num(c[19]);
        it->rows.push_back(m);
    }
    return runs;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return Json::parse(in);
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string text = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// Report writers live here because they depend on the serialisation helpers.

namespace {

void write_series_csv(const std::filesystem::path& path, const std::vector<std::vector<double>>& per_seed) {
    const SeriesSummary s = summarize(per_seed);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "episode,mean,ci_low,ci_high,n\n" << std::setprecision(12);
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
        out << i << ',' << s.mean[i] << ',' << s.mean[i] - s.half_width[i] << ',' << s.mean[i] + s.half_width[i]
            << ',' << per_seed.size() << '\n';
    }
}

std::vector<std::vector<double>> column(const std::vector<RunMetrics>& runs, double (*get)(const EpisodeMetrics&)) {
    std::vector<std::vector<double>> out;
    for (const RunMetrics& r : runs) {
        if (!r.error.empty()) continue;
        std::vector<double> v;
        for (const EpisodeMetrics& m : r.rows) v.push_back(get(m));
        out.push_back(std::move(v));
    }
    return out;
}

Json summary_json(const std::vector<std::vector<double>>& per_seed) {
    const SeriesSummary s = summarize(per_seed);
    if (s.mean.empty()) return Json();
    return {{"final_mean", s.mean.back()}, {"final_half_width", s.half_width.back()}};
}

}  // namespace

void emit_report(const std::vector<RunMetrics>& runs, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    struct Series {
        const char* name;
        double (*get)(const EpisodeMetrics&);
    };
    // Missing values (NaN) enter the averages as zero.
    const Series series[] = {
        {"reward", [](const EpisodeMetrics& m) { return m.reward; }},
        {"live_policy", [](const EpisodeMetrics& m) { return static_cast<double>(m.p); }},
        {"model_failure", [](const EpisodeMetrics& m) { return m.model_failed ? 1.0 : 0.0; }},
        {"clone", [](const EpisodeMetrics& m) { return m.clone ? 1.0 : 0.0; }},
        {"assim_cost", [](const EpisodeMetrics& m) { return std::isfinite(m.assim_cost) ? m.assim_cost : 0.0; }},
        {"q_value", [](const EpisodeMetrics& m) { return m.q_mean; }},
        {"live_cost_virtual",
         [](const EpisodeMetrics& m) { return std::isfinite(m.live_cost_virtual) ? m.live_cost_virtual : 0.0; }},
        {"idle_cost_virtual",
         [](const EpisodeMetrics& m) { return std::isfinite(m.idle_cost_virtual) ? m.idle_cost_virtual : 0.0; }},
    };
    Json summary;
    for (const Series& s : series) {
        const auto data = column(runs, s.get);
        write_series_csv(dir / (std::string(s.name) + ".csv"), data);
        summary[s.name] = summary_json(data);
    }
    std::vector<double> final_rewards;
    Json failures = Json::array();
    for (const RunMetrics& r : runs) {
        if (!r.error.empty()) {
            failures.push_back({{"seed", r.seed}, {"error", r.error}});
            continue;
        }
        final_rewards.push_back(cumulative_reward(r.final_episode));
    }
    std::vector<std::vector<double>> fr;
    for (double v : final_rewards) fr.push_back({v});
    summary["final_policy_reward"] = summary_json(fr);
    summary["seeds"] = runs.size();
    summary["failed_seeds"] = failures;
    write_json_file(dir / "summary.json", summary);
}

void write_run(const std::vector<RunMetrics>& runs, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "metrics.csv");
        if (!out) throw std::runtime_error("cannot write metrics.csv");
        out << metrics_csv_header() << '\n';
        for (const RunMetrics& r : runs) {
            for (const EpisodeMetrics& m : r.rows) out << metrics_csv_row(r.seed, m) << '\n';
        }
    }
    Json seeds = Json::array();
    for (const RunMetrics& r : runs) {
        seeds.push_back(to_json(r));
        std::ofstream ep(dir / ("final_episode_seed" + std::to_string(r.seed) + ".csv"));
        write_episode_csv(ep, r.final_episode);
    }
    Json manifest;
    manifest["schema_version"] = 1;
    manifest["config_hash"] = config_hash(cfg);
    manifest["config"] = to_json(cfg);
    manifest["runs"] = seeds;
    write_json_file(dir / "manifest.json", manifest);
}

}  // namespace rtwin
