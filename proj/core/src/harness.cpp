#include "rtwin/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

namespace rtwin {

Scenario parse_scenario(std::string_view name) {
    if (name == "C1_offline" || name == "C1") return Scenario::C1Offline;
    if (name == "C2_online" || name == "C2") return Scenario::C2Online;
    if (name == "C3_biased" || name == "C3") return Scenario::C3Biased;
    throw std::invalid_argument("unknown scenario: " + std::string(name));
}

std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::C1Offline: return "C1_offline";
        case Scenario::C2Online: return "C2_online";
        case Scenario::C3Biased: return "C3_biased";
    }
    return "C1_offline";
}

AgentMode parse_agent_mode(std::string_view name) {
    if (name == "rt_full") return AgentMode::RtFull;
    if (name == "mf_only") return AgentMode::MfOnly;
    if (name == "mb_only") return AgentMode::MbOnly;
    throw std::invalid_argument("unknown agent mode: " + std::string(name));
}

std::string_view to_string(AgentMode m) {
    switch (m) {
        case AgentMode::RtFull: return "rt_full";
        case AgentMode::MfOnly: return "mf_only";
        case AgentMode::MbOnly: return "mb_only";
    }
    return "rt_full";
}

SurrogateConfig ExperimentConfig::surrogate() const {
    SurrogateConfig s;
    s.gravity = real.geometry.gravity;
    s.cycle_period = real.cycle_period();
    s.cycles = cycles();
    s.substeps_per_cycle = virtual_substeps;
    s.blow_up_bound = real.blow_up_bound;
    s.target = target;
    s.reward = reward;
    return s;
}

void ExperimentConfig::validate() const {
    real.validate();
    reward.validate();
    bounds.validate();
    assim.validate();
    ddpg.validate();
    referee.validate();
    gp.validate();
    surrogate().validate();
    if (episodes < 1) throw std::invalid_argument("episode count must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
    if (n_e < 1) throw std::invalid_argument("Ne must be >= 1");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (scenario == Scenario::C3Biased && bias == Bias::None) {
        throw std::invalid_argument("the biased scenario needs a bias");
    }
    if (database_train < 1 || database_train > database_size) {
        throw std::invalid_argument("database split must satisfy 1 <= train <= size");
    }
}

TrajectoryDatabase generate_database(int count, std::uint64_t seed, const ExperimentConfig& cfg) {
    if (count < 1) throw std::invalid_argument("database size must be >= 1");
    const RealEnvironment real(cfg.real);
    const GpActionSampler gp(cfg.cycles(), cfg.gp, cfg.bounds);
    Rng rng = make_stream(seed, Stream::Database);
    TrajectoryDatabase db;
    while (static_cast<int>(db.records.size()) < count) {
        const std::vector<Action> schedule = gp.sample(rng);
        EpisodeRecord rec = real.replay(schedule, cfg.target, cfg.reward);
        if (!rec.complete()) {
            ++db.resampled;
            if (db.resampled > 100 * count) throw std::runtime_error("database generation keeps blowing up");
            continue;
        }
        rec.seed = seed;
        db.records.push_back(std::move(rec));
    }
    return db;
}

ClosureWeights regress_closure(std::span<const EpisodeRecord> train, ClosureVariant variant, double gravity,
                               double ridge) {
    ClosureWeights w;
    w.variant = variant;
    std::vector<int> cols;
    for (int b = 0; b < kClosureBlocks; ++b) {
        if (!w.active(b)) continue;
        for (int c = 0; c < 3; ++c) cols.push_back(3 * b + c);
    }
    const auto n = static_cast<Eigen::Index>(cols.size());
    MatX ata = MatX::Zero(n, n);
    MatX atb = MatX::Zero(n, 3);
    for (const EpisodeRecord& rec : train) {
        const double dt = rec.cycle_period;
        for (std::size_t k = 1; k + 1 < rec.states.size() && k < rec.actions.size(); ++k) {
            const State& s = rec.states[k];
            const Vec3 rate = (rec.states[k + 1] - rec.states[k - 1]).head<3>() / (2.0 * dt) -
                              rigid_body_terms(s, gravity).head<3>();
            const ClosureFeatures phi =
                0.5 * (closure_features(s, rec.actions[k - 1], w.action_scale) +
                       closure_features(s, rec.actions[k], w.action_scale));
            VecX row(n);
            for (Eigen::Index i = 0; i < n; ++i) row[i] = phi[cols[static_cast<std::size_t>(i)]];
            ata.noalias() += row * row.transpose();
            atb.noalias() += row * rate.transpose();
        }
    }
    ata.diagonal().array() += ridge * (1.0 + ata.diagonal().maxCoeff());
    const MatX sol = ata.ldlt().solve(atb);
    for (Eigen::Index i = 0; i < n; ++i) w.w.col(cols[static_cast<std::size_t>(i)]) = sol.row(i).transpose();
    return w;
}

ClosureWeights fit_closure_offline(const SurrogateEnvironment& env, std::span<const EpisodeRecord> train,
                                   ClosureVariant variant, const OfflineFitConfig& cfg, std::vector<double>* history) {
    ClosureWeights w;
    w.variant = variant;
    if (cfg.regression_init) w = regress_closure(train, variant, env.config().gravity, cfg.ridge);
    Adam opt(w.free_count(), {.lr = cfg.lr_start});
    const int n = std::max(cfg.iterations, 1);
    const double decay = std::pow(cfg.lr_end / cfg.lr_start, 1.0 / n);

    ClosureWeights best = w;
    double best_cost = std::numeric_limits<double>::infinity();
    double scale = 1.0;
    for (int it = 0; it < n; ++it) {
        const AssimilationGradient g = assimilation_gradient(env, train, w, cfg.alpha_p);
        if (!g.ok) {
            w = best;
            scale *= 0.5;
            continue;
        }
        if (history != nullptr) history->push_back(g.cost);
        if (g.cost < best_cost) {
            best_cost = g.cost;
            best = w;
        }
        opt.set_learning_rate(scale * cfg.lr_start * std::pow(decay, it));
        VecX x = w.to_vector();
        opt.step(x, g.gradient);
        w.set_vector(x);
    }
    const AssimilationGradient last = assimilation_gradient(env, train, w, cfg.alpha_p);
    if (last.ok && last.cost < best_cost) best = w;
    return best;
}

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<double>(a.size());
    if (a.size() < 2) return 0.0;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

ValidationScore score_closure(const SurrogateEnvironment& env, std::span<const EpisodeRecord> episodes,
                              const ClosureWeights& w) {
    ValidationScore score;
    std::array<std::vector<double>, 6> virt, real;
    for (const EpisodeRecord& rec : episodes) {
        const TrackingCost tracking(rec.states, env.config().cycle_period);
        const VirtualRollout r = env.rollout(rec.actions, w, &tracking);
        if (!r.record.complete()) {
            score.error = std::numeric_limits<double>::infinity();
            score.pearson.fill(0.0);
            return score;
        }
        score.error += r.cost;
        for (std::size_t k = 1; k < rec.states.size(); ++k) {
            for (std::size_t c = 0; c < 6; ++c) {
                virt[c].push_back(r.record.states[k][static_cast<Eigen::Index>(c)]);
                real[c].push_back(rec.states[k][static_cast<Eigen::Index>(c)]);
            }
        }
    }
    score.error /= static_cast<double>(std::max<std::size_t>(episodes.size(), 1));
    for (std::size_t c = 0; c < 6; ++c) score.pearson[c] = pearson(virt[c], real[c]);
    return score;
}

std::vector<VariantResult> model_selection_study(const TrajectoryDatabase& db, int n_train,
                                                 std::span<const ClosureVariant> variants,
                                                 const ExperimentConfig& cfg) {
    const int total = static_cast<int>(db.records.size());
    if (n_train < 1 || n_train >= total) throw std::invalid_argument("split needs train and test episodes");
    const SurrogateEnvironment env(cfg.surrogate());
    const std::span<const EpisodeRecord> all(db.records);
    const auto train = all.subspan(0, static_cast<std::size_t>(n_train));
    const auto test = all.subspan(static_cast<std::size_t>(n_train));

    std::vector<VariantResult> out;
    for (ClosureVariant v : variants) {
        VariantResult r;
        r.variant = v;
        std::vector<double> history;
        r.weights = fit_closure_offline(env, train, v, cfg.offline, &history);
        r.free_parameters = r.weights.free_count();
        r.train_cost = assimilation_gradient(env, train, r.weights, cfg.offline.alpha_p).cost;
        r.test = score_closure(env, test, r.weights);
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

bool same_double(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

bool EpisodeMetrics::same_outcome(const EpisodeMetrics& o) const {
    return episode == o.episode && warmup == o.warmup && same_double(reward, o.reward) && failed == o.failed &&
           same_double(assim_cost, o.assim_cost) && buffer_updated == o.buffer_updated &&
           same_double(mb_cost, o.mb_cost) && same_double(live_cost_virtual, o.live_cost_virtual) &&
           same_double(idle_cost_virtual, o.idle_cost_virtual) && same_double(rvet, o.rvet) &&
           rvet_in_bounds == o.rvet_in_bounds && p == o.p && switch_signal == o.switch_signal && clone == o.clone &&
           rvet_fail == o.rvet_fail && model_failed == o.model_failed && same_double(dw_idle, o.dw_idle) &&
           same_double(q_mean, o.q_mean);
}

bool RunMetrics::same_outcome(const RunMetrics& o) const {
    if (seed != o.seed || rows.size() != o.rows.size() || error != o.error) return false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].same_outcome(o.rows[i])) return false;
    }
    return final_mf.to_vector() == o.final_mf.to_vector() && final_mb.to_vector() == o.final_mb.to_vector() &&
           final_closure == o.final_closure && final_live == o.final_live && final_episode == o.final_episode &&
           surrogate_evaluations == o.surrogate_evaluations && step_log == o.step_log;
}

TrainingInputs prepare_inputs(const ExperimentConfig& cfg) {
    TrainingInputs in;
    const bool want_demos = cfg.scenario == Scenario::C1Offline;
    const bool want_closure = cfg.scenario != Scenario::C2Online && cfg.mode != AgentMode::MfOnly;
    if (!want_demos && !want_closure) return in;
    // The database always comes from the unbiased vehicle.
    ExperimentConfig unbiased = cfg;
    unbiased.bias = Bias::None;
    const TrajectoryDatabase db = generate_database(cfg.database_size, cfg.database_seed, unbiased);
    if (want_demos) {
        for (const EpisodeRecord& r : db.records) in.demonstrations.push_back(r.actions);
    }
    if (want_closure) {
        const SurrogateEnvironment env(cfg.surrogate());
        const std::span<const EpisodeRecord> train(db.records.data(), static_cast<std::size_t>(cfg.database_train));
        in.closure = fit_closure_offline(env, train, cfg.variant, cfg.offline);
    }
    return in;
}

namespace {

PolicyWeights random_policy(Rng& rng, const ExperimentConfig& cfg) {
    std::normal_distribution<double> normal(0.0, cfg.policy_init_std);
    PolicyWeights w;
    w.bounds = cfg.bounds;
    w.freeze_bias = cfg.freeze_bias;
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 6; ++c) w.gain(i, c) = normal(rng);
    }
    return w;
}

ClosureWeights initial_closure(const ExperimentConfig& cfg, const TrainingInputs& in, std::uint64_t seed) {
    if (cfg.scenario != Scenario::C2Online) {
        if (!in.closure) throw std::invalid_argument("this scenario needs an offline-calibrated closure");
        ClosureWeights w = *in.closure;
        w.apply_mask();
        return w;
    }
    Rng rng = make_stream(seed, Stream::ClosureInit);
    std::normal_distribution<double> normal(0.0, cfg.closure_init_std);
    ClosureWeights w;
    w.variant = cfg.variant;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < kClosureFeatures; ++j) w.w(i, j) = normal(rng);
    }
    w.apply_mask();
    return w;
}

double relative_change(const PolicyWeights::Vector& before, const PolicyWeights::Vector& after) {
    return (after - before).norm() / (before.norm() + 1e-12);
}

void push_transitions(const EpisodeRecord& rec, ReplayBuffer& buffer) {
    const int n = rec.executed_cycles();
    for (int k = 0; k < n; ++k) {
        Transition t;
        t.error = cycle_error(rec.states[static_cast<std::size_t>(k)], rec.target);
        t.action = rec.actions[static_cast<std::size_t>(k)];
        t.next_error = cycle_error(rec.states[static_cast<std::size_t>(k + 1)], rec.target);
        t.reward = rec.rewards[static_cast<std::size_t>(k)];
        t.done = (k + 1 == n);
        buffer.push(t);
    }
}

}  // namespace

RunMetrics run_seed(const ExperimentConfig& cfg, const TrainingInputs& inputs, std::uint64_t seed) {
    RunMetrics out;
    out.seed = seed;
    try {
        cfg.validate();
        RealEnvConfig rc = cfg.real;
        rc.apply_bias(cfg.bias);
        const RealEnvironment real(rc);
        const bool use_mf = cfg.mode != AgentMode::MbOnly;
        const bool use_mb = cfg.mode != AgentMode::MfOnly;
        const int n_c = cfg.cycles();

        Rng policy_rng = make_stream(seed, Stream::PolicyInit);
        const PolicyWeights mf_init = random_policy(policy_rng, cfg);
        PolicyWeights mb = random_policy(policy_rng, cfg);

        std::optional<DdpgAgent> ddpg;
        if (use_mf) ddpg.emplace(cfg.ddpg, mf_init, seed);

        std::optional<SurrogateEnvironment> sur;
        ClosureWeights closure;
        AssimilationBuffer assim_buffer(cfg.n_e, cfg.buffer);
        Adam assim_opt(0, {.lr = cfg.assim.lr_assim});
        Adam policy_opt(0, {.lr = cfg.assim.lr_policy});
        if (use_mb) {
            sur.emplace(cfg.surrogate());
            closure = initial_closure(cfg, inputs, seed);
            assim_opt = Adam(closure.free_count(), {.lr = cfg.assim.lr_assim});
            policy_opt = Adam(PolicyWeights::kParamCount, {.lr = cfg.assim.lr_policy});
        }

        RefereeConfig rcfg = cfg.referee;
        rcfg.log_only = cfg.mode == AgentMode::MbOnly;
        // An offline-calibrated model is trusted from the outset, so the
        // policies can be compared in it while the warm-up runs.
        const bool early_referee = cfg.scenario == Scenario::C1Offline;
        Referee referee(rcfg, use_mf ? PolicyKind::ModelFree : PolicyKind::ModelBased);

        const GpActionSampler gp(n_c, cfg.gp, cfg.bounds);
        Rng gp_rng = make_stream(seed, Stream::GaussianProcess);
        Rng demo_rng = make_stream(seed, Stream::Database);
        Rng explore_rng = make_stream(seed, Stream::Exploration);
        const int warmup = std::min(cfg.n_e, cfg.episodes);
        const int policy_episodes = std::max(cfg.episodes - warmup, 1);

        auto log_step = [&](int ep, int step) {
            out.step_log.push_back("episode " + std::to_string(ep) + " step " + std::to_string(step));
        };

        for (int ep = 0; ep < cfg.episodes; ++ep) {
            const auto t_start = std::chrono::steady_clock::now();
            EpisodeMetrics m;
            m.episode = ep;
            m.warmup = ep < warmup;
            const PolicyKind live = referee.live();
            m.p = live == PolicyKind::ModelFree ? 1 : 0;

            // Step 1: one real episode with the live policy.
            log_step(ep, 1);
            EpisodeRecord rec;
            if (m.warmup) {
                std::vector<Action> schedule;
                if (cfg.scenario == Scenario::C1Offline && !inputs.demonstrations.empty()) {
                    std::uniform_int_distribution<std::size_t> pick(0, inputs.demonstrations.size() - 1);
                    schedule = inputs.demonstrations[pick(demo_rng)];
                } else {
                    schedule = gp.sample(gp_rng);
                }
                rec = real.replay(schedule, cfg.target, cfg.reward);
            } else if (live == PolicyKind::ModelFree) {
                const Action sd = exploration_std(ep - warmup, policy_episodes, cfg.ddpg, cfg.bounds);
                const PolicyWeights& pi = ddpg->policy();
                rec = real.run_episode(
                    [&](const State& e) { return explore(pd_policy(e, pi), sd, cfg.bounds, explore_rng); },
                    cfg.target, cfg.reward);
            } else {
                rec = real.run_episode([&](const State& e) { return pd_policy(e, mb); }, cfg.target, cfg.reward);
            }
            rec.seed = seed;
            m.reward = cumulative_reward(rec);
            m.failed = rec.failed;
            if (use_mf) push_transitions(rec, ddpg->buffer());
            if (use_mb) m.buffer_updated = assim_buffer.offer(rec);

            const PolicyWeights::Vector mf_before = use_mf ? ddpg->policy().to_vector() : PolicyWeights::Vector();
            const PolicyWeights::Vector mb_before = mb.to_vector();

            // Step 2: actor-critic updates from the replay buffer.
            log_step(ep, 2);
            if (use_mf) m.q_mean = ddpg->train().q_mean;

            if (use_mb) {
                // Steps 3 and 4: replay the assimilation buffer and fit the closure.
                log_step(ep, 3);
                log_step(ep, 4);
                if (assim_buffer.size() > 0) {
                    const AssimilationReport rep =
                        assimilate(*sur, assim_buffer.episodes(), closure, cfg.assim, assim_opt, cfg.assim.n_g);
                    if (!rep.costs.empty()) m.assim_cost = rep.costs.back();
                }
                // Steps 5 and 6: virtual rollouts and adjoint policy updates.
                log_step(ep, 5);
                log_step(ep, 6);
                const bool paused = cfg.mode == AgentMode::RtFull && referee.model_failed();
                if (!paused) {
                    const PolicyReport rep = mb_policy_update(*sur, mb, closure, cfg.assim, policy_opt, cfg.assim.n_mb);
                    if (!rep.costs.empty()) m.mb_cost = rep.costs.back();
                }
            }

            // Step 7: referee.
            log_step(ep, 7);
            // Warm-up episodes are not produced by either policy, so their
            // real cost never enters the trust check.
            if (use_mb && (!m.warmup || early_referee)) {
                const double mb_cost = virtual_episode_cost(*sur, mb, closure);
                const double mf_cost = use_mf ? virtual_episode_cost(*sur, ddpg->policy(), closure) : mb_cost;
                RefereeInputs in;
                in.live_cost_virtual = live == PolicyKind::ModelFree ? mf_cost : mb_cost;
                in.idle_cost_virtual = live == PolicyKind::ModelFree ? mb_cost : mf_cost;
                in.live_cost_real = -m.reward;
                in.has_real_cost = !m.warmup;
                if (use_mf) {
                    in.dw_idle = live == PolicyKind::ModelFree ? relative_change(mb_before, mb.to_vector())
                                                               : relative_change(mf_before, ddpg->policy().to_vector());
                }
                m.dw_idle = in.dw_idle;
                const RefereeDirectives d = referee.step(in);
                m.live_cost_virtual = in.live_cost_virtual;
                m.idle_cost_virtual = in.idle_cost_virtual;
                if (d.rvet) {
                    m.rvet = d.rvet->value;
                    m.rvet_in_bounds = d.rvet->in_bounds;
                }
                m.switch_signal = d.switch_signal;
                m.rvet_fail = d.rvet_fail;
                m.model_failed = d.model_failed;
                m.clone = d.clone;
                if (d.clone && use_mf) {
                    if (d.clone_source == PolicyKind::ModelFree) {
                        mb.gain = ddpg->policy().gain;
                        mb.bias = ddpg->policy().bias;
                    } else {
                        ddpg->policy().gain = mb.gain;
                        ddpg->policy().bias = mb.bias;
                    }
                }
            }
            m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
            out.rows.push_back(m);
        }

        out.final_mb = mb;
        if (use_mf) out.final_mf = ddpg->policy();
        out.final_closure = closure;
        out.final_live = referee.live();
        const PolicyWeights& best = out.final_live == PolicyKind::ModelFree ? out.final_mf : out.final_mb;
        out.final_episode = real.run_episode([&](const State& e) { return pd_policy(e, best); }, cfg.target, cfg.reward);
        out.final_episode.seed = seed;
        out.surrogate_evaluations = sur ? sur->evaluations() : 0;
    } catch (const std::exception& ex) {
        out.error = ex.what();
    }
    return out;
}

std::vector<RunMetrics> run_training(const ExperimentConfig& cfg, const TrainingInputs& inputs) {
    cfg.validate();
    std::vector<RunMetrics> out(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) out[i] = run_seed(cfg, inputs, cfg.seeds[i]);
    };
    const int n = std::min<int>(cfg.threads, static_cast<int>(cfg.seeds.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

SeriesSummary summarize(const std::vector<std::vector<double>>& per_seed) {
    SeriesSummary s;
    if (per_seed.empty()) return s;
    std::size_t len = per_seed.front().size();
    for (const auto& v : per_seed) len = std::min(len, v.size());
    const double n = static_cast<double>(per_seed.size());
    for (std::size_t i = 0; i < len; ++i) {
        double mean = 0.0;
        for (const auto& v : per_seed) mean += v[i];
        mean /= n;
        double hw = 0.0;
        if (per_seed.size() > 1) {
            double ss = 0.0;
            for (const auto& v : per_seed) ss += (v[i] - mean) * (v[i] - mean);
            hw = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
        s.mean.push_back(mean);
        s.half_width.push_back(hw);
    }
    return s;
}

double model_failure_fraction(const std::vector<RunMetrics>& runs, int first, int last) {
    double total = 0.0;
    int count = 0;
    for (int e = first; e < last; ++e) {
        int flagged = 0, seen = 0;
        for (const RunMetrics& r : runs) {
            if (e < 0 || e >= static_cast<int>(r.rows.size())) continue;
            ++seen;
            flagged += r.rows[static_cast<std::size_t>(e)].model_failed ? 1 : 0;
        }
        if (seen == 0) continue;
        total += static_cast<double>(flagged) / seen;
        ++count;
    }
    return count > 0 ? total / count : 0.0;
}

}  // namespace rtwin
