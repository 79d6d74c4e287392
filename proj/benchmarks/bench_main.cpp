#include "rtwin/gp.hpp"
#include "rtwin/mb_agent.hpp"
#include "rtwin/mf_agent.hpp"
#include "rtwin/real_env.hpp"
#include "rtwin/surrogate_env.hpp"

#include <benchmark/benchmark.h>

using namespace rtwin;

namespace {

ClosureWeights lift_and_drag() {
    ClosureWeights w;
    w.block(0)(1, 0) = 12.0;
    w.block(3) = -1.5 * Mat3::Identity();
    return w;
}

void BM_RealStepCycle(benchmark::State& state) {
    const RealEnvironment env{RealEnvConfig{}};
    const Action a(deg2rad(80.0), deg2rad(5.0), 0.0);
    State s = State::Zero();
    int k = 0;
    for (auto _ : state) {
        const CycleResult r = env.step_cycle(s, a, k++);
        benchmark::DoNotOptimize(r.average);
    }
}
BENCHMARK(BM_RealStepCycle);

void BM_RealEpisode(benchmark::State& state) {
    const RealEnvironment env{RealEnvConfig{}};
    State target = State::Zero();
    target[idx::kZ] = 1.0;
    const PolicyWeights pi;
    for (auto _ : state) {
        EpisodeRecord rec = env.run_episode([&](const State& e) { return pd_policy(e, pi); }, target, RewardConfig{});
        benchmark::DoNotOptimize(rec.rewards.data());
    }
}
BENCHMARK(BM_RealEpisode)->Unit(benchmark::kMillisecond);

void BM_PolicyAdjointGradient(benchmark::State& state) {
    SurrogateConfig sc;
    sc.target[idx::kZ] = 1.0;
    const SurrogateEnvironment env(sc);
    const ClosureWeights w = lift_and_drag();
    const PolicyWeights pi;
    for (auto _ : state) {
        PolicyGradient g = policy_gradient(env, pi, w);
        benchmark::DoNotOptimize(g.gradient.data());
    }
}
BENCHMARK(BM_PolicyAdjointGradient)->Unit(benchmark::kMicrosecond);

void BM_AssimilationAdjointGradient(benchmark::State& state) {
    const SurrogateEnvironment env{SurrogateConfig{}};
    const ClosureWeights w = lift_and_drag();
    const GpActionSampler gp(env.config().cycles, GpConfig{}, ActionBounds{});
    Rng rng(1);
    std::vector<EpisodeRecord> buffer;
    for (int i = 0; i < state.range(0); ++i) {
        const std::vector<Action> sched = gp.sample(rng);
        buffer.push_back(env.rollout(std::span<const Action>(sched), w).record);
    }
    ClosureWeights guess = w;
    guess.w *= 1.1;
    for (auto _ : state) {
        AssimilationGradient g = assimilation_gradient(env, buffer, guess, 1e-4);
        benchmark::DoNotOptimize(g.gradient.data());
    }
}
BENCHMARK(BM_AssimilationAdjointGradient)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_CriticUpdate(benchmark::State& state) {
    DdpgConfig cfg;
    cfg.hidden = static_cast<int>(state.range(0));
    DdpgAgent agent(cfg, PolicyWeights{}, 1);
    Rng rng(2);
    std::normal_distribution<double> n(0.0, 0.5);
    std::vector<Transition> batch(static_cast<std::size_t>(cfg.batch));
    for (Transition& t : batch) {
        for (int c = 0; c < 6; ++c) {
            t.error[c] = n(rng);
            t.next_error[c] = n(rng);
        }
        t.action = pd_policy(t.error, agent.policy());
        t.reward = -t.next_error.squaredNorm();
    }
    for (auto _ : state) benchmark::DoNotOptimize(agent.critic_update(batch));
}
BENCHMARK(BM_CriticUpdate)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
