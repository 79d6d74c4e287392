#include "rtwin/gp.hpp"
#include "rtwin/mb_agent.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rtwin;

namespace {

EpisodeRecord record_with_states(const std::vector<State>& states, double reward_per_cycle = -1.0) {
    EpisodeRecord rec;
    rec.states = states;
    rec.planned_cycles = static_cast<int>(states.size()) - 1;
    rec.actions.assign(states.size() - 1, Action::Zero());
    rec.rewards.assign(states.size() - 1, reward_per_cycle);
    return rec;
}

EpisodeRecord constant_record(double value, int cycles, double reward_per_cycle = -1.0) {
    std::vector<State> s(static_cast<std::size_t>(cycles + 1), State::Constant(value));
    return record_with_states(s, reward_per_cycle);
}

MatX random_matrix(Rng& rng, int rows) {
    std::normal_distribution<double> n;
    MatX m(rows, 6);
    for (int i = 0; i < rows; ++i) {
        for (int c = 0; c < 6; ++c) m(i, c) = n(rng);
    }
    return m;
}

// Reference trajectory of a known surrogate.
EpisodeRecord surrogate_record(const SurrogateEnvironment& env, const ClosureWeights& w, Rng& rng) {
    const GpActionSampler gp(env.config().cycles, GpConfig{}, ActionBounds{});
    const std::vector<Action> schedule = gp.sample(rng);
    VirtualRollout r = env.rollout(std::span<const Action>(schedule), w);
    return r.record;
}

ClosureWeights reference_closure() {
    ClosureWeights w;
    w.variant = ClosureVariant::M3;
    // Lift grows with amplitude; mild drag on every velocity.
    w.block(0)(1, 0) = 12.0;
    w.block(1)(1, 0) = 2.0;
    w.block(0)(0, 1) = 3.0;
    w.block(0)(2, 2) = 40.0;
    w.block(3) = -1.5 * Mat3::Identity();
    return w;
}

}  // namespace

TEST(BufferVariance, MatchesBruteForce) {
    Rng rng(1);
    std::vector<MatX> trajs;
    for (int i = 0; i < 4; ++i) trajs.push_back(random_matrix(rng, 7));
    double brute = 0.0;
    for (int r = 0; r < 7; ++r) {
        for (int c = 0; c < 6; ++c) {
            double mean = 0.0;
            for (const MatX& t : trajs) mean += t(r, c) / 4.0;
            for (const MatX& t : trajs) brute += (t(r, c) - mean) * (t(r, c) - mean);
        }
    }
    brute /= 4.0 * 7.0;
    EXPECT_NEAR(buffer_variance(trajs), brute, 1e-12 * brute);
}

TEST(BufferVariance, OppositePairHasSquaredNormPerRow) {
    Rng rng(2);
    const MatX s = random_matrix(rng, 5);
    const std::vector<MatX> pair{s, -s};
    // Mean is zero, so xi = 2 |S|_F^2 / (2 * rows).
    EXPECT_NEAR(buffer_variance(pair), s.squaredNorm() / 5.0, 1e-12);
    const std::vector<MatX> same{s, s, s};
    // Zero up to rounding in the mean.
    EXPECT_NEAR(buffer_variance(same), 0.0, 1e-28 * s.squaredNorm());
}

TEST(BufferVariance, RejectsMismatchedShapes) {
    Rng rng(3);
    const std::vector<MatX> bad{random_matrix(rng, 4), random_matrix(rng, 5)};
    EXPECT_THROW(buffer_variance(bad), std::invalid_argument);
    EXPECT_THROW(buffer_variance(std::vector<MatX>{}), std::invalid_argument);
}

TEST(AssimilationBuffer, FillsThenKeepsCapacity) {
    AssimilationBuffer buf(3, BufferStrategy::MaxVariance);
    for (int i = 0; i < 3; ++i) EXPECT_TRUE(buf.offer(constant_record(i, 4)));
    EXPECT_TRUE(buf.full());
    buf.offer(constant_record(100.0, 4));
    EXPECT_EQ(buf.size(), 3);
}

TEST(AssimilationBuffer, RejectsIncompleteEpisodes) {
    AssimilationBuffer buf(3, BufferStrategy::MaxVariance);
    EpisodeRecord rec = constant_record(1.0, 4);
    rec.failed = true;
    EXPECT_FALSE(buf.offer(rec));
    EpisodeRecord short_rec = constant_record(1.0, 4);
    short_rec.planned_cycles = 6;
    EXPECT_FALSE(buf.offer(short_rec));
    EXPECT_EQ(buf.size(), 0);
}

TEST(AssimilationBuffer, MaxVarianceReplacesOnlyOnImprovement) {
    AssimilationBuffer buf(2, BufferStrategy::MaxVariance);
    buf.offer(constant_record(0.0, 3));
    buf.offer(constant_record(1.0, 3));
    const double before = buf.variance();
    // A state between the two lowers the spread and is refused.
    EXPECT_FALSE(buf.offer(constant_record(0.5, 3)));
    EXPECT_EQ(buf.variance(), before);
    // An outlier replaces the slot that maximises the resulting spread.
    EXPECT_TRUE(buf.offer(constant_record(5.0, 3)));
    EXPECT_GT(buf.variance(), before);
    EXPECT_EQ(buf.episodes()[0].states[0][0], 0.0);
    EXPECT_EQ(buf.episodes()[1].states[0][0], 5.0);
    // A duplicate of the incumbent ties and loses.
    EXPECT_FALSE(buf.offer(constant_record(5.0, 3)));
}

TEST(AssimilationBuffer, VarianceNeverDecreasesUnderMaxVariance) {
    Rng rng(4);
    std::normal_distribution<double> n;
    AssimilationBuffer buf(4, BufferStrategy::MaxVariance);
    double last = 0.0;
    for (int i = 0; i < 40; ++i) {
        std::vector<State> s(6);
        for (State& x : s) {
            for (int c = 0; c < 6; ++c) x[c] = n(rng);
        }
        buf.offer(record_with_states(s));
        if (buf.full()) {
            EXPECT_GE(buf.variance(), last);
            last = buf.variance();
        }
    }
}

TEST(AssimilationBuffer, MinErrorReplacesWorstEpisode) {
    AssimilationBuffer buf(2, BufferStrategy::MinError);
    buf.offer(constant_record(0.0, 3, -1.0));
    buf.offer(constant_record(1.0, 3, -5.0));
    EXPECT_DOUBLE_EQ(buf.worst_error(), 15.0);
    EXPECT_FALSE(buf.offer(constant_record(2.0, 3, -6.0)));
    EXPECT_TRUE(buf.offer(constant_record(3.0, 3, -2.0)));
    EXPECT_DOUBLE_EQ(buf.worst_error(), 6.0);
    EXPECT_EQ(buf.episodes()[1].states[0][0], 3.0);
}

TEST(AssimilationBuffer, DropsDenseSamples) {
    AssimilationBuffer buf(1, BufferStrategy::MaxVariance);
    EpisodeRecord rec = constant_record(0.0, 2);
    rec.dense_time = {0.0, 0.1};
    rec.dense_states = {State::Zero(), State::Zero()};
    buf.offer(rec);
    EXPECT_TRUE(buf.episodes()[0].dense_states.empty());
}

TEST(BufferStrategy, NamesRoundTrip) {
    for (BufferStrategy s : {BufferStrategy::MaxVariance, BufferStrategy::MinError}) {
        EXPECT_EQ(parse_buffer_strategy(to_string(s)), s);
    }
    EXPECT_THROW(parse_buffer_strategy("newest"), std::invalid_argument);
}

TEST(AssimilationCost, IdenticalTrajectoriesCostOnlyThePenalty) {
    std::vector<std::vector<State>> v{std::vector<State>(4, State::Constant(0.3))};
    ClosureWeights w;
    w.block(0)(0, 0) = 3.0;
    w.block(1)(1, 1) = 4.0;
    EXPECT_DOUBLE_EQ(assimilation_cost(v, v, 0.1, w, 0.0), 0.0);
    EXPECT_NEAR(assimilation_cost(v, v, 0.1, w, 0.2), 0.2 * 5.0 * 0.3, 1e-15);
}

TEST(AssimilationCost, ConstantOffsetIntegratesExactly) {
    std::vector<std::vector<State>> real{std::vector<State>(5, State::Zero())};
    std::vector<std::vector<State>> virt{std::vector<State>(5, State::Constant(0.5))};
    // |d|^2 = 6 * 0.25 over T = 0.4.
    EXPECT_NEAR(assimilation_cost(virt, real, 0.1, ClosureWeights{}, 0.0), 1.5 * 0.4, 1e-14);
}

TEST(AssimilationCost, LinearRampUsesTrapezoidRule) {
    std::vector<State> real(3, State::Zero()), virt(3, State::Zero());
    virt[1][0] = 1.0;
    virt[2][0] = 2.0;
    // Trapezoid of t^2-like samples 0, 1, 4 with dt = 1.
    const std::vector<std::vector<State>> v{virt}, r{real};
    EXPECT_DOUBLE_EQ(assimilation_cost(v, r, 1.0, ClosureWeights{}, 0.0), 0.5 * (0 + 1) + 0.5 * (1 + 4));
}

TEST(AssimilationCost, AveragesOverEpisodes) {
    std::vector<std::vector<State>> real(2, std::vector<State>(3, State::Zero()));
    std::vector<std::vector<State>> virt{std::vector<State>(3, State::Zero()), std::vector<State>(3, State::Ones())};
    EXPECT_DOUBLE_EQ(assimilation_cost(virt, real, 0.5, ClosureWeights{}, 0.0), 0.5 * 6.0);
    std::vector<std::vector<State>> one(1, std::vector<State>(3, State::Zero()));
    EXPECT_THROW(assimilation_cost(virt, one, 0.5, ClosureWeights{}, 0.0), std::invalid_argument);
}

TEST(AssimilationGradient, MatchesFiniteDifferences) {
    SurrogateConfig sc;
    sc.cycles = 3;
    const SurrogateEnvironment env(sc);
    Rng rng(5);
    const ClosureWeights truth = reference_closure();
    std::vector<EpisodeRecord> buffer{surrogate_record(env, truth, rng), surrogate_record(env, truth, rng)};
    ClosureWeights w = truth;
    std::normal_distribution<double> n(0.0, 0.5);
    VecX x = w.to_vector();
    for (int i = 0; i < x.size(); ++i) x[i] += n(rng);
    w.set_vector(x);
    const AssimilationGradient g = assimilation_gradient(env, buffer, w, 1e-3);
    ASSERT_TRUE(g.ok);
    for (int p = 0; p < x.size(); ++p) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[p]));
        ClosureWeights wp = w, wm = w;
        VecX xp = x, xm = x;
        xp[p] += h;
        xm[p] -= h;
        wp.set_vector(xp);
        wm.set_vector(xm);
        const double fd =
            (assimilation_gradient(env, buffer, wp, 1e-3).cost - assimilation_gradient(env, buffer, wm, 1e-3).cost) /
            (2 * h);
        EXPECT_NEAR(g.gradient[p], fd, 1e-3 * g.gradient.cwiseAbs().maxCoeff()) << p;
    }
}

TEST(Assimilation, ReducesCostOnKnownSurrogateData) {
    SurrogateConfig sc;
    sc.cycles = 10;
    const SurrogateEnvironment env(sc);
    Rng rng(6);
    const ClosureWeights truth = reference_closure();
    std::vector<EpisodeRecord> buffer;
    for (int i = 0; i < 3; ++i) buffer.push_back(surrogate_record(env, truth, rng));
    ClosureWeights w = truth;
    w.w *= 1.1;
    AssimConfig cfg;
    cfg.alpha_p = 0.0;
    Adam opt(w.free_count(), {.lr = 1e-2});
    const AssimilationReport rep = assimilate(env, buffer, w, cfg, opt, 50);
    ASSERT_EQ(rep.costs.size(), 51u);
    EXPECT_LT(rep.costs.back(), 0.5 * rep.costs.front());
    EXPECT_EQ(rep.rejected, 0);
    // Masked blocks stay untouched.
    for (int b = 4; b < kClosureBlocks; ++b) EXPECT_EQ(w.block(b), Mat3::Zero());
}

TEST(Assimilation, RejectsEmptyBuffer) {
    const SurrogateEnvironment env{SurrogateConfig{}};
    EXPECT_THROW(assimilation_gradient(env, std::vector<EpisodeRecord>{}, ClosureWeights{}, 0.0),
                 std::invalid_argument);
}

TEST(PolicyGradient, MatchesFiniteDifferences) {
    SurrogateConfig sc;
    sc.cycles = 3;
    sc.target[idx::kZ] = 1.0;
    const SurrogateEnvironment env(sc);
    Rng rng(7);
    std::normal_distribution<double> n(0.0, 0.5);
    PolicyWeights pi;
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 6; ++c) pi.gain(i, c) = n(rng);
        pi.bias[i] = n(rng);
    }
    const ClosureWeights w = reference_closure();
    const PolicyGradient g = policy_gradient(env, pi, w);
    ASSERT_TRUE(g.ok);
    const PolicyWeights::Vector v = pi.to_vector();
    for (int p = 0; p < PolicyWeights::kParamCount; ++p) {
        const double h = 1e-6;
        PolicyWeights a = pi, b = pi;
        PolicyWeights::Vector va = v, vb = v;
        va[p] += h;
        vb[p] -= h;
        a.set_vector(va);
        b.set_vector(vb);
        const double fd = (policy_gradient(env, a, w).cost - policy_gradient(env, b, w).cost) / (2 * h);
        EXPECT_NEAR(g.gradient[p], fd, 1e-3 * g.gradient.cwiseAbs().maxCoeff()) << p;
    }
}

TEST(PolicyUpdate, ReducesVirtualControlCost) {
    SurrogateConfig sc;
    sc.target[idx::kZ] = 1.0;
    const SurrogateEnvironment env(sc);
    const ClosureWeights w = reference_closure();
    PolicyWeights pi;
    AssimConfig cfg;
    Adam opt(PolicyWeights::kParamCount, {.lr = cfg.lr_policy});
    const PolicyReport rep = mb_policy_update(env, pi, w, cfg, opt, 30);
    ASSERT_FALSE(rep.costs.empty());
    EXPECT_LT(rep.costs.back(), rep.costs.front());
}

TEST(PolicyUpdate, FrozenBiasIsNotTrained) {
    SurrogateConfig sc;
    sc.target[idx::kZ] = 1.0;
    const SurrogateEnvironment env(sc);
    PolicyWeights pi;
    pi.bias[2] = 0.25;
    pi.freeze_bias = {false, false, true};
    Adam opt(PolicyWeights::kParamCount, {.lr = 1e-2});
    mb_policy_update(env, pi, reference_closure(), AssimConfig{}, opt, 5);
    EXPECT_EQ(pi.bias[2], 0.25);
}

TEST(VirtualEpisodeCost, EqualsNegativeCumulativeReward) {
    SurrogateConfig sc;
    sc.target[idx::kZ] = 1.0;
    const SurrogateEnvironment env(sc);
    const PolicyWeights pi;
    const ClosureWeights w = reference_closure();
    const VirtualRollout r = env.rollout(pi, w);
    EXPECT_DOUBLE_EQ(virtual_episode_cost(env, pi, w), -cumulative_reward(r.record));
}
