#include "rtwin/real_env.hpp"
#include "rtwin/rng.hpp"
#include "rtwin/surrogate_env.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rtwin;

namespace {

ClosureWeights random_closure(Rng& rng, ClosureVariant v, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    ClosureWeights w;
    w.variant = v;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < kClosureFeatures; ++j) w.w(i, j) = n(rng);
    }
    w.apply_mask();
    return w;
}

State random_state(Rng& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    State s;
    for (int c = 0; c < 6; ++c) s[c] = n(rng);
    return s;
}

Action random_action(Rng& rng) {
    const ActionBounds b;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Action a;
    for (int i = 0; i < 3; ++i) a[i] = b.lo[i] + u(rng) * b.range()[i];
    return a;
}

}  // namespace

TEST(Closure, ZeroWeightsGiveZeroForce) {
    Rng rng(1);
    const ClosureWeights w;
    EXPECT_EQ(closure_force(random_state(rng, 1.0), random_action(rng), w), Vec3::Zero());
}

TEST(Closure, IdentityActionBlockReturnsTheAction) {
    ClosureWeights w;
    w.action_scale = Vec3::Ones();
    w.block(0) = Mat3::Identity();
    const Vec3 f = closure_force(State::Zero(), Action(1.0, 2.0, 3.0), w);
    EXPECT_EQ(f, Vec3(1.0, 2.0, 3.0));
}

TEST(Closure, ActionScaleDividesTheAction) {
    ClosureWeights w;
    w.action_scale = Vec3(2.0, 4.0, 8.0);
    w.block(0) = Mat3::Identity();
    EXPECT_EQ(closure_force(State::Zero(), Action(1.0, 2.0, 3.0), w), Vec3(0.5, 0.5, 0.375));
}

TEST(Closure, FeatureLayout) {
    State s = State::Zero();
    s.head<3>() = Vec3(2.0, 3.0, 5.0);
    const ClosureFeatures f = closure_features(s, Action(7.0, 11.0, 13.0), Vec3::Ones());
    EXPECT_EQ(f.segment<3>(0), Vec3(7, 11, 13));
    EXPECT_EQ(f.segment<3>(3), Vec3(49, 121, 169));
    EXPECT_EQ(f.segment<3>(6), Vec3(7 * 13, 7 * 11, 13 * 11));
    EXPECT_EQ(f.segment<3>(9), Vec3(2, 3, 5));
    EXPECT_EQ(f.segment<3>(12), Vec3(6, 10, 15));
    EXPECT_EQ(f.segment<3>(15), Vec3(4, 9, 25));
    EXPECT_EQ(f.segment<3>(18), Vec3(14, 22, 26));
    EXPECT_EQ(f.segment<3>(21), Vec3(21, 33, 39));
    EXPECT_EQ(f.segment<3>(24), Vec3(35, 55, 65));
}

TEST(Closure, FreeParameterCounts) {
    const std::pair<ClosureVariant, int> expected[] = {{ClosureVariant::M1, 27},
                                                       {ClosureVariant::M2, 18},
                                                       {ClosureVariant::M3, 36},
                                                       {ClosureVariant::M4, 54},
                                                       {ClosureVariant::M5, 81}};
    for (const auto& [v, n] : expected) {
        ClosureWeights w;
        w.variant = v;
        EXPECT_EQ(w.free_count(), n) << to_string(v);
        EXPECT_EQ(w.mask().sum(), n);
    }
}

TEST(Closure, MaskedEntriesStayZero) {
    Rng rng(2);
    ClosureWeights w = random_closure(rng, ClosureVariant::M3, 1.0);
    for (int b = 4; b < kClosureBlocks; ++b) EXPECT_EQ(w.block(b), Mat3::Zero());
    // Perturbing a masked entry and re-masking restores it.
    w.w(1, 3 * 6 + 2) = 5.0;
    const ClosureWeights before = w;
    w.apply_mask();
    EXPECT_EQ(w.w(1, 3 * 6 + 2), 0.0);
    w.apply_mask();
    EXPECT_EQ(w.w, (before.w.array() * before.mask().array()).matrix());
}

TEST(Closure, VectorRoundTrip) {
    Rng rng(3);
    for (ClosureVariant v : {ClosureVariant::M1, ClosureVariant::M2, ClosureVariant::M3, ClosureVariant::M4,
                             ClosureVariant::M5}) {
        const ClosureWeights w = random_closure(rng, v, 1.0);
        ClosureWeights back;
        back.variant = v;
        back.set_vector(w.to_vector());
        EXPECT_EQ(back.w, w.w);
        EXPECT_EQ(w.pack(w.w), w.to_vector());
    }
    ClosureWeights w;
    EXPECT_THROW(w.set_vector(VecX::Zero(5)), std::invalid_argument);
}

TEST(Closure, VariantNamesRoundTrip) {
    for (ClosureVariant v : {ClosureVariant::M1, ClosureVariant::M2, ClosureVariant::M3, ClosureVariant::M4,
                             ClosureVariant::M5}) {
        EXPECT_EQ(parse_variant(to_string(v)), v);
    }
    EXPECT_THROW(parse_variant("M6"), std::invalid_argument);
}

TEST(Closure, LinearInWeights) {
    Rng rng(4);
    const ClosureWeights a = random_closure(rng, ClosureVariant::M5, 1.0);
    const ClosureWeights b = random_closure(rng, ClosureVariant::M5, 1.0);
    ClosureWeights sum = a;
    sum.w = 2.0 * a.w - 0.5 * b.w;
    const State s = random_state(rng, 1.0);
    const Action u = random_action(rng);
    EXPECT_LT((closure_force(s, u, sum) - (2.0 * closure_force(s, u, a) - 0.5 * closure_force(s, u, b))).norm(),
              1e-12);
}

TEST(VirtualDynamics, ZeroClosureEqualsRealDynamicsWithoutAir) {
    RealEnvConfig rc;
    rc.geometry.air_density = 0.0;
    const RealEnvironment real(rc);
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        const State s = random_state(rng, 1.0);
        const State dv = virtual_derivative(s, random_action(rng), ClosureWeights{}, rc.geometry.gravity);
        EXPECT_LT((dv - real.derivative(0.0, s, WingKinematics{})).norm(), 1e-14);
    }
}

TEST(VirtualDynamics, JacobiansMatchFiniteDifferences) {
    Rng rng(6);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        const ClosureWeights w = random_closure(rng, trial % 2 ? ClosureVariant::M5 : ClosureVariant::M3, 1.0);
        const State s = random_state(rng, 1.0);
        const Action a = random_action(rng);
        const SurrogateJacobians j = surrogate_jacobians(s, a, w, 9.81);
        for (int c = 0; c < 6; ++c) {
            State p = s, m = s;
            p[c] += h;
            m[c] -= h;
            const State fd = (virtual_derivative(p, a, w, 9.81) - virtual_derivative(m, a, w, 9.81)) / (2 * h);
            ASSERT_LT((fd - j.d_state.col(c)).norm(), 1e-6 * std::max(1.0, fd.norm()));
        }
        for (int c = 0; c < 3; ++c) {
            Action p = a, m = a;
            p[c] += h * 1e-2;
            m[c] -= h * 1e-2;
            const State fd = (virtual_derivative(s, p, w, 9.81) - virtual_derivative(s, m, w, 9.81)) / (2e-2 * h);
            ASSERT_LT((fd - j.d_action.col(c)).norm(), 1e-6 * std::max(1.0, fd.norm()));
        }
        const VecX x = w.to_vector();
        for (int p = 0; p < x.size(); p += 7) {
            ClosureWeights wp = w, wm = w;
            VecX xp = x, xm = x;
            xp[p] += h;
            xm[p] -= h;
            wp.set_vector(xp);
            wm.set_vector(xm);
            const State fd = (virtual_derivative(s, a, wp, 9.81) - virtual_derivative(s, a, wm, 9.81)) / (2 * h);
            ASSERT_LT((fd - j.d_weights.col(p)).norm(), 1e-6 * std::max(1.0, fd.norm()));
        }
    }
}

TEST(VirtualDynamics, LowerLeftBlockIsIdentityAndActionOnlyMovesVelocities) {
    Rng rng(7);
    const ClosureWeights w = random_closure(rng, ClosureVariant::M5, 1.0);
    const SurrogateJacobians j = surrogate_jacobians(random_state(rng, 1.0), random_action(rng), w, 9.81);
    EXPECT_TRUE((j.d_state.block<3, 3>(3, 0).isIdentity()));
    EXPECT_TRUE((j.d_state.block<3, 3>(3, 3).isZero()));
    EXPECT_TRUE(j.d_action.bottomRows<3>().isZero());
    EXPECT_TRUE(j.d_weights.bottomRows(3).isZero());
}

TEST(TrackingCost, InterpolatesBetweenSamples) {
    std::vector<State> ref(3, State::Zero());
    ref[1][0] = 1.0;
    ref[2][0] = 3.0;
    const TrackingCost c(ref, 0.1);
    EXPECT_DOUBLE_EQ(c.reference_at(0.05)[0], 0.5);
    EXPECT_DOUBLE_EQ(c.reference_at(0.15)[0], 2.0);
    EXPECT_DOUBLE_EQ(c.reference_at(1.0)[0], 3.0);
    EXPECT_DOUBLE_EQ(c.value(0.1, State::Zero()), 1.0);
}

TEST(Rollout, ScheduleLengthMustMatch) {
    const SurrogateEnvironment env{SurrogateConfig{}};
    std::vector<Action> short_schedule(5, Action::Zero());
    EXPECT_THROW(env.rollout(std::span<const Action>(short_schedule), ClosureWeights{}), std::invalid_argument);
}

TEST(Rollout, NodesAlignWithCycleStates) {
    const SurrogateEnvironment env{SurrogateConfig{}};
    std::vector<Action> schedule(30, Action(1.0, 0.0, 0.0));
    ClosureWeights w;
    w.block(0)(1, 0) = 9.0;
    const VirtualRollout r = env.rollout(std::span<const Action>(schedule), w);
    ASSERT_TRUE(r.record.complete());
    ASSERT_EQ(r.nodes.size(), 30u * 5u + 1u);
    for (int k = 0; k <= 30; ++k) EXPECT_EQ(r.nodes[static_cast<std::size_t>(k * 5)], r.record.states[k]);
}

TEST(Rollout, BlowUpStopsTheEpisode) {
    SurrogateConfig sc;
    sc.blow_up_bound = 0.5;
    const SurrogateEnvironment env(sc);
    std::vector<Action> schedule(30, Action::Zero());
    const VirtualRollout r = env.rollout(std::span<const Action>(schedule), ClosureWeights{});
    EXPECT_TRUE(r.record.failed);
    EXPECT_FALSE(r.record.complete());
}

TEST(Adjoint, ConstantForceMatchesClosedForm) {
    // Constant force f on x and z, no gravity, zero reference: velocity f t,
    // position f t^2 / 2, so J = |f|^2 (T^3/3 + T^5/20).
    SurrogateConfig sc;
    sc.gravity = 0.0;
    sc.cycles = 4;
    const SurrogateEnvironment env(sc);
    ClosureWeights w;
    w.action_scale = Vec3::Ones();
    const Vec3 f(0.7, -1.3, 0.0);
    const Action a(1.0, 2.0, 3.0);
    // f = W0 a with W0 = f e_0^T.
    w.block(0).col(0) = f;
    std::vector<Action> schedule(4, a);
    std::vector<State> ref(5, State::Zero());
    const TrackingCost cost(ref, sc.cycle_period);
    const VirtualRollout r = env.rollout(std::span<const Action>(schedule), w, &cost);
    const double T = sc.cycle_period * sc.cycles;
    const double shape = T * T * T / 3.0 + std::pow(T, 5) / 20.0;
    EXPECT_NEAR(r.cost, f.squaredNorm() * shape, 1e-8 * f.squaredNorm() * shape);

    const AdjointSolution sol = env.solve_adjoint(r, w, cost);
    ASSERT_TRUE(sol.finite);
    for (int i = 0; i < 2; ++i) {
        const double dj_df = 2.0 * f[i] * shape;
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(sol.d_closure(i, j), dj_df * a[j], 1e-6 * std::abs(dj_df * a[j]));
    }
    EXPECT_EQ(sol.costate.back(), State::Zero());
}

TEST(Adjoint, ClosureGradientMatchesFiniteDifferences) {
    SurrogateConfig sc;
    sc.cycles = 3;
    const SurrogateEnvironment env(sc);
    Rng rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        ClosureWeights w = random_closure(rng, ClosureVariant::M5, 0.3);
        w.w(1, 0) += 10.0;
        std::vector<Action> schedule;
        for (int k = 0; k < 3; ++k) schedule.push_back(random_action(rng));
        std::vector<State> ref{State::Zero()};
        for (int k = 0; k < 3; ++k) ref.push_back(random_state(rng, 0.3));
        const TrackingCost cost(ref, sc.cycle_period);
        const VirtualRollout r = env.rollout(std::span<const Action>(schedule), w, &cost);
        const AdjointSolution sol = env.solve_adjoint(r, w, cost);
        const VecX g = w.pack(sol.d_closure);
        const VecX x = w.to_vector();
        for (int p = 0; p < x.size(); ++p) {
            const double h = 1e-6 * std::max(1.0, std::abs(x[p]));
            ClosureWeights wp = w, wm = w;
            VecX xp = x, xm = x;
            xp[p] += h;
            xm[p] -= h;
            wp.set_vector(xp);
            wm.set_vector(xm);
            const double fd = (env.rollout(std::span<const Action>(schedule), wp, &cost).cost -
                               env.rollout(std::span<const Action>(schedule), wm, &cost).cost) /
                              (2 * h);
            EXPECT_NEAR(g[p], fd, 1e-3 * g.cwiseAbs().maxCoeff()) << p;
        }
    }
}

TEST(Adjoint, RejectsIncompleteTrajectories) {
    SurrogateConfig sc;
    sc.blow_up_bound = 0.5;
    const SurrogateEnvironment env(sc);
    std::vector<Action> schedule(30, Action::Zero());
    const VirtualRollout r = env.rollout(std::span<const Action>(schedule), ClosureWeights{});
    std::vector<State> ref(31, State::Zero());
    EXPECT_THROW(env.solve_adjoint(r, ClosureWeights{}, TrackingCost(ref, 0.05)), std::invalid_argument);
}

TEST(Surrogate, CountsDerivativeEvaluations) {
    SurrogateConfig sc;
    sc.cycles = 2;
    const SurrogateEnvironment env(sc);
    std::vector<Action> schedule(2, Action::Zero());
    env.rollout(std::span<const Action>(schedule), ClosureWeights{});
    EXPECT_EQ(env.evaluations(), 2 * 5 * 4);
}
