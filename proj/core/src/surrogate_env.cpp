#include "rtwin/surrogate_env.hpp"

#include "rtwin/real_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rtwin {

ClosureVariant parse_variant(std::string_view name) {
    if (name == "M1") return ClosureVariant::M1;
    if (name == "M2") return ClosureVariant::M2;
    if (name == "M3") return ClosureVariant::M3;
    if (name == "M4") return ClosureVariant::M4;
    if (name == "M5") return ClosureVariant::M5;
    throw std::invalid_argument("unknown closure variant: " + std::string(name));
}

std::string_view to_string(ClosureVariant v) {
    switch (v) {
        case ClosureVariant::M1: return "M1";
        case ClosureVariant::M2: return "M2";
        case ClosureVariant::M3: return "M3";
        case ClosureVariant::M4: return "M4";
        case ClosureVariant::M5: return "M5";
    }
    return "M3";
}

Vec3 default_action_scale() {
    const ActionBounds b;
    return b.lo.cwiseAbs().cwiseMax(b.hi.cwiseAbs());
}

bool ClosureWeights::block_active(ClosureVariant v, int block) {
    switch (v) {
        case ClosureVariant::M1: return block <= 2;
        case ClosureVariant::M2: return block == 0 || block == 3;
        case ClosureVariant::M3: return block <= 3;
        case ClosureVariant::M4: return block <= 5;
        case ClosureVariant::M5: return true;
    }
    return false;
}

int ClosureWeights::free_count() const {
    int n = 0;
    for (int b = 0; b < kClosureBlocks; ++b) n += active(b) ? 9 : 0;
    return n;
}

VecX ClosureWeights::pack(const ClosureMatrix& m) const {
    VecX v(free_count());
    int k = 0;
    for (int b = 0; b < kClosureBlocks; ++b) {
        if (!active(b)) continue;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) v[k++] = m(i, 3 * b + j);
        }
    }
    return v;
}

VecX ClosureWeights::to_vector() const { return pack(w); }

void ClosureWeights::set_vector(const VecX& v) {
    if (v.size() != free_count()) throw std::invalid_argument("closure vector has the wrong length");
    int k = 0;
    for (int b = 0; b < kClosureBlocks; ++b) {
        if (!active(b)) {
            block(b).setZero();
            continue;
        }
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) w(i, 3 * b + j) = v[k++];
        }
    }
}

ClosureMatrix ClosureWeights::mask() const {
    ClosureMatrix m = ClosureMatrix::Zero();
    for (int b = 0; b < kClosureBlocks; ++b) {
        if (active(b)) m.middleCols<3>(3 * b).setOnes();
    }
    return m;
}

void ClosureWeights::apply_mask() {
    for (int b = 0; b < kClosureBlocks; ++b) {
        if (!active(b)) block(b).setZero();
    }
}

ClosureFeatures closure_features(const State& s, const Action& a, const Vec3& action_scale) {
    const Vec3 u = a.cwiseQuotient(action_scale);
    const Vec3 v = s.head<3>();
    ClosureFeatures f;
    f.segment<3>(0) = u;
    f.segment<3>(3) = u.cwiseProduct(u);
    f.segment<3>(6) << u[0] * u[2], u[0] * u[1], u[2] * u[1];
    f.segment<3>(9) = v;
    f.segment<3>(12) << v[0] * v[1], v[0] * v[2], v[2] * v[1];
    f.segment<3>(15) = v.cwiseProduct(v);
    f.segment<3>(18) = u * v[0];
    f.segment<3>(21) = u * v[1];
    f.segment<3>(24) = u * v[2];
    return f;
}

FeatureSet closure_feature_set(const State& s, const Action& a, const Vec3& action_scale) {
    const Vec3 u = a.cwiseQuotient(action_scale);
    const Vec3 v = s.head<3>();
    FeatureSet out;
    out.phi = closure_features(s, a, action_scale);

    // Derivatives with respect to the scaled action first.
    FeatureJacobian du = FeatureJacobian::Zero();
    du.block<3, 3>(0, 0).setIdentity();
    du.block<3, 3>(3, 0) = (2.0 * u).asDiagonal();
    du(6, 0) = u[2];
    du(6, 2) = u[0];
    du(7, 0) = u[1];
    du(7, 1) = u[0];
    du(8, 2) = u[1];
    du(8, 1) = u[2];
    du.block<3, 3>(18, 0) = v[0] * Mat3::Identity();
    du.block<3, 3>(21, 0) = v[1] * Mat3::Identity();
    du.block<3, 3>(24, 0) = v[2] * Mat3::Identity();
    out.d_action = du * action_scale.cwiseInverse().asDiagonal();

    FeatureJacobian dv = FeatureJacobian::Zero();
    dv.block<3, 3>(9, 0).setIdentity();
    dv(12, 0) = v[1];
    dv(12, 1) = v[0];
    dv(13, 0) = v[2];
    dv(13, 2) = v[0];
    dv(14, 2) = v[1];
    dv(14, 1) = v[2];
    dv.block<3, 3>(15, 0) = (2.0 * v).asDiagonal();
    dv.block<3, 1>(18, 0) = u;
    dv.block<3, 1>(21, 1) = u;
    dv.block<3, 1>(24, 2) = u;
    out.d_velocity = dv;
    return out;
}

Vec3 closure_force(const State& s, const Action& a, const ClosureWeights& w) {
    return w.w * closure_features(s, a, w.action_scale);
}

State virtual_derivative(const State& s, const Action& a, const ClosureWeights& w, double gravity) {
    State ds = rigid_body_terms(s, gravity);
    ds.head<3>() += closure_force(s, a, w);
    return ds;
}

SurrogateJacobians surrogate_jacobians(const State& s, const Action& a, const ClosureWeights& w,
                                       double gravity) {
    const FeatureSet fs = closure_feature_set(s, a, w.action_scale);
    SurrogateJacobians j;
    j.d_state = rigid_body_jacobian(s, gravity);
    j.d_state.block<3, 3>(0, 0) += w.w * fs.d_velocity;
    j.d_action.setZero();
    j.d_action.topRows<3>() = w.w * fs.d_action;

    j.d_weights = MatX::Zero(6, w.free_count());
    int col = 0;
    for (int b = 0; b < kClosureBlocks; ++b) {
        if (!w.active(b)) continue;
        for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 3; ++k) j.d_weights(i, col++) = fs.phi[3 * b + k];
        }
    }
    return j;
}

TrackingCost::TrackingCost(std::span<const State> reference, double cycle_period)
    : ref_(reference), period_(cycle_period) {
    if (ref_.empty()) throw std::invalid_argument("tracking reference is empty");
}

State TrackingCost::reference_at(double t) const {
    const double x = t / period_;
    const int last = static_cast<int>(ref_.size()) - 1;
    if (x <= 0.0 || last == 0) return ref_.front();
    if (x >= last) return ref_.back();
    const int k = std::min(static_cast<int>(std::floor(x)), last - 1);
    const double f = x - k;
    return (1.0 - f) * ref_[static_cast<std::size_t>(k)] + f * ref_[static_cast<std::size_t>(k + 1)];
}

double TrackingCost::value(double t, const State& s) const { return (s - reference_at(t)).squaredNorm(); }

State TrackingCost::gradient(double t, const State& s) const { return 2.0 * (s - reference_at(t)); }

double ControlCost::value(double, const State& s) const { return -reward(cycle_error(s, target_), cfg_); }

State ControlCost::gradient(double, const State& s) const {
    return -reward_gradient(cycle_error(s, target_), cfg_);
}

void SurrogateConfig::validate() const {
    if (!(cycle_period > 0.0)) throw std::invalid_argument("cycle_period must be positive");
    if (cycles < 1) throw std::invalid_argument("cycles must be >= 1");
    if (substeps_per_cycle < 1) throw std::invalid_argument("substeps_per_cycle must be >= 1");
    reward.validate();
}

SurrogateEnvironment::SurrogateEnvironment(SurrogateConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

namespace {

bool out_of_bounds(const State& s, double bound) {
    for (int i = 0; i < 6; ++i) {
        if (!std::isfinite(s[i]) || std::abs(s[i]) > bound) return true;
    }
    return false;
}

}  // namespace

template <typename ActionFn>
VirtualRollout SurrogateEnvironment::integrate(ActionFn&& choose, const ClosureWeights& w,
                                               const RunningCost* cost, const State& s0) const {
    const int n = cfg_.substeps_per_cycle;
    const double h = cfg_.step();
    const double g = cfg_.gravity;

    VirtualRollout out;
    EpisodeRecord& rec = out.record;
    rec.target = cfg_.target;
    rec.cycle_period = cfg_.cycle_period;
    rec.planned_cycles = cfg_.cycles;
    rec.states.push_back(s0);
    out.nodes.reserve(static_cast<std::size_t>(cfg_.cycles * n + 1));
    out.nodes.push_back(s0);

    State s = s0;
    for (int k = 0; k < cfg_.cycles; ++k) {
        const Action a = choose(k, s);
        for (int i = 0; i < n; ++i) {
            const double t = (k * n + i) * h;
            const State k1 = virtual_derivative(s, a, w, g);
            const State s2 = s + 0.5 * h * k1;
            const State k2 = virtual_derivative(s2, a, w, g);
            const State s3 = s + 0.5 * h * k2;
            const State k3 = virtual_derivative(s3, a, w, g);
            const State s4 = s + h * k3;
            const State k4 = virtual_derivative(s4, a, w, g);
            evaluations_ += 4;
            if (cost != nullptr) {
                out.cost += (h / 6.0) * (cost->value(t, s) + 2.0 * cost->value(t + 0.5 * h, s2) +
                                         2.0 * cost->value(t + 0.5 * h, s3) + cost->value(t + h, s4));
            }
            s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (out_of_bounds(s, cfg_.blow_up_bound)) {
                rec.failed = true;
                rec.failed_cycle = k;
                return out;
            }
            out.nodes.push_back(s);
        }
        rec.actions.push_back(a);
        rec.states.push_back(s);
        rec.rewards.push_back(reward(cycle_error(s, cfg_.target), cfg_.reward));
    }
    return out;
}

VirtualRollout SurrogateEnvironment::rollout(std::span<const Action> schedule, const ClosureWeights& w,
                                             const RunningCost* cost, const State& s0) const {
    if (static_cast<int>(schedule.size()) != cfg_.cycles) {
        throw std::invalid_argument("replay schedule length must equal the cycle count");
    }
    return integrate([&](int k, const State&) { return schedule[static_cast<std::size_t>(k)]; }, w, cost,
                     s0);
}

VirtualRollout SurrogateEnvironment::rollout(const PolicyWeights& policy, const ClosureWeights& w,
                                             const RunningCost* cost, const State& s0) const {
    VirtualRollout out = integrate(
        [&](int, const State& s) { return pd_policy(cycle_error(s, cfg_.target), policy); }, w, cost, s0);
    out.closed_loop = true;
    return out;
}

AdjointSolution SurrogateEnvironment::solve_adjoint(const VirtualRollout& traj, const ClosureWeights& w,
                                                    const RunningCost& cost,
                                                    const PolicyWeights* policy) const {
    if (!traj.record.complete()) throw std::invalid_argument("adjoint needs a complete trajectory");
    const int n = cfg_.substeps_per_cycle;
    const int cycles = traj.record.executed_cycles();
    const double h = cfg_.step();
    const double g = cfg_.gravity;
    const auto total = static_cast<std::size_t>(cycles * n);
    if (traj.nodes.size() != total + 1) throw std::invalid_argument("trajectory nodes do not match grid");

    AdjointSolution sol;
    sol.costate.assign(total + 1, State::Zero());
    sol.d_action.assign(static_cast<std::size_t>(cycles), Action::Zero());

    // Right-hand side of the reversed-time costate equation and the weight
    // and action sensitivities it drives.
    struct Stage {
        Mat6 at;
        Eigen::Matrix<double, 3, 3> bt;
        ClosureFeatures phi;
        State src;
    };
    auto stage = [&](double t, const State& s, const Action& a) {
        const FeatureSet fs = closure_feature_set(s, a, w.action_scale);
        Stage st;
        Mat6 ds = rigid_body_jacobian(s, g);
        ds.block<3, 3>(0, 0) += w.w * fs.d_velocity;
        st.at = ds.transpose();
        st.bt = (w.w * fs.d_action).transpose();
        st.phi = fs.phi;
        st.src = cost.gradient(t, s);
        return st;
    };

    State lam = State::Zero();
    for (int k = cycles - 1; k >= 0; --k) {
        const Action& a = traj.record.actions[static_cast<std::size_t>(k)];
        Action ga = Action::Zero();
        for (int i = n - 1; i >= 0; --i) {
            const auto j = static_cast<std::size_t>(k * n + i);
            const double t0 = static_cast<double>(j) * h;
            const State& s0 = traj.nodes[j];
            const State& s1 = traj.nodes[j + 1];
            const State f0 = virtual_derivative(s0, a, w, g);
            const State f1 = virtual_derivative(s1, a, w, g);
            // Cubic Hermite midpoint keeps the sweep fourth-order accurate.
            const State sm = 0.5 * (s0 + s1) + (h / 8.0) * (f0 - f1);

            const Stage e1 = stage(t0 + h, s1, a);
            const Stage em = stage(t0 + 0.5 * h, sm, a);
            const Stage e0 = stage(t0, s0, a);
            evaluations_ += 5;

            const State l1 = lam;
            const State k1 = e1.at * l1 + e1.src;
            const State l2 = lam + 0.5 * h * k1;
            const State k2 = em.at * l2 + em.src;
            const State l3 = lam + 0.5 * h * k2;
            const State k3 = em.at * l3 + em.src;
            const State l4 = lam + h * k3;
            const State k4 = e0.at * l4 + e0.src;

            const double c = h / 6.0;
            sol.d_closure += c * (l1.head<3>() * e1.phi.transpose() + 2.0 * l2.head<3>() * em.phi.transpose() +
                                  2.0 * l3.head<3>() * em.phi.transpose() + l4.head<3>() * e0.phi.transpose());
            ga += c * (e1.bt * l1.head<3>() + 2.0 * em.bt * l2.head<3>() + 2.0 * em.bt * l3.head<3>() +
                       e0.bt * l4.head<3>());

            lam += c * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            sol.costate[j] = lam;
        }
        sol.d_action[static_cast<std::size_t>(k)] = ga;

        if (policy != nullptr) {
            const State e = cycle_error(traj.record.states[static_cast<std::size_t>(k)], cfg_.target);
            const PolicyJacobians pj = policy_jacobians(e, *policy);
            sol.d_policy += pj.d_weights.transpose() * ga;
            if (k > 0) {
                lam += pj.d_error.transpose() * ga;
                sol.costate[static_cast<std::size_t>(k * n)] = lam;
            }
        }
        if (!lam.allFinite()) {
            sol.finite = false;
            return sol;
        }
    }
    sol.finite = sol.d_closure.allFinite() && sol.d_policy.allFinite();
    return sol;
}

}  // namespace rtwin
