#include "rtwin/mb_agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rtwin {

BufferStrategy parse_buffer_strategy(std::string_view name) {
    if (name == "max_variance") return BufferStrategy::MaxVariance;
    if (name == "min_error") return BufferStrategy::MinError;
    throw std::invalid_argument("unknown buffer strategy: " + std::string(name));
}

std::string_view to_string(BufferStrategy s) {
    return s == BufferStrategy::MaxVariance ? "max_variance" : "min_error";
}

double buffer_variance(std::span<const MatX> trajectories) {
    if (trajectories.empty()) throw std::invalid_argument("buffer_variance needs at least one trajectory");
    MatX mean = MatX::Zero(trajectories[0].rows(), trajectories[0].cols());
    Eigen::Index rows = 0;
    for (const MatX& s : trajectories) {
        if (s.rows() != mean.rows() || s.cols() != mean.cols()) {
            throw std::invalid_argument("trajectory matrices differ in shape");
        }
        mean += s;
        rows += s.rows();
    }
    mean /= static_cast<double>(trajectories.size());
    double total = 0.0;
    // Tr(D D^T) is the squared Frobenius norm of D.
    for (const MatX& s : trajectories) total += (mean - s).squaredNorm();
    return total / static_cast<double>(rows);
}

MatX trajectory_matrix(const EpisodeRecord& rec) {
    MatX m(static_cast<Eigen::Index>(rec.states.size()), 6);
    for (std::size_t k = 0; k < rec.states.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = rec.states[k];
    return m;
}

AssimilationBuffer::AssimilationBuffer(int capacity, BufferStrategy strategy)
    : capacity_(capacity), strategy_(strategy) {
    if (capacity < 1) throw std::invalid_argument("assimilation buffer capacity must be >= 1");
}

double AssimilationBuffer::variance() const {
    return matrices_.empty() ? 0.0 : buffer_variance(matrices_);
}

double AssimilationBuffer::worst_error() const {
    double worst = 0.0;
    for (const EpisodeRecord& e : episodes_) worst = std::max(worst, -cumulative_reward(e));
    return worst;
}

double AssimilationBuffer::variance_with(int replaced, const MatX& candidate) const {
    std::vector<MatX> trial = matrices_;
    trial[static_cast<std::size_t>(replaced)] = candidate;
    return buffer_variance(trial);
}

bool AssimilationBuffer::offer(const EpisodeRecord& rec) {
    if (!rec.complete()) return false;
    EpisodeRecord stored = rec;
    stored.dense_time.clear();
    stored.dense_states.clear();
    MatX m = trajectory_matrix(stored);

    if (!full()) {
        episodes_.push_back(std::move(stored));
        matrices_.push_back(std::move(m));
        return true;
    }

    int slot = -1;
    if (strategy_ == BufferStrategy::MaxVariance) {
        double best = variance();
        for (int i = 0; i < size(); ++i) {
            const double xi = variance_with(i, m);
            // Strict improvement only, so ties keep the incumbent.
            if (xi > best) {
                best = xi;
                slot = i;
            }
        }
    } else {
        const double err = -cumulative_reward(stored);
        double worst = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < size(); ++i) {
            const double e = -cumulative_reward(episodes_[static_cast<std::size_t>(i)]);
            if (e > worst) {
                worst = e;
                slot = i;
            }
        }
        if (!(err < worst)) slot = -1;
    }
    if (slot < 0) return false;
    episodes_[static_cast<std::size_t>(slot)] = std::move(stored);
    matrices_[static_cast<std::size_t>(slot)] = std::move(m);
    return true;
}

void AssimConfig::validate() const {
    if (!(alpha_p >= 0.0)) throw std::invalid_argument("alpha_p must be non-negative");
    if (n_g < 0 || n_mb < 0) throw std::invalid_argument("iteration counts must be non-negative");
    if (!(lr_assim > 0.0) || !(lr_policy > 0.0)) throw std::invalid_argument("learning rates must be positive");
}

double assimilation_cost(std::span<const std::vector<State>> virtual_trajs,
                         std::span<const std::vector<State>> real_trajs, double dt, const ClosureWeights& w,
                         double alpha_p) {
    if (virtual_trajs.size() != real_trajs.size() || virtual_trajs.empty()) {
        throw std::invalid_argument("assimilation_cost needs matching, non-empty trajectory sets");
    }
    double total = 0.0;
    double horizon = 0.0;
    for (std::size_t i = 0; i < virtual_trajs.size(); ++i) {
        const auto& v = virtual_trajs[i];
        const auto& r = real_trajs[i];
        if (v.size() != r.size() || v.size() < 2) throw std::invalid_argument("trajectory grids do not match");
        double integral = 0.0;
        for (std::size_t k = 0; k + 1 < v.size(); ++k) {
            integral += 0.5 * dt * ((v[k] - r[k]).squaredNorm() + (v[k + 1] - r[k + 1]).squaredNorm());
        }
        total += integral;
        horizon = dt * static_cast<double>(v.size() - 1);
    }
    return total / static_cast<double>(virtual_trajs.size()) + alpha_p * w.w.norm() * horizon;
}

AssimilationGradient assimilation_gradient(const SurrogateEnvironment& env, std::span<const EpisodeRecord> buffer,
                                           const ClosureWeights& w, double alpha_p) {
    if (buffer.empty()) throw std::invalid_argument("assimilation needs a non-empty buffer");
    const SurrogateConfig& cfg = env.config();
    const double horizon = cfg.cycle_period * cfg.cycles;

    AssimilationGradient out;
    ClosureMatrix grad = ClosureMatrix::Zero();
    double cost = 0.0;
    for (const EpisodeRecord& rec : buffer) {
        const TrackingCost tracking(rec.states, cfg.cycle_period);
        VirtualRollout replay = env.rollout(rec.actions, w, &tracking);
        if (!replay.record.complete() || !std::isfinite(replay.cost)) return out;
        const AdjointSolution adj = env.solve_adjoint(replay, w, tracking);
        if (!adj.finite) return out;
        cost += replay.cost;
        grad += adj.d_closure;
        out.replays.push_back(std::move(replay));
    }
    const double n = static_cast<double>(buffer.size());
    cost /= n;
    grad /= n;

    const double norm = w.w.norm();
    cost += alpha_p * norm * horizon;
    // The penalty uses the plain norm, whose gradient is undefined at zero;
    // the zero subgradient is taken there.
    if (norm > 0.0) grad += (alpha_p * horizon / norm) * w.w;

    out.cost = cost;
    out.gradient = w.pack(grad);
    out.ok = std::isfinite(cost) && out.gradient.allFinite();
    return out;
}

AssimilationReport assimilate(const SurrogateEnvironment& env, std::span<const EpisodeRecord> buffer,
                              ClosureWeights& w, const AssimConfig& cfg, Adam& opt, int steps) {
    AssimilationReport report;
    if (opt.size() != w.free_count()) opt = Adam(w.free_count(), {.lr = cfg.lr_assim});
    const double lr0 = opt.learning_rate();
    ClosureWeights good = w;
    bool have_good = false;

    for (int it = 0; it <= steps; ++it) {
        const AssimilationGradient g = assimilation_gradient(env, buffer, w, cfg.alpha_p);
        if (!g.ok) {
            ++report.rejected;
            if (!have_good) break;
            w = good;
            opt.set_learning_rate(0.5 * opt.learning_rate());
            continue;
        }
        good = w;
        have_good = true;
        report.costs.push_back(g.cost);
        if (it == steps) break;
        VecX x = w.to_vector();
        opt.step(x, g.gradient);
        w.set_vector(x);
        w.apply_mask();
    }
    if (have_good) w = good;
    opt.set_learning_rate(lr0);
    return report;
}

PolicyGradient policy_gradient(const SurrogateEnvironment& env, const PolicyWeights& pi, const ClosureWeights& w) {
    const SurrogateConfig& cfg = env.config();
    const ControlCost cost(cfg.target, cfg.reward);
    PolicyGradient out;
    out.rollout = env.rollout(pi, w, &cost);
    if (!out.rollout.record.complete()) return out;
    const AdjointSolution adj = env.solve_adjoint(out.rollout, w, cost, &pi);
    if (!adj.finite) return out;
    out.cost = out.rollout.cost;
    out.gradient = adj.d_policy.cwiseProduct(pi.trainable_mask());
    out.ok = std::isfinite(out.cost);
    return out;
}

PolicyReport mb_policy_update(const SurrogateEnvironment& env, PolicyWeights& pi, const ClosureWeights& w,
                              const AssimConfig& cfg, Adam& opt, int steps) {
    PolicyReport report;
    if (opt.size() != PolicyWeights::kParamCount) opt = Adam(PolicyWeights::kParamCount, {.lr = cfg.lr_policy});
    for (int it = 0; it < steps; ++it) {
        const PolicyGradient g = policy_gradient(env, pi, w);
        if (!g.ok) {
            ++report.skipped;
            break;
        }
        report.costs.push_back(g.cost);
        VecX x = pi.to_vector();
        opt.step(x, g.gradient);
        pi.set_vector(x);
    }
    return report;
}

double virtual_episode_cost(const SurrogateEnvironment& env, const PolicyWeights& pi, const ClosureWeights& w) {
    return -cumulative_reward(env.rollout(pi, w).record);
}

}  // namespace rtwin
