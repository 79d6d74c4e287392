#include "rtwin/mf_agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rtwin {

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("replay buffer capacity must be >= 1");
    items_.reserve(static_cast<std::size_t>(capacity));
}

void ReplayBuffer::push(Transition t) {
    t.tag = next_tag_++;
    if (size() < capacity_) {
        items_.push_back(t);
        return;
    }
    items_[head_] = t;
    head_ = (head_ + 1) % items_.size();
}

const Transition& ReplayBuffer::at(int i) const {
    if (i < 0 || i >= size()) throw std::out_of_range("replay buffer index");
    return items_[(head_ + static_cast<std::size_t>(i)) % items_.size()];
}

std::vector<Transition> ReplayBuffer::sample(int batch, Rng& rng) const {
    if (items_.empty()) throw std::logic_error("cannot sample an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<Transition> out;
    out.reserve(static_cast<std::size_t>(batch));
    for (int i = 0; i < batch; ++i) out.push_back(items_[pick(rng)]);
    return out;
}

struct CriticNet::Views {
    Eigen::Map<const MatX> w1;
    Eigen::Map<const VecX> b1;
    Eigen::Map<const MatX> w2;
    Eigen::Map<const VecX> b2;
    Eigen::Map<const Eigen::RowVectorXd> w3;
    double b3;
};

CriticNet::CriticNet(int hidden) : hidden_(hidden) {
    if (hidden < 1) throw std::invalid_argument("critic hidden width must be >= 1");
    const Eigen::Index h = hidden;
    params_ = VecX::Zero(h * kInput + h + h * h + h + h + 1);
}

CriticNet::Views CriticNet::views() const {
    const Eigen::Index h = hidden_;
    const double* p = params_.data();
    const double* w1 = p;
    const double* b1 = w1 + h * kInput;
    const double* w2 = b1 + h;
    const double* b2 = w2 + h * h;
    const double* w3 = b2 + h;
    const double* b3 = w3 + h;
    return {Eigen::Map<const MatX>(w1, h, kInput), Eigen::Map<const VecX>(b1, h), Eigen::Map<const MatX>(w2, h, h),
            Eigen::Map<const VecX>(b2, h), Eigen::Map<const Eigen::RowVectorXd>(w3, h), *b3};
}

void CriticNet::initialize(Rng& rng) {
    const Eigen::Index h = hidden_;
    auto fill = [&](Eigen::Index offset, Eigen::Index count, double bound) {
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index i = 0; i < count; ++i) params_[offset + i] = u(rng);
    };
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(kInput));
    const double hid_bound = 1.0 / std::sqrt(static_cast<double>(h));
    Eigen::Index o = 0;
    fill(o, h * kInput, in_bound);
    o += h * kInput;
    fill(o, h, in_bound);
    o += h;
    fill(o, h * h, hid_bound);
    o += h * h;
    fill(o, h, hid_bound);
    o += h;
    fill(o, h + 1, 3e-3);
}

Eigen::RowVectorXd CriticNet::forward(const MatX& x, Cache* cache) const {
    const Views v = views();
    MatX z1 = (v.w1 * x).colwise() + v.b1;
    MatX h1 = z1.cwiseMax(0.0);
    MatX z2 = (v.w2 * h1).colwise() + v.b2;
    MatX h2 = z2.cwiseMax(0.0);
    Eigen::RowVectorXd q = (v.w3 * h2).array() + v.b3;
    if (cache != nullptr) {
        cache->x = x;
        cache->z1 = std::move(z1);
        cache->h1 = std::move(h1);
        cache->z2 = std::move(z2);
        cache->h2 = std::move(h2);
        cache->q = q;
    }
    return q;
}

double CriticNet::forward(const Eigen::Matrix<double, kInput, 1>& x) const {
    return forward(MatX(x), nullptr)[0];
}

VecX CriticNet::backward(const Cache& c, const Eigen::RowVectorXd& dq, MatX* dx) const {
    const Views v = views();
    const Eigen::Index h = hidden_;
    VecX g(params_.size());
    double* p = g.data();
    Eigen::Map<MatX> gw1(p, h, kInput);
    Eigen::Map<VecX> gb1(p + h * kInput, h);
    Eigen::Map<MatX> gw2(p + h * kInput + h, h, h);
    Eigen::Map<VecX> gb2(p + h * kInput + h + h * h, h);
    Eigen::Map<Eigen::RowVectorXd> gw3(p + h * kInput + 2 * h + h * h, h);
    double& gb3 = p[h * kInput + 3 * h + h * h];

    gw3 = dq * c.h2.transpose();
    gb3 = dq.sum();
    const MatX dz2 = (v.w3.transpose() * dq).cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
    gw2 = dz2 * c.h1.transpose();
    gb2 = dz2.rowwise().sum();
    const MatX dz1 = (v.w2.transpose() * dz2).cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
    gw1 = dz1 * c.x.transpose();
    gb1 = dz1.rowwise().sum();
    if (dx != nullptr) *dx = v.w1.transpose() * dz1;
    return g;
}

void DdpgConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    if (!(zeta > 0.0 && zeta < 1.0)) throw std::invalid_argument("zeta must lie in (0, 1)");
    if (batch < 1 || n_q < 0 || n_a < 0) throw std::invalid_argument("invalid DDPG batch or update counts");
    if (!(error_scale.array() > 0.0).all()) throw std::invalid_argument("error scales must be positive");
}

Action exploration_std(int episode, int total, const DdpgConfig& cfg, const ActionBounds& bounds) {
    const double f = total > 1 ? std::clamp(static_cast<double>(episode) / (total - 1), 0.0, 1.0) : 1.0;
    return (cfg.noise_start + f * (cfg.noise_end - cfg.noise_start)) * bounds.range();
}

Action explore(const Action& a, const Action& std_dev, const ActionBounds& bounds, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Action out = a;
    for (int c = 0; c < 3; ++c) out[c] += std_dev[c] * normal(rng);
    return bounds.clamp(out);
}

DdpgAgent::DdpgAgent(DdpgConfig cfg, PolicyWeights policy, std::uint64_t seed)
    : cfg_(cfg),
      policy_(std::move(policy)),
      critic_(cfg.hidden),
      target_(cfg.hidden),
      buffer_(cfg.buffer_capacity),
      batch_rng_(make_stream(seed, Stream::BatchSampling)) {
    cfg_.validate();
    Rng init = make_stream(seed, Stream::NetworkInit);
    critic_.initialize(init);
    target_ = critic_;
    critic_opt_ = Adam(critic_.param_count(), {.lr = cfg_.critic_lr});
    actor_opt_ = Adam(PolicyWeights::kParamCount, {.lr = cfg_.actor_lr});
}

Eigen::Matrix<double, CriticNet::kInput, 1> DdpgAgent::critic_input(const State& e, const Action& a) const {
    Eigen::Matrix<double, CriticNet::kInput, 1> x;
    x.head<6>() = e.cwiseQuotient(cfg_.error_scale);
    const ActionBounds& b = policy_.bounds;
    x.tail<3>() = (2.0 * (a - b.lo).cwiseQuotient(b.range())).array() - 1.0;
    return x;
}

double DdpgAgent::q_value(const State& e, const Action& a) const { return critic_.forward(critic_input(e, a)); }

double DdpgAgent::critic_update(const std::vector<Transition>& batch) {
    if (batch.empty()) throw std::invalid_argument("critic update needs a non-empty batch");
    const auto n = static_cast<Eigen::Index>(batch.size());
    MatX x(CriticNet::kInput, n);
    MatX xn(CriticNet::kInput, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Transition& t = batch[static_cast<std::size_t>(j)];
        x.col(j) = critic_input(t.error, t.action);
        xn.col(j) = critic_input(t.next_error, pd_policy(t.next_error, policy_));
    }
    const Eigen::RowVectorXd q_next = target_.forward(xn);
    Eigen::RowVectorXd y(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Transition& t = batch[static_cast<std::size_t>(j)];
        y[j] = t.reward + (t.done ? 0.0 : cfg_.gamma * q_next[j]);
    }
    CriticNet::Cache cache;
    const Eigen::RowVectorXd q = critic_.forward(x, &cache);
    const Eigen::RowVectorXd diff = q - y;
    const double loss = diff.squaredNorm() / static_cast<double>(n);
    last_q_mean_ = q.mean();
    const VecX grad = critic_.backward(cache, (2.0 / static_cast<double>(n)) * diff);
    critic_opt_.step(critic_.params(), grad);
    return loss;
}

PolicyWeights::Vector DdpgAgent::actor_gradient(const std::vector<Transition>& batch) const {
    const auto n = static_cast<Eigen::Index>(batch.size());
    MatX x(CriticNet::kInput, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const State& e = batch[static_cast<std::size_t>(j)].error;
        x.col(j) = critic_input(e, pd_policy(e, policy_));
    }
    CriticNet::Cache cache;
    critic_.forward(x, &cache);
    MatX dx;
    critic_.backward(cache, Eigen::RowVectorXd::Ones(n), &dx);

    // Chain through the action normalisation and the policy.
    const Action da_scale = 2.0 * policy_.bounds.range().cwiseInverse();
    PolicyWeights::Vector g = PolicyWeights::Vector::Zero();
    for (Eigen::Index j = 0; j < n; ++j) {
        const State& e = batch[static_cast<std::size_t>(j)].error;
        const Action dq_da = dx.col(j).tail<3>().cwiseProduct(da_scale);
        g += policy_jacobians(e, policy_).d_weights.transpose() * dq_da;
    }
    return g.cwiseProduct(policy_.trainable_mask()) / static_cast<double>(n);
}

void DdpgAgent::actor_update(const std::vector<Transition>& batch) {
    const VecX ascent = actor_gradient(batch);
    VecX w = policy_.to_vector();
    actor_opt_.step(w, -ascent);
    policy_.set_vector(w);
}

void DdpgAgent::soft_update() {
    target_.params() = cfg_.zeta * critic_.params() + (1.0 - cfg_.zeta) * target_.params();
}

DdpgStats DdpgAgent::train() {
    DdpgStats stats;
    if (buffer_.size() < cfg_.batch) return stats;
    const int rounds = std::max(cfg_.n_q, cfg_.n_a);
    double q_sum = 0.0;
    int q_count = 0;
    for (int i = 0; i < rounds; ++i) {
        const std::vector<Transition> batch = buffer_.sample(cfg_.batch, batch_rng_);
        if (i < cfg_.n_q) {
            stats.critic_loss = critic_update(batch);
            ++stats.critic_updates;
            q_sum += last_q_mean_;
            ++q_count;
        }
        if (i < cfg_.n_a) {
            actor_update(batch);
            ++stats.actor_updates;
        }
        soft_update();
    }
    stats.q_mean = q_count > 0 ? q_sum / q_count : 0.0;
    return stats;
}

}  // namespace rtwin
