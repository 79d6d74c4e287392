#pragma once

#include "rtwin/types.hpp"

namespace rtwin {

/// First-order moment-adaptive descent on a flat parameter vector.
class Adam {
public:
    struct Options {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam() = default;
    Adam(Eigen::Index size, Options opts);

    /// x <- x - lr * m_hat / (sqrt(v_hat) + eps). Minimises.
    void step(Eigen::Ref<VecX> x, const Eigen::Ref<const VecX>& grad);
    void reset();

    double learning_rate() const { return opts_.lr; }
    void set_learning_rate(double lr) { opts_.lr = lr; }
    long long steps() const { return t_; }
    Eigen::Index size() const { return m_.size(); }

private:
    Options opts_;
    VecX m_;
    VecX v_;
    long long t_ = 0;
};

}  // namespace rtwin
