#include "rtwin/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace rtwin {

Adam::Adam(Eigen::Index size, Options opts) : opts_(opts), m_(VecX::Zero(size)), v_(VecX::Zero(size)) {
    if (!(opts.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

void Adam::step(Eigen::Ref<VecX> x, const Eigen::Ref<const VecX>& grad) {
    if (x.size() != m_.size() || grad.size() != m_.size()) {
        throw std::invalid_argument("optimizer size mismatch");
    }
    ++t_;
    m_ = opts_.beta1 * m_ + (1.0 - opts_.beta1) * grad;
    v_ = opts_.beta2 * v_ + (1.0 - opts_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    x.array() -= opts_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + opts_.eps);
}

void Adam::reset() {
    m_.setZero();
    v_.setZero();
    t_ = 0;
}

}  // namespace rtwin
