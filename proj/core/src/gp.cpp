#include "rtwin/gp.hpp"

#include <cmath>
#include <stdexcept>

namespace rtwin {

void GpConfig::validate() const {
    if (!(length_scale > 0.0)) throw std::invalid_argument("GP length scale must be positive");
    if (!(sigma_fraction >= 0.0)) throw std::invalid_argument("GP sigma fraction must be non-negative");
}

GpActionSampler::GpActionSampler(int cycles, GpConfig cfg, ActionBounds bounds)
    : cycles_(cycles), cfg_(cfg), bounds_(bounds) {
    if (cycles < 1) throw std::invalid_argument("GP schedule needs at least one cycle");
    cfg_.validate();
    bounds_.validate();
    MatX k(cycles, cycles);
    for (int i = 0; i < cycles; ++i) {
        for (int j = 0; j < cycles; ++j) {
            const double d = (i - j) / cfg_.length_scale;
            k(i, j) = std::exp(-d * d);
        }
    }
    // The squared-exponential kernel is numerically rank deficient, so the
    // square root comes from the eigen decomposition with clamped spectrum.
    Eigen::SelfAdjointEigenSolver<MatX> eig(k);
    const VecX root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    factor_ = eig.eigenvectors() * root.asDiagonal();
}

MatX GpActionSampler::draw_standard(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    MatX z(cycles_, 3);
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < cycles_; ++i) z(i, c) = normal(rng);
    }
    return factor_ * z;
}

std::vector<Action> GpActionSampler::sample(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Action mean;
    for (int c = 0; c < 3; ++c) mean[c] = bounds_.lo[c] + unit(rng) * bounds_.range()[c];
    const MatX x = draw_standard(rng);
    const Action sigma = cfg_.sigma_fraction * bounds_.range();

    std::vector<Action> out(static_cast<std::size_t>(cycles_));
    for (int i = 0; i < cycles_; ++i) {
        const Action a = mean + sigma.cwiseProduct(x.row(i).transpose());
        out[static_cast<std::size_t>(i)] = bounds_.clamp(a);
    }
    return out;
}

}  // namespace rtwin
