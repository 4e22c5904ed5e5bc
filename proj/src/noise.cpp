#include "infodesign/noise.hpp"

#include "infodesign/rng.hpp"

#include <cmath>

namespace infodesign::noise {

namespace {

void check_nonnegative(const Image& x) {
    if ((x < 0.0).any())
        throw DomainError("PoissonApprox noise requires a nonnegative intensity image");
}

} // namespace

void validate(const NoiseModel& model) {
    if (const auto* g = std::get_if<Gaussian>(&model)) {
        if (!(g->sigma > 0.0)) throw DomainError("Gaussian noise sigma must be positive");
        return;
    }
    const auto& p = std::get<PoissonApprox>(model);
    if (!(p.photon_scale > 0.0)) throw DomainError("photon_scale must be positive");
    if (!(p.floor > 0.0)) throw DomainError("PoissonApprox floor must be positive");
}

Image sample(const NoiseModel& model, const Image& x, std::uint64_t seed) {
    validate(model);
    CounterRng rng(seed);
    Image y(x.rows(), x.cols());
    if (const auto* g = std::get_if<Gaussian>(&model)) {
        for (Eigen::Index i = 0; i < x.size(); ++i)
            y.data()[i] = x.data()[i] + g->sigma * rng.normal(static_cast<std::uint64_t>(i));
        return y;
    }
    const auto& p = std::get<PoissonApprox>(model);
    check_nonnegative(x);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double sx = p.photon_scale * x.data()[i];
        y.data()[i] = sx + std::sqrt(sx + p.floor) * rng.normal(static_cast<std::uint64_t>(i));
    }
    return y;
}

Image sample_jacobian(const NoiseModel& model, const Image& x, std::uint64_t seed) {
    validate(model);
    if (std::holds_alternative<Gaussian>(model)) return Image::Ones(x.rows(), x.cols());
    const auto& p = std::get<PoissonApprox>(model);
    check_nonnegative(x);
    CounterRng rng(seed);
    Image j(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double sx = p.photon_scale * x.data()[i];
        double n = rng.normal(static_cast<std::uint64_t>(i));
        j.data()[i] = p.photon_scale + p.photon_scale * n / (2.0 * std::sqrt(sx + p.floor));
    }
    return j;
}

double conditional_entropy(const NoiseModel& model, const Image& x) {
    validate(model);
    if (const auto* g = std::get_if<Gaussian>(&model)) {
        double n = static_cast<double>(x.size());
        return 0.5 * n * (kLog2TwoPiE + 2.0 * std::log2(g->sigma));
    }
    const auto& p = std::get<PoissonApprox>(model);
    check_nonnegative(x);
    double h = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double var = p.photon_scale * x.data()[i] + p.floor;
        h += 0.5 * (kLog2TwoPiE + std::log2(var));
    }
    return h;
}

Image conditional_entropy_grad(const NoiseModel& model, const Image& x) {
    validate(model);
    if (std::holds_alternative<Gaussian>(model)) return Image::Zero(x.rows(), x.cols());
    const auto& p = std::get<PoissonApprox>(model);
    check_nonnegative(x);
    Image g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double var = p.photon_scale * x.data()[i] + p.floor;
        g.data()[i] = p.photon_scale / (2.0 * kLn2 * var);
    }
    return g;
}

} // namespace infodesign::noise
