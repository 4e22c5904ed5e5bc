#ifndef INFODESIGN_NOISE_HPP
#define INFODESIGN_NOISE_HPP

#include "infodesign/common.hpp"

#include <cstdint>
#include <variant>

namespace infodesign::noise {

// Additive sensor noise with fixed standard deviation (counts).
struct Gaussian {
    double sigma = 1.0;
};

// Gaussian surrogate for shot noise: y = s*x + sqrt(s*x + floor) * n, i.e.
// variance equals the mean photon count, floored to keep dark pixels finite.
struct PoissonApprox {
    double photon_scale = 1.0;
    double floor = 1e-3;
};

using NoiseModel = std::variant<Gaussian, PoissonApprox>;

void validate(const NoiseModel& model);

// Reparameterized draw: the randomness comes from a counter stream keyed by
// (seed, pixel index), so y is a deterministic, differentiable function of x
// once the seed is fixed.
Image sample(const NoiseModel& model, const Image& x, std::uint64_t seed);

// d y_i / d x_i under the same draws as sample(model, x, seed).
Image sample_jacobian(const NoiseModel& model, const Image& x, std::uint64_t seed);

// Analytic H(Y|X=x) in bits, summed over pixels.
double conditional_entropy(const NoiseModel& model, const Image& x);

// d H(Y|X=x) / d x_i in bits.
Image conditional_entropy_grad(const NoiseModel& model, const Image& x);

} // namespace infodesign::noise

#endif
