#include "infodesign/rng.hpp"

#include <cmath>
#include <numbers>

namespace infodesign {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
    // FNV-1a over the label, folded into the seed through the mixer.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(mix64(seed ^ h) + index);
}

namespace {

double box_muller(double u1, double u2) {
    // u1 in (0, 1]: shift away from 0 so log() stays finite.
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace

double CounterRng::normal(std::uint64_t i) const {
    return box_muller(uniform(2 * i), uniform(2 * i + 1));
}

double SeqRng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace infodesign
