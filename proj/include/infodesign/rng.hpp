#ifndef INFODESIGN_RNG_HPP
#define INFODESIGN_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace infodesign {

// splitmix64 finalizer; the basis for all randomness in the project.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Labeled sub-seed derivation: one top-level seed reproduces a whole
// experiment, each consumer gets an independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

// Counter-based stream: draw i depends only on (key, i), so evaluation order
// and parallel chunking cannot change the values.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t bits(std::uint64_t i) const {
        return mix64(key_ ^ (i * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    }
    // uniform in [0, 1)
    double uniform(std::uint64_t i) const {
        return static_cast<double>(bits(i) >> 11) * 0x1.0p-53;
    }
    // standard normal via Box-Muller on counters (2i, 2i+1)
    double normal(std::uint64_t i) const;

private:
    std::uint64_t key_;
};

// Small sequential generator for shuffles and ad-hoc draws.
class SeqRng {
public:
    explicit SeqRng(std::uint64_t seed) : state_(mix64(seed)) {}

    std::uint64_t next() {
        state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
        return mix64(state_);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double normal();
    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace infodesign

#endif
