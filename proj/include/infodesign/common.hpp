#ifndef INFODESIGN_COMMON_HPP
#define INFODESIGN_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace infodesign {

using Image = Eigen::ArrayXXd;         // real 2-D field, indexed (row, col)
using ComplexField = Eigen::ArrayXXcd; // complex 2-D field, same indexing

// All failures carry a stable machine-parseable category so the CLI can
// prefix its one-line error reports.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& msg)
        : std::runtime_error(msg), category_(std::move(category)) {}
    const std::string& category() const { return category_; }

private:
    std::string category_;
};

struct SizingError : Error {
    explicit SizingError(const std::string& m) : Error("SIZE", m) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error("SHAPE", m) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& m) : Error("PARSE", m) {}
};
struct DomainError : Error {
    explicit DomainError(const std::string& m) : Error("DOMAIN", m) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& m) : Error("NUMERIC", m) {}
};
struct StateError : Error {
    explicit StateError(const std::string& m) : Error("STATE", m) {}
};
struct UnsupportedModelError : Error {
    explicit UnsupportedModelError(const std::string& m) : Error("UNSUPPORTED", m) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("CONFIG", m) {}
};
struct IoError : Error {
    explicit IoError(const std::string& m) : Error("IO", m) {}
};

inline constexpr double kLn2 = 0.6931471805599453094;
// log2(2*pi*e)
inline constexpr double kLog2TwoPiE = 4.0941911703612822;

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Summation with a fixed pairwise reduction tree, so results do not depend
// on chunking when batches are evaluated in parallel.
double pairwise_sum(const double* data, std::size_t n);
double pairwise_sum(const std::vector<double>& v);
inline double pairwise_mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

// Number of worker threads requested via INFODESIGN_THREADS (0 or unset means
// run everything on the calling thread).
int thread_count();

// Runs fn(i) for i in [0, n). Work is chunked deterministically; callers must
// write results into per-index slots, never shared accumulators.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace infodesign

#endif
