#include "infodesign/fft.hpp"

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>

namespace infodesign {

namespace {

// FFTW planner is not thread-safe; executing a cached plan on fresh buffers is.
std::mutex g_plan_mutex;

struct PlanSlot {
    fftw_plan plan = nullptr;
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
};

PlanSlot& plan_for(int rows, int cols, int sign) {
    static std::map<std::tuple<int, int, int>, PlanSlot> cache;
    auto key = std::make_tuple(rows, cols, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    PlanSlot slot;
    slot.in = fftw_alloc_complex(static_cast<std::size_t>(rows) * cols);
    slot.out = fftw_alloc_complex(static_cast<std::size_t>(rows) * cols);
    slot.plan = fftw_plan_dft_2d(rows, cols, slot.in, slot.out, sign, FFTW_ESTIMATE);
    if (!slot.plan) throw NumericalError("fftw plan creation failed");
    return cache.emplace(key, slot).first->second;
}

ComplexField transform(const ComplexField& in, int sign) {
    const int rows = static_cast<int>(in.rows());
    const int cols = static_cast<int>(in.cols());
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    PlanSlot& slot = plan_for(rows, cols, sign);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            slot.in[static_cast<std::size_t>(r) * cols + c][0] = in(r, c).real();
            slot.in[static_cast<std::size_t>(r) * cols + c][1] = in(r, c).imag();
        }
    fftw_execute(slot.plan);
    ComplexField out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out(r, c) = std::complex<double>(slot.out[static_cast<std::size_t>(r) * cols + c][0],
                                             slot.out[static_cast<std::size_t>(r) * cols + c][1]);
    return out;
}

} // namespace

ComplexField fft2(const ComplexField& in) { return transform(in, FFTW_FORWARD); }

ComplexField ifft2(const ComplexField& in) {
    ComplexField out = transform(in, FFTW_BACKWARD);
    out /= static_cast<double>(in.size());
    return out;
}

ComplexField fft2(const Image& in) {
    return fft2(in.cast<std::complex<double>>().eval());
}

Image circular_convolve(const Image& a, const Image& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("circular_convolve: operands must share a grid");
    return ifft2((fft2(a) * fft2(b)).eval()).real();
}

Image circular_correlate(const Image& a, const Image& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("circular_correlate: operands must share a grid");
    return ifft2((fft2(a) * fft2(b).conjugate()).eval()).real();
}

} // namespace infodesign
