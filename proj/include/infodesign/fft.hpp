#ifndef INFODESIGN_FFT_HPP
#define INFODESIGN_FFT_HPP

#include "infodesign/common.hpp"

namespace infodesign {

// Unnormalized forward 2-D DFT / normalized (1/N) inverse. Backed by FFTW
// with cached plans; safe to call from multiple threads.
ComplexField fft2(const ComplexField& in);
ComplexField ifft2(const ComplexField& in);

ComplexField fft2(const Image& in);

// Signed integer frequency index for bin i of an N-point DFT.
inline int freq_index(int i, int n) { return i <= n / 2 ? i : i - n; }

// Circular convolution of two real arrays of identical shape.
Image circular_convolve(const Image& a, const Image& b);
// Circular cross-correlation: out[n] = sum_m a[m] * b[m - n], the adjoint of
// convolution by b.
Image circular_correlate(const Image& a, const Image& b);

} // namespace infodesign

#endif
