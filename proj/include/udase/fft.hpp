// Iterative radix-2 complex FFT, power-of-two sizes only.

#ifndef UDASE_FFT_HPP
#define UDASE_FFT_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace udase {

std::size_t next_pow2(std::size_t n);

// In-place transform; inverse includes the 1/N scaling.
void fft(std::vector<std::complex<double>>& a, bool inverse);

}  // namespace udase

#endif  // UDASE_FFT_HPP
