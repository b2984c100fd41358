#ifndef QPC_FOURIER_HPP
#define QPC_FOURIER_HPP

#include <complex>
#include <vector>

namespace qpc {

using cdouble = std::complex<double>;

// Unscaled forward DFT: out[k] = sum_n in[n] exp(-2 pi i k n / M).
std::vector<cdouble> dft_forward(const std::vector<cdouble>& in);

// Inverse DFT with 1/M scaling, so dft_inverse(dft_forward(x)) == x.
std::vector<cdouble> dft_inverse(const std::vector<cdouble>& in);

// Linear convolution, out has size a.size()+b.size()-1.  Switches between
// the direct O(n^2) kernel and an FFT path depending on size.
std::vector<cdouble> convolve(const std::vector<cdouble>& a,
                              const std::vector<cdouble>& b);

std::vector<cdouble> convolve_direct(const std::vector<cdouble>& a,
                                     const std::vector<cdouble>& b);
std::vector<cdouble> convolve_fft(const std::vector<cdouble>& a,
                                  const std::vector<cdouble>& b);

}  // namespace qpc

#endif  // QPC_FOURIER_HPP
