#include "qpc/fourier.hpp"

#include <unsupported/Eigen/FFT>

namespace qpc {

namespace {

// kissfft (via Eigen) handles arbitrary sizes; power-of-two padding keeps the
// plans on the fast path and the results deterministic across calls.
std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

namespace {
// Eigen's FFT object caches plans per size; keep one per thread.
Eigen::FFT<double>& fft_instance() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}
}  // namespace

std::vector<cdouble> dft_forward(const std::vector<cdouble>& in) {
  std::vector<cdouble> out;
  fft_instance().fwd(out, in);
  return out;
}

std::vector<cdouble> dft_inverse(const std::vector<cdouble>& in) {
  std::vector<cdouble> out;
  fft_instance().inv(out, in);
  return out;
}

std::vector<cdouble> convolve_direct(const std::vector<cdouble>& a,
                                     const std::vector<cdouble>& b) {
  std::vector<cdouble> out(a.size() + b.size() - 1, cdouble(0.0, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const cdouble ai = a[i];
    if (ai == cdouble(0.0, 0.0)) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += ai * b[j];
  }
  return out;
}

std::vector<cdouble> convolve_fft(const std::vector<cdouble>& a,
                                  const std::vector<cdouble>& b) {
  const std::size_t n = a.size() + b.size() - 1;
  const std::size_t m = next_pow2(n);
  std::vector<cdouble> fa(m, cdouble(0.0, 0.0));
  std::vector<cdouble> fb(m, cdouble(0.0, 0.0));
  std::copy(a.begin(), a.end(), fa.begin());
  std::copy(b.begin(), b.end(), fb.begin());
  fa = dft_forward(fa);
  fb = dft_forward(fb);
  for (std::size_t i = 0; i < m; ++i) fa[i] *= fb[i];
  fa = dft_inverse(fa);
  fa.resize(n);
  return fa;
}

std::vector<cdouble> convolve(const std::vector<cdouble>& a,
                              const std::vector<cdouble>& b) {
  if (a.empty() || b.empty()) return {};
  // Direct is faster until the product of sizes is large.
  if (a.size() * b.size() <= 64 * 64) return convolve_direct(a, b);
  return convolve_fft(a, b);
}

}  // namespace qpc
