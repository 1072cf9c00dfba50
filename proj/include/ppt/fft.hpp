#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace ppt::fft {

// Real-input transforms backed by FFTW3. Plans are cached per size and
// created under a lock (the FFTW planner is not thread-safe); execution is
// safe to run concurrently from multiple threads.

// Forward transform of x zero-padded to nfft samples; returns bins 0..nfft/2.
std::vector<std::complex<double>> rfft(const std::vector<double>& x, std::size_t nfft);

// Inverse of rfft, normalized so that irfft(rfft(x, n), n) == x.
std::vector<double> irfft(const std::vector<std::complex<double>>& spec, std::size_t nfft);

// Sliding-dot-product correlation c[m] = sum_j x[m+j] * tpl[j],
// m = 0 .. x.size() - tpl.size(), computed via FFT.
std::vector<double> correlate(const std::vector<double>& x, const std::vector<double>& tpl);

// Squared-magnitude spectrum |X[b]|^2, b = 0..nfft/2, of x zero-padded to nfft.
std::vector<double> power_spectrum(const std::vector<double>& x, std::size_t nfft);

}  // namespace ppt::fft
