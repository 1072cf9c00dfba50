#include "ppt/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

namespace ppt::fft {
namespace {

// FFTW planning is not thread-safe, and planning cost is noticeable for the
// large transform sizes used by the harmonic-summation search. Plans are
// created once per (direction, size) against scratch buffers and reused via
// the new-array execute interface; fftw_malloc keeps alignment uniform so
// the cached plans stay valid for fresh buffers.
std::mutex planner_mutex;

struct PlanEntry {
    fftw_plan plan = nullptr;
};

fftw_plan r2c_plan(std::size_t n) {
    static std::unordered_map<std::size_t, PlanEntry> cache;
    std::lock_guard<std::mutex> lock(planner_mutex);
    auto& e = cache[n];
    if (!e.plan) {
        double* in = fftw_alloc_real(n);
        fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
        std::memset(in, 0, n * sizeof(double));
        e.plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
        if (!e.plan) throw std::runtime_error("fftw r2c planning failed");
    }
    return e.plan;
}

fftw_plan c2r_plan(std::size_t n) {
    static std::unordered_map<std::size_t, PlanEntry> cache;
    std::lock_guard<std::mutex> lock(planner_mutex);
    auto& e = cache[n];
    if (!e.plan) {
        fftw_complex* in = fftw_alloc_complex(n / 2 + 1);
        double* out = fftw_alloc_real(n);
        std::memset(in, 0, (n / 2 + 1) * sizeof(fftw_complex));
        e.plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
        if (!e.plan) throw std::runtime_error("fftw c2r planning failed");
    }
    return e.plan;
}

struct RealBuf {
    double* p;
    explicit RealBuf(std::size_t n) : p(fftw_alloc_real(n)) {}
    ~RealBuf() { fftw_free(p); }
    RealBuf(const RealBuf&) = delete;
    RealBuf& operator=(const RealBuf&) = delete;
};

struct ComplexBuf {
    fftw_complex* p;
    explicit ComplexBuf(std::size_t n) : p(fftw_alloc_complex(n)) {}
    ~ComplexBuf() { fftw_free(p); }
    ComplexBuf(const ComplexBuf&) = delete;
    ComplexBuf& operator=(const ComplexBuf&) = delete;
};

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

std::vector<std::complex<double>> rfft(const std::vector<double>& x, std::size_t nfft) {
    if (nfft == 0 || x.size() > nfft) throw std::invalid_argument("rfft: bad nfft");
    RealBuf in(nfft);
    ComplexBuf out(nfft / 2 + 1);
    std::memcpy(in.p, x.data(), x.size() * sizeof(double));
    std::memset(in.p + x.size(), 0, (nfft - x.size()) * sizeof(double));
    fftw_execute_dft_r2c(r2c_plan(nfft), in.p, out.p);
    std::vector<std::complex<double>> spec(nfft / 2 + 1);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = {out.p[i][0], out.p[i][1]};
    return spec;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& spec, std::size_t nfft) {
    if (nfft == 0 || spec.size() != nfft / 2 + 1)
        throw std::invalid_argument("irfft: spectrum size does not match nfft");
    ComplexBuf in(spec.size());
    RealBuf out(nfft);
    std::memcpy(in.p, spec.data(), spec.size() * sizeof(fftw_complex));
    fftw_execute_dft_c2r(c2r_plan(nfft), in.p, out.p);
    std::vector<double> y(nfft);
    const double scale = 1.0 / static_cast<double>(nfft);
    for (std::size_t i = 0; i < nfft; ++i) y[i] = out.p[i] * scale;
    return y;
}

std::vector<double> correlate(const std::vector<double>& x, const std::vector<double>& tpl) {
    if (tpl.empty() || tpl.size() > x.size())
        throw std::invalid_argument("correlate: template longer than signal");
    const std::size_t n = x.size(), m = tpl.size();
    const std::size_t nfft = next_pow2(n + m);
    auto X = rfft(x, nfft);
    auto S = rfft(tpl, nfft);
    for (std::size_t i = 0; i < X.size(); ++i) X[i] *= std::conj(S[i]);
    auto c = irfft(X, nfft);
    c.resize(n - m + 1);
    return c;
}

std::vector<double> power_spectrum(const std::vector<double>& x, std::size_t nfft) {
    auto spec = rfft(x, nfft);
    std::vector<double> p(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) p[i] = std::norm(spec[i]);
    return p;
}

}  // namespace ppt::fft
