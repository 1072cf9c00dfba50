#include "ppt/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ppt/fft.hpp"

namespace ppt {
namespace {

struct GaussParams {
    double centre;
    double sigma;
};

GaussParams gauss_params(double Tp) { return {Tp / 2.0, Tp / 6.0}; }

double gauss_value(double t, double Tp) {
    // support is half-open, [0, Tp), like the sampled representation
    if (t < 0.0 || t >= Tp) return 0.0;
    auto [c, sg] = gauss_params(Tp);
    const double d = t - c;
    if (std::abs(d) > 3.0 * sg) return 0.0;
    return std::exp(-d * d / (2.0 * sg * sg));
}

double gauss_deriv(double t, double Tp) {
    if (t < 0.0 || t >= Tp) return 0.0;
    auto [c, sg] = gauss_params(Tp);
    const double d = t - c;
    if (std::abs(d) > 3.0 * sg) return 0.0;
    return -d / (sg * sg) * std::exp(-d * d / (2.0 * sg * sg));
}

double interp_tabulated(const std::vector<double>& v, double Ts, double t) {
    // Linear interpolation with implicit zeros outside the sample range;
    // the pulse is causal, so nothing before t = 0.
    if (t < 0.0) return 0.0;
    const double pos = t / Ts;
    const auto i = static_cast<long long>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    auto at = [&](long long j) -> double {
        if (j < 0 || j >= static_cast<long long>(v.size())) return 0.0;
        return v[static_cast<std::size_t>(j)];
    };
    return at(i) * (1.0 - frac) + at(i + 1) * frac;
}

}  // namespace

double PulseShape::peak() const {
    double p = 0.0;
    for (double v : samples) p = std::max(p, std::abs(v));
    return p;
}

double PulseShape::value_at(double t) const {
    if (kind == PulseKind::gaussian) return gauss_value(t, Tp);
    if (t < 0.0 || t >= Tp) return 0.0;
    return interp_tabulated(samples, Ts, t);
}

double PulseShape::deriv_at(double t) const {
    if (kind == PulseKind::gaussian) return gauss_deriv(t, Tp);
    if (t < 0.0 || t >= Tp) return 0.0;
    const double h = Ts / 100.0;
    return (interp_tabulated(samples, Ts, t + h) - interp_tabulated(samples, Ts, t - h)) /
           (2.0 * h);
}

PulseShape make_gaussian_pulse(double Tp, double Ts) {
    if (!(Tp > 0.0) || !(Ts > 0.0)) throw std::invalid_argument("pulse: Tp and Ts must be positive");
    const int Np = static_cast<int>(std::ceil(Tp / Ts));
    PulseShape p;
    p.Tp = Tp;
    p.Ts = Ts;
    p.kind = PulseKind::gaussian;
    p.samples.resize(Np);
    p.deriv_samples.resize(Np);
    for (int n = 0; n < Np; ++n) {
        const double t = n * Ts;
        p.samples[n] = gauss_value(t, Tp);
        p.deriv_samples[n] = gauss_deriv(t, Tp);
    }
    return p;
}

PulseShape make_tabulated_pulse(std::vector<double> samples, double Tp, double Ts) {
    if (!(Tp > 0.0) || !(Ts > 0.0)) throw std::invalid_argument("pulse: Tp and Ts must be positive");
    if (samples.size() != static_cast<std::size_t>(std::ceil(Tp / Ts)))
        throw std::invalid_argument("pulse: sample count must be ceil(Tp/Ts)");
    PulseShape p;
    p.Tp = Tp;
    p.Ts = Ts;
    p.kind = PulseKind::tabulated;
    p.samples = std::move(samples);
    p.deriv_samples.resize(p.samples.size());
    for (std::size_t n = 0; n < p.samples.size(); ++n)
        p.deriv_samples[n] = p.deriv_at(static_cast<double>(n) * Ts);
    return p;
}

PulseShape make_tabulated_pulse(std::vector<double> samples, std::vector<double> deriv,
                                double Tp, double Ts) {
    if (samples.size() != deriv.size())
        throw std::invalid_argument("pulse: derivative length mismatch");
    PulseShape p = make_tabulated_pulse(std::move(samples), Tp, Ts);
    p.deriv_samples = std::move(deriv);
    return p;
}

PulseShape resample_pulse(const PulseShape& p, double new_Ts) {
    if (!(new_Ts > 0.0)) throw std::invalid_argument("pulse: new_Ts must be positive");
    if (p.kind == PulseKind::gaussian) return make_gaussian_pulse(p.Tp, new_Ts);
    const int Np = static_cast<int>(std::ceil(p.Tp / new_Ts));
    PulseShape q;
    q.Tp = p.Tp;
    q.Ts = new_Ts;
    q.kind = PulseKind::tabulated;
    q.samples.resize(Np);
    q.deriv_samples.resize(Np);
    for (int n = 0; n < Np; ++n) {
        const double t = n * new_Ts;
        q.samples[n] = p.value_at(t);
        q.deriv_samples[n] = p.deriv_at(t);
    }
    return q;
}

void validate_params(const PulseTrainParams& p, const PulseShape& pulse) {
    if (!(p.T > 0.0)) throw std::invalid_argument("params: T must be positive");
    if (!(p.tau0 >= 0.0) || !(p.tau0 < p.T))
        throw std::invalid_argument("params: tau0 must lie in [0, T)");
    if (pulse.Tp > p.T) throw std::invalid_argument("params: pulse support exceeds period");
}

std::vector<double> synthesize(const PulseTrainParams& p, const PulseShape& pulse,
                               int N, double Ts) {
    validate_params(p, pulse);
    if (N < 0 || !(Ts > 0.0)) throw std::invalid_argument("synthesize: bad N or Ts");
    std::vector<double> x(static_cast<std::size_t>(N), 0.0);
    for (int n = 0; n < N; ++n) {
        // At most one repetition covers each instant (Tp <= T); u is the
        // offset into that repetition, handling pulses clipped at n = 0.
        const double t = n * Ts - p.tau0;
        double u = std::fmod(t, p.T);
        if (u < 0.0) u += p.T;
        if (u < pulse.Tp) x[n] = p.A * pulse.value_at(u);
    }
    return x;
}

Measurement add_noise(const std::vector<double>& clean, double Ts, double sigma2,
                      std::uint64_t seed, std::optional<PulseTrainParams> truth) {
    if (sigma2 < 0.0) throw std::invalid_argument("add_noise: sigma2 must be >= 0");
    Measurement m;
    m.x = clean;
    m.Ts = Ts;
    m.sigma2 = sigma2;
    m.seed = seed;
    m.truth = truth;
    if (sigma2 > 0.0) {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> dist(0.0, std::sqrt(sigma2));
        for (double& v : m.x) v += dist(gen);
    }
    return m;
}

double sigma2_for_snr(const PulseShape& pulse, double A, double snr_db) {
    const double p = A * pulse.peak();
    if (p == 0.0) throw std::invalid_argument("sigma2_for_snr: zero peak");
    return p * p / std::pow(10.0, snr_db / 10.0);
}

std::vector<double> resample(const std::vector<double>& x, int P_R) {
    if (P_R < 1) throw std::invalid_argument("resample: P_R must be >= 1");
    if (P_R == 1) return x;
    const std::size_t N = x.size();
    if (N == 0) return {};
    const std::size_t M = N * static_cast<std::size_t>(P_R);
    auto X = fft::rfft(x, N);
    std::vector<std::complex<double>> Y(M / 2 + 1, 0.0);
    if (N % 2 == 0) {
        for (std::size_t b = 0; b < N / 2; ++b) Y[b] = X[b];
        Y[N / 2] = 0.5 * X[N / 2];  // split the Nyquist bin across +/- frequencies
    } else {
        for (std::size_t b = 0; b <= N / 2; ++b) Y[b] = X[b];
    }
    auto y = fft::irfft(Y, M);
    const double scale = static_cast<double>(P_R);
    for (double& v : y) v *= scale;
    return y;
}

}  // namespace ppt
