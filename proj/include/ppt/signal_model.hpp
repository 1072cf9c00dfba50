#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace ppt {

enum class PulseKind { gaussian, tabulated };

// A single pulse with finite support [0, Tp), sampled at interval Ts.
// samples[n] = s(n*Ts) and deriv_samples[n] = ds/dt(n*Ts); both are zero
// outside the support. Gaussian pulses keep their analytic form so they can
// be evaluated at arbitrary (off-grid) instants; tabulated pulses are
// linearly interpolated.
struct PulseShape {
    std::vector<double> samples;
    std::vector<double> deriv_samples;
    double Tp = 0.0;
    double Ts = 1.0;
    PulseKind kind = PulseKind::tabulated;

    int length() const { return static_cast<int>(samples.size()); }
    double peak() const;
    double value_at(double t) const;
    double deriv_at(double t) const;
};

// Unit-peak Gaussian pulse centred at Tp/2 with sigma = Tp/6, truncated to
// zero beyond three sigma from the centre (i.e. outside [0, Tp]).
PulseShape make_gaussian_pulse(double Tp, double Ts);

// Tabulated pulse; derivative samples are computed by central differences on
// the linear interpolant (step Ts/100) unless supplied explicitly.
PulseShape make_tabulated_pulse(std::vector<double> samples, double Tp, double Ts);
PulseShape make_tabulated_pulse(std::vector<double> samples, std::vector<double> deriv,
                                double Tp, double Ts);

// Same pulse re-sampled at a new interval (analytic re-evaluation for
// Gaussian pulses, interpolation otherwise).
PulseShape resample_pulse(const PulseShape& p, double new_Ts);

struct PulseTrainParams {
    double T = 0.0;     // repetition period
    double tau0 = 0.0;  // delay of the first pulse, in [0, T)
    double A = 1.0;     // amplitude scale
};

// Throws std::invalid_argument unless T > 0, 0 <= tau0 < T and Tp <= T.
void validate_params(const PulseTrainParams& p, const PulseShape& pulse);

struct Measurement {
    std::vector<double> x;
    double Ts = 1.0;
    double sigma2 = 0.0;
    std::uint64_t seed = 0;
    std::optional<PulseTrainParams> truth;
};

// Noise-free train sum_k A * s(n*Ts - k*T - tau0) over n = 0..N-1. Pulses
// clipped by either window edge contribute their in-window samples.
std::vector<double> synthesize(const PulseTrainParams& p, const PulseShape& pulse,
                               int N, double Ts);

// Adds i.i.d. zero-mean Gaussian noise of variance sigma2. Deterministic:
// identical (clean, sigma2, seed) give bit-identical output.
Measurement add_noise(const std::vector<double>& clean, double Ts, double sigma2,
                      std::uint64_t seed, std::optional<PulseTrainParams> truth = {});

// Noise variance realizing a peak-amplitude SNR: (A*peak)^2 / 10^(snr_db/10).
double sigma2_for_snr(const PulseShape& pulse, double A, double snr_db);

// Band-limited upsampling by an integer factor via frequency-domain
// zero-padding (split Nyquist bin, amplitude preserved). P_R = 1 returns the
// input unchanged. The input is treated as one period of a circular signal.
std::vector<double> resample(const std::vector<double>& x, int P_R);

// Mean squared error of rounding a uniformly distributed quantity to a grid
// of pitch Ts/P_R.
inline double quantization_floor(double Ts, int P_R) {
    double step = Ts / static_cast<double>(P_R);
    return step * step / 12.0;
}

}  // namespace ppt
