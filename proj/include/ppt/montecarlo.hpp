#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppt/estimators.hpp"
#include "ppt/signal_model.hpp"

namespace ppt {

// How an SNR value in dB maps to a noise variance for the benchmark:
//   peak:          sigma2 = (A * s_peak)^2 / 10^(snr/10)
//   average_power: sigma2 = A^2 * E * Ts / T_mid / 10^(snr/10)
// with E the pulse energy and T_mid the middle of the period prior. The
// convention is recorded in every output so curves can be re-based.
enum class SnrConvention { peak, average_power };

const char* snr_convention_name(SnrConvention c);
std::optional<SnrConvention> snr_convention_from_name(std::string_view name);

struct ExperimentConfig {
    int N = 4096;
    double T_low = 475.0;
    double T_high = 525.0;
    double Tp = 20.0;
    double Ts = 1.0;
    double A = 1.0;
    int P_R = 10;
    std::vector<double> snr_db;
    int trials = 200;
    std::uint64_t master_seed = 1;
    std::vector<Method> estimators{Method::ppks, Method::ppus, Method::mhus_anls};
    int Kh_max = 60;
    double T_search_low = 0.0;   // 0 -> T_low
    double T_search_high = 0.0;  // 0 -> T_high
    int fft_size = 1 << 20;
    SnrConvention snr_convention = SnrConvention::average_power;
    double order_penalty_rho = 3.0;
    int threads = 0;             // 0 -> hardware concurrency
    bool snap_to_grid = false;   // snap drawn T, tau0 to the Ts grid
};

void validate_config(const ExperimentConfig& cfg);

// Noise variance for one sweep point under the configured convention.
double sigma2_for_config(const ExperimentConfig& cfg, const PulseShape& pulse,
                         double snr_db);

struct MseCell {
    double mse = 0.0;
    int trials = 0;
    int failures = 0;
};

struct MseCurve {
    std::vector<double> snr_db;
    std::vector<Method> methods;
    // cells[method_index][snr_index]
    std::vector<std::vector<MseCell>> cells;
    // Period-variance lower bounds averaged over the same (T, tau0) draws.
    std::vector<double> crlb_model1;
    std::vector<double> crlb_mhus;
    bool complete = true;
};

// Runs the full sweep. Per trial, (T, tau0) are drawn once and reused across
// all SNR points; noise is drawn per (trial, snr) from seeds derived from
// master_seed, so reruns are bit-identical and independent of thread count.
MseCurve run(const ExperimentConfig& cfg);

struct AveragedCrlb {
    double model1 = 0.0;
    double multiharmonic = 0.0;
};

// The bound averages over the same parameter draws run() uses.
AveragedCrlb averaged_crlb(const ExperimentConfig& cfg, double snr_db);

// Lowest SNR at and above which the method's MSE stays within
// factor * model-1 bound. Empty when no such point exists.
std::optional<double> detect_threshold(const MseCurve& curve, Method method,
                                       double factor = 10.0);

// Cooperative cancellation for long sweeps; safe to call from a signal
// handler. run() finishes the trials already in flight and returns a curve
// marked incomplete.
void request_stop();
void reset_stop();
bool stop_requested();

}  // namespace ppt
