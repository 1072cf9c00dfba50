#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ppt/signal_model.hpp"

namespace ppt {

struct PulseStats {
    double energy = 0.0;        // sum of squared pulse samples
    double deriv_energy = 0.0;  // sum of squared derivative samples
    double cross = 0.0;         // sum of derivative * sample products
    double msb = 0.0;           // deriv_energy / energy (mean-square bandwidth scale)
};

PulseStats pulse_stats(const PulseShape& pulse);

// Number of pulse repetitions K = round(N*Ts / T), rounding half away from zero.
int pulse_count(int N, double Ts, double T);

struct FisherInfo {
    Eigen::MatrixXd matrix;
    std::vector<std::string> labels;
    double sigma2 = 1.0;
};

// Fisher information for the known-shape train over parameters [T, tau0, A],
// accumulated sample by sample from the signal gradients.
FisherInfo fim_known_shape(const PulseTrainParams& p, const PulseShape& pulse,
                           int N, double Ts, double sigma2);

// Fisher information for the unknown-shape train over [T, tau0, s_p[0..Np-1]].
// The pulse-sample gradients use the piecewise-constant (sample-and-hold)
// expansion of the pulse, i.e. unit indicators over each sample cell.
FisherInfo fim_unknown_shape(const PulseTrainParams& p, const PulseShape& pulse,
                             int N, double Ts, double sigma2);

// Closed-form approximations valid when T and tau0 are integer multiples of
// Ts and K full pulses lie inside the window.
FisherInfo fim_known_shape_closed(const PulseShape& pulse, int K, double A, double sigma2);
FisherInfo fim_unknown_shape_closed(const PulseShape& pulse, int K, double sigma2);

struct PeriodCrlb {
    double exact = 0.0;   // 12 sigma^2 / ((K^3 - K) A^2 E_deriv)
    double approx = 0.0;  // 12 T^3 sigma^2 / (N^3 Ts^3 A^2 E F^2)
};

// Lower bound on the period variance for the known-shape model. Requires K >= 2.
PeriodCrlb crlb_period_known_shape(const PulseShape& pulse, int K, double A,
                                   double sigma2, int N, double Ts, double T);

struct MultiharmonicCrlb {
    double var_psi = 0.0;  // bound on the normalized-frequency variance
    double var_T = 0.0;    // bound mapped to the period, T = Ts/psi
};

// Bound for the sum-of-harmonics model with amplitudes amps[k-1] for
// harmonic k. Requires a non-empty amplitude list with positive total weight.
MultiharmonicCrlb crlb_multiharmonic(const std::vector<double>& amps, int N,
                                     double sigma2, double T, double Ts);

// Harmonic amplitudes of the periodic train A*s(t - kT): 2A/T * |S(k/T)| for
// k = 1 .. floor(T/(2Ts)) - 1, with S the discrete-time pulse spectrum
// scaled by Ts.
std::vector<double> harmonic_amplitudes(const PulseShape& pulse, double A, double T);

// Default Tikhonov ridge, 1e-8 * trace/dim.
double default_ridge(const FisherInfo& fim);

// (M + lambda I)^-1. With lambda = 0 the plain inverse is attempted and a
// std::domain_error is thrown when the condition number exceeds 1e12.
Eigen::MatrixXd regularized_covariance(const FisherInfo& fim, double lambda);

struct SingularityDiagnostic {
    double min_eig = 0.0;
    double max_eig = 0.0;
    // Relative residual ||M u|| / (||M|| ||u||) for the analytic null
    // direction u = [0, 1, s'(0), ..., s'((Np-1)Ts)] of the unknown-shape
    // closed form (a delay shift traded against a pulse shift).
    double null_residual = 0.0;
};

SingularityDiagnostic singularity_diagnostic(const FisherInfo& fim, const PulseShape& pulse);

}  // namespace ppt
