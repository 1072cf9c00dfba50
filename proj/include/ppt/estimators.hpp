#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "ppt/signal_model.hpp"

namespace ppt {

enum class Method { ppks, ppus, mhus_ml, mhus_anls };

const char* method_name(Method m);
std::optional<Method> method_from_name(std::string_view name);

// Candidate grids. P_min/P_max bound the integer sample period searched by
// the comb methods (post-resampling units when used through
// estimate_with_subgrid). psi_grid lists normalized-frequency candidates for
// the multiharmonic methods; when empty it is derived from the P range as
// the fft_size bin frequencies inside [1/P_max, 1/P_min].
struct GridSpec {
    int P_min = 2;
    int P_max = 2;
    std::vector<double> psi_grid;
    int fft_size = 1 << 20;
};

// Bin frequencies b/fft_size covering periods [T_min, T_max] at sampling
// interval Ts.
std::vector<double> make_psi_grid(double T_min, double T_max, double Ts, int fft_size);

struct PeriodEstimate {
    Method method = Method::ppks;
    long long P_hat = 0;     // period in samples (comb methods)
    double T_hat = 0.0;      // period in time units
    long long n0_hat = -1;   // first-onset sample (comb methods)
    double cost = 0.0;       // criterion value at the maximizer
    // Linear nuisance estimates at the maximizer: amplitude (ppks), pulse
    // samples (ppus), interleaved harmonic amplitude/phase pairs (mhus_ml).
    std::vector<double> nuisance;
};

// Optional dump of a comb-method cost surface; rows[P - P_min][n0] holds the
// criterion at candidate (P, n0). Candidates with no complete pulse in the
// window are recorded as NaN.
struct CostSurface {
    int P_min = 0;
    std::vector<std::vector<double>> rows;
};

// Known-shape comb search: maximizes the normalized projection of x onto a
// train of template pulses at onsets n0 + k*P, over P in [P_min, P_max] and
// 0 <= n0 < P. A candidate needs at least one complete copy in the window;
// copies clipped by either window edge then contribute their overlapping
// samples, with the projection normalized by the in-window template energy.
// Ties resolve to the smallest P, then the smallest n0. nuisance = {A_hat}.
PeriodEstimate ppks(const Measurement& meas, const PulseShape& tpl,
                    const GridSpec& grid, CostSurface* surface = nullptr);

// Unknown-shape comb search over the same grid: cost is the projection of x
// onto per-sample fold means, i.e. sum_j (fold sum_j)^2 / (fold count_j),
// with window-clipped copies contributing like in ppks.
// nuisance = recovered pulse.
PeriodEstimate ppus(const Measurement& meas, int Np, const GridSpec& grid,
                    CostSurface* surface = nullptr);

// Harmonic least-squares grid search (explicit cos/sin regressors, Kh
// harmonics). Grid points whose normal matrix is near-singular are skipped.
PeriodEstimate mhus_ml(const Measurement& meas, int Kh, const GridSpec& grid);

// Harmonic summation: maximizes sum_k |X(k psi)|^2 over the psi grid, with X
// the zero-padded FFT of x. Candidates are snapped to bin frequencies.
PeriodEstimate mhus_anls(const Measurement& meas, int Kh, const GridSpec& grid);

// Penalized model-order choice for the harmonic methods: minimizes
// N ln(sigma_hat^2(Kh)) + rho Kh ln(N) over 1 <= Kh <= Kh_max.
int select_model_order(const Measurement& meas, int Kh_max, const GridSpec& grid,
                       double rho = 3.0);

// Runs a comb method on the band-limited upsampling of x by factor P_R with
// the template re-sampled at Ts/P_R; the returned P_hat/n0_hat are in fine
// samples and T_hat = P_hat * Ts/P_R. The grid is in fine-sample units.
// tpl is required for ppks; Np (coarse samples) for ppus.
PeriodEstimate estimate_with_subgrid(const Measurement& meas, Method method, int P_R,
                                     const GridSpec& grid, const PulseShape* tpl,
                                     int Np, CostSurface* surface = nullptr);

// Per-sample mean of the period-aligned folds of x at (P, n0), including
// window-clipped copies: the least-squares pulse estimate given the period
// and onset. Requires Np <= P and 0 <= n0 < P.
std::vector<double> recover_pulse(const Measurement& meas, long long P,
                                  long long n0, int Np);

}  // namespace ppt
