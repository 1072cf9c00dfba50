#include "ppt/estimators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ppt/fft.hpp"

namespace ppt {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void validate_comb_grid(const GridSpec& grid, int N, int Np) {
    if (grid.P_min < 2 || grid.P_min > grid.P_max)
        throw std::invalid_argument("grid: need 2 <= P_min <= P_max");
    if (Np < 1) throw std::invalid_argument("grid: empty pulse");
    if (Np > grid.P_min)
        throw std::invalid_argument("grid: pulse longer than the smallest candidate period");
    if (Np > N) throw std::invalid_argument("grid: pulse longer than the signal");
}

// Number of complete pulses at onsets n0 + k*P inside an N-sample window.
inline int fold_count(int N, int Np, int P, int n0) {
    if (n0 > N - Np) return 0;
    return (N - Np - n0) / P + 1;
}

struct BinGrid {
    std::vector<long long> bins;  // candidate fundamental bins, ascending
    int fft_size = 0;
};

// Snap psi candidates to FFT bins, keeping those inside the usable band
// [2/N, 0.45/Kh] where all Kh harmonics stay below half the sample rate.
BinGrid harmonic_bins(const GridSpec& grid, int N, int Kh) {
    if (Kh < 1) throw std::invalid_argument("harmonics: Kh must be >= 1");
    if (grid.fft_size < 2 || grid.fft_size < N)
        throw std::invalid_argument("harmonics: fft_size must be >= signal length");
    if (grid.psi_grid.empty())
        throw std::invalid_argument("harmonics: empty candidate grid");
    const double lo = 2.0 / static_cast<double>(N);
    const double hi = 0.45 / static_cast<double>(Kh);
    BinGrid bg;
    bg.fft_size = grid.fft_size;
    for (double psi : grid.psi_grid) {
        if (!(psi > 0.0) || !(psi < 0.5))
            throw std::invalid_argument("harmonics: psi candidates must lie in (0, 0.5)");
        if (psi < lo || psi > hi) continue;
        bg.bins.push_back(std::llround(psi * grid.fft_size));
    }
    std::sort(bg.bins.begin(), bg.bins.end());
    bg.bins.erase(std::unique(bg.bins.begin(), bg.bins.end()), bg.bins.end());
    if (bg.bins.empty())
        throw std::invalid_argument("harmonics: no candidate inside the usable band");
    return bg;
}

GridSpec with_default_psi(const GridSpec& grid) {
    GridSpec g = grid;
    if (g.psi_grid.empty()) {
        if (g.P_min < 2 || g.P_min > g.P_max)
            throw std::invalid_argument("grid: need 2 <= P_min <= P_max");
        g.psi_grid = make_psi_grid(static_cast<double>(g.P_min),
                                   static_cast<double>(g.P_max), 1.0, g.fft_size);
    }
    return g;
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::ppks: return "ppks";
        case Method::ppus: return "ppus";
        case Method::mhus_ml: return "mhus_ml";
        case Method::mhus_anls: return "mhus_anls";
    }
    return "?";
}

std::optional<Method> method_from_name(std::string_view name) {
    if (name == "ppks") return Method::ppks;
    if (name == "ppus") return Method::ppus;
    if (name == "mhus_ml") return Method::mhus_ml;
    if (name == "mhus_anls" || name == "anls") return Method::mhus_anls;
    return std::nullopt;
}

std::vector<double> make_psi_grid(double T_min, double T_max, double Ts, int fft_size) {
    if (!(T_min > 0.0) || !(T_min <= T_max) || !(Ts > 0.0) || fft_size < 2)
        throw std::invalid_argument("make_psi_grid: bad arguments");
    const double psi_lo = Ts / T_max;
    const double psi_hi = Ts / T_min;
    const auto b_lo = static_cast<long long>(std::ceil(psi_lo * fft_size));
    const auto b_hi = static_cast<long long>(std::floor(psi_hi * fft_size));
    std::vector<double> grid;
    for (long long b = std::max<long long>(b_lo, 1); b <= b_hi; ++b)
        grid.push_back(static_cast<double>(b) / static_cast<double>(fft_size));
    return grid;
}

PeriodEstimate ppks(const Measurement& meas, const PulseShape& tpl,
                    const GridSpec& grid, CostSurface* surface) {
    const auto& x = meas.x;
    const int N = static_cast<int>(x.size());
    const int Np = tpl.length();
    validate_comb_grid(grid, N, Np);
    double E = 0.0;
    for (double v : tpl.samples) E += v * v;
    if (!(E > 0.0)) throw std::invalid_argument("ppks: zero-energy template");

    const auto c = fft::correlate(x, tpl.samples);

    // Template copies clipped by a window edge still contribute their
    // overlapping samples to the fit. A leading copy cut by a samples pairs
    // template sample j >= a with x[j - a]; a trailing copy keeping cnt
    // samples pairs template sample j < cnt with x[N - cnt + j]. Since
    // Np <= P_min, a candidate has at most one of each and they never share
    // window samples.
    std::vector<double> epre(Np + 1, 0.0);  // prefix energies of the template
    for (int j = 0; j < Np; ++j)
        epre[j + 1] = epre[j] + tpl.samples[j] * tpl.samples[j];
    std::vector<double> lead(Np, 0.0), trail(Np, 0.0);
    for (int a = 1; a < Np; ++a)
        for (int j = a; j < Np; ++j) lead[a] += x[j - a] * tpl.samples[j];
    for (int cnt = 1; cnt < Np; ++cnt)
        for (int j = 0; j < cnt; ++j) trail[cnt] += x[N - cnt + j] * tpl.samples[j];

    if (surface) {
        surface->P_min = grid.P_min;
        surface->rows.assign(grid.P_max - grid.P_min + 1, {});
    }

    PeriodEstimate best;
    best.method = Method::ppks;
    best.cost = -std::numeric_limits<double>::infinity();
    double best_S = 0.0, best_H2 = 0.0;
    std::vector<double> comb;
    for (int P = grid.P_min; P <= grid.P_max; ++P) {
        comb.assign(P, 0.0);
        const int kmax = (N - Np) / P;
        for (int k = 0; k <= kmax; ++k) {
            const int base = k * P;
            const int hi = std::min(P - 1, N - Np - base);
            const double* src = c.data() + base;
            for (int n0 = 0; n0 <= hi; ++n0) comb[n0] += src[n0];
        }
        std::vector<double>* row = nullptr;
        if (surface) {
            row = &surface->rows[P - grid.P_min];
            row->assign(P, kNan);
        }
        for (int n0 = 0; n0 < P; ++n0) {
            const int Kf = fold_count(N, Np, P, n0);
            if (Kf == 0) continue;
            double S = comb[n0];
            double H2 = Kf * E;
            const int a = P - n0;
            if (a < Np) {
                S += lead[a];
                H2 += E - epre[a];
            }
            const int m = n0 + Kf * P;
            if (m < N) {  // trailing clip keeps N - m < Np samples
                S += trail[N - m];
                H2 += epre[N - m];
            }
            const double J = S * S / H2;
            if (row) (*row)[n0] = J;
            if (J > best.cost) {
                best.cost = J;
                best.P_hat = P;
                best.n0_hat = n0;
                best_S = S;
                best_H2 = H2;
            }
        }
    }
    if (best_H2 == 0.0)
        throw std::invalid_argument("ppks: no candidate fits a complete pulse");
    best.T_hat = static_cast<double>(best.P_hat) * meas.Ts;
    best.nuisance = {best_S / best_H2};
    return best;
}

PeriodEstimate ppus(const Measurement& meas, int Np, const GridSpec& grid,
                    CostSurface* surface) {
    const auto& x = meas.x;
    const int N = static_cast<int>(x.size());
    validate_comb_grid(grid, N, Np);
    if (surface) {
        surface->P_min = grid.P_min;
        surface->rows.assign(grid.P_max - grid.P_min + 1, {});
    }

    PeriodEstimate best;
    best.method = Method::ppus;
    best.cost = -std::numeric_limits<double>::infinity();
    // Single-fold candidates with the same n0 share one window regardless of
    // P; serving them from one global prefix over x^2 keeps their costs
    // bit-identical, so ties resolve to the smallest P as documented.
    std::vector<double> xsq_pref(N + 1, 0.0);
    for (int i = 0; i < N; ++i) xsq_pref[i + 1] = xsq_pref[i] + x[i] * x[i];
    std::vector<double> G, pref;
    for (int P = grid.P_min; P <= grid.P_max; ++P) {
        std::vector<double>* row = nullptr;
        if (surface) {
            row = &surface->rows[P - grid.P_min];
            row->assign(P, kNan);
        }
        // The fold count is constant on at most two n0 intervals; process each
        // with one cumulative fold and a sliding window over its energy.
        // Candidates whose leading or trailing copy is clipped by a window
        // edge (at most ~2 Np of them per P, since Np <= P_min) leave the
        // fast path: their per-sample fold counts vary, so the fold mean and
        // cost are evaluated directly with the clipped samples included.
        const int K0 = fold_count(N, Np, P, 0);
        for (int K = K0; K >= std::max(1, K0 - 1); --K) {
            const int lo = std::max(0, N - Np - K * P + 1);
            const int hi = std::min({P - 1, N - Np, N - Np - (K - 1) * P});
            if (lo > hi) continue;
            const bool shared = K > 1;
            if (shared) {
                const int len = hi - lo + Np;
                G.assign(len, 0.0);
                for (int k = 0; k < K; ++k) {
                    const double* src = x.data() + lo + static_cast<long long>(k) * P;
                    for (int i = 0; i < len; ++i) G[i] += src[i];
                }
                pref.assign(len + 1, 0.0);
                for (int i = 0; i < len; ++i) pref[i + 1] = pref[i] + G[i] * G[i];
            }
            for (int n0 = lo; n0 <= hi; ++n0) {
                const int a = P - n0;              // leading clip amount
                const int m = n0 + K * P;          // trailing copy position
                const int cnt = m < N ? N - m : 0; // its in-window samples
                double J;
                if (a >= Np && cnt == 0) {
                    J = shared ? (pref[n0 - lo + Np] - pref[n0 - lo]) / K
                               : xsq_pref[n0 + Np] - xsq_pref[n0];
                } else {
                    J = 0.0;
                    for (int j = 0; j < Np; ++j) {
                        double g = shared ? G[n0 - lo + j] : x[n0 + j];
                        int kj = K;
                        if (j >= a) {
                            g += x[j - a];
                            ++kj;
                        }
                        if (j < cnt) {
                            g += x[m + j];
                            ++kj;
                        }
                        J += g * g / kj;
                    }
                }
                if (row) (*row)[n0] = J;
                if (J > best.cost) {
                    best.cost = J;
                    best.P_hat = P;
                    best.n0_hat = n0;
                }
            }
        }
    }
    if (best.n0_hat < 0) throw std::invalid_argument("ppus: no candidate fits a complete pulse");
    best.T_hat = static_cast<double>(best.P_hat) * meas.Ts;
    best.nuisance = recover_pulse(meas, best.P_hat, best.n0_hat, Np);
    return best;
}

PeriodEstimate mhus_ml(const Measurement& meas, int Kh, const GridSpec& grid_in) {
    const auto& x = meas.x;
    const int N = static_cast<int>(x.size());
    const GridSpec grid = with_default_psi(grid_in);
    const auto bg = harmonic_bins(grid, N, Kh);

    PeriodEstimate best;
    best.method = Method::mhus_ml;
    best.cost = -std::numeric_limits<double>::infinity();
    double best_psi = 0.0;
    Eigen::VectorXd best_coef;

    const int dim = 2 * Kh;
    Eigen::MatrixXd H(N, dim);
    for (long long b : bg.bins) {
        const double psi = static_cast<double>(b) / bg.fft_size;
        for (int n = 0; n < N; ++n) {
            for (int k = 1; k <= Kh; ++k) {
                const double ph = 2.0 * std::numbers::pi * k * psi * n;
                H(n, k - 1) = std::cos(ph);
                H(n, Kh + k - 1) = std::sin(ph);
            }
        }
        const Eigen::MatrixXd HtH = H.transpose() * H;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(HtH, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        if (!(lo > 0.0) || hi / lo > 1e12) continue;  // degenerate regressors; skip
        const Eigen::VectorXd Htx = H.transpose() * Eigen::Map<const Eigen::VectorXd>(x.data(), N);
        const Eigen::VectorXd coef = HtH.ldlt().solve(Htx);
        const double J = Htx.dot(coef);
        if (J > best.cost) {
            best.cost = J;
            best_psi = psi;
            best_coef = coef;
        }
    }
    if (!(best.cost > -std::numeric_limits<double>::infinity()))
        throw std::invalid_argument("mhus_ml: all grid points degenerate");
    best.T_hat = meas.Ts / best_psi;
    best.P_hat = std::llround(1.0 / best_psi);
    best.nuisance.resize(2 * Kh);
    for (int k = 0; k < Kh; ++k) {
        const double a = best_coef(k);           // cos coefficient
        const double bcoef = best_coef(Kh + k);  // sin coefficient
        best.nuisance[2 * k] = std::hypot(a, bcoef);
        // a cos(th) + b sin(th) = R cos(th + phi) with phi = atan2(-b, a)
        best.nuisance[2 * k + 1] = std::atan2(-bcoef, a);
    }
    return best;
}

PeriodEstimate mhus_anls(const Measurement& meas, int Kh, const GridSpec& grid_in) {
    const auto& x = meas.x;
    const int N = static_cast<int>(x.size());
    const GridSpec grid = with_default_psi(grid_in);
    const auto bg = harmonic_bins(grid, N, Kh);
    const auto spec = fft::rfft(x, static_cast<std::size_t>(bg.fft_size));

    PeriodEstimate best;
    best.method = Method::mhus_anls;
    best.cost = -std::numeric_limits<double>::infinity();
    long long best_bin = 0;
    for (long long b : bg.bins) {
        double J = 0.0;
        for (int k = 1; k <= Kh; ++k) J += std::norm(spec[static_cast<std::size_t>(k * b)]);
        if (J > best.cost) {
            best.cost = J;
            best_bin = b;
        }
    }
    const double psi = static_cast<double>(best_bin) / bg.fft_size;
    best.T_hat = meas.Ts / psi;
    best.P_hat = std::llround(1.0 / psi);
    best.nuisance.resize(2 * Kh);
    for (int k = 1; k <= Kh; ++k) {
        const auto X = spec[static_cast<std::size_t>(k * best_bin)];
        best.nuisance[2 * (k - 1)] = 2.0 * std::abs(X) / N;
        // X(psi_k) ~ (N/2) A e^{j phi} for A cos(2 pi k psi n + phi)
        best.nuisance[2 * (k - 1) + 1] = std::arg(X);
    }
    return best;
}

int select_model_order(const Measurement& meas, int Kh_max, const GridSpec& grid_in,
                       double rho) {
    const auto& x = meas.x;
    const int N = static_cast<int>(x.size());
    if (Kh_max < 1) throw std::invalid_argument("select_model_order: Kh_max must be >= 1");
    const GridSpec grid = with_default_psi(grid_in);
    const auto bg = harmonic_bins(grid, N, 1);
    const auto pspec = fft::power_spectrum(x, static_cast<std::size_t>(bg.fft_size));

    double xx = 0.0;
    for (double v : x) xx += v * v;

    const double psi_max = static_cast<double>(bg.bins.back()) / bg.fft_size;
    const int Kh_usable = std::min(Kh_max, static_cast<int>(std::floor(0.45 / psi_max)));

    std::vector<double> cum(bg.bins.size(), 0.0);
    double best_ic = std::numeric_limits<double>::infinity();
    int best_Kh = 1;
    for (int Kh = 1; Kh <= Kh_usable; ++Kh) {
        double R = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < bg.bins.size(); ++i) {
            cum[i] += pspec[static_cast<std::size_t>(Kh * bg.bins[i])];
            R = std::max(R, cum[i]);
        }
        const double resid = std::max((xx - 2.0 * R / N) / N, 1e-300);
        const double ic = N * std::log(resid) + rho * Kh * std::log(static_cast<double>(N));
        if (ic < best_ic) {
            best_ic = ic;
            best_Kh = Kh;
        }
    }
    return best_Kh;
}

PeriodEstimate estimate_with_subgrid(const Measurement& meas, Method method, int P_R,
                                     const GridSpec& grid, const PulseShape* tpl,
                                     int Np, CostSurface* surface) {
    if (method != Method::ppks && method != Method::ppus)
        throw std::invalid_argument("estimate_with_subgrid: only the comb methods refine");
    if (P_R < 1) throw std::invalid_argument("estimate_with_subgrid: P_R must be >= 1");
    Measurement fine;
    fine.x = resample(meas.x, P_R);
    fine.Ts = meas.Ts / P_R;
    fine.sigma2 = meas.sigma2;
    fine.seed = meas.seed;
    fine.truth = meas.truth;
    if (method == Method::ppks) {
        if (!tpl) throw std::invalid_argument("estimate_with_subgrid: ppks needs a template");
        const PulseShape tpl_fine = P_R == 1 ? *tpl : resample_pulse(*tpl, fine.Ts);
        return ppks(fine, tpl_fine, grid, surface);
    }
    if (Np < 1) throw std::invalid_argument("estimate_with_subgrid: ppus needs Np");
    return ppus(fine, Np * P_R, grid, surface);
}

std::vector<double> recover_pulse(const Measurement& meas, long long P,
                                  long long n0, int Np) {
    const int N = static_cast<int>(meas.x.size());
    if (P < Np || n0 < 0 || n0 >= P || Np < 1 || n0 + Np > N)
        throw std::invalid_argument("recover_pulse: bad (P, n0, Np)");
    const int Kf = fold_count(N, Np, static_cast<int>(P), static_cast<int>(n0));
    std::vector<double> s(static_cast<std::size_t>(Np), 0.0);
    std::vector<int> hits(static_cast<std::size_t>(Np), Kf);
    for (int k = 0; k < Kf; ++k) {
        const double* src = meas.x.data() + n0 + static_cast<long long>(k) * P;
        for (int a = 0; a < Np; ++a) s[a] += src[a];
    }
    // window-clipped copies, as in the ppus cost
    const long long a0 = P - n0;
    for (int j = static_cast<int>(a0); j < Np; ++j) {
        s[j] += meas.x[j - a0];
        ++hits[j];
    }
    const long long m = n0 + static_cast<long long>(Kf) * P;
    for (int j = 0; j < (m < N ? static_cast<int>(N - m) : 0); ++j) {
        s[j] += meas.x[m + j];
        ++hits[j];
    }
    for (int j = 0; j < Np; ++j) s[j] /= hits[j];
    return s;
}

}  // namespace ppt
