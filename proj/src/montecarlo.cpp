#include "ppt/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include "ppt/bounds.hpp"
#include "ppt/seeding.hpp"

namespace ppt {
namespace {

std::atomic<bool> g_stop{false};

// Seed-stream tags; the parameter draw must not share a stream with any
// noise draw.
constexpr std::uint64_t kParamStream = 0xfffffffffffffffeULL;

struct TrialDraw {
    double T;
    double tau0;
};

TrialDraw draw_params(const ExperimentConfig& cfg, int trial) {
    std::mt19937_64 gen(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(trial),
                                    kParamStream));
    std::uniform_real_distribution<double> uT(cfg.T_low, cfg.T_high);
    TrialDraw d;
    d.T = uT(gen);
    std::uniform_real_distribution<double> utau(0.0, d.T);
    d.tau0 = utau(gen);
    if (cfg.snap_to_grid) {
        d.T = std::round(d.T / cfg.Ts) * cfg.Ts;
        d.tau0 = std::round(d.tau0 / cfg.Ts) * cfg.Ts;
        if (d.tau0 >= d.T) d.tau0 = 0.0;
    }
    return d;
}

struct UnitBounds {
    double model1 = 0.0;        // per unit sigma2
    double multiharmonic = 0.0;
};

UnitBounds unit_bounds(const ExperimentConfig& cfg, const PulseShape& pulse,
                       const TrialDraw& d) {
    UnitBounds b;
    const int K = pulse_count(cfg.N, cfg.Ts, d.T);
    b.model1 = crlb_period_known_shape(pulse, K, cfg.A, 1.0, cfg.N, cfg.Ts, d.T).exact;
    const auto amps = harmonic_amplitudes(pulse, cfg.A, d.T);
    b.multiharmonic = crlb_multiharmonic(amps, cfg.N, 1.0, d.T, cfg.Ts).var_T;
    return b;
}

double search_low(const ExperimentConfig& cfg) {
    return cfg.T_search_low > 0.0 ? cfg.T_search_low : cfg.T_low;
}

double search_high(const ExperimentConfig& cfg) {
    return cfg.T_search_high > 0.0 ? cfg.T_search_high : cfg.T_high;
}

}  // namespace

const char* snr_convention_name(SnrConvention c) {
    return c == SnrConvention::peak ? "peak" : "average_power";
}

std::optional<SnrConvention> snr_convention_from_name(std::string_view name) {
    if (name == "peak") return SnrConvention::peak;
    if (name == "average_power" || name == "average") return SnrConvention::average_power;
    return std::nullopt;
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.N < 2) throw std::invalid_argument("config: N must be >= 2");
    if (!(cfg.Ts > 0.0)) throw std::invalid_argument("config: Ts must be positive");
    if (!(cfg.T_low > 0.0) || !(cfg.T_low <= cfg.T_high))
        throw std::invalid_argument("config: need 0 < T_low <= T_high");
    if (!(cfg.Tp > 0.0) || !(cfg.Tp < cfg.T_low))
        throw std::invalid_argument("config: need 0 < Tp < T_low");
    if (cfg.P_R < 1) throw std::invalid_argument("config: P_R must be >= 1");
    if (cfg.trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (cfg.snr_db.empty()) throw std::invalid_argument("config: empty SNR sweep");
    if (cfg.estimators.empty()) throw std::invalid_argument("config: no estimators selected");
    if (cfg.Kh_max < 1) throw std::invalid_argument("config: Kh_max must be >= 1");
    if (cfg.fft_size < cfg.N) throw std::invalid_argument("config: fft_size must be >= N");
    if (!(cfg.order_penalty_rho > 0.0)) throw std::invalid_argument("config: rho must be positive");
    if (cfg.A == 0.0) throw std::invalid_argument("config: A must be nonzero");
    const double lo = search_low(cfg), hi = search_high(cfg);
    if (!(lo > 0.0) || !(lo <= hi))
        throw std::invalid_argument("config: bad search range");
}

double sigma2_for_config(const ExperimentConfig& cfg, const PulseShape& pulse,
                         double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0.0) return 0.0;  // noise-free sentinel
    if (cfg.snr_convention == SnrConvention::peak)
        return sigma2_for_snr(pulse, cfg.A, snr_db);
    const PulseStats st = pulse_stats(pulse);
    const double T_mid = 0.5 * (cfg.T_low + cfg.T_high);
    const double mean_power = cfg.A * cfg.A * st.energy * pulse.Ts / T_mid;
    return mean_power / std::pow(10.0, snr_db / 10.0);
}

MseCurve run(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const PulseShape pulse = make_gaussian_pulse(cfg.Tp, cfg.Ts);
    const double fine_Ts = cfg.Ts / cfg.P_R;
    const PulseShape pulse_fine =
        cfg.P_R == 1 ? pulse : make_gaussian_pulse(cfg.Tp, fine_Ts);
    const int Np_fine = pulse_fine.length();

    GridSpec comb_grid;
    comb_grid.P_min = static_cast<int>(std::llround(search_low(cfg) * cfg.P_R / cfg.Ts));
    comb_grid.P_max = static_cast<int>(std::llround(search_high(cfg) * cfg.P_R / cfg.Ts));
    GridSpec mh_grid;
    mh_grid.fft_size = cfg.fft_size;
    mh_grid.psi_grid = make_psi_grid(search_low(cfg), search_high(cfg), cfg.Ts, cfg.fft_size);

    const int n_snr = static_cast<int>(cfg.snr_db.size());
    const int n_methods = static_cast<int>(cfg.estimators.size());
    std::vector<double> sig2(n_snr);
    for (int s = 0; s < n_snr; ++s) sig2[s] = sigma2_for_config(cfg, pulse, cfg.snr_db[s]);

    const bool wants_comb =
        std::any_of(cfg.estimators.begin(), cfg.estimators.end(),
                    [](Method m) { return m == Method::ppks || m == Method::ppus; });

    // err[method][trial * n_snr + snr]; NaN = failure, untouched = skipped.
    const double kSkip = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> err(
        n_methods, std::vector<double>(static_cast<std::size_t>(cfg.trials) * n_snr, kSkip));
    std::vector<UnitBounds> bounds(cfg.trials);
    std::vector<char> trial_done(cfg.trials, 0);

    std::atomic<int> next_trial{0};
    auto worker = [&]() {
        for (;;) {
            const int trial = next_trial.fetch_add(1);
            if (trial >= cfg.trials || g_stop.load()) return;
            const TrialDraw d = draw_params(cfg, trial);
            bounds[trial] = unit_bounds(cfg, pulse, d);
            PulseTrainParams truth{d.T, d.tau0, cfg.A};
            const auto clean = synthesize(truth, pulse, cfg.N, cfg.Ts);
            for (int s = 0; s < n_snr; ++s) {
                const auto seed =
                    derive_seed(cfg.master_seed, static_cast<std::uint64_t>(trial),
                                static_cast<std::uint64_t>(s));
                Measurement meas = add_noise(clean, cfg.Ts, sig2[s], seed, truth);
                Measurement fine;
                if (wants_comb) {
                    fine.x = resample(meas.x, cfg.P_R);
                    fine.Ts = fine_Ts;
                    fine.sigma2 = meas.sigma2;
                    fine.seed = meas.seed;
                }
                int Kh_sel = 0;
                for (int mi = 0; mi < n_methods; ++mi) {
                    double& slot = err[mi][static_cast<std::size_t>(trial) * n_snr + s];
                    try {
                        PeriodEstimate est;
                        switch (cfg.estimators[mi]) {
                            case Method::ppks:
                                est = ppks(fine, pulse_fine, comb_grid);
                                break;
                            case Method::ppus:
                                est = ppus(fine, Np_fine, comb_grid);
                                break;
                            case Method::mhus_ml:
                            case Method::mhus_anls: {
                                if (Kh_sel == 0)
                                    Kh_sel = select_model_order(meas, cfg.Kh_max, mh_grid,
                                                                cfg.order_penalty_rho);
                                est = cfg.estimators[mi] == Method::mhus_ml
                                          ? mhus_ml(meas, Kh_sel, mh_grid)
                                          : mhus_anls(meas, Kh_sel, mh_grid);
                                break;
                            }
                        }
                        const double e = est.T_hat - d.T;
                        slot = e * e;
                    } catch (const std::exception&) {
                        slot = std::numeric_limits<double>::quiet_NaN();
                    }
                }
            }
            trial_done[trial] = 1;
        }
    };

    int n_threads = cfg.threads > 0 ? cfg.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::clamp(n_threads, 1, cfg.trials);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    MseCurve curve;
    curve.snr_db = cfg.snr_db;
    curve.methods = cfg.estimators;
    curve.cells.assign(n_methods, std::vector<MseCell>(n_snr));
    curve.crlb_model1.assign(n_snr, 0.0);
    curve.crlb_mhus.assign(n_snr, 0.0);

    // Reduce strictly in trial order so the result is independent of how the
    // trials were scheduled across threads.
    int done = 0;
    double b1 = 0.0, bmh = 0.0;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        if (!trial_done[trial]) {
            curve.complete = false;
            continue;
        }
        ++done;
        b1 += bounds[trial].model1;
        bmh += bounds[trial].multiharmonic;
        for (int mi = 0; mi < n_methods; ++mi) {
            for (int s = 0; s < n_snr; ++s) {
                const double e = err[mi][static_cast<std::size_t>(trial) * n_snr + s];
                auto& cell = curve.cells[mi][s];
                ++cell.trials;
                if (std::isnan(e))
                    ++cell.failures;
                else
                    cell.mse += e;
            }
        }
    }
    for (int mi = 0; mi < n_methods; ++mi) {
        for (int s = 0; s < n_snr; ++s) {
            auto& cell = curve.cells[mi][s];
            const int ok = cell.trials - cell.failures;
            cell.mse = ok > 0 ? cell.mse / ok : std::numeric_limits<double>::quiet_NaN();
        }
    }
    if (done > 0) {
        for (int s = 0; s < n_snr; ++s) {
            curve.crlb_model1[s] = b1 / done * sig2[s];
            curve.crlb_mhus[s] = bmh / done * sig2[s];
        }
    }
    return curve;
}

AveragedCrlb averaged_crlb(const ExperimentConfig& cfg, double snr_db) {
    validate_config(cfg);
    const PulseShape pulse = make_gaussian_pulse(cfg.Tp, cfg.Ts);
    const double s2 = sigma2_for_config(cfg, pulse, snr_db);
    double b1 = 0.0, bmh = 0.0;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        const TrialDraw d = draw_params(cfg, trial);
        const UnitBounds b = unit_bounds(cfg, pulse, d);
        b1 += b.model1;
        bmh += b.multiharmonic;
    }
    return {b1 / cfg.trials * s2, bmh / cfg.trials * s2};
}

std::optional<double> detect_threshold(const MseCurve& curve, Method method,
                                       double factor) {
    if (curve.snr_db.size() < 3)
        throw std::invalid_argument("detect_threshold: need at least 3 SNR points");
    const auto it = std::find(curve.methods.begin(), curve.methods.end(), method);
    if (it == curve.methods.end())
        throw std::invalid_argument("detect_threshold: method not in curve");
    const auto mi = static_cast<std::size_t>(it - curve.methods.begin());

    // Scan in ascending SNR order regardless of sweep order.
    std::vector<std::size_t> order(curve.snr_db.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return curve.snr_db[a] < curve.snr_db[b];
    });

    std::optional<double> threshold;
    for (auto i = order.size(); i-- > 0;) {
        const auto s = order[i];
        const double mse = curve.cells[mi][s].mse;
        const double limit = factor * curve.crlb_model1[s];
        if (std::isnan(mse) || !(mse <= limit)) break;
        threshold = curve.snr_db[s];
    }
    return threshold;
}

void request_stop() { g_stop.store(true); }
void reset_stop() { g_stop.store(false); }
bool stop_requested() { return g_stop.load(); }

}  // namespace ppt
