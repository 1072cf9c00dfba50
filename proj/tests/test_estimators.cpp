#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ppt/estimators.hpp"
#include "ppt/signal_model.hpp"

using namespace ppt;

namespace {

// Direct-evaluation references: no FFTs, no shared work, just the definitions.
int fold_count_ref(int N, int Np, long long P, long long n0) {
    if (n0 > N - Np) return 0;
    return static_cast<int>((N - Np - n0) / P) + 1;
}

double dense_ppks_cost(const std::vector<double>& x, const std::vector<double>& tpl,
                       long long P, long long n0) {
    const int N = static_cast<int>(x.size());
    const int Np = static_cast<int>(tpl.size());
    const int Kf = fold_count_ref(N, Np, P, n0);
    if (Kf < 1) return std::numeric_limits<double>::quiet_NaN();
    double E = 0.0;
    for (double v : tpl) E += v * v;
    double S = 0.0, H2 = Kf * E;
    for (int k = 0; k < Kf; ++k)
        for (int j = 0; j < Np; ++j) S += x[n0 + k * P + j] * tpl[j];
    const long long a = P - n0;  // leading copy clipped by the window start
    for (int j = static_cast<int>(a); j < Np; ++j) {
        S += x[j - a] * tpl[j];
        H2 += tpl[j] * tpl[j];
    }
    const long long m = n0 + static_cast<long long>(Kf) * P;  // trailing copy
    for (int j = 0; m + j < N && j < Np; ++j) {
        S += x[m + j] * tpl[j];
        H2 += tpl[j] * tpl[j];
    }
    return S * S / H2;
}

double dense_ppus_cost(const std::vector<double>& x, int Np, long long P, long long n0) {
    const int N = static_cast<int>(x.size());
    const int Kf = fold_count_ref(N, Np, P, n0);
    if (Kf < 1) return std::numeric_limits<double>::quiet_NaN();
    const long long a = P - n0;
    const long long m = n0 + static_cast<long long>(Kf) * P;
    double J = 0.0;
    for (int j = 0; j < Np; ++j) {
        double G = 0.0;
        int kj = Kf;
        for (int k = 0; k < Kf; ++k) G += x[n0 + k * P + j];
        if (j >= a) {
            G += x[j - a];
            ++kj;
        }
        if (m + j < N) {
            G += x[m + j];
            ++kj;
        }
        J += G * G / kj;
    }
    return J;
}

struct DenseBest {
    long long P = 0, n0 = -1;
    double J = -1.0;
};

template <typename CostFn>
DenseBest dense_argmax(const GridSpec& grid, CostFn cost) {
    DenseBest best;
    for (long long P = grid.P_min; P <= grid.P_max; ++P) {
        for (long long n0 = 0; n0 < P; ++n0) {
            const double J = cost(P, n0);
            if (std::isnan(J)) continue;
            if (J > best.J) best = {P, n0, J};
        }
    }
    return best;
}

Measurement wrap(std::vector<double> x) {
    Measurement m;
    m.x = std::move(x);
    m.Ts = 1.0;
    return m;
}

}  // namespace

TEST_CASE("make_psi_grid covers the period range with bin frequencies") {
    const auto g = make_psi_grid(4.0, 8.0, 1.0, 64);
    REQUIRE(g.size() == 9);  // bins 8..16 of a 64-point grid
    CHECK(g.front() == doctest::Approx(8.0 / 64.0));
    CHECK(g.back() == doctest::Approx(16.0 / 64.0));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
    CHECK_THROWS_AS(make_psi_grid(0.0, 8.0, 1.0, 64), std::invalid_argument);
    CHECK_THROWS_AS(make_psi_grid(8.0, 4.0, 1.0, 64), std::invalid_argument);
}

TEST_CASE("method names round-trip and accept the anls alias") {
    for (Method m : {Method::ppks, Method::ppus, Method::mhus_ml, Method::mhus_anls}) {
        const auto back = method_from_name(method_name(m));
        REQUIRE(back.has_value());
        CHECK(*back == m);
    }
    CHECK(method_from_name("anls") == Method::mhus_anls);
    CHECK_FALSE(method_from_name("nope").has_value());
}

TEST_CASE("comb searches equal dense evaluation on random small instances") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> pick_N(24, 64);
    int embedded = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int N = pick_N(rng);
        std::uniform_int_distribution<int> pick_Pmin(6, 9);
        const int P_min = pick_Pmin(rng);
        const int P_max = std::min(N / 2, P_min + 8);
        std::uniform_int_distribution<int> pick_Np(3, P_min);
        const int Np = pick_Np(rng);

        std::vector<double> tpl(Np);
        double E = 0.0;
        for (auto& v : tpl) {
            v = gauss(rng);
            E += v * v;
        }
        if (E < 1e-6) tpl[0] += 1.0;

        std::vector<double> x(N);
        for (auto& v : x) v = gauss(rng);
        if (trial % 3 == 0) {  // sometimes embed an actual train
            std::uniform_int_distribution<int> pick_P(P_min, P_max);
            const int P = pick_P(rng);
            std::uniform_int_distribution<int> pick_n0(0, P - 1);
            const int n0 = pick_n0(rng);
            for (int k = 0;; ++k) {
                const long long s = n0 + static_cast<long long>(k) * P;
                if (s + Np > N) break;
                for (int j = 0; j < Np; ++j) x[s + j] += 3.0 * tpl[j];
            }
            ++embedded;
        }

        GridSpec grid;
        grid.P_min = P_min;
        grid.P_max = P_max;
        const auto meas = wrap(x);
        const auto tpl_shape = make_tabulated_pulse(tpl, static_cast<double>(Np), 1.0);

        const auto fast_ks = ppks(meas, tpl_shape, grid);
        const auto dense_ks = dense_argmax(
            grid, [&](long long P, long long n0) { return dense_ppks_cost(x, tpl, P, n0); });
        CHECK(fast_ks.P_hat == dense_ks.P);
        CHECK(fast_ks.n0_hat == dense_ks.n0);
        CHECK(fast_ks.cost == doctest::Approx(dense_ks.J).epsilon(1e-9));

        const auto fast_us = ppus(meas, Np, grid);
        const auto dense_us = dense_argmax(
            grid, [&](long long P, long long n0) { return dense_ppus_cost(x, Np, P, n0); });
        CHECK(fast_us.P_hat == dense_us.P);
        CHECK(fast_us.n0_hat == dense_us.n0);
        CHECK(fast_us.cost == doctest::Approx(dense_us.J).epsilon(1e-9));
    }
    CHECK(embedded > 50);
}

TEST_CASE("free-shape projection dominates the known-shape projection cellwise") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> x(96);
    for (auto& v : x) v = gauss(rng);
    std::vector<double> tpl = {0.4, 1.0, 0.7, 0.2};
    GridSpec grid;
    grid.P_min = 8;
    grid.P_max = 20;
    CostSurface s_ks, s_us;
    ppks(wrap(x), make_tabulated_pulse(tpl, 4.0, 1.0), grid, &s_ks);
    ppus(wrap(x), 4, grid, &s_us);
    REQUIRE(s_ks.rows.size() == s_us.rows.size());
    int compared = 0;
    for (std::size_t r = 0; r < s_ks.rows.size(); ++r) {
        REQUIRE(s_ks.rows[r].size() == s_us.rows[r].size());
        for (std::size_t c = 0; c < s_ks.rows[r].size(); ++c) {
            const double a = s_ks.rows[r][c], b = s_us.rows[r][c];
            CHECK(std::isnan(a) == std::isnan(b));
            if (std::isnan(a)) continue;
            CHECK(b >= a - 1e-9);
            ++compared;
        }
    }
    CHECK(compared > 100);
}

TEST_CASE("noiseless on-grid recovery is exact for both comb methods") {
    const auto pulse = make_gaussian_pulse(20.0, 1.0);
    PulseTrainParams p;
    p.T = 500.0;
    p.tau0 = 123.0;
    p.A = 1.0;
    const auto clean = synthesize(p, pulse, 4096, 1.0);
    const auto meas = add_noise(clean, 1.0, 0.0, 1, p);
    GridSpec grid;
    grid.P_min = 475;
    grid.P_max = 525;

    const auto ks = ppks(meas, pulse, grid);
    CHECK(ks.P_hat == 500);
    CHECK(ks.n0_hat == 123);
    CHECK(ks.T_hat == doctest::Approx(500.0).epsilon(1e-12));
    REQUIRE(ks.nuisance.size() == 1);
    CHECK(ks.nuisance[0] == doctest::Approx(1.0).epsilon(1e-9));

    const auto us = ppus(meas, pulse.length(), grid);
    CHECK(us.P_hat == 500);
    CHECK(us.n0_hat == 123);
    REQUIRE(static_cast<int>(us.nuisance.size()) == pulse.length());
    for (int j = 0; j < pulse.length(); ++j)
        CHECK(us.nuisance[j] == doctest::Approx(pulse.samples[j]).epsilon(1e-9));
}

TEST_CASE("sub-grid refinement resolves an off-grid period") {
    const auto pulse = make_gaussian_pulse(20.0, 1.0);
    PulseTrainParams p;
    p.T = 500.3;
    p.tau0 = 77.7;
    p.A = 1.0;
    const auto clean = synthesize(p, pulse, 4096, 1.0);
    const auto meas = add_noise(clean, 1.0, 0.0, 1, p);
    const int P_R = 10;
    GridSpec grid;
    grid.P_min = 475 * P_R;
    grid.P_max = 525 * P_R;

    const auto ks = estimate_with_subgrid(meas, Method::ppks, P_R, grid, &pulse, 0);
    CHECK(std::abs(ks.T_hat - 500.3) <= 0.05);
    const auto us =
        estimate_with_subgrid(meas, Method::ppus, P_R, grid, nullptr, pulse.length());
    CHECK(std::abs(us.T_hat - 500.3) <= 0.05);

    // the coarse search cannot do better than the nearest integer
    GridSpec coarse;
    coarse.P_min = 475;
    coarse.P_max = 525;
    const auto c = ppks(meas, pulse, coarse);
    CHECK(std::abs(c.T_hat - 500.3) >= 0.2);
}

TEST_CASE("harmonic least squares finds an exact-bin tone with amplitude and phase") {
    const int N = 1024, fft = 4096;
    const double psi0 = 1.0 / 64.0, amp = 2.0, phase = 0.3;
    std::vector<double> x(N);
    for (int n = 0; n < N; ++n) x[n] = amp * std::cos(2.0 * M_PI * psi0 * n + phase);
    GridSpec grid;
    grid.fft_size = fft;
    grid.psi_grid = make_psi_grid(32.0, 128.0, 1.0, fft);

    const auto est = mhus_ml(wrap(x), 1, grid);
    CHECK(est.T_hat == doctest::Approx(64.0).epsilon(1e-9));
    REQUIRE(est.nuisance.size() == 2);
    CHECK(est.nuisance[0] == doctest::Approx(amp).epsilon(1e-6));
    CHECK(std::abs(std::remainder(est.nuisance[1] - phase, 2.0 * M_PI)) < 1e-6);
}

TEST_CASE("harmonic summation finds the same tone") {
    const int N = 1024, fft = 4096;
    const double psi0 = 1.0 / 64.0, amp = 2.0;
    std::vector<double> x(N);
    for (int n = 0; n < N; ++n) x[n] = amp * std::cos(2.0 * M_PI * psi0 * n + 0.9);
    GridSpec grid;
    grid.fft_size = fft;
    grid.psi_grid = make_psi_grid(32.0, 128.0, 1.0, fft);

    const auto est = mhus_anls(wrap(x), 1, grid);
    CHECK(est.T_hat == doctest::Approx(64.0).epsilon(1e-9));
    REQUIRE(est.nuisance.size() == 2);
    CHECK(est.nuisance[0] == doctest::Approx(amp).epsilon(1e-6));
    CHECK(std::abs(std::remainder(est.nuisance[1] - 0.9, 2.0 * M_PI)) < 1e-6);
}

TEST_CASE("harmonic methods agree with the comb methods on a noiseless train") {
    const auto pulse = make_gaussian_pulse(20.0, 1.0);
    PulseTrainParams p;
    p.T = 512.0;
    p.tau0 = 40.0;
    p.A = 1.0;
    const auto clean = synthesize(p, pulse, 4096, 1.0);
    const auto meas = add_noise(clean, 1.0, 0.0, 1, p);
    GridSpec grid;
    grid.fft_size = 1 << 20;
    grid.psi_grid = make_psi_grid(475.0, 525.0, 1.0, grid.fft_size);
    const int Kh = select_model_order(meas, 60, grid);
    CHECK(Kh >= 5);  // a narrow pulse train is harmonically rich
    const auto ml = mhus_ml(meas, Kh, grid);
    const auto an = mhus_anls(meas, Kh, grid);
    CHECK(std::abs(ml.T_hat - 512.0) < 0.3);
    CHECK(std::abs(an.T_hat - 512.0) < 0.3);
}

TEST_CASE("model-order selection keeps a single harmonic for a pure tone") {
    const int N = 1024, fft = 4096;
    std::vector<double> x(N);
    for (int n = 0; n < N; ++n) x[n] = std::cos(2.0 * M_PI * n / 64.0);
    GridSpec grid;
    grid.fft_size = fft;
    grid.psi_grid = make_psi_grid(32.0, 128.0, 1.0, fft);
    CHECK(select_model_order(wrap(x), 10, grid) == 1);
}

TEST_CASE("model-order selection respects the cap and the band limit") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> x(1024);
    for (auto& v : x) v = gauss(rng);
    GridSpec grid;
    grid.fft_size = 4096;
    grid.psi_grid = make_psi_grid(32.0, 128.0, 1.0, 4096);
    const int Kh = select_model_order(wrap(x), 60, grid);
    CHECK(Kh >= 1);
    // psi_max = 1/32, so at most floor(0.45 * 32) = 14 harmonics fit the band
    CHECK(Kh <= 14);
    CHECK(select_model_order(wrap(x), 3, grid) <= 3);
}

TEST_CASE("recover_pulse averages the folds") {
    const auto pulse = make_gaussian_pulse(20.0, 1.0);
    PulseTrainParams p;
    p.T = 512.0;
    p.tau0 = 64.0;
    p.A = 1.0;
    const auto clean = synthesize(p, pulse, 4096, 1.0);

    const auto exact = recover_pulse(add_noise(clean, 1.0, 0.0, 1), 512, 64, 20);
    REQUIRE(static_cast<int>(exact.size()) == 20);
    for (int j = 0; j < 20; ++j)
        CHECK(exact[j] == doctest::Approx(pulse.samples[j]).epsilon(1e-12));

    // with unit noise and 8 folds the per-sample deviation variance is ~1/8
    const auto noisy = recover_pulse(add_noise(clean, 1.0, 1.0, 99), 512, 64, 20);
    double msd = 0.0;
    for (int j = 0; j < 20; ++j)
        msd += (noisy[j] - pulse.samples[j]) * (noisy[j] - pulse.samples[j]);
    msd /= 20.0;
    CHECK(msd > 0.03);
    CHECK(msd < 0.30);
}

TEST_CASE("grid and argument validation") {
    std::vector<double> x(64, 1.0);
    const auto meas = wrap(x);
    const auto tpl = make_tabulated_pulse({1.0, 0.5, 0.2}, 3.0, 1.0);

    GridSpec bad;
    bad.P_min = 1;
    bad.P_max = 4;
    CHECK_THROWS_AS(ppks(meas, tpl, bad), std::invalid_argument);
    CHECK_THROWS_AS(ppus(meas, 3, bad), std::invalid_argument);

    GridSpec tight;
    tight.P_min = 2;
    tight.P_max = 4;
    CHECK_THROWS_AS(ppks(meas, tpl, tight), std::invalid_argument);  // Np > P_min
    CHECK_THROWS_AS(ppus(meas, 5, tight), std::invalid_argument);
    CHECK_THROWS_AS(ppus(meas, 0, tight), std::invalid_argument);

    GridSpec psi_bad;
    psi_bad.fft_size = 128;
    psi_bad.psi_grid = {0.6};
    CHECK_THROWS_AS(mhus_anls(meas, 1, psi_bad), std::invalid_argument);

    GridSpec fft_small;
    fft_small.fft_size = 32;  // smaller than the signal
    fft_small.psi_grid = {0.1};
    CHECK_THROWS_AS(mhus_anls(meas, 1, fft_small), std::invalid_argument);

    GridSpec ok;
    ok.fft_size = 256;
    ok.psi_grid = {0.1, 0.2};
    CHECK_THROWS_AS(mhus_anls(meas, 0, ok), std::invalid_argument);
    CHECK_THROWS_AS(select_model_order(meas, 0, ok), std::invalid_argument);

    CHECK_THROWS_AS(recover_pulse(meas, 10, 60, 8), std::invalid_argument);
    CHECK_THROWS_AS(recover_pulse(meas, 10, -1, 4), std::invalid_argument);
    CHECK_THROWS_AS(estimate_with_subgrid(meas, Method::mhus_ml, 2, ok, nullptr, 4),
                    std::invalid_argument);
}

TEST_CASE("comb ties resolve to the smallest period, then the smallest onset") {
    // a constant signal makes many (P, n0) cells exactly tied
    std::vector<double> x(60, 1.0);
    GridSpec grid;
    grid.P_min = 10;
    grid.P_max = 20;
    const auto us = ppus(wrap(x), 2, grid);
    CHECK(us.P_hat == 10);
    CHECK(us.n0_hat == 0);
}

TEST_CASE("single-fold candidates sharing a window tie toward the smaller period") {
    // With N = 26 and Np = 8, both P = 17 and P = 18 fit exactly one copy at
    // n0 = 9 and neither period leaves room for a clipped copy at either edge,
    // so both costs are the energy of the same window x[9..16]. The costs must
    // come out bit-identical so the smaller period wins.
    std::vector<double> x(26);
    for (int i = 0; i < 26; ++i) x[i] = 0.013 * (i + 1);
    const double bump[8] = {5.0, 6.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0};
    for (int j = 0; j < 8; ++j) x[9 + j] += bump[j];
    GridSpec grid;
    grid.P_min = 17;
    grid.P_max = 18;
    const auto us = ppus(wrap(x), 8, grid);
    CHECK(us.P_hat == 17);
    CHECK(us.n0_hat == 9);

    CostSurface s;
    (void)ppus(wrap(x), 8, grid, &s);
    CHECK(s.rows[0][9] == s.rows[1][9]);  // same window, same bits
}

TEST_CASE("comb costs credit copies clipped by the window edges") {
    // Place a train so that one copy hangs off each end of the window. The
    // searches should still locate it, and the winning cost should equal the
    // dense evaluation that folds the clipped copies in.
    const std::vector<double> tpl = {1.0, 2.0, 3.0, 2.0, 1.0, 0.5};
    const int Np = 6, N = 38, P = 12, n0 = 10;
    std::vector<double> x(N, 0.0);
    for (int k = -1; k <= 2; ++k) {
        const long long s = n0 + static_cast<long long>(k) * P;
        for (int j = 0; j < Np; ++j)
            if (s + j >= 0 && s + j < N) x[s + j] += tpl[j];
    }
    // sanity: the k = -1 copy contributes only x[0..3] and the k = 2 copy
    // only x[34..37]; k = 0 and k = 1 are the two complete copies
    REQUIRE(x[0] == doctest::Approx(tpl[2]));
    REQUIRE(x[37] == doctest::Approx(tpl[3]));

    GridSpec grid;
    grid.P_min = 8;
    grid.P_max = 16;
    const auto meas = wrap(x);
    const auto shape = make_tabulated_pulse(tpl, static_cast<double>(Np), 1.0);

    const auto ks = ppks(meas, shape, grid);
    CHECK(ks.P_hat == P);
    CHECK(ks.n0_hat == n0);
    REQUIRE(ks.nuisance.size() == 1);
    CHECK(ks.nuisance[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ks.cost == doctest::Approx(dense_ppks_cost(x, tpl, P, n0)).epsilon(1e-12));

    const auto us = ppus(meas, Np, grid);
    CHECK(us.P_hat == P);
    CHECK(us.n0_hat == n0);
    CHECK(us.cost == doctest::Approx(dense_ppus_cost(x, Np, P, n0)).epsilon(1e-12));
    REQUIRE(static_cast<int>(us.nuisance.size()) == Np);
    for (int j = 0; j < Np; ++j)
        CHECK(us.nuisance[j] == doctest::Approx(tpl[j]).epsilon(1e-12));
}
