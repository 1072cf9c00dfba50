#include "ppt/bounds.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace ppt {
namespace {

constexpr double kConditionLimit = 1e12;

void require_positive_sigma2(double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("fim: sigma2 must be positive");
}

// Offset of sample n into the repetition that covers it, and the repetition
// index; pulses clipped by the window edges are still covered.
struct Covering {
    double u;
    long long k;
};

Covering covering_offset(double t, double T) {
    double k = std::floor(t / T);
    double u = t - k * T;
    if (u < 0.0) {  // guard fp edge when t/T is a hair below an integer
        u += T;
        k -= 1.0;
    }
    return {u, static_cast<long long>(k)};
}

}  // namespace

PulseStats pulse_stats(const PulseShape& pulse) {
    PulseStats st;
    for (std::size_t n = 0; n < pulse.samples.size(); ++n) {
        st.energy += pulse.samples[n] * pulse.samples[n];
        st.deriv_energy += pulse.deriv_samples[n] * pulse.deriv_samples[n];
        st.cross += pulse.deriv_samples[n] * pulse.samples[n];
    }
    if (!(st.energy > 0.0)) throw std::invalid_argument("pulse_stats: zero-energy pulse");
    st.msb = st.deriv_energy / st.energy;
    return st;
}

int pulse_count(int N, double Ts, double T) {
    if (!(T > 0.0) || !(Ts > 0.0) || N <= 0) throw std::invalid_argument("pulse_count: bad arguments");
    return static_cast<int>(std::llround(static_cast<double>(N) * Ts / T));
}

FisherInfo fim_known_shape(const PulseTrainParams& p, const PulseShape& pulse,
                           int N, double Ts, double sigma2) {
    validate_params(p, pulse);
    require_positive_sigma2(sigma2);
    FisherInfo fim;
    fim.labels = {"T", "tau0", "A"};
    fim.sigma2 = sigma2;
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    for (int n = 0; n < N; ++n) {
        const auto cov = covering_offset(n * Ts - p.tau0, p.T);
        if (cov.u >= pulse.Tp) continue;
        const double s = pulse.value_at(cov.u);
        const double ds = pulse.deriv_at(cov.u);
        Eigen::Vector3d g;
        g << -p.A * ds * static_cast<double>(cov.k), -p.A * ds, s;
        M.noalias() += g * g.transpose();
    }
    fim.matrix = M / sigma2;
    return fim;
}

FisherInfo fim_unknown_shape(const PulseTrainParams& p, const PulseShape& pulse,
                             int N, double Ts, double sigma2) {
    validate_params(p, pulse);
    require_positive_sigma2(sigma2);
    const int Np = pulse.length();
    const int dim = Np + 2;
    FisherInfo fim;
    fim.labels.reserve(dim);
    fim.labels = {"T", "tau0"};
    for (int a = 0; a < Np; ++a) fim.labels.push_back("s_p[" + std::to_string(a) + "]");
    fim.sigma2 = sigma2;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
    for (int n = 0; n < N; ++n) {
        const auto cov = covering_offset(n * Ts - p.tau0, p.T);
        // T and tau0 rows use the continuous pulse slope; the shape rows use
        // the sample-and-hold expansion, one unit indicator per sample cell.
        const double ds = cov.u < pulse.Tp ? pulse.deriv_at(cov.u) : 0.0;
        const double gT = -ds * static_cast<double>(cov.k);
        const double gt = -ds;
        const auto cell = static_cast<long long>(std::floor(cov.u / Ts));
        const bool in_cell = cell >= 0 && cell < Np;
        M(0, 0) += gT * gT;
        M(0, 1) += gT * gt;
        M(1, 1) += gt * gt;
        if (in_cell) {
            const auto a = static_cast<int>(cell);
            M(0, 2 + a) += gT;
            M(1, 2 + a) += gt;
            M(2 + a, 2 + a) += 1.0;
        }
    }
    M(1, 0) = M(0, 1);
    for (int a = 0; a < Np; ++a) {
        M(2 + a, 0) = M(0, 2 + a);
        M(2 + a, 1) = M(1, 2 + a);
    }
    fim.matrix = M / sigma2;
    return fim;
}

FisherInfo fim_known_shape_closed(const PulseShape& pulse, int K, double A, double sigma2) {
    require_positive_sigma2(sigma2);
    if (K < 1) throw std::invalid_argument("fim: K must be >= 1");
    const PulseStats st = pulse_stats(pulse);
    const double Kd = K;
    const double sum_k = (Kd * Kd - Kd) / 2.0;                        // 0 + 1 + ... + K-1
    const double sum_k2 = (2.0 * Kd * Kd * Kd - 3.0 * Kd * Kd + Kd) / 6.0;
    FisherInfo fim;
    fim.labels = {"T", "tau0", "A"};
    fim.sigma2 = sigma2;
    Eigen::Matrix3d M;
    M << A * A * sum_k2 * st.deriv_energy, A * A * sum_k * st.deriv_energy,
        -A * sum_k * st.cross,
        A * A * sum_k * st.deriv_energy, A * A * Kd * st.deriv_energy, -A * Kd * st.cross,
        -A * sum_k * st.cross, -A * Kd * st.cross, Kd * st.energy;
    fim.matrix = M / sigma2;
    return fim;
}

FisherInfo fim_unknown_shape_closed(const PulseShape& pulse, int K, double sigma2) {
    require_positive_sigma2(sigma2);
    if (K < 1) throw std::invalid_argument("fim: K must be >= 1");
    const int Np = pulse.length();
    const int dim = Np + 2;
    const double Kd = K;
    const double sum_k = (Kd * Kd - Kd) / 2.0;
    const double sum_k2 = (2.0 * Kd * Kd * Kd - 3.0 * Kd * Kd + Kd) / 6.0;
    const PulseStats st = pulse_stats(pulse);
    FisherInfo fim;
    fim.labels = {"T", "tau0"};
    for (int a = 0; a < Np; ++a) fim.labels.push_back("s_p[" + std::to_string(a) + "]");
    fim.sigma2 = sigma2;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
    M(0, 0) = sum_k2 * st.deriv_energy;
    M(0, 1) = M(1, 0) = sum_k * st.deriv_energy;
    M(1, 1) = Kd * st.deriv_energy;
    for (int a = 0; a < Np; ++a) {
        const double d = pulse.deriv_samples[a];
        M(0, 2 + a) = M(2 + a, 0) = -sum_k * d;
        M(1, 2 + a) = M(2 + a, 1) = -Kd * d;
        M(2 + a, 2 + a) = Kd;
    }
    fim.matrix = M / sigma2;
    return fim;
}

PeriodCrlb crlb_period_known_shape(const PulseShape& pulse, int K, double A,
                                   double sigma2, int N, double Ts, double T) {
    if (K < 2) throw std::invalid_argument("crlb_period_known_shape: K < 2");
    if (!(A != 0.0)) throw std::invalid_argument("crlb_period_known_shape: A must be nonzero");
    require_positive_sigma2(sigma2);
    const PulseStats st = pulse_stats(pulse);
    if (!(st.deriv_energy > 0.0))
        throw std::invalid_argument("crlb_period_known_shape: flat pulse");
    const double Kd = K;
    PeriodCrlb b;
    b.exact = 12.0 * sigma2 / ((Kd * Kd * Kd - Kd) * A * A * st.deriv_energy);
    const double Nd = N;
    b.approx = 12.0 * T * T * T * sigma2 /
               (Nd * Nd * Nd * Ts * Ts * Ts * A * A * st.energy * st.msb);
    return b;
}

MultiharmonicCrlb crlb_multiharmonic(const std::vector<double>& amps, int N,
                                     double sigma2, double T, double Ts) {
    if (amps.empty()) throw std::invalid_argument("crlb_multiharmonic: empty amplitude list");
    require_positive_sigma2(sigma2);
    double weight = 0.0;
    for (std::size_t k = 0; k < amps.size(); ++k) {
        const double kk = static_cast<double>(k + 1);
        weight += kk * kk * amps[k] * amps[k];
    }
    if (!(weight > 0.0)) throw std::invalid_argument("crlb_multiharmonic: zero harmonic weight");
    const double Nd = N;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    MultiharmonicCrlb b;
    b.var_psi = 6.0 * sigma2 / (Nd * (Nd * Nd - 1.0) * pi2 * weight);
    b.var_T = b.var_psi * (T * T / Ts) * (T * T / Ts);
    return b;
}

std::vector<double> harmonic_amplitudes(const PulseShape& pulse, double A, double T) {
    if (!(T > 0.0)) throw std::invalid_argument("harmonic_amplitudes: T must be positive");
    const int k_max = static_cast<int>(std::floor(T / (2.0 * pulse.Ts))) - 1;
    std::vector<double> amps;
    amps.reserve(std::max(k_max, 0));
    for (int k = 1; k <= k_max; ++k) {
        const double f = static_cast<double>(k) / T;
        std::complex<double> S{0.0, 0.0};
        for (std::size_t n = 0; n < pulse.samples.size(); ++n) {
            const double ph = -2.0 * std::numbers::pi * f * static_cast<double>(n) * pulse.Ts;
            S += pulse.samples[n] * std::polar(1.0, ph);
        }
        S *= pulse.Ts;
        amps.push_back(2.0 * A / T * std::abs(S));
    }
    return amps;
}

double default_ridge(const FisherInfo& fim) {
    return 1e-8 * fim.matrix.trace() / static_cast<double>(fim.matrix.rows());
}

Eigen::MatrixXd regularized_covariance(const FisherInfo& fim, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("regularized_covariance: lambda must be >= 0");
    const auto dim = fim.matrix.rows();
    Eigen::MatrixXd M = fim.matrix;
    if (lambda > 0.0) M += lambda * Eigen::MatrixXd::Identity(dim, dim);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kConditionLimit)
        throw std::domain_error("regularized_covariance: matrix is singular to working precision");
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

SingularityDiagnostic singularity_diagnostic(const FisherInfo& fim, const PulseShape& pulse) {
    const auto dim = fim.matrix.rows();
    if (dim != pulse.length() + 2)
        throw std::invalid_argument("singularity_diagnostic: matrix/pulse size mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fim.matrix, Eigen::EigenvaluesOnly);
    SingularityDiagnostic d;
    d.min_eig = es.eigenvalues().minCoeff();
    d.max_eig = es.eigenvalues().maxCoeff();
    Eigen::VectorXd u(dim);
    u(0) = 0.0;
    u(1) = 1.0;
    for (int a = 0; a < pulse.length(); ++a) u(2 + a) = pulse.deriv_samples[a];
    const double mn = fim.matrix.norm();
    const double un = u.norm();
    d.null_residual = (fim.matrix * u).norm() / (mn * un);
    return d;
}

}  // namespace ppt
