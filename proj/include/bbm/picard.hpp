#pragma once

// Closed-form evaluation of the explicitly computable stochastic objects:
// oscillatory phase integrals, the second Picard iterate and its divergent
// (unrenormalized) sibling, the limiting stochastic convolution, finite-N and
// limiting covariances, partial sums of the covariance constant, the chaos
// kernel and its one-contraction norm, and the quadratic objects of the
// noise-forced variants.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbm/random.hpp"
#include "bbm/spectral.hpp"

namespace bbm {

// ---------------------------------------------------------------------------
// Phase integral J_{n1,n2}(t) = int_0^t exp(-t' (phi(n1+n2)-phi(n1)-phi(n2))) dt'
// ---------------------------------------------------------------------------

// The exponent Delta is purely imaginary, so |J| <= t always. Near resonance
// (|t Delta| < 1e-6) the closed form loses digits and a 4-term Taylor series
// is used instead; its relative error at the threshold is far below 1e-20.
inline cd phase_integral(long long n1, long long n2, double t) {
    if (t < 0.0) throw std::invalid_argument("phase_integral: t must be >= 0");
    const cd delta = phi_symbol(n1 + n2) - phi_symbol(n1) - phi_symbol(n2);
    const cd x = t * delta;
    if (std::abs(x) < 1e-6) {
        return t * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
    }
    return (1.0 - std::exp(-x)) / delta;
}

// ---------------------------------------------------------------------------
// Second Picard iterate
// ---------------------------------------------------------------------------

// Zhat_N(t,n) = C^2 e^{t phi(n)} phi(n)
//   * sum_{n=n1+n2, |n1|,|n2|<=N} J_{n1,n2}(t) g_{n1} g_{n2} <n1>^-a <n2>^-a.
// Mode 0 vanishes identically. Direct O(N^2) double loop over the upper half,
// mirrored by Hermitian symmetry.
inline SpectralField second_iterate(const GridSpec& grid, const GaussianCoefficients& g,
                                    double alpha, int N, double t) {
    if (t < 0.0) throw std::invalid_argument("second_iterate: t must be >= 0");
    if (N > g.mode_bound) throw std::invalid_argument("second_iterate: draw does not cover N");
    if (grid.mode_bound < 2 * N)
        throw std::invalid_argument("second_iterate: grid too small to hold modes up to 2N");
    const double c2 = std::pow(renorm_constant(alpha, N), 2.0);
    std::vector<double> w(static_cast<std::size_t>(2 * N + 1));
    for (int k = -N; k <= N; ++k)
        w[static_cast<std::size_t>(k + N)] =
            std::pow(japanese_bracket(static_cast<double>(k)), -alpha);

    SpectralField out(grid);
    for (int n = 1; n <= 2 * N; ++n) {
        cd acc(0.0, 0.0);
        const int lo = std::max(-N, n - N);
        const int hi = std::min(N, n + N);
        for (int n1 = lo; n1 <= hi; ++n1) {
            const int n2 = n - n1;
            acc += phase_integral(n1, n2, t) * g.value(n1) * g.value(n2) *
                   w[static_cast<std::size_t>(n1 + N)] * w[static_cast<std::size_t>(n2 + N)];
        }
        const cd pre = c2 * std::exp(t * phi_symbol(n)) * phi_symbol(n);
        out.set_mode_pair(n, pre * acc);
    }
    return out;
}

// <Z_N(t), psi> without materializing the full field: only the modes in the
// support of psi-hat are assembled. Identical to pairing(second_iterate(...))
// and O(N * support) per call.
inline double second_iterate_pairing(const GaussianCoefficients& g, double alpha, int N, double t,
                                     const TestFunction& psi) {
    if (t < 0.0) throw std::invalid_argument("second_iterate_pairing: t must be >= 0");
    if (N > g.mode_bound)
        throw std::invalid_argument("second_iterate_pairing: draw does not cover N");
    const double c2 = std::pow(renorm_constant(alpha, N), 2.0);
    long double acc = 0.0L;
    const int mb = std::min(psi.mode_bound(), 2 * N);
    for (int n = 1; n <= mb; ++n) {
        const cd ph = psi.coeff(n);
        if (ph == cd(0.0, 0.0)) continue;
        cd z(0.0, 0.0);
        const int lo = std::max(-N, n - N);
        const int hi = std::min(N, n + N);
        for (int n1 = lo; n1 <= hi; ++n1) {
            const int n2 = n - n1;
            z += phase_integral(n1, n2, t) * g.value(n1) * g.value(n2) *
                 std::pow(japanese_bracket(static_cast<double>(n1)), -alpha) *
                 std::pow(japanese_bracket(static_cast<double>(n2)), -alpha);
        }
        z *= c2 * std::exp(t * phi_symbol(n)) * phi_symbol(n);
        // +-n pair of a Hermitian field against a Hermitian test function
        acc += 2.0L * (z * std::conj(ph)).real();
    }
    return static_cast<double>(acc);
}

// Unrenormalized truncated iterate: C^{-2}_{alpha,N} * Z_N. Its tested
// variance diverges as N grows for alpha <= 1/4.
inline SpectralField divergent_iterate(const GridSpec& grid, const GaussianCoefficients& g,
                                       double alpha, int N, double t) {
    SpectralField out = second_iterate(grid, g, alpha, N, t);
    const double s = std::pow(renorm_constant(alpha, N), -2.0);
    for (auto& v : out.data()) v *= s;
    return out;
}

// ---------------------------------------------------------------------------
// Limit process Z and covariances
// ---------------------------------------------------------------------------

// Z(t) = -int_0^t S(t-t') phi(D) zeta dt' has the closed per-mode form
// Zhat(t,n) = zetahat(n) (1 - e^{t phi(n)}); the zero mode vanishes.
inline SpectralField limit_convolution(const SpectralField& zeta, double t) {
    if (t < 0.0) throw std::invalid_argument("limit_convolution: t must be >= 0");
    SpectralField out(zeta.grid());
    for (int n = 1; n <= zeta.mode_bound(); ++n)
        out.set_mode_pair(n, zeta.coeff(n) * (1.0 - std::exp(t * phi_symbol(n))));
    return out;
}

// E[Zhat_N(t1,n) conj(Zhat_N(t2,n))]; the double time integral separates into
// e^{(t1-t2) phi(n)} J_{n1,n2}(t1) conj(J_{n1,n2}(t2)) per pair, so the cost
// is O(N) per call.
inline cd covariance_finite(double alpha, int N, double t1, double t2, long long n) {
    if (t1 < 0.0 || t2 < 0.0) throw std::invalid_argument("covariance_finite: times must be >= 0");
    if (n == 0) return cd(0.0, 0.0);
    const long long lo = std::max<long long>(-N, n - N);
    const long long hi = std::min<long long>(N, n + N);
    cd acc(0.0, 0.0);
    for (long long n1 = lo; n1 <= hi; ++n1) {
        const long long n2 = n - n1;
        const double w = std::pow(japanese_bracket(static_cast<double>(n1)), -2.0 * alpha) *
                         std::pow(japanese_bracket(static_cast<double>(n2)), -2.0 * alpha);
        acc += phase_integral(n1, n2, t1) * std::conj(phase_integral(n1, n2, t2)) * w;
    }
    const double c4 = 1.0 / renorm_sum_inv4(alpha, N);
    return 2.0 * c4 * std::norm(phi_symbol(n)) * std::exp((t1 - t2) * phi_symbol(n)) * acc;
}

// E[<Z_N(t1), psi1> <Z_N(t2), psi2>] assembled mode-wise.
inline double covariance_finite_pairing(double alpha, int N, double t1, double t2,
                                        const TestFunction& psi1, const TestFunction& psi2) {
    const int mb = std::min({psi1.mode_bound(), psi2.mode_bound(), 2 * N});
    cd acc(0.0, 0.0);
    for (int n = -mb; n <= mb; ++n) {
        if (n == 0) continue;
        const cd p = std::conj(psi1.coeff(n)) * psi2.coeff(n);
        if (p == cd(0.0, 0.0)) continue;
        acc += p * covariance_finite(alpha, N, t1, t2, n);
    }
    return acc.real();
}

// Limit covariance E[Zhat(t1,n) conj(Zhat(t2,n))] = (1-e^{t1 phi})(1-e^{-t2 phi}).
inline cd covariance_limit(double t1, double t2, long long n) {
    if (n == 0) return cd(0.0, 0.0);
    const cd p = phi_symbol(n);
    return (1.0 - std::exp(t1 * p)) * (1.0 - std::exp(-t2 * p));
}

inline double covariance_limit_pairing(double t1, double t2, const TestFunction& psi1,
                                       const TestFunction& psi2) {
    const int mb = std::min(psi1.mode_bound(), psi2.mode_bound());
    cd acc(0.0, 0.0);
    for (int n = -mb; n <= mb; ++n) {
        if (n == 0) continue;
        const cd p = std::conj(psi1.coeff(n)) * psi2.coeff(n);
        if (p == cd(0.0, 0.0)) continue;
        acc += p * covariance_limit(t1, t2, n);
    }
    return acc.real();
}

// Partial sum of the covariance constant:
// C^4_{alpha,N} sum_{n=n1+n2, |n1|,|n2|<=N} 2 <n1>^{-2a} <n2>^{-2a}.
// Computed as a ratio of compensated sums; tends to 1 for every n != 0.
inline double c_alpha_partial(double alpha, long long N, long long n) {
    if (n == 0) throw std::invalid_argument("c_alpha_partial: n must be nonzero");
    if (N < std::llabs(n)) throw std::invalid_argument("c_alpha_partial: N must be >= |n|");
    long double sum = 0.0L, comp = 0.0L;
    const long long lo = std::max(-N, n - N);
    const long long hi = std::min(N, n + N);
    for (long long n1 = lo; n1 <= hi; ++n1) {
        const long long n2 = n - n1;
        const long double w1 = std::pow(
            1.0L + static_cast<long double>(n1) * static_cast<long double>(n1),
            static_cast<long double>(-alpha));
        const long double w2 = std::pow(
            1.0L + static_cast<long double>(n2) * static_cast<long double>(n2),
            static_cast<long double>(-alpha));
        const long double term = 2.0L * w1 * w2;
        const long double y = term - comp;
        const long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return static_cast<double>(sum / static_cast<long double>(renorm_sum_inv4(alpha, N)));
}

// ---------------------------------------------------------------------------
// Chaos kernel and contraction
// ---------------------------------------------------------------------------

// The two-variable kernel of <Z_N(t), psi> as a degree-2 chaos element, and
// the Y factors its contraction is assembled from.
struct PicardKernel {
    double alpha = 0.0;
    int N = 0;
    double t = 0.0;
    TestFunction psi;

    // Y_{n,m}(t) = e^{t phi(n+m)} phi(n+m) conj(psihat(n+m)) J_{n,m}(t)
    //             / (<n>^a <m>^a); vanishes when n+m = 0 or psihat(n+m) = 0.
    cd y_factor(int n, int m) const {
        const int s = n + m;
        if (s == 0 || std::abs(s) > psi.mode_bound()) return cd(0.0, 0.0);
        const cd ph = psi.coeff(s);
        if (ph == cd(0.0, 0.0)) return cd(0.0, 0.0);
        return std::exp(t * phi_symbol(s)) * phi_symbol(s) * std::conj(ph) *
               phase_integral(n, m, t) *
               std::pow(japanese_bracket(static_cast<double>(n)), -alpha) *
               std::pow(japanese_bracket(static_cast<double>(m)), -alpha);
    }

    // Kernel Fourier coefficients: fhat(n1,n2) = C^2 Y_{n1,n2} inside the
    // truncation box, zero outside. Symmetric in (n1,n2).
    cd fourier(int n1, int n2) const {
        if (std::abs(n1) > N || std::abs(n2) > N) return cd(0.0, 0.0);
        return std::pow(renorm_constant(alpha, N), 2.0) * y_factor(n1, n2);
    }
};

// Squared L2 norm of the one-contraction of the kernel with itself:
// ||f (x)_1 f||^2 = C^8 sum_{n1,n2} | sum_m Y_{n1,m} conj(Y_{n2,m}) |^2.
// Assembled as the Gram matrix of the Y table (O(N^3) products); its decay
// in N is what drives the Gaussian limit of the pairings.
inline double contraction_norm(double alpha, int N, double t, const TestFunction& psi) {
    PicardKernel ker{alpha, N, t, psi};
    const int d = 2 * N + 1;
    std::vector<cd> y(static_cast<std::size_t>(d) * d);
    for (int i = 0; i < d; ++i)
        for (int m = 0; m < d; ++m)
            y[static_cast<std::size_t>(i) * d + m] = ker.y_factor(i - N, m - N);

    long double total = 0.0L;
    for (int i = 0; i < d; ++i) {
        const cd* row_i = &y[static_cast<std::size_t>(i) * d];
        for (int k = i; k < d; ++k) {
            const cd* row_k = &y[static_cast<std::size_t>(k) * d];
            cd gram(0.0, 0.0);
            for (int m = 0; m < d; ++m) gram += row_i[m] * std::conj(row_k[m]);
            total += (k == i ? 1.0L : 2.0L) * std::norm(gram);
        }
    }
    const double c8 = std::pow(1.0 / renorm_sum_inv4(alpha, N), 2.0);
    return c8 * static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Exact chaos moments of a pairing (enumeration-free oracle)
// ---------------------------------------------------------------------------

// <Z_N(t), psi> is a quadratic form x^T A x in the 2N+1 underlying real
// Gaussians; its exact variance and excess kurtosis follow from traces:
//   Var = 2 tr(A^2),  excess kurtosis = 12 tr(A^4) / tr(A^2)^2.
struct ChaosMoments {
    double variance = 0.0;
    double excess_kurtosis = 0.0;
};

inline ChaosMoments exact_pairing_moments(double alpha, int N, double t,
                                          const TestFunction& psi) {
    PicardKernel ker{alpha, N, t, psi};
    const int d = 2 * N + 1;
    std::vector<cd> m(static_cast<std::size_t>(d) * d);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k)
            m[static_cast<std::size_t>(i) * d + k] = ker.fourier(i - N, k - N);

    // Real coordinates x: x_0 = g_0, x_{2k-1} = a_k, x_{2k} = b_k with
    // g_k = (a_k + i b_k)/sqrt(2). Each coordinate touches at most two modes.
    struct Entry {
        int mode;
        cd weight;
    };
    const double r = 1.0 / std::sqrt(2.0);
    std::vector<std::array<Entry, 2>> coord(static_cast<std::size_t>(d));
    std::vector<int> coord_len(static_cast<std::size_t>(d));
    coord[0] = {Entry{0, cd(1.0, 0.0)}, Entry{0, cd(0.0, 0.0)}};
    coord_len[0] = 1;
    for (int k = 1; k <= N; ++k) {
        coord[static_cast<std::size_t>(2 * k - 1)] = {Entry{k, cd(r, 0.0)},
                                                      Entry{-k, cd(r, 0.0)}};
        coord_len[static_cast<std::size_t>(2 * k - 1)] = 2;
        coord[static_cast<std::size_t>(2 * k)] = {Entry{k, cd(0.0, r)},
                                                  Entry{-k, cd(0.0, -r)}};
        coord_len[static_cast<std::size_t>(2 * k)] = 2;
    }

    std::vector<double> a(static_cast<std::size_t>(d) * d, 0.0);
    for (int j = 0; j < d; ++j) {
        for (int k = j; k < d; ++k) {
            cd b(0.0, 0.0);
            for (int p = 0; p < coord_len[static_cast<std::size_t>(j)]; ++p)
                for (int q = 0; q < coord_len[static_cast<std::size_t>(k)]; ++q) {
                    const Entry& e1 = coord[static_cast<std::size_t>(j)][static_cast<std::size_t>(p)];
                    const Entry& e2 = coord[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)];
                    b += e1.weight * e2.weight *
                         m[static_cast<std::size_t>(e1.mode + N) * d + (e2.mode + N)];
                }
            // X is real for every real x, so the (symmetric) matrix is real.
            const double sym = b.real();
            a[static_cast<std::size_t>(j) * d + k] = sym;
            a[static_cast<std::size_t>(k) * d + j] = sym;
        }
    }

    long double tr2 = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) tr2 += static_cast<long double>(a[i]) * a[i];

    std::vector<double> a2(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
            long double acc = 0.0L;
            const double* ri = &a[static_cast<std::size_t>(i) * d];
            const double* rk = &a[static_cast<std::size_t>(k) * d];
            for (int l = 0; l < d; ++l) acc += static_cast<long double>(ri[l]) * rk[l];
            a2[static_cast<std::size_t>(i) * d + k] = static_cast<double>(acc);
        }
    long double tr4 = 0.0L;
    for (std::size_t i = 0; i < a2.size(); ++i) tr4 += static_cast<long double>(a2[i]) * a2[i];

    ChaosMoments out;
    out.variance = 2.0 * static_cast<double>(tr2);
    out.excess_kurtosis =
        tr2 > 0.0L ? 12.0 * static_cast<double>(tr4 / (tr2 * tr2)) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Quadratic objects of the noise-forced variants
// ---------------------------------------------------------------------------

// Y_N(t_k) = -P_{!=0}( z_N(t_k)^2 ), dealiased on the path grid. The grid
// must retain twice the active mode range of the state.
inline SpectralField appendix_quadratic(const Trajectory& path, std::size_t k) {
    const SpectralField& z = path.states.at(k);
    const int act = z.active_mode_bound();
    if (z.grid().mode_bound < 2 * act)
        throw std::invalid_argument("appendix_quadratic: grid too small for the squared modes");
    SpectralField sq = quadratic_product(z, z);
    sq = dirichlet_project(sq, sq.mode_bound(), /*drop_zero_mode=*/true);
    for (auto& v : sq.data()) v = -v;
    return sq;
}

// Z_N(t_k) = int_0^{t_k} S(t_k - t') phi(D) z_N^2(t') dt' by trapezoidal
// quadrature along the sampled path (the integrand is only path-Hoelder in
// time, so the observed order is statistical, about dt^2 on frozen noise).
inline SpectralField appendix_second_iterate(const Trajectory& path, std::size_t k_index) {
    path.validate();
    if (k_index >= path.times.size())
        throw std::invalid_argument("appendix_second_iterate: index out of range");
    if (std::abs(path.times.front()) > 1e-12)
        throw std::invalid_argument("appendix_second_iterate: path must start at t = 0");
    const double dt0 = path.times.size() > 1 ? path.times[1] - path.times[0] : 0.0;
    for (std::size_t j = 1; j <= k_index; ++j)
        if (std::abs((path.times[j] - path.times[j - 1]) - dt0) > 1e-9 * std::max(1.0, dt0))
            throw std::invalid_argument("appendix_second_iterate: non-uniform time grid");

    const GridSpec& grid = path.states.front().grid();
    SpectralField acc(grid);
    if (k_index == 0) return acc;
    const double t_end = path.times[k_index];
    ProductWorkspace ws(grid);
    SpectralField sq(grid);
    for (std::size_t j = 0; j <= k_index; ++j) {
        ws.square(path.states[j], sq);
        for (int n = 1; n <= grid.mode_bound; ++n)
            sq.set_mode_pair(n, sq.coeff(n) * phi_symbol(n));
        sq.set_coeff(0, cd(0.0, 0.0));
        SpectralField prop = semigroup_apply(sq, t_end - path.times[j]);
        const double w = (j == 0 || j == k_index) ? 0.5 * dt0 : dt0;
        for (int n = -grid.mode_bound; n <= grid.mode_bound; ++n)
            acc.set_coeff(n, acc.coeff(n) + w * prop.coeff(n));
    }
    return acc;
}

// Limit covariance of the quadratic object:
// E[<Y(t1), psi1><Y(t2), psi2>] -> (t1 ^ t2)^2 sum_{n != 0} conj(psihat1) psihat2.
inline double appendix_limit_covariance(double t1, double t2, const TestFunction& psi1,
                                        const TestFunction& psi2) {
    const double tm = std::min(t1, t2);
    const int mb = std::min(psi1.mode_bound(), psi2.mode_bound());
    cd acc(0.0, 0.0);
    for (int n = -mb; n <= mb; ++n) {
        if (n == 0) continue;
        acc += std::conj(psi1.coeff(n)) * psi2.coeff(n);
    }
    return tm * tm * acc.real();
}

// Exact finite-N covariance of Y_N per mode (It{o} isometry plus Wick
// pairing): 2 (t1^t2)^2 C^4_{1-a,N} sum_{n=n1+n2, 0<|ni|<=N}
//   e^{(t1-t2)(phi(n1)+phi(n2))} |phi(n1)|^2 |phi(n2)|^2 <n1>^{2a} <n2>^{2a}.
inline cd appendix_finite_covariance(double alpha_app, int N, double t1, double t2,
                                     long long n) {
    if (n == 0) return cd(0.0, 0.0);
    const double tm = std::min(t1, t2);
    cd acc(0.0, 0.0);
    const long long lo = std::max<long long>(-N, n - N);
    const long long hi = std::min<long long>(N, n + N);
    for (long long n1 = lo; n1 <= hi; ++n1) {
        const long long n2 = n - n1;
        if (n1 == 0 || n2 == 0) continue;
        const double w = std::norm(phi_symbol(n1)) * std::norm(phi_symbol(n2)) *
                         std::pow(japanese_bracket(static_cast<double>(n1)), 2.0 * alpha_app) *
                         std::pow(japanese_bracket(static_cast<double>(n2)), 2.0 * alpha_app);
        acc += std::exp((t1 - t2) * (phi_symbol(n1) + phi_symbol(n2))) * w;
    }
    const double c4 = 1.0 / renorm_sum_inv4(1.0 - alpha_app, N);
    return 2.0 * tm * tm * c4 * acc;
}

inline double appendix_finite_covariance_pairing(double alpha_app, int N, double t1, double t2,
                                                 const TestFunction& psi1,
                                                 const TestFunction& psi2) {
    const int mb = std::min(psi1.mode_bound(), psi2.mode_bound());
    cd acc(0.0, 0.0);
    for (int n = -mb; n <= mb; ++n) {
        if (n == 0) continue;
        const cd p = std::conj(psi1.coeff(n)) * psi2.coeff(n);
        if (p == cd(0.0, 0.0)) continue;
        acc += p * appendix_finite_covariance(alpha_app, N, t1, t2, n);
    }
    return acc.real();
}

// ---------------------------------------------------------------------------
// Covariance report rows (CSV export schema)
// ---------------------------------------------------------------------------

struct CovarianceRow {
    double alpha = 0.0;
    long long N = 0;
    double t1 = 0.0;
    double t2 = 0.0;
    long long n = 0;
    double re = 0.0;
    double im = 0.0;
    std::string kind;  // finite | limit | c_alpha | contraction
};

}  // namespace bbm
