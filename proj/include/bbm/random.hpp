#pragma once

// Reproducible sampling of the model's random objects: Gaussian Fourier data,
// renormalized truncated data, spatial white noise, random linear solutions,
// and the exactly-sampled stochastic convolution path. Streams are derived
// from (master_seed, stream_id, substream) by counter-style key mixing, so
// ensemble members are independent generators and results cannot depend on
// scheduling order.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbm/spectral.hpp"

namespace bbm {

enum class GaussianKind { InitialData, WhiteNoise, BrownianIncrement };

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

// xoshiro256++ seeded from a mixed key.
class Rng {
public:
    explicit Rng(std::uint64_t key) {
        std::uint64_t sm = key;
        for (auto& w : s_) w = detail::splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    // Uniform in (0,1): 53-bit mantissa, never exactly 0.
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via the Marsaglia polar method (spare value cached).
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_unit() - 1.0;
            v = 2.0 * next_unit() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double r = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * r;
        has_spare_ = true;
        return u * r;
    }

    // Circularly symmetric complex normal with E|z|^2 = 1.
    cd next_complex_normal() {
        const double a = next_normal();
        const double b = next_normal();
        return cd(a, b) / std::sqrt(2.0);
    }

private:
    std::uint64_t s_[4] = {};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    SeedSpec() = default;
    SeedSpec(std::uint64_t master, std::uint64_t stream) : master_seed(master), stream_id(stream) {}

    SeedSpec with_stream(std::uint64_t stream) const { return SeedSpec(master_seed, stream); }

    // Distinct (master, stream, substream) triples give independent streams.
    Rng stream(GaussianKind substream) const {
        std::uint64_t sm = master_seed;
        detail::splitmix64(sm);
        sm ^= 0x9E3779B97F4A7C15ULL * (stream_id + 1);
        detail::splitmix64(sm);
        sm ^= 0xBF58476D1CE4E5B9ULL * (static_cast<std::uint64_t>(substream) + 1);
        return Rng(detail::splitmix64(sm));
    }
};

enum class RenormVariant { DataRenormalized, WeakNonlinearity, NoiseRenormalized, WeakNoise };

inline std::string variant_name(RenormVariant v) {
    switch (v) {
        case RenormVariant::DataRenormalized: return "data-renormalized";
        case RenormVariant::WeakNonlinearity: return "weak-nonlinearity";
        case RenormVariant::NoiseRenormalized: return "noise-renormalized";
        case RenormVariant::WeakNoise: return "weak-noise";
    }
    return "?";
}

struct ModelParams {
    double alpha = 0.0;          // data regularity exponent
    int truncation = 0;          // N
    RenormVariant variant = RenormVariant::DataRenormalized;
    double appendix_alpha = 0.75;  // used by the noise-forced variants
};

// ---------------------------------------------------------------------------
// Renormalization constant
// ---------------------------------------------------------------------------

// C_{alpha,N}^{-4} = sum_{|n|<=N} 2 <n>^{-4 alpha}, accumulated in extended
// precision with compensation; the sums reach 1e6 terms in sweeps.
inline double renorm_sum_inv4(double alpha, long long N) {
    if (N < 0) throw std::invalid_argument("renorm_sum_inv4: N must be >= 0");
    long double sum = 2.0L;  // n = 0 term, <0> = 1
    long double comp = 0.0L;
    for (long long n = 1; n <= N; ++n) {
        const long double b = 1.0L + static_cast<long double>(n) * static_cast<long double>(n);
        const long double term = 4.0L * std::pow(b, static_cast<long double>(-2.0 * alpha));
        const long double y = term - comp;
        const long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return static_cast<double>(sum);
}

// C_{alpha,N} = (sum_{|n|<=N} 2 <n>^{-4 alpha})^{-1/4}; strictly positive,
// nonincreasing in N, and -> 0 as N -> infinity for alpha <= 1/4.
inline double renorm_constant(double alpha, long long N) {
    return std::pow(renorm_sum_inv4(alpha, N), -0.25);
}

// ---------------------------------------------------------------------------
// Gaussian coefficient draws
// ---------------------------------------------------------------------------

struct GaussianCoefficients {
    int mode_bound = 0;
    GaussianKind kind = GaussianKind::InitialData;
    std::vector<cd> values;  // n = -M..M, Hermitian

    cd value(int n) const {
        return values[static_cast<std::size_t>(n + mode_bound)];
    }
};

// g_0 ~ N(0,1) real; for n >= 1, g_n = (a+ib)/sqrt(2) with a,b ~ N(0,1) and
// g_{-n} = conj(g_n). Draw order is fixed (g_0, then n = 1,2,...), so a draw
// at a larger mode bound extends a smaller one.
inline GaussianCoefficients sample_gaussian_coeffs(int mode_bound, const SeedSpec& seed,
                                                   GaussianKind kind) {
    if (mode_bound < 1) throw std::invalid_argument("sample_gaussian_coeffs: mode_bound >= 1");
    Rng rng = seed.stream(kind);
    GaussianCoefficients g;
    g.mode_bound = mode_bound;
    g.kind = kind;
    g.values.assign(static_cast<std::size_t>(2 * mode_bound + 1), cd(0.0, 0.0));
    g.values[static_cast<std::size_t>(mode_bound)] = cd(rng.next_normal(), 0.0);
    for (int n = 1; n <= mode_bound; ++n) {
        const cd z = rng.next_complex_normal();
        g.values[static_cast<std::size_t>(mode_bound + n)] = z;
        g.values[static_cast<std::size_t>(mode_bound - n)] = std::conj(z);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Random fields
// ---------------------------------------------------------------------------

// u_0(alpha): coefficients g_n / <n>^alpha.
inline SpectralField initial_data(const GridSpec& grid, const GaussianCoefficients& g,
                                  double alpha) {
    if (g.kind != GaussianKind::InitialData)
        throw std::invalid_argument("initial_data: coefficients must have kind initial-data");
    if (g.mode_bound < grid.mode_bound)
        throw std::invalid_argument("initial_data: draw does not cover the grid");
    SpectralField u(grid);
    for (int n = 0; n <= grid.mode_bound; ++n)
        u.set_mode_pair(n, g.value(n) * std::pow(japanese_bracket(static_cast<double>(n)), -alpha));
    return u;
}

// C_{alpha,N} P_N u_0(alpha): the renormalized truncated data.
inline SpectralField renormalized_truncated_data(const GridSpec& grid,
                                                 const GaussianCoefficients& g, double alpha,
                                                 int N) {
    if (N > grid.mode_bound)
        throw std::invalid_argument("renormalized_truncated_data: N exceeds grid mode bound");
    SpectralField u = dirichlet_project(initial_data(grid, g, alpha), N);
    const double c = renorm_constant(alpha, N);
    for (auto& v : u.data()) v *= c;
    return u;
}

// z_N(t) = S(t) C_{alpha,N} P_N u_0.
inline SpectralField linear_solution_zN(const GridSpec& grid, const GaussianCoefficients& g,
                                        double alpha, int N, double t) {
    return semigroup_apply(renormalized_truncated_data(grid, g, alpha, N), t);
}

// Spatial white noise: unit-variance independent Hermitian modes.
inline SpectralField white_noise(const GridSpec& grid, const GaussianCoefficients& g) {
    if (g.kind != GaussianKind::WhiteNoise)
        throw std::invalid_argument("white_noise: coefficients must have kind white-noise");
    if (g.mode_bound < grid.mode_bound)
        throw std::invalid_argument("white_noise: draw does not cover the grid");
    SpectralField zeta(grid);
    for (int n = 0; n <= grid.mode_bound; ++n) zeta.set_mode_pair(n, g.value(n));
    return zeta;
}

// ---------------------------------------------------------------------------
// Stochastic convolution path (noise-forced variants)
// ---------------------------------------------------------------------------

// Per-mode Wiener integrals i_n(t) with variance t |phi(n)|^2 <n>^{2 alpha}.
// The integrand has constant modulus and circular symmetry absorbs its phase,
// so increments over disjoint intervals are independent circular complex
// Gaussians and the path is sampled exactly in law at the grid times.
// State at time t_k: zhat_N(t_k, n) = -C_{1-alpha,N} e^{t_k phi(n)} i_n(t_k).
inline Trajectory wiener_convolution_path(const GridSpec& grid, double alpha_app, int N,
                                          const std::vector<double>& times,
                                          const SeedSpec& seed) {
    if (N > grid.mode_bound)
        throw std::invalid_argument("wiener_convolution_path: N exceeds grid mode bound");
    if (times.empty()) throw std::invalid_argument("wiener_convolution_path: empty time grid");
    if (times.front() < 0.0)
        throw std::invalid_argument("wiener_convolution_path: times must be >= 0");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (times[k] <= times[k - 1])
            throw std::invalid_argument("wiener_convolution_path: non-monotone time grid");

    Rng rng = seed.stream(GaussianKind::BrownianIncrement);
    const double c = renorm_constant(1.0 - alpha_app, N);

    std::vector<cd> integral(static_cast<std::size_t>(N) + 1, cd(0.0, 0.0));  // i_n, n = 0..N
    Trajectory traj;
    traj.times = times;
    traj.states.reserve(times.size());
    double prev = 0.0;
    for (double t : times) {
        const double dt = t - prev;
        for (int n = 1; n <= N; ++n) {
            const double sigma =
                std::abs(phi_symbol(n)) * std::pow(japanese_bracket(static_cast<double>(n)),
                                                   alpha_app);
            integral[static_cast<std::size_t>(n)] +=
                std::sqrt(sigma * sigma * dt) * rng.next_complex_normal();
        }
        SpectralField state(grid);
        for (int n = 1; n <= N; ++n) {
            const cd rot = std::polar(1.0, -t * static_cast<double>(n) /
                                               (1.0 + static_cast<double>(n) * n));
            state.set_mode_pair(n, -c * rot * integral[static_cast<std::size_t>(n)]);
        }
        traj.states.push_back(std::move(state));
        prev = t;
    }
    return traj;
}

}  // namespace bbm
