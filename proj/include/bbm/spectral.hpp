#pragma once

// Fourier-side representation of real periodic functions on the circle with
// the normalized measure dx/2pi, so Plancherel and mode covariances carry no
// 2pi factors. Coefficients are stored densely for n = -M..M and kept
// Hermitian (coeff(-n) = conj(coeff(n))), which makes every field the
// transform of a real function. All operations are pure; the only mutable
// piece is ProductWorkspace, which a caller owns per thread.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbm/fft.hpp"

namespace bbm {

inline constexpr double kPi = std::numbers::pi_v<double>;

// <n> = sqrt(1+n^2)
inline double japanese_bracket(double n) { return std::sqrt(1.0 + n * n); }

// Symbol of the BBM multiplier: phi(n) = -i n / (1+n^2). Purely imaginary,
// odd, |phi(n)| <= 1/2 with the maximum at |n| = 1.
inline cd phi_symbol(long long n) {
    const double nn = static_cast<double>(n);
    return cd(0.0, -nn / (1.0 + nn * nn));
}

struct GridSpec {
    int mode_bound = 0;       // M: coefficients kept for |n| <= M
    int physical_points = 0;  // P >= 2M+2: oversampled evaluation grid

    GridSpec() = default;
    GridSpec(int m, int p) : mode_bound(m), physical_points(p) { validate(); }

    // Smallest power-of-two physical grid admissible for this mode bound.
    static GridSpec with_mode_bound(int m) {
        return GridSpec(m, static_cast<int>(next_pow2(static_cast<std::size_t>(2 * m + 2))));
    }

    void validate() const {
        if (mode_bound < 1) throw std::invalid_argument("GridSpec: mode_bound must be >= 1");
        if (physical_points < 2 * mode_bound + 2)
            throw std::invalid_argument("GridSpec: physical_points must be >= 2*mode_bound+2");
    }

    int num_modes() const { return 2 * mode_bound + 1; }
    bool operator==(const GridSpec& o) const {
        return mode_bound == o.mode_bound && physical_points == o.physical_points;
    }
    bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

class SpectralField {
public:
    SpectralField() = default;
    explicit SpectralField(const GridSpec& grid)
        : grid_(grid), coeffs_(static_cast<std::size_t>(grid.num_modes()), cd(0.0, 0.0)) {
        grid_.validate();
    }

    const GridSpec& grid() const { return grid_; }
    int mode_bound() const { return grid_.mode_bound; }

    cd coeff(int n) const { return coeffs_[index(n)]; }
    void set_coeff(int n, cd v) { coeffs_[index(n)] = v; }

    // Sets the +-n pair so the Hermitian constraint holds by construction;
    // the zero mode is projected onto the reals.
    void set_mode_pair(int n, cd v) {
        if (n == 0) {
            coeffs_[index(0)] = cd(v.real(), 0.0);
            return;
        }
        coeffs_[index(n)] = v;
        coeffs_[index(-n)] = std::conj(v);
    }

    std::vector<cd>& data() { return coeffs_; }
    const std::vector<cd>& data() const { return coeffs_; }

    // Largest |n| carrying a nonzero coefficient (0 for the zero field).
    int active_mode_bound() const {
        for (int n = grid_.mode_bound; n >= 1; --n)
            if (coeff(n) != cd(0.0, 0.0) || coeff(-n) != cd(0.0, 0.0)) return n;
        return 0;
    }

    double hermitian_defect() const {
        double d = std::abs(coeff(0).imag());
        for (int n = 1; n <= grid_.mode_bound; ++n)
            d = std::max(d, std::abs(coeff(-n) - std::conj(coeff(n))));
        return d;
    }

    // Averages the +-n pairs; used after FFT round trips where the symmetry
    // holds only to round-off.
    void symmetrize() {
        coeffs_[index(0)] = cd(coeffs_[index(0)].real(), 0.0);
        for (int n = 1; n <= grid_.mode_bound; ++n) {
            const cd v = 0.5 * (coeff(n) + std::conj(coeff(-n)));
            coeffs_[index(n)] = v;
            coeffs_[index(-n)] = std::conj(v);
        }
    }

private:
    std::size_t index(int n) const {
        if (n < -grid_.mode_bound || n > grid_.mode_bound)
            throw std::out_of_range("SpectralField: mode index out of range");
        return static_cast<std::size_t>(n + grid_.mode_bound);
    }

    GridSpec grid_;
    std::vector<cd> coeffs_;
};

// A test function is an ordinary field with finitely many nonzero modes,
// designated as a pairing target.
using TestFunction = SpectralField;

// psi = cos(kx): modes +-k with coefficient 1/2.
inline TestFunction cosine_test_function(const GridSpec& grid, int k) {
    TestFunction psi(grid);
    if (k < 1 || k > grid.mode_bound)
        throw std::invalid_argument("cosine_test_function: k out of range");
    psi.set_mode_pair(k, cd(0.5, 0.0));
    return psi;
}

struct Trajectory {
    std::vector<double> times;
    std::vector<SpectralField> states;

    void validate() const {
        if (times.size() != states.size())
            throw std::invalid_argument("Trajectory: times/states length mismatch");
        if (!times.empty() && times.front() < 0.0)
            throw std::invalid_argument("Trajectory: times must start at >= 0");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (times[i] <= times[i - 1])
                throw std::invalid_argument("Trajectory: times must be strictly increasing");
        for (std::size_t i = 1; i < states.size(); ++i)
            if (states[i].grid() != states[0].grid())
                throw std::invalid_argument("Trajectory: states must share one grid");
    }
};

// ---------------------------------------------------------------------------
// Linear flow and projections
// ---------------------------------------------------------------------------

// e^{t phi(D)}: multiplies mode n by e^{t phi(n)}. phi is imaginary, so every
// modulus (and hence every H^s norm) is preserved; the group is defined for
// all real t.
inline SpectralField semigroup_apply(const SpectralField& f, double t) {
    if (!std::isfinite(t)) throw std::invalid_argument("semigroup_apply: t must be finite");
    SpectralField out = f;
    const int m = f.mode_bound();
    for (int n = 1; n <= m; ++n) {
        const cd rot = std::polar(1.0, -t * static_cast<double>(n) / (1.0 + static_cast<double>(n) * n));
        out.set_coeff(n, f.coeff(n) * rot);
        out.set_coeff(-n, f.coeff(-n) * std::conj(rot));
    }
    return out;
}

// Dirichlet projector P_N (optionally also dropping the zero mode, P_{!=0}).
inline SpectralField dirichlet_project(const SpectralField& f, int N, bool drop_zero_mode = false) {
    if (N < 0) throw std::invalid_argument("dirichlet_project: N must be >= 0");
    SpectralField out = f;
    const int m = f.mode_bound();
    for (int n = -m; n <= m; ++n)
        if (std::abs(n) > N) out.set_coeff(n, cd(0.0, 0.0));
    if (drop_zero_mode) out.set_coeff(0, cd(0.0, 0.0));
    return out;
}

// ---------------------------------------------------------------------------
// Physical transforms
// ---------------------------------------------------------------------------

namespace detail {

// u_j = sum_{|n|<=M} c_n e^{i n x_j} on p points, exploiting Hermitian
// symmetry so the output is real by construction. Phases advance by complex
// rotation, which is exact enough for the oversampled-evaluation use.
inline std::vector<double> synth_direct(const SpectralField& f, int p) {
    const int m = f.mode_bound();
    std::vector<double> u(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
        const double x = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(p);
        const cd w = std::polar(1.0, x);
        cd e = w;  // e^{i n x}, n = 1
        long double acc = f.coeff(0).real();
        for (int n = 1; n <= m; ++n) {
            acc += 2.0L * (f.coeff(n) * e).real();
            e *= w;
        }
        u[static_cast<std::size_t>(j)] = static_cast<double>(acc);
    }
    return u;
}

inline SpectralField analyze_direct(const GridSpec& grid, const std::vector<double>& u) {
    const int p = static_cast<int>(u.size());
    SpectralField f(grid);
    for (int n = 0; n <= grid.mode_bound; ++n) {
        const double step = -2.0 * kPi * static_cast<double>(n) / static_cast<double>(p);
        const cd w = std::polar(1.0, step);
        cd e(1.0, 0.0);
        cd acc(0.0, 0.0);
        for (int j = 0; j < p; ++j) {
            acc += u[static_cast<std::size_t>(j)] * e;
            e *= w;
        }
        f.set_mode_pair(n, acc / static_cast<double>(p));
    }
    return f;
}

inline std::size_t wrap_bin(int n, std::size_t p) {
    return n >= 0 ? static_cast<std::size_t>(n)
                  : p - static_cast<std::size_t>(-n);
}

}  // namespace detail

// Physical samples u(x_j), x_j = 2 pi j / P. Real output (the field is
// Hermitian; the imaginary residue is discarded at round-off level).
inline std::vector<double> to_physical(const SpectralField& f) {
    const std::size_t p = static_cast<std::size_t>(f.grid().physical_points);
    if (!is_pow2(p)) return detail::synth_direct(f, static_cast<int>(p));
    std::vector<cd> buf(p, cd(0.0, 0.0));
    const int m = f.mode_bound();
    for (int n = -m; n <= m; ++n) buf[detail::wrap_bin(n, p)] = f.coeff(n);
    Fft fft(p);
    fft.inverse(buf);
    std::vector<double> u(p);
    for (std::size_t j = 0; j < p; ++j) u[j] = buf[j].real();
    return u;
}

// Coefficients under f_hat(n) = (1/P) sum_j u(x_j) e^{-i n x_j}; exact for
// band-limited data because P >= 2M+2.
inline SpectralField from_physical(const GridSpec& grid, const std::vector<double>& u) {
    if (static_cast<int>(u.size()) != grid.physical_points)
        throw std::invalid_argument("from_physical: sample count does not match grid");
    const std::size_t p = u.size();
    if (!is_pow2(p)) return detail::analyze_direct(grid, u);
    std::vector<cd> buf(p);
    for (std::size_t j = 0; j < p; ++j) buf[j] = cd(u[j], 0.0);
    Fft fft(p);
    fft.forward(buf);
    SpectralField f(grid);
    for (int n = 0; n <= grid.mode_bound; ++n)
        f.set_mode_pair(n, buf[detail::wrap_bin(n, p)] / static_cast<double>(p));
    return f;
}

// ---------------------------------------------------------------------------
// Dealiased quadratic product
// ---------------------------------------------------------------------------

// Scratch for the zero-padded product transforms; one instance per thread.
class ProductWorkspace {
public:
    explicit ProductWorkspace(const GridSpec& grid)
        : grid_(grid),
          padded_(next_pow2(static_cast<std::size_t>(2 * (2 * grid.mode_bound + 1)))),
          fft_(padded_),
          buf_a_(padded_),
          buf_b_(padded_) {}

    const GridSpec& grid() const { return grid_; }

    // out = dealiased f*g truncated to |n| <= M. Zero padding to
    // >= 2(2M+1) makes the discrete product equal the exact spectral
    // convolution on the retained modes.
    void multiply(const SpectralField& f, const SpectralField& g, SpectralField& out) {
        if (f.grid() != grid_ || g.grid() != grid_)
            throw std::invalid_argument("ProductWorkspace: grid mismatch");
        const int m = grid_.mode_bound;
        std::fill(buf_a_.begin(), buf_a_.end(), cd(0.0, 0.0));
        for (int n = -m; n <= m; ++n) buf_a_[detail::wrap_bin(n, padded_)] = f.coeff(n);
        fft_.inverse(buf_a_);
        if (&g == &f) {
            for (std::size_t j = 0; j < padded_; ++j) buf_a_[j] *= buf_a_[j];
        } else {
            std::fill(buf_b_.begin(), buf_b_.end(), cd(0.0, 0.0));
            for (int n = -m; n <= m; ++n) buf_b_[detail::wrap_bin(n, padded_)] = g.coeff(n);
            fft_.inverse(buf_b_);
            for (std::size_t j = 0; j < padded_; ++j) buf_a_[j] *= buf_b_[j];
        }
        fft_.forward(buf_a_);
        const double scale = 1.0 / static_cast<double>(padded_);
        if (out.grid() != grid_) out = SpectralField(grid_);
        for (int n = -m; n <= m; ++n)
            out.set_coeff(n, buf_a_[detail::wrap_bin(n, padded_)] * scale);
        out.symmetrize();
    }

    void square(const SpectralField& f, SpectralField& out) { multiply(f, f, out); }

private:
    GridSpec grid_;
    std::size_t padded_;
    Fft fft_;
    std::vector<cd> buf_a_;
    std::vector<cd> buf_b_;
};

inline SpectralField quadratic_product(const SpectralField& f, const SpectralField& g) {
    if (f.grid() != g.grid()) throw std::invalid_argument("quadratic_product: grid mismatch");
    ProductWorkspace ws(f.grid());
    SpectralField out(f.grid());
    ws.multiply(f, g, out);
    return out;
}

// ---------------------------------------------------------------------------
// Pairings and norms
// ---------------------------------------------------------------------------

// <f, psi> = sum_n f_hat(n) conj(psi_hat(n)); equals the integral of f psi
// against the normalized measure. Real to round-off for Hermitian inputs.
inline double pairing(const SpectralField& f, const TestFunction& psi) {
    const int m = std::min(f.mode_bound(), psi.mode_bound());
    long double acc = 0.0L;
    for (int n = -m; n <= m; ++n)
        acc += (f.coeff(n) * std::conj(psi.coeff(n))).real();
    return static_cast<double>(acc);
}

// ||f||_{H^s} = || <n>^s f_hat(n) ||_{l^2} over the retained modes.
inline double h_norm(const SpectralField& f, double s) {
    const int m = f.mode_bound();
    long double acc = 0.0L;
    for (int n = -m; n <= m; ++n) {
        const double w = std::pow(japanese_bracket(static_cast<double>(n)), 2.0 * s);
        acc += w * std::norm(f.coeff(n));
    }
    return std::sqrt(static_cast<double>(acc));
}

// Grid estimate of ||<grad>^s f||_{L^inf}: evaluates <n>^s f_hat on
// oversample*(2M+1) points and takes the max. A lower bound of the true
// sup norm, nondecreasing and convergent in the oversample factor.
inline double winf_norm(const SpectralField& f, double s, int oversample = 4) {
    if (oversample < 2) throw std::invalid_argument("winf_norm: oversample must be >= 2");
    const int m = f.mode_bound();
    SpectralField weighted(f.grid());
    for (int n = -m; n <= m; ++n)
        weighted.set_coeff(n, f.coeff(n) * std::pow(japanese_bracket(static_cast<double>(n)), s));
    const int pts = oversample * (2 * m + 1);
    const std::vector<double> u = detail::synth_direct(weighted, pts);
    double mx = 0.0;
    for (double v : u) mx = std::max(mx, std::abs(v));
    return mx;
}

// ---------------------------------------------------------------------------
// Serialization: mode-indexed (n, re, im) rows
// ---------------------------------------------------------------------------

struct ModeRow {
    int n;
    double re;
    double im;
};

inline std::vector<ModeRow> field_mode_rows(const SpectralField& f) {
    std::vector<ModeRow> rows;
    rows.reserve(static_cast<std::size_t>(f.grid().num_modes()));
    for (int n = -f.mode_bound(); n <= f.mode_bound(); ++n)
        rows.push_back({n, f.coeff(n).real(), f.coeff(n).imag()});
    return rows;
}

inline SpectralField field_from_mode_rows(const GridSpec& grid, const std::vector<ModeRow>& rows) {
    SpectralField f(grid);
    for (const ModeRow& r : rows) f.set_coeff(r.n, cd(r.re, r.im));
    return f;
}

}  // namespace bbm
