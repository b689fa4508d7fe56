#pragma once

// Complex FFT used by the spectral kernels. Power-of-two lengths use an
// iterative radix-2 transform with a precomputed twiddle table; other lengths
// fall back to a direct mode-wise DFT (only needed for oversampled physical
// grids, never in the time-stepping hot path). No global state: each Fft
// instance owns its tables and scratch, so one instance per thread is safe.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bbm {

using cd = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        if (!is_pow2(n)) throw std::invalid_argument("Fft: length must be a power of two");
        twiddle_.resize(n_ / 2);
        const double step = 2.0 * 3.14159265358979323846 / static_cast<double>(n_);
        for (std::size_t j = 0; j < n_ / 2; ++j)
            twiddle_[j] = std::polar(1.0, -step * static_cast<double>(j));
        bitrev_.resize(n_);
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n_) ++log2n;
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
            bitrev_[i] = r;
        }
    }

    std::size_t size() const { return n_; }

    // Unscaled transforms: forward uses e^{-2pi i jk/n}, inverse e^{+2pi i jk/n}.
    void forward(std::vector<cd>& a) const { run(a, false); }
    void inverse(std::vector<cd>& a) const { run(a, true); }

private:
    void run(std::vector<cd>& a, bool inv) const {
        if (a.size() != n_) throw std::invalid_argument("Fft: buffer length mismatch");
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t j = bitrev_[i];
            if (i < j) std::swap(a[i], a[j]);
        }
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t half = len >> 1;
            const std::size_t stride = n_ / len;
            for (std::size_t blk = 0; blk < n_; blk += len) {
                for (std::size_t j = 0; j < half; ++j) {
                    cd w = twiddle_[j * stride];
                    if (inv) w = std::conj(w);
                    const cd u = a[blk + j];
                    const cd v = a[blk + j + half] * w;
                    a[blk + j] = u + v;
                    a[blk + j + half] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<cd> twiddle_;
    std::vector<std::size_t> bitrev_;
};

}  // namespace bbm
