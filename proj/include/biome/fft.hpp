#pragma once

#include <complex>
#include <vector>

#include "biome/common.hpp"

namespace biome {

// In-place iterative radix-2 FFT. Sizes are powers of two; callers zero-pad.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false) {
    const int n = static_cast<int>(a.size());
    require(is_pow2(n), "fft: size must be a power of two, got " + std::to_string(n));
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / len * (inverse ? 1.0 : -1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> t = a[i + k + len / 2] * w;
                a[i + k] = u + t;
                a[i + k + len / 2] = u - t;
                w *= wl;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

// Magnitudes of the one-sided spectrum (bins 0..nfft/2) of a real signal,
// zero-padded or truncated to nfft samples.
inline std::vector<double> real_fft_magnitude(const double* x, int n, int nfft) {
    std::vector<std::complex<double>> buf(static_cast<size_t>(nfft));
    const int m = std::min(n, nfft);
    for (int i = 0; i < m; ++i) buf[i] = std::complex<double>(x[i], 0.0);
    fft_inplace(buf);
    std::vector<double> mag(static_cast<size_t>(nfft / 2 + 1));
    for (int i = 0; i <= nfft / 2; ++i) mag[i] = std::abs(buf[i]);
    return mag;
}

inline std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<size_t>(n));
    if (n == 1) {
        w[0] = 1.0;
        return w;
    }
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (n - 1));
    return w;
}

}  // namespace biome
