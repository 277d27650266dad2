#pragma once

// Reference computations used as test oracles. Everything here is written directly from the
// definitions (O(N^2) sums, closed forms) and shares no code with the library.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "nbtoa/signal.hpp"

namespace oracle {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

inline std::vector<cplx> dft(const std::vector<cplx>& x) {
    const std::size_t n = x.size();
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc{};
        for (std::size_t m = 0; m < n; ++m) {
            acc += x[m] * std::polar(1.0, -2.0 * pi * static_cast<double>((k * m) % n) / static_cast<double>(n));
        }
        out[k] = acc;
    }
    return out;
}

/// sum_n a[n + lag] conj(b[n]) over the overlap.
inline cplx xcorr_at(const std::vector<cplx>& a, const std::vector<cplx>& b, std::ptrdiff_t lag) {
    cplx acc{};
    for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(b.size()); ++n) {
        const std::ptrdiff_t m = n + lag;
        if (m >= 0 && m < static_cast<std::ptrdiff_t>(a.size())) {
            acc += a[static_cast<std::size_t>(m)] * std::conj(b[static_cast<std::size_t>(n)]);
        }
    }
    return acc;
}

/// Integer lag (in samples) maximizing |sum a[n+lag] conj(b[n])| over [-max_lag, max_lag].
inline std::ptrdiff_t brute_force_peak(const std::vector<cplx>& a, const std::vector<cplx>& b, std::ptrdiff_t max_lag) {
    std::ptrdiff_t best = -max_lag;
    double         top  = -1.0;
    for (std::ptrdiff_t lag = -max_lag; lag <= max_lag; ++lag) {
        const double v = std::norm(xcorr_at(a, b, lag));
        if (v > top) {
            top  = v;
            best = lag;
        }
    }
    return best;
}

/// x[k] conj(x[k - L]), zero for k < L.
inline std::vector<cplx> differential(const std::vector<cplx>& x, std::size_t lag) {
    std::vector<cplx> d(x.size(), cplx{});
    for (std::size_t k = lag; k < x.size(); ++k) {
        d[k] = x[k] * std::conj(x[k - lag]);
    }
    return d;
}

inline std::vector<cplx> gaussian(std::size_t n, double centre, double sigma, double freq_cycles_per_sample = 0.0) {
    std::vector<cplx> v(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) - centre;
        v[k]           = std::exp(-0.5 * t * t / (sigma * sigma)) * std::polar(1.0, 2.0 * pi * freq_cycles_per_sample * static_cast<double>(k));
    }
    return v;
}

/// Centroid of |x|^2 in samples.
inline double power_centroid(const std::vector<cplx>& x) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        num += static_cast<double>(k) * std::norm(x[k]);
        den += std::norm(x[k]);
    }
    return num / den;
}

inline std::vector<cplx> white_noise(std::size_t n, std::uint64_t seed, double variance = 1.0) {
    std::mt19937_64                  rng(seed);
    std::normal_distribution<double> g(0.0, std::sqrt(variance / 2.0));
    std::vector<cplx>                v(n);
    for (auto& x : v) {
        x = {g(rng), g(rng)};
    }
    return v;
}

inline double mean_power(const std::vector<cplx>& x) {
    double s = 0.0;
    for (const auto& v : x) {
        s += std::norm(v);
    }
    return s / static_cast<double>(x.size());
}

/// Vertex of the parabola through (-1, ym), (0, y0), (1, yp), located by dense evaluation.
inline double dense_parabola_vertex(double ym, double y0, double yp, int steps = 200000) {
    const double a    = 0.5 * (ym + yp) - y0;
    const double b    = 0.5 * (yp - ym);
    double       best = -1.0;
    double       top  = -1e300;
    for (int i = 0; i <= steps; ++i) {
        const double x = -1.0 + 2.0 * i / steps;
        const double y = a * x * x + b * x + y0;
        if (y > top) {
            top  = y;
            best = x;
        }
    }
    return best;
}

} // namespace oracle
