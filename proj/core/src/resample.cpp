#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "nbtoa/sigproc.hpp"

namespace nbtoa::sigproc {
namespace {

double sinc(double x) {
    if (std::abs(x) < 1e-12) {
        return 1.0;
    }
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

// Kaiser-windowed sinc, evaluated at `tau` seconds from the input sample.
struct Kernel {
    double gain;       // 2B / input rate
    double two_b;      // 2B, Hz
    double half_span;  // window half-length, seconds
    double beta;
    double inv_i0_beta;

    [[nodiscard]] double operator()(double tau) const {
        const double u = tau / half_span;
        if (std::abs(u) >= 1.0) {
            return 0.0;
        }
        const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - u * u)) * inv_i0_beta;
        return gain * sinc(two_b * tau) * w;
    }
};

bool integral_rate(double r) { return r < 1e15 && std::abs(r - std::round(r)) < 1e-9 * r; }

} // namespace

Signal resample(const Signal& s, double new_rate_hz, const ResampleOptions& options) {
    if (!(new_rate_hz > 0.0) || !std::isfinite(new_rate_hz)) {
        throw ConfigError(fmt::format("resample: new rate must be positive, got {}", new_rate_hz));
    }
    if (options.half_width < 1 || !(options.cutoff_ratio > 0.0 && options.cutoff_ratio <= 1.0)) {
        throw ConfigError("resample: invalid kernel options");
    }
    const double in_rate = s.rate();
    if (new_rate_hz == in_rate) {
        return s;
    }
    const double lower = std::min(in_rate, new_rate_hz);
    const double two_b = options.cutoff_ratio * lower;
    const Kernel kernel{two_b / in_rate, two_b, options.half_width / two_b, options.kaiser_beta,
                        1.0 / std::cyl_bessel_i(0.0, options.kaiser_beta)};

    const auto n     = static_cast<std::ptrdiff_t>(s.size());
    const auto n_out = std::max<std::ptrdiff_t>(1, std::llround(static_cast<double>(n) * new_rate_hz / in_rate));
    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(kernel.half_span * in_rate)) + 1;
    std::vector<cplx> out(static_cast<std::size_t>(n_out), cplx{});

    auto accumulate = [&](std::ptrdiff_t i0, const double* taps, std::size_t m) {
        cplx acc{};
        const auto j_lo = std::max(-reach, -i0);
        const auto j_hi = std::min(reach, n - 1 - i0);
        for (auto j = j_lo; j <= j_hi; ++j) {
            acc += s[static_cast<std::size_t>(i0 + j)] * taps[j + reach];
        }
        out[m] = acc;
    };

    const auto taps_per_phase = static_cast<std::size_t>(2 * reach + 1);
    if (integral_rate(in_rate) && integral_rate(new_rate_hz)) {
        const auto g = std::gcd(std::llround(in_rate), std::llround(new_rate_hz));
        const auto L = std::llround(new_rate_hz) / g;
        const auto M = std::llround(in_rate) / g;
        if (L <= 4096) {
            // Output phases repeat every L samples: tabulate one tap set per phase.
            std::vector<double> table(static_cast<std::size_t>(L) * taps_per_phase);
            for (long long phase = 0; phase < L; ++phase) {
                const double frac = static_cast<double>(phase) / static_cast<double>(L);
                for (auto j = -reach; j <= reach; ++j) {
                    table[static_cast<std::size_t>(phase) * taps_per_phase + static_cast<std::size_t>(j + reach)] =
                        kernel((frac - static_cast<double>(j)) / in_rate);
                }
            }
            for (std::ptrdiff_t m = 0; m < n_out; ++m) {
                const long long pos   = static_cast<long long>(m) * M;
                const auto      i0    = static_cast<std::ptrdiff_t>(pos / L);
                const long long phase = pos % L;
                accumulate(i0, &table[static_cast<std::size_t>(phase) * taps_per_phase], static_cast<std::size_t>(m));
            }
            return Signal(std::move(out), new_rate_hz, s.t0());
        }
    }

    std::vector<double> taps(taps_per_phase);
    for (std::ptrdiff_t m = 0; m < n_out; ++m) {
        const double p    = static_cast<double>(m) * in_rate / new_rate_hz;
        const auto   i0   = static_cast<std::ptrdiff_t>(std::floor(p));
        const double frac = p - static_cast<double>(i0);
        for (auto j = -reach; j <= reach; ++j) {
            taps[static_cast<std::size_t>(j + reach)] = kernel((frac - static_cast<double>(j)) / in_rate);
        }
        accumulate(i0, taps.data(), static_cast<std::size_t>(m));
    }
    return Signal(std::move(out), new_rate_hz, s.t0());
}

} // namespace nbtoa::sigproc
