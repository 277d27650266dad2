#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "nbtoa/fft.hpp"
#include "nbtoa/sigproc.hpp"

namespace nbtoa::sigproc {

Correlation cross_correlate(const Signal& a, const Signal& b) {
    if (a.rate() != b.rate()) {
        throw ConfigError(fmt::format("cross_correlate: rate mismatch ({} vs {} Hz)", a.rate(), b.rate()));
    }
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    const std::size_t L  = na + nb - 1;
    const std::size_t N  = fft::fast_size(L);

    std::vector<cplx> pa(N, cplx{});
    std::vector<cplx> pb(N, cplx{});
    std::copy(a.data().begin(), a.data().end(), pa.begin());
    std::copy(b.data().begin(), b.data().end(), pb.begin());
    auto A = fft::forward(pa);
    auto B = fft::forward(pb);
    for (std::size_t k = 0; k < N; ++k) {
        A[k] *= std::conj(B[k]);
    }
    const auto c = fft::inverse(A);

    std::vector<cplx> values(L);
    const auto        zero = static_cast<std::ptrdiff_t>(nb) - 1;
    for (std::size_t i = 0; i < L; ++i) {
        const auto lag = static_cast<std::ptrdiff_t>(i) - zero;
        values[i]      = lag >= 0 ? c[static_cast<std::size_t>(lag)] : c[N - static_cast<std::size_t>(-lag)];
    }
    return Correlation(std::move(values), a.rate(), zero, a.t0() - b.t0());
}

Signal frequency_shift(const Signal& s, double shift_hz) {
    if (!(std::abs(shift_hz) < s.rate() / 2.0)) {
        throw ConfigError(fmt::format("frequency_shift: |{}| Hz is not below Nyquist ({} Hz)", shift_hz, s.rate() / 2.0));
    }
    if (shift_hz == 0.0) {
        return s;
    }
    std::vector<cplx> out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        // Reduce the phase in cycles first to keep it accurate for long records.
        const double cycles = shift_hz * s.time_at(static_cast<double>(k));
        const double frac   = cycles - std::floor(cycles);
        out[k]              = s[k] * std::polar(1.0, 2.0 * std::numbers::pi * frac);
    }
    return s.with_samples(std::move(out));
}

Signal time_shift(const Signal& s, double seconds, std::size_t tail) {
    if (seconds == 0.0) {
        return s;
    }
    const auto        extra = static_cast<std::size_t>(std::ceil(std::abs(seconds) * s.rate()));
    const std::size_t N     = fft::fast_size(s.size() + tail + extra);
    std::vector<cplx> buf(N, cplx{});
    std::copy(s.data().begin(), s.data().end(), buf.begin());
    auto X = fft::forward(buf);
    for (std::size_t k = 0; k < N; ++k) {
        const double f = fft::bin_frequency(k, N, s.rate());
        if (N % 2 == 0 && k == N / 2) {
            // Nyquist bin: keep the ramp real so a real input stays real.
            X[k] *= std::cos(2.0 * std::numbers::pi * f * seconds);
        } else {
            X[k] *= std::polar(1.0, -2.0 * std::numbers::pi * f * seconds);
        }
    }
    auto y = fft::inverse(X);
    y.resize(s.size());
    return s.with_samples(std::move(y));
}

double rms_bandwidth(const Signal& s) {
    const auto X   = fft::forward(s.samples());
    double     num = 0.0;
    double     den = 0.0;
    for (std::size_t k = 0; k < X.size(); ++k) {
        const double f = fft::bin_frequency(k, X.size(), s.rate());
        const double p = std::norm(X[k]);
        num += f * f * p;
        den += p;
    }
    if (!(den > 0.0)) {
        throw std::domain_error("rms_bandwidth: signal has zero energy");
    }
    return std::sqrt(num / den);
}

double crlb_toa_std(double snr_linear, double beta_rms_hz) {
    if (!(snr_linear > 0.0) || !(beta_rms_hz > 0.0)) {
        throw ConfigError(fmt::format("crlb_toa_std: SNR ({}) and RMS bandwidth ({}) must be positive", snr_linear, beta_rms_hz));
    }
    return std::sqrt(1.0 / (8.0 * std::numbers::pi * std::numbers::pi * snr_linear * beta_rms_hz * beta_rms_hz));
}

Signal add_awgn(const Signal& s, double snr_db, std::uint64_t seed, std::optional<double> reference_power) {
    if (std::isinf(snr_db) && snr_db > 0.0) {
        return s;
    }
    if (std::isnan(snr_db)) {
        throw ConfigError("add_awgn: SNR is NaN");
    }
    const double power = reference_power.value_or(s.mean_power());
    if (!std::isfinite(power) || power < 0.0) {
        throw ConfigError("add_awgn: reference power must be finite and non-negative");
    }
    const double variance = power / std::pow(10.0, snr_db / 10.0);
    const double sigma    = std::sqrt(variance / 2.0);

    std::mt19937_64                  rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<cplx>                out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double re = normal(rng);
        const double im = normal(rng);
        out[k]          = s[k] + sigma * cplx{re, im};
    }
    return s.with_samples(std::move(out));
}

Signal derivative(const Signal& s) {
    const std::size_t n = s.size();
    std::vector<cplx> d(n, cplx{});
    if (n == 1) {
        return s.with_samples(std::move(d));
    }
    const double r = s.rate();
    d.front()      = (s[1] - s[0]) * r;
    d.back()       = (s[n - 1] - s[n - 2]) * r;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        d[k] = (s[k + 1] - s[k - 1]) * (r / 2.0);
    }
    return s.with_samples(std::move(d));
}

} // namespace nbtoa::sigproc
