#include "nbtoa/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "nbtoa/fft.hpp"

namespace nbtoa::attack {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Raised-cosine step centred on x = 0 with total width w (ideal step when w == 0).
double soft_step(double x, double w) {
    if (w <= 0.0) {
        return x >= 0.0 ? 1.0 : 0.0;
    }
    if (x <= -w / 2.0) {
        return 0.0;
    }
    if (x >= w / 2.0) {
        return 1.0;
    }
    return 0.5 * (1.0 - std::cos(std::numbers::pi * (x + w / 2.0) / w));
}

void validate(const MaskSpec& spec, double rate_hz) {
    if (!(spec.period_s > 0.0) || !std::isfinite(spec.period_s)) {
        throw ConfigError(fmt::format("mask period must be positive, got {} s", spec.period_s));
    }
    if (!(rate_hz * spec.period_s >= 2.0)) {
        throw ConfigError(fmt::format("mask period {} s spans fewer than 2 samples at {} Hz", spec.period_s, rate_hz));
    }
    if (const auto* t = std::get_if<Truncation>(&spec.kind)) {
        if (!(t->duty > 0.0 && t->duty <= 1.0)) {
            throw ConfigError(fmt::format("truncation duty must lie in (0, 1], got {}", t->duty));
        }
        if (!(t->edge_s >= 0.0)) {
            throw ConfigError(fmt::format("truncation edge must be >= 0, got {} s", t->edge_s));
        }
        const double w = t->edge_s / spec.period_s;
        if (t->duty < 1.0 && (w > t->duty || w > 1.0 - t->duty)) {
            throw ConfigError(fmt::format("truncation edge {} s does not fit duty {} of a {} s period", t->edge_s, t->duty, spec.period_s));
        }
    } else {
        const auto& d = std::get<DerivativeExponential>(spec.kind);
        if (d.pulse_derivative.size() < 2) {
            throw ConfigError("derivative-exponential mask needs at least 2 pulse-derivative samples");
        }
        if (d.alpha.imag() != 0.0 && !spec.complex_allowed) {
            throw ConfigError("complex mask exponent requires complex_allowed");
        }
        if (!std::isfinite(d.alpha.real()) || !std::isfinite(d.alpha.imag())) {
            throw ConfigError("mask exponent must be finite");
        }
    }
}

cplx mask_value(const MaskSpec& spec, double u) {
    // u in [0, 1): position inside the period.
    if (const auto* t = std::get_if<Truncation>(&spec.kind)) {
        if (t->duty >= 1.0) {
            return {1.0, 0.0};
        }
        const double w = t->edge_s / spec.period_s;
        double       x = u;
        if (x >= 1.0 - w / 2.0) {
            x -= 1.0;
        }
        return {soft_step(x, w) - soft_step(x - t->duty, w), 0.0};
    }
    const auto&  d   = std::get<DerivativeExponential>(spec.kind);
    const auto   n   = d.pulse_derivative.size();
    const double pos = u * static_cast<double>(n);
    const auto   i0  = std::min(static_cast<std::size_t>(pos), n - 1);
    const auto   i1  = (i0 + 1) % n;
    const double fr  = pos - static_cast<double>(i0);
    const double g   = (1.0 - fr) * d.pulse_derivative[i0] + fr * d.pulse_derivative[i1];
    return std::exp(d.alpha * g);
}

} // namespace

MaskSpec MaskSpec::truncation(double duty, double period_s, double offset_s) {
    MaskSpec spec;
    spec.kind     = Truncation{duty, period_s / 16.0};
    spec.period_s = period_s;
    spec.offset_s = offset_s;
    return spec;
}

Signal build_mask(const MaskSpec& spec, double rate_hz, std::size_t n_samples, double t0_s) {
    validate(spec, rate_hz);
    if (n_samples == 0) {
        throw ConfigError("build_mask: n_samples must be positive");
    }
    const double period_samples = spec.period_s * rate_hz;
    const auto   np             = static_cast<std::size_t>(std::llround(period_samples));
    const bool   integer_period = std::abs(period_samples - static_cast<double>(np)) < 1e-9;

    std::vector<cplx> m(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
        // Reducing k modulo the period keeps integer-period masks exactly periodic.
        const double kk = integer_period ? static_cast<double>(k % np) : static_cast<double>(k);
        double       u  = std::fmod((kk / rate_hz + t0_s - spec.offset_s) / spec.period_s, 1.0);
        if (u < 0.0) {
            u += 1.0;
        }
        if (u >= 1.0) {
            u = 0.0;
        }
        m[k] = mask_value(spec, u);
    }
    return Signal(std::move(m), rate_hz, t0_s);
}

Signal apply_mask(const Signal& s, const MaskSpec& spec) {
    const auto        m = build_mask(spec, s.rate(), s.size(), s.t0());
    std::vector<cplx> out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        out[k] = s[k] * m[k];
    }
    return s.with_samples(std::move(out));
}

std::string_view realization_name(NgdRealization r) {
    return r == NgdRealization::frequency_domain ? "frequency_domain" : "rational_discrete";
}

NgdRealization realization_from_name(std::string_view name) {
    if (name == "frequency_domain") {
        return NgdRealization::frequency_domain;
    }
    if (name == "rational_discrete") {
        return NgdRealization::rational_discrete;
    }
    throw ConfigError(fmt::format("unknown NGD realization '{}'", name));
}

cplx ngd_response(const NgdFilterSpec& spec, double frequency_hz) {
    const double omega = kTwoPi * (frequency_hz >= 0.0 ? frequency_hz - spec.center_freq : frequency_hz + spec.center_freq);
    const cplx   jwt{0.0, omega * spec.delta_t};
    return 1.0 + jwt / (1.0 + jwt);
}

std::vector<cplx> ngd_response(const NgdFilterSpec& spec, std::span<const double> frequencies_hz) {
    std::vector<cplx> out;
    out.reserve(frequencies_hz.size());
    for (double f : frequencies_hz) {
        out.push_back(ngd_response(spec, f));
    }
    return out;
}

double ngd_group_delay(double delta_t, double omega) {
    const double x2 = (omega * delta_t) * (omega * delta_t);
    return -delta_t * (1.0 - 2.0 * x2) / ((1.0 + x2) * (1.0 + 4.0 * x2));
}

sigproc::RationalSection ngd_bilinear_section(double delta_t, double rate_hz) {
    const double k = 2.0 * rate_hz * delta_t;
    return {{(1.0 + 2.0 * k) / (1.0 + k), (1.0 - 2.0 * k) / (1.0 + k)}, {1.0, (1.0 - k) / (1.0 + k)}};
}

Signal apply_ngd(const Signal& s, const NgdFilterSpec& spec, std::size_t tail) {
    if (!(spec.delta_t >= 0.0) || !std::isfinite(spec.delta_t)) {
        throw ConfigError(fmt::format("NGD delta_t must be >= 0, got {} s", spec.delta_t));
    }
    if (!(spec.center_freq >= 0.0) || !(spec.center_freq < s.rate() / 2.0)) {
        throw ConfigError(fmt::format("NGD centre {} Hz must lie in [0, {}) Hz", spec.center_freq, s.rate() / 2.0));
    }
    if (spec.delta_t == 0.0) {
        return s;
    }

    // Occupied band: smallest distance B from the centre (same sideband rule as the response) holding 99% of the energy.
    {
        const auto          X = fft::forward(s.samples());
        const std::size_t   n = X.size();
        std::vector<std::pair<double, double>> bins(n);
        double              total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double f = fft::bin_frequency(k, n, s.rate());
            const double d = f >= 0.0 ? std::abs(f - spec.center_freq) : std::abs(f + spec.center_freq);
            bins[k]        = {d, std::norm(X[k])};
            total += std::norm(X[k]);
        }
        if (total > 0.0) {
            std::sort(bins.begin(), bins.end());
            double acc  = 0.0;
            double band = 0.0;
            for (const auto& [d, e] : bins) {
                acc += e;
                band = d;
                if (acc >= 0.99 * total) {
                    break;
                }
            }
            if (spec.center_freq + band >= s.rate() / 2.0) {
                throw ConfigError(fmt::format("NGD: occupied band {} +/- {} Hz reaches Nyquist at {} Hz", spec.center_freq, band, s.rate()));
            }
        }
    }

    if (spec.realization == NgdRealization::rational_discrete) {
        const auto h = sigproc::LinearFilter::rational({ngd_bilinear_section(spec.delta_t, s.rate())}, s.rate());
        if (spec.center_freq == 0.0) {
            return sigproc::apply_filter(s, h, tail);
        }
        const auto down = sigproc::frequency_shift(s, -spec.center_freq);
        return sigproc::frequency_shift(sigproc::apply_filter(down, h, tail), spec.center_freq);
    }

    const std::size_t   N = sigproc::padded_length(s.size(), tail);
    std::vector<double> freqs(N);
    for (std::size_t i = 0; i < N; ++i) {
        // Ascending bin frequencies: the negative half first.
        freqs[i] = fft::bin_frequency((i + (N + 1) / 2) % N, N, s.rate());
    }
    auto values = ngd_response(spec, freqs);
    return sigproc::apply_filter(s, sigproc::LinearFilter::table(std::move(freqs), std::move(values), s.rate()), tail);
}

double perturbation_projection(const Signal& x, const Signal& x_tilde) {
    require_aligned(x, x_tilde, "perturbation_projection");
    return inner_product(x_tilde, sigproc::derivative(x)).real();
}

double predict_advance(const Signal& x, const Signal& x_tilde) {
    require_aligned(x, x_tilde, "predict_advance");
    const std::size_t n = x.size();
    if (n < 3) {
        throw ConfigError("predict_advance: need at least 3 samples");
    }
    std::vector<cplx> dx(n);
    for (std::size_t k = 0; k < n; ++k) {
        dx[k] = x_tilde[k] - x[k];
    }
    const Signal delta = x.with_samples(std::move(dx));
    const auto   xp    = sigproc::derivative(x);
    const double p_tilde_prime = -2.0 * (inner_product(delta, xp) * std::conj(inner_product(x_tilde, x))).real();

    // R(m) = sum x[k + m] conj(x[k]) dt, the same lag convention as cross_correlate.
    auto autocorr = [&](std::ptrdiff_t m) {
        cplx acc{};
        for (std::size_t k = 0; k < n; ++k) {
            const auto j = static_cast<std::ptrdiff_t>(k) + m;
            if (j >= 0 && j < static_cast<std::ptrdiff_t>(n)) {
                acc += x[static_cast<std::size_t>(j)] * std::conj(x[k]);
            }
        }
        return acc * x.dt();
    };
    const double p0  = std::norm(autocorr(0));
    const double pp  = std::norm(autocorr(1));
    const double pm  = std::norm(autocorr(-1));
    const double p_2 = (pp - 2.0 * p0 + pm) * x.rate() * x.rate();
    if (!(p_2 < 0.0)) {
        throw std::domain_error(fmt::format("predict_advance: correlation curvature {} is not negative", p_2));
    }
    return -p_tilde_prime / p_2;
}

std::vector<double> phase_offset_sweep(const Signal& x, const Signal& delta_x, std::span<const double> phis) {
    require_aligned(x, delta_x, "phase_offset_sweep");
    const cplx          proj = inner_product(delta_x, sigproc::derivative(x));
    std::vector<double> out;
    out.reserve(phis.size());
    for (double phi : phis) {
        out.push_back((std::polar(1.0, phi) * proj).real());
    }
    return out;
}

} // namespace nbtoa::attack
