#include "nbtoa/receiver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "nbtoa/sigproc.hpp"

namespace nbtoa::receiver {
namespace {

std::size_t samples_per(double seconds, double rate, const char* what) {
    const double n  = seconds * rate;
    const auto   ni = std::llround(n);
    if (ni < 1 || std::abs(n - static_cast<double>(ni)) > 1e-9 * std::max(1.0, n)) {
        throw ConfigError(fmt::format("{}: {} s is not a positive whole number of samples at {} Hz", what, seconds, rate));
    }
    return static_cast<std::size_t>(ni);
}

Signal differential(const Signal& s, std::size_t lag) {
    std::vector<cplx> d(s.size(), cplx{});
    for (std::size_t k = lag; k < s.size(); ++k) {
        d[k] = s[k] * std::conj(s[k - lag]);
    }
    return s.with_samples(std::move(d));
}

std::vector<double> unwrap(std::vector<double> phase) {
    double offset = 0.0;
    for (std::size_t k = 1; k < phase.size(); ++k) {
        const double raw  = phase[k] + offset;
        double       diff = raw - phase[k - 1];
        while (diff > std::numbers::pi) {
            offset -= 2.0 * std::numbers::pi;
            diff -= 2.0 * std::numbers::pi;
        }
        while (diff < -std::numbers::pi) {
            offset += 2.0 * std::numbers::pi;
            diff += 2.0 * std::numbers::pi;
        }
        phase[k] = phase[k - 1] + diff;
    }
    return phase;
}

} // namespace

Correlation differential_xcorr(const Signal& received, const Signal& tmpl, double t_sym_s) {
    if (received.rate() != tmpl.rate()) {
        throw ConfigError(fmt::format("differential_xcorr: rate mismatch ({} vs {} Hz)", received.rate(), tmpl.rate()));
    }
    const auto lag = samples_per(t_sym_s, received.rate(), "differential_xcorr");
    if (lag >= tmpl.size()) {
        throw ConfigError("differential_xcorr: template shorter than one symbol");
    }
    return sigproc::cross_correlate(differential(received, lag), differential(tmpl, lag));
}

ToaEstimate estimate_toa(const Correlation& c, std::size_t first, std::size_t last) {
    if (c.size() == 0) {
        throw ConfigError("estimate_toa: empty correlation");
    }
    last = std::min(last, c.size() - 1);
    if (first > last) {
        throw ConfigError(fmt::format("estimate_toa: empty search window [{}, {}]", first, last));
    }
    std::size_t best   = first;
    double      best_v = std::norm(c[first]);
    for (std::size_t i = first + 1; i <= last; ++i) {
        const double v = std::norm(c[i]);
        if (v > best_v) {
            best   = i;
            best_v = v;
        }
    }
    if (best == first || best == last) {
        throw std::domain_error(fmt::format("estimate_toa: correlation peak at window edge (index {})", best));
    }
    const double ym = std::norm(c[best - 1]);
    const double y0 = best_v;
    const double yp = std::norm(c[best + 1]);

    ToaEstimate est;
    est.coarse_index   = static_cast<std::ptrdiff_t>(best);
    est.peak_magnitude = std::sqrt(y0);
    const double denom = ym - 2.0 * y0 + yp;
    if (denom == 0.0) {
        est.flat_peak = true;
    } else {
        est.fractional = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
    }
    est.toa_seconds = c.lag_seconds(static_cast<double>(best) + est.fractional);
    return est;
}

ToaEstimate search_toa(const Correlation& c, double t_sym_s, std::optional<double> nominal_lag_s, double window_symbols) {
    if (c.size() < 3) {
        throw ConfigError("search_toa: correlation too short");
    }
    // Acquisition: global argmax, earliest on ties.
    std::size_t acq   = 0;
    double      acq_v = std::norm(c[0]);
    for (std::size_t i = 1; i < c.size(); ++i) {
        if (std::norm(c[i]) > acq_v) {
            acq   = i;
            acq_v = std::norm(c[i]);
        }
    }
    double centre = static_cast<double>(acq);
    if (nominal_lag_s) {
        centre = (*nominal_lag_s - c.lag_offset()) * c.rate() + static_cast<double>(c.zero_index());
    }
    const double half  = window_symbols * t_sym_s * c.rate();
    const double lo    = std::max(0.0, std::floor(centre - half));
    const double hi    = std::min(static_cast<double>(c.size() - 1), std::ceil(centre + half));
    if (hi < lo + 2.0) {
        throw ConfigError("search_toa: refinement window lies outside the correlation");
    }
    return estimate_toa(c, static_cast<std::size_t>(lo), static_cast<std::size_t>(hi));
}

bool check_bits(const Signal& received, std::span<const std::uint8_t> expected, btcs::PhyMode phy, const ToaEstimate& toa, std::size_t first,
                std::size_t count) {
    if (first >= expected.size()) {
        return false;
    }
    count = std::min(count, expected.size() - first);
    try {
        const double sps     = received.rate() / phy.symbol_rate();
        const double centre0 = (toa.toa_seconds - received.t0()) * received.rate() + (static_cast<double>(first) + 0.5) * sps;
        const auto   sync    = static_cast<std::ptrdiff_t>(std::llround(centre0));
        const auto   bits    = btcs::gfsk_demodulate(received, phy, sync, count);
        return std::equal(bits.begin(), bits.end(), expected.begin() + static_cast<std::ptrdiff_t>(first));
    } catch (const std::exception&) {
        return false;
    }
}

Signal align_to_template(const Signal& received, const Signal& tmpl, const ToaEstimate& toa) {
    if (received.rate() != tmpl.rate()) {
        throw ConfigError("align_to_template: rate mismatch");
    }
    // Template sample k sits at received time toa + tmpl.t0 + k / rate.
    const double pos   = (toa.toa_seconds + tmpl.t0() - received.t0()) * received.rate();
    const double whole = std::floor(pos);
    const double frac  = pos - whole;
    const Signal moved = frac == 0.0 ? received : sigproc::time_shift(received, -frac / received.rate());
    const auto   start = static_cast<std::ptrdiff_t>(whole);

    std::vector<cplx> out(tmpl.size(), cplx{});
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        const auto j = start + static_cast<std::ptrdiff_t>(k);
        if (j >= 0 && j < static_cast<std::ptrdiff_t>(moved.size())) {
            out[k] = moved[static_cast<std::size_t>(j)];
        }
    }
    return tmpl.with_samples(std::move(out));
}

double nadm_ncc(const Signal& received, const Signal& tmpl, const ToaEstimate& toa) {
    const auto r  = align_to_template(received, tmpl, toa);
    cplx       rs{};
    double     rr = 0.0;
    double     ss = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
        rs += r[k] * std::conj(tmpl[k]);
        rr += std::norm(r[k]);
        ss += std::norm(tmpl[k]);
    }
    if (rr == 0.0 || ss == 0.0) {
        throw std::domain_error("nadm_ncc: zero-energy input");
    }
    return std::abs(rs) / std::sqrt(rr * ss);
}

double nadm_pmse(const Signal& received, const Signal& tmpl, const ToaEstimate& toa) {
    const auto          r = align_to_template(received, tmpl, toa);
    const std::size_t   n = r.size();
    std::vector<double> env(n);
    for (std::size_t k = 0; k < n; ++k) {
        env[k] = std::abs(r[k]) * std::abs(tmpl[k]);
    }
    auto sorted = env;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
    const double threshold = 0.1 * sorted[n / 2];

    std::vector<double> idx;
    std::vector<double> phase;
    for (std::size_t k = 0; k < n; ++k) {
        if (env[k] > threshold) {
            idx.push_back(static_cast<double>(k));
            phase.push_back(std::arg(r[k] * std::conj(tmpl[k])));
        }
    }
    if (static_cast<double>(n - idx.size()) > 0.1 * static_cast<double>(n) || idx.size() < 3) {
        throw std::domain_error(fmt::format("nadm_pmse: envelope below threshold on {} of {} samples", n - idx.size(), n));
    }
    phase = unwrap(std::move(phase));

    const double m  = static_cast<double>(idx.size());
    double       sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        sx += idx[i];
        sy += phase[i];
        sxx += idx[i] * idx[i];
        sxy += idx[i] * phase[i];
    }
    const double den   = m * sxx - sx * sx;
    const double slope = den != 0.0 ? (m * sxy - sx * sy) / den : 0.0;
    const double icpt  = (sy - slope * sx) / m;
    double       acc   = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double e = phase[i] - (icpt + slope * idx[i]);
        acc += e * e;
    }
    return acc / m;
}

double nadm_dft(const Signal& packet, double symbol_rate_hz) {
    const std::size_t n = packet.size();
    if (n < 2) {
        throw ConfigError("nadm_dft: packet too short");
    }
    const auto ks = static_cast<std::ptrdiff_t>(std::llround(symbol_rate_hz * static_cast<double>(n) / packet.rate()));
    auto       bin = [&](std::ptrdiff_t k) {
        cplx acc{};
        for (std::size_t i = 0; i < n; ++i) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(i) / static_cast<double>(n);
            acc += std::norm(packet[i]) * std::polar(1.0, ang);
        }
        return std::norm(acc);
    };
    const double dc = bin(0);
    if (dc == 0.0) {
        throw std::domain_error("nadm_dft: zero-energy packet");
    }
    return (bin(ks - 1) + bin(ks) + bin(ks + 1)) / dc;
}

ReceiveResult receive(const Signal& received, const Signal& tmpl, std::span<const std::uint8_t> expected, btcs::PhyMode phy,
                      const ReceiveOptions& options) {
    const double t_sym = phy.symbol_duration();
    const auto   corr  = differential_xcorr(received, tmpl, t_sym);

    ReceiveResult out;
    out.toa       = search_toa(corr, t_sym, options.nominal_lag_s);
    out.toa.valid = check_bits(received, expected, phy, out.toa, options.check_first, options.check_count);
    if (options.metrics) {
        out.ncc = nadm_ncc(received, tmpl, out.toa);
        try {
            out.pmse = nadm_pmse(received, tmpl, out.toa);
        } catch (const std::domain_error&) {
            out.pmse.reset();
        }
        out.dft = nadm_dft(align_to_template(received, tmpl, out.toa), phy.symbol_rate());
    }
    return out;
}

} // namespace nbtoa::receiver
