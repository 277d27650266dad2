#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "nbtoa/fft.hpp"
#include "nbtoa/sigproc.hpp"

namespace nbtoa::sigproc {
namespace {

cplx evaluate_polynomial(std::span<const double> coeffs, cplx z_inv) {
    // Horner in z^-1.
    cplx acc{0.0, 0.0};
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        acc = acc * z_inv + *it;
    }
    return acc;
}

void validate_section(const RationalSection& s) {
    if (s.b.empty() || s.a.empty()) {
        throw ConfigError("RationalSection: empty coefficient sequence");
    }
    if (s.a.front() == 0.0) {
        throw ConfigError("RationalSection: a[0] must be non-zero");
    }
}

std::vector<cplx> filter_section(const RationalSection& section, std::vector<cplx> x) {
    const double a0    = section.a.front();
    const auto   order = std::max(section.a.size(), section.b.size());
    std::vector<double> b(order, 0.0);
    std::vector<double> a(order, 0.0);
    for (std::size_t i = 0; i < section.b.size(); ++i) {
        b[i] = section.b[i] / a0;
    }
    for (std::size_t i = 0; i < section.a.size(); ++i) {
        a[i] = section.a[i] / a0;
    }
    // Direct form II transposed.
    std::vector<cplx> state(order, cplx{});
    for (auto& v : x) {
        const cplx in  = v;
        const cplx out = b[0] * in + state[0];
        for (std::size_t i = 1; i < order; ++i) {
            const cplx next = (i + 1 < order) ? state[i] : cplx{};
            state[i - 1]    = b[i] * in - a[i] * out + next;
        }
        v = out;
    }
    return x;
}

Signal filter_frequency_domain(const Signal& s, const LinearFilter& h, std::size_t tail) {
    const std::size_t n = s.size();
    const std::size_t N = padded_length(n, tail);
    std::vector<cplx> buf(N, cplx{});
    std::copy(s.data().begin(), s.data().end(), buf.begin());
    auto X = fft::forward(buf);
    for (std::size_t k = 0; k < N; ++k) {
        X[k] *= h.response(fft::bin_frequency(k, N, s.rate()));
    }
    auto y = fft::inverse(X);
    y.resize(n);
    return s.with_samples(std::move(y));
}

} // namespace

bool polynomial_is_stable(std::span<const double> a) {
    std::vector<double> p(a.begin(), a.end());
    while (!p.empty() && p.back() == 0.0) {
        p.pop_back();
    }
    if (p.empty() || p.front() == 0.0) {
        return false;
    }
    const double a0 = p.front();
    for (auto& v : p) {
        v /= a0;
    }
    // Step-down recursion on reflection coefficients.
    for (std::size_t m = p.size() - 1; m >= 1; --m) {
        const double k = p[m];
        if (!(std::abs(k) < 1.0)) {
            return false;
        }
        const double        denom = 1.0 - k * k;
        std::vector<double> next(m);
        for (std::size_t i = 0; i < m; ++i) {
            next[i] = (p[i] - k * p[m - i]) / denom;
        }
        p = std::move(next);
    }
    return true;
}

LinearFilter LinearFilter::rational(std::vector<RationalSection> sections, double rate_hz, bool frequency_domain_only) {
    if (!(rate_hz > 0.0)) {
        throw ConfigError("LinearFilter: rate must be positive");
    }
    if (sections.empty()) {
        throw ConfigError("LinearFilter: at least one rational section is required");
    }
    for (const auto& s : sections) {
        validate_section(s);
    }
    return LinearFilter(Rational{std::move(sections), rate_hz, frequency_domain_only});
}

LinearFilter LinearFilter::rational(std::vector<double> b, std::vector<double> a, double rate_hz, bool frequency_domain_only) {
    return rational(std::vector<RationalSection>{RationalSection{std::move(b), std::move(a)}}, rate_hz, frequency_domain_only);
}

LinearFilter LinearFilter::table(std::vector<double> frequencies_hz, std::vector<cplx> values, double rate_hz) {
    if (!(rate_hz > 0.0)) {
        throw ConfigError("LinearFilter: rate must be positive");
    }
    if (frequencies_hz.size() != values.size() || frequencies_hz.empty()) {
        throw ConfigError("LinearFilter: response table needs equally sized, non-empty frequency and value sequences");
    }
    if (!std::is_sorted(frequencies_hz.begin(), frequencies_hz.end())) {
        throw ConfigError("LinearFilter: response table frequencies must be ascending");
    }
    return LinearFilter(Table{std::move(frequencies_hz), std::move(values), rate_hz});
}

LinearFilter LinearFilter::analytic(Response response, double rate_hz) {
    if (!(rate_hz > 0.0)) {
        throw ConfigError("LinearFilter: rate must be positive");
    }
    if (!response) {
        throw ConfigError("LinearFilter: empty response callable");
    }
    return LinearFilter(Analytic{std::move(response), rate_hz});
}

LinearFilter LinearFilter::identity(double rate_hz) { return rational(std::vector<double>{1.0}, std::vector<double>{1.0}, rate_hz); }

LinearFilter LinearFilter::delay(std::size_t samples, double rate_hz) {
    std::vector<double> b(samples + 1, 0.0);
    b.back() = 1.0;
    return rational(std::move(b), std::vector<double>{1.0}, rate_hz);
}

double LinearFilter::rate() const noexcept {
    return std::visit([](const auto& f) { return f.rate; }, form_);
}

bool LinearFilter::is_stable() const {
    if (const auto* r = as_rational()) {
        return std::all_of(r->sections.begin(), r->sections.end(), [](const RationalSection& s) { return polynomial_is_stable(s.a); });
    }
    return true;
}

cplx LinearFilter::response(double frequency_hz) const {
    struct Visitor {
        double f;
        cplx   operator()(const Rational& r) const {
            const cplx z_inv = std::polar(1.0, -2.0 * std::numbers::pi * f / r.rate);
            cplx       h{1.0, 0.0};
            for (const auto& s : r.sections) {
                h *= evaluate_polynomial(s.b, z_inv) / evaluate_polynomial(s.a, z_inv);
            }
            return h;
        }
        cplx operator()(const Table& t) const {
            const auto& fs = t.frequencies_hz;
            if (f <= fs.front()) {
                return t.values.front();
            }
            if (f >= fs.back()) {
                return t.values.back();
            }
            const auto   hi = static_cast<std::size_t>(std::upper_bound(fs.begin(), fs.end(), f) - fs.begin());
            const auto   lo = hi - 1;
            const double w  = (f - fs[lo]) / (fs[hi] - fs[lo]);
            return t.values[lo] * (1.0 - w) + t.values[hi] * w;
        }
        cplx operator()(const Analytic& a) const { return a.response(f); }
    };
    return std::visit(Visitor{frequency_hz}, form_);
}

LinearFilter LinearFilter::then(const LinearFilter& next) const {
    if (rate() != next.rate()) {
        throw ConfigError("LinearFilter::then: reference rates differ");
    }
    const auto* r1 = as_rational();
    const auto* r2 = next.as_rational();
    if (r1 != nullptr && r2 != nullptr) {
        auto sections = r1->sections;
        sections.insert(sections.end(), r2->sections.begin(), r2->sections.end());
        return rational(std::move(sections), rate(), r1->frequency_domain_only || r2->frequency_domain_only);
    }
    return analytic([first = *this, second = next](double f) { return first.response(f) * second.response(f); }, rate());
}

std::size_t padded_length(std::size_t n, std::size_t tail) { return fft::fast_size(n + tail); }

Signal apply_filter(const Signal& s, const LinearFilter& h, std::size_t tail) {
    if (const auto* r = h.as_rational()) {
        if (r->rate != s.rate()) {
            throw ConfigError(fmt::format("apply_filter: filter rate {} Hz differs from signal rate {} Hz", r->rate, s.rate()));
        }
        if (!h.is_stable()) {
            if (!r->frequency_domain_only) {
                throw std::domain_error("apply_filter: rational filter is unstable");
            }
            return filter_frequency_domain(s, h, tail);
        }
        std::vector<cplx> y = s.data();
        for (const auto& section : r->sections) {
            y = filter_section(section, std::move(y));
        }
        return s.with_samples(std::move(y));
    }
    if (h.rate() != s.rate()) {
        throw ConfigError(fmt::format("apply_filter: filter rate {} Hz differs from signal rate {} Hz", h.rate(), s.rate()));
    }
    return filter_frequency_domain(s, h, tail);
}

GroupDelay group_delay(const LinearFilter& h, std::span<const double> frequencies_hz, double half_step_hz) {
    if (!(half_step_hz > 0.0)) {
        throw ConfigError("group_delay: half step must be positive");
    }
    GroupDelay out;
    out.seconds.reserve(frequencies_hz.size());
    out.reliable.reserve(frequencies_hz.size());

    double scale = 0.0;
    for (double f : frequencies_hz) {
        scale = std::max(scale, std::abs(h.response(f)));
    }
    const double floor = 1e-9 * scale;

    for (double f : frequencies_hz) {
        const cplx   lo     = h.response(f - half_step_hz);
        const cplx   hi     = h.response(f + half_step_hz);
        const double dphase = std::arg(hi * std::conj(lo));
        out.seconds.push_back(-dphase / (2.0 * std::numbers::pi * 2.0 * half_step_hz));
        const bool ok = std::abs(lo) > floor && std::abs(hi) > floor && std::abs(dphase) < std::numbers::pi / 2.0;
        out.reliable.push_back(ok);
    }
    return out;
}

LinearFilter butterworth_bandpass(int order, double f_lo_hz, double f_hi_hz, double rate_hz) {
    if (order < 2 || order % 2 != 0) {
        throw ConfigError(fmt::format("butterworth_bandpass: order must be even and >= 2, got {}", order));
    }
    if (!(f_lo_hz > 0.0 && f_lo_hz < f_hi_hz && f_hi_hz < rate_hz / 2.0)) {
        throw ConfigError(fmt::format("butterworth_bandpass: invalid band [{}, {}] Hz at {} Hz", f_lo_hz, f_hi_hz, rate_hz));
    }
    const int    n   = order / 2; // low-pass prototype order
    const double fs2 = 2.0 * rate_hz;
    // Pre-warped analog band edges.
    const double w_lo = fs2 * std::tan(std::numbers::pi * f_lo_hz / rate_hz);
    const double w_hi = fs2 * std::tan(std::numbers::pi * f_hi_hz / rate_hz);
    const double w0sq = w_lo * w_hi;
    const double bw   = w_hi - w_lo;

    std::vector<cplx> upper;
    std::vector<cplx> real_poles;
    for (int k = 0; k < n; ++k) {
        const cplx p = std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1.0) / (2.0 * n));
        const cplx t = p * bw / 2.0;
        const cplx d = std::sqrt(t * t - w0sq);
        for (const cplx s : {t + d, t - d}) {
            const cplx z = (fs2 + s) / (fs2 - s);
            if (z.imag() > 1e-12) {
                upper.push_back(z);
            } else if (std::abs(z.imag()) <= 1e-12) {
                real_poles.emplace_back(z.real(), 0.0);
            }
        }
    }
    if (2 * upper.size() + real_poles.size() != static_cast<std::size_t>(order) || real_poles.size() % 2 != 0) {
        throw std::logic_error("butterworth_bandpass: unexpected pole configuration");
    }

    std::vector<RationalSection> sections;
    for (const auto& z : upper) {
        sections.push_back({{1.0, 0.0, -1.0}, {1.0, -2.0 * z.real(), std::norm(z)}});
    }
    for (std::size_t i = 0; i < real_poles.size(); i += 2) {
        const double z1 = real_poles[i].real();
        const double z2 = real_poles[i + 1].real();
        sections.push_back({{1.0, 0.0, -1.0}, {1.0, -(z1 + z2), z1 * z2}});
    }

    const double f_center = rate_hz / std::numbers::pi * std::atan(std::sqrt(w0sq) / fs2);
    auto         raw      = LinearFilter::rational(sections, rate_hz);
    const double gain     = std::abs(raw.response(f_center));
    const double per      = std::pow(gain, 1.0 / static_cast<double>(sections.size()));
    for (auto& s : sections) {
        for (auto& b : s.b) {
            b /= per;
        }
    }
    return LinearFilter::rational(std::move(sections), rate_hz);
}

} // namespace nbtoa::sigproc
