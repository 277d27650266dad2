#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "nbtoa/signal.hpp"

namespace nbtoa::sigproc {

/// Default zero-padding appended before frequency-domain filtering.
inline constexpr std::size_t default_filter_tail = 4096;

/// One rational section b(z^-1) / a(z^-1) with real coefficients; a[0] != 0.
struct RationalSection {
    std::vector<double> b;
    std::vector<double> a;
};

/// LTI filter in one of three representations:
///  - a cascade of rational sections at a reference rate (time-domain recursion),
///  - a response table over an ascending frequency grid (linear interpolation between points),
///  - an analytic response callable H(f).
/// The latter two are applied in the frequency domain.
class LinearFilter {
public:
    using Response = std::function<cplx(double frequency_hz)>;

    struct Rational {
        std::vector<RationalSection> sections;
        double                       rate;
        bool                         frequency_domain_only = false;
    };
    struct Table {
        std::vector<double> frequencies_hz;
        std::vector<cplx>   values;
        double              rate;
    };
    struct Analytic {
        Response response;
        double   rate;
    };

    static LinearFilter rational(std::vector<RationalSection> sections, double rate_hz, bool frequency_domain_only = false);
    static LinearFilter rational(std::vector<double> b, std::vector<double> a, double rate_hz, bool frequency_domain_only = false);
    static LinearFilter table(std::vector<double> frequencies_hz, std::vector<cplx> values, double rate_hz);
    static LinearFilter analytic(Response response, double rate_hz);

    /// Unit-gain identity filter and a pure k-sample delay, both rational.
    static LinearFilter identity(double rate_hz);
    static LinearFilter delay(std::size_t samples, double rate_hz);

    [[nodiscard]] cplx   response(double frequency_hz) const;
    [[nodiscard]] double rate() const noexcept;
    [[nodiscard]] bool   is_rational() const noexcept { return std::holds_alternative<Rational>(form_); }
    [[nodiscard]] bool   is_stable() const;

    [[nodiscard]] const Rational* as_rational() const noexcept { return std::get_if<Rational>(&form_); }

    /// Series connection. Two rational filters stay rational; anything else becomes analytic.
    [[nodiscard]] LinearFilter then(const LinearFilter& next) const;

private:
    explicit LinearFilter(std::variant<Rational, Table, Analytic> form) : form_(std::move(form)) {}
    std::variant<Rational, Table, Analytic> form_;
};

/// Schur-Cohn stability test: true iff all roots of a(z) lie strictly inside the unit circle.
[[nodiscard]] bool polynomial_is_stable(std::span<const double> a);

[[nodiscard]] Correlation cross_correlate(const Signal& a, const Signal& b);

[[nodiscard]] Signal frequency_shift(const Signal& s, double shift_hz);

struct ResampleOptions {
    int    half_width   = 128;  // kernel half-width in zero crossings of the lower rate
    double kaiser_beta  = 10.0; // window shape; ~100 dB stopband
    double cutoff_ratio = 1.0;  // cutoff as a fraction of the lower Nyquist frequency
};

[[nodiscard]] Signal resample(const Signal& s, double new_rate_hz, const ResampleOptions& options = {});

/// Band-limited delay by an arbitrary number of seconds (negative advances); length and t0 preserved.
[[nodiscard]] Signal time_shift(const Signal& s, double seconds, std::size_t tail = 256);

/// Zero-padded transform length used by frequency-domain filtering.
[[nodiscard]] std::size_t padded_length(std::size_t n, std::size_t tail = default_filter_tail);

[[nodiscard]] Signal apply_filter(const Signal& s, const LinearFilter& h, std::size_t tail = default_filter_tail);

struct GroupDelay {
    std::vector<double> seconds;
    std::vector<bool>   reliable; // false near response nulls or phase jumps
};

/// tau_g(f) = -d(arg H)/d(omega) by central differences with the given half-step.
[[nodiscard]] GroupDelay group_delay(const LinearFilter& h, std::span<const double> frequencies_hz, double half_step_hz = 500.0);

[[nodiscard]] double rms_bandwidth(const Signal& s);

[[nodiscard]] double crlb_toa_std(double snr_linear, double beta_rms_hz);

/// Circular complex Gaussian noise; per-sample variance = reference power / 10^(snr_db/10).
/// reference_power defaults to the mean power of the whole signal. snr_db = +inf returns the input.
[[nodiscard]] Signal add_awgn(const Signal& s, double snr_db, std::uint64_t seed, std::optional<double> reference_power = std::nullopt);

/// Digital Butterworth bandpass of total order `order` (even), -3 dB at f_lo and f_hi,
/// unit gain at the geometric band centre, as second-order sections.
[[nodiscard]] LinearFilter butterworth_bandpass(int order, double f_lo_hz, double f_hi_hz, double rate_hz);

/// Central-difference derivative with one-sided differences at the ends.
[[nodiscard]] Signal derivative(const Signal& s);

} // namespace nbtoa::sigproc
