#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "nbtoa/btcs.hpp"
#include "nbtoa/signal.hpp"

namespace nbtoa::receiver {

struct ToaEstimate {
    std::ptrdiff_t coarse_index   = 0;
    double         fractional     = 0.0; // samples, within [-0.5, 0.5]
    double         toa_seconds    = 0.0; // lag of the received packet relative to the template
    double         peak_magnitude = 0.0;
    bool           valid          = false; // set by the bit check
    bool           flat_peak      = false; // zero curvature at the peak; fractional forced to 0
};

struct NadmReport {
    double ncc  = 0.0;
    double pmse = 0.0;
    double dft  = 0.0;
};

/// Correlation of r[k] conj(r[k - L]) against s[k] conj(s[k - L]) with L = t_sym * rate samples;
/// products for k < L are zero. Lags follow cross_correlate.
[[nodiscard]] Correlation differential_xcorr(const Signal& received, const Signal& tmpl, double t_sym_s);

/// Parabolic refinement around the largest |c|^2 inside [first, last] (whole correlation by default).
/// Ties resolve to the earliest index. Throws std::domain_error when the peak sits on the window edge.
[[nodiscard]] ToaEstimate estimate_toa(const Correlation& c, std::size_t first = 0, std::size_t last = static_cast<std::size_t>(-1));

/// Acquisition over all lags, then refinement within +/- window_symbols around the nominal lag
/// (or around the acquisition peak when no nominal lag is given).
[[nodiscard]] ToaEstimate search_toa(const Correlation& c, double t_sym_s, std::optional<double> nominal_lag_s = std::nullopt,
                                     double window_symbols = 2.0);

/// Demodulates at the symbol centres implied by toa and compares bits [first, first + count) of expected.
/// Returns false on any mismatch or if the packet does not fit in the received signal.
[[nodiscard]] bool check_bits(const Signal& received, std::span<const std::uint8_t> expected, btcs::PhyMode phy, const ToaEstimate& toa,
                              std::size_t first = 0, std::size_t count = static_cast<std::size_t>(-1));

/// Received samples resampled onto the template grid implied by toa (fractional shift then crop,
/// zeros outside the received record). Output carries the template's time axis.
[[nodiscard]] Signal align_to_template(const Signal& received, const Signal& tmpl, const ToaEstimate& toa);

/// |<r, s>| / (|r| |s|) over the template extent.
[[nodiscard]] double nadm_ncc(const Signal& received, const Signal& tmpl, const ToaEstimate& toa);

/// Mean squared residual of the unwrapped phase of r conj(s) after a least-squares a + b k fit.
/// Samples with envelope below 10% of the median are excluded; more than 10% of them is an error.
[[nodiscard]] double nadm_pmse(const Signal& received, const Signal& tmpl, const ToaEstimate& toa);

/// Energy of the DFT of |r|^2 at the symbol-rate bin +/- 1 divided by the DC energy. `packet` is the
/// received record cropped to the packet extent.
[[nodiscard]] double nadm_dft(const Signal& packet, double symbol_rate_hz);

struct ReceiveOptions {
    std::optional<double> nominal_lag_s;
    std::size_t           check_first = 0;
    std::size_t           check_count = static_cast<std::size_t>(-1);
    bool                  metrics     = true;
};

struct ReceiveResult {
    ToaEstimate           toa;
    double                ncc  = 0.0;
    std::optional<double> pmse; // absent when the envelope is too weak for a phase reference
    double                dft  = 0.0;
};

/// Full receiver pass: differential correlation, peak search, bit check and metrics.
[[nodiscard]] ReceiveResult receive(const Signal& received, const Signal& tmpl, std::span<const std::uint8_t> expected, btcs::PhyMode phy,
                                    const ReceiveOptions& options = {});

} // namespace nbtoa::receiver
