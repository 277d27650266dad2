#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nbtoa/signal.hpp"
#include "nbtoa/sigproc.hpp"

namespace nbtoa::attack {

/// Keeps the leading `duty` fraction of every period. `edge_s` is the width of the raised-cosine
/// transitions, centred on the nominal switching instants; zero gives ideal steps.
struct Truncation {
    double duty   = 0.5;
    double edge_s = 0.0;
};

/// m(t) = exp(alpha * g'(t)) with g' tabulated uniformly over one period (linear interpolation,
/// periodic wrap). A complex alpha requires MaskSpec::complex_allowed.
struct DerivativeExponential {
    cplx                alpha{0.3, 0.0};
    std::vector<double> pulse_derivative;
};

struct MaskSpec {
    std::variant<Truncation, DerivativeExponential> kind = Truncation{};
    double period_s        = 1e-6;
    double offset_s        = 0.0; // mask phase relative to the first symbol edge at t = 0
    bool   complex_allowed = false;

    /// Truncation with the default 1/16-period edge.
    static MaskSpec truncation(double duty, double period_s, double offset_s = 0.0);
};

/// Periodic mask on the time axis t = t0 + k / rate.
[[nodiscard]] Signal build_mask(const MaskSpec& spec, double rate_hz, std::size_t n_samples, double t0_s = 0.0);
[[nodiscard]] Signal apply_mask(const Signal& s, const MaskSpec& spec);

enum class NgdRealization { frequency_domain, rational_discrete };

struct NgdFilterSpec {
    double         delta_t     = 62e-9;
    double         center_freq = 0.0;
    NgdRealization realization = NgdRealization::frequency_domain;
};

[[nodiscard]] std::string_view realization_name(NgdRealization r);
[[nodiscard]] NgdRealization   realization_from_name(std::string_view name);

/// H = 1 + j w dt / (1 + j w dt) with w = 2 pi (f - fc) for f >= 0 and 2 pi (f + fc) for f < 0.
[[nodiscard]] cplx              ngd_response(const NgdFilterSpec& spec, double frequency_hz);
[[nodiscard]] std::vector<cplx> ngd_response(const NgdFilterSpec& spec, std::span<const double> frequencies_hz);

/// Closed-form group delay of the response at offset w from the band centre.
[[nodiscard]] double ngd_group_delay(double delta_t, double omega);

/// Baseband bilinear discretization of (1 + 2 s dt) / (1 + s dt) at the given rate.
[[nodiscard]] sigproc::RationalSection ngd_bilinear_section(double delta_t, double rate_hz);

[[nodiscard]] Signal apply_ngd(const Signal& s, const NgdFilterSpec& spec, std::size_t tail = sigproc::default_filter_tail);

/// Re<x_tilde, x'> with x' by central differences. Positive means the peak moves earlier.
[[nodiscard]] double perturbation_projection(const Signal& x, const Signal& x_tilde);

/// First-order peak lag of the correlation of x_tilde against x, in seconds (negative = earlier):
/// -P~'(0) / P''(0) with P~'(0) = -2 Re{<dx, x'> <x_tilde, x>*}.
[[nodiscard]] double predict_advance(const Signal& x, const Signal& x_tilde);

/// Re{exp(j phi) <dx, x'>} for every phi.
[[nodiscard]] std::vector<double> phase_offset_sweep(const Signal& x, const Signal& delta_x, std::span<const double> phis);

} // namespace nbtoa::attack
