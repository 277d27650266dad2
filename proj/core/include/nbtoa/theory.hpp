#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nbtoa/attack.hpp"
#include "nbtoa/btcs.hpp"
#include "nbtoa/signal.hpp"

namespace nbtoa::theory {

struct DerivationReport {
    double lhs       = 0.0;
    double rhs       = 0.0;
    double abs_err   = 0.0;
    double rel_err   = 0.0;
    double tolerance = 0.0; // relative
    double floor     = 0.0; // absolute, used near analytic zeros
    bool   pass      = false;
};

/// Builds a report: pass iff abs_err <= floor or rel_err <= tolerance.
[[nodiscard]] DerivationReport make_report(double lhs, double rhs, double tolerance, double floor);

/// Band-limited cross-correlation R(tau) = integral a(t) conj(b(t - tau)) dt, evaluated at any real lag
/// from the zero-padded spectra of the two sampled records.
class SpectralCorrelation {
public:
    SpectralCorrelation(const Signal& a, const Signal& b);
    [[nodiscard]] cplx   operator()(double tau_s) const;
    [[nodiscard]] double power(double tau_s) const { return std::norm((*this)(tau_s)); }
    /// Lag of the maximum of |R|^2: integer-lag scan, then golden-section search within one sample.
    [[nodiscard]] double peak_lag() const;

private:
    std::vector<cplx>   weights_;
    std::vector<double> freqs_;
    std::size_t         nyquist_ = static_cast<std::size_t>(-1);
    double              rate_;
    std::ptrdiff_t      n_a_;
    std::ptrdiff_t      n_b_;
};

/// lhs: central difference of |R~(tau)|^2 at tau = 0 with step fd_step (band-limited lag interpolation);
/// rhs: -2 Re{<dx, x'> <x~, x>*}. Tolerance 1%, floor 1e-9 * |R(0)|^2 * rate.
[[nodiscard]] DerivationReport verify_p_tilde_derivative(const Signal& x, const Signal& delta_x, double fd_step_s);

/// Unit-envelope GFSK burst exp(j phi) and its analytic derivative j phi' exp(j phi).
struct FskBurst {
    Signal x;
    Signal x_prime;
    int    n_symbols = 0;
};
[[nodiscard]] FskBurst fsk_burst(std::uint64_t phi_seed, bool conjugate = false, int n_bits = 64, int oversampling = 8,
                                 btcs::PhyMode phy = btcs::PhyMode::le1m());

/// Re<m x, x'> for a random GFSK trajectory with a real mask; rhs = 0, floor 1e-9 * (energy per symbol) * symbol rate.
/// `mask` must share the burst's length (see fsk_burst) and be real.
[[nodiscard]] DerivationReport verify_fsk_real_mask(std::uint64_t phi_seed, const Signal& mask);
[[nodiscard]] DerivationReport verify_fsk_real_mask(std::uint64_t phi_seed, const attack::MaskSpec& mask);

/// (Re<m x, x'>, Re<m x2, x2'>) with x = exp(j phi) and x2 = exp(-j phi).
[[nodiscard]] std::pair<double, double> verify_fsk_complex_mask_flip(std::uint64_t phi_seed, const Signal& mask);
[[nodiscard]] std::pair<double, double> verify_fsk_complex_mask_flip(std::uint64_t phi_seed, const attack::MaskSpec& mask);

/// Two-way-ranging time of flight (t_round - (1 - drift) t_reply) / 2. Negative results throw std::domain_error.
[[nodiscard]] double tof_twr(double t_round_s, double t_reply_s, double drift);

struct PulseFamily {
    double sigma_s   = 1e-6;
    double rate_hz   = 100e6;
    double half_span = 6.0; // pulse support in sigmas on each side
};

[[nodiscard]] Signal gaussian_pulse(const PulseFamily& family, double advance_s = 0.0);

struct AdvanceRow {
    double delta_s     = 0.0;
    double predicted_s = 0.0; // advance (positive = earlier)
    double measured_s  = 0.0;
    double rel_err     = 0.0;
};

/// For every delta, compares the first-order predictor against the measured peak of the truly advanced pulse.
[[nodiscard]] std::vector<AdvanceRow> advance_prediction_study(const PulseFamily& family, const std::vector<double>& deltas_s);

/// Seeded (x, dx) pair from the verification family: truncations, shifts, NGD and derivative-exponential
/// masks on real Gaussian pulses or Gaussian-shaped BPSK sequences, optionally rotated by a common phase.
struct PerturbationPair {
    std::string kind;
    Signal      x;
    Signal      delta_x;
};
[[nodiscard]] PerturbationPair perturbation_pair(std::uint64_t seed, std::size_t index);

struct SuiteOptions {
    std::uint64_t       seed             = 1;
    std::size_t         n_pairs          = 100;
    std::size_t         n_fsk_seeds      = 100;
    std::size_t         n_flip_ensemble  = 1000;
    std::vector<double> advance_deltas_s = {0.0, 1e-9, 2e-9, 5e-9, 10e-9, 20e-9, 50e-9, 100e-9, 200e-9};
};

struct NamedReport {
    std::string      name;
    DerivationReport report;
};

struct SuiteResult {
    std::vector<NamedReport> perturbation_identity;
    std::vector<NamedReport> fsk_real;
    std::vector<NamedReport> fsk_flip; // lhs = projection(x), rhs = -projection(conj trajectory)
    double                   flip_ensemble_mean    = 0.0;
    double                   flip_ensemble_stderr  = 0.0;
    bool                     flip_ensemble_pass    = false;
    std::vector<AdvanceRow>  advance;
    bool                     advance_pass          = false; // rel_err <= 0.2 for every delta <= 10 ns
    std::vector<NamedReport> tof;

    [[nodiscard]] bool pass() const;
};

[[nodiscard]] SuiteResult run_suite(const SuiteOptions& options = {});

} // namespace nbtoa::theory
