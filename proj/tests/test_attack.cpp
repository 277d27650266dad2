#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nbtoa/attack.hpp"
#include "nbtoa/btcs.hpp"
#include "nbtoa/sigproc.hpp"
#include "support.hpp"

using namespace nbtoa;
using namespace nbtoa::attack;
using oracle::pi;

namespace {

// Closed-form NGD group delay from the phase atan(2x) - atan(x), x = w dt.
double tau_oracle(double dt, double f) {
    const double x = 2 * pi * f * dt;
    return -dt * (2.0 / (1 + 4 * x * x) - 1.0 / (1 + x * x));
}

// Real Gaussian pulse exp(-(t - c)^2 / (2 s^2)) sampled at 1/rate, t = k / rate.
std::vector<cplx> pulse(std::size_t n, double rate, double centre_s, double sigma_s) {
    std::vector<cplx> v(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / rate - centre_s;
        v[k]           = std::exp(-0.5 * t * t / (sigma_s * sigma_s));
    }
    return v;
}

// Peak lag of sum a[n+lag] conj(b[n]) in samples: integer scan plus dense parabola through the neighbours.
double measured_peak_lag(const std::vector<cplx>& a, const std::vector<cplx>& b, std::ptrdiff_t max_lag) {
    const auto   p  = oracle::brute_force_peak(a, b, max_lag);
    const double ym = std::norm(oracle::xcorr_at(a, b, p - 1));
    const double y0 = std::norm(oracle::xcorr_at(a, b, p));
    const double yp = std::norm(oracle::xcorr_at(a, b, p + 1));
    return static_cast<double>(p) + oracle::dense_parabola_vertex(ym, y0, yp);
}

std::vector<cplx> times(const std::vector<cplx>& x, const Signal& m) {
    std::vector<cplx> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = x[k] * m[k];
    }
    return out;
}

} // namespace

TEST(BuildMask, FullDutyIsOnes) {
    const auto m = build_mask(MaskSpec::truncation(1.0, 1e-6), 8e6, 100);
    for (std::size_t k = 0; k < m.size(); ++k) {
        EXPECT_EQ(m[k], cplx(1.0));
    }
}

TEST(BuildMask, HalfDutySquareWave) {
    MaskSpec spec;
    spec.kind     = Truncation{0.5, 0.0};
    spec.period_s = 1e-6;
    const auto m  = build_mask(spec, 16e6, 160);
    for (std::size_t p = 0; p < 10; ++p) {
        int ones = 0;
        for (std::size_t k = 16 * p; k < 16 * p + 16; ++k) {
            EXPECT_TRUE(m[k] == cplx(1.0) || m[k] == cplx(0.0));
            ones += m[k] == cplx(1.0) ? 1 : 0;
            EXPECT_EQ(m[k].real(), k % 16 < 8 ? 1.0 : 0.0);
        }
        EXPECT_EQ(ones, 8);
    }
}

TEST(BuildMask, DerivativeExponentialPointwise) {
    // g' of a Gaussian pulse tabulated on the sample grid of one period.
    const std::size_t   M = 40;
    std::vector<double> gp(M);
    for (std::size_t j = 0; j < M; ++j) {
        const double t = (static_cast<double>(j) - 20.0) / 6.0;
        gp[j]          = -t * std::exp(-0.5 * t * t);
    }
    MaskSpec spec;
    spec.kind     = DerivativeExponential{cplx{0.3, 0.0}, gp};
    spec.period_s = 1e-6;
    const auto m  = build_mask(spec, 40e6, 3 * M);
    for (std::size_t k = 0; k < m.size(); ++k) {
        EXPECT_NEAR(std::abs(m[k] - std::exp(0.3 * gp[k % M])), 0.0, 1e-12);
    }
}

TEST(BuildMask, Errors) {
    EXPECT_THROW((void)build_mask(MaskSpec::truncation(0.5, 1e-6), 1.5e6, 10), ConfigError);
    EXPECT_THROW((void)build_mask(MaskSpec::truncation(0.0, 1e-6), 8e6, 10), ConfigError);
    EXPECT_THROW((void)build_mask(MaskSpec::truncation(1.2, 1e-6), 8e6, 10), ConfigError);
    MaskSpec c;
    c.kind = DerivativeExponential{cplx{0.3, 0.3}, {0.0, 1.0, 0.0, -1.0}};
    EXPECT_THROW((void)build_mask(c, 8e6, 10), ConfigError);
    c.complex_allowed = true;
    EXPECT_NO_THROW((void)build_mask(c, 8e6, 10));
}

TEST(BuildMaskProperty, ExactPeriodicity) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double rate = 8e6 * (1 + i % 4);
        const auto   spec = MaskSpec::truncation(u(rng), 1e-6, u(rng) * 1e-6);
        const auto   m    = build_mask(spec, rate, 2000, -3e-6);
        const auto   P    = static_cast<std::size_t>(std::llround(rate * 1e-6));
        for (std::size_t k = 0; k + P < m.size(); ++k) {
            ASSERT_EQ(m[k], m[k + P]);
        }
    }
}

TEST(ApplyMask, FullDutyIdentity) {
    const auto s = Signal(oracle::white_noise(64, 1), 8e6);
    EXPECT_EQ(apply_mask(s, MaskSpec::truncation(1.0, 1e-6)), s);
}

TEST(ApplyMask, LeadingHalfMovesPeakEarlier) {
    // Symmetric Gaussian ASK pulse filling one period; the mask keeps its leading half.
    const double rate = 100e6;
    const auto   x    = pulse(100, rate, 0.5e-6, 0.15e-6);
    MaskSpec     spec;
    spec.kind     = Truncation{0.5, 0.0};
    spec.period_s = 1e-6;
    const auto xt = apply_mask(Signal(x, rate), spec);
    const auto xv = std::vector<cplx>(xt.data());
    EXPECT_LT(measured_peak_lag(xv, x, 99), -1.0);
}

TEST(NgdResponse, UnityAtCentreAndBoundedGain) {
    const NgdFilterSpec spec{50e-9, 4.77e6};
    EXPECT_EQ(ngd_response(spec, 4.77e6), cplx(1.0));
    EXPECT_EQ(ngd_response(spec, -4.77e6), cplx(1.0));
    EXPECT_NEAR(std::abs(ngd_response({50e-9, 0.0}, 100e6)), 2.0, 0.02);
    for (double f = -40e6; f <= 40e6; f += 0.05e6) {
        const double g = std::abs(ngd_response(spec, f));
        EXPECT_GE(g, 1.0 - 1e-12);
        EXPECT_LE(g, 2.0 + 1e-12);
    }
}

TEST(NgdResponse, ConjugateSymmetricSidebands) {
    const NgdFilterSpec spec{62e-9, 4.77e6};
    for (double d : {0.1e6, 0.7e6, 2e6}) {
        EXPECT_LT(std::abs(ngd_response(spec, 4.77e6 + d) - std::conj(ngd_response(spec, -4.77e6 - d))), 1e-12);
    }
}

TEST(NgdResponse, GroupDelayMatchesClosedForm) {
    const NgdFilterSpec       spec{50e-9, 0.0};
    const auto                h = sigproc::LinearFilter::analytic([spec](double f) { return ngd_response(spec, f); }, 80e6);
    const std::vector<double> f{1e3, 0.1e6, 0.5e6, 1e6, 2.25e6, 5e6};
    const auto                g = sigproc::group_delay(h, f, 100.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        EXPECT_NEAR(g.seconds[i], tau_oracle(50e-9, f[i]), 1e-12) << f[i];
        EXPECT_NEAR(ngd_group_delay(50e-9, 2 * pi * f[i]), tau_oracle(50e-9, f[i]), 1e-15);
    }
    EXPECT_NEAR(g.seconds[0], -50e-9, 1e-12);
    // At 0.5 MHz the closed form gives about -42.2 ns.
    EXPECT_NEAR(g.seconds[2], -42.2e-9, 0.1e-9);
    // Sign change at w dt = 1 / sqrt(2).
    const double f0 = 1.0 / (std::sqrt(2.0) * 2 * pi * 50e-9);
    EXPECT_LT(ngd_group_delay(50e-9, 2 * pi * f0 * 0.98), 0.0);
    EXPECT_GT(ngd_group_delay(50e-9, 2 * pi * f0 * 1.02), 0.0);
}

TEST(ApplyNgd, AdvancesEnvelope) {
    // Gaussian-enveloped tone at the filter centre, envelope sigma 1 us (about 0.5 MHz wide).
    const double rate = 20e6;
    const double fc   = 2e6;
    auto         x    = oracle::gaussian(800, 400.0, 20.0, fc / rate);
    for (auto realization : {NgdRealization::frequency_domain, NgdRealization::rational_discrete}) {
        const auto y = apply_ngd(Signal(x, rate), {50e-9, fc, realization});
        const auto shift_s = (oracle::power_centroid(std::vector<cplx>(y.data())) - oracle::power_centroid(x)) / rate;
        EXPECT_NEAR(shift_s, -50e-9, 5e-9) << realization_name(realization);
    }
}

TEST(ApplyNgd, ZeroDelayIsIdentity) {
    const auto s = Signal(oracle::white_noise(100, 3), 8e6);
    EXPECT_EQ(apply_ngd(s, {0.0, 0.0}), s);
    const auto y = apply_ngd(s, {1e-15, 0.0});
    for (std::size_t k = 0; k < s.size(); ++k) {
        EXPECT_LT(std::abs(y[k] - s[k]), 1e-6);
    }
}

TEST(ApplyNgd, BandBeyondNyquistRejected) {
    const auto s = Signal(oracle::gaussian(400, 200.0, 8.0, 0.0), 8e6);
    EXPECT_THROW((void)apply_ngd(s, {50e-9, 3.9e6}), ConfigError);
    EXPECT_THROW((void)apply_ngd(s, {-1e-9, 0.0}), ConfigError);
    EXPECT_THROW((void)apply_ngd(s, {50e-9, 4e6}), ConfigError);
}

TEST(ApplyNgdProperty, ShiftInvariance) {
    const auto base = oracle::gaussian(300, 100.0, 12.0, 0.1);
    for (std::size_t k : {1U, 7U, 40U}) {
        std::vector<cplx> shifted(300, cplx{});
        std::copy(base.begin(), base.end() - static_cast<std::ptrdiff_t>(k), shifted.begin() + static_cast<std::ptrdiff_t>(k));
        const NgdFilterSpec spec{62e-9, 0.8e6};
        const auto          y0 = apply_ngd(Signal(base, 8e6), spec);
        const auto          y1 = apply_ngd(Signal(shifted, 8e6), spec);
        for (std::size_t i = k; i < 300; ++i) {
            EXPECT_LT(std::abs(y1[i] - y0[i - k]), 1e-6) << k;
        }
    }
}

TEST(Projection, ZeroForUnperturbed) {
    const auto x = Signal(pulse(400, 100e6, 2e-6, 0.3e-6), 100e6);
    const auto p = perturbation_projection(x, x);
    EXPECT_LT(std::abs(p), 1e-9 * x.energy() * x.rate());
    const auto z = Signal(oracle::gaussian(200, 100, 15, 0.03), 1.0);
    EXPECT_LT(std::abs(perturbation_projection(z, z)), 1e-9 * z.energy());
}

TEST(Projection, EarlierShiftAndLeadingHalfArePositive) {
    const double rate = 100e6;
    const auto   v    = pulse(400, rate, 2e-6, 0.3e-6);
    std::vector<cplx> early(400, cplx{});
    std::copy(v.begin() + 1, v.end(), early.begin()); // x~[n] = x[n + 1]
    const Signal x(v, rate);
    EXPECT_GT(perturbation_projection(x, Signal(early, rate)), 0.0);

    MaskSpec spec;
    spec.kind     = Truncation{0.5, 0.0};
    spec.period_s = 4e-6;
    EXPECT_GT(perturbation_projection(x, apply_mask(x, spec)), 0.0);
    EXPECT_THROW((void)perturbation_projection(x, Signal(v, rate, 1e-6)), ConfigError);
}

TEST(PredictAdvance, UnperturbedIsZero) {
    const Signal x(pulse(1200, 100e6, 6e-6, 1e-6), 100e6);
    EXPECT_NEAR(predict_advance(x, x), 0.0, 1e-15);
}

TEST(PredictAdvanceProperty, PureShifts) {
    const double rate = 100e6;
    const Signal x(pulse(1200, rate, 6e-6, 1e-6), rate);
    for (double delta : {1e-9, 2e-9, 5e-9, 10e-9, 15e-9, 20e-9}) {
        const Signal xt(pulse(1200, rate, 6e-6 - delta, 1e-6), rate);
        const double pred = predict_advance(x, xt);
        EXPECT_NEAR(pred, -delta, 0.2 * delta) << delta;
    }
}

TEST(PredictAdvance, MaskedPulseSignMatchesMeasurement) {
    const double rate = 100e6;
    const auto   v    = pulse(100, rate, 0.5e-6, 0.15e-6);
    MaskSpec     spec;
    spec.kind     = Truncation{0.5, 0.0};
    spec.period_s = 1e-6;
    const Signal x(v, rate);
    const auto   xt   = apply_mask(x, spec);
    const double pred = predict_advance(x, xt);
    EXPECT_LT(pred, 0.0);
    EXPECT_LT(measured_peak_lag(std::vector<cplx>(xt.data()), v, 99), 0.0);
}

TEST(PredictAdvance, DegenerateCurvature) {
    const Signal z(std::vector<cplx>(10, cplx{}), 1e6);
    EXPECT_THROW((void)predict_advance(z, z), std::domain_error);
}

TEST(PhaseSweep, QuadratureAndSymmetry) {
    const double rate = 100e6;
    const auto   v    = pulse(400, rate, 2e-6, 0.3e-6);
    const Signal x(v, rate);
    MaskSpec     spec;
    spec.kind     = Truncation{0.5, 0.0};
    spec.period_s = 4e-6;
    const auto        xt = apply_mask(x, spec);
    std::vector<cplx> d(400);
    for (std::size_t k = 0; k < 400; ++k) {
        d[k] = xt[k] - x[k];
    }
    const Signal dx(d, rate);
    const std::vector<double> phis{0.0, pi / 2, pi};
    const auto                v3 = phase_offset_sweep(x, dx, phis);
    EXPECT_NE(v3[0], 0.0);
    EXPECT_LT(std::abs(v3[1]), 1e-9 * std::abs(v3[0]));
    EXPECT_NEAR(v3[2], -v3[0], 1e-9 * std::abs(v3[0]));
}

TEST(PhaseSweep, SinusoidWithSingleMaximum) {
    const auto          x = Signal(oracle::gaussian(300, 150, 20, 0.02), 1e6);
    const auto          d = Signal(oracle::white_noise(300, 8), 1e6);
    std::vector<double> phis;
    for (int i = 0; i < 64; ++i) {
        phis.push_back(2 * pi * i / 64);
    }
    const auto v = phase_offset_sweep(x, d, phis);
    // Least-squares fit a cos + b sin; the residual must vanish.
    double cc = 0, ss = 0, cv = 0, sv = 0;
    for (std::size_t i = 0; i < phis.size(); ++i) {
        cc += std::cos(phis[i]) * std::cos(phis[i]);
        ss += std::sin(phis[i]) * std::sin(phis[i]);
        cv += std::cos(phis[i]) * v[i];
        sv += std::sin(phis[i]) * v[i];
    }
    const double a = cv / cc;
    const double b = sv / ss;
    int          maxima = 0;
    for (std::size_t i = 0; i < phis.size(); ++i) {
        EXPECT_NEAR(v[i], a * std::cos(phis[i]) + b * std::sin(phis[i]), 1e-9 * std::hypot(a, b));
        const double prev = v[(i + phis.size() - 1) % phis.size()];
        const double next = v[(i + 1) % phis.size()];
        maxima += v[i] > prev && v[i] >= next ? 1 : 0;
    }
    EXPECT_EQ(maxima, 1);
}

// Whenever the projection is positive and the correlation stays unimodal, the peak does not move later.
TEST(AdvanceConditionProperty, PositiveProjectionNeverDelays) {
    std::mt19937_64                        rng(21);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double                           rate = 100e6;
    int                                    checked = 0;
    for (int i = 0; i < 60; ++i) {
        const double sigma = (0.08 + 0.1 * U(rng)) * 1e-6;
        const auto   v     = pulse(100, rate, (0.4 + 0.2 * U(rng)) * 1e-6, sigma);
        MaskSpec     spec;
        spec.kind     = Truncation{0.3 + 0.6 * U(rng), 0.0};
        spec.period_s = 1e-6;
        spec.offset_s = (U(rng) - 0.5) * 0.2e-6;
        const Signal x(v, rate);
        const auto   xt = apply_mask(x, spec);
        const auto   xv = std::vector<cplx>(xt.data());
        if (perturbation_projection(x, xt) <= 0.0) {
            continue;
        }
        std::vector<double> mag;
        for (std::ptrdiff_t lag = -99; lag <= 99; ++lag) {
            mag.push_back(std::abs(oracle::xcorr_at(xv, v, lag)));
        }
        const auto peak = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
        const bool unimodal = std::is_sorted(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(peak) + 1) &&
                              std::is_sorted(mag.rbegin(), mag.rend() - static_cast<std::ptrdiff_t>(peak));
        if (!unimodal) {
            continue;
        }
        ++checked;
        EXPECT_LE(measured_peak_lag(xv, v, 99), 1e-3) << i;
    }
    EXPECT_GT(checked, 20);
}
