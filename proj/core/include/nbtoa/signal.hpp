#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace nbtoa {

using cplx = std::complex<double>;

/// Precondition or configuration violation detected by the library.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Uniformly sampled complex waveform. Sample k sits at t0 + k / rate.
class Signal {
public:
    Signal(std::vector<cplx> samples, double rate_hz, double t0_s = 0.0);

    [[nodiscard]] std::span<const cplx> samples() const noexcept { return samples_; }
    [[nodiscard]] const std::vector<cplx>& data() const noexcept { return samples_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] const cplx& operator[](std::size_t k) const noexcept { return samples_[k]; }

    [[nodiscard]] double rate() const noexcept { return rate_; }
    [[nodiscard]] double t0() const noexcept { return t0_; }
    [[nodiscard]] double dt() const noexcept { return 1.0 / rate_; }
    [[nodiscard]] double duration() const noexcept { return static_cast<double>(samples_.size()) / rate_; }
    [[nodiscard]] double time_at(double k) const noexcept { return t0_ + k / rate_; }

    /// Same time axis, new sample values.
    [[nodiscard]] Signal with_samples(std::vector<cplx> samples) const { return {std::move(samples), rate_, t0_}; }

    /// Mean |x|^2 over [begin, end).
    [[nodiscard]] double mean_power(std::size_t begin = 0, std::size_t end = static_cast<std::size_t>(-1)) const;
    [[nodiscard]] double energy() const; // sum |x|^2 * dt

    friend bool operator==(const Signal&, const Signal&) = default;

private:
    std::vector<cplx> samples_;
    double rate_;
    double t0_;
};

/// Linear cross-correlation on a uniform lag axis.
///
/// values[i] corresponds to a lag of (i - zero_index) / rate + lag_offset seconds,
/// where lag_offset absorbs a difference of the two inputs' t0.
class Correlation {
public:
    Correlation(std::vector<cplx> values, double rate_hz, std::ptrdiff_t zero_index, double lag_offset_s = 0.0);

    [[nodiscard]] std::span<const cplx> values() const noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] const cplx& operator[](std::size_t i) const noexcept { return values_[i]; }
    [[nodiscard]] double rate() const noexcept { return rate_; }
    [[nodiscard]] std::ptrdiff_t zero_index() const noexcept { return zero_index_; }
    [[nodiscard]] double lag_offset() const noexcept { return lag_offset_; }

    [[nodiscard]] double lag_seconds(double index) const noexcept {
        return (index - static_cast<double>(zero_index_)) / rate_ + lag_offset_;
    }
    /// Index of an integer lag expressed in samples.
    [[nodiscard]] std::ptrdiff_t index_of_lag(std::ptrdiff_t lag_samples) const noexcept { return zero_index_ + lag_samples; }

private:
    std::vector<cplx> values_;
    double rate_;
    std::ptrdiff_t zero_index_;
    double lag_offset_;
};

/// <a, b> = sum a[k] conj(b[k]) * dt. Inputs must share rate and length.
[[nodiscard]] cplx inner_product(const Signal& a, const Signal& b);

/// Throws ConfigError unless a and b share rate, length and t0.
void require_aligned(const Signal& a, const Signal& b, const char* what);

} // namespace nbtoa
