#include "nbtoa/signal.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace nbtoa {

Signal::Signal(std::vector<cplx> samples, double rate_hz, double t0_s) : samples_(std::move(samples)), rate_(rate_hz), t0_(t0_s) {
    if (!(rate_ > 0.0) || !std::isfinite(rate_)) {
        throw ConfigError(fmt::format("Signal: rate must be positive and finite, got {}", rate_));
    }
    if (samples_.empty()) {
        throw ConfigError("Signal: at least one sample is required");
    }
    if (!std::isfinite(t0_)) {
        throw ConfigError("Signal: t0 must be finite");
    }
}

double Signal::mean_power(std::size_t begin, std::size_t end) const {
    end = std::min(end, samples_.size());
    if (begin >= end) {
        throw ConfigError("Signal::mean_power: empty range");
    }
    double acc = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
        acc += std::norm(samples_[k]);
    }
    return acc / static_cast<double>(end - begin);
}

double Signal::energy() const {
    double acc = 0.0;
    for (const auto& v : samples_) {
        acc += std::norm(v);
    }
    return acc / rate_;
}

Correlation::Correlation(std::vector<cplx> values, double rate_hz, std::ptrdiff_t zero_index, double lag_offset_s)
    : values_(std::move(values)), rate_(rate_hz), zero_index_(zero_index), lag_offset_(lag_offset_s) {
    if (values_.empty()) {
        throw ConfigError("Correlation: empty value sequence");
    }
    if (!(rate_ > 0.0)) {
        throw ConfigError("Correlation: rate must be positive");
    }
    if (zero_index_ < 0 || zero_index_ >= static_cast<std::ptrdiff_t>(values_.size())) {
        throw ConfigError(fmt::format("Correlation: zero-lag index {} outside [0, {})", zero_index_, values_.size()));
    }
}

void require_aligned(const Signal& a, const Signal& b, const char* what) {
    if (a.rate() != b.rate()) {
        throw ConfigError(fmt::format("{}: rate mismatch ({} vs {} Hz)", what, a.rate(), b.rate()));
    }
    if (a.size() != b.size()) {
        throw ConfigError(fmt::format("{}: length mismatch ({} vs {})", what, a.size(), b.size()));
    }
    if (std::abs(a.t0() - b.t0()) > 1e-3 / a.rate()) {
        throw ConfigError(fmt::format("{}: time axes not aligned (t0 {} vs {})", what, a.t0(), b.t0()));
    }
}

cplx inner_product(const Signal& a, const Signal& b) {
    require_aligned(a, b, "inner_product");
    cplx acc{0.0, 0.0};
    for (std::size_t k = 0; k < a.size(); ++k) {
        acc += a[k] * std::conj(b[k]);
    }
    return acc * a.dt();
}

} // namespace nbtoa
