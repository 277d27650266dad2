#include "nbtoa/btcs.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "nbtoa/seed.hpp"

namespace nbtoa::btcs {
namespace {

constexpr std::uint64_t kAccessAddressStream = 1;
constexpr std::uint64_t kRandomPayloadStream = 2;
constexpr std::uint64_t kSoundingStream      = 3;

void validate_payload(const Payload& payload) {
    if (const auto* r = std::get_if<RandomPayload>(&payload)) {
        if (r->n_bits < 1 || r->n_bits > 128) {
            throw ConfigError(fmt::format("random sequence must hold 1..128 bits, got {}", r->n_bits));
        }
    } else if (const auto* s = std::get_if<SoundingPayload>(&payload)) {
        if (s->n_bits < 16) {
            throw ConfigError(fmt::format("sounding sequence needs at least 16 bits, got {}", s->n_bits));
        }
        if (s->n_markers < 0 || 4 * s->n_markers > s->n_bits) {
            throw ConfigError(fmt::format("{} markers do not fit into a {}-bit sounding sequence", s->n_markers, s->n_bits));
        }
    }
}

std::vector<double> gaussian_taps(double bt, int oversampling, int span_symbols) {
    const int    half  = span_symbols * oversampling / 2;
    const double sigma = std::sqrt(std::log(2.0)) / (2.0 * std::numbers::pi * bt); // in symbols
    std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
    double              sum = 0.0;
    for (int m = -half; m <= half; ++m) {
        const double t                              = static_cast<double>(m) / oversampling;
        taps[static_cast<std::size_t>(m + half)] = std::exp(-t * t / (2.0 * sigma * sigma));
        sum += taps[static_cast<std::size_t>(m + half)];
    }
    for (auto& v : taps) {
        v /= sum;
    }
    return taps;
}

} // namespace

PhyMode PhyMode::from_name(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper == "LE1M") {
        return le1m();
    }
    if (upper == "LE2M") {
        return le2m();
    }
    throw ConfigError(fmt::format("unknown PHY '{}', expected LE1M or LE2M", name));
}

std::string_view payload_kind_name(const Payload& p) {
    switch (p.index()) {
    case 1: return "random";
    case 2: return "sounding";
    default: return "none";
    }
}

int payload_bits(const Payload& p) {
    if (const auto* r = std::get_if<RandomPayload>(&p)) {
        return r->n_bits;
    }
    if (const auto* s = std::get_if<SoundingPayload>(&p)) {
        return s->n_bits;
    }
    return 0;
}

bool access_address_valid(std::uint32_t aa) noexcept {
    int run  = 1;
    int prev = static_cast<int>(aa & 1U);
    for (int i = 1; i < 32; ++i) {
        const int bit = static_cast<int>((aa >> i) & 1U);
        run           = bit == prev ? run + 1 : 1;
        if (run > 6) {
            return false;
        }
        prev = bit;
    }
    return true;
}

std::uint32_t draw_access_address(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (;;) {
        const auto aa = static_cast<std::uint32_t>(rng() >> 32);
        if (access_address_valid(aa)) {
            return aa;
        }
    }
}

SoundingSequence sounding_sequence(int n_bits, int n_markers, std::uint64_t seed) {
    if (n_bits < 16) {
        throw ConfigError(fmt::format("sounding sequence needs at least 16 bits, got {}", n_bits));
    }
    if (n_markers < 0 || 4 * n_markers > n_bits) {
        throw ConfigError(fmt::format("{} markers do not fit into a {}-bit sounding sequence", n_markers, n_bits));
    }
    SoundingSequence out;
    out.bits.resize(static_cast<std::size_t>(n_bits));
    for (int i = 0; i < n_bits; ++i) {
        out.bits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i % 2 == 0 ? 1 : 0);
    }
    if (n_markers == 0) {
        return out;
    }

    // Uniform over non-overlapping placements: choose distinct v_i in [0, n_bits - 3m - 1],
    // then start_i = v_i + 3 i keeps consecutive 4-bit blocks disjoint.
    std::mt19937_64  rng(seed);
    const int        range = n_bits - 3 * n_markers;
    std::vector<int> pool(static_cast<std::size_t>(range));
    for (int i = 0; i < range; ++i) {
        pool[static_cast<std::size_t>(i)] = i;
    }
    for (int i = 0; i < n_markers; ++i) {
        std::uniform_int_distribution<int> pick(i, range - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<int> chosen(pool.begin(), pool.begin() + n_markers);
    std::sort(chosen.begin(), chosen.end());
    for (int i = 0; i < n_markers; ++i) {
        const int start = chosen[static_cast<std::size_t>(i)] + 3 * i;
        out.marker_positions.push_back(start);
        const bool pattern_0110 = (rng() & 1U) == 0U;
        const std::uint8_t block[4] = {static_cast<std::uint8_t>(pattern_0110 ? 0 : 1), static_cast<std::uint8_t>(pattern_0110 ? 1 : 0),
                                       static_cast<std::uint8_t>(pattern_0110 ? 1 : 0), static_cast<std::uint8_t>(pattern_0110 ? 0 : 1)};
        std::copy(std::begin(block), std::end(block), out.bits.begin() + start);
    }
    return out;
}

BitLayout layout_of(const CsSyncConfig& config) {
    validate_payload(config.payload);
    BitLayout l;
    l.preamble      = static_cast<std::size_t>(config.phy.preamble_bits());
    l.access_begin  = l.preamble;
    l.payload_begin = l.access_begin + 32;
    l.trailer_begin = l.payload_begin + static_cast<std::size_t>(payload_bits(config.payload));
    l.total         = l.trailer_begin + 4;
    return l;
}

Bits build_cs_sync(const CsSyncConfig& config) {
    const auto layout = layout_of(config);
    const auto aa     = config.access_address.value_or(draw_access_address(derive_seed(config.seed, kAccessAddressStream)));
    if (!access_address_valid(aa)) {
        throw ConfigError(fmt::format("access address 0x{:08X} has a run of more than six identical bits", aa));
    }

    Bits bits;
    bits.reserve(layout.total);
    // On-air alternation runs on into the access address: the last preamble bit is the
    // complement of the first access-address bit.
    const auto first = static_cast<std::uint8_t>(aa & 1U);
    for (std::size_t i = 0; i < layout.preamble; ++i) {
        const bool same_as_first = (layout.preamble - i) % 2 == 0;
        bits.push_back(static_cast<std::uint8_t>(same_as_first ? first : 1 - first));
    }
    for (int i = 0; i < 32; ++i) {
        bits.push_back(static_cast<std::uint8_t>((aa >> i) & 1U));
    }
    if (const auto* r = std::get_if<RandomPayload>(&config.payload)) {
        std::mt19937_64 rng(derive_seed(config.seed, kRandomPayloadStream));
        for (int i = 0; i < r->n_bits; ++i) {
            bits.push_back(static_cast<std::uint8_t>(rng() >> 63));
        }
    } else if (const auto* s = std::get_if<SoundingPayload>(&config.payload)) {
        const auto seq = sounding_sequence(s->n_bits, s->n_markers, derive_seed(config.seed, kSoundingStream));
        bits.insert(bits.end(), seq.bits.begin(), seq.bits.end());
    }
    const auto last = bits.back();
    for (int i = 0; i < 4; ++i) {
        bits.push_back(static_cast<std::uint8_t>(i % 2 == 0 ? 1 - last : last));
    }
    return bits;
}

CsSyncPacket make_packet(const CsSyncConfig& config, int oversampling) {
    auto bits     = build_cs_sync(config);
    auto waveform = gfsk_modulate(bits, config.phy, oversampling, config.gfsk);
    CsSyncPacket packet{std::move(bits), config, 0, layout_of(config), oversampling, std::move(waveform)};
    packet.access_address = config.access_address.value_or(draw_access_address(derive_seed(config.seed, kAccessAddressStream)));
    return packet;
}

PhaseTrajectory gfsk_phase(std::span<const std::uint8_t> bits, PhyMode phy, int oversampling, const GfskParams& params) {
    if (oversampling < 4) {
        throw ConfigError(fmt::format("GFSK oversampling must be >= 4, got {}", oversampling));
    }
    if (bits.empty()) {
        throw ConfigError("GFSK: empty bit sequence");
    }
    if (!(params.bt > 0.0) || !(params.modulation_index > 0.0) || params.span_symbols < 1) {
        throw ConfigError("GFSK: invalid modulation parameters");
    }
    const auto taps = gaussian_taps(params.bt, oversampling, params.span_symbols);
    const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
    const auto os   = static_cast<std::size_t>(oversampling);
    const auto n    = bits.size() * os;

    std::vector<double> nrz(n);
    for (std::size_t k = 0; k < n; ++k) {
        nrz[k] = bits[k / os] != 0 ? 1.0 : -1.0;
    }

    PhaseTrajectory out;
    out.rate = phy.symbol_rate() * oversampling;
    out.phase.resize(n);
    out.angular_frequency.resize(n);
    const double peak_increment = std::numbers::pi * params.modulation_index / oversampling;
    double       phase          = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double shaped = 0.0;
        for (std::ptrdiff_t m = -half; m <= half; ++m) {
            const auto idx = static_cast<std::ptrdiff_t>(k) - m;
            if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(n)) {
                shaped += taps[static_cast<std::size_t>(m + half)] * nrz[static_cast<std::size_t>(idx)];
            }
        }
        out.phase[k]             = phase;
        out.angular_frequency[k] = peak_increment * shaped * out.rate;
        phase += peak_increment * shaped;
    }
    return out;
}

Signal gfsk_modulate(std::span<const std::uint8_t> bits, PhyMode phy, int oversampling, const GfskParams& params) {
    const auto        traj = gfsk_phase(bits, phy, oversampling, params);
    std::vector<cplx> samples(traj.phase.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        samples[k] = {std::cos(traj.phase[k]), std::sin(traj.phase[k])};
    }
    return Signal(std::move(samples), traj.rate, 0.0);
}

Signal differential_template(std::span<const std::uint8_t> bits, PhyMode phy, int oversampling, const GfskParams& params) {
    return gfsk_modulate(bits, phy, oversampling, params);
}

Bits gfsk_demodulate(const Signal& s, PhyMode phy, std::ptrdiff_t sync_index, std::size_t n_bits) {
    const double sps_real = s.rate() / phy.symbol_rate();
    const auto   sps      = static_cast<std::ptrdiff_t>(std::llround(sps_real));
    if (sps < 2 || std::abs(sps_real - static_cast<double>(sps)) > 1e-9) {
        throw ConfigError(fmt::format("gfsk_demodulate: {} samples per symbol is not an integer >= 2", sps_real));
    }
    const auto n = static_cast<std::ptrdiff_t>(s.size());
    Bits       out;
    out.reserve(n_bits);
    for (std::size_t b = 0; b < n_bits; ++b) {
        const auto centre = sync_index + static_cast<std::ptrdiff_t>(b) * sps;
        const auto lo     = centre - sps / 2;
        const auto hi     = std::min(lo + sps - 1, n - 1);
        if (lo < 0 || lo >= hi) {
            throw ConfigError(fmt::format("gfsk_demodulate: symbol {} (sync index {}) falls outside the {}-sample signal", b, sync_index, n));
        }
        const double advance = std::arg(s[static_cast<std::size_t>(hi)] * std::conj(s[static_cast<std::size_t>(lo)]));
        out.push_back(static_cast<std::uint8_t>(advance > 0.0 ? 1 : 0));
    }
    return out;
}

std::string bits_to_text(std::span<const std::uint8_t> bits) {
    std::string out;
    out.reserve(bits.size());
    for (auto b : bits) {
        out.push_back(b != 0 ? '1' : '0');
    }
    return out;
}

Bits bits_from_text(std::string_view text) {
    Bits out;
    for (char c : text) {
        if (c == '0' || c == '1') {
            out.push_back(static_cast<std::uint8_t>(c - '0'));
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            throw ConfigError(fmt::format("bit text contains invalid character '{}'", c));
        }
    }
    return out;
}

} // namespace nbtoa::btcs
