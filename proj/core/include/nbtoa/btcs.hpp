#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nbtoa/signal.hpp"

namespace nbtoa::btcs {

using Bits = std::vector<std::uint8_t>;

enum class PhyKind { le1m, le2m };

class PhyMode {
public:
    static constexpr PhyMode le1m() noexcept { return PhyMode(PhyKind::le1m); }
    static constexpr PhyMode le2m() noexcept { return PhyMode(PhyKind::le2m); }
    /// Accepts "LE1M"/"LE2M" (case-insensitive).
    static PhyMode from_name(std::string_view name);

    [[nodiscard]] constexpr PhyKind kind() const noexcept { return kind_; }
    [[nodiscard]] constexpr double  symbol_rate() const noexcept { return kind_ == PhyKind::le1m ? 1e6 : 2e6; }
    [[nodiscard]] constexpr double  symbol_duration() const noexcept { return 1.0 / symbol_rate(); }
    [[nodiscard]] constexpr int     preamble_bits() const noexcept { return kind_ == PhyKind::le1m ? 8 : 16; }
    [[nodiscard]] std::string_view  name() const noexcept { return kind_ == PhyKind::le1m ? "LE1M" : "LE2M"; }

    friend constexpr bool operator==(PhyMode, PhyMode) = default;

private:
    constexpr explicit PhyMode(PhyKind kind) noexcept : kind_(kind) {}
    PhyKind kind_;
};

struct GfskParams {
    double modulation_index = 0.5;
    double bt               = 0.5;
    int    span_symbols     = 3;
};

struct NoPayload {
    friend bool operator==(const NoPayload&, const NoPayload&) = default;
};
struct RandomPayload {
    int  n_bits = 128;
    friend bool operator==(const RandomPayload&, const RandomPayload&) = default;
};
struct SoundingPayload {
    int  n_bits    = 96;
    int  n_markers = 4;
    friend bool operator==(const SoundingPayload&, const SoundingPayload&) = default;
};
using Payload = std::variant<NoPayload, RandomPayload, SoundingPayload>;

[[nodiscard]] std::string_view payload_kind_name(const Payload& p);
[[nodiscard]] int              payload_bits(const Payload& p);

struct CsSyncConfig {
    PhyMode                      phy = PhyMode::le1m();
    std::optional<std::uint32_t> access_address; // drawn from seed when absent
    Payload                      payload = NoPayload{};
    std::uint64_t                seed    = 0;
    GfskParams                   gfsk{};
};

/// Field boundaries inside the on-air bit sequence.
struct BitLayout {
    std::size_t preamble     = 0;
    std::size_t access_begin = 0;
    std::size_t payload_begin = 0;
    std::size_t trailer_begin = 0;
    std::size_t total         = 0;
};

struct SoundingSequence {
    Bits             bits;
    std::vector<int> marker_positions; // start index of each 4-bit marker, ascending
};

struct CsSyncPacket {
    Bits          bits;
    CsSyncConfig  config;
    std::uint32_t access_address = 0;
    BitLayout     layout;
    int           oversampling = 8;
    Signal        waveform;
};

/// No run of more than six identical bits.
[[nodiscard]] bool access_address_valid(std::uint32_t aa) noexcept;

/// Deterministic access address satisfying access_address_valid.
[[nodiscard]] std::uint32_t draw_access_address(std::uint64_t seed);

/// preamble | access address (LSB first) | optional sequence | trailer.
[[nodiscard]] Bits      build_cs_sync(const CsSyncConfig& config);
[[nodiscard]] BitLayout layout_of(const CsSyncConfig& config);

[[nodiscard]] SoundingSequence sounding_sequence(int n_bits, int n_markers, std::uint64_t seed);

[[nodiscard]] CsSyncPacket make_packet(const CsSyncConfig& config, int oversampling);

/// Phase trajectory of a GFSK burst: phase[k] in radians and instantaneous angular frequency in rad/s.
struct PhaseTrajectory {
    std::vector<double> phase;
    std::vector<double> angular_frequency;
    double              rate = 0.0;
};

[[nodiscard]] PhaseTrajectory gfsk_phase(std::span<const std::uint8_t> bits, PhyMode phy, int oversampling, const GfskParams& params = {});
[[nodiscard]] Signal          gfsk_modulate(std::span<const std::uint8_t> bits, PhyMode phy, int oversampling, const GfskParams& params = {});

/// Hard decisions from the sign of the phase advance across each symbol. sync_index is the sample
/// index of the first symbol centre; symbol n is judged over [c - sps/2, c + sps/2 - 1] with
/// c = sync_index + n*sps (clamped to the last sample).
[[nodiscard]] Bits gfsk_demodulate(const Signal& s, PhyMode phy, std::ptrdiff_t sync_index, std::size_t n_bits);

/// Receiver reference; same generation path as gfsk_modulate.
[[nodiscard]] Signal differential_template(std::span<const std::uint8_t> bits, PhyMode phy, int oversampling, const GfskParams& params = {});

[[nodiscard]] std::string bits_to_text(std::span<const std::uint8_t> bits);
[[nodiscard]] Bits        bits_from_text(std::string_view text);

} // namespace nbtoa::btcs
