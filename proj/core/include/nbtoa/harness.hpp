#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nbtoa/attack.hpp"
#include "nbtoa/btcs.hpp"
#include "nbtoa/receiver.hpp"
#include "nbtoa/signal.hpp"

namespace nbtoa::harness {

inline constexpr double speed_of_light = 299792458.0;

struct RfChainConfig {
    double      if_freq          = 4.77e6;
    double      analog_rate      = 80e6;
    int         bandpass_order   = 4;
    double      band_lo          = 4.77e6 - 1.5e6;
    double      band_hi          = 4.77e6 + 1.5e6;
    bool        bandpass_enabled = true;
    double      adc_rate         = 8e6;
    double      padding_s        = 20e-6; // zeros on each side of the packet
    std::size_t channel_delay    = 0;     // extra leading zeros, in ADC samples

    void validate() const;
};

struct NoAttack {};
using AttackSpec = std::variant<NoAttack, attack::MaskSpec, attack::NgdFilterSpec>;

[[nodiscard]] std::string_view attack_kind(const AttackSpec& spec);

using Transform = std::function<Signal(const Signal&)>;

/// Transform applied on the attack path (identity for NoAttack).
[[nodiscard]] Transform make_transform(const AttackSpec& spec);

struct ChainOptions {
    std::optional<double> analog_snr_db; // AWGN at analog_rate before the attack, vs packet-extent power
    std::uint64_t         noise_seed = 0;
};

struct ChainOutput {
    Signal      attacked;
    Signal      ground_truth;
    std::size_t packet_begin = 0; // first ADC sample of the packet (before chain delays)
    std::size_t packet_size  = 0; // packet length in ADC samples
};

/// Packet samples per symbol at the ADC rate; throws unless it is an integer >= 2.
[[nodiscard]] int adc_oversampling(const RfChainConfig& rf, btcs::PhyMode phy);

/// Zero-pads the packet waveform so that it starts at t = 0 (after channel_delay leading samples).
[[nodiscard]] Signal pad_packet(const btcs::CsSyncPacket& packet, const RfChainConfig& rf);

/// Upsample -> IF -> [attack] -> bandpass -> baseband -> low-pass/decimate, on two paths that differ
/// only in the attack transform. Any analog noise is added once before the split.
[[nodiscard]] ChainOutput run_chain(const btcs::CsSyncPacket& packet, const RfChainConfig& rf, const Transform& transform,
                                    const ChainOptions& options = {});

/// Where AWGN enters: at analog_rate before the attack split (input SNR), or on both paths at the ADC output.
enum class NoiseStage { analog_input, adc_output };

[[nodiscard]] std::string_view noise_stage_name(NoiseStage stage);
[[nodiscard]] NoiseStage       noise_stage_from_name(std::string_view name);

struct ExperimentConfig {
    std::string                              id = "experiment";
    std::size_t                              n_packets = 100;
    btcs::PhyMode                            phy       = btcs::PhyMode::le1m();
    btcs::Payload                            payload   = btcs::RandomPayload{128};
    AttackSpec                               attack    = NoAttack{};
    std::optional<double>                    snr_db;       // fixed SNR for every packet
    std::optional<std::pair<double, double>> snr_range_db; // per-packet uniform draw; exclusive with snr_db
    NoiseStage                               noise_stage = NoiseStage::analog_input;
    std::uint64_t                            master_seed = 1;
    unsigned                                 threads     = 0; // 0 = hardware concurrency

    void validate() const;
};

struct PacketRecord {
    std::size_t           packet_id = 0;
    std::string           config;
    double                toa_s          = 0.0;
    double                toa_truth_s    = 0.0;
    double                advance_s      = 0.0; // toa(attacked) - toa(ground truth); negative = earlier
    double                toa_advance_m  = 0.0;
    double                ncc            = 0.0;
    std::optional<double> pmse;
    double                dft            = 0.0;
    bool                  bits_ok        = false;
    bool                  bits_ok_truth  = false;
    std::optional<double> snr_db; // SNR applied to this packet, if any

    friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

struct Stats {
    std::size_t n    = 0;
    double      mean = 0.0;
    double      std  = 0.0; // sample standard deviation
    double      min  = 0.0;
    double      max  = 0.0;
};

[[nodiscard]] Stats stats_of(const std::vector<double>& values);

struct ExperimentSummary {
    std::size_t n_packets = 0;
    std::size_t n_bits_ok = 0;
    Stats       advance_ns;
    Stats       advance_m;
    Stats       ncc;
    Stats       pmse; // over packets with a defined value
    Stats       dft;
};

struct CorrelationTrace {
    std::vector<double> lag_s;
    std::vector<double> attacked;
    std::vector<double> ground_truth;
};

struct ExperimentResult {
    ExperimentConfig          config;
    RfChainConfig             rf;
    std::vector<PacketRecord> records; // sorted by packet_id
    ExperimentSummary         summary;
    CorrelationTrace          exemplar; // packet 0, magnitude of the differential correlation
};

[[nodiscard]] ExperimentSummary summarize(const std::vector<PacketRecord>& records);

/// Builds packet i of an experiment (seed derived from master_seed and i).
[[nodiscard]] btcs::CsSyncPacket experiment_packet(const ExperimentConfig& cfg, const RfChainConfig& rf, std::size_t index);

/// Runs one packet end to end; exemplar trace filled when trace != nullptr.
[[nodiscard]] PacketRecord run_packet(const ExperimentConfig& cfg, const RfChainConfig& rf, std::size_t index, CorrelationTrace* trace = nullptr);

[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& cfg, const RfChainConfig& rf);

struct MetricOverlap {
    std::string metric;
    double      overlap    = 0.0; // fraction of attacked values inside [legit min, legit max]
    Stats       attacked;
    Stats       legitimate;
};

[[nodiscard]] double overlap_fraction(const std::vector<double>& attacked, const std::vector<double>& legitimate);

/// Per-metric overlap of `attacked` records against the envelope of `legitimate` records.
[[nodiscard]] std::vector<MetricOverlap> compare_metrics(const ExperimentResult& attacked, const ExperimentResult& legitimate);

struct MetricStudy {
    std::vector<ExperimentResult>                         results;
    std::map<std::string, std::vector<MetricOverlap>>     comparisons; // attacked config id -> overlaps
};

/// Runs all configs; every config with an attack is compared against the pooled records of the
/// configs without one.
[[nodiscard]] MetricStudy run_metric_study(const std::vector<ExperimentConfig>& cfgs, const RfChainConfig& rf);

struct EstimatorRow {
    double      snr_db      = 0.0; // per-sample, relative to packet power
    double      beta_rms_hz = 0.0; // mean over the packets
    double      crlb_s      = 0.0; // bound at the integrated SNR (packet samples x per-sample SNR)
    double      mean_s      = 0.0; // ToA bias
    double      std_s       = 0.0;
    std::size_t n           = 0;
};

/// Monte Carlo ToA spread of the receiver on clean packets plus AWGN at the ADC rate, against the CRLB.
[[nodiscard]] std::vector<EstimatorRow> estimator_study(const std::vector<double>& snrs_db, std::size_t n_trials, std::uint64_t seed,
                                                        btcs::PhyMode phy = btcs::PhyMode::le1m(), const RfChainConfig& rf = {});

/// Writes advance_histogram.csv, metrics.csv and correlation_trace.csv. Throws on empty results.
std::vector<std::filesystem::path> emit_plots(const ExperimentResult& result, const std::filesystem::path& out_dir, std::size_t bins = 20);

/// Named configurations reproducing the reference experiments: exp1, exp2-c1 .. exp2-c4,
/// exp3-legit, exp3-ngd, exp3-mask, fsk-mask.
[[nodiscard]] ExperimentConfig               preset(std::string_view name);
[[nodiscard]] std::vector<std::string>       preset_names();

/// Acceptance thresholds read from a config's [check] section.
struct CheckSpec {
    std::optional<double> mean_advance_m_min; // on |mean advance|
    std::optional<double> mean_advance_m_max;
    std::optional<double> std_advance_m_max;
    std::optional<double> min_bits_ok_fraction;
};

struct CheckOutcome {
    bool                     pass = true;
    std::vector<std::string> lines;
};

[[nodiscard]] CheckOutcome check_result(const ExperimentResult& result, const CheckSpec& check);

struct ExperimentFile {
    ExperimentConfig experiment;
    RfChainConfig    rf;
    CheckSpec        check;
};

/// INI-style file with [experiment], [attack], [rf] and [check] sections.
[[nodiscard]] ExperimentFile load_experiment_file(const std::filesystem::path& path);
[[nodiscard]] ExperimentFile parse_experiment_text(const std::string& text);

/// Attack description from JSON text: {"type": "none" | "mask" | "ngd", ...}.
[[nodiscard]] AttackSpec attack_from_json(const std::string& json_text, double default_center_freq = 0.0, double default_period_s = 1e-6);
[[nodiscard]] std::string attack_to_json(const AttackSpec& spec);

/// Default output root: $NBTOA_OUTPUT_ROOT, else ./results.
[[nodiscard]] std::filesystem::path default_output_root();

} // namespace nbtoa::harness
