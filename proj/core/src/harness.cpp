#include "nbtoa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "nbtoa/seed.hpp"
#include "nbtoa/sigproc.hpp"

namespace nbtoa::harness {
namespace {

constexpr std::uint64_t kPacketStream        = 100;
constexpr std::uint64_t kAnalogNoiseStream   = 200;
constexpr std::uint64_t kAdcNoiseStream      = 300;
constexpr std::uint64_t kSnrDrawStream       = 400;

Signal prepend_zeros(const Signal& s, std::size_t lead, std::size_t trail, double t0) {
    std::vector<cplx> v(lead + s.size() + trail, cplx{});
    std::copy(s.data().begin(), s.data().end(), v.begin() + static_cast<std::ptrdiff_t>(lead));
    return Signal(std::move(v), s.rate(), t0);
}

double extent_power(const Signal& s, std::size_t begin, std::size_t size) {
    return s.mean_power(begin, std::min(s.size(), begin + size));
}

std::vector<double> magnitude_window(const Correlation& c, std::ptrdiff_t centre, std::ptrdiff_t half) {
    std::vector<double> out;
    for (std::ptrdiff_t i = centre - half; i <= centre + half; ++i) {
        out.push_back(i >= 0 && i < static_cast<std::ptrdiff_t>(c.size()) ? std::abs(c[static_cast<std::size_t>(i)]) : 0.0);
    }
    return out;
}

} // namespace

void RfChainConfig::validate() const {
    if (!(analog_rate > 0.0) || !(adc_rate > 0.0) || !(adc_rate < analog_rate)) {
        throw ConfigError(fmt::format("rf: need 0 < adc_rate ({}) < analog_rate ({})", adc_rate, analog_rate));
    }
    if (!(if_freq >= 0.0) || !(if_freq < analog_rate / 2.0)) {
        throw ConfigError(fmt::format("rf: IF {} Hz must lie below analog Nyquist {} Hz", if_freq, analog_rate / 2.0));
    }
    if (bandpass_enabled) {
        if (!(band_lo > 0.0 && band_lo < band_hi && band_hi < analog_rate / 2.0)) {
            throw ConfigError(fmt::format("rf: bandpass [{}, {}] Hz must lie inside (0, {}) Hz", band_lo, band_hi, analog_rate / 2.0));
        }
        if (bandpass_order < 2 || bandpass_order % 2 != 0) {
            throw ConfigError(fmt::format("rf: bandpass order must be even and >= 2, got {}", bandpass_order));
        }
    }
    if (!(padding_s >= 0.0)) {
        throw ConfigError("rf: padding must be >= 0");
    }
}

std::string_view attack_kind(const AttackSpec& spec) {
    switch (spec.index()) {
    case 1: return "mask";
    case 2: return "ngd";
    default: return "none";
    }
}

Transform make_transform(const AttackSpec& spec) {
    if (const auto* m = std::get_if<attack::MaskSpec>(&spec)) {
        return [m = *m](const Signal& s) { return attack::apply_mask(s, m); };
    }
    if (const auto* n = std::get_if<attack::NgdFilterSpec>(&spec)) {
        return [n = *n](const Signal& s) { return attack::apply_ngd(s, n); };
    }
    return {};
}

int adc_oversampling(const RfChainConfig& rf, btcs::PhyMode phy) {
    const double os  = rf.adc_rate / phy.symbol_rate();
    const auto   osi = std::llround(os);
    if (osi < 2 || std::abs(os - static_cast<double>(osi)) > 1e-9) {
        throw ConfigError(fmt::format("ADC rate {} Hz is not an integer multiple (>= 2) of the {} symbol rate", rf.adc_rate, phy.name()));
    }
    return static_cast<int>(osi);
}

Signal pad_packet(const btcs::CsSyncPacket& packet, const RfChainConfig& rf) {
    const auto& w   = packet.waveform;
    const auto  pad = static_cast<std::size_t>(std::ceil(rf.padding_s * w.rate()));
    return prepend_zeros(w, pad + rf.channel_delay, pad, -static_cast<double>(pad) / w.rate());
}

ChainOutput run_chain(const btcs::CsSyncPacket& packet, const RfChainConfig& rf, const Transform& transform, const ChainOptions& options) {
    rf.validate();
    if (packet.waveform.rate() != rf.adc_rate) {
        throw ConfigError(fmt::format("run_chain: packet rate {} Hz differs from the ADC rate {} Hz", packet.waveform.rate(), rf.adc_rate));
    }
    const Signal padded = pad_packet(packet, rf);
    const auto   pad    = static_cast<std::size_t>(std::ceil(rf.padding_s * rf.adc_rate));

    ChainOutput out{padded, padded, pad + rf.channel_delay, packet.waveform.size()};

    Signal analog = sigproc::frequency_shift(sigproc::resample(padded, rf.analog_rate), rf.if_freq);
    if (options.analog_snr_db) {
        const double ratio = rf.analog_rate / rf.adc_rate;
        const auto   begin = static_cast<std::size_t>(std::llround(static_cast<double>(out.packet_begin) * ratio));
        const auto   size  = static_cast<std::size_t>(std::llround(static_cast<double>(out.packet_size) * ratio));
        analog = sigproc::add_awgn(analog, *options.analog_snr_db, options.noise_seed, extent_power(analog, begin, size));
    }

    const std::optional<sigproc::LinearFilter> bandpass =
        rf.bandpass_enabled ? std::optional(sigproc::butterworth_bandpass(rf.bandpass_order, rf.band_lo, rf.band_hi, rf.analog_rate))
                            : std::nullopt;
    auto finish = [&](const Signal& s) {
        const Signal filtered = bandpass ? sigproc::apply_filter(s, *bandpass) : s;
        return sigproc::resample(sigproc::frequency_shift(filtered, -rf.if_freq), rf.adc_rate);
    };

    out.ground_truth = finish(analog);
    out.attacked     = transform ? finish(transform(analog)) : out.ground_truth;
    return out;
}

std::string_view noise_stage_name(NoiseStage stage) {
    return stage == NoiseStage::analog_input ? "analog_input" : "adc_output";
}

NoiseStage noise_stage_from_name(std::string_view name) {
    if (name == "analog_input") {
        return NoiseStage::analog_input;
    }
    if (name == "adc_output") {
        return NoiseStage::adc_output;
    }
    throw ConfigError(fmt::format("unknown noise stage '{}', expected analog_input or adc_output", name));
}

void ExperimentConfig::validate() const {
    if (n_packets < 1) {
        throw ConfigError("experiment: n_packets must be >= 1");
    }
    if (snr_db && snr_range_db) {
        throw ConfigError("experiment: give either a fixed SNR or an SNR range, not both");
    }
    if (snr_range_db && !(snr_range_db->first <= snr_range_db->second)) {
        throw ConfigError("experiment: SNR range must satisfy min <= max");
    }
}

Stats stats_of(const std::vector<double>& values) {
    Stats s;
    s.n = values.size();
    if (values.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - s.mean) * (v - s.mean);
    }
    s.std = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    return s;
}

ExperimentSummary summarize(const std::vector<PacketRecord>& records) {
    ExperimentSummary   out;
    std::vector<double> adv_ns, adv_m, ncc, pmse, dft;
    for (const auto& r : records) {
        adv_ns.push_back(r.advance_s * 1e9);
        adv_m.push_back(r.toa_advance_m);
        ncc.push_back(r.ncc);
        dft.push_back(r.dft);
        if (r.pmse) {
            pmse.push_back(*r.pmse);
        }
        out.n_bits_ok += r.bits_ok ? 1 : 0;
    }
    out.n_packets  = records.size();
    out.advance_ns = stats_of(adv_ns);
    out.advance_m  = stats_of(adv_m);
    out.ncc        = stats_of(ncc);
    out.pmse       = stats_of(pmse);
    out.dft        = stats_of(dft);
    return out;
}

btcs::CsSyncPacket experiment_packet(const ExperimentConfig& cfg, const RfChainConfig& rf, std::size_t index) {
    btcs::CsSyncConfig pc;
    pc.phy     = cfg.phy;
    pc.payload = cfg.payload;
    pc.seed    = derive_seed(derive_seed(cfg.master_seed, kPacketStream), index);
    return btcs::make_packet(pc, adc_oversampling(rf, cfg.phy));
}

PacketRecord run_packet(const ExperimentConfig& cfg, const RfChainConfig& rf, std::size_t index, CorrelationTrace* trace) {
    const auto packet = experiment_packet(cfg, rf, index);
    const auto seed   = derive_seed(cfg.master_seed, index);

    PacketRecord rec;
    rec.packet_id = index;
    rec.config    = cfg.id;
    rec.snr_db    = cfg.snr_db;
    if (cfg.snr_range_db) {
        const auto [lo, hi] = *cfg.snr_range_db;
        std::mt19937_64 rng(derive_seed(seed, kSnrDrawStream));
        rec.snr_db          = lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
    }

    ChainOptions options;
    options.noise_seed = derive_seed(seed, kAnalogNoiseStream);
    if (cfg.noise_stage == NoiseStage::analog_input) {
        options.analog_snr_db = rec.snr_db;
    }
    auto chain = run_chain(packet, rf, make_transform(cfg.attack), options);

    if (cfg.noise_stage == NoiseStage::adc_output && rec.snr_db) {
        // Same realization on both paths.
        const auto ref     = extent_power(chain.ground_truth, chain.packet_begin, chain.packet_size);
        const auto ns      = derive_seed(seed, kAdcNoiseStream);
        chain.ground_truth = sigproc::add_awgn(chain.ground_truth, *rec.snr_db, ns, ref);
        chain.attacked     = sigproc::add_awgn(chain.attacked, *rec.snr_db, ns, ref);
    }

    const auto tmpl = btcs::differential_template(packet.bits, cfg.phy, packet.oversampling, packet.config.gfsk);
    receiver::ReceiveOptions ro;
    ro.check_first = packet.layout.access_begin;
    ro.check_count = packet.layout.trailer_begin - packet.layout.access_begin;

    const auto att   = receiver::receive(chain.attacked, tmpl, packet.bits, cfg.phy, ro);
    ro.metrics       = false;
    const auto truth = receiver::receive(chain.ground_truth, tmpl, packet.bits, cfg.phy, ro);

    rec.toa_s         = att.toa.toa_seconds;
    rec.toa_truth_s   = truth.toa.toa_seconds;
    rec.advance_s     = rec.toa_s - rec.toa_truth_s;
    rec.toa_advance_m = rec.advance_s * speed_of_light;
    rec.ncc           = att.ncc;
    rec.pmse          = att.pmse;
    rec.dft           = att.dft;
    rec.bits_ok       = att.toa.valid;
    rec.bits_ok_truth = truth.toa.valid;

    if (trace != nullptr) {
        const double t_sym = cfg.phy.symbol_duration();
        const auto   ca    = receiver::differential_xcorr(chain.attacked, tmpl, t_sym);
        const auto   ct    = receiver::differential_xcorr(chain.ground_truth, tmpl, t_sym);
        const auto   half  = static_cast<std::ptrdiff_t>(std::llround(3.0 * t_sym * ca.rate()));
        const auto   centre = truth.toa.coarse_index;
        trace->attacked     = magnitude_window(ca, centre, half);
        trace->ground_truth = magnitude_window(ct, centre, half);
        trace->lag_s.clear();
        for (std::ptrdiff_t i = centre - half; i <= centre + half; ++i) {
            trace->lag_s.push_back(ca.lag_seconds(static_cast<double>(i)));
        }
    }
    return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RfChainConfig& rf) {
    cfg.validate();
    rf.validate();
    ExperimentResult result{cfg, rf, std::vector<PacketRecord>(cfg.n_packets), {}, {}};

    const unsigned hw      = std::max(1U, std::thread::hardware_concurrency());
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(cfg.threads == 0 ? hw : cfg.threads, cfg.n_packets));

    std::atomic<std::size_t> next{0};
    std::mutex               error_mutex;
    std::exception_ptr       error;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.n_packets) {
                return;
            }
            try {
                result.records[i] = run_packet(cfg, rf, i, i == 0 ? &result.exemplar : nullptr);
            } catch (...) {
                const std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                next = cfg.n_packets;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    result.summary = summarize(result.records);
    return result;
}

double overlap_fraction(const std::vector<double>& attacked, const std::vector<double>& legitimate) {
    if (attacked.empty() || legitimate.empty()) {
        throw ConfigError("overlap_fraction: empty distribution");
    }
    const auto [lo, hi] = std::minmax_element(legitimate.begin(), legitimate.end());
    const auto inside   = std::count_if(attacked.begin(), attacked.end(), [&](double v) { return v >= *lo && v <= *hi; });
    return static_cast<double>(inside) / static_cast<double>(attacked.size());
}

namespace {

std::vector<double> metric_values(const std::vector<PacketRecord>& records, std::string_view metric) {
    std::vector<double> out;
    for (const auto& r : records) {
        if (metric == "ncc") {
            out.push_back(r.ncc);
        } else if (metric == "dft") {
            out.push_back(r.dft);
        } else if (r.pmse) {
            out.push_back(*r.pmse);
        } else {
            // Undefined phase reference: treated as outside any legitimate envelope.
            out.push_back(std::numeric_limits<double>::infinity());
        }
    }
    return out;
}

std::vector<MetricOverlap> compare_records(const std::vector<PacketRecord>& attacked, const std::vector<PacketRecord>& legitimate) {
    std::vector<MetricOverlap> out;
    for (const char* metric : {"ncc", "pmse", "dft"}) {
        const auto a = metric_values(attacked, metric);
        const auto l = metric_values(legitimate, metric);
        out.push_back({metric, overlap_fraction(a, l), stats_of(a), stats_of(l)});
    }
    return out;
}

} // namespace

std::vector<MetricOverlap> compare_metrics(const ExperimentResult& attacked, const ExperimentResult& legitimate) {
    return compare_records(attacked.records, legitimate.records);
}

MetricStudy run_metric_study(const std::vector<ExperimentConfig>& cfgs, const RfChainConfig& rf) {
    MetricStudy               study;
    std::vector<PacketRecord> legit;
    for (const auto& cfg : cfgs) {
        study.results.push_back(run_experiment(cfg, rf));
        if (std::holds_alternative<NoAttack>(cfg.attack)) {
            const auto& r = study.results.back().records;
            legit.insert(legit.end(), r.begin(), r.end());
        }
    }
    if (legit.empty()) {
        throw ConfigError("run_metric_study: no legitimate (attack-free) configuration");
    }
    for (const auto& res : study.results) {
        if (!std::holds_alternative<NoAttack>(res.config.attack)) {
            study.comparisons[res.config.id] = compare_records(res.records, legit);
        }
    }
    return study;
}

std::vector<EstimatorRow> estimator_study(const std::vector<double>& snrs_db, std::size_t n_trials, std::uint64_t seed, btcs::PhyMode phy,
                                          const RfChainConfig& rf) {
    if (n_trials < 2) {
        throw ConfigError("estimator_study: need at least two trials");
    }
    ExperimentConfig cfg;
    cfg.phy         = phy;
    cfg.master_seed = seed;

    std::vector<btcs::CsSyncPacket> packets;
    double                          beta = 0.0;
    for (std::size_t i = 0; i < n_trials; ++i) {
        packets.push_back(experiment_packet(cfg, rf, i));
        beta += sigproc::rms_bandwidth(packets.back().waveform);
    }
    beta /= static_cast<double>(n_trials);

    std::vector<EstimatorRow> rows;
    for (double snr : snrs_db) {
        std::vector<double> toa;
        std::size_t         samples = 0;
        for (std::size_t i = 0; i < n_trials; ++i) {
            const auto& p   = packets[i];
            const auto  rx  = sigproc::add_awgn(pad_packet(p, rf), snr, derive_seed(derive_seed(seed, kAdcNoiseStream), i), p.waveform.mean_power());
            const auto  est = receiver::search_toa(receiver::differential_xcorr(rx, p.waveform, phy.symbol_duration()), phy.symbol_duration());
            // pad_packet puts the packet start at t = 0.
            toa.push_back(est.toa_seconds);
            samples += p.waveform.size();
        }
        const auto   st  = stats_of(toa);
        const double snr_int = static_cast<double>(samples) / static_cast<double>(n_trials) * std::pow(10.0, snr / 10.0);
        rows.push_back({snr, beta, sigproc::crlb_toa_std(snr_int, beta), st.mean, st.std, n_trials});
    }
    return rows;
}

std::vector<std::filesystem::path> emit_plots(const ExperimentResult& result, const std::filesystem::path& out_dir, std::size_t bins) {
    if (result.records.empty()) {
        throw ConfigError("emit_plots: empty result");
    }
    if (bins < 1) {
        throw ConfigError("emit_plots: need at least one histogram bin");
    }
    std::filesystem::create_directories(out_dir);
    auto open = [](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::trunc);
        if (!f) {
            throw std::runtime_error(fmt::format("cannot open {} for writing", p.string()));
        }
        return f;
    };
    std::vector<std::filesystem::path> written;

    {
        const auto& s     = result.summary.advance_ns;
        const double lo   = s.min;
        const double hi   = s.max > s.min ? s.max : s.min + 1e-3;
        const double w    = (hi - lo) / static_cast<double>(bins);
        std::vector<std::size_t> counts(bins, 0);
        for (const auto& r : result.records) {
            auto b = static_cast<std::size_t>(std::floor((r.advance_s * 1e9 - lo) / w));
            counts[std::min(b, bins - 1)]++;
        }
        const auto path = out_dir / "advance_histogram.csv";
        auto       f    = open(path);
        f << "bin_lo_ns,bin_hi_ns,bin_lo_m,bin_hi_m,count\n";
        for (std::size_t b = 0; b < bins; ++b) {
            const double a = lo + w * static_cast<double>(b);
            const double e = a + w;
            f << fmt::format("{:.9g},{:.9g},{:.9g},{:.9g},{}\n", a, e, a * 1e-9 * speed_of_light, e * 1e-9 * speed_of_light, counts[b]);
        }
        written.push_back(path);
    }
    {
        const auto path = out_dir / "metrics.csv";
        auto       f    = open(path);
        f << "packet_id,advance_ns,ncc,pmse,dft,bits_ok\n";
        for (const auto& r : result.records) {
            f << fmt::format("{},{:.12g},{:.12g},{},{:.12g},{}\n", r.packet_id, r.advance_s * 1e9, r.ncc,
                             r.pmse ? fmt::format("{:.12g}", *r.pmse) : std::string("nan"), r.dft, r.bits_ok ? 1 : 0);
        }
        written.push_back(path);
    }
    {
        const auto path = out_dir / "correlation_trace.csv";
        auto       f    = open(path);
        f << "lag_ns,attacked,ground_truth\n";
        const auto& t = result.exemplar;
        for (std::size_t i = 0; i < t.lag_s.size(); ++i) {
            f << fmt::format("{:.9g},{:.12g},{:.12g}\n", t.lag_s[i] * 1e9, t.attacked[i], t.ground_truth[i]);
        }
        written.push_back(path);
    }
    return written;
}

std::vector<std::string> preset_names() {
    return {"exp1", "exp2-c1", "exp2-c2", "exp2-c3", "exp2-c4", "exp3-legit", "exp3-ngd", "exp3-mask", "fsk-mask"};
}

ExperimentConfig preset(std::string_view name) {
    const RfChainConfig   rf;
    attack::NgdFilterSpec ngd{62e-9, rf.if_freq, attack::NgdRealization::frequency_domain};

    ExperimentConfig c;
    c.id          = std::string(name);
    c.master_seed = 2024;
    c.attack      = ngd;
    if (name == "exp1") {
        c.n_packets = 1;
    } else if (name == "exp2-c1") {
    } else if (name == "exp2-c2") {
        c.payload = btcs::SoundingPayload{96, 4};
    } else if (name == "exp2-c3") {
        c.phy = btcs::PhyMode::le2m();
    } else if (name == "exp2-c4") {
        c.snr_db = 10.0;
    } else if (name == "exp3-legit") {
        c.attack       = NoAttack{};
        c.snr_range_db = std::pair{10.0, 30.0};
    } else if (name == "exp3-ngd") {
    } else if (name == "exp3-mask" || name == "fsk-mask") {
        c.attack = attack::MaskSpec::truncation(0.5, c.phy.symbol_duration(), 0.0);
    } else {
        throw ConfigError(fmt::format("unknown preset '{}'", name));
    }
    return c;
}

CheckOutcome check_result(const ExperimentResult& result, const CheckSpec& check) {
    CheckOutcome out;
    auto         line = [&](bool ok, std::string text) {
        out.pass = out.pass && ok;
        out.lines.push_back(fmt::format("[{}] {}", ok ? "PASS" : "FAIL", text));
    };
    const double mean_abs = std::abs(result.summary.advance_m.mean);
    if (check.mean_advance_m_min) {
        line(mean_abs >= *check.mean_advance_m_min, fmt::format("|mean advance| {:.4f} m >= {} m", mean_abs, *check.mean_advance_m_min));
    }
    if (check.mean_advance_m_max) {
        line(mean_abs <= *check.mean_advance_m_max, fmt::format("|mean advance| {:.4f} m <= {} m", mean_abs, *check.mean_advance_m_max));
    }
    if (check.std_advance_m_max) {
        line(result.summary.advance_m.std < *check.std_advance_m_max,
             fmt::format("advance std {:.4f} m < {} m", result.summary.advance_m.std, *check.std_advance_m_max));
    }
    if (check.min_bits_ok_fraction) {
        const double frac = static_cast<double>(result.summary.n_bits_ok) / static_cast<double>(result.summary.n_packets);
        line(frac >= *check.min_bits_ok_fraction, fmt::format("bit-check pass fraction {:.3f} >= {}", frac, *check.min_bits_ok_fraction));
    }
    return out;
}

std::filesystem::path default_output_root() {
    if (const char* env = std::getenv("NBTOA_OUTPUT_ROOT"); env != nullptr && *env != '\0') {
        return env;
    }
    return "results";
}

} // namespace nbtoa::harness
