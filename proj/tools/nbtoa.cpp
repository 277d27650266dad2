// nbtoa: packet generation, attacks, ToA reception, experiments and theory checks.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "nbtoa/attack.hpp"
#include "nbtoa/btcs.hpp"
#include "nbtoa/harness.hpp"
#include "nbtoa/receiver.hpp"
#include "nbtoa/results_io.hpp"
#include "nbtoa/seed.hpp"
#include "nbtoa/signal_io.hpp"
#include "nbtoa/theory.hpp"

namespace fs = std::filesystem;
using namespace nbtoa;

namespace {

enum Exit : int { ok = 0, config_error = 1, runtime_failure = 2, check_failed = 3 };

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open {}", p.string()));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::trunc);
    if (!out || !(out << text)) {
        throw std::runtime_error(fmt::format("cannot write {}", p.string()));
    }
}

btcs::Payload make_payload(const std::string& kind, int bits, int markers) {
    if (kind == "none") {
        return btcs::NoPayload{};
    }
    if (kind == "random") {
        return btcs::RandomPayload{bits};
    }
    if (kind == "sounding") {
        return btcs::SoundingPayload{bits, markers};
    }
    throw ConfigError(fmt::format("payload must be none, random or sounding, got '{}'", kind));
}

struct GenerateArgs {
    std::string phy     = "LE1M";
    std::string payload = "random";
    int         bits    = 128;
    int         markers = 4;
    int         os      = 8;
    std::uint64_t seed  = 1;
    std::size_t count   = 1;
    std::string out     = "packets";
};

int run_generate(const GenerateArgs& a) {
    const fs::path dir(a.out);
    fs::create_directories(dir);
    nlohmann::ordered_json index = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < a.count; ++i) {
        btcs::CsSyncConfig cfg;
        cfg.phy     = btcs::PhyMode::from_name(a.phy);
        cfg.payload = make_payload(a.payload, a.bits, a.markers);
        cfg.seed    = derive_seed(a.seed, i);
        const auto packet = btcs::make_packet(cfg, a.os);

        const auto stem = dir / fmt::format("packet_{:04d}", i);
        io::write_signal(stem, packet.waveform);
        write_text(fs::path(stem.string() + ".bits"), btcs::bits_to_text(packet.bits) + "\n");
        index.push_back({{"stem", stem.filename().string()},
                         {"phy", std::string(cfg.phy.name())},
                         {"oversampling", a.os},
                         {"access_address", fmt::format("0x{:08x}", packet.access_address)},
                         {"payload_begin", packet.layout.payload_begin},
                         {"trailer_begin", packet.layout.trailer_begin},
                         {"n_bits", packet.bits.size()},
                         {"sha256", io::signal_digest(packet.waveform)}});
    }
    write_text(dir / "packets.json", index.dump(2) + "\n");
    fmt::print("wrote {} packet(s) to {}\n", a.count, dir.string());
    return ok;
}

struct AttackArgs {
    std::string in;
    std::string out;
    std::string config;
    double      period = 1e-6;
};

int run_attack(const AttackArgs& a) {
    const auto   s    = io::read_signal(a.in);
    const auto   text = fs::exists(a.config) ? read_text(a.config) : a.config;
    const auto   spec = harness::attack_from_json(text, 0.0, a.period);
    const auto   tf   = harness::make_transform(spec);
    const Signal out  = tf ? tf(s) : s;
    io::write_signal(a.out, out);
    fmt::print("{} -> {} ({})\n", a.in, a.out, harness::attack_kind(spec));
    return ok;
}

struct ReceiveArgs {
    std::string in;
    std::string bits;
    std::string tmpl;
    std::string phy = "LE1M";
    std::size_t check_first = 0;
    std::string out;
};

int run_receive(const ReceiveArgs& a) {
    const auto rx   = io::read_signal(a.in);
    const auto bits = btcs::bits_from_text(read_text(a.bits));
    const auto phy  = btcs::PhyMode::from_name(a.phy);

    Signal tmpl = rx;
    if (!a.tmpl.empty()) {
        tmpl = io::read_signal(a.tmpl);
    } else {
        const double os = rx.rate() / phy.symbol_rate();
        if (std::abs(os - std::round(os)) > 1e-9) {
            throw ConfigError(fmt::format("signal rate {} Hz is not a multiple of the {} symbol rate", rx.rate(), phy.name()));
        }
        tmpl = btcs::differential_template(bits, phy, static_cast<int>(std::lround(os)));
    }

    receiver::ReceiveOptions opts;
    opts.check_first = a.check_first;
    const auto r     = receiver::receive(rx, tmpl, bits, phy, opts);

    nlohmann::ordered_json j;
    j["toa_s"]          = r.toa.toa_seconds;
    j["coarse_index"]   = r.toa.coarse_index;
    j["fractional"]     = r.toa.fractional;
    j["peak_magnitude"] = r.toa.peak_magnitude;
    j["bits_ok"]        = r.toa.valid;
    j["flat_peak"]      = r.toa.flat_peak;
    j["ncc"]            = r.ncc;
    j["pmse"]           = r.pmse ? nlohmann::ordered_json(*r.pmse) : nlohmann::ordered_json(nullptr);
    j["dft"]            = r.dft;
    const auto text     = j.dump(2) + "\n";
    if (a.out.empty()) {
        std::cout << text;
    } else {
        write_text(a.out, text);
    }
    return ok;
}

struct ExperimentArgs {
    std::string config;
    std::string preset;
    std::string out;
    std::optional<std::size_t> packets;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    bool     check   = false;
};

int run_experiment_cmd(const ExperimentArgs& a) {
    harness::ExperimentFile file;
    if (!a.config.empty()) {
        file = harness::load_experiment_file(a.config);
    } else {
        file.experiment = harness::preset(a.preset);
    }
    auto& cfg = file.experiment;
    if (a.packets) {
        cfg.n_packets = *a.packets;
    }
    if (a.seed) {
        cfg.master_seed = *a.seed;
    }
    if (a.threads != 0) {
        cfg.threads = a.threads;
    }

    const fs::path out = a.out.empty() ? harness::default_output_root() / cfg.id : fs::path(a.out);
    const auto     res = harness::run_experiment(cfg, file.rf);
    io::write_experiment(res, out);

    const auto& s = res.summary;
    fmt::print("{}: {} packets, advance {:.3f} ns ({:.4f} m) std {:.4f} m, bits ok {}/{}\n", cfg.id, s.n_packets, s.advance_ns.mean,
               s.advance_m.mean, s.advance_m.std, s.n_bits_ok, s.n_packets);
    fmt::print("results in {}\n", out.string());

    if (a.check) {
        const auto outcome = harness::check_result(res, file.check);
        for (const auto& line : outcome.lines) {
            fmt::print("{}\n", line);
        }
        return outcome.pass ? ok : check_failed;
    }
    return ok;
}

struct StudyArgs {
    std::vector<std::string> presets = {"exp3-legit", "exp3-ngd", "exp3-mask"};
    std::string              out;
};

int run_study(const StudyArgs& a) {
    std::vector<harness::ExperimentConfig> cfgs;
    for (const auto& p : a.presets) {
        cfgs.push_back(harness::preset(p));
    }
    const auto study = harness::run_metric_study(cfgs, {});
    for (const auto& [id, overlaps] : study.comparisons) {
        for (const auto& o : overlaps) {
            fmt::print("{:<12} {:<5} overlap {:.2f}  attacked [{:.4g}, {:.4g}]  legit [{:.4g}, {:.4g}]\n", id, o.metric, o.overlap, o.attacked.min,
                       o.attacked.max, o.legitimate.min, o.legitimate.max);
        }
    }
    const fs::path out = a.out.empty() ? harness::default_output_root() / "metric-study" : fs::path(a.out);
    fs::create_directories(out);
    write_text(out / "metric_study.json", io::metric_study_json(study));
    for (const auto& r : study.results) {
        io::write_experiment(r, out / r.config.id);
    }
    return ok;
}

struct TheoryArgs {
    std::uint64_t seed = 1;
    std::size_t   pairs = 100;
    std::size_t   fsk_seeds = 100;
    std::size_t   ensemble = 1000;
    std::string   out;
};

int run_theory(const TheoryArgs& a) {
    theory::SuiteOptions opts;
    opts.seed            = a.seed;
    opts.n_pairs         = a.pairs;
    opts.n_fsk_seeds     = a.fsk_seeds;
    opts.n_flip_ensemble = a.ensemble;
    const auto suite     = theory::run_suite(opts);
    fmt::print("{}", io::theory_suite_table(suite));
    if (!a.out.empty()) {
        write_text(a.out, io::theory_suite_json(suite));
    }
    return suite.pass() ? ok : check_failed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Narrowband ToA manipulation toolkit"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto*        g = app.add_subcommand("generate", "Generate CS SYNC packets as signal files");
    g->add_option("--phy", gen.phy, "LE1M or LE2M")->capture_default_str();
    g->add_option("--payload", gen.payload, "none, random or sounding")->capture_default_str();
    g->add_option("--bits", gen.bits, "Payload length in bits")->capture_default_str();
    g->add_option("--markers", gen.markers, "Sounding markers")->capture_default_str();
    g->add_option("--oversampling", gen.os, "Samples per symbol")->capture_default_str();
    g->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
    g->add_option("--count", gen.count, "Number of packets")->capture_default_str()->check(CLI::PositiveNumber);
    g->add_option("-o,--out", gen.out, "Output directory")->capture_default_str();

    AttackArgs att;
    auto*      at = app.add_subcommand("attack", "Apply a mask or NGD filter to a signal file");
    at->add_option("-i,--in", att.in, "Input signal (.c128/.json stem)")->required();
    at->add_option("-o,--out", att.out, "Output signal stem")->required();
    at->add_option("-c,--config", att.config, "Attack JSON file or inline JSON")->required();
    at->add_option("--period", att.period, "Default mask period in seconds")->capture_default_str();

    ReceiveArgs rcv;
    auto*       r = app.add_subcommand("receive", "Estimate ToA and detection metrics");
    r->add_option("-i,--in", rcv.in, "Received signal stem")->required();
    r->add_option("-b,--bits", rcv.bits, "Expected bit file (0/1 text)")->required();
    r->add_option("-t,--template", rcv.tmpl, "Template signal stem; regenerated from the bits when absent");
    r->add_option("--phy", rcv.phy, "LE1M or LE2M")->capture_default_str();
    r->add_option("--check-first", rcv.check_first, "First bit compared by the bit check")->capture_default_str();
    r->add_option("-o,--out", rcv.out, "JSON output file (stdout when absent)");

    ExperimentArgs exa;
    auto*          e   = app.add_subcommand("experiment", "Run an experiment from a config file or preset");
    auto*          src = e->add_option_group("source");
    src->add_option("-c,--config", exa.config, "INI experiment file");
    src->add_option("-p,--preset", exa.preset, "Named preset")->check(CLI::IsMember(harness::preset_names()));
    src->require_option(1);
    e->add_option("-o,--out", exa.out, "Results directory (default $NBTOA_OUTPUT_ROOT/<id>)");
    e->add_option("-n,--packets", exa.packets, "Override the packet count");
    e->add_option("--seed", exa.seed, "Override the master seed");
    e->add_option("--threads", exa.threads, "Worker threads (0 = all cores)");
    e->add_flag("--check", exa.check, "Evaluate the [check] section; exit 3 on failure");

    StudyArgs st;
    auto*     ms = app.add_subcommand("metric-study", "Compare detection metrics of attacked and legitimate presets");
    ms->add_option("-p,--presets", st.presets, "Presets to run")->capture_default_str()->check(CLI::IsMember(harness::preset_names()));
    ms->add_option("-o,--out", st.out, "Results directory");

    TheoryArgs th;
    auto*      t = app.add_subcommand("verify-theory", "Run the numerical derivation checks");
    t->add_option("--seed", th.seed)->capture_default_str();
    t->add_option("--pairs", th.pairs, "Perturbation pairs")->capture_default_str();
    t->add_option("--fsk-seeds", th.fsk_seeds, "FSK phase trajectories")->capture_default_str();
    t->add_option("--ensemble", th.ensemble, "Bit sequences in the flip ensemble")->capture_default_str();
    t->add_option("-o,--out", th.out, "JSON report file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? ok : config_error;
    }

    try {
        if (g->parsed()) {
            return run_generate(gen);
        }
        if (at->parsed()) {
            return run_attack(att);
        }
        if (r->parsed()) {
            return run_receive(rcv);
        }
        if (e->parsed()) {
            return run_experiment_cmd(exa);
        }
        if (ms->parsed()) {
            return run_study(st);
        }
        return run_theory(th);
    } catch (const ConfigError& err) {
        fmt::print(stderr, "config error: {}\n", err.what());
        return config_error;
    } catch (const std::exception& err) {
        fmt::print(stderr, "error: {}\n", err.what());
        return runtime_failure;
    }
}
