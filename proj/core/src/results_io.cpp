#include "nbtoa/results_io.hpp"

#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include <json.hpp>

namespace nbtoa::io {
namespace {

using ojson = nlohmann::ordered_json;

ojson to_json(const harness::Stats& s) {
    return ojson{{"n", s.n}, {"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
}

ojson to_json(const harness::PacketRecord& r) {
    ojson j;
    j["packet_id"]     = r.packet_id;
    j["config"]        = r.config;
    j["toa_s"]         = r.toa_s;
    j["toa_truth_s"]   = r.toa_truth_s;
    j["toa_advance_m"] = r.toa_advance_m;
    j["ncc"]           = r.ncc;
    j["pmse"]          = r.pmse ? ojson(*r.pmse) : ojson(nullptr);
    j["dft"]           = r.dft;
    j["bits_ok"]       = r.bits_ok;
    j["bits_ok_truth"] = r.bits_ok_truth;
    if (r.snr_db) {
        j["snr_db"] = *r.snr_db;
    }
    return j;
}

ojson to_json(const harness::RfChainConfig& rf) {
    return ojson{{"if_freq", rf.if_freq},         {"analog_rate", rf.analog_rate},
                 {"bandpass_order", rf.bandpass_order}, {"band_lo", rf.band_lo},
                 {"band_hi", rf.band_hi},         {"bandpass", rf.bandpass_enabled},
                 {"adc_rate", rf.adc_rate},       {"padding_s", rf.padding_s},
                 {"channel_delay", rf.channel_delay}};
}

ojson to_json(const harness::ExperimentConfig& c) {
    ojson j;
    j["id"]           = c.id;
    j["n_packets"]    = c.n_packets;
    j["phy"]          = std::string(c.phy.name());
    j["payload"]      = std::string(btcs::payload_kind_name(c.payload));
    j["payload_bits"] = btcs::payload_bits(c.payload);
    j["attack"]       = ojson::parse(harness::attack_to_json(c.attack));
    j["snr_db"]       = c.snr_db ? ojson(*c.snr_db) : ojson(nullptr);
    if (c.snr_range_db) {
        j["snr_range_db"] = {c.snr_range_db->first, c.snr_range_db->second};
    }
    j["noise_stage"] = std::string(harness::noise_stage_name(c.noise_stage));
    j["master_seed"] = c.master_seed;
    return j;
}

ojson to_json(const theory::DerivationReport& r) {
    auto finite = [](double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); };
    return ojson{{"lhs", r.lhs},        {"rhs", r.rhs},      {"abs_err", r.abs_err}, {"rel_err", finite(r.rel_err)},
                 {"tolerance", r.tolerance}, {"floor", r.floor}, {"pass", r.pass}};
}

ojson to_json(const std::vector<theory::NamedReport>& reports) {
    ojson arr = ojson::array();
    for (const auto& r : reports) {
        auto j    = to_json(r.report);
        j["name"] = r.name;
        arr.push_back(std::move(j));
    }
    return arr;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    }
    f << text;
    f.flush();
    if (!f) {
        throw std::runtime_error(fmt::format("write failed for {}", path.string()));
    }
}

} // namespace

std::string records_jsonl(const harness::ExperimentResult& result) {
    std::string out;
    for (const auto& r : result.records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

std::string summary_json(const harness::ExperimentResult& result) {
    const auto& s = result.summary;
    ojson       j;
    j["config"]     = to_json(result.config);
    j["rf"]         = to_json(result.rf);
    j["n_packets"]  = s.n_packets;
    j["n_bits_ok"]  = s.n_bits_ok;
    j["advance_ns"] = to_json(s.advance_ns);
    j["advance_m"]  = to_json(s.advance_m);
    j["ncc"]        = to_json(s.ncc);
    j["pmse"]       = to_json(s.pmse);
    j["dft"]        = to_json(s.dft);
    return j.dump(2) + "\n";
}

void write_experiment(const harness::ExperimentResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "records.jsonl", records_jsonl(result));
    write_text(out_dir / "summary.json", summary_json(result));
    (void)harness::emit_plots(result, out_dir);
}

std::string metric_study_json(const harness::MetricStudy& study) {
    ojson j;
    j["configs"] = ojson::array();
    for (const auto& r : study.results) {
        j["configs"].push_back(ojson{{"id", r.config.id}, {"ncc", to_json(r.summary.ncc)}, {"pmse", to_json(r.summary.pmse)}, {"dft", to_json(r.summary.dft)}});
    }
    j["comparisons"] = ojson::object();
    for (const auto& [id, overlaps] : study.comparisons) {
        ojson arr = ojson::array();
        for (const auto& o : overlaps) {
            arr.push_back(ojson{{"metric", o.metric}, {"overlap", o.overlap}, {"attacked", to_json(o.attacked)}, {"legitimate", to_json(o.legitimate)}});
        }
        j["comparisons"][id] = std::move(arr);
    }
    return j.dump(2) + "\n";
}

std::string theory_suite_json(const theory::SuiteResult& suite) {
    ojson j;
    j["pass"]       = suite.pass();
    j["perturbation_identity"] = to_json(suite.perturbation_identity);
    j["fsk_real"]   = to_json(suite.fsk_real);
    j["fsk_flip"]   = to_json(suite.fsk_flip);
    j["flip_ensemble"] = ojson{{"mean", suite.flip_ensemble_mean}, {"stderr", suite.flip_ensemble_stderr}, {"pass", suite.flip_ensemble_pass}};
    ojson adv = ojson::array();
    for (const auto& r : suite.advance) {
        adv.push_back(ojson{{"delta_s", r.delta_s}, {"predicted_s", r.predicted_s}, {"measured_s", r.measured_s}, {"rel_err", r.rel_err}});
    }
    j["advance"]      = std::move(adv);
    j["advance_pass"] = suite.advance_pass;
    j["tof"]          = to_json(suite.tof);
    return j.dump(2) + "\n";
}

std::string theory_suite_table(const theory::SuiteResult& suite) {
    std::string out;
    auto        group = [&](const char* title, const std::vector<theory::NamedReport>& v) {
        std::size_t passed  = 0;
        double      max_rel = 0.0;
        for (const auto& r : v) {
            passed += r.report.pass ? 1 : 0;
            if (r.report.abs_err > r.report.floor && std::isfinite(r.report.rel_err)) {
                max_rel = std::max(max_rel, r.report.rel_err);
            }
        }
        out += fmt::format("{:<28} {:>4}/{:<4} passed   max rel err above floor {:.3e}\n", title, passed, v.size(), max_rel);
    };
    group("perturbation identity", suite.perturbation_identity);
    group("fsk real mask", suite.fsk_real);
    group("fsk complex mask flip", suite.fsk_flip);
    out += fmt::format("{:<28} mean {:.3e}  stderr {:.3e}  {}\n", "fsk flip ensemble", suite.flip_ensemble_mean, suite.flip_ensemble_stderr,
                       suite.flip_ensemble_pass ? "pass" : "FAIL");
    out += "advance predictor\n";
    out += fmt::format("  {:>10} {:>14} {:>14} {:>10}\n", "delta_ns", "predicted_ns", "measured_ns", "rel_err");
    for (const auto& r : suite.advance) {
        out += fmt::format("  {:>10.3f} {:>14.6f} {:>14.6f} {:>10.2e}\n", r.delta_s * 1e9, r.predicted_s * 1e9, r.measured_s * 1e9, r.rel_err);
    }
    group("two-way ranging", suite.tof);
    out += fmt::format("overall: {}\n", suite.pass() ? "PASS" : "FAIL");
    return out;
}

} // namespace nbtoa::io
