#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <json.hpp>

#include "nbtoa/harness.hpp"

namespace nbtoa::harness {
namespace {

namespace pt = boost::property_tree;

template <typename T>
std::optional<T> get_opt(const pt::ptree& tree, const std::string& key) {
    try {
        // get_optional<T> swallows conversion failures; get<T> reports them.
        if (!tree.get_optional<std::string>(key)) {
            return std::nullopt;
        }
        return tree.get<T>(key);
    } catch (const pt::ptree_bad_data& e) {
        throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
    }
}

template <typename T>
T get_or(const pt::ptree& tree, const std::string& key, T fallback) {
    return get_opt<T>(tree, key).value_or(fallback);
}

void reject_unknown_keys(const pt::ptree& tree) {
    static const std::map<std::string, std::set<std::string>> known{
        {"experiment", {"id", "n_packets", "phy", "payload", "payload_bits", "markers", "master_seed", "snr_db", "snr_min", "snr_max",
                        "threads", "noise_stage"}},
        {"attack", {"type", "delta_t", "center_freq", "realization", "period", "duty", "offset", "edge"}},
        {"rf", {"if_freq", "band_lo", "band_hi", "analog_rate", "adc_rate", "bandpass_order", "bandpass", "padding", "channel_delay"}},
        {"check", {"mean_advance_m_min", "mean_advance_m_max", "std_advance_m_max", "min_bits_ok_fraction"}},
    };
    for (const auto& [section, body] : tree) {
        const auto it = known.find(section);
        if (it == known.end()) {
            throw ConfigError(fmt::format("config: unknown section [{}]", section));
        }
        for (const auto& [key, value] : body) {
            if (!it->second.contains(key)) {
                throw ConfigError(fmt::format("config: unknown key '{}.{}'", section, key));
            }
        }
    }
}

btcs::Payload parse_payload(const pt::ptree& tree) {
    const auto kind = get_or<std::string>(tree, "experiment.payload", "random");
    if (kind == "none") {
        return btcs::NoPayload{};
    }
    if (kind == "random") {
        return btcs::RandomPayload{get_or<int>(tree, "experiment.payload_bits", 128)};
    }
    if (kind == "sounding") {
        return btcs::SoundingPayload{get_or<int>(tree, "experiment.payload_bits", 96), get_or<int>(tree, "experiment.markers", 4)};
    }
    throw ConfigError(fmt::format("experiment.payload must be none, random or sounding, got '{}'", kind));
}

AttackSpec parse_attack(const pt::ptree& tree, const RfChainConfig& rf, btcs::PhyMode phy) {
    const auto type = get_or<std::string>(tree, "attack.type", "none");
    if (type == "none") {
        return NoAttack{};
    }
    if (type == "ngd") {
        attack::NgdFilterSpec spec;
        spec.delta_t     = get_or<double>(tree, "attack.delta_t", 62e-9);
        spec.center_freq = get_or<double>(tree, "attack.center_freq", rf.if_freq);
        spec.realization = attack::realization_from_name(get_or<std::string>(tree, "attack.realization", "frequency_domain"));
        if (!(spec.delta_t > 0.0) || !(spec.center_freq >= 0.0)) {
            throw ConfigError("attack: ngd needs delta_t > 0 and center_freq >= 0");
        }
        return spec;
    }
    if (type == "mask") {
        const double period = get_or<double>(tree, "attack.period", phy.symbol_duration());
        auto         spec   = attack::MaskSpec::truncation(get_or<double>(tree, "attack.duty", 0.5), period, get_or<double>(tree, "attack.offset", 0.0));
        if (auto edge = get_opt<double>(tree, "attack.edge")) {
            std::get<attack::Truncation>(spec.kind).edge_s = *edge;
        }
        return spec;
    }
    throw ConfigError(fmt::format("attack.type must be none, mask or ngd, got '{}'", type));
}

} // namespace

ExperimentFile parse_experiment_text(const std::string& text) {
    pt::ptree          tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("config parse error: {}", e.what()));
    }

    reject_unknown_keys(tree);

    ExperimentFile f;
    auto&          rf = f.rf;
    rf.if_freq          = get_or<double>(tree, "rf.if_freq", rf.if_freq);
    rf.band_lo          = get_or<double>(tree, "rf.band_lo", rf.if_freq - 1.5e6);
    rf.band_hi          = get_or<double>(tree, "rf.band_hi", rf.if_freq + 1.5e6);
    rf.analog_rate      = get_or<double>(tree, "rf.analog_rate", rf.analog_rate);
    rf.adc_rate         = get_or<double>(tree, "rf.adc_rate", rf.adc_rate);
    rf.bandpass_order   = get_or<int>(tree, "rf.bandpass_order", rf.bandpass_order);
    rf.bandpass_enabled = get_or<bool>(tree, "rf.bandpass", rf.bandpass_enabled);
    rf.padding_s        = get_or<double>(tree, "rf.padding", rf.padding_s);
    rf.channel_delay    = get_or<std::size_t>(tree, "rf.channel_delay", rf.channel_delay);
    rf.validate();

    auto& e       = f.experiment;
    e.id          = get_or<std::string>(tree, "experiment.id", e.id);
    e.n_packets   = get_or<std::size_t>(tree, "experiment.n_packets", e.n_packets);
    e.phy         = btcs::PhyMode::from_name(get_or<std::string>(tree, "experiment.phy", "LE1M"));
    e.payload     = parse_payload(tree);
    e.master_seed = get_or<std::uint64_t>(tree, "experiment.master_seed", e.master_seed);
    e.snr_db      = get_opt<double>(tree, "experiment.snr_db");
    e.threads     = get_or<unsigned>(tree, "experiment.threads", 0);
    e.noise_stage = noise_stage_from_name(get_or<std::string>(tree, "experiment.noise_stage", "analog_input"));
    const auto lo = get_opt<double>(tree, "experiment.snr_min");
    const auto hi = get_opt<double>(tree, "experiment.snr_max");
    if (lo.has_value() != hi.has_value()) {
        throw ConfigError("experiment: snr_min and snr_max must be given together");
    }
    if (lo) {
        e.snr_range_db = std::pair{*lo, *hi};
    }
    e.attack = parse_attack(tree, rf, e.phy);
    e.validate();

    f.check.mean_advance_m_min   = get_opt<double>(tree, "check.mean_advance_m_min");
    f.check.mean_advance_m_max   = get_opt<double>(tree, "check.mean_advance_m_max");
    f.check.std_advance_m_max    = get_opt<double>(tree, "check.std_advance_m_max");
    f.check.min_bits_ok_fraction = get_opt<double>(tree, "check.min_bits_ok_fraction");
    return f;
}

ExperimentFile load_experiment_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open config {}", path.string()));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment_text(buf.str());
}

AttackSpec attack_from_json(const std::string& json_text, double default_center_freq, double default_period_s) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("attack config: {}", e.what()));
    }
    try {
        const auto type = j.value("type", std::string("none"));
        if (type == "none") {
            return NoAttack{};
        }
        if (type == "ngd") {
            attack::NgdFilterSpec spec;
            spec.delta_t     = j.value("delta_t", 62e-9);
            spec.center_freq = j.value("center_freq", default_center_freq);
            spec.realization = attack::realization_from_name(j.value("realization", std::string("frequency_domain")));
            if (!(spec.delta_t > 0.0) || !(spec.center_freq >= 0.0)) {
                throw ConfigError("attack config: ngd needs delta_t > 0 and center_freq >= 0");
            }
            return spec;
        }
        if (type == "mask") {
            attack::MaskSpec spec;
            spec.period_s        = j.value("period", default_period_s);
            spec.offset_s        = j.value("offset", 0.0);
            spec.complex_allowed = j.value("complex_allowed", false);
            const auto kind      = j.value("kind", std::string("truncation"));
            if (kind == "truncation") {
                spec.kind = attack::Truncation{j.value("duty", 0.5), j.value("edge", spec.period_s / 16.0)};
            } else if (kind == "derivative_exponential") {
                attack::DerivativeExponential de;
                de.alpha            = {j.value("alpha", 0.3), j.value("alpha_imag", 0.0)};
                de.pulse_derivative = j.at("pulse_derivative").get<std::vector<double>>();
                spec.kind           = std::move(de);
            } else {
                throw ConfigError(fmt::format("attack config: unknown mask kind '{}'", kind));
            }
            return spec;
        }
        throw ConfigError(fmt::format("attack config: unknown type '{}'", type));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("attack config: {}", e.what()));
    }
}

std::string attack_to_json(const AttackSpec& spec) {
    nlohmann::ordered_json j;
    j["type"] = std::string(attack_kind(spec));
    if (const auto* n = std::get_if<attack::NgdFilterSpec>(&spec)) {
        j["delta_t"]     = n->delta_t;
        j["center_freq"] = n->center_freq;
        j["realization"] = std::string(attack::realization_name(n->realization));
    } else if (const auto* m = std::get_if<attack::MaskSpec>(&spec)) {
        j["period"]          = m->period_s;
        j["offset"]          = m->offset_s;
        j["complex_allowed"] = m->complex_allowed;
        if (const auto* t = std::get_if<attack::Truncation>(&m->kind)) {
            j["kind"] = "truncation";
            j["duty"] = t->duty;
            j["edge"] = t->edge_s;
        } else {
            const auto& d         = std::get<attack::DerivativeExponential>(m->kind);
            j["kind"]             = "derivative_exponential";
            j["alpha"]            = d.alpha.real();
            j["alpha_imag"]       = d.alpha.imag();
            j["pulse_derivative"] = d.pulse_derivative;
        }
    }
    return j.dump();
}

} // namespace nbtoa::harness
