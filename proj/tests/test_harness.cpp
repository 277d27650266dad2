#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "nbtoa/harness.hpp"
#include "nbtoa/results_io.hpp"
#include "support.hpp"

using namespace nbtoa;
using namespace nbtoa::harness;

namespace {

ExperimentConfig small(std::string_view name, std::size_t n) {
    auto c      = preset(name);
    c.n_packets = n;
    return c;
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("nbtoa_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream     f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<double> column(const ExperimentResult& r, double PacketRecord::*field) {
    std::vector<double> v;
    for (const auto& rec : r.records) {
        v.push_back(rec.*field);
    }
    return v;
}

} // namespace

TEST(RfChainConfig, Validation) {
    RfChainConfig rf;
    EXPECT_NO_THROW(rf.validate());
    rf.adc_rate = 80e6;
    EXPECT_THROW(rf.validate(), ConfigError);
    rf          = {};
    rf.band_hi  = 41e6;
    EXPECT_THROW(rf.validate(), ConfigError);
    rf                = {};
    rf.bandpass_order = 3;
    EXPECT_THROW(rf.validate(), ConfigError);
    rf          = {};
    rf.if_freq  = 45e6;
    EXPECT_THROW(rf.validate(), ConfigError);
}

TEST(ExperimentConfig, Validation) {
    auto c = preset("exp2-c1");
    EXPECT_NO_THROW(c.validate());
    c.n_packets = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c              = preset("exp3-legit");
    c.snr_db       = 20.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c.snr_db       = std::nullopt;
    c.snr_range_db = std::pair{30.0, 10.0};
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW((void)preset("exp9"), ConfigError);
    for (const auto& name : preset_names()) {
        EXPECT_NO_THROW(preset(name).validate()) << name;
    }
}

TEST(RunChain, PathPurityWithoutAttack) {
    const RfChainConfig rf;
    const auto          cfg = small("exp3-legit", 3);
    const auto          p   = experiment_packet(cfg, rf, 0);
    for (std::optional<double> snr : {std::optional<double>{}, std::optional<double>{10.0}}) {
        const auto out = run_chain(p, rf, make_transform(NoAttack{}), {snr, 5});
        ASSERT_EQ(out.attacked.size(), out.ground_truth.size());
        for (std::size_t k = 0; k < out.attacked.size(); ++k) {
            ASSERT_EQ(out.attacked[k], out.ground_truth[k]);
        }
    }
    auto legit = cfg;
    legit.snr_db.reset();
    legit.snr_range_db.reset();
    for (const auto& c : {cfg, legit}) {
        for (const auto& r : run_experiment(c, rf).records) {
            EXPECT_EQ(r.advance_s, 0.0);
            EXPECT_EQ(r.toa_s, r.toa_truth_s);
        }
    }
}

TEST(RunChain, ConversionTransparency) {
    RfChainConfig rf;
    rf.bandpass_enabled = false;
    const auto cfg      = small("exp3-legit", 1);
    const auto p        = experiment_packet(cfg, rf, 0);
    const auto in       = pad_packet(p, rf);
    const auto out      = run_chain(p, rf, make_transform(NoAttack{}));
    ASSERT_EQ(out.ground_truth.size(), in.size());
    ASSERT_DOUBLE_EQ(out.ground_truth.t0(), in.t0());
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t k = 0; k < in.size(); ++k) {
        err += std::norm(out.ground_truth[k] - in[k]);
        ref += std::norm(in[k]);
    }
    EXPECT_LT(std::sqrt(err / ref), 1e-3);
}

TEST(RunChain, NgdAdvanceNearGroupDelay) {
    const auto r = run_experiment(small("exp1", 3), {});
    for (const auto& rec : r.records) {
        EXPECT_NEAR(rec.advance_s, -62e-9, 6.2e-9) << rec.packet_id;
        EXPECT_TRUE(rec.bits_ok);
        EXPECT_NEAR(rec.toa_advance_m, rec.advance_s * speed_of_light, 1e-12);
    }
}

TEST(RunChain, MaskOnGfskBarelyMovesToaButRaisesDft) {
    const auto mask  = run_experiment(small("fsk-mask", 10), {});
    auto       clean = small("exp3-legit", 10);
    clean.snr_range_db.reset();
    const auto ref = run_experiment(clean, {});
    const auto ngd = run_experiment(small("exp2-c1", 10), {});
    for (std::size_t i = 0; i < mask.records.size(); ++i) {
        // Far below the NGD advance; the receiver-level null is tightened in the acceptance run.
        EXPECT_LT(std::abs(mask.records[i].advance_s), 0.25 / 8e6);
        EXPECT_LT(std::abs(mask.records[i].advance_s), 0.5 * std::abs(ngd.records[i].advance_s));
        EXPECT_GT(mask.records[i].dft, 10.0 * ref.records[i].dft);
    }
}

TEST(RunExperiment, SeedDeterminismAcrossThreadCounts) {
    auto c    = small("exp2-c4", 6);
    c.threads = 1;
    const auto a = run_experiment(c, {});
    c.threads    = 4;
    const auto b = run_experiment(c, {});
    EXPECT_EQ(a.records, b.records);
    EXPECT_EQ(io::records_jsonl(a), io::records_jsonl(b));
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].packet_id, i);
    }
    c.master_seed = 7;
    EXPECT_NE(run_experiment(c, {}).records, a.records);
}

TEST(RunExperimentProperty, ChannelDelayInvariance) {
    const auto   c    = small("exp2-c1", 3);
    RfChainConfig rf;
    const auto   base = run_experiment(c, rf);
    for (std::size_t d : {1U, 17U, 80U}) {
        rf.channel_delay = d;
        const auto r     = run_experiment(c, rf);
        for (std::size_t i = 0; i < r.records.size(); ++i) {
            EXPECT_NEAR(r.records[i].advance_s, base.records[i].advance_s, 1e-11) << d;
            EXPECT_NEAR(r.records[i].toa_truth_s - base.records[i].toa_truth_s, static_cast<double>(d) / rf.adc_rate, 1e-11) << d;
        }
    }
}

TEST(RunExperiment, SummaryRecomputableFromRecords) {
    const auto r = run_experiment(small("exp2-c4", 12), {});
    EXPECT_EQ(r.summary.n_packets, r.records.size());
    const auto adv = column(r, &PacketRecord::advance_s);
    double     mean = 0.0;
    for (double v : adv) {
        mean += v;
    }
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double v : adv) {
        var += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(adv.size() - 1));
    EXPECT_NEAR(r.summary.advance_ns.mean, mean * 1e9, 1e-9);
    EXPECT_NEAR(r.summary.advance_ns.std, sd * 1e9, 1e-9);
    EXPECT_NEAR(r.summary.advance_m.mean, mean * speed_of_light, 1e-9);
    EXPECT_EQ(r.summary.n_bits_ok, static_cast<std::size_t>(std::count_if(r.records.begin(), r.records.end(), [](const auto& x) { return x.bits_ok; })));
    const auto again = summarize(r.records);
    EXPECT_EQ(again.advance_m.mean, r.summary.advance_m.mean);
    EXPECT_EQ(again.ncc.max, r.summary.ncc.max);
}

TEST(Stats, HandComputed) {
    const auto s = stats_of({1.0, 2.0, 4.0});
    EXPECT_EQ(s.n, 3U);
    EXPECT_DOUBLE_EQ(s.mean, 7.0 / 3.0);
    EXPECT_NEAR(s.std, std::sqrt(((1 - 7.0 / 3) * (1 - 7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3) + (4 - 7.0 / 3) * (4 - 7.0 / 3)) / 2), 1e-15);
    EXPECT_EQ(s.min, 1.0);
    EXPECT_EQ(s.max, 4.0);
}

TEST(Overlap, Fraction) {
    EXPECT_DOUBLE_EQ(overlap_fraction({1, 2, 3, 4}, {1.5, 3.5}), 0.5);
    EXPECT_DOUBLE_EQ(overlap_fraction({5, 6}, {1, 2}), 0.0);
    EXPECT_DOUBLE_EQ(overlap_fraction({1, 2}, {1, 2}), 1.0);
}

TEST(MetricStudy, LegitControlOverlaps) {
    auto legit         = small("exp3-legit", 100);
    legit.snr_range_db.reset();
    legit.snr_db = 30.0;
    auto probe         = legit;
    probe.n_packets    = 20;
    probe.master_seed  = 99;
    const auto a       = run_experiment(legit, {});
    const auto b       = run_experiment(probe, {});
    for (const auto& m : compare_metrics(b, a)) {
        EXPECT_GE(m.overlap, 0.95) << m.metric;
    }
}

TEST(MetricStudy, ComparesAttackedAgainstPooledLegit) {
    const auto study = run_metric_study({small("exp3-legit", 20), small("exp3-ngd", 10), small("exp3-mask", 10)}, {});
    EXPECT_EQ(study.results.size(), 3U);
    ASSERT_EQ(study.comparisons.size(), 2U);
    ASSERT_TRUE(study.comparisons.contains("exp3-mask"));
    for (const auto& m : study.comparisons.at("exp3-mask")) {
        if (m.metric == "dft") {
            EXPECT_LE(m.overlap, 0.1);
        }
    }
}

TEST(EmitPlots, ExemplarPeakAndDeterminism) {
    const auto r   = run_experiment(small("exp1", 1), {});
    const auto dir = scratch("plots");
    const auto files = emit_plots(r, dir);
    ASSERT_EQ(files.size(), 3U);
    const auto& t  = r.exemplar;
    ASSERT_FALSE(t.lag_s.empty());
    const auto ia = std::max_element(t.attacked.begin(), t.attacked.end()) - t.attacked.begin();
    const auto ig = std::max_element(t.ground_truth.begin(), t.ground_truth.end()) - t.ground_truth.begin();
    EXPECT_LE(t.lag_s[static_cast<std::size_t>(ia)], t.lag_s[static_cast<std::size_t>(ig)]);
    EXPECT_LT(r.records[0].toa_s, r.records[0].toa_truth_s);

    const auto first = slurp(dir / "correlation_trace.csv");
    EXPECT_EQ(first.rfind("lag_ns,attacked,ground_truth\n", 0), 0U);
    const auto r2   = run_experiment(small("exp1", 1), {});
    const auto dir2 = scratch("plots2");
    (void)emit_plots(r2, dir2);
    for (const auto& f : files) {
        EXPECT_EQ(slurp(f), slurp(dir2 / f.filename())) << f;
    }
}

TEST(EmitPlots, Errors) {
    ExperimentResult empty;
    EXPECT_THROW((void)emit_plots(empty, scratch("empty")), ConfigError);
    const auto r       = run_experiment(small("exp1", 1), {});
    const auto blocker = scratch("blocker");
    std::ofstream(blocker) << "x";
    EXPECT_ANY_THROW((void)emit_plots(r, blocker / "sub"));
}

TEST(ResultsIo, RecordsAreJsonLines) {
    const auto r     = run_experiment(small("exp2-c4", 5), {});
    const auto text  = io::records_jsonl(r);
    std::istringstream in(text);
    std::string        line;
    std::size_t        n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const char* key : {"packet_id", "config", "toa_s", "toa_advance_m", "ncc", "pmse", "dft", "bits_ok"}) {
            EXPECT_TRUE(j.contains(key)) << key;
        }
        EXPECT_EQ(j["packet_id"].get<std::size_t>(), n);
        EXPECT_DOUBLE_EQ(j["toa_advance_m"].get<double>(), r.records[n].toa_advance_m);
        ++n;
    }
    EXPECT_EQ(n, 5U);
    const auto s = nlohmann::json::parse(io::summary_json(r));
    EXPECT_TRUE(s.contains("config"));

    const auto dir = scratch("io");
    io::write_experiment(r, dir);
    EXPECT_EQ(slurp(dir / "records.jsonl"), text);
    EXPECT_TRUE(std::filesystem::exists(dir / "summary.json"));
}

TEST(ConfigFile, ParsesShippedStyle) {
    const auto f = parse_experiment_text(R"(
[experiment]
id = t1
n_packets = 7
phy = LE2M
payload = sounding
payload_bits = 96
markers = 4
master_seed = 5
snr_min = 12
snr_max = 20
noise_stage = adc_output

[attack]
type = ngd
delta_t = 40e-9

[rf]
adc_rate = 8e6
channel_delay = 3

[check]
mean_advance_m_min = 1
min_bits_ok_fraction = 0.9
)");
    EXPECT_EQ(f.experiment.id, "t1");
    EXPECT_EQ(f.experiment.n_packets, 7U);
    EXPECT_EQ(f.experiment.phy, btcs::PhyMode::le2m());
    EXPECT_EQ(btcs::payload_kind_name(f.experiment.payload), "sounding");
    EXPECT_EQ(f.experiment.master_seed, 5U);
    ASSERT_TRUE(f.experiment.snr_range_db);
    EXPECT_EQ(f.experiment.snr_range_db->first, 12.0);
    EXPECT_EQ(f.experiment.noise_stage, NoiseStage::adc_output);
    const auto* ngd = std::get_if<attack::NgdFilterSpec>(&f.experiment.attack);
    ASSERT_NE(ngd, nullptr);
    EXPECT_DOUBLE_EQ(ngd->delta_t, 40e-9);
    EXPECT_DOUBLE_EQ(ngd->center_freq, f.rf.if_freq);
    EXPECT_EQ(f.rf.channel_delay, 3U);
    EXPECT_EQ(f.check.mean_advance_m_min, 1.0);
    EXPECT_FALSE(f.check.std_advance_m_max);
}

TEST(ConfigFile, Errors) {
    EXPECT_THROW((void)parse_experiment_text("[attack]\ntype = laser\n"), ConfigError);
    EXPECT_THROW((void)parse_experiment_text("[experiment]\nsnr_min = 10\n"), ConfigError);
    EXPECT_THROW((void)parse_experiment_text("[experiment]\nn_packets = many\n"), ConfigError);
    EXPECT_THROW((void)parse_experiment_text("[experiment]\nphy = LE3M\n"), ConfigError);
    EXPECT_THROW((void)parse_experiment_text("[experiment\n"), ConfigError);
    EXPECT_THROW((void)parse_experiment_text("[attack]\ntype = ngd\ndelta_tt = 1e-9\n"), ConfigError);
    EXPECT_THROW((void)parse_experiment_text("[radio]\nif_freq = 1e6\n"), ConfigError);
    EXPECT_THROW((void)load_experiment_file("/nonexistent/x.ini"), std::runtime_error);
}

TEST(ConfigFile, ShippedConfigsLoad) {
    const std::filesystem::path dir = NBTOA_SOURCE_DIR "/configs";
    std::size_t                 n   = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".ini") {
            EXPECT_NO_THROW(load_experiment_file(e.path()).experiment.validate()) << e.path();
            ++n;
        }
    }
    EXPECT_GE(n, 5U);
}

TEST(AttackJson, RoundTripAndErrors) {
    for (const AttackSpec& a : {AttackSpec{NoAttack{}}, AttackSpec{attack::NgdFilterSpec{62e-9, 4.77e6}},
                                AttackSpec{attack::MaskSpec::truncation(0.4, 1e-6, 1e-7)}}) {
        const auto text = attack_to_json(a);
        EXPECT_EQ(attack_to_json(attack_from_json(text)), text);
        EXPECT_EQ(attack_kind(attack_from_json(text)), attack_kind(a));
    }
    EXPECT_THROW((void)attack_from_json("{"), ConfigError);
    EXPECT_THROW((void)attack_from_json(R"({"type":"mask","kind":"wobble"})"), ConfigError);
    EXPECT_THROW((void)attack_from_json(R"({"type":"ngd","delta_t":-1})"), ConfigError);
}

TEST(CheckResult, PassAndFail) {
    const auto r = run_experiment(small("exp2-c1", 5), {});
    CheckSpec  ok{15.0, 22.0, 0.25, 1.0};
    EXPECT_TRUE(check_result(r, ok).pass);
    EXPECT_EQ(check_result(r, ok).lines.size(), 4U);
    CheckSpec bad;
    bad.mean_advance_m_min = 30.0;
    EXPECT_FALSE(check_result(r, bad).pass);
}

TEST(EstimatorStudy, RowsAreConsistent) {
    const auto rows = estimator_study({10.0, 30.0}, 40, 3);
    ASSERT_EQ(rows.size(), 2U);
    for (const auto& row : rows) {
        EXPECT_EQ(row.n, 40U);
        EXPECT_GT(row.beta_rms_hz, 100e3);
        EXPECT_GE(row.std_s, row.crlb_s);
    }
    EXPECT_LT(rows[1].std_s, rows[0].std_s);
    EXPECT_NEAR(rows[0].crlb_s / rows[1].crlb_s, 10.0, 1e-9);
}

TEST(OutputRoot, EnvironmentOverride) {
    ::setenv("NBTOA_OUTPUT_ROOT", "/tmp/nbtoa_root", 1);
    EXPECT_EQ(default_output_root(), std::filesystem::path("/tmp/nbtoa_root"));
    ::unsetenv("NBTOA_OUTPUT_ROOT");
    EXPECT_EQ(default_output_root(), std::filesystem::path("results"));
}
