#include <benchmark/benchmark.h>

#include "nbtoa/attack.hpp"
#include "nbtoa/harness.hpp"
#include "nbtoa/receiver.hpp"
#include "nbtoa/sigproc.hpp"

using namespace nbtoa;

namespace {

btcs::CsSyncPacket bench_packet() {
    btcs::CsSyncConfig cfg;
    cfg.payload = btcs::RandomPayload{128};
    cfg.seed    = 9;
    return btcs::make_packet(cfg, 8);
}

void BM_ResampleUp(benchmark::State& state) {
    const auto p  = harness::pad_packet(bench_packet(), {});
    sigproc::ResampleOptions opt;
    opt.half_width = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(sigproc::resample(p, 80e6, opt));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.size()));
}
BENCHMARK(BM_ResampleUp)->Arg(32)->Arg(128);

void BM_ApplyNgd(benchmark::State& state) {
    const auto p      = harness::pad_packet(bench_packet(), {});
    const auto analog = sigproc::frequency_shift(sigproc::resample(p, 80e6), 4.77e6);
    const auto mode   = state.range(0) == 0 ? attack::NgdRealization::frequency_domain : attack::NgdRealization::rational_discrete;
    for (auto _ : state) {
        benchmark::DoNotOptimize(attack::apply_ngd(analog, {62e-9, 4.77e6, mode}));
    }
    state.SetLabel(std::string(attack::realization_name(mode)));
}
BENCHMARK(BM_ApplyNgd)->Arg(0)->Arg(1);

void BM_DifferentialXcorr(benchmark::State& state) {
    const auto p  = bench_packet();
    const auto rx = sigproc::add_awgn(harness::pad_packet(p, {}), 20.0, 1, p.waveform.mean_power());
    for (auto _ : state) {
        benchmark::DoNotOptimize(receiver::search_toa(receiver::differential_xcorr(rx, p.waveform, 1e-6), 1e-6));
    }
}
BENCHMARK(BM_DifferentialXcorr);

void BM_RunPacket(benchmark::State& state) {
    auto cfg = harness::preset("exp2-c1");
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(harness::run_packet(cfg, {}, i++ % 100));
    }
}
BENCHMARK(BM_RunPacket)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
