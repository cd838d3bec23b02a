#include <benchmark/benchmark.h>

#include "frf/classical.hpp"
#include "frf/graybox.hpp"
#include "frf/local.hpp"
#include "frf/plant.hpp"
#include "frf/sigproc.hpp"
#include "../tests/test_models.hpp"

using namespace frf;

namespace {

sigproc::MultisineSpec bench_spec(int n_lines) {
    sigproc::MultisineSpec s;
    s.sample_rate = 500.0;
    s.period_samples = 4000;
    s.f_min_hz = 1.0;
    s.f_max_hz = 45.0;
    s.n_lines = n_lines;
    s.amplitudes = {0.05};
    s.n_inputs = 3;
    s.orthogonal_blocks = false;
    s.phase_seed = 7;
    return s;
}

// One simulated closed-loop record, shared across estimator benchmarks.
SpectralRecord bench_record(int n_lines, int n_experiments) {
    auto m = testmodels::three_axis();
    const auto ctrl = testmodels::scaled_controller(m);
    const auto spec = bench_spec(n_lines);
    const auto signals = sigproc::design_multisine(spec, n_experiments);
    plant::SimulationOptions opt;
    opt.sample_rate = spec.sample_rate;
    opt.period_samples = spec.period_samples;
    opt.n_periods = 1;
    opt.settle_periods = 1;
    plant::DisturbanceConfig dist;
    dist.position_noise_std = VectorXd::Constant(3, 2e-3);
    dist.noise_seed = 11;
    const VectorXd q = VectorXd::Zero(3);
    std::vector<SpectralRecord> recs;
    for (int e = 0; e < n_experiments; ++e) {
        const auto r = plant::simulate_closed_loop(m, ctrl, dist, signals[e], q, opt);
        recs.push_back(sigproc::to_spectral(r.record, spec));
    }
    return merge_experiments(recs);
}

void BM_SimulateClosedLoop(benchmark::State& state) {
    auto m = testmodels::three_axis();
    const auto ctrl = testmodels::scaled_controller(m);
    const auto spec = bench_spec(64);
    const auto signals = sigproc::design_multisine(spec, 1);
    plant::SimulationOptions opt;
    opt.sample_rate = spec.sample_rate;
    opt.period_samples = spec.period_samples;
    opt.n_periods = 1;
    opt.settle_periods = 1;
    plant::DisturbanceConfig dist;
    dist.position_noise_std = VectorXd::Constant(3, 2e-3);
    const VectorXd q = VectorXd::Zero(3);
    for (auto _ : state) {
        auto r = plant::simulate_closed_loop(m, ctrl, dist, signals[0], q, opt);
        benchmark::DoNotOptimize(r.record.y.data());
    }
}
BENCHMARK(BM_SimulateClosedLoop)->Unit(benchmark::kMillisecond);

void BM_H1(benchmark::State& state) {
    const auto rec = bench_record(static_cast<int>(state.range(0)), 3);
    const auto blocks = classical::ExperimentBlocks::of(rec, 1);
    for (auto _ : state) {
        auto est = classical::h1_estimate(rec, blocks);
        benchmark::DoNotOptimize(est.lines.data());
    }
}
BENCHMARK(BM_H1)->Arg(32)->Arg(96)->Unit(benchmark::kMicrosecond);

void BM_Log(benchmark::State& state) {
    const auto rec = bench_record(static_cast<int>(state.range(0)), 6);
    const auto blocks = classical::ExperimentBlocks::of(rec, 2);
    for (auto _ : state) {
        auto est = classical::log_estimate(rec, blocks);
        benchmark::DoNotOptimize(est.lines.data());
    }
}
BENCHMARK(BM_Log)->Arg(32)->Arg(96)->Unit(benchmark::kMicrosecond);

void BM_LrmMimo(benchmark::State& state) {
    const auto rec = bench_record(static_cast<int>(state.range(0)), 1);
    local::LocalFitConfig cfg;
    for (auto _ : state) {
        auto est = local::lrm_mimo_fit(rec, cfg);
        benchmark::DoNotOptimize(est.lines.data());
    }
}
BENCHMARK(BM_LrmMimo)->Arg(32)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_JioLrm(benchmark::State& state) {
    const auto rec = bench_record(static_cast<int>(state.range(0)), 1);
    local::LocalFitConfig cfg;
    for (auto _ : state) {
        auto est = local::jio_lrm(rec, cfg);
        benchmark::DoNotOptimize(est.lines.data());
    }
}
BENCHMARK(BM_JioLrm)->Arg(32)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_GrayboxCost(benchmark::State& state) {
    auto m = testmodels::three_axis();
    const VectorXd q = VectorXd::Zero(3);
    const auto spec = bench_spec(64);
    const auto bins = spec.excited_bins();
    VectorXd freqs(static_cast<Eigen::Index>(bins.size()));
    for (size_t k = 0; k < bins.size(); ++k)
        freqs(static_cast<Eigen::Index>(k)) = 2.0 * 3.141592653589793 * spec.bin_hz(bins[k]);
    const auto truth = plant::true_frf(m, q, freqs);
    const auto scheme = graybox::build_weights({truth}, m, {q}, graybox::WeightOptions{});
    for (auto _ : state) {
        auto c = graybox::log_error_cost(m.theta, m, {q}, {truth}, scheme);
        benchmark::DoNotOptimize(c.cost);
    }
}
BENCHMARK(BM_GrayboxCost)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
