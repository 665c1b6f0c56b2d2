#include <benchmark/benchmark.h>

#include "hpfr/sim.hpp"

using namespace hpfr;

namespace {

SchemeConfig scheme(Scheme s, int n) {
    SchemeConfig c;
    c.scheme = s;
    c.n = n;
    c.families = {parse_fit_spec("N"), parse_fit_spec("T")};
    return c;
}

CovParams truth() {
    CovParams p;
    p.theta.v0 = 0.04;
    p.theta.w = Vector::Constant(1, 1.0);
    p.phi_b = Vector::Constant(1, 0.01);
    p.phi_eps = 0.01;
    return p;
}

} // namespace

static void BM_CompositeSigmaFactor(benchmark::State& state) {
    const SimData sd = generate_scheme(scheme(Scheme::I, static_cast<int>(state.range(0))), 0);
    const CovParams p = truth();
    for (auto _ : state) {
        SpdFactor f(composite_sigma(sd.data[0], p));
        benchmark::DoNotOptimize(f.log_det());
    }
}
BENCHMARK(BM_CompositeSigmaFactor)->Arg(31)->Arg(61);

static void BM_MarginalLoglik(benchmark::State& state) {
    const SimData sd = generate_scheme(scheme(Scheme::II, 61), 0);
    const ModelData md(sd.data, BasisConfig{3, 18, -4.0, 4.0});
    ModelParams p{init_beta(md), truth(), MixingFamily::student_t(4.0)};
    for (auto _ : state) benchmark::DoNotOptimize(marginal_loglik(md, p));
}
BENCHMARK(BM_MarginalLoglik);

static void BM_Fit(benchmark::State& state) {
    const SimData sd = generate_scheme(scheme(Scheme::V, static_cast<int>(state.range(0))), 0);
    const ModelData md(sd.data, BasisConfig{3, 18, -4.0, 4.0});
    const MixingFamily fam = state.range(1) ? MixingFamily::student_t(4.0) : MixingFamily::gaussian();
    FitConfig fc;
    fc.compute_information = false;
    for (auto _ : state) benchmark::DoNotOptimize(fit(md, fam, fc).loglik);
}
BENCHMARK(BM_Fit)->Args({31, 0})->Args({31, 1})->Args({61, 0})->Args({61, 1})->Unit(benchmark::kMillisecond);

static void BM_BootstrapInterval(benchmark::State& state) {
    const SimData sd = generate_scheme(scheme(Scheme::I, 61), 0);
    const ModelData md(sd.data, BasisConfig{3, 18, -4.0, 4.0});
    const FitResult fr = fit(md, MixingFamily::student_t(4.0));
    const Subject& s = md.data()[0];
    PredictOptions po;
    po.methods = {IntervalMethod::BTS};
    for (auto _ : state) {
        const auto pr = predict_random_terms(md, fr, 0, {s.t, s.X, s.W}, po);
        benchmark::DoNotOptimize(pr.intervals.size());
    }
}
BENCHMARK(BM_BootstrapInterval)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
