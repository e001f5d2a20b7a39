#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "mlet/compress.hpp"
#include "mlet/ctr_model.hpp"
#include "mlet/embedding.hpp"
#include "mlet/matrix.hpp"
#include "mlet/metrics.hpp"
#include "mlet/rng.hpp"
#include "mlet/svd.hpp"
#include "mlet/synth_data.hpp"

namespace {

mlet::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    mlet::Rng rng(seed);
    mlet::Matrix m(rows, cols);
    for (double& x : m.data()) {
        x = rng.gaussian(0.0, 1.0);
    }
    return m;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const mlet::Matrix a = random_matrix(n, n, 1);
    const mlet::Matrix b = random_matrix(n, n, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mlet::matmul(a, b));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_SvdFull(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const mlet::Matrix a = random_matrix(8, n, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mlet::svd_full(a));
    }
}
BENCHMARK(BM_SvdFull)->Arg(64)->Arg(256)->Arg(1024);

void BM_SvdThin(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const mlet::Matrix a = random_matrix(8, n, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mlet::svd_thin(a));
    }
}
BENCHMARK(BM_SvdThin)->Arg(64)->Arg(256)->Arg(1024);

void BM_LookupMlet(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    mlet::InitSpec init;
    init.factor_std = 0.5;
    init.seed = 5;
    const mlet::EmbeddingBundle b = mlet::init_mlet(8, 100000, k, init);
    mlet::Query q;
    for (std::size_t i = 0; i < 128; ++i) {
        q.indices.push_back((i * 677) % 100000);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(mlet::lookup(b, q));
    }
}
BENCHMARK(BM_LookupMlet)->Arg(8)->Arg(32)->Arg(128);

void BM_Collapse(benchmark::State& state) {
    mlet::InitSpec init;
    init.factor_std = 0.5;
    init.seed = 6;
    const mlet::EmbeddingBundle b =
        mlet::init_mlet(8, static_cast<std::size_t>(state.range(0)), 32, init);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mlet::collapse(b));
    }
}
BENCHMARK(BM_Collapse)->Arg(1000)->Arg(10000);

void BM_TrainEpoch(benchmark::State& state) {
    mlet::DatasetSpec spec;
    spec.fields = {{1000, 1.2}, {1000, 1.2}};
    spec.train_count = 20000;
    spec.val_count = 100;
    spec.test_count = 100;
    const mlet::SyntheticCtrDataset ds = mlet::generate_dataset(spec, 11);

    mlet::ModelConfig mc;
    mc.categories = {1000, 1000};
    mc.d = 8;
    mc.mode = state.range(0) == 0 ? mlet::BundleKind::SingleLayer
                                  : mlet::BundleKind::Mlet;
    mc.k = state.range(0) == 0 ? 0 : static_cast<std::size_t>(state.range(0));
    mc.dense_dim = 4;
    mlet::InitSpec init;
    init.factor_std = 0.5;
    init.seed = 12;
    mlet::TrainConfig tc;
    tc.eta = 0.2;
    tc.batch_size = 128;
    tc.seed = 13;
    for (auto _ : state) {
        state.PauseTiming();
        mlet::CtrModel model = mlet::CtrModel::init(mc, init);
        mlet::OptimizerState opt;
        state.ResumeTiming();
        benchmark::DoNotOptimize(mlet::train_epoch(model, ds, tc, opt));
    }
    state.SetItemsProcessed(state.iterations() * 20000);
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_RocAuc(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    mlet::Rng rng(21);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = rng.uniform();
        labels[i] = rng.uniform() < 0.3 ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(mlet::roc_auc(scores, labels));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RocAuc)->RangeMultiplier(4)->Range(1024, 65536)->Complexity();

void BM_QuantizeInt8(benchmark::State& state) {
    const mlet::Matrix w = random_matrix(8, static_cast<std::size_t>(state.range(0)), 31);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mlet::quantize_int8(w));
    }
}
BENCHMARK(BM_QuantizeInt8)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
