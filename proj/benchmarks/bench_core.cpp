#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "sepvae/distributions.hpp"
#include "sepvae/data.hpp"
#include "sepvae/train.hpp"

namespace {

void BM_KlClosedForm(benchmark::State& state) {
    torch::manual_seed(0);
    const int64_t b = state.range(0);
    sepvae::DiagGaussian g(torch::randn({b, 16}), torch::randn({b, 16}) * 0.1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sepvae::kl_to_standard_normal(g));
    }
    state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(BM_KlClosedForm)->Arg(128)->Arg(1024);

void BM_EncoderForward(benchmark::State& state) {
    torch::manual_seed(0);
    auto cfg = sepvae::ModelConfig::small_synthetic();
    sepvae::SepVaeModel model(cfg);
    auto x = torch::rand({state.range(0), 1, 32, 32});
    torch::NoGradGuard no_grad;
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.encode_common(x).mean);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForward)->Arg(32)->Arg(128);

void BM_TrainStep(benchmark::State& state) {
    torch::manual_seed(0);
    sepvae::TrainConfig cfg;
    cfg.model = sepvae::ModelConfig::small_synthetic();
    cfg.batch_size = state.range(0);
    sepvae::SepVaeModel model(cfg.model);
    torch::optim::Adam main_opt(model.main_parameters(),
                                torch::optim::AdamOptions(cfg.lr_main));
    torch::optim::Adam disc_opt(model.discriminator_parameters(),
                                torch::optim::AdamOptions(cfg.lr_discriminator));
    auto x = torch::rand({cfg.batch_size, 1, 32, 32});
    auto y = torch::cat({torch::zeros({cfg.batch_size / 2}, torch::kInt64),
                         torch::ones({cfg.batch_size - cfg.batch_size / 2}, torch::kInt64)});
    uint64_t shuffle_seed = 1;
    for (auto _ : state) {
        sepvae::train_step(x, y, model, main_opt, disc_opt, cfg, shuffle_seed++);
    }
    state.SetItemsProcessed(state.iterations() * cfg.batch_size);
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SyntheticGeneration(benchmark::State& state) {
    sepvae::DataGenConfig cfg;
    cfg.n_background = state.range(0);
    cfg.n_target = state.range(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sepvae::generate_synthetic(cfg));
    }
    state.SetItemsProcessed(state.iterations() * 2 * state.range(0));
}
BENCHMARK(BM_SyntheticGeneration)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
