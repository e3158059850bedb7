// Forward/backward cost at the default experiment dimensions, with and
// without the denoising part.
#include <benchmark/benchmark.h>

#include "setdet/config.hpp"
#include "setdet/harness.hpp"

namespace {

using namespace setdet;

struct Fixture {
    TrainConfig cfg;
    Scene scene;
    ModelParams params;

    explicit Fixture(int dn_groups) {
        cfg.dn_groups = dn_groups;
        cfg.n_train = 1;
        scene = generate_scene(cfg.dataset(), 0);
        params = ModelParams::init(cfg.model(), 1);
    }
};

void run_step(Fixture& f, bool backward) {
    Rng rng(42);
    const auto groups =
        make_denoising_groups(f.scene.objects, f.cfg.dn_groups, f.cfg.noise(), f.cfg.classes, rng);
    const QueryBatch batch =
        assemble_decoder_input(groups, f.scene.objects, f.cfg.num_queries, f.cfg.classes);
    AttentionMask mask;
    const AttentionMask* mask_ptr = nullptr;
    if (batch.denoising_count() > 0) {
        mask = build_attention_mask(batch.groups, batch.gts_per_group, batch.matching_count);
        mask_ptr = &mask;
    }
    Tape tape;
    const DecoderOutput out =
        model_forward(tape, f.params, f.scene.features, batch, mask_ptr, ForwardMode::kTrain);
    const int loss = total_loss_node(tape, out, batch, f.cfg.loss(), nullptr);
    if (backward) {
        f.params.zero_grads();
        tape.backward(loss);
    }
    benchmark::DoNotOptimize(tape.value(loss).d[0]);
}

void BM_ForwardBaseline(benchmark::State& state) {
    Fixture f(0);
    for (auto _ : state) run_step(f, false);
}

void BM_ForwardDenoising(benchmark::State& state) {
    Fixture f(5);
    for (auto _ : state) run_step(f, false);
}

void BM_TrainStepBaseline(benchmark::State& state) {
    Fixture f(0);
    for (auto _ : state) run_step(f, true);
}

void BM_TrainStepDenoising(benchmark::State& state) {
    Fixture f(5);
    for (auto _ : state) run_step(f, true);
}

}  // namespace

BENCHMARK(BM_ForwardBaseline);
BENCHMARK(BM_ForwardDenoising);
BENCHMARK(BM_TrainStepBaseline);
BENCHMARK(BM_TrainStepDenoising);

BENCHMARK_MAIN();
