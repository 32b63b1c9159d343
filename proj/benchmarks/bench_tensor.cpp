#include <benchmark/benchmark.h>

#include "reguider/rng.hpp"
#include "reguider/tensor.hpp"

using namespace reguider;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_matmul_forward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Tensor a = random_tensor({n, n}, 1);
    Tensor b = random_tensor({n, n}, 2);
    for (auto _ : state) {
        Tape tape;
        benchmark::DoNotOptimize(tape.matmul(a, b));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_matmul_forward)->Arg(32)->Arg(64)->Arg(128);

void BM_matmul_train_cycle(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Tensor a = random_tensor({n, n}, 3);
    Tensor b = random_tensor({n, n}, 4);
    for (auto _ : state) {
        a.zero_grad();
        b.zero_grad();
        Tape tape;
        tape.watch(a);
        tape.watch(b);
        Tensor loss = tape.squared_norm(tape.matmul(a, b));
        tape.backward(loss);
        benchmark::DoNotOptimize(a.grad().data());
    }
}
BENCHMARK(BM_matmul_train_cycle)->Arg(32)->Arg(64);

void BM_softmax(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Tensor x = random_tensor({n}, 5);
    for (auto _ : state) {
        Tape tape;
        benchmark::DoNotOptimize(tape.softmax(x));
    }
}
BENCHMARK(BM_softmax)->Arg(64)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
