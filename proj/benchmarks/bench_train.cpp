#include <benchmark/benchmark.h>

#include "reguider/align.hpp"
#include "reguider/models.hpp"
#include "reguider/synth.hpp"
#include "reguider/train.hpp"

using namespace reguider;

namespace {

struct Fixture {
    Geometry geo{2, 96, 96};
    std::vector<WindowPair> raw, norm;
    std::vector<NormState> stats;
    std::vector<std::size_t> idx;
    StudentForecaster student;
    TeacherHandle teacher;

    Fixture()
        : student(make_student(StudentKind::two_stage_linear, geo, 64, 0, 0, 1)),
          teacher(make_desk_teacher(geo, 64, 16, 64, 2)) {
        SynthSpec spec;
        spec.length = 800;
        spec.seed = 42;
        auto series = generate_synth(spec);
        raw = make_windows(series, geo.lookback, geo.horizon, 8);
        for (const WindowPair& w : raw) {
            auto [nw, ns] = instance_normalize(w);
            norm.push_back(nw);
            stats.push_back(ns);
        }
        for (std::size_t i = 0; i < 32 && i < raw.size(); ++i) idx.push_back(i);
    }
};

void BM_train_step_base(benchmark::State& state) {
    Fixture f;
    Batch b = assemble_batch(f.raw, f.norm, f.stats, f.idx);
    TrainConfig cfg;
    AlignmentConfig align;
    Adam opt(1e-3, f.student.trainable());
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_step(f.student, nullptr, align, b, opt, cfg));
    }
}
BENCHMARK(BM_train_step_base);

void BM_train_step_reguider(benchmark::State& state) {
    Fixture f;
    Batch b = assemble_batch(f.raw, f.norm, f.stats, f.idx);
    TrainConfig cfg;
    AlignmentConfig align;
    align.metric = static_cast<AlignMetric>(state.range(0));
    align.lambda = 0.5;
    align.projector = make_projector(64, 64, 3);
    auto params = f.student.trainable();
    params.push_back(&align.projector.weight);
    params.push_back(&align.projector.bias);
    Adam opt(1e-3, params);
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_step(f.student, &f.teacher, align, b, opt, cfg));
    }
}
BENCHMARK(BM_train_step_reguider)->Arg(0)->Arg(1)->Arg(2);

// inference never touches the teacher; this is the deployment-cost path
void BM_evaluate(benchmark::State& state) {
    Fixture f;
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate(f.student, f.raw));
    }
}
BENCHMARK(BM_evaluate);

}  // namespace
