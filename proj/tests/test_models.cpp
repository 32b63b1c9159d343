#include <cmath>

#include "doctest.h"
#include "reguider/models.hpp"
#include "reguider/synth.hpp"
#include "reguider/train.hpp"
#include "testutil.hpp"

using namespace reguider;
using testutil::finite_diff;
using testutil::max_rel_err;

namespace {

std::vector<NormState> unit_norms(std::size_t batch, std::size_t channels) {
    std::vector<NormState> out(batch);
    for (NormState& n : out) {
        n.mean.assign(channels, 0.0);
        n.stddev.assign(channels, 1.0);
    }
    return out;
}

Tensor random_batch(std::size_t b, const Geometry& geo, Rng& rng) {
    return testutil::random_tensor({b, geo.channels, geo.lookback}, rng);
}

}  // namespace

TEST_CASE("encode_student shape contract for every kind and batch size") {
    Geometry geo{3, 12, 4};
    Rng rng(1);
    for (StudentKind kind : {StudentKind::two_stage_linear, StudentKind::patch_mlp}) {
        StudentForecaster m = make_student(kind, geo, 10, 4, 8, 5);
        for (std::size_t b : {1, 2, 4, 7}) {
            Tape tape;
            Tensor h = encode_student(tape, m, random_batch(b, geo, rng));
            CHECK(h.shape() == Shape{b, 10});
            Tensor pred = predict_head(tape, m, h, unit_norms(b, geo.channels));
            CHECK(pred.shape() == Shape{b, 3, 4});
        }
    }
}

TEST_CASE("two_stage_linear with zero weights embeds everything at zero") {
    Geometry geo{2, 8, 4};
    StudentForecaster m = make_student(StudentKind::two_stage_linear, geo, 6, 0, 0, 5);
    for (Param& p : m.enc_params) std::fill(p.value.values().begin(), p.value.values().end(), 0.0);
    Rng rng(2);
    Tape tape;
    Tensor h = encode_student(tape, m, random_batch(3, geo, rng));
    for (double v : h.values()) CHECK(v == 0.0);
}

TEST_CASE("predict_head with zero embedding emits the denormalized bias") {
    Geometry geo{2, 8, 3};
    StudentForecaster m = make_student(StudentKind::two_stage_linear, geo, 4, 0, 0, 5);
    for (Param& p : m.head_params) std::fill(p.value.values().begin(), p.value.values().end(), 0.0);
    // bias = channel c, step t -> 10c + t
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 3; ++t)
            m.head_params[1].value.values()[c * 3 + t] = 10.0 * c + t;

    NormState norm;
    norm.mean = {100.0, 200.0};
    norm.stddev = {2.0, 3.0};
    Tape tape;
    Tensor pred = predict_head(tape, m, Tensor({1, 4}), {&norm, 1});
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 3; ++t)
            CHECK(pred.values()[c * 3 + t] ==
                  doctest::Approx((10.0 * c + t) * norm.stddev[c] + norm.mean[c]));
}

TEST_CASE("geometry violations are reported") {
    Geometry geo{2, 8, 4};
    StudentForecaster m = make_student(StudentKind::two_stage_linear, geo, 6, 0, 0, 5);
    Tape tape;
    CHECK_THROWS_AS(encode_student(tape, m, Tensor({2, 3, 8})), DimensionError);
    CHECK_THROWS_AS(encode_student(tape, m, Tensor({2, 2, 9})), DimensionError);
    CHECK_THROWS_AS(predict_head(tape, m, Tensor({2, 7}), unit_norms(2, 2)), DimensionError);
    CHECK_THROWS_AS(predict_head(tape, m, Tensor({2, 6}), unit_norms(3, 2)), ContractError);
    CHECK_THROWS_AS(make_student(StudentKind::patch_mlp, geo, 6, 5, 8, 1), ConfigError);
}

TEST_CASE("encoder gradients match finite differences for both kinds") {
    Geometry geo{2, 8, 4};
    Rng rng(3);
    Tensor x = random_batch(3, geo, rng);
    for (StudentKind kind : {StudentKind::two_stage_linear, StudentKind::patch_mlp}) {
        StudentForecaster m = make_student(kind, geo, 6, 4, 5, 9);
        auto build = [&](Tape& tape) { return tape.sum(encode_student(tape, m, x)); };
        for (Param& p : m.enc_params) {
            p.value.zero_grad();
            Tape tape;
            tape.watch(p.value);
            tape.backward(build(tape));
            auto fd = finite_diff(
                [&] {
                    Tape t;
                    return build(t).item();
                },
                p.value);
            INFO("param: " << p.name);
            CHECK(max_rel_err(p.value.has_grad() ? p.value.grad()
                                                 : std::vector<double>(p.value.size(), 0.0),
                              fd) < 1e-4);
        }
    }
}

TEST_CASE("full pipeline gradient check on a toy geometry") {
    Geometry geo{2, 8, 4};
    Rng rng(4);
    Tensor x = random_batch(2, geo, rng);
    Tensor y = testutil::random_tensor({2, 2, 4}, rng);
    auto norms = unit_norms(2, 2);

    StudentForecaster m = make_student(StudentKind::two_stage_linear, geo, 6, 0, 0, 7);
    auto build = [&](Tape& tape) {
        Tensor h = encode_student(tape, m, x);
        Tensor pred = predict_head(tape, m, h, norms);
        return tape.scale(tape.squared_norm(tape.sub(pred, y)), 1.0 / 16.0);
    };
    for (Tensor* p : m.trainable()) {
        p->zero_grad();
        Tape tape;
        tape.watch(*p);
        tape.backward(build(tape));
        auto fd = finite_diff(
            [&] {
                Tape t;
                return build(t).item();
            },
            *p);
        CHECK(max_rel_err(p->has_grad() ? p->grad() : std::vector<double>(p->size(), 0.0), fd) <
              1e-4);
    }
}

TEST_CASE("init_params determinism, bounds, seed sensitivity") {
    Geometry geo{2, 16, 8};
    StudentForecaster a = make_student(StudentKind::patch_mlp, geo, 6, 4, 5, 42);
    StudentForecaster b = make_student(StudentKind::patch_mlp, geo, 6, 4, 5, 42);
    StudentForecaster c = make_student(StudentKind::patch_mlp, geo, 6, 4, 5, 43);

    bool identical = true, differs = false;
    for (std::size_t i = 0; i < a.enc_params.size(); ++i) {
        identical = identical && a.enc_params[i].value.values() == b.enc_params[i].value.values();
        differs = differs || a.enc_params[i].value.values() != c.enc_params[i].value.values();
    }
    CHECK(identical);
    CHECK(differs);

    // weights bounded by 1/sqrt(fan_in); biases exactly zero
    const double bound_w1 = 1.0 / std::sqrt(4.0);
    for (double v : a.enc_params[0].value.values()) CHECK(std::abs(v) <= bound_w1);
    for (double v : a.enc_params[1].value.values()) CHECK(v == 0.0);
    const double bound_head = 1.0 / std::sqrt(6.0);
    for (double v : a.head_params[0].value.values()) CHECK(std::abs(v) <= bound_head);
}

TEST_CASE("student forward is deterministic") {
    Geometry geo{2, 8, 4};
    Rng rng(5);
    Tensor x = random_batch(3, geo, rng);
    StudentForecaster m = make_student(StudentKind::patch_mlp, geo, 6, 4, 5, 11);
    Tape t1, t2;
    Tensor h1 = encode_student(t1, m, x);
    Tensor h2 = encode_student(t2, m, x);
    CHECK(h1.values() == h2.values());
}

TEST_CASE("information bottleneck: the head sees only H_f") {
    Geometry geo{2, 8, 4};
    Rng rng(6);
    StudentForecaster m = make_student(StudentKind::two_stage_linear, geo, 6, 0, 0, 3);
    Tensor x = random_batch(2, geo, rng);
    auto norms = unit_norms(2, 2);

    Tape tape;
    Tensor h = encode_student(tape, m, x);
    Tensor h_copy(h.shape(), h.values());  // detach
    Tensor before = predict_head(tape, m, h_copy, norms);
    for (double& v : x.values()) v += 100.0;  // mutate the raw input afterwards
    Tensor after = predict_head(tape, m, h_copy, norms);
    CHECK(before.values() == after.values());
}

TEST_CASE("cached teacher lookup") {
    std::map<std::uint64_t, std::vector<double>> cache;
    cache[7] = {1.0, 2.0, 3.0};
    cache[9] = {4.0, 5.0, 6.0};
    TeacherHandle t = make_cached_teacher(3, std::move(cache));

    Tape tape;
    Tensor x({2, 1, 4});
    std::vector<std::uint64_t> ids = {7, 9};
    Tensor h = encode_teacher(tape, t, x, ids);
    CHECK(h.values() == std::vector<double>{1, 2, 3, 4, 5, 6});

    std::vector<std::uint64_t> missing = {7, 8};
    CHECK_THROWS_WITH_AS(encode_teacher(tape, t, x, missing), doctest::Contains("8"),
                         ContractError);

    std::map<std::uint64_t, std::vector<double>> bad;
    bad[1] = {1.0};
    CHECK_THROWS_AS(make_cached_teacher(3, std::move(bad)), ContractError);
}

TEST_CASE("teacher stays frozen through training steps and gets zero gradients") {
    Geometry geo{2, 8, 4};
    Rng rng(7);
    TeacherHandle teacher = make_desk_teacher(geo, 5, 4, 6, 13);
    const std::uint64_t digest0 = teacher.frozen_checksum;
    CHECK(teacher_digest(teacher) == digest0);

    // watched teacher params still receive exactly zero gradient
    Tensor x = random_batch(3, geo, rng);
    std::vector<std::uint64_t> ids = {0, 1, 2};
    Tape tape;
    for (Param& p : teacher.enc_params) tape.watch(p.value);
    Tensor hg = encode_teacher(tape, teacher, x, ids);
    Tensor loss = tape.squared_norm(hg);
    tape.backward(loss);
    for (const Param& p : teacher.enc_params) {
        if (p.value.has_grad())
            for (double g : p.value.grad()) CHECK(g == 0.0);
    }
    CHECK(teacher_digest(teacher) == digest0);

    // a real training run: 20 steps with lambda > 0
    StudentForecaster student = make_student(StudentKind::two_stage_linear, geo, 6, 0, 0, 17);
    AlignmentConfig align;
    align.lambda = 0.5;
    align.projector = make_projector(6, 5, 19);
    auto params = student.trainable();
    params.push_back(&align.projector.weight);
    params.push_back(&align.projector.bias);
    Adam opt(1e-3, params);
    TrainConfig cfg;

    MultivariateSeries series = generate_synth([] {
        SynthSpec s;
        s.channels = 2;
        s.length = 120;
        s.seed = 3;
        return s;
    }());
    auto raw = make_windows(series, geo.lookback, geo.horizon, 1);
    std::vector<WindowPair> norm;
    std::vector<NormState> stats;
    for (const WindowPair& w : raw) {
        auto [nw, ns] = instance_normalize(w);
        norm.push_back(nw);
        stats.push_back(ns);
    }
    std::vector<std::size_t> idx = {0, 1, 2, 3};
    Batch batch = assemble_batch(raw, norm, stats, idx);
    for (int step = 0; step < 20; ++step) train_step(student, &teacher, align, batch, opt, cfg);
    CHECK(teacher_digest(teacher) == digest0);
}

TEST_CASE("pretrain_teacher beats the climatological zero predictor on a sinusoid") {
    SynthSpec spec;
    spec.channels = 1;
    spec.length = 2000;
    spec.periods = {48.0};
    spec.noise_std = 0.0;
    spec.seed = 21;
    MultivariateSeries series = generate_synth(spec);

    TeacherPretrainConfig cfg;
    cfg.lookback = 96;
    cfg.horizon = 96;
    cfg.stride = 4;
    cfg.d_g = 32;
    cfg.patch_len = 16;
    cfg.hidden = 32;
    cfg.epochs = 12;
    cfg.batch_size = 32;
    cfg.seed = 5;

    RunRecord record;
    TeacherHandle teacher = pretrain_teacher(series, cfg, &record);
    CHECK(teacher.kind == TeacherKind::desk);
    CHECK(teacher.d_g == 32);
    CHECK(teacher.frozen_checksum == teacher_digest(teacher));
    REQUIRE(!record.epochs.empty());

    // climatological baseline: predict the per-window mean (z = 0 after
    // instance normalization), independently recomputed
    SplitSeries split = chronological_split(series, cfg.split, cfg.lookback);
    auto val_windows = make_windows(split.val, cfg.lookback, cfg.horizon, cfg.stride);
    double zero_se = 0.0;
    std::size_t n = 0;
    for (const WindowPair& w : val_windows) {
        auto [nw, norm] = instance_normalize(w);
        for (std::size_t c = 0; c < w.channels; ++c)
            for (std::size_t t = 0; t < w.horizon; ++t) {
                const double e = norm.mean[c] - w.y[c * w.horizon + t];
                zero_se += e * e;
                ++n;
            }
    }
    const double zero_mse = zero_se / static_cast<double>(n);
    double best_val = record.epochs[0].val_mse;
    for (const EpochStats& e : record.epochs) best_val = std::min(best_val, e.val_mse);
    CHECK(best_val < zero_mse);
}

TEST_CASE("pretrain_teacher determinism and zero-epoch boundary") {
    SynthSpec spec;
    spec.channels = 1;
    spec.length = 400;
    spec.seed = 9;
    MultivariateSeries series = generate_synth(spec);

    TeacherPretrainConfig cfg;
    cfg.lookback = 16;
    cfg.horizon = 8;
    cfg.d_g = 8;
    cfg.patch_len = 4;
    cfg.hidden = 8;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 31;

    TeacherHandle a = pretrain_teacher(series, cfg);
    TeacherHandle b = pretrain_teacher(series, cfg);
    CHECK(a.frozen_checksum == b.frozen_checksum);

    cfg.epochs = 0;  // frozen random teacher is still a valid teacher
    TeacherHandle c = pretrain_teacher(series, cfg);
    CHECK(c.frozen_checksum == teacher_digest(c));
    Tape tape;
    Rng rng(8);
    Tensor x = testutil::random_tensor({2, 1, 16}, rng);
    std::vector<std::uint64_t> ids = {0, 1};
    CHECK(encode_teacher(tape, c, x, ids).shape() == Shape{2, 8});
}
