#include <cmath>
#include <cstring>

#include "doctest.h"
#include "reguider/tensor.hpp"
#include "testutil.hpp"

using namespace reguider;
using testutil::finite_diff;
using testutil::max_rel_err;

namespace {

double sum_values(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v;
    return s;
}

}  // namespace

TEST_CASE("tensor construction enforces shape/value consistency") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
    CHECK_THROWS_AS(Tensor({0, 3}), DimensionError);
    CHECK(Tensor::scalar(4.0).item() == 4.0);
}

TEST_CASE("matmul forward matches identity and scalar oracle") {
    Tape tape;
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor b({2, 2}, {5, 6, 7, 8});
    Tensor out = tape.matmul(eye, b);
    CHECK(out.values() == std::vector<double>{5, 6, 7, 8});

    // [[1,2]] x [[3],[4]] via independent scalar arithmetic: 1*3 + 2*4
    Tensor a2({1, 2}, {1, 2});
    Tensor b2({2, 1}, {3, 4});
    CHECK(tape.matmul(a2, b2).item() == 1.0 * 3 + 2.0 * 4);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tape tape;
    Tensor a({2, 3});
    Tensor b({2, 3});
    CHECK_THROWS_WITH_AS(tape.matmul(a, b), doctest::Contains("[2x3]"), DimensionError);
}

TEST_CASE("matmul backward matches central finite differences") {
    Tensor a({1, 2}, {1, 2});
    Tensor b({2, 1}, {3, 4});
    {
        Tape tape;
        tape.watch(a);
        Tensor loss = tape.sum(tape.matmul(a, b));
        tape.backward(loss);
    }
    auto fd = finite_diff(
        [&] {
            Tape t;
            return t.sum(t.matmul(a, b)).item();
        },
        a);
    CHECK(a.grad()[0] == doctest::Approx(3.0));
    CHECK(a.grad()[1] == doctest::Approx(4.0));
    CHECK(max_rel_err(a.grad(), fd) < 1e-4);
}

TEST_CASE("softmax examples") {
    Tape tape;
    Tensor z({2}, {0.0, 0.0});
    Tensor s = tape.softmax(z);
    CHECK(s.values()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.values()[1] == doctest::Approx(0.5).epsilon(1e-15));

    Tensor z2({2}, {0.0, std::log(3.0)});
    Tensor s2 = tape.softmax(z2);
    CHECK(s2.values()[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s2.values()[1] == doctest::Approx(0.75).epsilon(1e-12));

    // large logits must not overflow thanks to max subtraction
    Tensor big({2}, {1000.0, 1000.0});
    Tensor sb = tape.softmax(big);
    CHECK(sb.values()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::isfinite(sb.values()[1]));

    CHECK_THROWS_AS(tape.softmax(Tensor({2, 2})), DimensionError);
}

TEST_CASE("softmax sums to one and is shift invariant") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t d = 1 + rng.bounded(16);
        Tensor x = testutil::random_tensor({d}, rng, -30.0, 30.0);
        Tape tape;
        Tensor y = tape.softmax(x);
        CHECK(std::abs(sum_values(y) - 1.0) <= 1e-12);

        Tensor shifted = x;
        const double c = rng.uniform(-50.0, 50.0);
        for (double& v : shifted.values()) v += c;
        Tensor y2 = tape.softmax(shifted);
        for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(y.values()[i] - y2.values()[i]) < 1e-12);
    }
}

TEST_CASE("stop_gradient forward is bit-identical and blocks backward") {
    Rng rng(11);
    Tensor x = testutil::random_tensor({5}, rng);
    Tape tape;
    tape.watch(x);
    Tensor sg = tape.stop_gradient(x);
    CHECK(std::memcmp(sg.values().data(), x.values().data(), x.size() * sizeof(double)) == 0);

    // sum(x * sp(x)) at x = 2: derivative treats sp(x) as a constant -> 2
    Tensor x1({1}, {2.0});
    Tape t2;
    t2.watch(x1);
    Tensor loss = t2.sum(t2.mul(x1, t2.stop_gradient(x1)));
    t2.backward(loss);
    CHECK(x1.grad()[0] == 2.0);
}

TEST_CASE("loss built purely from stop_gradient leaves watched params at zero grad") {
    Tensor phi({3}, {1.0, -2.0, 0.5});
    Tape tape;
    tape.watch(phi);
    Tensor out = tape.stop_gradient(tape.relu(tape.scale(phi, 3.0)));
    Tensor loss = tape.squared_norm(out);
    tape.backward(loss);
    CHECK_FALSE(phi.has_grad());  // grad never touched => frozen stays frozen
}

TEST_CASE("backward basics: x^2, mean fan-out, contract errors") {
    Tensor x({1}, {3.0});
    {
        Tape tape;
        tape.watch(x);
        Tensor loss = tape.mul(x, x);
        tape.backward(loss);
        CHECK(x.grad()[0] == 6.0);
    }

    // mean([x, 2x]) at x=1 -> 1.5 via concat fan-out
    Tensor x2({1}, {1.0});
    {
        Tape tape;
        tape.watch(x2);
        Tensor loss = tape.mean_all(tape.concat({x2, tape.scale(x2, 2.0)}, 0));
        tape.backward(loss);
        CHECK(x2.grad()[0] == 1.5);
    }

    Tape tape;
    Tensor y({2}, {1.0, 2.0});
    tape.watch(y);
    CHECK_THROWS_AS(tape.backward(y), ContractError);          // non-scalar
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), ContractError);  // detached
}

TEST_CASE("frozen tensors never acquire gradients") {
    Tensor frozen({2}, {1.0, 2.0});
    Tensor w({2}, {3.0, 4.0});
    Tape tape;
    tape.watch(w);
    Tensor loss = tape.sum(tape.mul(w, frozen));
    tape.backward(loss);
    CHECK_FALSE(frozen.has_grad());
    CHECK(w.grad() == std::vector<double>{1.0, 2.0});
}

TEST_CASE("two backward passes accumulate to exactly twice the gradient") {
    Rng rng(13);
    Tensor w = testutil::random_tensor({4}, rng);
    Tape tape;
    tape.watch(w);
    Tensor loss = tape.squared_norm(tape.relu(w));
    tape.backward(loss);
    const std::vector<double> once = w.grad();
    tape.backward(loss);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad()[i] == 2.0 * once[i]);

    w.zero_grad();
    tape.backward(loss);
    CHECK(w.grad() == once);
}

TEST_CASE("gradient check across every differentiable op") {
    Rng rng(20240901);
    const double tol = 1e-4;

    auto check_unary = [&](const char* name, auto make_loss, Tensor x) {
        Tape tape;
        x.zero_grad();
        tape.watch(x);
        Tensor loss = make_loss(tape, x);
        tape.backward(loss);
        auto fd = finite_diff([&] {
            Tape t;
            return make_loss(t, x).item();
        }, x);
        INFO("op: " << name);
        CHECK(max_rel_err(x.grad(), fd) < tol);
    };

    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = testutil::random_tensor({3, 4}, rng);
        Tensor v = testutil::random_tensor({7}, rng);

        check_unary("scale", [](Tape& t, const Tensor& a) { return t.sum(t.scale(a, -1.7)); }, x);
        check_unary("sum", [](Tape& t, const Tensor& a) { return t.sum(a); }, x);
        check_unary("mean_all", [](Tape& t, const Tensor& a) { return t.mean_all(a); }, x);
        check_unary("squared_norm", [](Tape& t, const Tensor& a) { return t.squared_norm(a); }, x);
        check_unary("reshape",
                    [](Tape& t, const Tensor& a) { return t.squared_norm(t.reshape(a, {12})); }, x);
        check_unary("transpose",
                    [](Tape& t, const Tensor& a) { return t.squared_norm(t.transpose(a)); }, x);
        check_unary("slice_rows",
                    [](Tape& t, const Tensor& a) { return t.squared_norm(t.slice_rows(a, 1, 3)); },
                    x);
        check_unary("row", [](Tape& t, const Tensor& a) { return t.squared_norm(t.row(a, 2)); },
                    x);
        check_unary("softmax",
                    [](Tape& t, const Tensor& a) {
                        return t.squared_norm(t.softmax(a));
                    },
                    testutil::random_tensor({6}, rng));
        check_unary("norm", [](Tape& t, const Tensor& a) { return t.norm(a); },
                    testutil::random_tensor_away_from({5}, rng, 0.3));
        check_unary("log_guarded",
                    [](Tape& t, const Tensor& a) { return t.sum(t.log_guarded(a)); },
                    testutil::random_tensor({5}, rng, 0.1, 2.0));
        check_unary("relu", [](Tape& t, const Tensor& a) { return t.sum(t.relu(a)); },
                    testutil::random_tensor_away_from({9}, rng, 0.05));

        for (std::size_t axis = 0; axis < 3; ++axis)
            check_unary("mean_axis",
                        [axis](Tape& t, const Tensor& a) {
                            return t.squared_norm(t.mean_axis(a, axis));
                        },
                        testutil::random_tensor({2, 3, 4}, rng));

        // binary ops: check both arguments
        Tensor a = testutil::random_tensor({3, 4}, rng);
        Tensor b = testutil::random_tensor_away_from({3, 4}, rng, 0.15);
        auto check_pairwise = [&](const char* name, auto make_loss) {
            Tape tape;
            a.zero_grad();
            b.zero_grad();
            tape.watch(a);
            tape.watch(b);
            Tensor loss = make_loss(tape, a, b);
            tape.backward(loss);
            auto eval = [&] {
                Tape t;
                return make_loss(t, a, b).item();
            };
            INFO("op: " << name);
            CHECK(max_rel_err(a.grad(), finite_diff(eval, a)) < tol);
            CHECK(max_rel_err(b.grad(), finite_diff(eval, b)) < tol);
        };
        check_pairwise("add", [](Tape& t, const Tensor& l, const Tensor& r) {
            return t.squared_norm(t.add(l, r));
        });
        check_pairwise("sub", [](Tape& t, const Tensor& l, const Tensor& r) {
            return t.squared_norm(t.sub(l, r));
        });
        check_pairwise("mul", [](Tape& t, const Tensor& l, const Tensor& r) {
            return t.squared_norm(t.mul(l, r));
        });
        check_pairwise("div", [](Tape& t, const Tensor& l, const Tensor& r) {
            return t.squared_norm(t.div(l, r));
        });
        check_pairwise("concat", [](Tape& t, const Tensor& l, const Tensor& r) {
            return t.squared_norm(t.concat({l, r}, 1));
        });

        Tensor ma = testutil::random_tensor({3, 5}, rng);
        Tensor mb = testutil::random_tensor({5, 2}, rng);
        {
            Tape tape;
            ma.zero_grad();
            mb.zero_grad();
            tape.watch(ma);
            tape.watch(mb);
            tape.backward(tape.squared_norm(tape.matmul(ma, mb)));
            auto eval = [&] {
                Tape t;
                return t.squared_norm(t.matmul(ma, mb)).item();
            };
            CHECK(max_rel_err(ma.grad(), finite_diff(eval, ma)) < tol);
            CHECK(max_rel_err(mb.grad(), finite_diff(eval, mb)) < tol);
        }

        Tensor rows = testutil::random_tensor({4, 3}, rng);
        Tensor bias = testutil::random_tensor({3}, rng);
        {
            Tape tape;
            rows.zero_grad();
            bias.zero_grad();
            tape.watch(rows);
            tape.watch(bias);
            tape.backward(tape.squared_norm(tape.add_rowwise(rows, bias)));
            auto eval = [&] {
                Tape t;
                return t.squared_norm(t.add_rowwise(rows, bias)).item();
            };
            CHECK(max_rel_err(rows.grad(), finite_diff(eval, rows)) < tol);
            CHECK(max_rel_err(bias.grad(), finite_diff(eval, bias)) < tol);
        }
    }
}

TEST_CASE("elementwise shape mismatches raise dimension errors") {
    Tape tape;
    Tensor a({2, 2});
    Tensor b({4});
    CHECK_THROWS_AS(tape.add(a, b), DimensionError);
    CHECK_THROWS_AS(tape.sub(a, b), DimensionError);
    CHECK_THROWS_AS(tape.add_rowwise(a, Tensor({3})), DimensionError);
    CHECK_THROWS_AS(tape.reshape(a, {5}), DimensionError);
    CHECK_THROWS_AS(tape.slice_rows(a, 1, 5), DimensionError);
}

TEST_CASE("division and log guards keep forward values finite") {
    Tape tape;
    Tensor num({3}, {1.0, -1.0, 0.0});
    Tensor den({3}, {0.0, 1e-30, -1e-30});
    Tensor q = tape.div(num, den);
    for (double v : q.values()) CHECK(std::isfinite(v));

    Tensor neg({3}, {-5.0, 0.0, 3.0});
    Tensor lg = tape.log_guarded(neg);
    for (double v : lg.values()) CHECK(std::isfinite(v));
    CHECK(lg.values()[2] == doctest::Approx(std::log(3.0)));
}

TEST_CASE("ops on detached inputs stay off the tape") {
    Tape tape;
    Tensor a({2}, {1.0, 2.0});
    Tensor b({2}, {3.0, 4.0});
    Tensor c = tape.mul(a, b);
    CHECK_FALSE(c.attached());
    CHECK(tape.node_count() == 0);

    tape.watch(a);
    Tensor d = tape.mul(a, b);
    CHECK(d.attached());
}
