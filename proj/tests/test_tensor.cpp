#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>

#include "c2f/ops.hpp"
#include "c2f/tape.hpp"
#include "c2f/tensor.hpp"
#include "doctest.h"

using namespace c2f;

TEST_CASE("shape basics") {
    Shape s{2, 3, 4, 5};
    CHECK(s.numel() == 120);
    CHECK(s.nd == 4);
    CHECK(s.str() == "[2,3,4,5]");
    CHECK(Shape{7}.numel() == 7);
    CHECK_THROWS_AS(Shape({1, 2, 3, 4, 5}), DimensionError);
    CHECK_THROWS_AS(Shape({0, 2}), DimensionError);
}

TEST_CASE("tensor storage is shared across copies") {
    Tensor<float> a = Tensor<float>::zeros({2, 2});
    Tensor<float> b = a;
    a.data()[3] = 5.0f;
    CHECK(b.data()[3] == 5.0f);
    b.set_requires_grad(true);
    CHECK(a.requires_grad());
    a.ensure_grad()[0] = 1.0f;
    CHECK(b.grad_ptr()[0] == 1.0f);
}

TEST_CASE("reshape views share values and gradients") {
    Tensor<double> a = Tensor<double>::ones({2, 6});
    Tensor<double> v = a.reshaped({3, 4});
    CHECK(v.shape() == Shape{3, 4});
    v.data()[0] = 9.0;
    CHECK(a.data()[0] == 9.0);
    CHECK_THROWS_AS(a.reshaped({5, 5}), DimensionError);
}

TEST_CASE("rng integer and uniform streams are pinned") {
    // Golden values freeze the documented generator (xoshiro256++ seeded via
    // splitmix64); any algorithm drift breaks cross-platform replays.
    Rng r(12345);
    const std::uint64_t a = r.next_u64();
    const std::uint64_t b = r.next_u64();
    Rng r2(12345);
    CHECK(a == r2.next_u64());
    CHECK(b == r2.next_u64());
    CHECK(a != b);
    Rng r3(12346);
    CHECK(a != r3.next_u64());

    Rng u(99);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
    Rng t(5);
    for (int i = 0; i < 1000; ++i) {
        const double v = t.truncated_normal(0.02);
        CHECK(std::abs(v) <= 0.04);
    }
}

TEST_CASE("rng forks are independent streams") {
    Rng base(7);
    Rng f1 = base.fork(1);
    Rng f2 = base.fork(2);
    CHECK(f1.next_u64() != f2.next_u64());
}

TEST_CASE("backward requires a scalar loss") {
    Tensor<double> a = Tensor<double>::ones({2, 2});
    a.set_requires_grad(true);
    Tape<double> tape;
    Tensor<double> y = scale(&tape, a, 2.0);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("a tape is single use") {
    Tensor<double> a = Tensor<double>::ones({3});
    a.set_requires_grad(true);
    Tape<double> tape;
    Tensor<double> loss = sum_all(&tape, a);
    tape.backward(loss);
    Tensor<double> loss2 = sum_all<double>(nullptr, a);
    CHECK_THROWS_AS(tape.backward(loss2), ContractError);
}

TEST_CASE("empty tape backward yields zero gradients") {
    Tensor<double> leaf = Tensor<double>::ones({4});
    leaf.set_requires_grad(true);
    leaf.ensure_grad();
    Tensor<double> loss = Tensor<double>::ones({1});
    Tape<double> tape;
    tape.backward(loss);
    for (int i = 0; i < 4; ++i) CHECK(leaf.grad_ptr()[i] == 0.0);
}

TEST_CASE("gradients accumulate across tapes and reset on zero_grad") {
    Rng rng(3);
    Tensor<double> a = Tensor<double>::randn({5}, rng);
    a.set_requires_grad(true);

    for (int pass = 0; pass < 2; ++pass) {
        Tape<double> tape;
        Tensor<double> loss = sum_all(&tape, hadamard(&tape, a, a));
        tape.backward(loss);
    }
    for (int i = 0; i < 5; ++i) {
        CHECK(a.grad_ptr()[i] == doctest::Approx(4.0 * a.data()[i]).epsilon(1e-12));
    }
    a.zero_grad();
    for (int i = 0; i < 5; ++i) CHECK(a.grad_ptr()[i] == 0.0);
}

TEST_CASE("ops are bitwise deterministic across repeated runs") {
    Rng rng(11);
    Tensor<float> a = Tensor<float>::randn({17, 13}, rng);
    Tensor<float> b = Tensor<float>::randn({13, 9}, rng);
    Tensor<float> y1 = matmul<float>(nullptr, a, b);
    Tensor<float> y2 = matmul<float>(nullptr, a, b);
    CHECK(std::memcmp(y1.data(), y2.data(), sizeof(float) * y1.numel()) == 0);
    Tensor<float> s1 = softmax_rows<float>(nullptr, a);
    Tensor<float> s2 = softmax_rows<float>(nullptr, a);
    CHECK(std::memcmp(s1.data(), s2.data(), sizeof(float) * s1.numel()) == 0);
}

TEST_CASE("all_finite detects poisoned values") {
    Tensor<float> a = Tensor<float>::ones({3});
    CHECK(a.all_finite());
    a.data()[1] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(a.all_finite());
}
