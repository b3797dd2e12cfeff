#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "c2f/gradcheck.hpp"
#include "c2f/ops.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace c2f;

namespace {

Tensor<double> from(std::initializer_list<std::int64_t> shape, std::vector<double> v) {
    return Tensor<double>::from_data(Shape(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
    Rng rng(1);
    Tensor<double> eye = from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor<double> m = Tensor<double>::randn({3, 3}, rng);
    Tensor<double> out = matmul<double>(nullptr, eye, m);
    for (int i = 0; i < 9; ++i) CHECK(out.data()[i] == doctest::Approx(m.data()[i]));

    Tensor<double> a = from({2, 2}, {1, 2, 3, 4});
    Tensor<double> b = from({2, 1}, {1, 1});
    Tensor<double> y = matmul<double>(nullptr, a, b);
    CHECK(y.data()[0] == doctest::Approx(3.0));
    CHECK(y.data()[1] == doctest::Approx(7.0));
}

TEST_CASE("matmul against the triple-loop oracle") {
    Rng rng(2);
    Tensor<double> a = Tensor<double>::randn({5, 7}, rng);
    Tensor<double> b = Tensor<double>::randn({7, 3}, rng);
    Tensor<double> y = matmul<double>(nullptr, a, b);
    const auto ref = oracle::matmul(a.values(), b.values(), 5, 7, 3);
    for (int i = 0; i < 15; ++i) {
        CHECK(y.data()[i] ==
              doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-6));
    }
    CHECK_THROWS_AS(matmul<double>(nullptr, a, a), DimensionError);
}

TEST_CASE("hadamard identities and exact oracle match") {
    Rng rng(3);
    Tensor<double> a = Tensor<double>::randn({2, 3, 2, 2}, rng);
    Tensor<double> ones = Tensor<double>::ones(a.shape());
    Tensor<double> zeros = Tensor<double>::zeros(a.shape());
    Tensor<double> h1 = hadamard<double>(nullptr, a, ones);
    Tensor<double> h0 = hadamard<double>(nullptr, a, zeros);
    for (int i = 0; i < a.numel(); ++i) {
        CHECK(h1.data()[i] == a.data()[i]);
        CHECK(h0.data()[i] == 0.0);
    }
    Tensor<double> b = Tensor<double>::randn(a.shape(), rng);
    Tensor<double> hb = hadamard<double>(nullptr, a, b);
    for (int i = 0; i < a.numel(); ++i) CHECK(hb.data()[i] == a.data()[i] * b.data()[i]);
    Tensor<double> small = Tensor<double>::ones({2, 2});
    CHECK_THROWS_AS(hadamard<double>(nullptr, a, small), DimensionError);
}

TEST_CASE("add, transpose, scale basics") {
    Rng rng(4);
    Tensor<double> a = Tensor<double>::randn({3, 4}, rng);
    Tensor<double> z = Tensor<double>::zeros({3, 4});
    Tensor<double> sum = add<double>(nullptr, a, z);
    for (int i = 0; i < 12; ++i) CHECK(sum.data()[i] == a.data()[i]);

    Tensor<double> tt = transpose<double>(nullptr, transpose<double>(nullptr, a));
    for (int i = 0; i < 12; ++i) CHECK(tt.data()[i] == a.data()[i]);

    Tensor<double> s1 = scale<double>(nullptr, a, 1.0);
    for (int i = 0; i < 12; ++i) CHECK(s1.data()[i] == a.data()[i]);
}

TEST_CASE("softmax rows: singleton, uniform, shift invariance, row sums") {
    Tensor<double> one = from({1, 1}, {3.7});
    CHECK(softmax_rows<double>(nullptr, one).data()[0] == doctest::Approx(1.0));

    Tensor<double> z = from({1, 3}, {0, 0, 0});
    Tensor<double> u = softmax_rows<double>(nullptr, z);
    for (int i = 0; i < 3; ++i) CHECK(u.data()[i] == doctest::Approx(1.0 / 3.0));

    Rng rng(5);
    Tensor<double> a = Tensor<double>::randn({6, 9}, rng);
    Tensor<double> sa = softmax_rows<double>(nullptr, a);
    Tensor<double> shifted = a.clone();
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 9; ++j) shifted.data()[i * 9 + j] += 13.5;
    Tensor<double> sb = softmax_rows<double>(nullptr, shifted);
    for (int i = 0; i < 54; ++i) CHECK(sa.data()[i] == doctest::Approx(sb.data()[i]).epsilon(1e-6));

    const auto ref = oracle::softmax_rows(a.values(), 6, 9);
    for (int i = 0; i < 54; ++i) {
        CHECK(sa.data()[i] == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }
    for (int i = 0; i < 6; ++i) {
        double row = 0;
        for (int j = 0; j < 9; ++j) row += sa.data()[i * 9 + j];
        CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("backward: sum gives ones, quadratic gives 2a") {
    Rng rng(6);
    Tensor<double> a = Tensor<double>::randn({3, 5}, rng);
    a.set_requires_grad(true);
    {
        Tape<double> tape;
        Tensor<double> loss = sum_all(&tape, a);
        tape.backward(loss);
        for (int i = 0; i < 15; ++i) CHECK(a.grad_ptr()[i] == doctest::Approx(1.0));
    }
    a.zero_grad();
    {
        Tape<double> tape;
        Tensor<double> loss = sum_all(&tape, hadamard(&tape, a, a));
        tape.backward(loss);
        for (int i = 0; i < 15; ++i) {
            CHECK(a.grad_ptr()[i] == doctest::Approx(2.0 * a.data()[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("backward: composite graph matches finite differences (f64)") {
    Rng rng(7);
    Tensor<double> a = Tensor<double>::randn({4, 4}, rng);
    Tensor<double> b = Tensor<double>::randn({4, 4}, rng);
    Tensor<double> proj = Tensor<double>::randn({4, 4}, rng, 1e-4);
    const double err = gradcheck<double>(
        [&](Tape<double>* t) {
            Tensor<double> m = matmul(t, a, b);
            Tensor<double> s = softmax_rows(t, add(t, m, hadamard(t, a, b)));
            return projected_loss(t, s, proj);
        },
        {a, b});
    CHECK(err < 1e-6);
}

TEST_CASE("composite graph f32 finite differences within 1e-3") {
    Rng rng(8);
    Tensor<float> a = Tensor<float>::randn({3, 3}, rng);
    Tensor<float> proj = Tensor<float>::randn({3, 3}, rng, 0.1f);
    const double err = gradcheck<float>(
        [&](Tape<float>* t) {
            return projected_loss(t, gelu(t, matmul(t, a, transpose(t, a))), proj);
        },
        {a});
    CHECK(err < 1e-3);
}

TEST_CASE("gradcheck: exact for linear maps") {
    Rng rng(9);
    Tensor<double> a = Tensor<double>::randn({4, 6}, rng);
    Tensor<double> proj = Tensor<double>::randn({4, 6}, rng, 1e-3);
    const double err = gradcheck<double>(
        [&](Tape<double>* t) { return projected_loss(t, scale(t, a, 2.5), proj); }, {a});
    CHECK(err < 1e-7);
}

TEST_CASE("gradcheck raises NumericError on non-finite loss") {
    Tensor<double> a = Tensor<double>::full({2}, 1e308);
    CHECK_THROWS_AS(
        gradcheck<double>(
            [&](Tape<double>* t) { return sum_all(t, hadamard(t, a, a)); }, {a}),
        NumericError);
}

TEST_CASE("injected backward bug is caught by gradcheck") {
    Rng rng(10);
    Tensor<double> a = Tensor<double>::randn({3, 3}, rng);
    Tensor<double> b = Tensor<double>::randn({3, 3}, rng);
    Tensor<double> proj = Tensor<double>::randn({3, 3}, rng, 1e-3);
    auto fn = [&](Tape<double>* t) { return projected_loss(t, matmul(t, a, b), proj); };
    debug::inject_backward_bug = true;
    const double bad = gradcheck<double>(fn, {a, b});
    debug::inject_backward_bug = false;
    const double good = gradcheck<double>(fn, {a, b});
    CHECK(bad > 1e-3);
    CHECK(good < 1e-7);
}
