#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>

#include "c2f/train.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace c2f;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.channels = {8, 16, 32, 64};
    cfg.depths = {1, 1, 2, 1};
    cfg.kernel_size = 5;
    cfg.num_classes = 10;
    cfg.drop_path_rate = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("adamw: zero gradients leave parameters unchanged when decay is off") {
    Rng rng(1);
    std::vector<Tensor<double>> params = {Tensor<double>::randn({3, 3}, rng)};
    const std::vector<double> before = params[0].values();
    OptimState<double> s = OptimState<double>::init(params);
    s.weight_decay = 0.0;
    adamw_step(params, s, 1e-3);
    for (int i = 0; i < 9; ++i) CHECK(params[0].data()[i] == before[static_cast<std::size_t>(i)]);
    CHECK(s.t == 1);
}

TEST_CASE("adamw: zero gradients with decay shrink parameters exactly") {
    Rng rng(2);
    std::vector<Tensor<double>> params = {Tensor<double>::randn({4}, rng)};
    const std::vector<double> before = params[0].values();
    OptimState<double> s = OptimState<double>::init(params);
    s.weight_decay = 0.05;
    const double lr = 1e-2;
    adamw_step(params, s, lr);
    for (int i = 0; i < 4; ++i) {
        const double expect = before[static_cast<std::size_t>(i)] -
                              lr * 0.05 * before[static_cast<std::size_t>(i)];
        CHECK(params[0].data()[i] == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("adamw single-scalar steps match the hand recurrence") {
    std::vector<Tensor<double>> params = {Tensor<double>::full({1}, 0.8)};
    params[0].set_requires_grad(true);
    OptimState<double> s = OptimState<double>::init(params);
    oracle::AdamScalar ref;
    double p_ref = 0.8;
    const double gs[] = {1.0, -0.5, 0.25, 2.0};
    for (double g : gs) {
        params[0].ensure_grad()[0] = g;
        adamw_step(params, s, 1e-3);
        p_ref = ref.step(p_ref, g, 1e-3, 0.9, 0.999, 1e-8, 0.05);
        CHECK(params[0].data()[0] == doctest::Approx(p_ref).epsilon(1e-14));
        params[0].zero_grad();
    }
}

TEST_CASE("cosine schedule endpoints and midpoint") {
    CHECK(cosine_lr(100, 1000, 100, 0.4) == doctest::Approx(0.4));
    CHECK(cosine_lr(1000, 1000, 100, 0.4) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cosine_lr(550, 1000, 100, 0.4) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(cosine_lr(0, 1000, 100, 0.4) == doctest::Approx(0.0));
    CHECK(cosine_lr(0, 1000, 0, 0.4) == doctest::Approx(0.4));  // no warmup
    CHECK_THROWS_AS(cosine_lr(-1, 1000, 100, 0.4), ContractError);
    CHECK_THROWS_AS(cosine_lr(1001, 1000, 100, 0.4), ContractError);
    CHECK_THROWS_AS(cosine_lr(5, 1000, 1000, 0.4), ContractError);
}

TEST_CASE("effective lr follows the batch scaling rule") {
    TrainConfig cfg;
    cfg.lr_base = 0.001;
    cfg.batch_size = 1024;
    CHECK(cfg.effective_lr() == doctest::Approx(0.001));
    cfg.batch_size = 256;
    CHECK(cfg.effective_lr() == doctest::Approx(0.00025));
}

TEST_CASE("cross entropy: uniform logits, confident logits, oracle") {
    Tensor<double> uniform = Tensor<double>::zeros({2, 10});
    const std::vector<int> labels = {3, 7};
    Tensor<double> l = cross_entropy_smoothed<double>(nullptr, uniform, labels, 0.0);
    CHECK(l.item() == doctest::Approx(std::log(10.0)).epsilon(1e-9));

    Tensor<double> confident = Tensor<double>::zeros({1, 5});
    confident.data()[2] = 500.0;
    Tensor<double> l2 =
        cross_entropy_smoothed<double>(nullptr, confident, std::vector<int>{2}, 0.0);
    CHECK(l2.item() == doctest::Approx(0.0).epsilon(1e-9));

    Rng rng(3);
    Tensor<double> logits = Tensor<double>::randn({3, 4}, rng);
    const std::vector<int> labs = {0, 2, 3};
    Tensor<double> l3 = cross_entropy_smoothed<double>(nullptr, logits, labs, 0.1);
    CHECK(l3.item() ==
          doctest::Approx(oracle::cross_entropy_smoothed(logits.values(), labs, 3, 4, 0.1))
              .epsilon(1e-6));

    CHECK_THROWS_AS(cross_entropy_smoothed<double>(nullptr, logits, std::vector<int>{0, 1, 9}, 0.1),
                    ContractError);
}

TEST_CASE("smoothed loss is bounded below by the smoothed target entropy") {
    // H(t) with t = eps/K + (1-eps) one-hot.
    const double eps = 0.1;
    const int k = 6;
    double h = 0.0;
    for (int j = 0; j < k; ++j) {
        const double t = eps / k + (j == 0 ? 1.0 - eps : 0.0);
        h -= t * std::log(t);
    }
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor<double> logits = Tensor<double>::randn({1, k}, rng, 3.0);
        Tensor<double> l = cross_entropy_smoothed<double>(nullptr, logits, {0}, eps);
        CHECK(l.item() >= h - 1e-9);
    }
    // Equality when softmax(logits) equals the target exactly.
    Tensor<double> match = Tensor<double>::zeros({1, k});
    for (int j = 0; j < k; ++j) {
        const double t = eps / k + (j == 0 ? 1.0 - eps : 0.0);
        match.data()[j] = std::log(t);
    }
    Tensor<double> le = cross_entropy_smoothed<double>(nullptr, match, {0}, eps);
    CHECK(le.item() == doctest::Approx(h).epsilon(1e-9));
}

TEST_CASE("one adamw step on a convex probe strictly decreases the loss") {
    Rng rng(5);
    Tensor<double> features = Tensor<double>::randn({16, 8}, rng);
    Tensor<double> w = Tensor<double>::randn({4, 8}, rng, 0.1);
    Tensor<double> b = Tensor<double>::zeros({4});
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    std::vector<int> labels(16);
    for (int i = 0; i < 16; ++i) labels[static_cast<std::size_t>(i)] = i % 4;

    const auto loss_of = [&](Tape<double>* t) {
        return cross_entropy_smoothed(t, linear(t, features, w, b), labels, 0.0);
    };
    Tape<double> tape;
    Tensor<double> l0 = loss_of(&tape);
    tape.backward(l0);
    std::vector<Tensor<double>> params = {w, b};
    OptimState<double> s = OptimState<double>::init(params);
    s.weight_decay = 0.0;
    adamw_step(params, s, 1e-4);
    Tensor<double> l1 = loss_of(nullptr);
    CHECK(l1.item() < l0.item());
}

TEST_CASE("gradient flow reaches every parameter tensor") {
    Rng rng(6);
    ModelConfig cfg = tiny_config();
    Model<float> m = build_model<float>(cfg, rng);
    set_params_requires_grad(m, true);
    SynthDataset data;
    data.seed = 1;
    std::vector<float> img(3 * 32 * 32);
    Tensor<float> batch = Tensor<float>::zeros({4, 3, 32, 32});
    std::vector<int> labels(4);
    for (int i = 0; i < 4; ++i) {
        data.render(i, img.data());
        std::memcpy(batch.data() + i * img.size(), img.data(), sizeof(float) * img.size());
        labels[static_cast<std::size_t>(i)] = data.label(i);
    }
    Tape<float> tape;
    Rng fwd(0);
    Tensor<float> logits = model_forward(&tape, m, batch, true, fwd);
    Tensor<float> loss = cross_entropy_smoothed(&tape, logits, labels, 0.1f);
    tape.backward(loss);
    for_each_param<float>(m, [&](const std::string& name, Tensor<float>& t) {
        const float* g = t.grad_ptr();
        REQUIRE_MESSAGE(g != nullptr, name.c_str());
        bool any = false;
        for (int i = 0; i < t.numel(); ++i) any = any || g[i] != 0.0f;
        CHECK_MESSAGE(any, name.c_str());
    });
}

TEST_CASE("synthetic dataset: determinism, balance, value range") {
    SynthDataset d;
    d.seed = 42;
    std::vector<float> a(3 * 32 * 32), b(3 * 32 * 32);
    d.render(17, a.data());
    d.render(17, b.data());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0);
    d.render(18, b.data());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) != 0);

    int counts[10] = {0};
    for (int i = 0; i < 512; ++i) counts[d.label(i) % 10]++;
    for (int c = 0; c < 10; ++c) CHECK(counts[c] >= 51);

    for (float v : a) {
        CHECK(std::isfinite(v));
        CHECK(std::abs(v) < 2.0f);
    }
}

TEST_CASE("train loop: lr 0 leaves the loss trajectory constant") {
    Rng rng(7);
    ModelConfig cfg = tiny_config();
    cfg.channels = {4, 8, 16, 32};
    cfg.depths = {1, 1, 1, 1};
    Model<float> m = build_model<float>(cfg, rng);
    TrainConfig tc;
    tc.batch_size = 16;
    tc.epochs = 3;
    tc.lr_base = 0.0;
    tc.warmup_steps = 0;
    tc.seed = 9;
    tc.train_size = 64;
    tc.val_size = 32;
    SynthDataset data;
    data.train_size = 64;
    data.val_size = 32;
    data.seed = 9;
    const auto hist = train_loop(m, tc, data);
    REQUIRE(hist.size() == 3);
    CHECK(std::abs(hist[0].loss - hist[1].loss) < 1e-7);
    CHECK(std::abs(hist[1].loss - hist[2].loss) < 1e-7);
}

TEST_CASE("identical seeds give bitwise-identical training") {
    const auto run = [](std::vector<float>* params_out) {
        Rng rng = Rng(33).fork(0);
        ModelConfig cfg = tiny_config();
        cfg.channels = {4, 8, 16, 32};
        cfg.depths = {1, 1, 1, 1};
        Model<float> m = build_model<float>(cfg, rng);
        TrainConfig tc;
        tc.batch_size = 16;
        tc.epochs = 2;
        tc.lr_base = 0.01;
        tc.seed = 33;
        tc.train_size = 64;
        tc.val_size = 32;
        SynthDataset data;
        data.train_size = 64;
        data.val_size = 32;
        data.seed = 33;
        const auto hist = train_loop(m, tc, data);
        params_out->clear();
        for_each_param<float>(m, [&](const std::string&, Tensor<float>& t) {
            params_out->insert(params_out->end(), t.values().begin(), t.values().end());
        });
        return hist;
    };
    std::vector<float> p1, p2;
    const auto h1 = run(&p1);
    const auto h2 = run(&p2);
    CHECK(history_to_csv(h1) == history_to_csv(h2));
    REQUIRE(p1.size() == p2.size());
    CHECK(std::memcmp(p1.data(), p2.data(), sizeof(float) * p1.size()) == 0);
}

TEST_CASE("short training run reduces the loss") {
    Rng rng = Rng(5).fork(0);
    ModelConfig cfg = tiny_config();
    Model<float> m = build_model<float>(cfg, rng);
    TrainConfig tc;
    tc.batch_size = 32;
    tc.epochs = 4;
    tc.lr_base = 0.016;  // effective lr 5e-4 at batch 32
    tc.seed = 5;
    tc.train_size = 256;
    tc.val_size = 64;
    SynthDataset data;
    data.train_size = 256;
    data.val_size = 64;
    data.seed = 5;
    const auto hist = train_loop(m, tc, data);
    CHECK(hist.back().loss < hist.front().loss);
    CHECK(hist.back().train_acc > 0.2);  // well above the 10% chance floor
}

TEST_CASE("history csv format") {
    std::vector<HistoryRow> rows = {{10, 0.5, 1.25, 0.5, 0.25}};
    const std::string csv = history_to_csv(rows);
    CHECK(csv == "step,lr,loss,train_acc,val_acc\n10,0.5,1.25,0.5,0.25\n");
}

TEST_CASE("ablation table shape and ordering") {
    ModelConfig cfg = tiny_config();
    cfg.channels = {4, 8, 16, 32};
    cfg.depths = {1, 1, 1, 1};
    TrainConfig tc;
    tc.batch_size = 16;
    tc.epochs = 1;
    tc.lr_base = 0.016;
    tc.train_size = 32;
    tc.val_size = 32;
    const std::vector<FusionStrategy> strategies = {FusionStrategy::ElementwiseSum,
                                                    FusionStrategy::Hadamard};
    CHECK_THROWS_AS(ablate_fusion(cfg, tc, strategies, {1, 2}), ContractError);
    const auto rows = ablate_fusion(cfg, tc, strategies, {1, 2, 3});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].strategy == FusionStrategy::ElementwiseSum);  // input order preserved
    CHECK(rows[1].strategy == FusionStrategy::Hadamard);
    for (const auto& r : rows) {
        CHECK(r.val_accs.size() == 3);
        for (double a : r.val_accs) {
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
        }
        CHECK(r.mean >= 0.0);
        CHECK(r.mean <= 1.0);
    }
}

TEST_CASE("training with stochastic depth is finite and reproducible") {
    const auto run = [] {
        ModelConfig cfg = tiny_config();
        cfg.channels = {4, 8, 16, 32};
        cfg.depths = {1, 1, 1, 1};
        cfg.drop_path_rate = 0.3;
        Rng init = Rng(21).fork(0);
        Model<float> m = build_model<float>(cfg, init);
        TrainConfig tc;
        tc.batch_size = 16;
        tc.epochs = 2;
        tc.lr_base = 0.016;
        tc.seed = 21;
        tc.train_size = 64;
        tc.val_size = 32;
        SynthDataset data;
        data.train_size = 64;
        data.val_size = 32;
        data.seed = 21;
        return history_to_csv(train_loop(m, tc, data));
    };
    const std::string a = run();
    const std::string b = run();
    CHECK(a == b);
    CHECK(a.find("nan") == std::string::npos);
    CHECK(a.find("inf") == std::string::npos);
}
