// Acceptance suite: one line per criterion, [PASS]/[FAIL] plus detail.
// Criterion 9 is directional at desk scale and is always reported, never
// fatal. Exit code is nonzero when any hard criterion fails.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "c2f/analysis.hpp"
#include "c2f/bench.hpp"
#include "c2f/checkpoint.hpp"
#include "c2f/train.hpp"
#include "c2f/verify.hpp"

using namespace c2f;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail, bool soft = false) {
    if (!pass && !soft) ++g_failures;
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : (soft ? "NOTE" : "FAIL"), criterion,
                detail.c_str());
    std::fflush(stdout);
}

bool within(double value, double target, double frac) {
    return std::abs(value - target) <= frac * target;
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.channels = {8, 16, 32, 64};
    cfg.depths = {1, 1, 2, 1};
    cfg.kernel_size = 5;
    cfg.num_classes = 10;
    cfg.drop_path_rate = 0.0;
    return cfg;
}

// 1. Named variants expand to the published tables exactly.
void criterion_config_fidelity() {
    bool ok = true;
    const auto expect = [&](Variant v, std::vector<std::int64_t> ch, std::vector<std::int64_t> d) {
        const ModelConfig c = ModelConfig::preset(v);
        ok = ok && c.channels == ch && c.depths == d;
    };
    expect(Variant::N, {64, 128, 256, 512}, {2, 2, 8, 2});
    expect(Variant::T, {72, 144, 288, 576}, {3, 3, 12, 3});
    expect(Variant::S, {72, 144, 288, 576}, {4, 4, 32, 4});
    expect(Variant::B, {96, 192, 384, 768}, {4, 4, 34, 4});
    expect(Variant::L, {128, 256, 512, 1024}, {4, 4, 48, 4});
    ok = ok && ModelConfig::preset(Variant::IS).total_blocks() == 18;
    ok = ok && ModelConfig::preset(Variant::IB).total_blocks() == 18;
    report(1, ok, "config fidelity: 5 pyramid variants exact, isotropic variants have 18 blocks");
}

// 2. Parameter totals within +-10% of the published sizes.
void criterion_params() {
    struct Row {
        Variant v;
        double target;
    };
    const std::vector<Row> rows = {{Variant::N, 15e6},  {Variant::T, 27e6}, {Variant::S, 50e6},
                                   {Variant::B, 90e6},  {Variant::L, 199e6}, {Variant::IS, 23e6},
                                   {Variant::IB, 86e6}};
    bool ok = true;
    std::string detail = "params (M):";
    char buf[64];
    for (const auto& r : rows) {
        const double total =
            static_cast<double>(count_params(ModelConfig::preset(r.v)).total_params());
        ok = ok && within(total, r.target, 0.10);
        std::snprintf(buf, sizeof(buf), " %s=%.2f", variant_name(r.v).c_str(), total / 1e6);
        detail += buf;
    }
    report(2, ok, detail + " all within 10% of 15/27/50/90/199/23/86");
}

// 3. MAC totals at 224x224 within +-15%.
void criterion_macs() {
    struct Row {
        Variant v;
        double target;
    };
    const std::vector<Row> rows = {
        {Variant::N, 2.2e9}, {Variant::T, 4.4e9}, {Variant::S, 8.7e9}, {Variant::B, 15.9e9}};
    bool ok = true;
    std::string detail = "macs at 224^2 (G):";
    char buf[64];
    for (const auto& r : rows) {
        const double total =
            static_cast<double>(count_macs(ModelConfig::preset(r.v), 224, 224).total_macs());
        ok = ok && within(total, r.target, 0.15);
        std::snprintf(buf, sizeof(buf), " %s=%.2f", variant_name(r.v).c_str(), total / 1e9);
        detail += buf;
    }
    report(3, ok, detail + " all within 15% of 2.2/4.4/8.7/15.9");
}

// 4. f64 gradient checks over 10 seeds: ops < 1e-5, end-to-end < 1e-4.
void criterion_gradients() {
    const auto results = run_gradcheck_suite(1000, 10);
    bool ok = true;
    double worst_op = 0.0, worst_e2e = 0.0;
    for (const auto& r : results) {
        ok = ok && r.pass();
        if (r.name == "model_end_to_end") {
            worst_e2e = r.max_rel_err;
        } else {
            worst_op = std::max(worst_op, r.max_rel_err);
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "gradcheck over 10 seeds: worst op %.2e (< 1e-5), end-to-end %.2e (< 1e-4)",
                  worst_op, worst_e2e);
    report(4, ok, buf);
}

// 5. Receptive fields exact for the full kernel set.
void criterion_locality() {
    bool ok = true;
    for (int k : {5, 7, 9, 11, 15, 21}) {
        const RfProbe one = receptive_field_probe_mod(k, 1, 2 * k + 9, -1, -1, 5);
        ok = ok && one.support_h() == k && one.support_w() == k && one.support_is_filled_rect();
        const RfProbe two = receptive_field_probe_mod(k, 2, 4 * k + 7, -1, -1, 5);
        ok = ok && two.support_h() == 2 * k - 1 && two.support_w() == 2 * k - 1 &&
             two.support_is_filled_rect();
        const RfProbe blk = receptive_field_probe_block(k, 2 * (k + 2) + 7, -1, -1, 5);
        ok = ok && blk.support_h() == k + 2 && blk.support_w() == k + 2 &&
             blk.support_is_filled_rect();
    }
    report(5, ok,
           "locality: kxk / (2k-1)^2 stacked / (k+2)^2 block supports exact for k in "
           "{5,7,9,11,15,21}");
}

// 6. Analytic complexity slopes plus measured wall-clock ratio growth.
void criterion_complexity() {
    const ComplexityTable t = complexity_compare(32, 11, {56, 112, 224});
    bool ok = std::abs(t.modulation_slope - 1.0) <= 0.01 &&
              std::abs(t.attention_quad_slope - 2.0) <= 0.01;

    // Wall clock: median over fewer repetitions than the CLI default so the
    // sweep fits the time budget; the directional margin is hundreds of
    // percent, far beyond timer noise.
    std::vector<double> ratios;
    for (std::size_t i = 0; i < 3; ++i) {
        const std::int64_t r = t.rows[i].resolution;
        const int reps = r >= 224 ? 2 : 3;
        const auto mod = bench_layer(BenchOp::Modulation, 32, 11, {r}, reps, 1);
        const auto attn = bench_layer(BenchOp::Attention, 32, 11, {r}, reps, 1);
        ratios.push_back(attn[0].wall_ms / mod[0].wall_ms);
    }
    const bool increasing = ratios[0] < ratios[1] && ratios[1] < ratios[2];
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "complexity: slopes mod %.4f attn %.4f; wall ratios attn/mod %.0fx -> %.0fx -> "
                  "%.0fx strictly increasing=%s",
                  t.modulation_slope, t.attention_quad_slope, ratios[0], ratios[1], ratios[2],
                  increasing ? "yes" : "no");
    report(6, ok && increasing, buf);
}

// 7. The five fusion strategies and their identities/properties.
void criterion_fusion() {
    Rng rng(77);
    bool ok = true;
    Tensor<double> v = Tensor<double>::randn({2, 5, 4, 4}, rng);
    Tensor<double> ones = Tensor<double>::ones(v.shape());
    Tensor<double> zeros = Tensor<double>::zeros(v.shape());

    Tensor<double> h = fusion_apply<double>(nullptr, ones, v, FusionStrategy::Hadamard);
    for (int i = 0; i < v.numel(); ++i) ok = ok && h.data()[i] == v.data()[i];
    Tensor<double> s = fusion_apply<double>(nullptr, zeros, v, FusionStrategy::ElementwiseSum);
    for (int i = 0; i < v.numel(); ++i) ok = ok && s.data()[i] == v.data()[i];
    Tensor<double> sg = fusion_apply<double>(nullptr, zeros, v, FusionStrategy::SigmoidHadamard);
    for (int i = 0; i < v.numel(); ++i) {
        ok = ok && std::abs(sg.data()[i] - 0.5 * v.data()[i]) <= 1e-12 * std::abs(v.data()[i]);
    }

    Tensor<double> a = Tensor<double>::randn(v.shape(), rng);
    Tensor<double> l1 = l1_normalize_channels<double>(nullptr, a);
    for (int n = 0; n < 2; ++n)
        for (int pos = 0; pos < 16; ++pos) {
            double sum = 0;
            for (int c = 0; c < 5; ++c) sum += std::abs(l1.data()[(n * 5 + c) * 16 + pos]);
            ok = ok && std::abs(sum - 1.0) <= 1e-5;
        }

    Tensor<double> mm = minmax_normalize_maps<double>(nullptr, a);
    for (int t = 0; t < 10; ++t) {
        double mx = 0, mn = 2;
        for (int i = 0; i < 16; ++i) {
            const double val = mm.data()[t * 16 + i];
            mx = std::max(mx, val);
            mn = std::min(mn, val);
        }
        ok = ok && mx == 1.0 && mn > 0.0;
    }
    report(7, ok,
           "fusion: all 5 strategies, identity cases exact, L1 channel sums 1 +- 1e-5, linear "
           "norm in (0,1] with max = 1");
}

// 8. The pinned training budget reaches 95% train accuracy, bitwise stable.
void criterion_learning() {
    const auto run = [](std::vector<HistoryRow>* hist_out, std::vector<float>* params_out) {
        ModelConfig cfg = tiny_config();
        TrainConfig tc;
        tc.batch_size = 32;
        tc.epochs = 8;  // 128 steps at 16 steps/epoch
        tc.lr_base = 0.016;
        tc.seed = 1;
        tc.train_size = 512;
        tc.val_size = 256;
        SynthDataset data;
        data.train_size = 512;
        data.val_size = 256;
        data.seed = 1;
        Rng init = Rng(1).fork(0);
        Model<float> m = build_model<float>(cfg, init);
        *hist_out = train_loop(m, tc, data);
        params_out->clear();
        for_each_param<float>(m, [&](const std::string&, Tensor<float>& t) {
            params_out->insert(params_out->end(), t.values().begin(), t.values().end());
        });
    };
    std::vector<HistoryRow> h1, h2;
    std::vector<float> p1, p2;
    run(&h1, &p1);
    run(&h2, &p2);
    const double train_acc = h1.back().train_acc;
    const bool learned = train_acc >= 0.95;
    const bool bitwise = history_to_csv(h1) == history_to_csv(h2) && p1.size() == p2.size() &&
                         std::memcmp(p1.data(), p2.data(), sizeof(float) * p1.size()) == 0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "learning: seed 1, 128 steps -> train acc %.4f (>= 0.95), rerun bitwise "
                  "identical=%s",
                  train_acc, bitwise ? "yes" : "no");
    report(8, learned && bitwise, buf);
}

// 9. Fusion ablation direction (soft, reported): Hadamard vs elementwise sum.
void criterion_ablation() {
    ModelConfig cfg = tiny_config();
    cfg.layer_scale_init = 1.0;  // let the modulation branch act from step 0
    TrainConfig tc;
    tc.batch_size = 32;
    tc.epochs = 2;
    tc.lr_base = 0.016;
    tc.train_size = 256;
    tc.val_size = 256;
    const auto rows = ablate_fusion(cfg, tc,
                                    {FusionStrategy::Hadamard, FusionStrategy::ElementwiseSum},
                                    {101, 102, 103, 104, 105});
    const double had = rows[0].mean, sum = rows[1].mean;
    const bool direction = had >= sum;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "ablation (soft): hadamard %.4f +- %.4f vs sum %.4f +- %.4f over 5 seeds -> "
                  "direction %s at desk scale",
                  had, rows[0].stddev, sum, rows[1].stddev,
                  direction ? "holds" : "NOT reproduced (reported as a finding, not a failure)");
    report(9, direction, buf, /*soft=*/true);
}

// 10. Checkpoint round trip and rejection of corrupted files.
void criterion_checkpoint() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "c2f_acceptance";
    fs::create_directories(dir);
    const std::string path = (dir / "model.c2f").string();
    Rng rng(3);
    Model<float> m = build_model<float>(tiny_config(), rng);
    checkpoint_save(m, path);
    Model<float> loaded = checkpoint_load<float>(path);
    Tensor<float> x = Tensor<float>::randn({2, 3, 32, 32}, rng);
    Rng fwd(0);
    Tensor<float> l1 = model_forward<float>(nullptr, m, x, false, fwd);
    Tensor<float> l2 = model_forward<float>(nullptr, loaded, x, false, fwd);
    bool ok = std::memcmp(l1.data(), l2.data(), sizeof(float) * l1.numel()) == 0;

    std::string blob;
    {
        FILE* f = std::fopen(path.c_str(), "rb");
        char c;
        while (std::fread(&c, 1, 1, f) == 1) blob += c;
        std::fclose(f);
    }
    bool rejected_magic = false, rejected_trunc = false;
    {
        std::string bad = blob;
        bad[1] = 'X';
        FILE* f = std::fopen(path.c_str(), "wb");
        std::fwrite(bad.data(), 1, bad.size(), f);
        std::fclose(f);
        try {
            checkpoint_load<float>(path);
        } catch (const FormatError&) {
            rejected_magic = true;
        }
        f = std::fopen(path.c_str(), "wb");
        std::fwrite(blob.data(), 1, blob.size() - 32, f);
        std::fclose(f);
        try {
            checkpoint_load<float>(path);
        } catch (const FormatError&) {
            rejected_trunc = true;
        }
    }
    ok = ok && rejected_magic && rejected_trunc;
    report(10, ok,
           "checkpoint: save->load eval logits bitwise identical; corrupted magic and truncated "
           "payload rejected");
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_config_fidelity();
    criterion_params();
    criterion_macs();
    criterion_gradients();
    criterion_locality();
    criterion_complexity();
    criterion_fusion();
    criterion_learning();
    criterion_ablation();
    criterion_checkpoint();
    std::printf("%d hard failure%s\n", g_failures, g_failures == 1 ? "" : "s");
    return g_failures == 0 ? 0 : 1;
}
