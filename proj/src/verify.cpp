#include "c2f/verify.hpp"

#include <functional>

#include "c2f/gradcheck.hpp"
#include "c2f/model.hpp"
#include "c2f/spatial.hpp"

namespace c2f {

namespace {

using D = double;
using Check = std::function<double(std::uint64_t)>;

Tensor<D> rnd(Shape s, Rng& rng) { return Tensor<D>::randn(s, rng); }

// Projection vectors are kept small so the probe loss has small magnitude:
// central differences subtract two nearly equal loss values, and their
// rounding noise must stay below the 1e-8 absolute floor of the relative
// error measure even at coordinates whose true gradient is structurally tiny.
Tensor<D> proj_small(Shape s, Rng& rng) { return Tensor<D>::randn(s, rng, 1e-4); }

// Shared pattern: random inputs from the seed, projected scalar loss, check
// the gradient of every differentiable input.
double check_matmul(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> a = rnd({4, 3}, rng), b = rnd({3, 5}, rng), proj = proj_small({4, 5}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, matmul(t, a, b), proj); }, {a, b});
}

double check_transpose(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> a = rnd({3, 4}, rng), proj = proj_small({4, 3}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, transpose(t, a), proj); }, {a});
}

double check_add(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> a = rnd({2, 3, 2, 2}, rng), b = rnd({2, 3, 2, 2}, rng), proj = proj_small({2, 3, 2, 2}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, add(t, a, b), proj); }, {a, b});
}

double check_hadamard(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> a = rnd({2, 3, 2, 2}, rng), b = rnd({2, 3, 2, 2}, rng), proj = proj_small({2, 3, 2, 2}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, hadamard(t, a, b), proj); }, {a, b});
}

double check_scale(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> a = rnd({3, 7}, rng), proj = proj_small({3, 7}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, scale(t, a, D(-1.7)), proj); }, {a});
}

double check_softmax_rows(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> a = rnd({4, 6}, rng), proj = proj_small({4, 6}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, softmax_rows(t, a), proj); }, {a});
}

double check_sum_all(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> a = rnd({3, 2, 2, 2}, rng);
    return gradcheck<D>([&](Tape<D>* t) { return sum_all(t, a); }, {a});
}

double check_depthwise(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({1, 4, 6, 6}, rng), k = rnd({4, 3, 3}, rng), b = rnd({4}, rng);
    Tensor<D> proj = proj_small({1, 4, 6, 6}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, depthwise_conv2d(t, x, k, b), proj); },
        {x, k, b});
}

double check_conv2d(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({2, 2, 8, 8}, rng), w = rnd({3, 2, 3, 3}, rng), b = rnd({3}, rng);
    Tensor<D> proj = proj_small({2, 3, 4, 4}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, conv2d(t, x, w, b, 2, 1), proj); }, {x, w, b});
}

double check_conv2d_stride4(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({1, 3, 8, 8}, rng), w = rnd({5, 3, 4, 4}, rng), b = rnd({5}, rng);
    Tensor<D> proj = proj_small({1, 5, 2, 2}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, conv2d(t, x, w, b, 4, 0), proj); }, {x, w, b});
}

double check_pointwise(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({1, 3, 4, 4}, rng), w = rnd({5, 3}, rng), b = rnd({5}, rng);
    Tensor<D> proj = proj_small({1, 5, 4, 4}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, pointwise_linear(t, x, w, b), proj); },
        {x, w, b});
}

double check_layer_norm(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({2, 5, 3, 3}, rng), g = rnd({5}, rng), b = rnd({5}, rng);
    Tensor<D> proj = proj_small({2, 5, 3, 3}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, layer_norm_channels(t, x, g, b), proj); },
        {x, g, b});
}

double check_gelu(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({3, 5}, rng), proj = proj_small({3, 5}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, gelu(t, x), proj); }, {x});
}

double check_sigmoid(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({3, 5}, rng), proj = proj_small({3, 5}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, sigmoid(t, x), proj); }, {x});
}

double check_l1_norm(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({1, 4, 3, 3}, rng), proj = proj_small({1, 4, 3, 3}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, l1_normalize_channels(t, x), proj); }, {x});
}

double check_minmax_norm(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({1, 3, 3, 3}, rng), proj = proj_small({1, 3, 3, 3}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, minmax_normalize_maps(t, x), proj); }, {x});
}

double check_channel_scale(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({2, 4, 3, 3}, rng), s = rnd({4}, rng), proj = proj_small({2, 4, 3, 3}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, channel_scale(t, x, s), proj); }, {x, s});
}

double check_gap(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({2, 3, 4, 4}, rng), proj = proj_small({2, 3}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, global_avg_pool(t, x), proj); }, {x});
}

double check_linear(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({3, 4}, rng), w = rnd({6, 4}, rng), b = rnd({6}, rng);
    Tensor<D> proj = proj_small({3, 6}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, linear(t, x, w, b), proj); }, {x, w, b});
}

double check_drop_path(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> x = rnd({4, 2, 3, 3}, rng), proj = proj_small({4, 2, 3, 3}, rng);
    const std::vector<char> keep = {1, 0, 1, 1};
    return gradcheck<D>(
        [&](Tape<D>* t) {
            return projected_loss(t, drop_path_apply(t, x, keep, D(1.0 / 0.7)), proj);
        },
        {x});
}

double check_cross_entropy(std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> logits = rnd({4, 5}, rng);
    const std::vector<int> labels = {1, 0, 4, 2};
    return gradcheck<D>(
        [&](Tape<D>* t) {
            return scale(t, cross_entropy_smoothed(t, logits, labels, D(0.1)), D(1e-4));
        },
        {logits});
}

double check_fusion(FusionStrategy s, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<D> a = rnd({1, 4, 3, 3}, rng), v = rnd({1, 4, 3, 3}, rng), proj = proj_small({1, 4, 3, 3}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, fusion_apply(t, a, v, s), proj); }, {a, v});
}

double check_conv_mod(std::uint64_t seed) {
    Rng rng(seed);
    ConvModParams<D> p = ConvModParams<D>::init(4, 3, true, true, rng);
    Tensor<D> x = rnd({1, 4, 6, 6}, rng), proj = proj_small({1, 4, 6, 6}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) {
            return projected_loss(t, conv_mod_forward(t, x, p, FusionStrategy::Hadamard), proj);
        },
        {x, p.w1, p.b1, p.dk, p.db, p.w2, p.b2, p.wo, p.bo});
}

double check_attention(std::uint64_t seed) {
    Rng rng(seed);
    AttentionParams<D> p = AttentionParams<D>::init(4, true, rng);
    Tensor<D> x = rnd({5, 4}, rng), proj = proj_small({5, 4}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, self_attention_forward(t, x, p), proj); },
        {x, p.wq, p.bq, p.wk, p.bk, p.wv, p.bv});
}

double check_ffn(std::uint64_t seed) {
    Rng rng(seed);
    FfnParams<D> f;
    f.fc1_w = rnd({6, 3}, rng);
    f.fc1_b = rnd({6}, rng);
    f.dw_k = rnd({6, 3, 3}, rng);
    f.dw_b = rnd({6}, rng);
    f.fc2_w = rnd({3, 6}, rng);
    f.fc2_b = rnd({3}, rng);
    Tensor<D> x = rnd({1, 3, 4, 4}, rng), proj = proj_small({1, 3, 4, 4}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return projected_loss(t, ffn_forward(t, x, f), proj); },
        {x, f.fc1_w, f.fc1_b, f.dw_k, f.dw_b, f.fc2_w, f.fc2_b});
}

double check_block(std::uint64_t seed) {
    Rng rng(seed);
    BlockParams<D> b;
    const std::int64_t c = 4;
    b.norm1 = NormParams<D>::init(c);
    b.mod = ConvModParams<D>::init(c, 3, true, true, rng);
    b.ls1 = Tensor<D>::full({c}, 0.5);
    b.norm2 = NormParams<D>::init(c);
    b.ffn.fc1_w = Tensor<D>::randn({8, c}, rng, 0.3);
    b.ffn.fc1_b = Tensor<D>::randn({8}, rng, 0.3);
    b.ffn.dw_k = Tensor<D>::randn({8, 3, 3}, rng, 0.3);
    b.ffn.dw_b = Tensor<D>::randn({8}, rng, 0.3);
    b.ffn.fc2_w = Tensor<D>::randn({c, 8}, rng, 0.3);
    b.ffn.fc2_b = Tensor<D>::randn({c}, rng, 0.3);
    b.ls2 = Tensor<D>::full({c}, 0.5);
    Tensor<D> x = rnd({1, c, 5, 5}, rng), proj = proj_small({1, c, 5, 5}, rng);
    Rng fwd(seed + 9);
    return gradcheck<D>(
        [&](Tape<D>* t) {
            Tensor<D> out = block_forward(t, x, b, FusionStrategy::Hadamard, false, fwd);
            return scale(t, projected_loss(t, out, proj), D(0.25));
        },
        {x, b.mod.w1, b.mod.dk, b.ls1, b.ffn.fc1_w, b.ffn.dw_k, b.ffn.fc2_w, b.norm1.gamma,
         b.norm2.beta});
}

double check_model_end_to_end(std::uint64_t seed) {
    Rng rng(seed);
    ModelConfig cfg;
    cfg.channels = {4, 8, 16, 32};
    cfg.depths = {1, 1, 1, 1};
    cfg.kernel_size = 5;
    cfg.num_classes = 4;
    cfg.drop_path_rate = 0.0;
    cfg.layer_scale_init = 0.1;
    Rng init(seed + 1);
    Model<D> m = build_model<D>(cfg, init);
    Tensor<D> x = rnd({2, 3, 32, 32}, rng);
    const std::vector<int> labels = {1, 3};
    std::vector<Tensor<D>> wrt = collect_params(m);
    wrt.push_back(x);
    Rng fwd(seed + 2);
    return gradcheck<D>(
        [&](Tape<D>* t) {
            Tensor<D> logits = model_forward(t, m, x, false, fwd);
            return scale(t, cross_entropy_smoothed(t, logits, labels, D(0.1)), D(1e-4));
        },
        wrt, -1.0, /*coord_limit=*/6);
}

}  // namespace

std::vector<OpCheckResult> run_gradcheck_suite(std::uint64_t seed_base, int num_seeds) {
    struct Item {
        const char* name;
        Check fn;
        double threshold;
    };
    const std::vector<Item> items = {
        {"matmul", check_matmul, 1e-5},
        {"transpose", check_transpose, 1e-5},
        {"add", check_add, 1e-5},
        {"hadamard", check_hadamard, 1e-5},
        {"scale", check_scale, 1e-5},
        {"softmax_rows", check_softmax_rows, 1e-5},
        {"sum_all", check_sum_all, 1e-5},
        {"depthwise_conv2d", check_depthwise, 1e-5},
        {"conv2d_s2p1", check_conv2d, 1e-5},
        {"conv2d_s4", check_conv2d_stride4, 1e-5},
        {"pointwise_linear", check_pointwise, 1e-5},
        {"layer_norm_channels", check_layer_norm, 1e-5},
        {"gelu", check_gelu, 1e-5},
        {"sigmoid", check_sigmoid, 1e-5},
        {"l1_normalize_channels", check_l1_norm, 1e-5},
        {"minmax_normalize_maps", check_minmax_norm, 1e-5},
        {"channel_scale", check_channel_scale, 1e-5},
        {"global_avg_pool", check_gap, 1e-5},
        {"linear", check_linear, 1e-5},
        {"drop_path", check_drop_path, 1e-5},
        {"cross_entropy_smoothed", check_cross_entropy, 1e-5},
        {"fusion_hadamard",
         [](std::uint64_t s) { return check_fusion(FusionStrategy::Hadamard, s); }, 1e-5},
        {"fusion_elementwise_sum",
         [](std::uint64_t s) { return check_fusion(FusionStrategy::ElementwiseSum, s); }, 1e-5},
        {"fusion_sigmoid_hadamard",
         [](std::uint64_t s) { return check_fusion(FusionStrategy::SigmoidHadamard, s); }, 1e-5},
        {"fusion_l1norm_hadamard",
         [](std::uint64_t s) { return check_fusion(FusionStrategy::L1NormHadamard, s); }, 1e-5},
        {"fusion_linearnorm_hadamard",
         [](std::uint64_t s) { return check_fusion(FusionStrategy::LinearNormHadamard, s); },
         1e-5},
        {"conv_mod_forward", check_conv_mod, 1e-5},
        {"self_attention_forward", check_attention, 1e-5},
        {"ffn_forward", check_ffn, 1e-5},
        {"block_forward", check_block, 1e-5},
        {"model_end_to_end", check_model_end_to_end, 1e-4},
    };
    std::vector<OpCheckResult> results;
    for (const auto& item : items) {
        OpCheckResult r;
        r.name = item.name;
        r.threshold = item.threshold;
        for (int s = 0; s < num_seeds; ++s) {
            r.max_rel_err =
                std::max(r.max_rel_err, item.fn(seed_base + static_cast<std::uint64_t>(s)));
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace c2f
