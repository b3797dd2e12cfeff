#include "c2f/model.hpp"

namespace c2f {

namespace {

constexpr double kInitStd = 0.02;

template <typename T>
ConvLayer<T> init_conv(std::int64_t cin, std::int64_t cout, int k, int stride, int pad,
                       bool gelu_after, Rng& rng) {
    ConvLayer<T> l;
    l.w = Tensor<T>::truncated_normal({cout, cin, k, k}, rng, kInitStd);
    l.b = Tensor<T>::zeros({cout});
    l.stride = stride;
    l.pad = pad;
    l.gelu_after = gelu_after;
    return l;
}

template <typename T>
BlockParams<T> init_block(const ModelConfig& cfg, std::int64_t c, double drop_p, Rng& rng) {
    BlockParams<T> b;
    b.norm1 = NormParams<T>::init(c);
    b.mod = ConvModParams<T>::init(c, cfg.kernel_size, cfg.a_branch_gelu, cfg.output_projection,
                                   rng);
    b.ls1 = Tensor<T>::full({c}, static_cast<T>(cfg.layer_scale_init));
    b.norm2 = NormParams<T>::init(c);
    const std::int64_t hidden = cfg.ffn_hidden(c);
    b.ffn.fc1_w = Tensor<T>::truncated_normal({hidden, c}, rng, kInitStd);
    b.ffn.fc1_b = Tensor<T>::zeros({hidden});
    b.ffn.dw_k = Tensor<T>::truncated_normal({hidden, 3, 3}, rng, kInitStd);
    b.ffn.dw_b = Tensor<T>::zeros({hidden});
    b.ffn.fc2_w = Tensor<T>::truncated_normal({c, hidden}, rng, kInitStd);
    b.ffn.fc2_b = Tensor<T>::zeros({c});
    b.ls2 = Tensor<T>::full({c}, static_cast<T>(cfg.layer_scale_init));
    b.drop_path_p = drop_p;
    return b;
}

}  // namespace

template <typename T>
Model<T> build_model(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    Model<T> m;
    m.cfg = cfg;

    const std::int64_t total = cfg.total_blocks();
    std::int64_t block_index = 0;
    const auto drop_p = [&](std::int64_t i) {
        if (total <= 1 || cfg.drop_path_rate == 0.0) return 0.0;
        return cfg.drop_path_rate * static_cast<double>(i) / static_cast<double>(total - 1);
    };

    if (!cfg.isotropic) {
        for (std::size_t s = 0; s < 4; ++s) {
            StageParams<T> stage;
            const std::int64_t c = cfg.channels[s];
            if (s == 0) {
                stage.embed.convs.push_back(init_conv<T>(3, c, 4, 4, 0, false, rng));
            } else {
                stage.embed.convs.push_back(
                    init_conv<T>(cfg.channels[s - 1], c, 2, 2, 0, false, rng));
            }
            stage.embed.norm = NormParams<T>::init(c);
            for (std::int64_t b = 0; b < cfg.depths[s]; ++b) {
                stage.blocks.push_back(init_block<T>(cfg, c, drop_p(block_index++), rng));
            }
            m.stages.push_back(std::move(stage));
        }
    } else {
        StageParams<T> stage;
        const std::int64_t w = cfg.channels[0];
        if (cfg.patch_embed_style == PatchEmbedStyle::SingleConv) {
            stage.embed.convs.push_back(init_conv<T>(3, w, 16, 16, 0, false, rng));
        } else {
            const std::int64_t w4 = std::max<std::int64_t>(1, w / 4);
            const std::int64_t w2 = std::max<std::int64_t>(1, w / 2);
            stage.embed.convs.push_back(init_conv<T>(3, w4, 3, 2, 1, true, rng));
            stage.embed.convs.push_back(init_conv<T>(w4, w2, 3, 2, 1, true, rng));
            stage.embed.convs.push_back(init_conv<T>(w2, w, 3, 2, 1, false, rng));
            stage.embed.convs.push_back(init_conv<T>(w, w, 2, 2, 0, false, rng));
        }
        stage.embed.norm = NormParams<T>::init(w);
        for (std::int64_t b = 0; b < cfg.depths[0]; ++b) {
            stage.blocks.push_back(init_block<T>(cfg, w, drop_p(block_index++), rng));
        }
        m.stages.push_back(std::move(stage));
    }

    const std::int64_t ch = cfg.channels.back();
    m.head_norm = NormParams<T>::init(ch);
    m.head_w = Tensor<T>::truncated_normal({cfg.num_classes, ch}, rng, kInitStd);
    m.head_b = Tensor<T>::zeros({cfg.num_classes});
    return m;
}

template <typename T>
Tensor<T> patch_embed_forward(Tape<T>* tape, const Tensor<T>& x, const PatchEmbedParams<T>& pe) {
    Tensor<T> h = x;
    for (const auto& conv : pe.convs) {
        h = conv2d(tape, h, conv.w, conv.b, conv.stride, conv.pad);
        if (conv.gelu_after) h = gelu(tape, h);
    }
    return layer_norm_channels(tape, h, pe.norm.gamma, pe.norm.beta);
}

template <typename T>
Tensor<T> ffn_forward(Tape<T>* tape, const Tensor<T>& x, const FfnParams<T>& p) {
    Tensor<T> h = pointwise_linear(tape, x, p.fc1_w, p.fc1_b);
    h = depthwise_conv2d(tape, h, p.dw_k, p.dw_b);
    h = gelu(tape, h);
    return pointwise_linear(tape, h, p.fc2_w, p.fc2_b);
}

template <typename T>
Tensor<T> block_forward(Tape<T>* tape, const Tensor<T>& x, const BlockParams<T>& p,
                        FusionStrategy fusion, bool training, Rng& rng) {
    Tensor<T> h = layer_norm_channels(tape, x, p.norm1.gamma, p.norm1.beta);
    h = conv_mod_forward(tape, h, p.mod, fusion);
    h = channel_scale(tape, h, p.ls1);
    h = drop_path(tape, h, p.drop_path_p, training, rng);
    Tensor<T> x1 = add(tape, x, h);

    Tensor<T> f = layer_norm_channels(tape, x1, p.norm2.gamma, p.norm2.beta);
    f = ffn_forward(tape, f, p.ffn);
    f = channel_scale(tape, f, p.ls2);
    f = drop_path(tape, f, p.drop_path_p, training, rng);
    return add(tape, x1, f);
}

template <typename T>
Tensor<T> model_forward(Tape<T>* tape, const Model<T>& m, const Tensor<T>& x, bool training,
                        Rng& rng) {
    if (x.shape().nd != 4)
        throw DimensionError("model_forward: expected NCHW input, got " + x.shape().str());
    const int stride = m.cfg.total_stride();
    if (x.shape()[2] % stride != 0 || x.shape()[3] % stride != 0)
        throw DimensionError("model_forward: input " + x.shape().str() +
                             " not divisible by total stride " + std::to_string(stride));

    Tensor<T> h = x;
    for (const auto& stage : m.stages) {
        h = patch_embed_forward(tape, h, stage.embed);
        for (const auto& block : stage.blocks) {
            h = block_forward(tape, h, block, m.cfg.fusion, training, rng);
        }
    }
    Tensor<T> pooled = global_avg_pool(tape, h);  // [N,C]
    const std::int64_t n = pooled.shape()[0], c = pooled.shape()[1];
    Tensor<T> as_map = pooled.reshaped({n, c, 1, 1});
    Tensor<T> normed = layer_norm_channels(tape, as_map, m.head_norm.gamma, m.head_norm.beta);
    return linear(tape, normed.reshaped({n, c}), m.head_w, m.head_b);
}

template <typename T>
void for_each_param(Model<T>& m,
                    const std::function<void(const std::string&, Tensor<T>&)>& fn) {
    for (std::size_t s = 0; s < m.stages.size(); ++s) {
        auto& stage = m.stages[s];
        const std::string embed_prefix =
            s == 0 ? "stem" : "stage" + std::to_string(s + 1) + ".downsample";
        for (std::size_t ci = 0; ci < stage.embed.convs.size(); ++ci) {
            fn(embed_prefix + ".conv" + std::to_string(ci) + ".w", stage.embed.convs[ci].w);
            fn(embed_prefix + ".conv" + std::to_string(ci) + ".b", stage.embed.convs[ci].b);
        }
        fn(embed_prefix + ".norm.gamma", stage.embed.norm.gamma);
        fn(embed_prefix + ".norm.beta", stage.embed.norm.beta);
        for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
            auto& blk = stage.blocks[b];
            const std::string bp =
                "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
            fn(bp + ".norm1.gamma", blk.norm1.gamma);
            fn(bp + ".norm1.beta", blk.norm1.beta);
            fn(bp + ".mod.w1.w", blk.mod.w1);
            fn(bp + ".mod.w1.b", blk.mod.b1);
            fn(bp + ".mod.dconv.w", blk.mod.dk);
            fn(bp + ".mod.dconv.b", blk.mod.db);
            fn(bp + ".mod.w2.w", blk.mod.w2);
            fn(bp + ".mod.w2.b", blk.mod.b2);
            if (blk.mod.has_output_projection()) {
                fn(bp + ".mod.proj.w", blk.mod.wo);
                fn(bp + ".mod.proj.b", blk.mod.bo);
            }
            fn(bp + ".ls1", blk.ls1);
            fn(bp + ".norm2.gamma", blk.norm2.gamma);
            fn(bp + ".norm2.beta", blk.norm2.beta);
            fn(bp + ".ffn.fc1.w", blk.ffn.fc1_w);
            fn(bp + ".ffn.fc1.b", blk.ffn.fc1_b);
            fn(bp + ".ffn.dw3.w", blk.ffn.dw_k);
            fn(bp + ".ffn.dw3.b", blk.ffn.dw_b);
            fn(bp + ".ffn.fc2.w", blk.ffn.fc2_w);
            fn(bp + ".ffn.fc2.b", blk.ffn.fc2_b);
            fn(bp + ".ls2", blk.ls2);
        }
    }
    fn("head.norm.gamma", m.head_norm.gamma);
    fn("head.norm.beta", m.head_norm.beta);
    fn("head.linear.w", m.head_w);
    fn("head.linear.b", m.head_b);
}

template <typename T>
std::vector<Tensor<T>> collect_params(Model<T>& m) {
    std::vector<Tensor<T>> out;
    for_each_param<T>(m, [&](const std::string&, Tensor<T>& t) { out.push_back(t); });
    return out;
}

template <typename T>
void set_params_requires_grad(Model<T>& m, bool v) {
    for_each_param<T>(m, [&](const std::string&, Tensor<T>& t) { t.set_requires_grad(v); });
}

template <typename T>
void zero_all_grads(Model<T>& m) {
    for_each_param<T>(m, [&](const std::string&, Tensor<T>& t) { t.zero_grad(); });
}

#define C2F_INSTANTIATE_MODEL(T)                                                               \
    template struct NormParams<T>;                                                            \
    template Model<T> build_model<T>(const ModelConfig&, Rng&);                               \
    template Tensor<T> patch_embed_forward<T>(Tape<T>*, const Tensor<T>&,                     \
                                              const PatchEmbedParams<T>&);                    \
    template Tensor<T> ffn_forward<T>(Tape<T>*, const Tensor<T>&, const FfnParams<T>&);       \
    template Tensor<T> block_forward<T>(Tape<T>*, const Tensor<T>&, const BlockParams<T>&,    \
                                        FusionStrategy, bool, Rng&);                          \
    template Tensor<T> model_forward<T>(Tape<T>*, const Model<T>&, const Tensor<T>&, bool,    \
                                        Rng&);                                                \
    template void for_each_param<T>(Model<T>&,                                                \
                                    const std::function<void(const std::string&, Tensor<T>&)>&); \
    template std::vector<Tensor<T>> collect_params<T>(Model<T>&);                             \
    template void set_params_requires_grad<T>(Model<T>&, bool);                               \
    template void zero_all_grads<T>(Model<T>&);

C2F_INSTANTIATE_MODEL(float)
C2F_INSTANTIATE_MODEL(double)

}  // namespace c2f
